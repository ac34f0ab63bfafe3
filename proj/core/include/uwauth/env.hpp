#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace uwauth {

using Rng = std::mt19937_64;

/// Nominal speed of sound underwater (m/s).
inline constexpr double kSoundSpeed = 1500.0;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

namespace env {

/// Parameters of the line-of-sight acoustic channel.
///
/// Pathloss distance convention: the spreading term uses metres, the
/// absorption term uses kilometres (absorption is a dB/km coefficient).
struct AcousticParams {
  double nu = 1.5;            ///< spreading factor
  double n1 = 50.0;           ///< noise PSD level at 1 kHz, dB re uPa^2/Hz
  double zeta = 1.8;          ///< noise PSD decay constant
  double band_lo_khz = 1.0;   ///< lower edge of the PSD validity band
  double band_hi_khz = 100.0; ///< upper edge of the PSD validity band
  double carrier_khz = 10.0;  ///< frequency at which pathloss is evaluated

  /// Throws DomainError naming the violated constraint.
  void validate() const;
};

/// Thorp-style absorption coefficient in dB/km.
double absorption_db_per_km(double f_khz);

/// Spreading plus absorption loss in dB for a range in metres.
double pathloss_db(double d_m, double f_khz, double nu);

/// Convenience: linear pathloss at the configured carrier.
double pathloss_linear(double d_m, const AcousticParams& params);

/// Ambient-noise PSD in dB re uPa^2/Hz; only valid inside the configured band.
double noise_psd_db(double f_khz, const AcousticParams& params);

/// Number of Simpson subintervals used to invert the noise PSD.
inline constexpr int kPsdQuadratureIntervals = 4096;

/// Normalized autocorrelation R_w[l] = R_w(l T_S) / R_w(0), l = 0..max_lag-1,
/// obtained by cosine-transforming the linear PSD over the validity band.
std::vector<double> noise_autocorrelation(const AcousticParams& params,
                                          double sample_interval,
                                          std::size_t max_lag);

/// Diagonal loading applied when the plain Cholesky factorization fails.
inline constexpr double kCovarianceJitter = 1e-10;

/// Noise covariance C = sigma2 * Cn, with Cn a unit-diagonal Toeplitz matrix.
///
/// Immutable once built; the Cholesky factor is shared between copies so a
/// covariance can be rescaled per SNR point without refactoring.
class NoiseCovariance {
 public:
  NoiseCovariance() = default;

  std::size_t q() const noexcept { return q_; }
  double sigma2() const noexcept { return sigma2_; }
  std::span<const double> autocorr() const noexcept { return autocorr_; }
  bool jittered() const noexcept { return jittered_; }
  bool is_identity() const noexcept { return identity_; }

  /// Lower-triangular factor L with Cn = L L^T.
  const Eigen::MatrixXd& factor() const { return *factor_; }
  /// The normalized Toeplitz matrix Cn (including any jitter).
  Eigen::MatrixXd normalized_matrix() const;

  /// Same correlation structure, different noise power.
  NoiseCovariance with_sigma2(double sigma2) const;

  /// L^{-1} v (one triangular solve).
  Eigen::VectorXd whiten(const Eigen::VectorXd& v) const;
  /// Cn^{-1} v via two triangular solves.
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;
  /// v^T Cn^{-1} v.
  double quad_form(const Eigen::VectorXd& v) const;

 private:
  friend NoiseCovariance build_covariance(std::span<const double>, std::size_t, double);

  std::size_t q_ = 0;
  double sigma2_ = 0.0;
  std::vector<double> autocorr_;
  std::shared_ptr<const Eigen::MatrixXd> factor_;
  bool jittered_ = false;
  bool identity_ = false;
};

/// Forms the q x q Toeplitz matrix from autocorr[0..q-1] and factors it.
/// Throws IllConditionedError if it is not positive definite even after
/// adding kCovarianceJitter to the diagonal.
NoiseCovariance build_covariance(std::span<const double> autocorr, std::size_t q,
                                 double sigma2);

/// White special case: Cn = I.
NoiseCovariance white_covariance(std::size_t q, double sigma2);

/// Draws w = sigma L g with g i.i.d. standard normal.
Eigen::VectorXd sample_colored_noise(const NoiseCovariance& cov, Rng& rng);

}  // namespace env
}  // namespace uwauth
