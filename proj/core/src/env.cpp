#include "uwauth/env.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>

#include "uwauth/error.hpp"

namespace uwauth::env {

void AcousticParams::validate() const {
  if (!(band_lo_khz >= 1.0 && band_lo_khz < band_hi_khz && band_hi_khz <= 100.0)) {
    throw DomainError("acoustic band must satisfy 1 <= band_lo_khz < band_hi_khz <= 100 kHz "
                      "(noise PSD approximation validity)");
  }
  if (!(nu > 0.0)) throw DomainError("spreading factor nu must be positive");
  if (!(carrier_khz >= band_lo_khz && carrier_khz <= band_hi_khz)) {
    throw DomainError("carrier_khz must lie inside [band_lo_khz, band_hi_khz]");
  }
}

double absorption_db_per_km(double f_khz) {
  if (!(f_khz > 0.0)) throw DomainError("absorption: frequency must be positive");
  const double f2 = f_khz * f_khz;
  return 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003;
}

double pathloss_db(double d_m, double f_khz, double nu) {
  if (!(d_m > 0.0)) throw DomainError("pathloss: distance must be positive");
  return nu * 10.0 * std::log10(d_m) + (d_m / 1000.0) * absorption_db_per_km(f_khz);
}

double pathloss_linear(double d_m, const AcousticParams& params) {
  return db_to_linear(pathloss_db(d_m, params.carrier_khz, params.nu));
}

double noise_psd_db(double f_khz, const AcousticParams& params) {
  if (!(f_khz >= params.band_lo_khz && f_khz <= params.band_hi_khz)) {
    throw DomainError("noise PSD evaluated outside its validity band");
  }
  return params.n1 - params.zeta * 10.0 * std::log10(f_khz);
}

std::vector<double> noise_autocorrelation(const AcousticParams& params,
                                          double sample_interval, std::size_t max_lag) {
  if (!(params.band_hi_khz > params.band_lo_khz)) {
    throw DomainError("noise autocorrelation: degenerate band");
  }
  if (!(sample_interval > 0.0)) throw DomainError("sample interval must be positive");
  if (max_lag < 1) throw DomainError("max_lag must be at least 1");

  // Composite Simpson on a uniform grid. The spectrum is real and even, so the
  // negative-frequency half only doubles every lag and drops out on
  // normalization.
  constexpr int n = kPsdQuadratureIntervals;
  const double lo = params.band_lo_khz;
  const double h = (params.band_hi_khz - lo) / n;
  std::vector<double> weights(n + 1);
  std::vector<double> freq_hz(n + 1);
  // Referencing to the band-edge PSD keeps the linear values O(1).
  const double ref_db = noise_psd_db(lo, params);
  for (int j = 0; j <= n; ++j) {
    const double f = (j == n) ? params.band_hi_khz : lo + j * h;
    const double simpson = (j == 0 || j == n) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
    weights[j] = simpson * db_to_linear(noise_psd_db(f, params) - ref_db);
    freq_hz[j] = f * 1000.0;
  }

  std::vector<double> r(max_lag);
  double r0 = 0.0;
  for (double w : weights) r0 += w;
  r[0] = 1.0;
  for (std::size_t lag = 1; lag < max_lag; ++lag) {
    const double tau = static_cast<double>(lag) * sample_interval;
    double acc = 0.0;
    for (int j = 0; j <= n; ++j) {
      acc += weights[j] * std::cos(2.0 * std::numbers::pi * freq_hz[j] * tau);
    }
    r[lag] = acc / r0;
  }
  return r;
}

Eigen::MatrixXd NoiseCovariance::normalized_matrix() const {
  Eigen::MatrixXd m(q_, q_);
  for (std::size_t i = 0; i < q_; ++i) {
    for (std::size_t j = 0; j < q_; ++j) {
      m(i, j) = autocorr_[i > j ? i - j : j - i];
    }
    if (jittered_) m(i, i) += kCovarianceJitter;
  }
  return m;
}

NoiseCovariance NoiseCovariance::with_sigma2(double sigma2) const {
  if (!(sigma2 >= 0.0)) throw DomainError("noise power must be non-negative");
  NoiseCovariance out = *this;
  out.sigma2_ = sigma2;
  return out;
}

Eigen::VectorXd NoiseCovariance::whiten(const Eigen::VectorXd& v) const {
  if (static_cast<std::size_t>(v.size()) != q_) {
    throw ContractError("whiten: vector length does not match covariance dimension");
  }
  if (identity_) return v;
  return factor_->triangularView<Eigen::Lower>().solve(v);
}

Eigen::VectorXd NoiseCovariance::solve(const Eigen::VectorXd& v) const {
  if (static_cast<std::size_t>(v.size()) != q_) {
    throw ContractError("solve: vector length does not match covariance dimension");
  }
  if (identity_) return v;
  Eigen::VectorXd x = factor_->triangularView<Eigen::Lower>().solve(v);
  factor_->triangularView<Eigen::Lower>().transpose().solveInPlace(x);
  return x;
}

double NoiseCovariance::quad_form(const Eigen::VectorXd& v) const {
  return whiten(v).squaredNorm();
}

NoiseCovariance build_covariance(std::span<const double> autocorr, std::size_t q,
                                 double sigma2) {
  if (q < 1) throw DomainError("covariance dimension must be at least 1");
  if (autocorr.size() < q) throw DomainError("autocorrelation shorter than slot length");
  if (autocorr[0] != 1.0) throw DomainError("autocorrelation must satisfy R_w[0] = 1");
  if (!(sigma2 >= 0.0)) throw DomainError("noise power must be non-negative");

  NoiseCovariance cov;
  cov.q_ = q;
  cov.sigma2_ = sigma2;
  cov.autocorr_.assign(autocorr.begin(), autocorr.begin() + static_cast<std::ptrdiff_t>(q));
  cov.identity_ = true;
  for (std::size_t l = 1; l < q; ++l) {
    if (cov.autocorr_[l] != 0.0) {
      cov.identity_ = false;
      break;
    }
  }

  Eigen::MatrixXd m = cov.normalized_matrix();
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    m.diagonal().array() += kCovarianceJitter;
    llt.compute(m);
    if (llt.info() != Eigen::Success) {
      throw IllConditionedError("noise covariance is not positive definite (q=" +
                                std::to_string(q) + ") even after diagonal jitter");
    }
    cov.jittered_ = true;
  }
  cov.factor_ = std::make_shared<const Eigen::MatrixXd>(llt.matrixL());
  return cov;
}

NoiseCovariance white_covariance(std::size_t q, double sigma2) {
  std::vector<double> r(q, 0.0);
  if (q > 0) r[0] = 1.0;
  return build_covariance(r, q, sigma2);
}

Eigen::VectorXd sample_colored_noise(const NoiseCovariance& cov, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd g(cov.q());
  for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = normal(rng);
  const double sigma = std::sqrt(cov.sigma2());
  if (cov.is_identity()) return sigma * g;
  Eigen::VectorXd w = cov.factor().triangularView<Eigen::Lower>() * g;
  return sigma * w;
}

}  // namespace uwauth::env
