#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "uwauth/env.hpp"
#include "uwauth/geometry.hpp"

namespace uwauth::ranging {

/// Maximal-length LFSR sequence mapped {0,1} -> {+1,-1}, truncated to
/// `length`. The register degree is the smallest n with 2^n - 1 >= length;
/// the low n bits of `seed` initialise the register.
std::vector<int> gen_pn(std::size_t length, std::uint32_t seed);

/// Register degree used by gen_pn for a requested length.
int pn_degree(std::size_t length);

enum class SlotBoundary {
  kZeroPad,  ///< delayed waveform is zero-padded and truncated at the slot end
  kCyclic,   ///< delayed waveform wraps around the slot
};

/// PN chip train shaped by a raised-cosine tapered chip.
///
/// Each chip occupies t_b seconds; its leading and trailing rolloff*t_b/2
/// seconds are half-cosine ramps and the middle is flat, so the waveform has
/// a continuous first derivative. The amplitude is normalised to unit average
/// power per chip, which makes P_R the received power.
struct PnWaveform {
  std::vector<int> chips;
  double t_b = 1.8e-3;
  double t_s_sample = 1e-4;
  std::size_t q = 128;
  double rolloff = 0.5;
  SlotBoundary boundary = SlotBoundary::kCyclic;

  void validate() const;

  double samples_per_chip() const { return t_b / t_s_sample; }
  /// Length of the chip train in (fractional) samples.
  double duration_samples() const { return static_cast<double>(chips.size()) * samples_per_chip(); }
  /// Largest integer delay at which the whole chip train is inside the slot.
  std::size_t max_contained_delay() const;

  /// Unit-power waveform and its time derivatives, t in seconds from the
  /// first chip edge.
  double value(double t) const;
  double derivative(double t) const;
  double second_derivative(double t) const;
};

struct Synthesized {
  Eigen::VectorXd s;      ///< sqrt(P_R) s[n - delay]
  Eigen::VectorXd s_dot;  ///< d s / d delay, per sample
};

/// Samples the waveform delayed by `delay` samples (may be fractional) over
/// the q-sample slot, together with its analytic delay derivative.
Synthesized synth_waveform(const PnWaveform& wf, double delay, double pr);

/// Second delay derivative. Diagnostic only; it averages out of the bound.
Eigen::VectorXd synth_second_derivative(const PnWaveform& wf, double delay, double pr);

/// Mean of squared samples.
double estimate_pr(std::span<const double> y);
double estimate_pr(const Eigen::VectorXd& y);

enum class AmplitudeMode {
  kEstimated,  ///< template scaled by sqrt of estimate_pr(y)
  kOracle,     ///< template scaled by the supplied true P_R
};

/// Search origin: candidate ToAs are n0 .. n0 + q - 1 (1-based sample index).
inline constexpr std::size_t kSearchOrigin = 1;

struct ToaEstimate {
  std::size_t toa_index = kSearchOrigin;  ///< t1_hat, 1-based
  double pr_hat = 0.0;
  /// (y - s(t1))^T Cn^{-1} (y - s(t1)) for every candidate, in grid order;
  /// +inf where a zero-pad slot cannot hold the train.
  std::vector<double> objective;

  std::size_t delay() const { return toa_index - kSearchOrigin; }
};

/// Exhaustive-search ML ToA estimator for one waveform and noise structure.
///
/// Template correlations and energies are evaluated through the Cholesky
/// factor of the normalised covariance; the constant noise scale does not
/// move the argmin. Construction precomputes every candidate's template
/// energy, after which estimate() is const and safe to share across threads.
class ToaEstimator {
 public:
  ToaEstimator(PnWaveform wf, env::NoiseCovariance cov);

  const PnWaveform& waveform() const { return wf_; }
  const env::NoiseCovariance& covariance() const { return cov_; }

  ToaEstimate estimate(const Eigen::VectorXd& y, AmplitudeMode mode = AmplitudeMode::kEstimated,
                       double true_pr = 0.0) const;

 private:
  PnWaveform wf_;
  env::NoiseCovariance cov_;
  std::vector<double> base_;     // unit-power waveform at integer sample offsets
  std::vector<double> energy_;   // s_k^T Cn^{-1} s_k per candidate delay k
};

/// Convenience wrapper building a one-off estimator.
ToaEstimate ml_toa(const Eigen::VectorXd& y, const PnWaveform& wf, const env::NoiseCovariance& cov,
                   AmplitudeMode mode = AmplitudeMode::kEstimated, double true_pr = 0.0);

/// s_dot^T Cn^{-1} s_dot; throws DegenerateSignalError when it vanishes.
double fisher_quad(const env::NoiseCovariance& cov, const Eigen::VectorXd& s_dot);

/// ToA bound in samples^2 exactly as published: sigma^2 / (4 P_R sdot^T Cn^-1 sdot).
double crb_toa(const env::NoiseCovariance& cov, const Eigen::VectorXd& s_dot, double pr);
/// Textbook Fisher bound sigma^2 / (P_R sdot^T Cn^-1 sdot), four times crb_toa.
double crb_toa_fisher(const env::NoiseCovariance& cov, const Eigen::VectorXd& s_dot, double pr);

struct DistanceEstimate {
  double meters = 0.0;
  bool clamped = false;  ///< raw estimate was negative and was clamped to 0
};

/// z = (v/2) t1_hat - (v/2)(t0 + switching_delay), all times in seconds.
DistanceEstimate rtt_to_distance(double t1_hat, double t0, double switching_delay);

/// Which ToA bound the ranging variance is derived from.
enum class CrbForm {
  kPaper,   ///< factor 16 in the distance variance (published form)
  kFisher,  ///< factor 4 (textbook Fisher information)
};

/// Distance variance from the ToA bound. `quad_per_sample` is
/// s_dot^T Cn^{-1} s_dot with s_dot taken per sample of delay; it is
/// converted to seconds with `t_s_sample`.
double sigma_d2(double snr, double pathloss_lin, double pt_lin, double quad_per_sample,
                double t_s_sample, CrbForm form = CrbForm::kPaper);
double sigma_d2(double snr, double pathloss_lin, double pt_lin, const Eigen::VectorXd& s_dot,
                const env::NoiseCovariance& cov, double t_s_sample,
                CrbForm form = CrbForm::kPaper);

/// Per-node ranging spread: sigma_{d_i} for every Alice node and an
/// evaluator for Eve's sigma as a function of her distance.
struct PerNodeSigma {
  std::vector<double> alice;
  std::function<double(double)> eve;
};

struct SigmaModel {
  env::AcousticParams params;
  double pt_lin = 1.0;
  double quad_per_sample = 1.0;  ///< s_dot^T Cn^{-1} s_dot at the reference delay
  double t_s_sample = 1e-4;
  CrbForm form = CrbForm::kPaper;

  double sigma_at(double distance, double snr) const;
};

PerNodeSigma per_node_sigma(const geometry::Deployment& deployment, const SigmaModel& model,
                            double snr);

/// Reference delay used for bound evaluation: the chip train centred in the slot.
double reference_delay(const PnWaveform& wf);

/// Ranging outcome for one slot.
struct RangingResult {
  std::size_t toa_index = 0;
  double distance = 0.0;
  bool clamped = false;
  double crb_toa = 0.0;
  double sigma_d2 = 0.0;
  double pr_hat = 0.0;
};

/// Writes (y, s, objective) as three length-prefixed little-endian float64
/// arrays: u64 count followed by count doubles, for each array in order.
void write_trace(const std::filesystem::path& path, std::span<const double> y,
                 std::span<const double> s, std::span<const double> objective);

struct Trace {
  std::vector<double> y, s, objective;
};
Trace read_trace(const std::filesystem::path& path);

}  // namespace uwauth::ranging
