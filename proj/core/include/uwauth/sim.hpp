#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uwauth/analytic.hpp"
#include "uwauth/detect.hpp"
#include "uwauth/env.hpp"
#include "uwauth/geometry.hpp"
#include "uwauth/ranging.hpp"

namespace uwauth::sim {

enum class ChannelMode { kAwgnFeatures, kColoredWaveform };

enum class OccupantLaw {
  kEqualPriors,  ///< uniform over {A_1..A_M, Eve}
  kEveOnly,
  kAliceOnly,    ///< uniform over the Alice nodes
};

/// Waveform-level channel used by the colored_waveform mode.
struct ColoredChannel {
  env::AcousticParams acoustic;
  bool white = false;  ///< force Cn = I while keeping the pathloss
  double pt_lin = 1e3;
  std::size_t q = 128;
  double t_b = 1.8e-3;
  double t_s_sample = 1e-4;
  double switching_delay = 1e-3;  ///< responder turnaround T_s, seconds
  double t0 = 0.0;                ///< challenge start on the slot clock, seconds
  std::size_t pn_length = 7;
  std::uint32_t pn_seed = 1;
  double rolloff = 0.5;
  ranging::SlotBoundary boundary = ranging::SlotBoundary::kCyclic;
  /// Integer sample position of the response inside the observation
  /// window; negative draws it uniformly per trial.
  long window_offset = -1;
  ranging::AmplitudeMode amplitude = ranging::AmplitudeMode::kEstimated;
  ranging::CrbForm crb_form = ranging::CrbForm::kPaper;

  ranging::PnWaveform waveform() const;
  env::NoiseCovariance covariance(double sigma2) const;
};

struct TrialPlan {
  std::vector<double> snr_grid_db;
  std::size_t n_trials = 100000;
  std::uint64_t seed = 1;
  OccupantLaw occupant_law = OccupantLaw::kEqualPriors;
  ChannelMode channel_mode = ChannelMode::kAwgnFeatures;
  detect::Mode detection_mode = detect::Mode::kFull;
  detect::FusionRule final_rule = detect::FusionRule::kAnd;

  void validate() const;
};

struct Experiment {
  std::string scenario_id = "default";
  geometry::Deployment deployment;
  geometry::EveScenario eve = geometry::scenario::OutsideRing{};
  detect::Thresholds thresholds;
  TrialPlan plan;
  ColoredChannel colored;
};

/// SNR = 1/sigma^2.
inline double snr_linear(double snr_db) { return db_to_linear(snr_db); }
inline double sigma_from_snr_db(double snr_db) { return std::pow(10.0, -snr_db / 20.0); }

/// Counter-based per-trial seed.
std::uint64_t trial_seed(std::uint64_t master, std::uint64_t snr_index, std::uint64_t trial_index);

struct TrialOutcome {
  detect::DecisionRecord record;
  detect::Measurement measurement;
  geometry::PolarPosition occupant_position;
  bool flagged = false;  ///< clamped distance or a caught exception
  bool failed = false;   ///< no record produced
  std::string error;
  double distance_error = 0.0;  ///< z - d_true
  long delay_error = 0;         ///< colored mode: estimated minus true sample delay
};

/// Rate curves produced per sweep.
enum class Curve : std::uint8_t {
  kStep1,
  kTest2a,
  kTest2b,
  kTest2c,
  kStep2And,
  kStep2Or,
  kStep2Mv,
  kFinalAnd,
  kFinalOr,
  kFinalMv,
  kIdentDistance,
  kIdentAoa,
  kIdentPosition,
  kIdentMv,
  kCount
};
inline constexpr std::size_t kCurveCount = static_cast<std::size_t>(Curve::kCount);

struct CurveLabel {
  const char* family;  ///< output file stem
  const char* test;
  const char* fusion;
};
CurveLabel label(Curve c);
bool curve_available(Curve c, detect::Mode mode);
/// Identification curves only carry a misclassification rate.
bool is_identification(Curve c);

struct Counts {
  std::uint64_t alice = 0;
  std::uint64_t alice_h1 = 0;
  std::uint64_t eve = 0;
  std::uint64_t eve_h0 = 0;
  std::uint64_t auth = 0;        ///< authenticated Alice trials (all Alice for identification curves)
  std::uint64_t auth_wrong = 0;

  Counts& operator+=(const Counts& o);
};

struct Moments {
  std::uint64_t n = 0;
  double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;

  void add(double x);
  Moments& operator+=(const Moments& o);
  double mean() const;
  double variance() const;  ///< unbiased
  double skewness() const;
  double excess_kurtosis() const;
};

struct SweepPoint {
  double snr_db = 0.0;
  std::uint64_t n_trials = 0;
  std::uint64_t flags = 0;
  std::uint64_t failures = 0;
  std::uint64_t inclusion_violations = 0;
  std::array<Counts, kCurveCount> counts{};
  Moments alice_distance_error;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::uint64_t total_records = 0;
  std::uint64_t total_inclusion_violations = 0;
};

/// Wald interval half-width at 95 %.
double wald_halfwidth(double p, std::uint64_t n);

struct RatePoint {
  double snr_db = 0.0;
  std::optional<double> p_fa, p_fa_ci, p_md, p_md_ci, p_mc, p_mc_ci;
  std::optional<double> log_p_fa, log_p_md;  ///< analytic curves only
  std::uint64_t n_fa = 0, k_fa = 0, n_md = 0, k_md = 0, n_mc = 0, k_mc = 0;
  std::uint64_t n_trials = 0;
  std::uint64_t flags = 0;
};

struct ErrorRateCurve {
  std::string scenario_id;
  std::string source;  ///< montecarlo | analytic | analytic_verbatim
  std::string family;
  std::string test;
  std::string fusion;
  std::vector<RatePoint> points;
};

/// Rates from counters; zero denominators leave the rate absent.
RatePoint estimate_rates(const Counts& c, bool identification_only);

/// Aggregates a batch of trial records into counters for one curve. The
/// deployment bounds the identification cells.
Counts tally(std::span<const TrialOutcome> batch, Curve curve, const geometry::Deployment& dep);

class Simulator {
 public:
  explicit Simulator(Experiment exp);

  const Experiment& experiment() const { return exp_; }
  const geometry::GroundTruth& truth() const { return truth_; }

  TrialOutcome run_trial(std::size_t snr_index, std::size_t trial_index) const;

  using Progress = std::function<void(std::size_t snr_index, const SweepPoint&)>;
  /// Bit-identical for every worker count.
  SweepResult run_sweep(unsigned workers = 1, const Progress& progress = {}) const;

  std::vector<ErrorRateCurve> curves(const SweepResult& sweep) const;

  /// s_dot^T Cn^{-1} s_dot at the centred reference delay (colored mode).
  double fisher_quad() const;
  const ranging::ToaEstimator* estimator() const { return estimator_.get(); }

 private:
  geometry::PolarPosition occupant_position(const detect::Occupant& occ, Rng& rng) const;
  TrialOutcome awgn_trial(double snr_db, Rng& rng) const;
  TrialOutcome colored_trial(std::size_t snr_index, Rng& rng) const;

  Experiment exp_;
  geometry::GroundTruth truth_;
  std::shared_ptr<const ranging::ToaEstimator> estimator_;
  std::vector<env::NoiseCovariance> point_cov_;      // per SNR point (colored mode)
  std::vector<Eigen::VectorXd> unit_templates_;      // per admissible true delay
  double quad_ = 0.0;
};

/// Analytic curves on the plan's SNR grid: conditional rates under the
/// scenario's Eve law (source "analytic") and the published joint-prior
/// expressions (source "analytic_verbatim").
std::vector<ErrorRateCurve> analytic_curves(const Experiment& exp,
                                            double analytic_sigma_scale = 1.0);

/// Analytic context at one SNR point.
analytic::AnalyticContext analytic_context(const Experiment& exp, double snr_db, double quad,
                                           double sigma_scale = 1.0);

struct RateComparison {
  std::string test;
  std::string fusion;
  std::string rate;  ///< p_fa | p_md | p_mc
  double snr_db = 0.0;
  std::uint64_t n = 0;
  std::uint64_t k = 0;
  double p_montecarlo = 0.0;
  double p_analytic = 0.0;
  double threshold = 0.0;  ///< allowed |k - n p|
  bool gated = false;      ///< excluded from the verdict (see reason)
  std::string reason;
  bool flagged = false;
};

struct ComparisonReport {
  std::vector<RateComparison> rows;
  std::size_t flags = 0;
  bool pass() const { return flags == 0; }
};

/// |k - n p| > 3 sqrt(n p (1 - p)) + 1/2 flags a point.
bool binomial_flag(std::uint64_t k, std::uint64_t n, double p, double* threshold = nullptr);

/// Compares every rate present in both curves, point by point.
/// Throws ContractError when the SNR grids differ.
ComparisonReport compare_mc_analytic(const ErrorRateCurve& mc, const ErrorRateCurve& an);

/// Ranging-only batch at a fixed distance, for estimator studies.
struct RangingStudy {
  std::size_t n = 0;
  double true_delay = 0.0;       ///< samples, fixed or average
  double pr = 0.0;
  double sigma2 = 0.0;
  double quad_per_sample = 0.0;  ///< at the true delay
  double crb_paper = 0.0;        ///< samples^2
  double crb_fisher = 0.0;
  double sigma_d2_paper = 0.0;   ///< metres^2
  double sigma_d2_fisher = 0.0;
  Moments delay_error;           ///< samples
  Moments distance_error;        ///< metres
  std::uint64_t clamped = 0;
};

RangingStudy ranging_study(const ColoredChannel& channel, double distance, double snr_db,
                           std::size_t n, std::uint64_t seed, unsigned workers = 1);

}  // namespace uwauth::sim
