#include "uwauth/ranging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>

#include "uwauth/error.hpp"

namespace uwauth::ranging {
namespace {

// Fibonacci recurrence a[k+n] = xor of a[k+j], j in taps. Each set comes from
// a primitive trinomial or pentanomial of degree n.
struct TapSet {
  int degree;
  std::array<int, 4> taps;
  int count;
};

constexpr std::array<TapSet, 14> kTaps = {{
    {3, {0, 1}, 2},
    {4, {0, 1}, 2},
    {5, {0, 2}, 2},
    {6, {0, 1}, 2},
    {7, {0, 1}, 2},
    {8, {0, 2, 3, 4}, 4},
    {9, {0, 4}, 2},
    {10, {0, 3}, 2},
    {11, {0, 2}, 2},
    {12, {0, 1, 4, 6}, 4},
    {13, {0, 1, 3, 4}, 4},
    {14, {0, 1, 6, 10}, 4},
    {15, {0, 1}, 2},
    {16, {0, 1, 3, 12}, 4},
}};

// Raised-cosine chip window on x in [0, 1].
double window(double x, double beta) {
  if (x < 0.0 || x > 1.0) return 0.0;
  const double half = 0.5 * beta;
  if (x < half) return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * x / beta));
  if (x > 1.0 - half) return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * (1.0 - x) / beta));
  return 1.0;
}

double window_d1(double x, double beta) {
  if (x < 0.0 || x > 1.0) return 0.0;
  const double half = 0.5 * beta;
  const double k = std::numbers::pi / beta;
  if (x < half) return k * std::sin(2.0 * std::numbers::pi * x / beta);
  if (x > 1.0 - half) return -k * std::sin(2.0 * std::numbers::pi * (1.0 - x) / beta);
  return 0.0;
}

double window_d2(double x, double beta) {
  if (x < 0.0 || x > 1.0) return 0.0;
  const double half = 0.5 * beta;
  const double k = 2.0 * std::numbers::pi * std::numbers::pi / (beta * beta);
  if (x < half) return k * std::cos(2.0 * std::numbers::pi * x / beta);
  if (x > 1.0 - half) return k * std::cos(2.0 * std::numbers::pi * (1.0 - x) / beta);
  return 0.0;
}

double chip_amplitude(double beta) { return 1.0 / std::sqrt(1.0 - 0.625 * beta); }

// Locates t inside the chip train; returns false outside the support.
bool locate(const PnWaveform& wf, double t, std::size_t& chip, double& x) {
  if (t < 0.0) return false;
  const double pos = t / wf.t_b;
  const double c = std::floor(pos);
  if (c >= static_cast<double>(wf.chips.size())) return false;
  chip = static_cast<std::size_t>(c);
  x = pos - c;
  return true;
}

// Offset (in samples) of sample n behind the delayed waveform start. Cyclic
// slots wrap it into [0, q).
double slot_offset(const PnWaveform& wf, std::size_t n, double delay) {
  double m = static_cast<double>(n) - delay;
  if (wf.boundary == SlotBoundary::kCyclic) {
    m = std::fmod(m, static_cast<double>(wf.q));
    if (m < 0.0) m += static_cast<double>(wf.q);
  }
  return m;
}

constexpr double kFitSlack = 1e-9;

void check_delay(const PnWaveform& wf, double delay) {
  if (!(delay >= 0.0 && delay <= static_cast<double>(wf.q - 1))) {
    throw DomainError("delay must lie in [0, q-1] samples");
  }
  if (wf.boundary == SlotBoundary::kZeroPad &&
      delay + wf.duration_samples() > static_cast<double>(wf.q) + kFitSlack) {
    throw DomainError("waveform does not fit the slot at this delay (zero-pad boundary)");
  }
}

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  os.write(b.data(), 8);
}

std::uint64_t get_u64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  is.read(reinterpret_cast<char*>(b.data()), 8);
  if (!is) throw IoError("trace file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_array(std::ostream& os, std::span<const double> v) {
  put_u64(os, v.size());
  for (double x : v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &x, sizeof bits);
    put_u64(os, bits);
  }
}

std::vector<double> get_array(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  if (n > (std::uint64_t{1} << 32)) throw IoError("trace array length implausible");
  std::vector<double> out(n);
  for (auto& x : out) {
    const std::uint64_t bits = get_u64(is);
    std::memcpy(&x, &bits, sizeof x);
  }
  return out;
}

}  // namespace

int pn_degree(std::size_t length) {
  int n = 3;
  while (((std::size_t{1} << n) - 1) < length) ++n;
  return n;
}

std::vector<int> gen_pn(std::size_t length, std::uint32_t seed) {
  if (length < 7) throw DomainError("PN length must be at least 7");
  const int n = pn_degree(length);
  if (n > kTaps.back().degree) throw DomainError("PN length exceeds the largest supported register");
  const TapSet& taps = kTaps[static_cast<std::size_t>(n - kTaps.front().degree)];
  const std::uint32_t mask = (n >= 32) ? ~0u : ((1u << n) - 1u);
  const std::uint32_t init = seed & mask;
  if (init == 0) throw DomainError("PN seed is zero in the register bits (degenerate LFSR)");

  std::vector<std::uint8_t> bits(length + static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) bits[static_cast<std::size_t>(j)] = (init >> j) & 1u;
  for (std::size_t k = 0; k + static_cast<std::size_t>(n) < bits.size(); ++k) {
    std::uint8_t b = 0;
    for (int t = 0; t < taps.count; ++t) b ^= bits[k + static_cast<std::size_t>(taps.taps[t])];
    bits[k + static_cast<std::size_t>(n)] = b;
  }
  std::vector<int> chips(length);
  for (std::size_t i = 0; i < length; ++i) chips[i] = bits[i] ? -1 : 1;
  return chips;
}

void PnWaveform::validate() const {
  if (chips.empty()) throw DomainError("waveform has no chips (zero energy)");
  for (int c : chips) {
    if (c != 1 && c != -1) throw DomainError("chips must be +1 or -1");
  }
  if (!(t_s_sample > 0.0)) throw DomainError("sampling interval must be positive");
  if (!(t_b >= 2.0 * t_s_sample)) throw DomainError("t_s_sample must not exceed t_b/2 (aliasing)");
  if (!(rolloff > 0.0 && rolloff <= 1.0)) throw DomainError("rolloff must lie in (0, 1]");
  if (q < 2) throw DomainError("slot length q must be at least 2");
  if (duration_samples() > static_cast<double>(q) + kFitSlack) {
    throw DomainError("chip train longer than the slot (q samples)");
  }
}

std::size_t PnWaveform::max_contained_delay() const {
  if (boundary == SlotBoundary::kCyclic) return q - 1;
  const double room = static_cast<double>(q) - duration_samples();
  return static_cast<std::size_t>(std::floor(room + kFitSlack));
}

double PnWaveform::value(double t) const {
  std::size_t c = 0;
  double x = 0.0;
  if (!locate(*this, t, c, x)) return 0.0;
  return chip_amplitude(rolloff) * chips[c] * window(x, rolloff);
}

double PnWaveform::derivative(double t) const {
  std::size_t c = 0;
  double x = 0.0;
  if (!locate(*this, t, c, x)) return 0.0;
  return chip_amplitude(rolloff) * chips[c] * window_d1(x, rolloff) / t_b;
}

double PnWaveform::second_derivative(double t) const {
  std::size_t c = 0;
  double x = 0.0;
  if (!locate(*this, t, c, x)) return 0.0;
  return chip_amplitude(rolloff) * chips[c] * window_d2(x, rolloff) / (t_b * t_b);
}

Synthesized synth_waveform(const PnWaveform& wf, double delay, double pr) {
  wf.validate();
  check_delay(wf, delay);
  if (!(pr >= 0.0)) throw DomainError("received power must be non-negative");
  const double amp = std::sqrt(pr);
  Synthesized out{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(wf.q)),
                  Eigen::VectorXd::Zero(static_cast<Eigen::Index>(wf.q))};
  for (std::size_t n = 0; n < wf.q; ++n) {
    const double t = slot_offset(wf, n, delay) * wf.t_s_sample;
    const auto i = static_cast<Eigen::Index>(n);
    out.s[i] = amp * wf.value(t);
    // d/d(delay) of b((n - delay) T_S)
    out.s_dot[i] = -amp * wf.t_s_sample * wf.derivative(t);
  }
  return out;
}

Eigen::VectorXd synth_second_derivative(const PnWaveform& wf, double delay, double pr) {
  wf.validate();
  check_delay(wf, delay);
  const double amp = std::sqrt(pr);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(wf.q));
  for (std::size_t n = 0; n < wf.q; ++n) {
    const double t = slot_offset(wf, n, delay) * wf.t_s_sample;
    out[static_cast<Eigen::Index>(n)] =
        amp * wf.t_s_sample * wf.t_s_sample * wf.second_derivative(t);
  }
  return out;
}

double estimate_pr(std::span<const double> y) {
  if (y.empty()) throw DomainError("estimate_pr: empty observation");
  double acc = 0.0;
  for (double v : y) acc += v * v;
  return acc / static_cast<double>(y.size());
}

double estimate_pr(const Eigen::VectorXd& y) {
  return estimate_pr(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
}

ToaEstimator::ToaEstimator(PnWaveform wf, env::NoiseCovariance cov)
    : wf_(std::move(wf)), cov_(std::move(cov)) {
  wf_.validate();
  if (cov_.q() != wf_.q) throw ContractError("covariance dimension differs from slot length");

  const auto len = static_cast<std::size_t>(std::ceil(wf_.duration_samples() - kFitSlack));
  base_.resize(std::min(len, wf_.q));
  for (std::size_t m = 0; m < base_.size(); ++m) {
    base_[m] = wf_.value(static_cast<double>(m) * wf_.t_s_sample);
  }

  energy_.resize(wf_.q);
  Eigen::VectorXd s(static_cast<Eigen::Index>(wf_.q));
  for (std::size_t k = 0; k < wf_.q; ++k) {
    s.setZero();
    for (std::size_t m = 0; m < base_.size(); ++m) {
      std::size_t n = k + m;
      if (n >= wf_.q) {
        if (wf_.boundary == SlotBoundary::kZeroPad) break;
        n -= wf_.q;
      }
      s[static_cast<Eigen::Index>(n)] = base_[m];
    }
    energy_[k] = cov_.quad_form(s);
  }
}

ToaEstimate ToaEstimator::estimate(const Eigen::VectorXd& y, AmplitudeMode mode,
                                   double true_pr) const {
  if (static_cast<std::size_t>(y.size()) != wf_.q) {
    throw ContractError("ml_toa: observation length differs from slot length");
  }
  ToaEstimate out;
  out.pr_hat = estimate_pr(y);
  double a = 0.0;
  if (mode == AmplitudeMode::kEstimated) {
    a = std::sqrt(out.pr_hat);
  } else {
    if (!(true_pr >= 0.0)) throw DomainError("oracle amplitude needs a non-negative P_R");
    a = std::sqrt(true_pr);
  }

  const Eigen::VectorXd u = cov_.solve(y);
  const double yy = y.dot(u);
  const std::size_t q = wf_.q;
  out.objective.resize(q);
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_k = 0;
  // zero-pad: only delays that keep the whole train inside the slot are hypotheses
  const std::size_t k_end = wf_.max_contained_delay() + 1;
  std::fill(out.objective.begin(), out.objective.end(), std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < k_end; ++k) {
    double c = 0.0;
    for (std::size_t m = 0; m < base_.size(); ++m) {
      std::size_t n = k + m;
      if (n >= q) {
        if (wf_.boundary == SlotBoundary::kZeroPad) break;
        n -= q;
      }
      c += base_[m] * u[static_cast<Eigen::Index>(n)];
    }
    const double j = yy - 2.0 * a * c + a * a * energy_[k];
    out.objective[k] = j;
    if (j < best) {
      best = j;
      best_k = k;
    }
  }
  out.toa_index = best_k + kSearchOrigin;
  return out;
}

ToaEstimate ml_toa(const Eigen::VectorXd& y, const PnWaveform& wf, const env::NoiseCovariance& cov,
                   AmplitudeMode mode, double true_pr) {
  if (static_cast<std::size_t>(y.size()) != cov.q()) {
    throw ContractError("ml_toa: observation length differs from covariance dimension");
  }
  return ToaEstimator(wf, cov).estimate(y, mode, true_pr);
}

double fisher_quad(const env::NoiseCovariance& cov, const Eigen::VectorXd& s_dot) {
  const double quad = cov.quad_form(s_dot);
  if (!(quad > 0.0)) throw DegenerateSignalError("s_dot^T Cn^-1 s_dot is zero");
  return quad;
}

double crb_toa(const env::NoiseCovariance& cov, const Eigen::VectorXd& s_dot, double pr) {
  return 0.25 * crb_toa_fisher(cov, s_dot, pr);
}

double crb_toa_fisher(const env::NoiseCovariance& cov, const Eigen::VectorXd& s_dot, double pr) {
  if (!(pr > 0.0)) throw DomainError("received power must be positive");
  return cov.sigma2() / (pr * fisher_quad(cov, s_dot));
}

DistanceEstimate rtt_to_distance(double t1_hat, double t0, double switching_delay) {
  const double z = 0.5 * kSoundSpeed * t1_hat - 0.5 * kSoundSpeed * (t0 + switching_delay);
  if (z < 0.0) return {0.0, true};
  return {z, false};
}

double sigma_d2(double snr, double pathloss_lin, double pt_lin, double quad_per_sample,
                double t_s_sample, CrbForm form) {
  if (!(snr > 0.0 && pathloss_lin > 0.0 && pt_lin > 0.0 && t_s_sample > 0.0)) {
    throw DomainError("sigma_d2: snr, pathloss, transmit power and T_S must be positive");
  }
  if (!(quad_per_sample > 0.0)) throw DegenerateSignalError("sigma_d2: zero Fisher quadratic form");
  const double quad_sec = quad_per_sample / (t_s_sample * t_s_sample);
  const double factor = (form == CrbForm::kPaper) ? 16.0 : 4.0;
  return kSoundSpeed * kSoundSpeed * pathloss_lin / (factor * snr * pt_lin * quad_sec);
}

double sigma_d2(double snr, double pathloss_lin, double pt_lin, const Eigen::VectorXd& s_dot,
                const env::NoiseCovariance& cov, double t_s_sample, CrbForm form) {
  return sigma_d2(snr, pathloss_lin, pt_lin, fisher_quad(cov, s_dot), t_s_sample, form);
}

double SigmaModel::sigma_at(double distance, double snr) const {
  return std::sqrt(sigma_d2(snr, env::pathloss_linear(distance, params), pt_lin,
                            quad_per_sample, t_s_sample, form));
}

PerNodeSigma per_node_sigma(const geometry::Deployment& deployment, const SigmaModel& model,
                            double snr) {
  PerNodeSigma out;
  out.alice.reserve(deployment.m());
  for (const auto& a : deployment.alice) out.alice.push_back(model.sigma_at(a.distance, snr));
  out.eve = [model, snr](double d_e) { return model.sigma_at(d_e, snr); };
  return out;
}

double reference_delay(const PnWaveform& wf) {
  return std::max(0.0, 0.5 * (static_cast<double>(wf.q) - wf.duration_samples()));
}

void write_trace(const std::filesystem::path& path, std::span<const double> y,
                 std::span<const double> s, std::span<const double> objective) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open trace file " + path.string());
  put_array(os, y);
  put_array(os, s);
  put_array(os, objective);
  if (!os) throw IoError("failed writing trace file " + path.string());
}

Trace read_trace(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open trace file " + path.string());
  Trace t;
  t.y = get_array(is);
  t.s = get_array(is);
  t.objective = get_array(is);
  return t;
}

}  // namespace uwauth::ranging
