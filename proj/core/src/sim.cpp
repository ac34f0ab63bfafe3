#include "uwauth/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "uwauth/error.hpp"

namespace uwauth::sim {
namespace {

using detect::Decision;
using detect::FusionRule;

constexpr std::size_t kChunk = 2048;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Runs fn(task) for task in [0, n) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct ChunkResult {
  std::array<Counts, kCurveCount> counts{};
  std::uint64_t flags = 0;
  std::uint64_t failures = 0;
  std::uint64_t violations = 0;
  std::uint64_t records = 0;
  Moments alice_error;
};

std::optional<std::size_t> curve_identity(Curve c, const detect::DecisionRecord& r) {
  switch (c) {
    case Curve::kTest2a:
      return r.position ? std::optional<std::size_t>(r.position->index) : std::nullopt;
    case Curve::kTest2b:
      return r.distance.index;
    case Curve::kTest2c:
      return r.aoa ? std::optional<std::size_t>(r.aoa->index) : std::nullopt;
    case Curve::kStep2And:
    case Curve::kStep2Or:
    case Curve::kStep2Mv:
    case Curve::kFinalAnd:
    case Curve::kFinalOr:
    case Curve::kFinalMv:
      return r.candidate;
    default:
      return std::nullopt;
  }
}

std::optional<Decision> curve_decision(Curve c, const detect::DecisionRecord& r) {
  switch (c) {
    case Curve::kStep1:
      return r.step1;
    case Curve::kTest2a:
      return r.test_position;
    case Curve::kTest2b:
      return r.test_distance;
    case Curve::kTest2c:
      return r.test_aoa;
    case Curve::kStep2And:
      return r.fused(FusionRule::kAnd);
    case Curve::kStep2Or:
      return r.fused(FusionRule::kOr);
    case Curve::kStep2Mv:
      return r.fused(FusionRule::kMajority);
    case Curve::kFinalAnd:
      return r.final_for(FusionRule::kAnd);
    case Curve::kFinalOr:
      return r.final_for(FusionRule::kOr);
    case Curve::kFinalMv:
      return r.final_for(FusionRule::kMajority);
    default:
      return std::nullopt;
  }
}

// Identification error events among Alice trials.
std::optional<bool> ident_error(Curve c, const TrialOutcome& t, const geometry::Deployment& dep) {
  const auto& r = t.record;
  const std::size_t truth = r.truth.index;
  switch (c) {
    case Curve::kIdentDistance: {
      const double z = t.measurement.z;
      return r.distance.index != truth || z < dep.d_min || z > dep.d0;
    }
    case Curve::kIdentAoa: {
      if (!r.aoa || !t.measurement.y) return std::nullopt;
      const double y = *t.measurement.y;
      return r.aoa->index != truth || y < 0.0 || y > 180.0;
    }
    case Curve::kIdentPosition:
      if (!r.position) return std::nullopt;
      return r.position->index != truth;
    case Curve::kIdentMv:
      return r.candidate != truth;
    default:
      return std::nullopt;
  }
}

void tally_one(Counts& c, Curve curve, const TrialOutcome& t, const geometry::Deployment& dep) {
  const auto& r = t.record;
  if (is_identification(curve)) {
    if (r.truth.is_eve()) return;
    const auto err = ident_error(curve, t, dep);
    if (!err) return;
    ++c.alice;
    ++c.auth;
    if (*err) ++c.auth_wrong;
    return;
  }
  const auto d = curve_decision(curve, r);
  if (!d) return;
  if (r.truth.is_eve()) {
    ++c.eve;
    if (*d == Decision::kH0) ++c.eve_h0;
    return;
  }
  ++c.alice;
  if (*d == Decision::kH1) {
    ++c.alice_h1;
    return;
  }
  if (const auto id = curve_identity(curve, r)) {
    ++c.auth;
    if (*id != r.truth.index) ++c.auth_wrong;
  }
}

double reference_quad(const ColoredChannel& ch) {
  const auto wf = ch.waveform();
  const auto syn = ranging::synth_waveform(wf, ranging::reference_delay(wf), 1.0);
  return ranging::fisher_quad(ch.covariance(1.0), syn.s_dot);
}

}  // namespace

ranging::PnWaveform ColoredChannel::waveform() const {
  ranging::PnWaveform wf;
  wf.chips = ranging::gen_pn(pn_length, pn_seed);
  wf.t_b = t_b;
  wf.t_s_sample = t_s_sample;
  wf.q = q;
  wf.rolloff = rolloff;
  wf.boundary = boundary;
  wf.validate();
  return wf;
}

env::NoiseCovariance ColoredChannel::covariance(double sigma2) const {
  if (white) return env::white_covariance(q, sigma2);
  const auto r = env::noise_autocorrelation(acoustic, t_s_sample, q);
  return env::build_covariance(r, q, sigma2);
}

void TrialPlan::validate() const {
  if (snr_grid_db.empty()) throw ValidationError("plan.snr_grid_db must not be empty");
  if (n_trials < 1) throw ValidationError("plan.n_trials must be at least 1");
  if (channel_mode == ChannelMode::kAwgnFeatures && detection_mode != detect::Mode::kFull) {
    throw ValidationError("plan.detection_mode: awgn_features requires full detection");
  }
  if (channel_mode == ChannelMode::kColoredWaveform && detection_mode != detect::Mode::kDistanceOnly) {
    throw ValidationError("plan.detection_mode: colored_waveform requires distance_only detection");
  }
}

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t snr_index, std::uint64_t trial_index) {
  return splitmix64(splitmix64(splitmix64(master) ^ snr_index) ^ trial_index);
}

CurveLabel label(Curve c) {
  switch (c) {
    case Curve::kStep1: return {"step1", "step1", ""};
    case Curve::kTest2a: return {"test2", "test2a", ""};
    case Curve::kTest2b: return {"test2", "test2b", ""};
    case Curve::kTest2c: return {"test2", "test2c", ""};
    case Curve::kStep2And: return {"fusion", "step2", "and"};
    case Curve::kStep2Or: return {"fusion", "step2", "or"};
    case Curve::kStep2Mv: return {"fusion", "step2", "mv"};
    case Curve::kFinalAnd: return {"final", "final", "and"};
    case Curve::kFinalOr: return {"final", "final", "or"};
    case Curve::kFinalMv: return {"final", "final", "mv"};
    case Curve::kIdentDistance: return {"identification", "ident_distance", ""};
    case Curve::kIdentAoa: return {"identification", "ident_aoa", ""};
    case Curve::kIdentPosition: return {"identification", "ident_position", ""};
    case Curve::kIdentMv: return {"identification", "ident_mv", ""};
    case Curve::kCount: break;
  }
  throw ContractError("unknown curve");
}

bool curve_available(Curve c, detect::Mode mode) {
  if (mode == detect::Mode::kFull) return true;
  switch (c) {
    case Curve::kTest2a:
    case Curve::kTest2c:
    case Curve::kIdentAoa:
    case Curve::kIdentPosition:
    case Curve::kIdentMv:
      return false;
    default:
      return true;
  }
}

bool is_identification(Curve c) {
  return c == Curve::kIdentDistance || c == Curve::kIdentAoa || c == Curve::kIdentPosition ||
         c == Curve::kIdentMv;
}

Counts& Counts::operator+=(const Counts& o) {
  alice += o.alice;
  alice_h1 += o.alice_h1;
  eve += o.eve;
  eve_h0 += o.eve_h0;
  auth += o.auth;
  auth_wrong += o.auth_wrong;
  return *this;
}

void Moments::add(double x) {
  ++n;
  const double x2 = x * x;
  s1 += x;
  s2 += x2;
  s3 += x2 * x;
  s4 += x2 * x2;
}

Moments& Moments::operator+=(const Moments& o) {
  n += o.n;
  s1 += o.s1;
  s2 += o.s2;
  s3 += o.s3;
  s4 += o.s4;
  return *this;
}

double Moments::mean() const { return n ? s1 / static_cast<double>(n) : 0.0; }

double Moments::variance() const {
  if (n < 2) return 0.0;
  const double dn = static_cast<double>(n);
  const double mu = s1 / dn;
  return (s2 - dn * mu * mu) / (dn - 1.0);
}

double Moments::skewness() const {
  if (n < 3) return 0.0;
  const double dn = static_cast<double>(n);
  const double mu = s1 / dn;
  const double m2 = s2 / dn - mu * mu;
  const double m3 = s3 / dn - 3.0 * mu * s2 / dn + 2.0 * mu * mu * mu;
  return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

double Moments::excess_kurtosis() const {
  if (n < 4) return 0.0;
  const double dn = static_cast<double>(n);
  const double mu = s1 / dn;
  const double m2 = s2 / dn - mu * mu;
  const double m4 = s4 / dn - 4.0 * mu * s3 / dn + 6.0 * mu * mu * s2 / dn - 3.0 * mu * mu * mu * mu;
  return m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
}

double wald_halfwidth(double p, std::uint64_t n) {
  if (n == 0) return 0.0;
  return 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

RatePoint estimate_rates(const Counts& c, bool identification_only) {
  RatePoint r;
  auto set = [](std::uint64_t k, std::uint64_t n, std::optional<double>& p, std::optional<double>& ci) {
    if (n == 0) return;
    p = static_cast<double>(k) / static_cast<double>(n);
    ci = wald_halfwidth(*p, n);
  };
  if (!identification_only) {
    r.n_fa = c.alice;
    r.k_fa = c.alice_h1;
    r.n_md = c.eve;
    r.k_md = c.eve_h0;
    set(c.alice_h1, c.alice, r.p_fa, r.p_fa_ci);
    set(c.eve_h0, c.eve, r.p_md, r.p_md_ci);
  }
  r.n_mc = c.auth;
  r.k_mc = c.auth_wrong;
  set(c.auth_wrong, c.auth, r.p_mc, r.p_mc_ci);
  return r;
}

Counts tally(std::span<const TrialOutcome> batch, Curve curve, const geometry::Deployment& dep) {
  Counts c;
  for (const auto& t : batch) {
    if (!t.failed) tally_one(c, curve, t, dep);
  }
  return c;
}

Simulator::Simulator(Experiment exp) : exp_(std::move(exp)) {
  exp_.plan.validate();
  exp_.thresholds.validate();
  exp_.deployment.validate();
  if (exp_.thresholds.d0 != exp_.deployment.d0) {
    throw ValidationError("thresholds.d0 must equal geometry.d0");
  }
  truth_ = geometry::ground_truth(exp_.deployment);
  if (!geometry::is_random(exp_.eve)) {
    Rng unused(0);
    exp_.deployment.eve = geometry::place_eve(exp_.eve, exp_.deployment, unused);
  }

  if (exp_.plan.channel_mode == ChannelMode::kColoredWaveform) {
    const auto& ch = exp_.colored;
    ch.acoustic.validate();
    const auto wf = ch.waveform();
    const auto base = ch.covariance(1.0);
    estimator_ = std::make_shared<const ranging::ToaEstimator>(wf, base);
    for (double snr_db : exp_.plan.snr_grid_db) point_cov_.push_back(base.with_sigma2(1.0 / snr_linear(snr_db)));
    const std::size_t max_delay = wf.max_contained_delay();
    if (ch.window_offset >= 0 && static_cast<std::size_t>(ch.window_offset) > max_delay) {
      throw ValidationError("channel.window_offset leaves the waveform outside the slot");
    }
    unit_templates_.reserve(max_delay + 1);
    for (std::size_t u = 0; u <= max_delay; ++u) {
      unit_templates_.push_back(ranging::synth_waveform(wf, static_cast<double>(u), 1.0).s);
    }
    const auto syn = ranging::synth_waveform(wf, ranging::reference_delay(wf), 1.0);
    quad_ = ranging::fisher_quad(base, syn.s_dot);
  }
}

double Simulator::fisher_quad() const { return quad_; }

geometry::PolarPosition Simulator::occupant_position(const detect::Occupant& occ, Rng& rng) const {
  if (!occ.is_eve()) return exp_.deployment.alice[occ.index];
  if (geometry::is_random(exp_.eve)) return geometry::place_eve(exp_.eve, exp_.deployment, rng);
  return exp_.deployment.eve;
}

TrialOutcome Simulator::run_trial(std::size_t snr_index, std::size_t trial_index) const {
  if (snr_index >= exp_.plan.snr_grid_db.size()) throw ContractError("SNR index out of range");
  Rng rng(trial_seed(exp_.plan.seed, snr_index, trial_index));
  const std::size_t m = exp_.deployment.m();
  detect::Occupant occ;
  switch (exp_.plan.occupant_law) {
    case OccupantLaw::kEqualPriors: {
      const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, m)(rng);
      occ = pick == m ? detect::Occupant::eve() : detect::Occupant::alice(pick);
      break;
    }
    case OccupantLaw::kEveOnly:
      occ = detect::Occupant::eve();
      break;
    case OccupantLaw::kAliceOnly:
      occ = detect::Occupant::alice(std::uniform_int_distribution<std::size_t>(0, m - 1)(rng));
      break;
  }

  TrialOutcome out;
  try {
    out.occupant_position = occupant_position(occ, rng);
    if (exp_.plan.channel_mode == ChannelMode::kAwgnFeatures) {
      const double sigma = sigma_from_snr_db(exp_.plan.snr_grid_db[snr_index]);
      std::normal_distribution<double> normal(0.0, 1.0);
      double z = out.occupant_position.distance + sigma * normal(rng);
      const double y = out.occupant_position.aoa + sigma * normal(rng);
      if (z < 0.0) {
        z = 0.0;
        out.flagged = true;
      }
      out.measurement = detect::Measurement::full(z, y);
      out.distance_error = z - out.occupant_position.distance;
    } else {
      const auto& ch = exp_.colored;
      const double d = out.occupant_position.distance;
      const double pr = ch.pt_lin / env::pathloss_linear(d, ch.acoustic);
      const std::size_t u =
          ch.window_offset >= 0
              ? static_cast<std::size_t>(ch.window_offset)
              : std::uniform_int_distribution<std::size_t>(0, unit_templates_.size() - 1)(rng);
      const Eigen::VectorXd y =
          std::sqrt(pr) * unit_templates_[u] + env::sample_colored_noise(point_cov_[snr_index], rng);
      const auto est = estimator_->estimate(y, ch.amplitude, pr);
      const double t_window = ch.t0 + ch.switching_delay + 2.0 * d / kSoundSpeed -
                              static_cast<double>(u) * ch.t_s_sample;
      const double t1_hat =
          t_window + static_cast<double>(est.toa_index - ranging::kSearchOrigin) * ch.t_s_sample;
      const auto z = ranging::rtt_to_distance(t1_hat, ch.t0, ch.switching_delay);
      out.flagged = z.clamped;
      out.measurement = detect::Measurement::distance_only(z.meters);
      out.distance_error = z.meters - d;
      out.delay_error = static_cast<long>(est.delay()) - static_cast<long>(u);
    }
    out.record = detect::algorithm1(out.measurement, truth_, exp_.thresholds,
                                    exp_.plan.detection_mode, exp_.plan.final_rule);
    out.record.truth = occ;
  } catch (const std::exception& e) {
    out.failed = true;
    out.flagged = true;
    out.error = e.what();
    out.record.truth = occ;
  }
  return out;
}

SweepResult Simulator::run_sweep(unsigned workers, const Progress& progress) const {
  SweepResult result;
  const std::size_t n = exp_.plan.n_trials;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  const detect::Mode mode = exp_.plan.detection_mode;
  for (std::size_t si = 0; si < exp_.plan.snr_grid_db.size(); ++si) {
    std::vector<ChunkResult> parts(chunks);
    parallel_for(chunks, workers, [&](std::size_t ci) {
      ChunkResult& part = parts[ci];
      const std::size_t end = std::min(n, (ci + 1) * kChunk);
      for (std::size_t ti = ci * kChunk; ti < end; ++ti) {
        const TrialOutcome t = run_trial(si, ti);
        if (t.flagged) ++part.flags;
        if (t.failed) {
          ++part.failures;
          continue;
        }
        ++part.records;
        if (!detect::fusion_inclusions_hold(t.record)) ++part.violations;
        if (!t.record.truth.is_eve()) part.alice_error.add(t.distance_error);
        for (std::size_t c = 0; c < kCurveCount; ++c) {
          const auto curve = static_cast<Curve>(c);
          if (curve_available(curve, mode)) tally_one(part.counts[c], curve, t, exp_.deployment);
        }
      }
    });
    SweepPoint pt;
    pt.snr_db = exp_.plan.snr_grid_db[si];
    pt.n_trials = n;
    for (const auto& part : parts) {
      for (std::size_t c = 0; c < kCurveCount; ++c) pt.counts[c] += part.counts[c];
      pt.flags += part.flags;
      pt.failures += part.failures;
      pt.inclusion_violations += part.violations;
      pt.alice_distance_error += part.alice_error;
      result.total_records += part.records;
    }
    result.total_inclusion_violations += pt.inclusion_violations;
    result.points.push_back(pt);
    if (progress) progress(si, result.points.back());
  }
  return result;
}

std::vector<ErrorRateCurve> Simulator::curves(const SweepResult& sweep) const {
  std::vector<ErrorRateCurve> out;
  for (std::size_t c = 0; c < kCurveCount; ++c) {
    const auto curve = static_cast<Curve>(c);
    if (!curve_available(curve, exp_.plan.detection_mode)) continue;
    const auto lab = label(curve);
    ErrorRateCurve erc{exp_.scenario_id, "montecarlo", lab.family, lab.test, lab.fusion, {}};
    for (const auto& pt : sweep.points) {
      RatePoint r = estimate_rates(pt.counts[c], is_identification(curve));
      r.snr_db = pt.snr_db;
      r.n_trials = pt.n_trials;
      r.flags = pt.flags;
      erc.points.push_back(r);
    }
    out.push_back(std::move(erc));
  }
  return out;
}

analytic::AnalyticContext analytic_context(const Experiment& exp, double snr_db, double quad,
                                           double sigma_scale) {
  analytic::AnalyticContext ctx;
  const auto& dep = exp.deployment;
  for (const auto& a : dep.alice) {
    ctx.d.push_back(a.distance);
    ctx.theta.push_back(a.aoa);
  }
  ctx.d0 = dep.d0;
  ctx.d_min = dep.d_min;
  if (const auto* ring = std::get_if<geometry::scenario::OutsideRing>(&exp.eve)) {
    ctx.k = ring->k;
    ctx.epsilon = ring->epsilon;
  }
  if (exp.plan.channel_mode == ChannelMode::kAwgnFeatures) {
    const double sigma = sigma_scale * sigma_from_snr_db(snr_db);
    ctx.sigma_d = analytic::NoiseModel::awgn(sigma, dep.m());
    ctx.sigma_theta = sigma;
  } else {
    const auto& ch = exp.colored;
    ranging::SigmaModel model{ch.acoustic, ch.pt_lin, quad, ch.t_s_sample, ch.crb_form};
    auto per = ranging::per_node_sigma(dep, model, snr_linear(snr_db));
    for (double& s : per.alice) s *= sigma_scale;
    auto eve = [f = per.eve, sigma_scale](double d) { return sigma_scale * f(d); };
    ctx.sigma_d = analytic::NoiseModel::per_node(std::move(per.alice), eve);
  }
  return ctx;
}

std::vector<ErrorRateCurve> analytic_curves(const Experiment& exp, double sigma_scale) {
  const bool full = exp.plan.detection_mode == detect::Mode::kFull;
  double quad = 0.0;
  if (exp.plan.channel_mode == ChannelMode::kColoredWaveform) quad = reference_quad(exp.colored);

  geometry::Deployment dep = exp.deployment;
  const auto law = analytic::eve_law(exp.eve, dep);
  const double eps_d = exp.thresholds.eps_d;

  auto make = [&](const char* source, Curve c) {
    const auto lab = label(c);
    return ErrorRateCurve{exp.scenario_id, source, lab.family, lab.test, lab.fusion, {}};
  };
  ErrorRateCurve s1 = make("analytic", Curve::kStep1);
  ErrorRateCurve t2b = make("analytic", Curve::kTest2b);
  ErrorRateCurve idd = make("analytic", Curve::kIdentDistance);
  ErrorRateCurve ida = make("analytic", Curve::kIdentAoa);
  ErrorRateCurve vs1 = make("analytic_verbatim", Curve::kStep1);
  ErrorRateCurve vt2b = make("analytic_verbatim", Curve::kTest2b);
  ErrorRateCurve vidd = make("analytic_verbatim", Curve::kIdentDistance);
  ErrorRateCurve vida = make("analytic_verbatim", Curve::kIdentAoa);

  auto put = [](RatePoint& r, const analytic::Prob& fa, const analytic::Prob& md) {
    r.p_fa = fa.p;
    r.log_p_fa = fa.log_p;
    r.p_md = md.p;
    r.log_p_md = md.log_p;
  };

  const double mp1 = static_cast<double>(dep.m() + 1);
  const double log_alice = std::log(static_cast<double>(dep.m()) / mp1);
  const double log_eve = -std::log(mp1);
  auto shift = [](const analytic::Prob& pr, double by) { return analytic::Prob::from_log(pr.log_p + by); };

  for (double snr_db : exp.plan.snr_grid_db) {
    const auto ctx = analytic_context(exp, snr_db, quad, sigma_scale);
    auto eve_sigma = [&ctx](double x) { return ctx.sigma_d.eve_at(x); };
    const auto vlaw1 = analytic::verbatim_step1_law(ctx);
    const auto vlaw2 = analytic::verbatim_step2_law(ctx);
    RatePoint base;
    base.snr_db = snr_db;

    RatePoint r = base;
    put(r, analytic::cond_pfa_test1(ctx), analytic::cond_pmd_test1(ctx, law.distance));
    s1.points.push_back(r);

    r = base;
    put(r, analytic::cond_pfa_bh(ctx.sigma_d.alice, eps_d),
        analytic::cond_pmd_bh(ctx.d, eps_d, law.distance, eve_sigma, ctx.sigma_d.common));
    t2b.points.push_back(r);

    r = base;
    r.p_mc = analytic::pe_misclassification(ctx, analytic::Feature::kDistance,
                                            analytic::Normalization::kConditional)
                 .pe;
    idd.points.push_back(r);

    // verbatim forms carry the 1/(M+1) prior weights; shifting the
    // conditional logs keeps them finite where the linear values underflow
    r = base;
    put(r, shift(analytic::cond_pfa_test1(ctx), log_alice),
        shift(analytic::cond_pmd_test1(ctx, vlaw1.distance), log_eve));
    vs1.points.push_back(r);

    r = base;
    put(r, shift(analytic::cond_pfa_bh(ctx.sigma_d.alice, eps_d), log_alice),
        shift(analytic::cond_pmd_bh(ctx.d, eps_d, vlaw2.distance, eve_sigma, ctx.sigma_d.common),
              log_eve));
    vt2b.points.push_back(r);

    r = base;
    r.p_mc = analytic::pe_misclassification(ctx, analytic::Feature::kDistance).pe;
    vidd.points.push_back(r);

    if (full) {
      r = base;
      r.p_mc = analytic::pe_misclassification(ctx, analytic::Feature::kAoa,
                                              analytic::Normalization::kConditional)
                   .pe;
      ida.points.push_back(r);
      r = base;
      r.p_mc = analytic::pe_misclassification(ctx, analytic::Feature::kAoa).pe;
      vida.points.push_back(r);
    }
  }

  std::vector<ErrorRateCurve> out{s1, t2b, idd};
  if (full) out.push_back(ida);
  out.insert(out.end(), {vs1, vt2b, vidd});
  if (full) out.push_back(vida);
  return out;
}

bool binomial_flag(std::uint64_t k, std::uint64_t n, double p, double* threshold) {
  const double dn = static_cast<double>(n);
  const double thr = 3.0 * std::sqrt(dn * p * (1.0 - p)) + 0.5;
  if (threshold) *threshold = thr;
  return std::abs(static_cast<double>(k) - dn * p) > thr;
}

ComparisonReport compare_mc_analytic(const ErrorRateCurve& mc, const ErrorRateCurve& an) {
  if (mc.points.size() != an.points.size()) throw ContractError("compare: SNR grids differ in length");
  ComparisonReport rep;
  for (std::size_t i = 0; i < mc.points.size(); ++i) {
    const auto& a = mc.points[i];
    const auto& b = an.points[i];
    if (a.snr_db != b.snr_db) throw ContractError("compare: SNR grids differ");
    auto check = [&](const char* name, const std::optional<double>& pm, const std::optional<double>& pa,
                     std::uint64_t k, std::uint64_t n) {
      if (!pm || !pa || n == 0) return;
      RateComparison row{mc.test, mc.fusion, name, a.snr_db, n, k, *pm, *pa, 0.0, false, {}, false};
      row.flagged = binomial_flag(k, n, std::clamp(*pa, 0.0, 1.0), &row.threshold);
      if (row.flagged) ++rep.flags;
      rep.rows.push_back(row);
    };
    check("p_fa", a.p_fa, b.p_fa, a.k_fa, a.n_fa);
    check("p_md", a.p_md, b.p_md, a.k_md, a.n_md);
    check("p_mc", a.p_mc, b.p_mc, a.k_mc, a.n_mc);
  }
  return rep;
}

RangingStudy ranging_study(const ColoredChannel& ch, double distance, double snr_db, std::size_t n,
                           std::uint64_t seed, unsigned workers) {
  if (n < 1) throw DomainError("ranging_study needs at least one trial");
  const auto wf = ch.waveform();
  const double sigma2 = 1.0 / snr_linear(snr_db);
  const auto cov = ch.covariance(sigma2);
  const ranging::ToaEstimator estimator(wf, cov.with_sigma2(1.0));
  const double pl = env::pathloss_linear(distance, ch.acoustic);

  RangingStudy st;
  st.n = n;
  st.pr = ch.pt_lin / pl;
  st.sigma2 = sigma2;
  const std::size_t max_delay = wf.max_contained_delay();
  if (ch.window_offset >= 0 && static_cast<std::size_t>(ch.window_offset) > max_delay) {
    throw ValidationError("window_offset leaves the waveform outside the slot");
  }
  const double ref = ch.window_offset >= 0 ? static_cast<double>(ch.window_offset)
                                           : ranging::reference_delay(wf);
  st.true_delay = ref;
  const auto syn = ranging::synth_waveform(wf, ref, 1.0);
  st.quad_per_sample = ranging::fisher_quad(cov, syn.s_dot);
  st.crb_paper = ranging::crb_toa(cov, syn.s_dot, st.pr);
  st.crb_fisher = ranging::crb_toa_fisher(cov, syn.s_dot, st.pr);
  const double snr = snr_linear(snr_db);
  st.sigma_d2_paper =
      ranging::sigma_d2(snr, pl, ch.pt_lin, st.quad_per_sample, ch.t_s_sample, ranging::CrbForm::kPaper);
  st.sigma_d2_fisher =
      ranging::sigma_d2(snr, pl, ch.pt_lin, st.quad_per_sample, ch.t_s_sample, ranging::CrbForm::kFisher);

  std::vector<Eigen::VectorXd> templates;
  for (std::size_t u = 0; u <= max_delay; ++u) {
    templates.push_back(ranging::synth_waveform(wf, static_cast<double>(u), st.pr).s);
  }

  struct Part {
    Moments delay, dist;
    std::uint64_t clamped = 0;
  };
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<Part> parts(chunks);
  parallel_for(chunks, workers, [&](std::size_t ci) {
    Part& part = parts[ci];
    const std::size_t end = std::min(n, (ci + 1) * kChunk);
    for (std::size_t ti = ci * kChunk; ti < end; ++ti) {
      Rng rng(trial_seed(seed, 0, ti));
      const std::size_t u = ch.window_offset >= 0
                                ? static_cast<std::size_t>(ch.window_offset)
                                : std::uniform_int_distribution<std::size_t>(0, max_delay)(rng);
      const Eigen::VectorXd y = templates[u] + env::sample_colored_noise(cov, rng);
      const auto est = estimator.estimate(y, ch.amplitude, st.pr);
      const double t_window =
          ch.t0 + ch.switching_delay + 2.0 * distance / kSoundSpeed - static_cast<double>(u) * ch.t_s_sample;
      const double t1 = t_window + static_cast<double>(est.delay()) * ch.t_s_sample;
      const auto z = ranging::rtt_to_distance(t1, ch.t0, ch.switching_delay);
      if (z.clamped) ++part.clamped;
      part.delay.add(static_cast<double>(est.delay()) - static_cast<double>(u));
      part.dist.add(z.meters - distance);
    }
  });
  for (const auto& p : parts) {
    st.delay_error += p.delay;
    st.distance_error += p.dist;
    st.clamped += p.clamped;
  }
  return st;
}

}  // namespace uwauth::sim
