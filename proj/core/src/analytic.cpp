#include "uwauth/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "uwauth/error.hpp"

namespace uwauth::analytic {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double log_phi(double x) { return -0.5 * x * x - kLogSqrt2Pi; }
double phi(double x) { return std::exp(log_phi(x)); }

// Continued fraction x + n0/(x + (n0+1)/(x + ...)), evaluated bottom-up.
double mills_tail(double x, int n0) {
  constexpr int kTerms = 200;
  double t = x;
  for (int n = kTerms; n >= n0; --n) t = x + n / t;
  return t;
}

constexpr double kCfSwitch = 5.0;
constexpr double kPsiSwitch = 4.0;
constexpr int kMinDepth = 5;

struct SimpsonState {
  const std::function<double(double)>* f;
  double rel_tol;
  int max_depth;
  bool exhausted = false;
};

double simpson_step(SimpsonState& st, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = (*st.f)(lm);
  const double frm = (*st.f)(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double sum = left + right;
  const double delta = sum - whole;
  const double eff = std::max(tol, st.rel_tol * std::abs(sum));
  if (depth >= kMinDepth && std::abs(delta) <= 15.0 * eff) return sum + delta / 15.0;
  if (depth >= st.max_depth) {
    st.exhausted = true;
    return sum + delta / 15.0;
  }
  return simpson_step(st, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
         simpson_step(st, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

void check_sigma(double s, const char* what) {
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw DomainError(std::string(what) + ": spread sigma must be positive and finite");
  }
}

// log of sum(pos) - sum(neg), all given as logs; -inf when not positive.
double log_signed(std::initializer_list<double> pos, std::initializer_list<double> neg) {
  std::vector<double> p(pos), n(neg);
  const double lp = log_sum_exp(p);
  const double ln = log_sum_exp(n);
  if (!(lp > ln)) return kNegInf;
  return log_diff_exp(lp, ln);
}

// log of the integral over [lo, hi] of Q((x - c2)/s) - Q((x - c1)/s), c1 < c2.
// This is P(c1 <= x + noise <= c2) integrated over x.
double log_band_integral(double lo, double hi, double c1, double c2, double s) {
  auto lpsi = [s](double u) { return log_q_tail_integral(u / s); };
  const double ls = std::log(s);
  if (lo >= c2) {
    return ls + log_signed({lpsi(lo - c2), lpsi(hi - c1)}, {lpsi(hi - c2), lpsi(lo - c1)});
  }
  if (hi <= c1) {
    return ls + log_signed({lpsi(c1 - hi), lpsi(c2 - lo)}, {lpsi(c1 - lo), lpsi(c2 - hi)});
  }
  auto psi = [s](double u) { return q_tail_integral(u / s); };
  const double v = s * (psi(lo - c2) - psi(hi - c2) - psi(lo - c1) + psi(hi - c1));
  return v > 0.0 ? std::log(v) : kNegInf;
}

// log of the integral over [lo, hi] of Q((x - c)/s).
double log_tail_integral(double lo, double hi, double c, double s) {
  const double a = (lo - c) / s;
  const double b = (hi - c) / s;
  if (a >= 0.0) return std::log(s) + log_diff_exp(log_q_tail_integral(a), log_q_tail_integral(b));
  const double v = s * (q_tail_integral(a) - q_tail_integral(b));
  return v > 0.0 ? std::log(v) : kNegInf;
}

// log(Q(a) - Q(b)) for a <= b.
// log(Q(a) - Q(b)), a <= b. Works on whichever tails are small so the
// difference does not cancel.
double log_q_diff(double a, double b) {
  if (!(a < b)) return kNegInf;
  if (b <= 0.0) return log_diff_exp(log_q_func(-b), log_q_func(-a));
  if (a >= 0.0) return log_diff_exp(log_q_func(a), log_q_func(b));
  return std::log1p(-(q_func(-a) + q_func(b)));
}

double expect(const Law& law, const std::function<double(double)>& g, std::vector<double> breaks,
              double tol) {
  if (law.kind == Law::Kind::kPoint) return g(law.lo);
  if (!(law.hi > law.lo)) throw DomainError("Eve law has an empty support");
  QuadratureOptions opts;
  opts.abs_tol = tol;
  return quadrature_split([&](double x) { return law.density(x) * g(x); }, law.lo, law.hi,
                          std::move(breaks), opts);
}

}  // namespace

double q_func(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double log_q_func(double x) {
  if (x < 0.0) return std::log1p(-q_func(-x));
  if (x < kCfSwitch) return std::log(q_func(x));
  return log_phi(x) - std::log(mills_tail(x, 1));
}

double q_tail_integral(double u) {
  if (u <= kPsiSwitch) return phi(u) - u * q_func(u);
  return std::exp(log_q_tail_integral(u));
}

double log_q_tail_integral(double u) {
  if (u <= kPsiSwitch) return std::log(phi(u) - u * q_func(u));
  // Psi/phi = 1 - u R(u) with Mills ratio R = 1/(u + T), T = 1/(u + 2/(u + ...)).
  const double t = 1.0 / mills_tail(u, 2);
  return log_phi(u) + std::log(t) - std::log(u + t);
}

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

double log_diff_exp(double a, double b) {
  if (b > a) throw DomainError("log_diff_exp requires a >= b");
  if (b == kNegInf) return a;
  return a + std::log1p(-std::exp(b - a));
}

double quadrature(const std::function<double(double)>& f, double a, double b,
                  const QuadratureOptions& opts) {
  if (!(a <= b)) throw DomainError("quadrature: reversed or invalid limits");
  if (a == b) return 0.0;
  SimpsonState st{&f, opts.rel_tol, opts.max_depth};
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double v = simpson_step(st, a, b, fa, fm, fb, whole, opts.abs_tol, 0);
  if (st.exhausted) {
    throw NonConvergenceError("adaptive Simpson exceeded its maximum recursion depth", v);
  }
  return v;
}

double quadrature(const std::function<double(double)>& f, double a, double b, double tol) {
  QuadratureOptions opts;
  opts.abs_tol = tol;
  return quadrature(f, a, b, opts);
}

double quadrature_split(const std::function<double(double)>& f, double a, double b,
                        std::vector<double> breakpoints, const QuadratureOptions& opts) {
  if (!(a <= b)) throw DomainError("quadrature: reversed or invalid limits");
  std::vector<double> pts{a};
  std::sort(breakpoints.begin(), breakpoints.end());
  for (double x : breakpoints) {
    if (x > a && x < b && x > pts.back()) pts.push_back(x);
  }
  pts.push_back(b);
  double total = 0.0;
  bool failed = false;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    QuadratureOptions piece = opts;
    piece.abs_tol = opts.abs_tol * (pts[i + 1] - pts[i]) / (b - a);
    try {
      total += quadrature(f, pts[i], pts[i + 1], piece);
    } catch (const NonConvergenceError& e) {
      failed = true;
      total += e.partial_estimate();
    }
  }
  if (failed) throw NonConvergenceError("piecewise quadrature did not converge", total);
  return total;
}

NoiseModel NoiseModel::awgn(double sigma, std::size_t m) {
  NoiseModel n;
  n.alice.assign(m, sigma);
  n.common = sigma;
  n.eve = [sigma](double) { return sigma; };
  return n;
}

NoiseModel NoiseModel::per_node(std::vector<double> alice, std::function<double(double)> eve) {
  NoiseModel n;
  n.alice = std::move(alice);
  n.eve = std::move(eve);
  return n;
}

void NoiseModel::validate(std::size_t m) const {
  if (alice.size() != m) throw ContractError("noise model has the wrong number of nodes");
  for (double s : alice) check_sigma(s, "noise model");
  if (common) check_sigma(*common, "noise model");
  if (!common && !eve) throw ContractError("noise model lacks an Eve spread evaluator");
}

double pfa_test1(const AnalyticContext& ctx) {
  ctx.sigma_d.validate(ctx.m());
  double acc = 0.0;
  for (std::size_t i = 0; i < ctx.m(); ++i) acc += q_func((ctx.d0 - ctx.d[i]) / ctx.sigma_d.alice[i]);
  return acc / static_cast<double>(ctx.m() + 1);
}

double pmd_bar_test1(const AnalyticContext& ctx, double tol) {
  ctx.sigma_d.validate(ctx.m());
  if (!(ctx.k > 1.0 && ctx.epsilon > 0.0)) throw DomainError("pmd_bar_test1 needs k > 1 and epsilon > 0");
  const double lo = ctx.d0 + ctx.epsilon;
  const double hi = ctx.k * ctx.d0;
  if (!(hi > lo)) throw DomainError("pmd_bar_test1: empty Eve support (k d0 <= d0 + epsilon)");
  const double eta = 1.0 / (ctx.d0 * (ctx.k - 1.0) - ctx.epsilon);
  // 1 - integral of eta Q((d0 - x)/s) equals the integral of eta Q((x - d0)/s).
  double integral = 0.0;
  if (ctx.sigma_d.common) {
    integral = std::exp(log_tail_integral(lo, hi, ctx.d0, *ctx.sigma_d.common));
  } else {
    QuadratureOptions opts;
    opts.abs_tol = tol / eta;
    integral = quadrature(
        [&](double x) { return q_func((x - ctx.d0) / ctx.sigma_d.eve(x)); }, lo, hi, opts);
  }
  return eta * integral / static_cast<double>(ctx.m() + 1);
}

double pfa_test2b(std::size_t m, double eps_d, const NoiseModel& sigma) {
  if (!(eps_d > 0.0)) throw DomainError("pfa_test2b: eps_d must be positive");
  sigma.validate(m);
  const double mp1 = static_cast<double>(m + 1);
  if (sigma.common) return 2.0 * static_cast<double>(m) / mp1 * q_func(eps_d / *sigma.common);
  double acc = 0.0;
  for (double s : sigma.alice) acc += 2.0 * q_func(eps_d / s);
  return acc / mp1;
}

double pmd_bar_test2b(const AnalyticContext& ctx, double eps_d, double tol) {
  ctx.sigma_d.validate(ctx.m());
  if (!(eps_d >= 0.0)) throw DomainError("pmd_bar_test2b: eps_d must be non-negative");
  const double lo = ctx.d_min;
  const double hi = ctx.k * ctx.d0;
  if (!(hi > lo)) throw DomainError("pmd_bar_test2b: requires d_min < k d0");
  if (eps_d == 0.0) return 0.0;
  const double norm = static_cast<double>(ctx.m() + 1) * (hi - lo);
  double integral = 0.0;
  if (ctx.sigma_d.common) {
    for (double di : ctx.d) {
      integral += std::exp(log_band_integral(lo, hi, di - eps_d, di + eps_d, *ctx.sigma_d.common));
    }
  } else {
    std::vector<double> breaks;
    for (double di : ctx.d) {
      breaks.push_back(di - eps_d);
      breaks.push_back(di + eps_d);
    }
    QuadratureOptions opts;
    opts.abs_tol = tol * norm;
    integral = quadrature_split(
        [&](double x) {
          const double s = ctx.sigma_d.eve(x);
          double acc = 0.0;
          for (double di : ctx.d) acc += q_func((di - eps_d - x) / s) - q_func((di + eps_d - x) / s);
          return acc;
        },
        lo, hi, breaks, opts);
  }
  return integral / norm;
}

Misclassification pe_misclassification(std::span<const double> values, double lo, double hi,
                                       std::span<const double> sigma, Normalization norm) {
  const std::size_t m = values.size();
  if (m < 1) throw DomainError("misclassification needs at least one node");
  if (sigma.size() != m) throw ContractError("misclassification: sigma length mismatch");
  for (double s : sigma) check_sigma(s, "pe_misclassification");
  for (double v : values) {
    if (v < lo || v > hi) throw DomainError("misclassification: feature value outside its range");
  }

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> sorted(m);
  for (std::size_t j = 0; j < m; ++j) sorted[j] = values[order[j]];
  for (std::size_t j = 1; j < m; ++j) {
    if (sorted[j] <= sorted[j - 1]) sorted[j] = sorted[j - 1] + kTiePerturbation;
  }
  for (std::size_t j = 1; j < m; ++j) {
    if (!(sorted[j] > sorted[j - 1])) throw DomainError("misclassification: duplicate feature values");
  }

  Misclassification out;
  out.per_node.assign(m, 0.0);
  double acc = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double v = sorted[j];
    const double l = (j == 0) ? lo : 0.5 * (sorted[j - 1] + v);
    const double u = (j + 1 == m) ? hi : 0.5 * (v + sorted[j + 1]);
    const double s = sigma[order[j]];
    const double pe = q_func((v - l) / s) + q_func((u - v) / s);
    out.per_node[order[j]] = pe;
    acc += pe;
  }
  const double denom = static_cast<double>(norm == Normalization::kVerbatim ? m + 1 : m);
  out.pe = acc / denom;
  return out;
}

Misclassification pe_misclassification(const AnalyticContext& ctx, Feature feature,
                                       Normalization norm) {
  if (feature == Feature::kDistance) {
    ctx.sigma_d.validate(ctx.m());
    return pe_misclassification(ctx.d, ctx.d_min, ctx.d0, ctx.sigma_d.alice, norm);
  }
  std::vector<double> s(ctx.theta.size(), ctx.sigma_theta);
  return pe_misclassification(ctx.theta, 0.0, 180.0, s, norm);
}

double Law::density(double x) const {
  switch (kind) {
    case Kind::kPoint:
      return 0.0;
    case Kind::kUniform:
      return (x >= lo && x <= hi) ? 1.0 / (hi - lo) : 0.0;
    case Kind::kAreaUniform:
      return (x >= lo && x <= hi) ? 2.0 * x / (hi * hi - lo * lo) : 0.0;
  }
  return 0.0;
}

EveLaw eve_law(const geometry::EveScenario& scenario, const geometry::Deployment& dep) {
  using namespace geometry::scenario;
  if (const auto* ring = std::get_if<OutsideRing>(&scenario)) {
    return {Law::uniform(dep.d0 + ring->epsilon, ring->k * dep.d0), Law::uniform(0.0, 180.0)};
  }
  if (std::holds_alternative<InsideUniform>(scenario)) {
    return {Law::area_uniform(dep.d_min, dep.d0), Law::uniform(0.0, 180.0)};
  }
  Rng unused(0);
  const auto pos = geometry::place_eve(scenario, dep, unused);
  return {Law::point(pos.distance), Law::point(pos.aoa)};
}

EveLaw verbatim_step1_law(const AnalyticContext& ctx) {
  return {Law::uniform(ctx.d0 + ctx.epsilon, ctx.k * ctx.d0), Law::uniform(0.0, 180.0)};
}

EveLaw verbatim_step2_law(const AnalyticContext& ctx) {
  return {Law::uniform(ctx.d_min, ctx.k * ctx.d0), Law::uniform(0.0, 180.0)};
}

Prob Prob::from_log(double lp) { return {std::exp(lp), lp}; }
Prob Prob::from_linear(double p) { return {p, p > 0.0 ? std::log(p) : kNegInf}; }

Prob cond_pfa_test1(const AnalyticContext& ctx) {
  ctx.sigma_d.validate(ctx.m());
  std::vector<double> logs(ctx.m());
  for (std::size_t i = 0; i < ctx.m(); ++i) logs[i] = log_q_func((ctx.d0 - ctx.d[i]) / ctx.sigma_d.alice[i]);
  return Prob::from_log(log_sum_exp(logs) - std::log(static_cast<double>(ctx.m())));
}

Prob cond_pmd_test1(const AnalyticContext& ctx, const Law& law, double tol) {
  ctx.sigma_d.validate(ctx.m());
  if (law.kind == Law::Kind::kPoint) {
    return Prob::from_log(log_q_func((law.lo - ctx.d0) / ctx.sigma_d.eve_at(law.lo)));
  }
  if (law.kind == Law::Kind::kUniform && ctx.sigma_d.common) {
    return Prob::from_log(log_tail_integral(law.lo, law.hi, ctx.d0, *ctx.sigma_d.common) -
                          std::log(law.hi - law.lo));
  }
  const double p = expect(
      law, [&](double x) { return q_func((x - ctx.d0) / ctx.sigma_d.eve_at(x)); }, {ctx.d0}, tol);
  return Prob::from_linear(std::clamp(p, 0.0, 1.0));
}

Prob cond_pfa_bh(std::span<const double> sigma_alice, double eps) {
  if (!(eps > 0.0)) throw DomainError("proximity threshold must be positive");
  if (sigma_alice.empty()) throw DomainError("need at least one node");
  std::vector<double> logs;
  for (double s : sigma_alice) {
    check_sigma(s, "cond_pfa_bh");
    logs.push_back(std::log(2.0) + log_q_func(eps / s));
  }
  return Prob::from_log(log_sum_exp(logs) - std::log(static_cast<double>(sigma_alice.size())));
}

Prob cond_pmd_bh(std::span<const double> values, double eps, const Law& law,
                 const std::function<double(double)>& sigma_at, std::optional<double> common,
                 double tol) {
  if (!(eps >= 0.0)) throw DomainError("proximity threshold must be non-negative");
  if (eps == 0.0) return Prob::from_linear(0.0);
  auto sig = [&](double x) { return common ? *common : sigma_at(x); };
  std::vector<double> logs;
  if (law.kind == Law::Kind::kPoint) {
    const double s = sig(law.lo);
    check_sigma(s, "cond_pmd_bh");
    for (double v : values) logs.push_back(log_q_diff((v - eps - law.lo) / s, (v + eps - law.lo) / s));
    return Prob::from_log(log_sum_exp(logs));
  }
  if (law.kind == Law::Kind::kUniform && common) {
    check_sigma(*common, "cond_pmd_bh");
    for (double v : values) logs.push_back(log_band_integral(law.lo, law.hi, v - eps, v + eps, *common));
    return Prob::from_log(log_sum_exp(logs) - std::log(law.hi - law.lo));
  }
  std::vector<double> breaks;
  for (double v : values) {
    breaks.push_back(v - eps);
    breaks.push_back(v + eps);
  }
  const double p = expect(
      law,
      [&](double x) {
        const double s = sig(x);
        double acc = 0.0;
        for (double v : values) acc += q_func((v - eps - x) / s) - q_func((v + eps - x) / s);
        return acc;
      },
      breaks, tol);
  return Prob::from_linear(std::clamp(p, 0.0, 1.0));
}

}  // namespace uwauth::analytic
