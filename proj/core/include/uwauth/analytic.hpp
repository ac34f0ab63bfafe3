#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "uwauth/geometry.hpp"

namespace uwauth::analytic {

/// Standard normal tail probability.
double q_func(double x);
/// log Q(x); stays finite far beyond the underflow point of Q.
double log_q_func(double x);

/// Psi(u) = integral of Q over [u, inf) = phi(u) - u Q(u).
double q_tail_integral(double u);
double log_q_tail_integral(double u);

double log_sum_exp(double a, double b);
double log_sum_exp(std::span<const double> v);
/// log(exp(a) - exp(b)) for a >= b.
double log_diff_exp(double a, double b);

struct QuadratureOptions {
  double abs_tol = 1e-8;
  double rel_tol = 0.0;  ///< 0 disables the relative criterion
  int max_depth = 50;
};

/// Adaptive Simpson. Throws DomainError on reversed limits and
/// NonConvergenceError (with the partial estimate) when a subinterval would
/// need more than max_depth bisections.
double quadrature(const std::function<double(double)>& f, double a, double b,
                  const QuadratureOptions& opts = {});
double quadrature(const std::function<double(double)>& f, double a, double b, double tol);

/// Integrates piecewise over [a, b] split at the breakpoints inside it; the
/// tolerance is shared in proportion to piece length.
double quadrature_split(const std::function<double(double)>& f, double a, double b,
                        std::vector<double> breakpoints, const QuadratureOptions& opts = {});

/// Ranging spread per transmitter: a common value (AWGN features) or a
/// per-node vector plus a distance-dependent evaluator for Eve.
struct NoiseModel {
  std::vector<double> alice;
  std::function<double(double)> eve;
  std::optional<double> common;

  static NoiseModel awgn(double sigma, std::size_t m);
  static NoiseModel per_node(std::vector<double> alice, std::function<double(double)> eve);

  double eve_at(double d) const { return common ? *common : eve(d); }
  void validate(std::size_t m) const;
};

struct AnalyticContext {
  std::vector<double> d;      ///< Alice distances, metres
  std::vector<double> theta;  ///< Alice AoAs, degrees
  double d0 = 500.0;
  double d_min = 10.0;
  double k = 2.0;
  double epsilon = 1.0;
  NoiseModel sigma_d;
  double sigma_theta = 1.0;  ///< AoA spread (AWGN features only)

  std::size_t m() const noexcept { return d.size(); }
};

enum class Normalization {
  kVerbatim,     ///< pi(i) = 1/(M+1)
  kConditional,  ///< 1/M, conditioned on an Alice sender
};

// Joint-prior expressions exactly as published. -----------------------------

double pfa_test1(const AnalyticContext& ctx);
double pmd_bar_test1(const AnalyticContext& ctx, double tol = 1e-8);
double pfa_test2b(std::size_t m, double eps_d, const NoiseModel& sigma);
double pmd_bar_test2b(const AnalyticContext& ctx, double eps_d, double tol = 1e-8);

struct Misclassification {
  double pe = 0.0;
  std::vector<double> per_node;  ///< P_{e|i}, in the caller's node order
};

/// Nearest-cell misclassification for one scalar feature. Cells are the
/// midpoint intervals of the sorted values, closed by [lo, hi] on the outside.
Misclassification pe_misclassification(std::span<const double> values, double lo, double hi,
                                       std::span<const double> sigma,
                                       Normalization norm = Normalization::kVerbatim);

enum class Feature { kDistance, kAoa };
Misclassification pe_misclassification(const AnalyticContext& ctx, Feature feature,
                                       Normalization norm = Normalization::kVerbatim);

/// Duplicate-tie perturbation applied before building cells.
inline constexpr double kTiePerturbation = 1e-9;

// Conditional rates under an explicit Eve law, for comparison with Monte Carlo.

/// Distribution of one Eve coordinate.
struct Law {
  enum class Kind { kPoint, kUniform, kAreaUniform } kind = Kind::kPoint;
  double lo = 0.0;
  double hi = 0.0;

  static Law point(double x) { return {Kind::kPoint, x, x}; }
  static Law uniform(double lo, double hi) { return {Kind::kUniform, lo, hi}; }
  /// Radius of an area-uniform point in an annulus: density 2x / (hi^2 - lo^2).
  static Law area_uniform(double lo, double hi) { return {Kind::kAreaUniform, lo, hi}; }

  double density(double x) const;
};

struct EveLaw {
  Law distance;
  Law aoa;
};

/// Law of Eve's (distance, AoA) implied by a scenario.
EveLaw eve_law(const geometry::EveScenario& scenario, const geometry::Deployment& deployment);
/// The law the published expressions assume: d_E ~ U(d0 + epsilon, k d0) for
/// step 1 and U(d_min, k d0) for the distance test.
EveLaw verbatim_step1_law(const AnalyticContext& ctx);
EveLaw verbatim_step2_law(const AnalyticContext& ctx);

/// Probability together with its logarithm, computed without underflow
/// where a closed form exists.
struct Prob {
  double p = 0.0;
  double log_p = 0.0;

  static Prob from_log(double lp);
  static Prob from_linear(double p);
};

/// P(step 1 flags | Alice), averaged over the M nodes.
Prob cond_pfa_test1(const AnalyticContext& ctx);
/// P(step 1 passes | Eve) under the given law.
Prob cond_pmd_test1(const AnalyticContext& ctx, const Law& law, double tol = 1e-10);
/// P(|z - d_nn| > eps | Alice), ignoring neighbouring proximity regions.
Prob cond_pfa_bh(std::span<const double> sigma_alice, double eps);
/// P(measurement lands in some proximity region | Eve) under the law.
/// `sigma_at` gives the spread at a given Eve coordinate.
Prob cond_pmd_bh(std::span<const double> values, double eps, const Law& law,
                 const std::function<double(double)>& sigma_at, std::optional<double> common_sigma,
                 double tol = 1e-10);

}  // namespace uwauth::analytic
