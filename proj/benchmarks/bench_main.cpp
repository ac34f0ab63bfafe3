#include <benchmark/benchmark.h>

#include "uwauth/analytic.hpp"
#include "uwauth/ranging.hpp"
#include "uwauth/sim.hpp"

using namespace uwauth;

namespace {

sim::Experiment awgn_experiment() {
  sim::Experiment e;
  Rng rng(79);
  e.deployment.alice = geometry::deploy_alice(10, 500.0, 10.0, rng);
  e.plan.snr_grid_db = {-10, -5, 0, 5, 10, 15, 20, 25, 30};
  e.plan.n_trials = 1000;
  return e;
}

void BM_MlToa(benchmark::State& state) {
  ranging::PnWaveform wf;
  wf.chips = ranging::gen_pn(7, 1);
  wf.q = static_cast<std::size_t>(state.range(0));
  const auto r = env::noise_autocorrelation(env::AcousticParams{}, wf.t_s_sample, wf.q);
  const auto cov = env::build_covariance(r, wf.q, 1.0);
  const ranging::ToaEstimator est(wf, cov);
  Rng rng(1);
  const Eigen::VectorXd y = ranging::synth_waveform(wf, 20.0, 4.0).s + env::sample_colored_noise(cov, rng);
  for (auto _ : state) benchmark::DoNotOptimize(est.estimate(y).toa_index);
}
BENCHMARK(BM_MlToa)->Arg(128)->Arg(512);

void BM_ColoredNoiseDraw(benchmark::State& state) {
  const auto q = static_cast<std::size_t>(state.range(0));
  const auto cov = env::build_covariance(env::noise_autocorrelation(env::AcousticParams{}, 1e-4, q), q, 1.0);
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(env::sample_colored_noise(cov, rng).data());
}
BENCHMARK(BM_ColoredNoiseDraw)->Arg(128)->Arg(512);

void BM_AnalyticCurves(benchmark::State& state) {
  const auto e = awgn_experiment();
  for (auto _ : state) benchmark::DoNotOptimize(sim::analytic_curves(e).size());
}
BENCHMARK(BM_AnalyticCurves)->Unit(benchmark::kMillisecond);

void BM_Pmd2PerNode(benchmark::State& state) {
  const auto e = awgn_experiment();
  analytic::AnalyticContext ctx;
  for (const auto& a : e.deployment.alice) ctx.d.push_back(a.distance);
  ctx.sigma_d = analytic::NoiseModel::per_node(std::vector<double>(ctx.m(), 5.0),
                                               [](double d) { return 5.0 * d / 500.0; });
  for (auto _ : state) benchmark::DoNotOptimize(analytic::pmd_bar_test2b(ctx, 3.0));
}
BENCHMARK(BM_Pmd2PerNode)->Unit(benchmark::kMillisecond);

void BM_RunTrialAwgn(benchmark::State& state) {
  const sim::Simulator s(awgn_experiment());
  std::size_t t = 0;
  for (auto _ : state) benchmark::DoNotOptimize(s.run_trial(4, t++).record.final);
}
BENCHMARK(BM_RunTrialAwgn);

void BM_RunTrialColored(benchmark::State& state) {
  auto e = awgn_experiment();
  e.plan.channel_mode = sim::ChannelMode::kColoredWaveform;
  e.plan.detection_mode = detect::Mode::kDistanceOnly;
  e.colored.pt_lin = db_to_linear(200.0);
  const sim::Simulator s(e);
  std::size_t t = 0;
  for (auto _ : state) benchmark::DoNotOptimize(s.run_trial(4, t++).record.final);
}
BENCHMARK(BM_RunTrialColored);

}  // namespace
BENCHMARK_MAIN();
