// Serial vs OpenMP timings for the hot kernels.
//   ./build/bench/ecodrive_bench --benchmark_filter=Dense
#include <benchmark/benchmark.h>

#include <numeric>
#include <random>
#include <vector>

#include "ecodrive/emissions.hpp"
#include "ecodrive/kernels.hpp"
#include "ecodrive/microsim.hpp"
#include "ecodrive/nn.hpp"
#include "ecodrive/scenario.hpp"

namespace {

using namespace ecodrive;
using kernels::Exec;

std::vector<double> noise(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <Exec E>
void BM_DenseForward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const int in = 64, out = 64;
  const auto x = noise(static_cast<std::size_t>(batch) * in, 1);
  const auto w = noise(static_cast<std::size_t>(out) * in, 2);
  const auto b = noise(out, 3);
  std::vector<double> y(static_cast<std::size_t>(batch) * out);
  for (auto _ : state) {
    kernels::dense_forward(x, w, b, y, batch, in, out, E);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_DenseForward<Exec::serial>)->Arg(256)->Arg(2048);
BENCHMARK(BM_DenseForward<Exec::parallel>)->Arg(256)->Arg(2048);

template <Exec E>
void BM_DenseBackward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const int in = 64, out = 64;
  const auto x = noise(static_cast<std::size_t>(batch) * in, 1);
  const auto dy = noise(static_cast<std::size_t>(batch) * out, 2);
  const auto w = noise(static_cast<std::size_t>(out) * in, 3);
  std::vector<double> dx(x.size()), dw(w.size()), db(out);
  for (auto _ : state) {
    kernels::dense_backward_input(dy, w, dx, batch, in, out, E);
    kernels::dense_backward_params(dy, x, dw, db, batch, in, out, E);
    benchmark::DoNotOptimize(dw.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_DenseBackward<Exec::serial>)->Arg(2048);
BENCHMARK(BM_DenseBackward<Exec::parallel>)->Arg(2048);

template <Exec E>
void BM_Tanh(benchmark::State& state) {
  auto y = noise(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) {
    kernels::tanh_inplace(y, E);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_Tanh<Exec::serial>)->Arg(1 << 17);
BENCHMARK(BM_Tanh<Exec::parallel>)->Arg(1 << 17);

template <Exec E>
void BM_ActorForward(benchmark::State& state) {
  nn::Mlp net({51, 64, 64, 64, 1});
  net.init_orthogonal(5, 1.414, 0.01);
  const int batch = static_cast<int>(state.range(0));
  const auto x = noise(static_cast<std::size_t>(batch) * 51, 6);
  nn::Workspace ws;
  for (auto _ : state) {
    net.forward(x, batch, ws, E);
    benchmark::DoNotOptimize(ws.acts.back().data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ActorForward<Exec::serial>)->Arg(2048);
BENCHMARK(BM_ActorForward<Exec::parallel>)->Arg(2048);

scenario::ScenarioSpec bench_spec() {
  scenario::ScenarioSpec s;
  s.id = "bench";
  s.geometry.phase_count = 2;
  s.geometry.incoming.push_back(scenario::Approach{2, 400.0, 15.0, 0.0, false});
  s.geometry.outgoing.push_back(scenario::Approach{2, 200.0, 15.0, 0.0, false});
  s.control_signal = scenario::SignalPlan::two_phase(25.0, 40.0);
  s.ghost_signals.push_back(scenario::default_ghost_plan());
  s.inflows.push_back(600.0);
  s.seed = 11;
  return s;
}

void BM_Episodes(benchmark::State& state) {
  const auto spec = bench_spec();
  std::vector<std::uint64_t> seeds(8);
  std::iota(seeds.begin(), seeds.end(), 1);
  const bool parallel = state.range(0) != 0;
  for (auto _ : state) {
    auto r = parallel ? sim::run_episodes(spec, sim::BaselineController{}, 300, sim::SimConfig{},
                                          emissions::OracleProvider{}, seeds)
                      : sim::run_episodes_serial(spec, sim::BaselineController{}, 300, sim::SimConfig{},
                                                 emissions::OracleProvider{}, seeds);
    benchmark::DoNotOptimize(r.data());
  }
  state.SetLabel(parallel ? "parallel" : "serial");
}
BENCHMARK(BM_Episodes)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
