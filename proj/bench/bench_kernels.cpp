// Serial vs parallel timings of the hot kernels. Arg 0 = serial, 1 = parallel.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "qamcs/amp.hpp"
#include "qamcs/kernels.hpp"
#include "qamcs/metrics.hpp"
#include "qamcs/qamsim.hpp"
#include "qamcs/sampling.hpp"
#include "qamcs/unfolded.hpp"

using namespace qamcs;

namespace {

Exec policy(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(gen);
  return v;
}

ParametricMap phantom_map(std::size_t side) { return generate_phantom(side, side, {}, 3).sos_map; }

void BM_conv3x3_reference(benchmark::State& state) {
  const PlaneShape shape{8, 64, 64};
  const auto in = noise(shape.size(), 1), w = noise(8 * 8 * 9, 2);
  std::vector<double> out(shape.size());
  for (auto _ : state) {
    reference::conv3x3(in, shape, w, 8, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_conv3x3_reference);

void BM_conv3x3(benchmark::State& state) {
  const PlaneShape shape{8, 64, 64};
  const auto in = noise(shape.size(), 1), w = noise(8 * 8 * 9, 2);
  std::vector<double> out(shape.size());
  for (auto _ : state) {
    conv3x3(in, shape, w, 8, out, policy(state));
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_conv3x3)->Arg(0)->Arg(1);

void BM_amp_blocks(benchmark::State& state) {
  const auto x = phantom_map(64);
  const auto problem = make_problem(x, gaussian_matrix(64, 256, 4));
  AmpOptions opts;
  opts.max_iters = 30;
  opts.onsager = true;
  for (auto _ : state) {
    auto map = amp_reconstruct_image(problem, DenoiserSpec::soft(1.0, 3), opts, policy(state));
    benchmark::DoNotOptimize(map.values().data());
  }
}
BENCHMARK(BM_amp_blocks)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_unfolded_forward(benchmark::State& state) {
  const auto model = make_unfolded_model({});
  const auto problem = make_problem(normalize(phantom_map(64), {}), model.a);
  UnfoldedOptions opts;
  opts.exec = policy(state);
  for (auto _ : state) {
    auto map = unfolded_forward(problem, model, opts);
    benchmark::DoNotOptimize(map.values().data());
  }
}
BENCHMARK(BM_unfolded_forward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_acquire(benchmark::State& state) {
  const auto p = generate_phantom(16, 16, {}, 5);
  for (auto _ : state) {
    auto acq = acquire_and_map(p, {}, false, policy(state));
    benchmark::DoNotOptimize(acq.sos.values().data());
  }
}
BENCHMARK(BM_acquire)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ssim(benchmark::State& state) {
  const auto a = phantom_map(128);
  auto b = a;
  const auto n = noise(b.size(), 6);
  for (std::size_t i = 0; i < b.size(); ++i) b.values()[i] += 5.0 * n[i];
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b, std::nullopt, policy(state)));
}
BENCHMARK(BM_ssim)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
