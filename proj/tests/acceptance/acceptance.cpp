// End-to-end acceptance checks, one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cauchy_oracle.hpp"
#include "metric_oracle.hpp"
#include "qamcs/amp.hpp"
#include "qamcs/experiment.hpp"
#include "qamcs/metrics.hpp"
#include "qamcs/qamsim.hpp"
#include "qamcs/sampling.hpp"
#include "qamcs/unfolded.hpp"
#include "qamcs/wavelet.hpp"
#include "test_util.hpp"

using namespace qamcs;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> vec(const ParametricMap& m) { return {m.values().begin(), m.values().end()}; }

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("qamcs_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// 1: one unfolded step with the oracle correction returns the truth.
Outcome unfolded_identity() {
  std::mt19937_64 gen(1);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = 2 + gen() % 15;  // N <= 256
    const std::size_t n = b * b, m = 1 + gen() % n;
    ModelConfig mc;
    mc.iterations = 1;
    mc.block_size = b;
    mc.channels = 2;
    mc.seed = static_cast<std::uint64_t>(trial);
    auto model = make_unfolded_model(mc);
    model.a = gaussian_matrix(m, n, 500 + static_cast<std::uint64_t>(trial));
    const auto truth = test::random_map(b, b, 900 + static_cast<std::uint64_t>(trial));
    const auto problem = make_problem(truth, model.a);
    const auto blocks = partition_vectors(truth, problem.grid);
    UnfoldedOptions opt;
    opt.denoiser = [&](std::size_t, std::size_t blk, std::span<const double> x) {
      std::vector<double> d(x.size());
      for (std::size_t j = 0; j < x.size(); ++j) d[j] = blocks[blk][j] - x[j];
      return d;
    };
    const auto out = unfolded_forward(problem, model, opt);
    worst = std::max(worst, test::max_abs_diff(vec(out), vec(truth)));
  }
  return {worst < 1e-10, "max abs error " + fmt("%.3g", worst) + " over 100 pairs (< 1e-10)"};
}

// 2: AMP recovers 1-sparse signals.
Outcome amp_sparse() {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto a = gaussian_matrix(32, 64, seed);
    std::mt19937_64 gen(seed + 7);
    std::vector<double> x(64, 0.0);
    x[gen() % 64] = (gen() % 2 ? 1.0 : -1.0) * std::uniform_real_distribution<double>(0.5, 2.0)(gen);
    const auto y = apply_sampling(x, a);
    AmpOptions opt;
    opt.max_iters = 100;
    opt.onsager = true;
    const auto res = amp_reconstruct(DenseOperator(a), y, 8, 8, DenoiserSpec::soft(1.0, 0), opt);
    if (res.iterations <= 100 && test::max_abs_diff(res.x, x) < 1e-3) ++ok;
  }
  return {ok >= 95, std::to_string(ok) + "/100 seeds within 1e-3 (>= 95)"};
}

// 3: hand-derived gradients against central differences.
Outcome gradients() {
  ModelConfig mc;
  mc.iterations = 2;
  mc.block_size = 8;
  mc.channels = 4;
  mc.ratio = 0.5;
  mc.trainable_a = true;
  mc.deblock = true;
  mc.seed = 3;
  auto model = make_unfolded_model(mc);
  std::mt19937_64 gen(4);
  std::normal_distribution<double> d(0.0, 0.1);
  for (auto& db : model.deblockers) {
    for (auto& k : db.kernel) k = d(gen);
    db.gain = 0.8;
  }
  ParametricMap sample(16, 16);
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j) sample(i, j) = 0.5 + 0.25 * std::sin(0.4 * double(i) + 1.0) * std::cos(0.3 * double(j));
  const auto res = gradient_check(model, sample, 1e-5);
  const bool all = res.checked == parameter_count(model);
  return {all && res.max_rel_error < 1e-4, "max rel error " + fmt("%.3g", res.max_rel_error) + " over " +
                                               std::to_string(res.checked) + " parameters (< 1e-4)"};
}

// 4: trainable A beats frozen A on held-out phantoms.
Outcome training_ordering() {
  ExperimentConfig c;
  c.out = scratch("training");
  c.n_train = 24;
  c.n_test = 8;
  c.rows = c.cols = 64;
  c.sampling.ratio = 0.25;
  c.unfolded.iterations = 6;
  c.train.learning_rate = 1e-4;
  c.train.batch_size = 32;
  c.train.epochs = 200;  // one batch per epoch: 200 steps
  c.methods = {Method::unfolded, Method::unfolded_trained_a};
  const auto r = compare_methods(c);
  if (!r.failed_methods.empty()) return {false, "method failed: " + r.failed_methods.front()};
  const double frozen = r.report[0].psnr_db, learned = r.report[1].psnr_db;
  return {learned >= frozen, "held-out PSNR trainable-A " + fmt("%.3f", learned) + " dB vs frozen " +
                                 fmt("%.3f", frozen) + " dB (margin >= 0)"};
}

// 5: denoiser oracles.
Outcome denoisers() {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> uy(-5.0, 5.0), ug(0.05, 2.0), us(0.05, 2.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double y = uy(gen), g = ug(gen), s = us(gen);
    worst = std::max(worst, std::abs(cauchy_map_shrink(y, g, s) - test::cauchy_grid_argmin(y, g, s)));
  }
  const auto haar = soft_threshold_denoise(std::vector<double>{4, 2, 2, 0}, 2, 2, 1.0, 1);
  const bool fixture = haar == std::vector<double>{3, 2, 2, 1};
  return {worst < 1e-6 && fixture, "Cauchy max deviation " + fmt("%.3g", worst) + " on 1e4 triples (< 1e-6); Haar fixture " +
                                       (fixture ? "exact" : "wrong")};
}

// 6: metric oracles and the published column's self-consistency.
Outcome metric_oracles() {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto ref = test::random_map(24 + s, 30 - s, 10 + s, 1450.0, 1650.0);
    auto tst = test::random_map(24 + s, 30 - s, 40 + s, 1450.0, 1650.0);
    const double range = dynamic_range(ref);
    const double r0 = test::loop_rmse(ref, tst);
    worst = std::max(worst, std::abs(rmse(ref, tst) - r0));
    worst = std::max(worst, std::abs(psnr(ref, tst) - 20.0 * std::log10(range / r0)));
    worst = std::max(worst, std::abs(ssim(ref, tst) - test::loop_ssim(ref, tst, range)));
  }
  // (psnr dB, rmse m/s) at 500 MHz
  const double rows[4][2] = {{24.47, 14.8}, {30.16, 7.7}, {32.28, 6.0}, {30.06, 7.8}};
  double peaks[4], mean = 0.0;
  for (int i = 0; i < 4; ++i) mean += (peaks[i] = implied_peak(rows[i][0], rows[i][1])) / 4.0;
  double spread = 0.0;
  for (double p : peaks) spread = std::max(spread, std::abs(p / mean - 1.0));
  return {worst < 1e-9 && spread <= 0.005, "oracle deviation " + fmt("%.3g", worst) + " (< 1e-9); implied peak spread " +
                                               fmt("%.3f", 100.0 * spread) + "% (<= 0.5%)"};
}

// 7: acquisition round trip and the delay fixture.
Outcome qam_roundtrip() {
  const auto ph = generate_phantom(16, 16, {}, 7);
  const auto acq = acquire_and_map(ph, {});
  const double err = rmse(ph.sos_map, acq.sos);
  double mean = 0.0;
  for (double v : ph.sos_map.values()) mean += v / double(ph.sos_map.size());
  const double fixture = sos_from_delays(0.0, 8e-9, 6e-6);  // dt exactly 8 ns
  return {err < 0.01 * mean && fixture == 1500.0, "RMSE " + fmt("%.4g", err) + " m/s = " + fmt("%.4f", 100.0 * err / mean) +
                                                     "% of mean (< 1%); d=6 um, dt=8 ns gives " + fmt("%.17g", fixture) +
                                                     " m/s (== 1500)"};
}

// 8: spiral mask coverage.
Outcome spiral_coverage() {
  const double cov = spiral_mask(64, 64, 0.25).coverage();
  return {std::abs(cov - 0.25) <= 0.02, "coverage " + fmt("%.4f", cov) + " (0.25 +- 0.02)"};
}

// 9: repeated seeded runs are bit-identical, serial or parallel.
Outcome determinism() {
  auto run = [](const std::string& name, Exec exec) {
    ExperimentConfig c;
    c.out = scratch(name);
    c.rows = c.cols = 32;
    c.n_train = 4;
    c.n_test = 2;
    c.seed = 11;
    c.unfolded.iterations = 2;
    c.unfolded.channels = 4;
    c.train.epochs = 3;
    c.train.learning_rate = 1e-3;
    c.amp.max_iters = 30;
    compare_methods(c, exec);
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& e : fs::recursive_directory_iterator(c.out)) {
      if (e.is_regular_file()) files.emplace_back(fs::relative(e.path(), c.out).string(), slurp(e.path()));
    }
    std::sort(files.begin(), files.end());
    return files;
  };
  const auto a = run("det_a", Exec::parallel), b = run("det_b", Exec::parallel), s = run("det_s", Exec::serial);
  // concurrent block reconstruction of a Gaussian-sampled map
  const auto truth = test::random_map(64, 64, 12, 1450.0, 1650.0);
  const auto problem = make_problem(truth, gaussian_matrix(64, 256, 13), 1.0, 14);
  AmpOptions opt;
  opt.onsager = true;
  opt.max_iters = 30;
  const auto p1 = amp_reconstruct_image(problem, DenoiserSpec::cauchy(3), opt, Exec::parallel);
  const auto p2 = amp_reconstruct_image(problem, DenoiserSpec::cauchy(3), opt, Exec::parallel);
  const auto p3 = amp_reconstruct_image(problem, DenoiserSpec::cauchy(3), opt, Exec::serial);
  const bool same = a == b && a == s && p1 == p2 && p1 == p3;
  return {same && a.size() >= 10, std::to_string(a.size()) + " artifacts (maps, checkpoints, CSVs) " +
                                      (same ? "bit-identical" : "DIFFER") + " across 3 runs and block reconstruction"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"unfolded identity", unfolded_identity}, {"AMP sparse recovery", amp_sparse},
      {"gradient correctness", gradients},      {"training ordering", training_ordering},
      {"denoiser oracles", denoisers},          {"metric oracles", metric_oracles},
      {"QAM round trip", qam_roundtrip},        {"spiral coverage", spiral_coverage},
      {"determinism", determinism}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d %s: %s (%.1f s) %s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first, secs,
                o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
