#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "qamcs/amp.hpp"
#include "qamcs/error.hpp"
#include "test_util.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace qamcs;

namespace {

// Orthonormal n x n matrix by modified Gram-Schmidt on a Gaussian draw.
MeasurementMatrix random_orthonormal(std::size_t n, std::uint64_t seed) {
  auto g = gaussian_matrix(n, n, seed);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      double dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += g(i, j) * g(k, j);
      for (std::size_t j = 0; j < n; ++j) g(i, j) -= dot * g(k, j);
    }
    double nrm = 0;
    for (std::size_t j = 0; j < n; ++j) nrm += g(i, j) * g(i, j);
    nrm = std::sqrt(nrm);
    for (std::size_t j = 0; j < n; ++j) g(i, j) /= nrm;
  }
  return g;
}

}  // namespace

TEST_CASE("estimate_noise_std") {
  CHECK(estimate_noise_std(std::vector<double>{0, 0, 0}, 3) == 0.0);
  CHECK(estimate_noise_std(std::vector<double>{3, 4}, 2) == doctest::Approx(5.0 / std::sqrt(2.0)).epsilon(1e-15));
  const std::vector<double> z{1.5, -2.0, 0.25};
  const std::vector<double> z3{-4.5, 6.0, -0.75};
  CHECK(estimate_noise_std(z3, 3) == doctest::Approx(3.0 * estimate_noise_std(z, 3)).epsilon(1e-15));
  CHECK_THROWS_AS(estimate_noise_std(z, 0), Error);
}

TEST_CASE("identity operator with lambda = 0 returns y after one step") {
  auto a = identity_rows(16, 16);
  auto y = test::random_vector(16, 3);
  AmpOptions opt;
  opt.max_iters = 1;
  auto res = amp_reconstruct(DenseOperator(a), y, 4, 4, DenoiserSpec::soft(0.0, 0), opt);
  CHECK(res.x == y);
  auto res2 = amp_reconstruct(DenseOperator(a), y, 4, 4, DenoiserSpec::soft(0.0, 2), opt);
  CHECK(test::max_abs_diff(res2.x, y) < 1e-12);
}

TEST_CASE("oracle denoiser reaches the fixed point in one step") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto a = gaussian_matrix(20, 64, seed);
    auto truth = test::random_vector(64, 100 + seed);
    auto y = apply_sampling(truth, a);
    AmpOptions opt;
    opt.max_iters = 10;
    auto res = amp_reconstruct(DenseOperator(a), y, 8, 8, DenoiserSpec::oracle(truth), opt);
    CHECK(res.iterations == 1);
    CHECK(res.trace.at(0) == 0.0);
    CHECK(res.x == truth);
  }
}

TEST_CASE("1-sparse recovery, N=64, M=32, seed 0") {
  auto a = gaussian_matrix(32, 64, 0);
  std::vector<double> truth(64, 0.0);
  truth[10] = 1.0;
  auto y = apply_sampling(truth, a);

  // oracle: least squares restricted to the true support {10}
  double num = 0, den = 0;
  for (std::size_t i = 0; i < 32; ++i) {
    num += a(i, 10) * y[i];
    den += a(i, 10) * a(i, 10);
  }
  std::vector<double> ls(64, 0.0);
  ls[10] = num / den;

  AmpOptions opt;
  opt.max_iters = 100;
  opt.onsager = true;
  auto res = amp_reconstruct(DenseOperator(a), y, 8, 8, DenoiserSpec::soft(1.0, 0), opt);
  CHECK(res.iterations <= 100);
  CHECK(test::max_abs_diff(res.x, ls) < 1e-3);
}

TEST_CASE("orthonormal square A with lambda = 0 converges to A^T y in one iteration") {
  auto a = random_orthonormal(16, 9);
  auto y = test::random_vector(16, 10);
  std::vector<double> aty(16);
  a.apply_transpose(y, aty);
  AmpOptions opt;
  opt.max_iters = 20;
  opt.tol = 1e-12;
  auto res = amp_reconstruct(DenseOperator(a), y, 4, 4, DenoiserSpec::soft(0.0, 0), opt);
  CHECK(test::max_abs_diff(res.x, aty) < 1e-12);
  CHECK(res.trace.front() < 1e-12);
}

TEST_CASE("residual trace is non-increasing for orthonormal square A") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto a = random_orthonormal(64, 20 + seed);
    auto truth = test::random_vector(64, 40 + seed);
    auto y = apply_sampling(truth, a);
    AmpOptions opt;
    opt.max_iters = 30;
    opt.tol = 0;
    auto res = amp_reconstruct(DenseOperator(a), y, 8, 8, DenoiserSpec::soft(0.5, 2), opt);
    for (std::size_t k = 1; k < res.trace.size(); ++k) CHECK(res.trace[k] <= res.trace[k - 1] * (1 + 1e-12));
  }
}

TEST_CASE("non-finite iterates raise a divergence error with the iteration index") {
  MeasurementMatrix a = identity_rows(4, 4);
  for (auto& e : a.entries) e *= 100.0;
  const std::vector<double> y{1, 2, 3, 4};
  AmpOptions opt;
  opt.max_iters = 1000;
  try {
    amp_reconstruct(DenseOperator(a), y, 2, 2, DenoiserSpec::soft(0.0, 0), opt);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.iteration() > 1);
    CHECK(e.iteration() < 1000);
  }
}

TEST_CASE("argument validation") {
  auto a = gaussian_matrix(4, 16, 1);
  AmpOptions opt;
  CHECK_THROWS_AS(amp_reconstruct(DenseOperator(a), std::vector<double>(3), 4, 4, DenoiserSpec::soft(1, 0), opt), Error);
  CHECK_THROWS_AS(amp_reconstruct(DenseOperator(a), std::vector<double>(4), 2, 4, DenoiserSpec::soft(1, 0), opt), Error);
  opt.max_iters = 0;
  CHECK_THROWS_AS(amp_reconstruct(DenseOperator(a), std::vector<double>(4), 4, 4, DenoiserSpec::soft(1, 0), opt), Error);
}

TEST_CASE("observer sees every state") {
  auto a = gaussian_matrix(16, 16, 2);
  auto y = test::random_vector(16, 2);
  AmpOptions opt;
  opt.max_iters = 5;
  opt.tol = 0;
  std::size_t calls = 0;
  opt.observer = [&](const AmpState& s) {
    ++calls;
    CHECK(s.k == calls);
    CHECK(s.sigma_hat >= 0.0);
    CHECK(s.x.size() == 16);
    CHECK(s.z.size() == 16);
  };
  amp_reconstruct(DenseOperator(a), y, 4, 4, DenoiserSpec::cauchy(1), opt);
  CHECK(calls == 5);
}

TEST_CASE("block reconstruction is identical under serial and parallel execution") {
#ifdef _OPENMP
  omp_set_num_threads(4);
#endif
  auto img = test::random_map(40, 24, 5, 1400, 1600);
  auto problem = make_problem(img, gaussian_matrix(16, 64, 3), 0.5, 8);
  AmpOptions opt;
  opt.max_iters = 30;
  opt.onsager = true;
  for (auto den : {DenoiserSpec::soft(1.0, 2), DenoiserSpec::cauchy(2)}) {
    std::vector<std::vector<double>> t1, t2;
    auto serial = amp_reconstruct_image(problem, den, opt, Exec::serial, &t1);
    auto parallel = amp_reconstruct_image(problem, den, opt, Exec::parallel, &t2);
    CHECK(serial == parallel);
    CHECK(t1 == t2);
    CHECK(t1.size() == problem.y.size());
  }
}

TEST_CASE("mask problems reconstruct the full image; full coverage is exact") {
  auto img = test::random_map(16, 16, 6, 1450, 1550);
  auto problem = make_problem(img, spiral_mask(16, 16, 1.0));
  AmpOptions opt;
  auto out = amp_reconstruct_image(problem, DenoiserSpec::soft(0.0, 2), opt);
  CHECK(test::max_abs_diff(std::vector<double>(out.values().begin(), out.values().end()),
                           std::vector<double>(img.values().begin(), img.values().end())) < 1e-9);
}

TEST_CASE("trace export") {
  auto path = std::filesystem::temp_directory_path() / "qamcs_trace.csv";
  export_trace_csv(std::vector<double>{2.5, 1.0}, path);
  std::ifstream in(path);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all == "iteration,residual_norm\n1,2.5\n2,1\n");
}
