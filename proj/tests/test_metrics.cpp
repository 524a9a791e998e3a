#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "qamcs/error.hpp"
#include "qamcs/metrics.hpp"
#include "metric_oracle.hpp"
#include "test_util.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace qamcs;
using test::loop_rmse;
using test::loop_ssim;

namespace {

ParametricMap shifted(const ParametricMap& m, double d) {
  ParametricMap out = m;
  for (auto& v : out.values()) v += d;
  return out;
}

}  // namespace

TEST_CASE("rmse") {
  auto a = test::random_map(13, 17, 1, 1450, 1600);
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(a, shifted(a, 1.0)) == doctest::Approx(1.0).epsilon(1e-12));
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto x = test::random_map(20, 9, 10 + s, 1400, 1700);
    auto y = test::random_map(20, 9, 30 + s, 1400, 1700);
    CHECK(std::abs(rmse(x, y) - loop_rmse(x, y)) < 1e-12 * loop_rmse(x, y));
  }
  CHECK_THROWS_AS(rmse(a, ParametricMap(13, 16)), Error);
}

TEST_CASE("psnr") {
  ParametricMap a(4, 4, std::vector<double>(16, 10.0));
  CHECK(psnr(a, shifted(a, 1.0), 255.0) == doctest::Approx(48.1308036086791).epsilon(1e-12));
  auto r = test::random_map(16, 16, 3, 1450, 1600);
  CHECK(psnr(r, r) == std::numeric_limits<double>::infinity());
  CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(psnr(r, shifted(r, 1.0), 0.0), Error);
  CHECK_THROWS_AS(psnr(r, shifted(r, 1.0), -3.0), Error);
  CHECK_THROWS_AS(psnr(a, shifted(a, 1.0)), Error);  // constant reference, no default peak

  for (std::uint64_t s = 0; s < 10; ++s) {
    auto x = test::random_map(12, 12, 40 + s, 1400, 1700);
    auto y = test::random_map(12, 12, 60 + s, 1400, 1700);
    double lo = x(0, 0), hi = x(0, 0);
    for (double v : x.values()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double expect = 20.0 * std::log10((hi - lo) / loop_rmse(x, y));
    CHECK(std::abs(psnr(x, y) - expect) < 1e-9);
    CHECK(psnr(x, y) == 20.0 * std::log10(dynamic_range(x) / rmse(x, y)));
  }
}

TEST_CASE("table fixture: implied peaks of the 500 MHz column agree") {
  // (psnr dB, rmse m/s): Cauchy AMP, AMP-Net, AMP-Net-BM, Q-AMP-Net
  const double rows[4][2] = {{24.47, 14.8}, {30.16, 7.7}, {32.28, 6.0}, {30.06, 7.8}};
  const double expect[4] = {247.6, 248.0, 246.6, 248.4};
  double mean = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double p = implied_peak(rows[i][0], rows[i][1]);
    CHECK(std::abs(p - expect[i]) < 0.1);
    mean += p / 4.0;
  }
  for (const auto& r : rows) CHECK(std::abs(implied_peak(r[0], r[1]) / mean - 1.0) <= 0.005);
}

TEST_CASE("ssim matches the sliding-window oracle") {
#ifdef _OPENMP
  omp_set_num_threads(4);
#endif
  for (std::uint64_t s = 0; s < 6; ++s) {
    const std::size_t rows = 11 + 3 * s, cols = 11 + 5 * s;
    auto x = test::random_map(rows, cols, 80 + s, 1450, 1600);
    auto y = test::random_map(rows, cols, 90 + s, 1450, 1600);
    for (std::size_t i = 0; i < x.size(); ++i) y.values()[i] = 0.6 * x.values()[i] + 0.4 * y.values()[i];
    const double expect = loop_ssim(x, y, dynamic_range(x));
    CHECK(std::abs(ssim(x, y) - expect) < 1e-9);
    CHECK(std::abs(ssim(x, y, 300.0) - loop_ssim(x, y, 300.0)) < 1e-9);
    CHECK(ssim(x, y, std::nullopt, Exec::serial) == ssim(x, y, std::nullopt, Exec::parallel));
  }
}

TEST_CASE("ssim properties") {
  auto x = test::random_map(24, 30, 5, 1450, 1600);
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  ParametricMap flat(12, 12, std::vector<double>(144, 1500.0));
  CHECK(ssim(flat, flat) == doctest::Approx(1.0).epsilon(1e-12));

  // zero mean inside every window: modulated checkerboards and stripes
  for (int kind = 0; kind < 3; ++kind) {
    ParametricMap z(20, 24);
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = 0; j < 24; ++j) {
        const double sign = kind == 2 ? ((j % 2) ? -1.0 : 1.0) : (((i + j) % 2) ? -1.0 : 1.0);
        z(i, j) = sign * (kind == 0 ? 1.0 : 1.0 + 0.3 * std::cos(0.2 * double(i) + 0.1 * double(j)));
      }
    ParametricMap neg = z;
    for (auto& v : neg.values()) v = -v;
    CHECK(ssim(z, neg) <= 0.0);
  }

  CHECK_THROWS_AS(ssim(ParametricMap(10, 20), ParametricMap(10, 20)), Error);
  CHECK_THROWS_AS(ssim(x, ParametricMap(24, 29)), Error);
  CHECK_THROWS_AS(ssim(x, x, 0.0), Error);
}

TEST_CASE("rmse and psnr are unchanged by a common translation") {
  auto x = test::random_map(16, 16, 7, 1450, 1600);
  auto y = test::random_map(16, 16, 8, 1450, 1600);
  for (double d : {-100.0, 3.5, 250.0}) {
    CHECK(rmse(shifted(x, d), shifted(y, d)) == doctest::Approx(rmse(x, y)).epsilon(1e-10));
    CHECK(psnr(shifted(x, d), shifted(y, d), 200.0) == doctest::Approx(psnr(x, y, 200.0)).epsilon(1e-10));
  }
}

TEST_CASE("evaluate and CSV rows") {
  auto x = test::random_map(16, 16, 9, 1450, 1600);
  auto y = shifted(x, 2.0);
  auto rep = evaluate(x, y);
  CHECK(rep.rmse == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(rep.peak_used == dynamic_range(x));
  CHECK(rep.psnr_db == 20.0 * std::log10(rep.peak_used / rep.rmse));

  std::vector<MetricRow> rows{{"amp-soft", "500MHz", rep}, {"oracle", "500MHz", evaluate(x, x)}};
  auto path = std::filesystem::temp_directory_path() / "qamcs_metrics.csv";
  export_metric_rows(rows, path);
  std::ifstream in(path);
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  CHECK(header == "method,freq_label,psnr,rmse,ssim");
  CHECK(first.rfind("amp-soft,500MHz,", 0) == 0);
  CHECK(second == "oracle,500MHz,inf,0,1");
}
