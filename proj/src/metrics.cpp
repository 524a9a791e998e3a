#include "qamcs/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <vector>

#include "qamcs/error.hpp"
#include "qamcs/io.hpp"

namespace qamcs {

namespace {

void check_shapes(const ParametricMap& a, const ParametricMap& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error("map shapes differ: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  if (a.empty()) throw Error("empty input");
}

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double s = 0.0;
  const double c = (kSsimWindow - 1) / 2.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    s += w[i];
  }
  for (auto& v : w) v /= s;
  return w;
}

// Valid-mode separable Gaussian filter: rows x cols -> (rows-10) x (cols-10).
std::vector<double> filter_valid(const std::vector<double>& in, std::size_t rows, std::size_t cols,
                                 const std::array<double, kSsimWindow>& w, Exec exec) {
  const std::size_t orows = rows - kSsimWindow + 1, ocols = cols - kSsimWindow + 1;
  std::vector<double> horiz(rows * ocols), out(orows * ocols);
  const auto nr = static_cast<std::ptrdiff_t>(rows), no = static_cast<std::ptrdiff_t>(orows);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::ptrdiff_t i = 0; i < nr; ++i) {
    const double* src = in.data() + static_cast<std::size_t>(i) * cols;
    double* dst = horiz.data() + static_cast<std::size_t>(i) * ocols;
    for (std::size_t j = 0; j < ocols; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < kSsimWindow; ++t) acc += w[t] * src[j + t];
      dst[j] = acc;
    }
  }
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::ptrdiff_t i = 0; i < no; ++i) {
    double* dst = out.data() + static_cast<std::size_t>(i) * ocols;
    for (std::size_t j = 0; j < ocols; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < kSsimWindow; ++t) acc += w[t] * horiz[(static_cast<std::size_t>(i) + t) * ocols + j];
      dst[j] = acc;
    }
  }
  return out;
}

}  // namespace

double rmse(const ParametricMap& ref, const ParametricMap& test) {
  check_shapes(ref, test);
  auto a = ref.values();
  auto b = test.values();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

double dynamic_range(const ParametricMap& ref) {
  if (ref.empty()) throw Error("empty input");
  const auto [lo, hi] = std::minmax_element(ref.values().begin(), ref.values().end());
  return *hi - *lo;
}

double psnr(const ParametricMap& ref, const ParametricMap& test, std::optional<double> peak) {
  const double e = rmse(ref, test);
  if (peak && !(*peak > 0.0)) throw Error("psnr peak must be > 0");
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  const double p = peak ? *peak : dynamic_range(ref);
  if (!(p > 0.0)) throw Error("psnr peak must be > 0 (reference map is constant)");
  return 20.0 * std::log10(p / e);
}

double implied_peak(double psnr_db, double rmse_value) { return rmse_value * std::pow(10.0, psnr_db / 20.0); }

double ssim(const ParametricMap& ref, const ParametricMap& test, std::optional<double> peak, Exec exec) {
  check_shapes(ref, test);
  const std::size_t rows = ref.rows(), cols = ref.cols();
  if (rows < kSsimWindow || cols < kSsimWindow) throw Error("ssim needs maps of at least 11x11");
  if (peak && !(*peak > 0.0)) throw Error("ssim dynamic range must be > 0");
  double range = peak ? *peak : dynamic_range(ref);
  if (!(range > 0.0)) range = 1.0;
  const double c1 = (kSsimK1 * range) * (kSsimK1 * range), c2 = (kSsimK2 * range) * (kSsimK2 * range);

  // second moments about a common offset to limit cancellation
  auto a = ref.values();
  auto b = test.values();
  double offset = 0.0;
  for (double v : a) offset += v;
  offset /= static_cast<double>(a.size());
  const std::size_t n = a.size();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = a[i] - offset;
    y[i] = b[i] - offset;
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto w = gaussian_window();
  const auto mx = filter_valid(x, rows, cols, w, exec), my = filter_valid(y, rows, cols, w, exec);
  const auto sxx = filter_valid(xx, rows, cols, w, exec), syy = filter_valid(yy, rows, cols, w, exec);
  const auto sxy = filter_valid(xy, rows, cols, w, exec);

  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double ux = mx[i] + offset, uy = my[i] + offset;
    const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
    total += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

MetricReport evaluate(const ParametricMap& ref, const ParametricMap& test, std::optional<double> peak, Exec exec) {
  MetricReport r;
  r.rmse = rmse(ref, test);
  r.peak_used = peak ? *peak : dynamic_range(ref);
  r.psnr_db = psnr(ref, test, peak);
  r.ssim = ssim(ref, test, peak, exec);
  return r;
}

void export_metric_rows(std::span<const MetricRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrc::io_failure, "cannot open " + path.string() + " for writing");
  out << "method,freq_label,psnr,rmse,ssim\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.freq_label << ',' << format_double(r.report.psnr_db) << ','
        << format_double(r.report.rmse) << ',' << format_double(r.report.ssim) << '\n';
  if (!out) throw IoError(IoErrc::io_failure, "write failed for " + path.string());
}

}  // namespace qamcs
