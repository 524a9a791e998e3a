#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "qamcs/exec.hpp"
#include "qamcs/map.hpp"

namespace qamcs {

/// sqrt(mean((ref - test)^2)); throws on a shape mismatch.
double rmse(const ParametricMap& ref, const ParametricMap& test);

/// max(ref) - min(ref)
double dynamic_range(const ParametricMap& ref);

/// 20 log10(peak / rmse), +inf for identical maps. `peak` defaults to the
/// dynamic range of `ref`; a non-positive peak throws.
double psnr(const ParametricMap& ref, const ParametricMap& test, std::optional<double> peak = std::nullopt);

/// peak = rmse * 10^(psnr / 20), the dynamic range a (psnr, rmse) pair implies.
double implied_peak(double psnr_db, double rmse_value);

/// Mean local SSIM over every position where an 11x11 Gaussian window
/// (sigma 1.5) fits, K1 = 0.01, K2 = 0.03, dynamic range L = peak. The
/// default peak is the dynamic range of `ref`, or 1 for a constant `ref`.
/// Throws for maps smaller than 11x11.
double ssim(const ParametricMap& ref, const ParametricMap& test, std::optional<double> peak = std::nullopt,
            Exec exec = Exec::parallel);

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

struct MetricReport {
  double psnr_db = 0.0;
  double rmse = 0.0;
  double ssim = 0.0;
  double peak_used = 0.0;
};

MetricReport evaluate(const ParametricMap& ref, const ParametricMap& test, std::optional<double> peak = std::nullopt,
                      Exec exec = Exec::parallel);

struct MetricRow {
  std::string method;
  std::string freq_label;
  MetricReport report;
};

/// CSV with header `method,freq_label,psnr,rmse,ssim`; infinite PSNR is "inf".
void export_metric_rows(std::span<const MetricRow> rows, const std::filesystem::path& path);

}  // namespace qamcs
