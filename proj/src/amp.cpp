#include "qamcs/amp.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <random>

#include "qamcs/error.hpp"
#include "qamcs/io.hpp"
#include "qamcs/wavelet.hpp"
#include "rng.hpp"

namespace qamcs {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// One-probe Monte Carlo estimate of div T at u.
double probe_divergence(const DenoiserSpec& spec, std::span<const double> u,
                        std::span<const double> tu, std::size_t rows, std::size_t cols,
                        double sigma_hat, std::uint64_t seed, std::size_t k) {
  double u_inf = 0.0;
  for (double v : u) u_inf = std::max(u_inf, std::abs(v));
  const double eps = u_inf > 0.0 ? 1e-4 * u_inf : 1e-4;
  auto gen = detail::make_engine(seed, k);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> g(u.size()), shifted(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    g[i] = dist(gen);
    shifted[i] = u[i] + eps * g[i];
  }
  const auto t_shifted = apply_denoiser(spec, shifted, rows, cols, sigma_hat);
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += (t_shifted[i] - tu[i]) * g[i];
  return acc / eps;
}

}  // namespace

double estimate_noise_std(std::span<const double> z, std::size_t m) {
  if (m == 0) throw Error("estimate_noise_std needs M >= 1");
  return norm2(z) / std::sqrt(static_cast<double>(m));
}

std::vector<double> apply_denoiser(const DenoiserSpec& spec, std::span<const double> u,
                                   std::size_t rows, std::size_t cols, double sigma_hat) {
  if (!(spec.tau >= 0.0)) throw Error("denoiser scale tau must be >= 0");
  switch (spec.kind) {
    case DenoiserKind::soft_wavelet:
      return soft_threshold_denoise(u, rows, cols, spec.tau * sigma_hat, spec.levels);
    case DenoiserKind::cauchy_map:
      return cauchy_wavelet_denoise(u, rows, cols, spec.tau * sigma_hat, spec.levels);
    case DenoiserKind::oracle:
      if (spec.reference.size() != u.size()) throw Error("oracle reference has the wrong length");
      return spec.reference;
  }
  throw Error("unknown denoiser");
}

AmpResult amp_reconstruct(const LinearOperator& a, std::span<const double> y, std::size_t rows,
                          std::size_t cols, const DenoiserSpec& denoiser, const AmpOptions& options) {
  const std::size_t m = a.rows(), n = a.cols();
  if (y.size() != m) throw Error("measurement length does not match the operator");
  if (rows * cols != n) throw Error("image shape does not match the operator");
  if (options.max_iters < 1) throw Error("max_iters must be >= 1");

  AmpResult result;
  AmpState st;
  st.x.assign(n, 0.0);
  st.z.assign(y.begin(), y.end());  // z^0 = y - A x^0
  const double y_norm = norm2(y);
  if (y_norm == 0.0) {
    result.x = st.x;
    result.trace.push_back(0.0);
    result.iterations = 1;
    return result;
  }

  std::vector<double> u(n), ax(m), z_next(m);
  for (std::size_t k = 1; k <= options.max_iters; ++k) {
    st.sigma_hat = estimate_noise_std(st.z, m);
    if (!std::isfinite(st.sigma_hat)) throw DivergenceError("residual norm overflowed", k);
    a.apply_transpose(st.z, u);
    for (std::size_t i = 0; i < n; ++i) u[i] += st.x[i];

    auto x_next = apply_denoiser(denoiser, u, rows, cols, st.sigma_hat);
    double onsager_coeff = 0.0;
    if (options.onsager) {
      const double div = probe_divergence(denoiser, u, x_next, rows, cols, st.sigma_hat,
                                          options.probe_seed, k);
      onsager_coeff = div / static_cast<double>(m);
    }

    a.apply(x_next, ax);
    for (std::size_t i = 0; i < m; ++i) z_next[i] = y[i] - ax[i] + onsager_coeff * st.z[i];

    if (!all_finite(x_next) || !all_finite(z_next)) {
      throw DivergenceError("non-finite AMP iterate", k);
    }
    st.x = std::move(x_next);
    st.z.swap(z_next);
    st.k = k;
    const double r = norm2(st.z);
    result.trace.push_back(r);
    result.iterations = k;
    if (options.observer) options.observer(st);
    if (r / y_norm < options.tol) break;
  }
  result.x = std::move(st.x);
  return result;
}

ParametricMap amp_reconstruct_image(const CsProblem& problem, const DenoiserSpec& denoiser,
                                    const AmpOptions& options, Exec exec,
                                    std::vector<std::vector<double>>* traces) {
  AmpOptions opts = options;
  opts.observer = nullptr;

  if (const auto* mask = std::get_if<BinaryMask>(&problem.op)) {
    SelectionOperator op(*mask);
    auto res = amp_reconstruct(op, problem.y.at(0), mask->rows, mask->cols, denoiser, opts);
    if (traces) *traces = {res.trace};
    return ParametricMap(mask->rows, mask->cols, std::move(res.x));
  }

  const auto& a = std::get<MeasurementMatrix>(problem.op);
  const std::size_t b = block_side_for(a);
  const auto& grid = problem.grid;
  if (grid.block_size != b || problem.y.size() != grid.block_count()) {
    throw Error("problem geometry does not match its operator");
  }
  const DenseOperator op(a);
  const auto count = static_cast<std::ptrdiff_t>(problem.y.size());
  std::vector<std::vector<double>> blocks(problem.y.size());
  std::vector<std::vector<double>> block_traces(problem.y.size());
  std::vector<std::exception_ptr> errors(problem.y.size());

#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      AmpOptions local = opts;
      local.probe_seed = opts.probe_seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(i + 1);
      auto res = amp_reconstruct(op, problem.y[static_cast<std::size_t>(i)], b, b, denoiser, local);
      blocks[static_cast<std::size_t>(i)] = std::move(res.x);
      block_traces[static_cast<std::size_t>(i)] = std::move(res.trace);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  if (traces) *traces = std::move(block_traces);
  return reassemble_vectors(blocks, grid);
}

void export_trace_csv(std::span<const double> trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrc::io_failure, "cannot open " + path.string() + " for writing");
  out << "iteration,residual_norm\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << (i + 1) << ',' << format_double(trace[i]) << '\n';
  if (!out) throw IoError(IoErrc::io_failure, "write failed for " + path.string());
}

}  // namespace qamcs
