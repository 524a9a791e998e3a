#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "qamcs/exec.hpp"
#include "qamcs/map.hpp"
#include "qamcs/sampling.hpp"

namespace qamcs {

enum class DenoiserKind { soft_wavelet, cauchy_map, oracle };

/// Denoiser T_k applied to the pseudo-data A^T z + x. The threshold (soft) or
/// noise level (Cauchy) is `tau * sigma_hat` at every iteration.
struct DenoiserSpec {
  DenoiserKind kind = DenoiserKind::soft_wavelet;
  double tau = 1.0;
  std::size_t levels = 1;
  /// Returned unchanged by the oracle denoiser; test use only.
  std::vector<double> reference;

  static DenoiserSpec soft(double tau, std::size_t levels) {
    return {DenoiserKind::soft_wavelet, tau, levels, {}};
  }
  static DenoiserSpec cauchy(std::size_t levels, double tau = 1.0) {
    return {DenoiserKind::cauchy_map, tau, levels, {}};
  }
  static DenoiserSpec oracle(std::vector<double> truth) {
    return {DenoiserKind::oracle, 0.0, 0, std::move(truth)};
  }
};

/// Applies the denoiser to `u` (an image of the given shape) at noise level sigma_hat.
std::vector<double> apply_denoiser(const DenoiserSpec& spec, std::span<const double> u,
                                   std::size_t rows, std::size_t cols, double sigma_hat);

struct AmpState {
  std::vector<double> x;  // x^k
  std::vector<double> z;  // residual computed from x^k
  double sigma_hat = 0.0;
  std::size_t k = 0;
};

struct AmpOptions {
  std::size_t max_iters = 100;
  /// Adds the Onsager term (1/M) z^{k-1} div T_k to the residual.
  bool onsager = false;
  /// Stop once ||z|| / ||y|| drops below this.
  double tol = 1e-6;
  /// Seed of the Monte Carlo divergence probe.
  std::uint64_t probe_seed = 0;
  /// Called after every iteration with the fresh state.
  std::function<void(const AmpState&)> observer;
};

struct AmpResult {
  std::vector<double> x;
  /// ||z^k||_2 after each iteration.
  std::vector<double> trace;
  std::size_t iterations = 0;
};

/// sigma_hat = ||z||_2 / sqrt(M)
double estimate_noise_std(std::span<const double> z, std::size_t m);

/// Iterates x^k = T_k(A^T z^{k-1} + x^{k-1}), z^k = y - A x^k from x^0 = 0.
/// `rows` x `cols` is the image shape the denoiser sees (rows * cols = N).
/// Throws DivergenceError on a non-finite iterate.
AmpResult amp_reconstruct(const LinearOperator& a, std::span<const double> y, std::size_t rows,
                          std::size_t cols, const DenoiserSpec& denoiser, const AmpOptions& options);

/// Reconstructs every block of a sampled image (or the whole image for a
/// mask) and reassembles the result. Blocks are independent; the parallel
/// and serial policies give bit-identical maps. `traces`, when given,
/// receives one residual trace per block.
ParametricMap amp_reconstruct_image(const CsProblem& problem, const DenoiserSpec& denoiser,
                                    const AmpOptions& options, Exec exec = Exec::parallel,
                                    std::vector<std::vector<double>>* traces = nullptr);

/// CSV with header `iteration,residual_norm`, iterations counted from 1.
void export_trace_csv(std::span<const double> trace, const std::filesystem::path& path);

}  // namespace qamcs
