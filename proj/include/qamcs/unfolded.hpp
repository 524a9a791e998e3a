#pragma once

#include <array>
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

/// Per-iteration learned denoiser: conv2(relu(conv1(X))), 3x3 kernels, zero
/// padded "same" borders, no bias. conv1 maps 1 -> C channels, conv2 C -> 1;
/// both store C * 9 weights laid out [c][3][3].
struct LearnedDenoiser {
  std::size_t channels = 8;
  std::vector<double> conv1;
  std::vector<double> conv2;

  static LearnedDenoiser zeros(std::size_t channels);
};

std::vector<double> learned_denoiser_apply(std::span<const double> x, std::size_t rows,
                                           std::size_t cols, const LearnedDenoiser& theta,
                                           Exec exec = Exec::serial);

/// Residual 3x3 correction X + gain * (kernel * X) on the full image.
struct DeblockParams {
  std::array<double, 9> kernel{};
  double gain = 1.0;
};

ParametricMap deblock(const ParametricMap& map, const DeblockParams& params, Exec exec = Exec::serial);

struct UnfoldedModel {
  std::size_t iterations = 6;  // K
  std::size_t block_size = 16;
  MeasurementMatrix a;
  bool trainable_a = false;
  std::vector<LearnedDenoiser> theta;  // one per iteration
  std::vector<DeblockParams> deblockers;  // empty, or one per iteration

  bool has_deblock() const noexcept { return !deblockers.empty(); }
  std::size_t channels() const noexcept { return theta.empty() ? 0 : theta.front().channels; }

  /// Throws qamcs::Error when the fields disagree with each other.
  void validate() const;

  bool operator==(const UnfoldedModel&) const;
};

struct ModelConfig {
  std::size_t iterations = 6;
  std::size_t block_size = 16;
  double ratio = 0.25;
  std::size_t channels = 8;
  bool trainable_a = false;
  bool deblock = false;
  std::uint64_t seed = 0;
};

/// Gaussian A with M = round(ratio * B^2) orthonormalised rows; conv1 He-scaled, conv2 small,
/// deblock kernels zero with unit gain. Deterministic in `seed`.
UnfoldedModel make_unfolded_model(const ModelConfig& config);

/// Flat parameter vector in checkpoint order: A row-major, then conv1 and
/// conv2 of each iteration, then the 9 deblock taps and the gain of each
/// iteration.
std::size_t parameter_count(const UnfoldedModel& model);
std::vector<double> get_parameters(const UnfoldedModel& model);
void set_parameters(UnfoldedModel& model, std::span<const double> params);
/// 1 for every parameter training may move; A is 0 unless trainable.
std::vector<std::uint8_t> trainable_mask(const UnfoldedModel& model);

/// Replaces the learned denoiser of iteration k (1-based) on block b.
using DenoiserOverride =
    std::function<std::vector<double>(std::size_t k, std::size_t block, std::span<const double> x)>;

struct UnfoldedOptions {
  Exec exec = Exec::parallel;
  DenoiserOverride denoiser;
  /// Called after iteration k with the re-partitioned blocks.
  std::function<void(std::size_t k, std::span<const std::vector<double>> blocks)> observer;
};

/// x^0 = A^T y per block, then K iterations of
///   x^k = A^T (y - A x^{k-1}) + x^{k-1} - (A^T A - I) vec(N_k(X^{k-1}))
/// with reassembly, optional deblocking and re-partitioning after each one.
/// Throws DivergenceError on a non-finite iterate.
ParametricMap unfolded_forward(std::span<const std::vector<double>> y_blocks, const BlockGrid& grid,
                               const UnfoldedModel& model, const UnfoldedOptions& options = {});

/// Same, for a problem sampled with the model's own matrix.
ParametricMap unfolded_forward(const CsProblem& problem, const UnfoldedModel& model,
                               const UnfoldedOptions& options = {});

/// Affine map between physical units and the [0, 1] range the model works in.
struct ValueRange {
  double lo = 1400.0;
  double hi = 1700.0;
};

ParametricMap normalize(const ParametricMap& map, ValueRange range);
ParametricMap denormalize(const ParametricMap& map, ValueRange range, std::string unit = "m/s");

// ---- training ----

enum class LossKind { mse };

struct TrainConfig {
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::mse;
  /// Stop after this many optimizer steps; 0 means run every epoch.
  std::size_t max_steps = 0;
  Exec exec = Exec::parallel;

  void validate() const;
};

struct LossRecord {
  std::size_t epoch = 0;  // from 1
  std::size_t step = 0;   // global, from 1
  double loss = 0.0;      // mean over the batch, before the update
};

struct TrainResult {
  UnfoldedModel model;
  std::vector<LossRecord> curve;
};

/// Mean squared error of the reconstruction of one ground-truth map, sampled
/// noiselessly with the model's A.
double sample_loss(const UnfoldedModel& model, const ParametricMap& truth);

/// Gradient of sample_loss with respect to get_parameters(model), by
/// reverse-mode accumulation. When A is trainable both its sampling and its
/// reconstruction occurrences contribute.
std::vector<double> sample_gradient(const UnfoldedModel& model, const ParametricMap& truth,
                                    double* loss = nullptr);

/// Adam (beta1 0.9, beta2 0.999, eps 1e-8) on the mean batch loss. Each epoch
/// visits the dataset in a seeded shuffle, ceil(n / batch) batches.
/// Throws TrainingError on a non-finite loss.
TrainResult train_model(UnfoldedModel model, std::span<const ParametricMap> dataset,
                        const TrainConfig& config);

/// Mean loss of each epoch in order.
std::vector<double> epoch_means(std::span<const LossRecord> curve);

void export_loss_curve_csv(std::span<const LossRecord> curve, const std::filesystem::path& path);

struct GradientCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  /// Per parameter; 0 for excluded entries.
  std::vector<double> rel_errors;
};

/// Compares `analytic` with central differences (loss(p + eps) - loss(p - eps)) / 2 eps
/// for every parameter with mask != 0. Relative error is
/// |a - f| / max(|a|, |f|, floor).
GradientCheckResult gradient_check(std::span<const double> params,
                                   const std::function<double(std::span<const double>)>& loss,
                                   std::span<const double> analytic, std::span<const std::uint8_t> mask,
                                   double eps, double floor = 1e-8);

GradientCheckResult gradient_check(const UnfoldedModel& model, const ParametricMap& sample, double eps);

// ---- checkpoint ----

// QAMU container, little-endian:
//   magic "QAMU", u32 version, u32 K, u32 B, u32 C, u32 M, u32 flags
//   (bit 0 trainable A, bit 1 deblock), then get_parameters() as f64.
inline constexpr std::uint32_t kQamuVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const UnfoldedModel& model);
UnfoldedModel decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const UnfoldedModel& model, const std::filesystem::path& path);
UnfoldedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace qamcs
