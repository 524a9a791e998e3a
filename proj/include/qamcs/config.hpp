#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "qamcs/error.hpp"
#include "qamcs/qamsim.hpp"
#include "qamcs/unfolded.hpp"

namespace qamcs {

/// Malformed, unknown or out-of-range configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Method { amp_soft, amp_cauchy, unfolded, unfolded_trained_a };

std::string_view to_string(Method m);
/// Throws ConfigError for an unknown name.
Method method_from_string(std::string_view name);

struct SamplingSpec {
  /// auto: spiral mask for the AMP baselines, block Gaussian for the unfolded
  /// models. Otherwise one of gaussian, spiral, random, raster, identity and
  /// applied to the AMP methods (the unfolded models always use their own A).
  std::string kind = "auto";
  double ratio = 0.25;
  std::size_t block = 16;
  /// Mixed with the experiment seed for random masks and matrices.
  std::uint64_t seed = 0;
  double noise_std = 0.0;  // measurement noise, map units
};

struct AmpSpec {
  double tau = 1.0;         // soft threshold = tau * sigma_hat
  double cauchy_tau = 1.0;  // Cauchy noise level = cauchy_tau * sigma_hat
  std::size_t levels = 3;
  std::size_t max_iters = 100;
  double tol = 1e-6;
  /// auto: on for Gaussian matrices, off for masks.
  std::string onsager = "auto";
};

struct UnfoldedSpec {
  std::size_t iterations = 6;
  std::size_t channels = 8;
  /// Deblocker on the trainable-A model.
  bool deblock = true;
  ValueRange range{};
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  std::vector<Method> methods{Method::amp_soft, Method::amp_cauchy, Method::unfolded, Method::unfolded_trained_a};
  std::size_t n_train = 24;
  std::size_t n_test = 8;
  std::size_t rows = 64;
  std::size_t cols = 64;
  /// Ground truth is the acquired (estimated) map when true, the phantom otherwise.
  bool acquire = true;
  /// Wall-clock seconds in reports; off keeps reports byte-reproducible.
  bool timing = false;
  std::string freq_label = "500MHz";

  PhantomSpec phantom;
  AcquisitionConfig acquisition;
  SamplingSpec sampling;
  AmpSpec amp;
  UnfoldedSpec unfolded;
  TrainConfig train;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// Flat TOML-style text: [section] headers, `key = value` lines, numbers,
/// booleans, quoted strings, string arrays, # comments. Unknown sections or
/// keys are errors. Missing keys keep their defaults.
ExperimentConfig parse_experiment_config(std::string_view text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Canonical text of a configuration; parses back to the same values.
std::string format_experiment_config(const ExperimentConfig& config);

/// Independent seed for one consumer of the experiment seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0);

}  // namespace qamcs
