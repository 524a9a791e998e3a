#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qamcs/config.hpp"
#include "qamcs/exec.hpp"
#include "qamcs/map.hpp"
#include "qamcs/metrics.hpp"
#include "qamcs/qamsim.hpp"
#include "qamcs/sampling.hpp"
#include "qamcs/unfolded.hpp"

namespace qamcs {

/// One line of report.csv: a method's mean score over the test phantoms.
struct ReportRow {
  std::string method;
  std::string sampling;
  double ratio = 0.0;
  double psnr_db = 0.0;
  double rmse = 0.0;
  double ssim = 0.0;
  std::optional<double> seconds;  // "na" when absent

  bool operator==(const ReportRow&) const = default;
};

/// CSV with header `method,sampling,ratio,psnr_db,rmse,ssim,seconds`.
/// Throws Error on empty rows, IoError when the file cannot be written.
void export_report(std::span<const ReportRow> rows, const std::filesystem::path& path);
std::vector<ReportRow> parse_report(const std::filesystem::path& path);

/// Score of one method on one test phantom; `error` is empty on success.
struct PhantomResult {
  std::string method;
  std::size_t phantom = 0;
  std::string sampling;
  double ratio = 0.0;
  MetricReport metrics;
  std::optional<double> seconds;
  std::string error;
};

/// Header `method,phantom,sampling,ratio,psnr_db,rmse,ssim,seconds,error`.
void export_phantom_results(std::span<const PhantomResult> rows, const std::filesystem::path& path);

struct CompareResult {
  std::vector<ReportRow> report;  // config method order
  std::vector<PhantomResult> per_phantom;
  std::vector<std::string> failed_methods;
};

/// Generates the phantoms, runs every configured method on the test set and
/// writes under config.out:
///   truth/phantom_NNN.qamp, maps/<method>/phantom_NNN.qamp,
///   models/<method>.qamu and <method>_loss.csv for the unfolded methods,
///   report.csv, per_phantom.csv, metrics.csv.
/// A failing method gets nan metrics and an error per phantom; the others
/// still run.
CompareResult compare_methods(const ExperimentConfig& config, Exec exec = Exec::parallel);

// ---- pipeline stages, shared with the command-line tool ----

/// Seed tags mixed with the experiment seed by derive_seed.
enum class SeedTag : std::uint64_t { phantom = 1, acquisition, sampling, noise, model, train, probe };

std::uint64_t stage_seed(const ExperimentConfig& config, SeedTag tag, std::uint64_t index = 0);

/// Phantom number `index`; training phantoms come first, test phantoms
/// follow at n_train.
Phantom make_phantom(const ExperimentConfig& config, std::size_t index);

/// The acquired SoS map (or the phantom itself when acquisition is off).
ParametricMap ground_truth(const ExperimentConfig& config, const Phantom& phantom, std::size_t index,
                           Exec exec = Exec::parallel);

/// Ground truth for phantoms first .. first + count - 1.
std::vector<ParametricMap> make_dataset(const ExperimentConfig& config, std::size_t first, std::size_t count,
                                        Exec exec = Exec::parallel);

/// Sampling kind a method uses after resolving "auto".
std::string sampling_kind(const ExperimentConfig& config, Method method);

/// Samples a map for an AMP method. Noise is seeded by `index`.
CsProblem sample_for_amp(const ExperimentConfig& config, Method method, const ParametricMap& truth,
                         std::size_t index);

ParametricMap reconstruct_amp(const ExperimentConfig& config, Method method, const CsProblem& problem,
                              Exec exec = Exec::parallel);

/// Untrained model of an unfolded method. Both variants share their seed.
UnfoldedModel initial_model(const ExperimentConfig& config, Method method);

/// Trains on physical-unit maps (normalised internally).
TrainResult train_method(const ExperimentConfig& config, Method method, std::span<const ParametricMap> train,
                         Exec exec = Exec::parallel);

/// Samples a physical-unit map with the model's A in normalised units.
CsProblem sample_for_model(const ExperimentConfig& config, const UnfoldedModel& model, const ParametricMap& truth,
                           std::size_t index);

/// Reconstruction in physical units.
ParametricMap reconstruct_unfolded(const ExperimentConfig& config, const UnfoldedModel& model,
                                   const CsProblem& problem, Exec exec = Exec::parallel);

/// Measurements on disk: a QAMP map with one row per block (a single row
/// for a mask) and label "y <rows>x<cols> <phys|norm>".
struct Measurements {
  std::vector<std::vector<double>> y;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool normalized = false;
};

void save_measurements(const CsProblem& problem, bool normalized, const std::filesystem::path& path);
Measurements load_measurements(const std::filesystem::path& path);

/// Operator file: a QAMP mask or a QAMP matrix.
void save_operator(const CsProblem& problem, const std::filesystem::path& path);
/// Rebuilds a problem from an operator file and measurements.
CsProblem load_problem(const std::filesystem::path& op_path, const Measurements& m);

}  // namespace qamcs
