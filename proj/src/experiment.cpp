#include "qamcs/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "qamcs/amp.hpp"
#include "qamcs/io.hpp"
#include "qamcs/wavelet.hpp"

namespace qamcs {

namespace fs = std::filesystem;

namespace {

constexpr const char* kReportHeader = "method,sampling,ratio,psnr_db,rmse,ssim,seconds";
constexpr const char* kPhantomHeader = "method,phantom,sampling,ratio,psnr_db,rmse,ssim,seconds,error";

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

bool is_unfolded(Method m) { return m == Method::unfolded || m == Method::unfolded_trained_a; }

std::string seconds_field(const std::optional<double>& s) { return s ? format_double(*s) : "na"; }

// Keeps one CSV field per value.
std::string sanitize(std::string s) {
  for (char& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ch == ',' ? ';' : ' ';
  }
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string phantom_file(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "phantom_%03zu.qamp", i);
  return buf;
}

std::size_t amp_levels(const ExperimentConfig& config, std::size_t rows, std::size_t cols) {
  return max_haar_levels(rows, cols, config.amp.levels);
}

std::size_t measurement_rows(double ratio, std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n))));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(IoErrc::io_failure, "cannot create directory " + dir.string() + ": " + ec.message());
}

}  // namespace

// ---- reports ----

void export_report(std::span<const ReportRow> rows, const fs::path& path) {
  if (rows.empty()) throw Error("export_report: no rows");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrc::io_failure, "cannot open " + path.string() + " for writing");
  out << kReportHeader << '\n';
  for (const auto& r : rows) {
    out << sanitize(r.method) << ',' << sanitize(r.sampling) << ',' << format_double(r.ratio) << ','
        << format_double(r.psnr_db) << ',' << format_double(r.rmse) << ',' << format_double(r.ssim) << ','
        << seconds_field(r.seconds) << '\n';
  }
  if (!out) throw IoError(IoErrc::io_failure, "write failed for " + path.string());
}

std::vector<ReportRow> parse_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrc::io_failure, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader) {
    throw IoError(IoErrc::invalid_payload, path.string() + ": unexpected report header");
  }
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 7) throw IoError(IoErrc::invalid_payload, "report row with " + std::to_string(f.size()) + " fields");
    ReportRow r;
    r.method = f[0];
    r.sampling = f[1];
    r.ratio = parse_double(f[2]);
    r.psnr_db = parse_double(f[3]);
    r.rmse = parse_double(f[4]);
    r.ssim = parse_double(f[5]);
    if (f[6] != "na") r.seconds = parse_double(f[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void export_phantom_results(std::span<const PhantomResult> rows, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrc::io_failure, "cannot open " + path.string() + " for writing");
  out << kPhantomHeader << '\n';
  for (const auto& r : rows) {
    out << sanitize(r.method) << ',' << r.phantom << ',' << sanitize(r.sampling) << ',' << format_double(r.ratio)
        << ',' << format_double(r.metrics.psnr_db) << ',' << format_double(r.metrics.rmse) << ','
        << format_double(r.metrics.ssim) << ',' << seconds_field(r.seconds) << ',' << sanitize(r.error) << '\n';
  }
  if (!out) throw IoError(IoErrc::io_failure, "write failed for " + path.string());
}

// ---- stages ----

std::uint64_t stage_seed(const ExperimentConfig& config, SeedTag tag, std::uint64_t index) {
  return derive_seed(config.seed, static_cast<std::uint64_t>(tag), index);
}

Phantom make_phantom(const ExperimentConfig& config, std::size_t index) {
  return generate_phantom(config.rows, config.cols, config.phantom, stage_seed(config, SeedTag::phantom, index));
}

ParametricMap ground_truth(const ExperimentConfig& config, const Phantom& phantom, std::size_t index, Exec exec) {
  if (!config.acquire) return phantom.sos_map;
  auto acq = config.acquisition;
  acq.seed = stage_seed(config, SeedTag::acquisition, index);
  return acquire_and_map(phantom, acq, false, exec).sos;
}

std::vector<ParametricMap> make_dataset(const ExperimentConfig& config, std::size_t first, std::size_t count,
                                        Exec exec) {
  std::vector<ParametricMap> out;
  out.reserve(count);
  for (std::size_t i = first; i < first + count; ++i) out.push_back(ground_truth(config, make_phantom(config, i), i, exec));
  return out;
}

std::string sampling_kind(const ExperimentConfig& config, Method method) {
  if (method == Method::unfolded) return "gaussian";
  if (method == Method::unfolded_trained_a) return "learned";
  return config.sampling.kind == "auto" ? "spiral" : config.sampling.kind;
}

CsProblem sample_for_amp(const ExperimentConfig& config, Method method, const ParametricMap& truth,
                         std::size_t index) {
  if (is_unfolded(method)) throw Error("sample_for_amp: not an AMP method");
  const auto kind = sampling_kind(config, method);
  const auto& s = config.sampling;
  const auto op_seed = derive_seed(config.seed, static_cast<std::uint64_t>(SeedTag::sampling), s.seed);
  const auto noise_seed = stage_seed(config, SeedTag::noise, index);
  const std::size_t n = s.block * s.block;
  if (kind == "gaussian") return make_problem(truth, gaussian_matrix(measurement_rows(s.ratio, n), n, op_seed), s.noise_std, noise_seed);
  if (kind == "identity") return make_problem(truth, identity_rows(measurement_rows(s.ratio, n), n), s.noise_std, noise_seed);
  BinaryMask mask;
  if (kind == "spiral") {
    mask = spiral_mask(truth.rows(), truth.cols(), s.ratio);
  } else if (kind == "random") {
    mask = random_mask(truth.rows(), truth.cols(), s.ratio, op_seed);
  } else if (kind == "raster") {
    mask = raster_mask(truth.rows(), truth.cols(), s.ratio);
  } else {
    throw ConfigError("unknown sampling kind '" + kind + "'");
  }
  return make_problem(truth, std::move(mask), s.noise_std, noise_seed);
}

ParametricMap reconstruct_amp(const ExperimentConfig& config, Method method, const CsProblem& problem, Exec exec) {
  std::size_t rows = problem.grid.source_rows, cols = problem.grid.source_cols;
  if (problem.is_matrix()) rows = cols = problem.grid.block_size;
  const auto levels = amp_levels(config, rows, cols);
  DenoiserSpec spec;
  if (method == Method::amp_soft) {
    spec = DenoiserSpec::soft(config.amp.tau, levels);
  } else if (method == Method::amp_cauchy) {
    spec = DenoiserSpec::cauchy(levels, config.amp.cauchy_tau);
  } else {
    throw Error("reconstruct_amp: not an AMP method");
  }
  AmpOptions opts;
  opts.max_iters = config.amp.max_iters;
  opts.tol = config.amp.tol;
  opts.probe_seed = stage_seed(config, SeedTag::probe);
  const bool gaussian = problem.is_matrix() && sampling_kind(config, method) == "gaussian";
  opts.onsager = config.amp.onsager == "on" || (config.amp.onsager == "auto" && gaussian);
  auto map = amp_reconstruct_image(problem, spec, opts, exec);
  map.set_unit("m/s");
  return map;
}

UnfoldedModel initial_model(const ExperimentConfig& config, Method method) {
  if (!is_unfolded(method)) throw Error("initial_model: not an unfolded method");
  ModelConfig mc;
  mc.iterations = config.unfolded.iterations;
  mc.block_size = config.sampling.block;
  mc.ratio = config.sampling.ratio;
  mc.channels = config.unfolded.channels;
  mc.trainable_a = method == Method::unfolded_trained_a;
  mc.deblock = mc.trainable_a && config.unfolded.deblock;
  mc.seed = stage_seed(config, SeedTag::model);
  return make_unfolded_model(mc);
}

TrainResult train_method(const ExperimentConfig& config, Method method, std::span<const ParametricMap> train,
                         Exec exec) {
  std::vector<ParametricMap> normed;
  normed.reserve(train.size());
  for (const auto& m : train) normed.push_back(normalize(m, config.unfolded.range));
  auto tc = config.train;
  tc.seed = stage_seed(config, SeedTag::train);
  tc.exec = exec;
  return train_model(initial_model(config, method), normed, tc);
}

CsProblem sample_for_model(const ExperimentConfig& config, const UnfoldedModel& model, const ParametricMap& truth,
                           std::size_t index) {
  const auto& r = config.unfolded.range;
  return make_problem(normalize(truth, r), model.a, config.sampling.noise_std / (r.hi - r.lo),
                      stage_seed(config, SeedTag::noise, index));
}

ParametricMap reconstruct_unfolded(const ExperimentConfig& config, const UnfoldedModel& model,
                                   const CsProblem& problem, Exec exec) {
  UnfoldedOptions opts;
  opts.exec = exec;
  return denormalize(unfolded_forward(problem, model, opts), config.unfolded.range);
}

// ---- measurement files ----

void save_measurements(const CsProblem& problem, bool normalized, const fs::path& path) {
  if (problem.y.empty()) throw Error("no measurements");
  const std::size_t m = problem.y.front().size();
  std::vector<double> flat;
  flat.reserve(problem.y.size() * m);
  for (const auto& y : problem.y) {
    if (y.size() != m) throw Error("ragged measurement blocks");
    flat.insert(flat.end(), y.begin(), y.end());
  }
  const auto label = "y " + std::to_string(problem.grid.source_rows) + "x" + std::to_string(problem.grid.source_cols) +
                     (normalized ? " norm" : " phys");
  save_map(ParametricMap(problem.y.size(), m, std::move(flat), label), path);
}

Measurements load_measurements(const fs::path& path) {
  const auto map = load_map(path);
  Measurements out;
  char domain[8] = {};
  unsigned long r = 0, c = 0;
  if (std::sscanf(map.unit().c_str(), "y %lux%lu %4s", &r, &c, domain) != 3 ||
      (std::string(domain) != "norm" && std::string(domain) != "phys")) {
    throw IoError(IoErrc::invalid_payload, path.string() + " is not a measurement file");
  }
  out.rows = r;
  out.cols = c;
  out.normalized = std::string(domain) == "norm";
  const auto v = map.values();
  for (std::size_t i = 0; i < map.rows(); ++i) {
    out.y.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(i * map.cols()),
                       v.begin() + static_cast<std::ptrdiff_t>((i + 1) * map.cols()));
  }
  return out;
}

void save_operator(const CsProblem& problem, const fs::path& path) {
  if (problem.is_matrix()) {
    save_matrix(std::get<MeasurementMatrix>(problem.op), path);
  } else {
    save_mask(std::get<BinaryMask>(problem.op), path);
  }
}

CsProblem load_problem(const fs::path& op_path, const Measurements& m) {
  CsProblem p;
  p.y = m.y;
  try {
    auto mask = load_mask(op_path);
    if (mask.rows != m.rows || mask.cols != m.cols || m.y.size() != 1 || m.y.front().size() != mask.ones()) {
      throw Error("mask does not match the measurements");
    }
    p.grid.n_block_rows = p.grid.n_block_cols = 1;
    p.grid.source_rows = m.rows;
    p.grid.source_cols = m.cols;
    p.op = std::move(mask);
    return p;
  } catch (const IoError& e) {
    if (e.code() != IoErrc::bad_version) throw;
  }
  auto a = load_matrix(op_path);
  p.grid = BlockGrid::for_map(m.rows, m.cols, block_side_for(a));
  if (m.y.size() != p.grid.block_count() || m.y.front().size() != a.m) {
    throw Error("matrix does not match the measurements");
  }
  p.op = std::move(a);
  return p;
}

// ---- comparison ----

CompareResult compare_methods(const ExperimentConfig& config, Exec exec) {
  config.validate();
  const fs::path out = config.out;
  ensure_dir(out / "truth");
  ensure_dir(out / "maps");

  const auto truths = make_dataset(config, config.n_train, config.n_test, exec);
  for (std::size_t i = 0; i < truths.size(); ++i) save_map(truths[i], out / "truth" / phantom_file(i));

  std::vector<ParametricMap> train_set;
  bool have_train = false;

  CompareResult result;
  std::vector<MetricRow> metric_rows;
  for (Method method : config.methods) {
    const std::string name(to_string(method));
    const auto kind = sampling_kind(config, method);
    const auto map_dir = out / "maps" / name;
    ensure_dir(map_dir);

    std::optional<UnfoldedModel> model;
    std::string method_error;
    if (is_unfolded(method)) {
      try {
        if (!have_train) {
          train_set = make_dataset(config, 0, config.n_train, exec);
          have_train = true;
        }
        auto trained = train_method(config, method, train_set, exec);
        ensure_dir(out / "models");
        save_checkpoint(trained.model, out / "models" / (name + ".qamu"));
        export_loss_curve_csv(trained.curve, out / "models" / (name + "_loss.csv"));
        model = std::move(trained.model);
      } catch (const std::exception& e) {
        method_error = std::string("training: ") + e.what();
      }
    }

    ReportRow summary{name, kind, config.sampling.ratio, 0.0, 0.0, 0.0, std::nullopt};
    if (config.timing) summary.seconds = 0.0;
    bool failed = false;
    for (std::size_t i = 0; i < truths.size(); ++i) {
      PhantomResult row;
      row.method = name;
      row.phantom = i;
      row.sampling = kind;
      row.ratio = config.sampling.ratio;
      row.metrics = {kNan, kNan, kNan, kNan};
      try {
        if (!method_error.empty()) throw Error(method_error);
        const auto t0 = std::chrono::steady_clock::now();
        ParametricMap recon;
        if (model) {
          const auto problem = sample_for_model(config, *model, truths[i], config.n_train + i);
          row.ratio = problem.ratio();
          recon = reconstruct_unfolded(config, *model, problem, exec);
        } else {
          const auto problem = sample_for_amp(config, method, truths[i], config.n_train + i);
          row.ratio = problem.ratio();
          recon = reconstruct_amp(config, method, problem, exec);
        }
        const auto t1 = std::chrono::steady_clock::now();
        if (config.timing) row.seconds = std::chrono::duration<double>(t1 - t0).count();
        save_map(recon, map_dir / phantom_file(i));
        row.metrics = evaluate(truths[i], recon, std::nullopt, exec);
      } catch (const std::exception& e) {
        row.error = e.what();
        failed = true;
      }
      summary.ratio = row.ratio;
      summary.psnr_db += row.metrics.psnr_db;
      summary.rmse += row.metrics.rmse;
      summary.ssim += row.metrics.ssim;
      if (summary.seconds && row.seconds) *summary.seconds += *row.seconds;
      result.per_phantom.push_back(std::move(row));
    }
    const auto n = static_cast<double>(truths.size());
    summary.psnr_db /= n;
    summary.rmse /= n;
    summary.ssim /= n;
    if (summary.seconds) *summary.seconds /= n;
    if (failed) {
      summary.psnr_db = summary.rmse = summary.ssim = kNan;
      result.failed_methods.push_back(name);
    }
    metric_rows.push_back({name, config.freq_label, {summary.psnr_db, summary.rmse, summary.ssim, kNan}});
    result.report.push_back(std::move(summary));
  }

  export_report(result.report, out / "report.csv");
  export_phantom_results(result.per_phantom, out / "per_phantom.csv");
  export_metric_rows(metric_rows, out / "metrics.csv");
  return result;
}

}  // namespace qamcs
