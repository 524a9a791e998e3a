// qamcs: one subcommand per pipeline stage plus the full comparison.
#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qamcs/config.hpp"
#include "qamcs/experiment.hpp"
#include "qamcs/io.hpp"
#include "qamcs/metrics.hpp"

namespace fs = std::filesystem;
using namespace qamcs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> methods;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Experiment config file")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Output directory (overrides experiment.out)");
  cmd->add_option("--seed", c.seed, "Experiment seed (overrides experiment.seed)");
  cmd->add_option("--method", c.methods, "Method name; repeatable for compare")->delimiter(',');
}

ExperimentConfig load(const Common& c) {
  auto cfg = c.config.empty() ? ExperimentConfig{} : load_experiment_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out = c.out;
  if (!c.methods.empty()) {
    std::vector<Method> keep;
    for (const auto& name : c.methods) keep.push_back(method_from_string(name));
    cfg.methods = keep;
  }
  cfg.validate();
  return cfg;
}

Method single_method(const ExperimentConfig& cfg, const Common& c, Method fallback) {
  if (c.methods.size() > 1) throw ConfigError("this subcommand takes one --method");
  return c.methods.empty() ? fallback : cfg.methods.front();
}

bool unfolded(Method m) { return m == Method::unfolded || m == Method::unfolded_trained_a; }

std::string indexed(const std::string& stem, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu.qamp", stem.c_str(), i);
  return buf;
}

void print_report(const MetricReport& r) {
  std::cout << "psnr_db=" << format_double(r.psnr_db) << " rmse=" << format_double(r.rmse)
            << " ssim=" << format_double(r.ssim) << " peak=" << format_double(r.peak_used) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressed-sensing reconstruction of acoustic microscopy maps"};
  app.require_subcommand(1);

  Common common;
  std::size_t index = 0;
  std::string input, reference, test, checkpoint, op;
  bool rf = false, csv = false;

  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic SoS phantom");
  add_common(phantom, common);
  phantom->add_option("--index", index, "Phantom number");
  phantom->add_flag("--csv", csv, "Also export the map as CSV");

  auto* acquire = app.add_subcommand("acquire", "Simulate the raster scan and estimate the SoS map");
  add_common(acquire, common);
  acquire->add_option("--index", index, "Phantom number (seeds the phantom and the RF noise)");
  acquire->add_option("--input", input, "Phantom map to scan instead of generating one")->check(CLI::ExistingFile);
  acquire->add_flag("--rf", rf, "Keep the RF cube (raw f32 plus .hdr)");

  auto* sample = app.add_subcommand("sample", "Sample a map with a method's operator");
  add_common(sample, common);
  sample->add_option("--input", input, "Ground-truth map")->required()->check(CLI::ExistingFile);
  sample->add_option("--index", index, "Seeds the measurement noise");
  sample->add_option("--checkpoint", checkpoint, "Model whose A samples the map (unfolded methods)")
      ->check(CLI::ExistingFile);

  auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct a map from measurements");
  add_common(reconstruct, common);
  reconstruct->add_option("--input", input, "Measurements file")->required()->check(CLI::ExistingFile);
  reconstruct->add_option("--operator", op, "Mask or matrix file (AMP methods)")->check(CLI::ExistingFile);
  reconstruct->add_option("--checkpoint", checkpoint, "Model checkpoint (unfolded methods)")->check(CLI::ExistingFile);

  auto* train = app.add_subcommand("train", "Train an unfolded model on the training phantoms");
  add_common(train, common);

  auto* eval = app.add_subcommand("eval", "Score a reconstruction against a reference map");
  add_common(eval, common);
  eval->add_option("--reference", reference, "Ground-truth map")->required()->check(CLI::ExistingFile);
  eval->add_option("--test", test, "Reconstructed map")->required()->check(CLI::ExistingFile);

  auto* compare = app.add_subcommand("compare", "Run every configured method on the test phantoms");
  add_common(compare, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const auto cfg = load(common);
    const fs::path out = cfg.out;
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError(IoErrc::io_failure, "cannot create " + out.string() + ": " + ec.message());

    if (*phantom) {
      const auto p = make_phantom(cfg, index);
      save_map(p.sos_map, out / indexed("phantom", index));
      if (csv) export_csv(p.sos_map, (out / indexed("phantom", index)).replace_extension(".csv"));
      return kExitOk;
    }
    if (*acquire) {
      Phantom p = make_phantom(cfg, index);
      if (!input.empty()) p.sos_map = load_map(input);
      auto acq_cfg = cfg.acquisition;
      acq_cfg.seed = stage_seed(cfg, SeedTag::acquisition, index);
      const auto acq = acquire_and_map(p, acq_cfg, rf);
      save_map(acq.sos, out / indexed("sos", index));
      if (rf) export_rf_cube(acq, acq_cfg, out / ("rf_" + std::to_string(index) + ".f32"));
      std::cout << "unresolved=" << acq.unresolved_count << '\n';
      return kExitOk;
    }
    if (*sample) {
      const auto method = single_method(cfg, common, Method::amp_soft);
      const auto truth = load_map(input);
      if (unfolded(method)) {
        if (checkpoint.empty()) throw ConfigError("sample: unfolded methods need --checkpoint");
        const auto model = load_checkpoint(checkpoint);
        save_measurements(sample_for_model(cfg, model, truth, index), true, out / "measurements.qamp");
      } else {
        const auto problem = sample_for_amp(cfg, method, truth, index);
        save_operator(problem, out / "operator.qamp");
        save_measurements(problem, false, out / "measurements.qamp");
      }
      return kExitOk;
    }
    if (*reconstruct) {
      const auto method = single_method(cfg, common, Method::amp_soft);
      const auto meas = load_measurements(input);
      ParametricMap recon;
      if (unfolded(method)) {
        if (checkpoint.empty()) throw ConfigError("reconstruct: unfolded methods need --checkpoint");
        if (!meas.normalized) throw ConfigError("reconstruct: measurements were not taken with a model");
        const auto model = load_checkpoint(checkpoint);
        CsProblem problem;
        problem.grid = BlockGrid::for_map(meas.rows, meas.cols, model.block_size);
        problem.y = meas.y;
        problem.op = model.a;
        recon = reconstruct_unfolded(cfg, model, problem);
      } else {
        if (op.empty()) throw ConfigError("reconstruct: AMP methods need --operator");
        if (meas.normalized) throw ConfigError("reconstruct: normalised measurements belong to a model");
        recon = reconstruct_amp(cfg, method, load_problem(op, meas));
      }
      save_map(recon, out / ("recon_" + std::string(to_string(method)) + ".qamp"));
      return kExitOk;
    }
    if (*train) {
      const auto method = single_method(cfg, common, Method::unfolded_trained_a);
      if (!unfolded(method)) throw ConfigError("train: only the unfolded methods are trainable");
      const auto data = make_dataset(cfg, 0, cfg.n_train);
      const auto result = train_method(cfg, method, data);
      const std::string name(to_string(method));
      save_checkpoint(result.model, out / (name + ".qamu"));
      export_loss_curve_csv(result.curve, out / (name + "_loss.csv"));
      if (!result.curve.empty()) std::cout << "final_loss=" << format_double(result.curve.back().loss) << '\n';
      return kExitOk;
    }
    if (*eval) {
      const auto r = evaluate(load_map(reference), load_map(test));
      print_report(r);
      const std::string label = common.methods.empty() ? "test" : common.methods.front();
      const MetricRow row{label, cfg.freq_label, r};
      export_metric_rows(std::span<const MetricRow>(&row, 1), out / "metrics.csv");
      return kExitOk;
    }
    if (*compare) {
      const auto result = compare_methods(cfg);
      for (const auto& row : result.report) {
        std::cout << row.method << ": psnr_db=" << format_double(row.psnr_db) << " rmse=" << format_double(row.rmse)
                  << " ssim=" << format_double(row.ssim) << '\n';
      }
      for (const auto& p : result.per_phantom) {
        if (!p.error.empty()) std::cerr << p.method << " phantom " << p.phantom << ": " << p.error << '\n';
      }
      return result.failed_methods.empty() ? kExitOk : kExitFailure;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
