#include "qamcs/config.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "qamcs/io.hpp"
#include "rng.hpp"

namespace qamcs {

namespace {

constexpr Method kAllMethods[] = {Method::amp_soft, Method::amp_cauchy, Method::unfolded,
                                  Method::unfolded_trained_a};

using Values = std::vector<std::string>;

struct Field {
  std::function<void(ExperimentConfig&, const Values&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::string& single(const std::string& key, const Values& v) {
  if (v.size() != 1) throw ConfigError(key + ": expected a single value");
  return v.front();
}

double to_double(const std::string& key, const Values& v) {
  const auto& s = single(key, v);
  double d = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), d);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(d)) {
    throw ConfigError(key + ": not a finite number: '" + s + "'");
  }
  return d;
}

std::uint64_t to_u64(const std::string& key, const Values& v) {
  const auto& s = single(key, v);
  std::uint64_t u = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), u);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ConfigError(key + ": not a non-negative integer: '" + s + "'");
  }
  return u;
}

bool to_bool(const std::string& key, const Values& v) {
  const auto& s = single(key, v);
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

// Getters reuse the setter's accessor; they never write through it.
Field dbl(std::function<double&(ExperimentConfig&)> ref, std::string key) {
  return {[ref, key](ExperimentConfig& c, const Values& v) { ref(c) = to_double(key, v); },
          [ref](const ExperimentConfig& c) { return format_double(ref(const_cast<ExperimentConfig&>(c))); }};
}

Field size(std::function<std::size_t&(ExperimentConfig&)> ref, std::string key) {
  return {[ref, key](ExperimentConfig& c, const Values& v) { ref(c) = static_cast<std::size_t>(to_u64(key, v)); },
          [ref](const ExperimentConfig& c) { return std::to_string(ref(const_cast<ExperimentConfig&>(c))); }};
}

Field u64(std::function<std::uint64_t&(ExperimentConfig&)> ref, std::string key) {
  return {[ref, key](ExperimentConfig& c, const Values& v) { ref(c) = to_u64(key, v); },
          [ref](const ExperimentConfig& c) { return std::to_string(ref(const_cast<ExperimentConfig&>(c))); }};
}

Field boolean(std::function<bool&(ExperimentConfig&)> ref, std::string key) {
  return {[ref, key](ExperimentConfig& c, const Values& v) { ref(c) = to_bool(key, v); },
          [ref](const ExperimentConfig& c) {
            return std::string(ref(const_cast<ExperimentConfig&>(c)) ? "true" : "false");
          }};
}

Field str(std::function<std::string&(ExperimentConfig&)> ref, std::string key) {
  return {[ref, key](ExperimentConfig& c, const Values& v) { ref(c) = single(key, v); },
          [ref](const ExperimentConfig& c) { return quote(ref(const_cast<ExperimentConfig&>(c))); }};
}

// Ordered by section so formatting can emit one header per section.
const std::vector<std::pair<std::string, Field>>& fields() {
  using C = ExperimentConfig;
  static const std::vector<std::pair<std::string, Field>> table = {
      {"experiment.seed", u64([](C& c) -> auto& { return c.seed; }, "experiment.seed")},
      {"experiment.out",
       {[](C& c, const Values& v) { c.out = single("experiment.out", v); },
        [](const C& c) { return quote(c.out.generic_string()); }}},
      {"experiment.methods",
       {[](C& c, const Values& v) {
          c.methods.clear();
          for (const auto& s : v) {
            if (!s.empty()) c.methods.push_back(method_from_string(s));
          }
        },
        [](const C& c) {
          std::string s = "[";
          for (std::size_t i = 0; i < c.methods.size(); ++i) {
            if (i) s += ", ";
            s += quote(std::string(to_string(c.methods[i])));
          }
          return s + "]";
        }}},
      {"experiment.n_train", size([](C& c) -> auto& { return c.n_train; }, "experiment.n_train")},
      {"experiment.n_test", size([](C& c) -> auto& { return c.n_test; }, "experiment.n_test")},
      {"experiment.rows", size([](C& c) -> auto& { return c.rows; }, "experiment.rows")},
      {"experiment.cols", size([](C& c) -> auto& { return c.cols; }, "experiment.cols")},
      {"experiment.acquire", boolean([](C& c) -> auto& { return c.acquire; }, "experiment.acquire")},
      {"experiment.timing", boolean([](C& c) -> auto& { return c.timing; }, "experiment.timing")},
      {"experiment.freq_label", str([](C& c) -> auto& { return c.freq_label; }, "experiment.freq_label")},

      {"phantom.n_inclusions", size([](C& c) -> auto& { return c.phantom.n_inclusions; }, "phantom.n_inclusions")},
      {"phantom.inclusion_min",
       dbl([](C& c) -> auto& { return c.phantom.inclusion_min; }, "phantom.inclusion_min")},
      {"phantom.value_max", dbl([](C& c) -> auto& { return c.phantom.value_max; }, "phantom.value_max")},
      {"phantom.background", dbl([](C& c) -> auto& { return c.phantom.background; }, "phantom.background")},
      {"phantom.background_amplitude",
       dbl([](C& c) -> auto& { return c.phantom.background_amplitude; }, "phantom.background_amplitude")},
      {"phantom.thickness", dbl([](C& c) -> auto& { return c.phantom.thickness; }, "phantom.thickness")},
      {"phantom.c0", dbl([](C& c) -> auto& { return c.phantom.c0; }, "phantom.c0")},

      {"pulse.f0", dbl([](C& c) -> auto& { return c.acquisition.f0; }, "pulse.f0")},
      {"pulse.fractional_bandwidth",
       dbl([](C& c) -> auto& { return c.acquisition.fractional_bandwidth; }, "pulse.fractional_bandwidth")},
      {"pulse.fs", dbl([](C& c) -> auto& { return c.acquisition.fs; }, "pulse.fs")},
      {"pulse.duration", dbl([](C& c) -> auto& { return c.acquisition.duration; }, "pulse.duration")},
      {"pulse.water_path", dbl([](C& c) -> auto& { return c.acquisition.water_path; }, "pulse.water_path")},
      {"pulse.a1", dbl([](C& c) -> auto& { return c.acquisition.a1; }, "pulse.a1")},
      {"pulse.a2", dbl([](C& c) -> auto& { return c.acquisition.a2; }, "pulse.a2")},
      {"pulse.attenuation", dbl([](C& c) -> auto& { return c.acquisition.attenuation; }, "pulse.attenuation")},
      {"pulse.noise_std", dbl([](C& c) -> auto& { return c.acquisition.noise_std; }, "pulse.noise_std")},

      {"sampling.kind", str([](C& c) -> auto& { return c.sampling.kind; }, "sampling.kind")},
      {"sampling.ratio", dbl([](C& c) -> auto& { return c.sampling.ratio; }, "sampling.ratio")},
      {"sampling.block", size([](C& c) -> auto& { return c.sampling.block; }, "sampling.block")},
      {"sampling.seed", u64([](C& c) -> auto& { return c.sampling.seed; }, "sampling.seed")},
      {"sampling.noise_std", dbl([](C& c) -> auto& { return c.sampling.noise_std; }, "sampling.noise_std")},

      {"amp.tau", dbl([](C& c) -> auto& { return c.amp.tau; }, "amp.tau")},
      {"amp.cauchy_tau", dbl([](C& c) -> auto& { return c.amp.cauchy_tau; }, "amp.cauchy_tau")},
      {"amp.levels", size([](C& c) -> auto& { return c.amp.levels; }, "amp.levels")},
      {"amp.max_iters", size([](C& c) -> auto& { return c.amp.max_iters; }, "amp.max_iters")},
      {"amp.tol", dbl([](C& c) -> auto& { return c.amp.tol; }, "amp.tol")},
      {"amp.onsager", str([](C& c) -> auto& { return c.amp.onsager; }, "amp.onsager")},

      {"unfolded.iterations", size([](C& c) -> auto& { return c.unfolded.iterations; }, "unfolded.iterations")},
      {"unfolded.channels", size([](C& c) -> auto& { return c.unfolded.channels; }, "unfolded.channels")},
      {"unfolded.deblock", boolean([](C& c) -> auto& { return c.unfolded.deblock; }, "unfolded.deblock")},
      {"unfolded.range_lo", dbl([](C& c) -> auto& { return c.unfolded.range.lo; }, "unfolded.range_lo")},
      {"unfolded.range_hi", dbl([](C& c) -> auto& { return c.unfolded.range.hi; }, "unfolded.range_hi")},

      {"train.batch_size", size([](C& c) -> auto& { return c.train.batch_size; }, "train.batch_size")},
      {"train.learning_rate", dbl([](C& c) -> auto& { return c.train.learning_rate; }, "train.learning_rate")},
      {"train.epochs", size([](C& c) -> auto& { return c.train.epochs; }, "train.epochs")},
      {"train.max_steps", size([](C& c) -> auto& { return c.train.max_steps; }, "train.max_steps")},
  };
  return table;
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::amp_soft:
      return "amp-soft";
    case Method::amp_cauchy:
      return "amp-cauchy";
    case Method::unfolded:
      return "unfolded";
    case Method::unfolded_trained_a:
      return "unfolded-trainedA";
  }
  return "?";
}

Method method_from_string(std::string_view name) {
  for (Method m : kAllMethods) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (expected amp-soft, amp-cauchy, unfolded or unfolded-trainedA)");
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (methods.empty()) fail("experiment.methods must not be empty");
  if (n_test == 0) fail("experiment.n_test must be >= 1");
  if (rows < 8 || cols < 8) fail("experiment.rows and cols must be >= 8");
  if (!(sampling.ratio > 0.0 && sampling.ratio <= 1.0)) fail("sampling.ratio must be in (0, 1]");
  if (sampling.block == 0) fail("sampling.block must be >= 1");
  if (sampling.noise_std < 0.0) fail("sampling.noise_std must be >= 0");
  static const char* kinds[] = {"auto", "gaussian", "spiral", "random", "raster", "identity"};
  if (std::find(std::begin(kinds), std::end(kinds), sampling.kind) == std::end(kinds)) {
    fail("sampling.kind must be one of auto, gaussian, spiral, random, raster, identity");
  }
  if (amp.tau < 0.0 || amp.cauchy_tau <= 0.0) fail("amp.tau must be >= 0 and amp.cauchy_tau > 0");
  if (amp.max_iters == 0) fail("amp.max_iters must be >= 1");
  if (amp.tol < 0.0) fail("amp.tol must be >= 0");
  if (amp.onsager != "auto" && amp.onsager != "on" && amp.onsager != "off") {
    fail("amp.onsager must be auto, on or off");
  }
  if (unfolded.iterations < 1 || unfolded.iterations > 9) fail("unfolded.iterations must be in 1..9");
  if (unfolded.channels == 0) fail("unfolded.channels must be >= 1");
  if (!(unfolded.range.hi > unfolded.range.lo)) fail("unfolded.range_hi must exceed range_lo");
  if (phantom.thickness <= 0.0 || phantom.c0 <= 0.0) fail("phantom.thickness and c0 must be > 0");
  if (acquisition.f0 <= 0.0 || acquisition.fs <= 0.0 || acquisition.duration <= 0.0) {
    fail("pulse.f0, fs and duration must be > 0");
  }
  if (acquisition.noise_std < 0.0) fail("pulse.noise_std must be >= 0");
  const bool needs_training = std::find_if(methods.begin(), methods.end(), [](Method m) {
                                return m == Method::unfolded || m == Method::unfolded_trained_a;
                              }) != methods.end();
  if (needs_training && n_train == 0) fail("experiment.n_train must be >= 1 for the unfolded methods");
  try {
    train.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
}

ExperimentConfig parse_experiment_config(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  std::map<std::string, const Field*> index;
  for (const auto& [key, field] : fields()) index.emplace(key, &field);

  ExperimentConfig config;
  for (const auto& item : items) {
    // section open/close markers
    if (item.name == "++" || item.name == "--") continue;
    const auto key = item.fullname();
    auto it = index.find(key);
    if (it == index.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second->set(config, item.inputs);
  }
  config.validate();
  return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

std::string format_experiment_config(const ExperimentConfig& config) {
  std::string out, section;
  for (const auto& [key, field] : fields()) {
    const auto dot = key.find('.');
    const auto sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += '\n';
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += key.substr(dot + 1) + " = " + field.get(config) + "\n";
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  auto gen = detail::make_engine(seed ^ (index * 0x9e3779b97f4a7c15ULL), tag);
  return gen();
}

}  // namespace qamcs
