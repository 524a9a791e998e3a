#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "qamcs/io.hpp"
#include "qamcs/unfolded.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "qamcs_test_cli";

int run(const std::string& args) {
  const std::string cmd = std::string(QAMCS_CLI) + " " + args + " >" + (kDir / "stdout.txt").string() + " 2>" +
                          (kDir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const std::string& extra = {}) {
  const auto p = kDir / name;
  std::ofstream(p) << "[experiment]\nrows = 16\ncols = 16\nn_train = 2\nn_test = 2\n"
                      "[sampling]\nblock = 8\n[amp]\nmax_iters = 10\n"
                      "[unfolded]\niterations = 2\nchannels = 2\n[train]\nepochs = 2\n"
                   << extra;
  return p;
}

struct Fresh {
  Fresh() {
    fs::remove_all(kDir);
    fs::create_directories(kDir);
  }
};

}  // namespace

TEST_CASE_FIXTURE(Fresh, "config errors exit with 2") {
  const auto bad = kDir / "bad.toml";
  std::ofstream(bad) << "[experiment]\nnonsense = 3\n";
  CHECK(run("compare --config " + bad.string()) == 2);
  CHECK(slurp(kDir / "stderr.txt").find("nonsense") != std::string::npos);
  CHECK(run("compare --no-such-flag") == 2);
  CHECK(run("") == 2);
  CHECK(run("compare --config " + (kDir / "missing.toml").string()) == 2);
  CHECK(run("compare --config " + write_config("c.toml").string() + " --method lasso") == 2);
}

TEST_CASE_FIXTURE(Fresh, "compare succeeds, filters methods and is reproducible") {
  const auto cfg = write_config("c.toml");
  const auto before = slurp(cfg);
  const auto a = kDir / "a", b = kDir / "b";
  REQUIRE(run("compare --config " + cfg.string() + " --out " + a.string() + " --method amp-soft,unfolded") == 0);
  REQUIRE(run("compare --config " + cfg.string() + " --out " + b.string() + " --method amp-soft --method unfolded") == 0);
  CHECK(slurp(cfg) == before);
  const auto report = slurp(a / "report.csv");
  CHECK(report == slurp(b / "report.csv"));
  CHECK(slurp(a / "per_phantom.csv") == slurp(b / "per_phantom.csv"));
  CHECK(report.find("amp-cauchy") == std::string::npos);
  CHECK(report.find("unfolded,gaussian") != std::string::npos);
  // --seed overrides the config
  REQUIRE(run("compare --config " + cfg.string() + " --out " + (kDir / "s").string() + " --method amp-soft --seed 9") == 0);
  CHECK(slurp(kDir / "s" / "truth" / "phantom_000.qamp") != slurp(a / "truth" / "phantom_000.qamp"));
}

TEST_CASE_FIXTURE(Fresh, "a failing method exits with 1") {
  const auto cfg = write_config("c.toml", "learning_rate = 1e300\n");
  CHECK(run("compare --config " + cfg.string() + " --out " + (kDir / "o").string() + " --method amp-soft,unfolded") ==
        1);
  CHECK(fs::exists(kDir / "o" / "report.csv"));
}

TEST_CASE_FIXTURE(Fresh, "stage subcommands chain into a reconstruction") {
  const auto cfg = write_config("c.toml").string();
  const auto out = kDir / "p";
  const auto o = " --config " + cfg + " --out " + out.string();
  REQUIRE(run("phantom" + o + " --index 1 --csv") == 0);
  CHECK(fs::exists(out / "phantom_001.csv"));
  REQUIRE(run("acquire" + o + " --index 1 --rf") == 0);
  CHECK(fs::exists(out / "rf_1.f32.hdr"));
  const auto sos = (out / "sos_001.qamp").string();

  REQUIRE(run("sample" + o + " --method amp-cauchy --input " + sos) == 0);
  REQUIRE(run("reconstruct" + o + " --method amp-cauchy --input " + (out / "measurements.qamp").string() +
              " --operator " + (out / "operator.qamp").string()) == 0);
  REQUIRE(run("eval" + o + " --method amp-cauchy --reference " + sos + " --test " +
              (out / "recon_amp-cauchy.qamp").string()) == 0);
  CHECK(slurp(kDir / "stdout.txt").find("psnr_db=") != std::string::npos);
  CHECK(slurp(out / "metrics.csv").find("amp-cauchy,500MHz,") != std::string::npos);

  REQUIRE(run("train" + o + " --method unfolded") == 0);
  const auto model = qamcs::load_checkpoint(out / "unfolded.qamu");
  CHECK_FALSE(model.trainable_a);
  CHECK(fs::exists(out / "unfolded_loss.csv"));
  REQUIRE(run("sample" + o + " --method unfolded --input " + sos + " --checkpoint " + (out / "unfolded.qamu").string()) ==
          0);
  REQUIRE(run("reconstruct" + o + " --method unfolded --input " + (out / "measurements.qamp").string() +
              " --checkpoint " + (out / "unfolded.qamu").string()) == 0);
  const auto recon = qamcs::load_map(out / "recon_unfolded.qamp");
  CHECK(recon.rows() == 16);
  CHECK(recon.unit() == "m/s");

  // an AMP reconstruction cannot use model measurements
  CHECK(run("reconstruct" + o + " --method amp-soft --input " + (out / "measurements.qamp").string() +
            " --operator " + (out / "operator.qamp").string()) == 2);
  CHECK(run("train" + o + " --method amp-soft") == 2);
}
