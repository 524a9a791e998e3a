#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "qamcs/experiment.hpp"
#include "qamcs/io.hpp"

using namespace qamcs;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("qamcs_test_experiment_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny(const fs::path& out) {
  ExperimentConfig c;
  c.out = out;
  c.rows = c.cols = 16;
  c.n_train = 3;
  c.n_test = 2;
  c.sampling.block = 8;
  c.amp.max_iters = 20;
  c.unfolded.iterations = 2;
  c.unfolded.channels = 2;
  c.train.epochs = 2;
  c.train.learning_rate = 1e-3;
  return c;
}

}  // namespace

TEST_CASE("one report row gives a two-line file") {
  const auto dir = scratch("one_row");
  const ReportRow row{"amp-soft", "spiral", 0.25, 12.5, 3.0, 0.5, std::nullopt};
  export_report(std::span<const ReportRow>(&row, 1), dir / "r.csv");
  CHECK(slurp(dir / "r.csv") == "method,sampling,ratio,psnr_db,rmse,ssim,seconds\namp-soft,spiral,0.25,12.5,3,0.5,na\n");
}

TEST_CASE("report round-trips to full precision") {
  const auto dir = scratch("roundtrip");
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  std::vector<ReportRow> rows;
  for (int i = 0; i < 50; ++i) {
    ReportRow r{"m" + std::to_string(i), "gaussian", u(gen), u(gen), u(gen), u(gen), std::nullopt};
    if (i % 2) r.seconds = std::abs(u(gen));
    rows.push_back(r);
  }
  rows[3].psnr_db = std::numeric_limits<double>::infinity();
  export_report(rows, dir / "r.csv");
  CHECK(slurp(dir / "r.csv").find(",inf,") != std::string::npos);
  const auto back = parse_report(dir / "r.csv");
  CHECK(back == rows);
}

TEST_CASE("report errors") {
  const auto dir = scratch("errors");
  CHECK_THROWS_AS(export_report({}, dir / "r.csv"), Error);
  const ReportRow row{"a", "b", 1, 2, 3, 4, std::nullopt};
  CHECK_THROWS_AS(export_report(std::span<const ReportRow>(&row, 1), dir / "missing" / "r.csv"), IoError);
  std::ofstream(dir / "bad.csv") << "method,ratio\n";
  CHECK_THROWS_AS(parse_report(dir / "bad.csv"), IoError);
}

TEST_CASE("identity sampling with a zero threshold scores infinite PSNR") {
  const auto dir = scratch("identity");
  auto c = tiny(dir);
  c.methods = {Method::amp_soft};
  c.sampling.kind = "identity";
  c.sampling.ratio = 1.0;
  c.amp.tau = 0.0;
  const auto result = compare_methods(c);
  REQUIRE(result.report.size() == 1);
  CHECK(result.failed_methods.empty());
  CHECK(std::isinf(result.report[0].psnr_db));
  CHECK(result.report[0].rmse == 0.0);
  CHECK(result.report[0].sampling == "identity");
  const auto back = parse_report(dir / "report.csv");
  CHECK(std::isinf(back[0].psnr_db));
  CHECK(slurp(dir / "report.csv").find("amp-soft,identity,1,inf,0,") != std::string::npos);
}

TEST_CASE("compare is deterministic and writes every artifact") {
  const auto a = scratch("det_a"), b = scratch("det_b");
  auto ca = tiny(a), cb = tiny(b);
  const auto ra = compare_methods(ca, Exec::parallel);
  const auto rb = compare_methods(cb, Exec::serial);
  CHECK(ra.failed_methods.empty());
  REQUIRE(ra.report.size() == 4);
  CHECK(ra.report[0].method == "amp-soft");
  CHECK(ra.report[3].method == "unfolded-trainedA");
  CHECK(ra.per_phantom.size() == 8);
  const char* files[] = {"report.csv",
                         "per_phantom.csv",
                         "metrics.csv",
                         "truth/phantom_000.qamp",
                         "truth/phantom_001.qamp",
                         "maps/amp-soft/phantom_001.qamp",
                         "maps/amp-cauchy/phantom_000.qamp",
                         "maps/unfolded/phantom_000.qamp",
                         "maps/unfolded-trainedA/phantom_001.qamp",
                         "models/unfolded.qamu",
                         "models/unfolded-trainedA.qamu",
                         "models/unfolded_loss.csv",
                         "models/unfolded-trainedA_loss.csv"};
  for (const char* f : files) {
    INFO(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  for (const auto& row : ra.report) {
    CHECK(std::isfinite(row.psnr_db));
    CHECK(!row.seconds.has_value());
  }
  // a different seed changes the data
  auto cc = tiny(scratch("det_c"));
  cc.seed = 1;
  compare_methods(cc);
  CHECK(slurp(a / "truth/phantom_000.qamp") != slurp(cc.out / "truth/phantom_000.qamp"));
}

TEST_CASE("a failing method keeps its row and the others run") {
  const auto dir = scratch("failure");
  auto c = tiny(dir);
  c.methods = {Method::amp_soft, Method::unfolded};
  c.train.learning_rate = 1e300;
  const auto result = compare_methods(c);
  REQUIRE(result.report.size() == 2);
  CHECK(result.failed_methods == std::vector<std::string>{"unfolded"});
  CHECK(std::isfinite(result.report[0].psnr_db));
  CHECK(std::isnan(result.report[1].psnr_db));
  for (const auto& p : result.per_phantom) CHECK((p.method == "unfolded") == !p.error.empty());
  const auto text = slurp(dir / "per_phantom.csv");
  CHECK(text.find("training") != std::string::npos);
}

TEST_CASE("timing fills the seconds column") {
  const auto dir = scratch("timing");
  auto c = tiny(dir);
  c.methods = {Method::amp_cauchy};
  c.timing = true;
  const auto result = compare_methods(c);
  REQUIRE(result.report[0].seconds.has_value());
  CHECK(*result.report[0].seconds >= 0.0);
}

TEST_CASE("measurement and operator files rebuild the problem") {
  const auto dir = scratch("measurements");
  auto c = tiny(dir);
  const auto truth = make_dataset(c, 0, 1)[0];
  for (const char* kind : {"spiral", "gaussian", "random"}) {
    INFO(kind);
    c.sampling.kind = kind;
    const auto p = sample_for_amp(c, Method::amp_soft, truth, 0);
    save_operator(p, dir / "op.qamp");
    save_measurements(p, false, dir / "y.qamp");
    const auto m = load_measurements(dir / "y.qamp");
    CHECK_FALSE(m.normalized);
    CHECK(m.rows == 16);
    const auto q = load_problem(dir / "op.qamp", m);
    CHECK(q.y == p.y);
    if (p.is_matrix()) {
      CHECK(std::get<MeasurementMatrix>(q.op).entries == std::get<MeasurementMatrix>(p.op).entries);
    } else {
      CHECK(std::get<BinaryMask>(q.op) == std::get<BinaryMask>(p.op));
    }
    CHECK(q.grid == p.grid);
    CHECK(reconstruct_amp(c, Method::amp_soft, q) == reconstruct_amp(c, Method::amp_soft, p));
  }
  save_map(truth, dir / "map.qamp");
  CHECK_THROWS_AS(load_measurements(dir / "map.qamp"), IoError);
}

TEST_CASE("unfolded variants share their initial A") {
  const ExperimentConfig c;
  const auto frozen = initial_model(c, Method::unfolded);
  const auto learned = initial_model(c, Method::unfolded_trained_a);
  CHECK(frozen.a == learned.a);
  CHECK_FALSE(frozen.trainable_a);
  CHECK(learned.trainable_a);
  CHECK_FALSE(frozen.has_deblock());
  CHECK(learned.has_deblock());
  CHECK_THROWS_AS(initial_model(c, Method::amp_soft), Error);
}
