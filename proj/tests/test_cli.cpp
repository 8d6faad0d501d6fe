#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hhp/cli.hpp"
#include "hhp/errors.hpp"

using namespace hhp;

namespace {

RunConfig small_config(double gamma, double p) {
  RunConfig c;
  c.geom = GridGeometry::scaled(3.0, 12, 12);
  c.gamma = gamma;
  c.p = p;
  c.t_horizon = 1.0;
  return c;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("config text parses with comments and round-trips through the echo") {
  std::istringstream in(
      "# sweep\n"
      "gamma = -0.5   # Hardy\n"
      "p=2.5\n"
      "\n"
      "lambda_scale = 0.3\n"
      "initial_data = product_hardy\n"
      "p_values = 1.2, 1.375 ,2.5\n"
      "offset = true\n"
      "apply_mode = raw\n");
  const RunConfig c = parse_config(in);
  CHECK(c.gamma == -0.5);
  CHECK(c.p == 2.5);
  REQUIRE(c.lambda_scale.has_value());
  CHECK(*c.lambda_scale == 0.3);
  CHECK(c.initial_data == InitialData::product_hardy);
  CHECK(c.p_values == std::vector<double>{1.2, 1.375, 2.5});
  CHECK(c.apply_mode == ApplyMode::raw);

  std::ostringstream echo;
  for (const auto& [k, v] : c.key_values()) echo << k << " = " << v << "\n";
  std::istringstream again(echo.str());
  const RunConfig d = parse_config(again);
  CHECK(d.key_values() == c.key_values());
  CHECK(d.hash() == c.hash());
  CHECK(c.hash().size() == 16);
  CHECK(c.key_values().size() == RunConfig::keys().size());

  RunConfig e = c;
  e.set("lambda_scale", "auto");
  CHECK_FALSE(e.lambda_scale.has_value());
  CHECK(e.hash() != c.hash());
}

TEST_CASE("config errors") {
  std::istringstream unknown("gama = 1\n");
  CHECK_THROWS_AS(parse_config(unknown), ConfigError);
  std::istringstream no_eq("gamma 1\n");
  CHECK_THROWS_AS(parse_config(no_eq), ConfigError);
  RunConfig c;
  CHECK_THROWS_AS(c.set("p", "two"), ConfigError);
  CHECK_THROWS_AS(c.set("n_xy", "3.5"), ConfigError);
  CHECK_THROWS_AS(c.set("initial_data", "gaussian"), ConfigError);
  CHECK_THROWS_AS(c.set("offset", "maybe"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.txt"), ConfigError);

  const auto invalid = [](auto mutate) {
    RunConfig r;
    mutate(r);
    CHECK_THROWS_AS(r.validate(), ConfigError);
  };
  invalid([](RunConfig& r) { r.gamma = -2.0; });
  invalid([](RunConfig& r) { r.p = 1.0; });
  invalid([](RunConfig& r) { r.n_heis = 2; });
  invalid([](RunConfig& r) { r.lambda_scale = 0.0; });
  invalid([](RunConfig& r) { r.initial_data = InitialData::custom_file; });
  invalid([](RunConfig& r) { r.workers = 0; });
  invalid([](RunConfig& r) { r.snapshot_times = {9.0}; });
  invalid([](RunConfig& r) { r.p_values = {0.5}; });
  // gamma < 0 on a grid with a node at the origin.
  invalid([](RunConfig& r) {
    r.gamma = -0.5;
    r.geom.n_xy = 33;
    r.geom.n_tau = 33;
  });
  CHECK_NOTHROW(RunConfig{}.validate());
}

TEST_CASE("thresholds and regimes") {
  CHECK(fujita_exponent(0.0) == 1.5);
  CHECK(fujita_exponent(1.0) == 1.75);
  CHECK(fujita_exponent(-0.5) == 1.375);
  CHECK(hardy_threshold(-0.5) == doctest::Approx(1.0 + 1.5 / 3.5));
  CHECK(hardy_threshold(0.0) == fujita_exponent(0.0));
  for (double g : {-1.5, -1.0, -0.5, -0.1}) CHECK(fujita_exponent(g) < hardy_threshold(g));

  CHECK(classify(1.3, 0.0) == Regime::subcritical);
  CHECK(classify(1.5, 0.0) == Regime::subcritical);
  CHECK(classify(1.51, 0.0) == Regime::global);
  CHECK(classify(1.75, 1.0) == Regime::subcritical);
  CHECK(classify(1.9, 1.0) == Regime::global);
  CHECK(classify(1.375, -0.5) == Regime::subcritical);
  CHECK(classify(1.4, -0.5) == Regime::gap);
  CHECK(classify(1.0 + 1.5 / 3.5, -0.5) == Regime::gap);
  // 1.5 lies above the Hardy threshold 1.4286, outside the gap.
  CHECK(classify(1.5, -0.5) == Regime::global);
  CHECK(classify(2.5, -0.5) == Regime::global);
}

TEST_CASE("initial data kinds") {
  RunConfig c;
  const GridField bump = initial_field(c, InitialData::bump);
  // The node nearest the origin has Koranyi norm about 1.06 on the default grid.
  CHECK(bump.max_value() <= 100.0);
  CHECK(bump.max_value() > 40.0);
  CHECK(bump.min_value() == 0.0);
  const GridField prof = initial_field(c, InitialData::profile_Q_decay);
  CHECK(prof.max_value() <= 1.0);
  CHECK(prof.max_value() > 0.05);
  const GridField hardy = initial_field(c, InitialData::product_hardy);
  CHECK(hardy.min_value() > 0.0);
  CHECK_THROWS_AS(initial_field(c, InitialData::automatic), ArgumentError);

  const auto file = std::filesystem::temp_directory_path() / "hhp_custom_field.txt";
  {
    std::ofstream os(file);
    write_snapshot(os, bump, {0.0, 0.0, 2.0});
  }
  c.initial_data = InitialData::custom_file;
  c.custom_file = file.string();
  const GridField back = initial_field(c, InitialData::custom_file);
  CHECK(back.values() == bump.values());
  c.geom.n_xy = 16;
  CHECK_THROWS_AS(initial_field(c, InitialData::custom_file), ConfigError);
  c.custom_file = "/nonexistent/field.txt";
  CHECK_THROWS_AS(initial_field(c, InitialData::custom_file), ConfigError);
}

TEST_CASE("single runs on a small grid") {
  SUBCASE("gap cell keeps its trajectory and is labelled open_gap") {
    const PhaseCell cell = run_single(small_config(-0.5, 1.4));
    CHECK(cell.regime == Regime::gap);
    CHECK(cell.verdict == PhaseVerdict::open_gap);
    CHECK_FALSE(cell.history.empty());
    CHECK(cell.t_final > 0.0);
    CHECK_FALSE(cell.budget.has_value());
  }
  SUBCASE("small data above the critical exponent is certified") {
    const PhaseCell cell = run_single(small_config(0.0, 2.0));
    CHECK(cell.regime == Regime::global);
    CHECK(cell.data_used == InitialData::profile_Q_decay);
    REQUIRE(cell.budget.has_value());
    CHECK(cell.lambda_used == cell.budget->lambda_scale);
    REQUIRE(cell.certification.has_value());
    CHECK(cell.verdict == PhaseVerdict::global_certified);
  }
  SUBCASE("an explicit lambda far above the budget loses the certificate") {
    RunConfig c = small_config(0.0, 2.0);
    c.lambda_scale = 40.0;
    const PhaseCell cell = run_single(c);
    CHECK(cell.verdict != PhaseVerdict::global_certified);
  }
  SUBCASE("subcritical cell reaching the horizon is uncertified, not global") {
    RunConfig c = small_config(0.0, 1.3);
    c.bump_amplitude = 0.01;
    const PhaseCell cell = run_single(c);
    CHECK(cell.verdict == PhaseVerdict::global_uncertified);
    CHECK_FALSE(cell.certification.has_value());
  }
  SUBCASE("invalid config is rejected before any compute") {
    RunConfig c = small_config(0.0, 2.0);
    c.p = 0.5;
    CHECK_THROWS_AS(run_single(c), ConfigError);
  }
}

TEST_CASE("manifests are deterministic and land in the run directory") {
  RunConfig c = small_config(0.0, 1.3);
  c.snapshot_times = {0.5, 1.0};
  const auto root = std::filesystem::temp_directory_path() / "hhp_cli_manifest";
  std::filesystem::remove_all(root);
  const PhaseCell a = run_single(c, root / "a");
  const PhaseCell b = run_single(c, root / "b");
  const auto slurp = [](const std::filesystem::path& f) {
    std::ifstream is(f);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  const std::string ma = slurp(root / "a" / "manifest.json");
  CHECK_FALSE(ma.empty());
  CHECK(ma == slurp(root / "b" / "manifest.json"));
  CHECK(ma == manifest_json(c, a));
  CHECK(ma.find("\"verdict\"") != std::string::npos);
  CHECK(ma.find("\"config_hash\": \"" + c.hash() + "\"") != std::string::npos);
  CHECK(std::filesystem::exists(root / "a" / "snapshot_00.txt"));
  CHECK(std::filesystem::exists(root / "a" / "snapshot_01.txt"));
  CHECK(slurp(root / "a" / "snapshot_01.txt") == slurp(root / "b" / "snapshot_01.txt"));
  (void)b;

  const auto dir = make_run_dir(root, c);
  CHECK(std::filesystem::is_directory(dir));
  const std::string name = dir.filename().string();
  CHECK(name.size() == 15 + 1 + 8);
  CHECK(name.substr(16) == c.hash().substr(0, 8));
}

TEST_CASE("sweeps, CSV and plot data") {
  RunConfig c = small_config(0.0, 2.0);
  c.gamma_values = {0.0, -0.5, 1.0};
  c.p_values = {1.4, 2.0};
  c.workers = 2;
  const auto cells = run_sweep(c);
  REQUIRE(cells.size() == 6);
  CHECK(cells[0].gamma == 0.0);
  CHECK(cells[0].p == 1.4);
  CHECK(cells[1].p == 2.0);
  CHECK(cells[2].gamma == -0.5);
  CHECK(cells[2].verdict == PhaseVerdict::open_gap);

  std::ostringstream csv;
  write_sweep_csv(csv, cells);
  const std::string text = csv.str();
  CHECK(text.rfind("p,gamma,p_c,hardy_threshold,verdict,t_final,max_norm\n", 0) == 0);
  CHECK(count_lines(text) == 7);
  // The Hardy threshold column stays empty for gamma > 0.
  CHECK(text.find("\n1.4,1,1.75,,") != std::string::npos);

  c.workers = 1;
  std::ostringstream csv1;
  write_sweep_csv(csv1, run_sweep(c));
  CHECK(csv1.str() == text);

  std::ostringstream data, summary;
  emit_plotdata(data, summary, cells);
  CHECK(count_lines(data.str()) == 2 + cells.size());
  CHECK(data.str().find("0 blowup, 1 global_certified") != std::string::npos);
  CHECK(summary.str().find("\"cells\": 6") != std::string::npos);

  std::ostringstream one, one_summary;
  emit_plotdata(one, one_summary, {cells.front()});
  CHECK(count_lines(one.str()) == 3);

  std::ostringstream sink;
  CHECK_THROWS_AS(emit_plotdata(sink, sink, {}), ArgumentError);

  RunConfig empty = c;
  empty.p_values.clear();
  CHECK_THROWS_AS(run_sweep(empty), ConfigError);
}

TEST_CASE("a failing cell is recorded as inconclusive without aborting the sweep") {
  RunConfig c = small_config(0.0, 2.0);
  c.initial_data = InitialData::custom_file;
  c.custom_file = "/nonexistent/field.txt";
  c.gamma_values = {0.0};
  c.p_values = {1.3, 2.0};
  const auto cells = run_sweep(c);
  REQUIRE(cells.size() == 2);
  for (const auto& cell : cells) {
    CHECK(cell.verdict == PhaseVerdict::inconclusive);
    CHECK(cell.note.find("cell failed") != std::string::npos);
  }
}

TEST_CASE("check rows serialize") {
  std::ostringstream os;
  write_check_csv(os, {{"scaling", "t=4", 1e-9, 1e-6, true}});
  CHECK(os.str() == "check,detail,value,limit,verdict\nscaling,\"t=4\",1e-09,1e-06,pass\n");
}
