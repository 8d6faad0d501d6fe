// hhp: command-line front end for runs, sweeps and the check suites.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hhp/cli.hpp"
#include "hhp/errors.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> overrides;
};

void add_config_flags(CLI::App* app, ConfigFlags& flags) {
  app->add_option("-c,--config", flags.config_file, "key = value configuration file")->check(CLI::ExistingFile);
  for (const auto& key : hhp::RunConfig::keys())
    app->add_option("--" + key, flags.overrides[key], "override for config key " + key);
}

hhp::RunConfig resolve_config(const ConfigFlags& flags, CLI::App* app) {
  hhp::RunConfig cfg = flags.config_file.empty() ? hhp::RunConfig{} : hhp::load_config(flags.config_file);
  for (const auto& key : hhp::RunConfig::keys())
    if (app->count("--" + key) > 0) cfg.set(key, flags.overrides.at(key));
  cfg.validate();
  return cfg;
}

void write_config_echo(const fs::path& dir, const hhp::RunConfig& cfg) {
  std::ofstream os(dir / "config.txt");
  for (const auto& [k, v] : cfg.key_values()) os << k << " = " << v << '\n';
}

int report_checks(const std::vector<hhp::CheckRow>& rows, const fs::path& file) {
  std::ofstream os(file);
  hhp::write_check_csv(os, rows);
  bool all = true;
  for (const auto& r : rows) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " [" << r.detail << "] value " << r.value << " limit "
              << r.limit << '\n';
    all = all && r.pass;
  }
  std::cout << "written " << file.string() << '\n';
  return all ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hardy-Henon parabolic equation on the Heisenberg group"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string out_root = "runs";
  app.add_option("-o,--out", out_root, "root directory for run directories");

  ConfigFlags run_flags, sweep_flags;
  auto* run = app.add_subcommand("run", "evolve one (p, gamma) cell and write its manifest");
  add_config_flags(run, run_flags);
  auto* sweep = app.add_subcommand("sweep", "phase-diagram sweep over p_values x gamma_values");
  add_config_flags(sweep, sweep_flags);

  std::uint64_t seed = 0;
  int trials = 10000;
  auto* kernel = app.add_subcommand("kernel-check", "normalization, scaling, envelope and residual checks");
  kernel->add_option("--seed", seed, "sample seed");
  auto* diagnose = app.add_subcommand("diagnose", "decay-rate and blow-up functional fits");
  auto* oracle = app.add_subcommand("oracle", "rearrangement and reverse Hoelder suites");
  oracle->add_option("--seed", seed, "random trial seed");
  oracle->add_option("--trials", trials, "reverse Hoelder trials per p")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      const hhp::RunConfig cfg = resolve_config(run_flags, run);
      const fs::path dir = hhp::make_run_dir(out_root, cfg);
      write_config_echo(dir, cfg);
      const hhp::PhaseCell cell = hhp::run_single(cfg, dir);
      std::cout << "gamma " << cell.gamma << " p " << cell.p << " regime " << hhp::to_string(cell.regime)
                << " verdict " << hhp::to_string(cell.verdict) << " t_final " << cell.t_final << " max_norm "
                << cell.max_norm << '\n'
                << "written " << dir.string() << '\n';
      return 0;
    }
    if (*sweep) {
      const hhp::RunConfig cfg = resolve_config(sweep_flags, sweep);
      const fs::path dir = hhp::make_run_dir(out_root, cfg);
      write_config_echo(dir, cfg);
      const auto cells = hhp::run_sweep(cfg);
      {
        std::ofstream csv(dir / "phase_diagram.csv");
        hhp::write_sweep_csv(csv, cells, cfg.n_heis);
        std::ofstream data(dir / "phase_diagram.dat"), summary(dir / "summary.json");
        hhp::emit_plotdata(data, summary, cells, cfg.n_heis);
      }
      fs::create_directories(dir / "cells");
      for (std::size_t i = 0; i < cells.size(); ++i) {
        hhp::RunConfig c = cfg;
        c.gamma = cells[i].gamma;
        c.p = cells[i].p;
        std::ofstream(dir / "cells" / ("cell_" + std::to_string(i) + ".json")) << hhp::manifest_json(c, cells[i]);
      }
      hhp::write_sweep_csv(std::cout, cells, cfg.n_heis);
      std::cout << "written " << dir.string() << '\n';
      return 0;
    }
    hhp::RunConfig tag;
    tag.seed = seed;
    if (*kernel) {
      const fs::path dir = hhp::make_run_dir(out_root, tag);
      return report_checks(hhp::kernel_check_suite(seed), dir / "kernel_check.csv");
    }
    if (*oracle) {
      const fs::path dir = hhp::make_run_dir(out_root, tag);
      return report_checks(hhp::oracle_suite(seed, trials), dir / "oracle.csv");
    }
    if (*diagnose) {
      const fs::path dir = hhp::make_run_dir(out_root, tag);
      const auto rows = hhp::diagnose_suite();
      std::ofstream os(dir / "diagnostics.csv");
      hhp::write_diagnostics_csv(os, rows);
      bool all = true;
      for (const auto& r : rows) {
        std::cout << r.verdict << ' ' << r.functional << " [" << r.parameters << "] fitted " << r.fitted
                  << " expected " << r.expected << " r2 " << r.r_squared << '\n';
        all = all && r.verdict == "pass";
      }
      std::cout << "written " << (dir / "diagnostics.csv").string() << '\n';
      return all ? 0 : kExitNumerical;
    }
  } catch (const hhp::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const hhp::ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
