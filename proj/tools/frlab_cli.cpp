// frlab: run sweeps, presets, bound tables and the acceptance suite.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "frlab/acceptance.hpp"
#include "frlab/errors.hpp"
#include "frlab/experiments.hpp"

namespace fs = std::filesystem;
using namespace frlab;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
}

void run_and_emit(const ExperimentConfig& config, const fs::path& out_dir, unsigned threads) {
  const auto start = std::chrono::steady_clock::now();
  const SweepResult result = run_sweep(config, RunOptions{threads});
  emit_csv(result, out_dir / "sweep.csv");
  emit_bounds_csv(result.bounds, out_dir / "bounds.csv");
  if (!result.rows.empty()) {
    PlotOptions plot;
    plot.title = to_string(config.design);
    emit_svg_plot(result, out_dir / "sweep.svg", plot);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "wrote " << result.rows.size() << " rows to " << (out_dir / "sweep.csv").string() << " in " << secs
            << " s\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Factor-model interpolation laboratory"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  app.add_option("--seed", seed, "Override master_seed");
  app.add_option("--threads", threads, "Cap on worker threads (results do not depend on it)");

  std::string config_path, out_dir, preset_name;
  double scale = 1.0;
  std::optional<int> replicates;
  bool config_only = false;
  std::vector<int> only;

  auto* sweep = app.add_subcommand("sweep", "Run a sweep from a JSON config");
  sweep->add_option("--config", config_path, "Config file")->required();
  sweep->add_option("--out", out_dir, "Output directory (defaults to the config's output_dir)");

  auto* pre = app.add_subcommand("preset", "Run one of the built-in figure designs");
  pre->add_option("design", preset_name, "figure1, figure2, figure4 or nullrisk")->required();
  pre->add_option("--scale", scale, "Shrink n and p by about this fraction")->check(CLI::Range(1e-6, 1.0));
  pre->add_option("--out", out_dir, "Output directory");
  pre->add_option("--replicates", replicates, "Override the replicate count")->check(CLI::NonNegativeNumber);
  pre->add_flag("--config-only", config_only, "Write config.json without running");

  auto* bnd = app.add_subcommand("bounds", "Tabulate bound reports for every grid point");
  bnd->add_option("--config", config_path, "Config file")->required();
  bnd->add_option("--out", out_dir, "Output directory (defaults to the config's output_dir)");

  auto* chk = app.add_subcommand("check", "Run the acceptance suite");
  chk->add_option("--only", only, "Criterion ids to run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sweep || *bnd) {
      ExperimentConfig config = load_config(config_path);
      if (seed) config.master_seed = *seed;
      const fs::path dir = out_dir.empty() ? fs::path(config.output_dir) : fs::path(out_dir);
      if (*sweep) {
        run_and_emit(config, dir, threads);
      } else {
        const auto rows = compute_bounds(config, RunOptions{threads});
        emit_bounds_csv(rows, dir / "bounds.csv");
        std::cout << "wrote " << rows.size() << " bound rows to " << (dir / "bounds.csv").string() << "\n";
      }
      return 0;
    }
    if (*pre) {
      const auto design = parse_design(preset_name);
      if (!design || *design == Design::Custom) {
        throw ConfigError("unknown preset '" + preset_name + "'; expected figure1, figure2, figure4 or nullrisk");
      }
      ExperimentConfig config = preset(*design, scale);
      if (seed) config.master_seed = *seed;
      if (replicates) config.replicates = *replicates;
      const fs::path dir = out_dir.empty() ? fs::path(config.output_dir) : fs::path(out_dir);
      config.output_dir = dir.string();
      write_text(dir / "config.json", config_to_json(config));
      if (!config_only) run_and_emit(config, dir, threads);
      return 0;
    }
    if (*chk) {
      AcceptanceOptions opts;
      opts.only = only;
      opts.threads = threads;
      const auto results = run_acceptance(opts, [](const CriterionResult& r) {
        std::cout << format_result_line(r) << std::endl;
      });
      int failed = 0;
      for (const auto& r : results) failed += r.passed ? 0 : 1;
      std::cout << (results.size() - failed) << "/" << results.size() << " criteria passed\n";
      return failed == 0 ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
