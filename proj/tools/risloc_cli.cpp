/**
 * @file risloc_cli.cpp
 * @brief Command-line driver: bound sweeps, Monte Carlo runs, codebook
 * export, power allocation, observation synthesis and one-shot estimation.
 */
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "risloc/harness.hpp"

using nlohmann::json;
using namespace risloc;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("invalid_json", "'" + path + "': " + e.what());
  }
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw Error("io", "cannot write '" + out_path + "'");
  out << text;
}

json allocation_json(const AllocationResult& a) {
  return {{"powers", std::vector<double>(a.powers.data(), a.powers.data() + a.powers.size())},
          {"worst_case_bound", a.worst_case},
          {"uniform_worst_case_bound", a.uniform_worst_case},
          {"iterations", a.iterations}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RIS-aided localization and synchronization: bounds, codebooks and estimators"};
  app.require_subcommand(1);
  std::string config_path, out_path, preset = "desk";
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON configuration overlaid on the preset");
  app.add_option("--seed", seed, "Experiment seed (overrides the configuration)");
  app.add_option("--out", out_path, "Output file (stdout when omitted)");
  app.add_option("--preset", preset, "Base profile")->check(CLI::IsMember({"desk", "paper"}));

  auto* bounds = app.add_subcommand("bounds", "PEB/CEB versus SNR for the configured codebook");
  auto* mc = app.add_subcommand("montecarlo", "Monte Carlo RMSE of the estimators versus SNR");
  auto* codebook = app.add_subcommand("codebook", "Emit the configured codebook as JSON");
  auto* allocate = app.add_subcommand("allocate", "Optimize beam powers only");
  std::string metric = "peb";
  allocate->add_option("--metric", metric, "Bound to minimize")->check(CLI::IsMember({"peb", "ceb"}));
  auto* simulate = app.add_subcommand("simulate", "Write one noisy observation file");
  double snr_db = 0.0;
  int trial = 0;
  simulate->add_option("--snr", snr_db, "SNR in dB");
  simulate->add_option("--trial", trial, "Trial index");
  auto* estimate = app.add_subcommand("estimate", "Estimate position and clock offset from an observation file");
  std::string obs_path;
  estimate->add_option("--obs", obs_path, "Observation JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    json user = config_path.empty() ? json::object() : read_json_file(config_path);
    if (seed) user["seed"] = *seed;
    ExperimentConfig cfg = load_config(preset, user);
    if (out_path.empty() && !cfg.output_path.empty()) out_path = cfg.output_path;

    if (*bounds) {
      emit(bounds_csv(run_bounds_sweep(cfg)), out_path);
    } else if (*mc) {
      emit(results_csv(run_monte_carlo(cfg)), out_path);
    } else if (*codebook) {
      const BuiltCodebook built = build_codebook(cfg);
      json doc = codebook_to_json(built.codebook);
      if (built.allocation) doc["metadata"]["allocation"] = allocation_json(*built.allocation);
      emit(doc.dump(2) + "\n", out_path);
    } else if (*allocate) {
      ExperimentConfig c = cfg;
      c.allocation_metric = "none";
      if (c.codebook_kind == "directional_uniform") c.codebook_kind = "directional_optimized";
      Codebook cb = build_codebook(c).codebook;
      const AllocationResult res =
          allocate_power(cb, cfg.region.grid_points(), cfg.scenario, parse_metric(metric), cfg.allocation);
      json doc = allocation_json(res);
      doc["metric"] = metric;
      doc["codebook_kind"] = c.codebook_kind;
      emit(doc.dump(2) + "\n", out_path);
    } else if (*simulate) {
      emit(simulate_observation(cfg, snr_db, trial).dump() + "\n", out_path);
    } else if (*estimate) {
      emit(estimate_from_document(cfg, read_json_file(obs_path)).dump(2) + "\n", out_path);
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", {{"type", e.category()}, {"message", e.what()}}}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"type", "internal"}, {"message", e.what()}}}}.dump() << "\n";
    return 3;
  }
  return 0;
}
