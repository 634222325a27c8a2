/**
 * @file harness.hpp
 * @brief Experiment configuration, bound sweeps, Monte Carlo driver,
 * uncontrolled-multipath injection and CSV reporting.
 */
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "risloc/beamforming.hpp"
#include "risloc/estimation.hpp"

namespace risloc {

struct MultipathConfig {
  bool enabled = false;
  std::vector<Vec2> scatterers{Vec2(2.0, 7.0), Vec2(6.0, 2.0)};
  double gamma = 0.7;
  /// The uncontrolled paths are driven by the transmit power of this SNR
  /// regardless of the swept SNR; unset means they share the swept power.
  std::optional<double> reference_snr_db = -15.0;
};

struct ExperimentConfig {
  Scenario scenario;
  UncertaintyRegion region;
  std::string codebook_kind = "proposed_reduced_g";
  std::string allocation_metric = "none";
  std::vector<double> snr_grid{-10.0, -5.0, 0.0, 5.0, 10.0};
  int trials = 100;
  std::uint64_t seed = 1;
  int workers = 0;  ///< 0 selects the hardware concurrency
  MultipathConfig multipath;
  SearchConfig search;
  AllocationOptions allocation;
  std::string output_path;

  void validate() const;
};

/// Full JSON document of a named preset ("desk" or "paper").
nlohmann::json preset_document(const std::string& name);
/// Overlays `patch` on `base`; any key of `patch` absent from `base` is an error.
nlohmann::json merge_strict(const nlohmann::json& base, const nlohmann::json& patch,
                            const std::string& path = "");
/// Parses a complete document (as produced by preset_document).
ExperimentConfig config_from_json(const nlohmann::json& doc);
/// Preset overlaid with an optional user document.
ExperimentConfig load_config(const std::string& preset, const nlohmann::json& user = nlohmann::json::object());

/// P = sigma^2 10^(snr/10) / rho_bu^2.
double snr_to_power(double snr_db, const Scenario& scenario);
double power_to_snr(double power, const Scenario& scenario);

/// Sum over scatterers of single-bounce BS -> scatterer -> UE rays with
/// amplitude Gamma lambda / (4 pi (|m| + |m - p|)), uniform random phase,
/// delay (|m| + |m - p|)/c + delta and BS AoD towards the scatterer, driven
/// by transmit power `power`.
CMat multipath_signal(const Scenario& scenario, const Codebook& codebook, const CMat& symbols,
                      const std::vector<Vec2>& scatterers, double gamma, double power,
                      std::uint64_t seed);
/// m_clean plus multipath_signal.
CMat inject_multipath(const CMat& m_clean, const Scenario& scenario, const Codebook& codebook,
                      const CMat& symbols, const std::vector<Vec2>& scatterers, double gamma,
                      double power, std::uint64_t seed);
/// LoS-to-multipath power ratio in dB for the given transmit powers.
double lmr_db(const Scenario& scenario, double los_power, double nlos_power,
              const std::vector<Vec2>& scatterers, double gamma);

struct BuiltCodebook {
  Codebook codebook;
  std::optional<AllocationResult> allocation;
};
/// Codebook of the configured kind, with powers optimized when requested.
BuiltCodebook build_codebook(const ExperimentConfig& config);

struct BoundsRow {
  double snr_db = 0;
  double peb = 0;
  double ceb = 0;
  double worst_case_peb = 0;
  double worst_case_ceb = 0;
};
std::vector<BoundsRow> run_bounds_sweep(const ExperimentConfig& config);

struct ResultRow {
  double snr_db = 0;
  double rmse_pos_rml = 0, rmse_pos_jml = 0;
  double rmse_clock_rml = 0, rmse_clock_jml = 0;
  double peb = 0, ceb = 0;
  int trials_used = 0;
  int failures = 0;
};
std::vector<ResultRow> run_monte_carlo(const ExperimentConfig& config);

std::string bounds_csv(const std::vector<BoundsRow>& rows);
std::string results_csv(const std::vector<ResultRow>& rows);

/// Observation file for one trial at one SNR: samples, pilots, power and the
/// ground truth used to produce them.
nlohmann::json simulate_observation(const ExperimentConfig& config, double snr_db, int trial);
/// Runs the estimation pipeline on an observation document.
nlohmann::json estimate_from_document(const ExperimentConfig& config, const nlohmann::json& obs_doc);

}  // namespace risloc
