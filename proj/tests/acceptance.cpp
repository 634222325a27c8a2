// Acceptance suite: evaluates every acceptance criterion and prints one
// [PASS]/[FAIL] line per criterion.
//
// Usage: acceptance <path-to-risloc-cli> [--report-only]
// Exit status is the number of failing criteria, or 0 with --report-only
// once every criterion has been evaluated and reported.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "risloc/estimation.hpp"
#include "risloc/harness.hpp"
#include "support.hpp"

using namespace risloc;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// C1: closed-form channel FIM against exact summation.
Outcome fim_equivalence() {
  std::mt19937_64 rng(101);
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    const Scenario sc = testing::small_scenario(rng, 4, 6, 8);
    const ChannelParams g = geo_to_channel(sc);
    const Codebook cb = testing::random_codebook(4, 6, 3, rng);
    const CMat s = testing::unit_symbols(3, 8, rng);
    worst = std::max(worst, testing::normalized_fim_error(channel_fim_closed_form(g, cb, sc),
                                                          channel_fim_exact(g, cb, s, sc)));
  }
  return {worst < 1e-9, "max normalized entry error " + fmt("%.2e", worst) + " over 50 instances"};
}

// C2: signal partials and transform rows against central differences.
Outcome derivative_correctness() {
  std::mt19937_64 rng(202);
  double d_worst = 0, t_worst = 0;
  for (int t = 0; t < 20; ++t) {
    Scenario sc = testing::small_scenario(rng, 4, 6, 8);
    const ChannelParams g = geo_to_channel(sc);
    const Codebook cb = testing::random_codebook(4, 6, 3, rng);
    const CMat s = testing::unit_symbols(3, 8, rng);
    d_worst = std::max(d_worst, testing::derivative_error(g, cb, s, sc));
    t_worst = std::max(t_worst, testing::transform_error(location_params(sc, g), sc.r, sc.q));
  }
  return {d_worst < 1e-5 && t_worst < 1e-5,
          "signal partials " + fmt("%.2e", d_worst) + ", transform rows " + fmt("%.2e", t_worst)};
}

// C3: projecting the covariances onto the steering spans leaves the FIM unchanged.
Outcome structural_invariance() {
  std::mt19937_64 rng(303);
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    const Scenario sc = testing::small_scenario(rng, 6, 8, 8);
    const ChannelParams g = geo_to_channel(sc);
    const Codebook cb = testing::random_codebook(6, 8, 3, rng);
    CMat a(sc.n_bs, 3);
    a << steering_bs(g.theta_bu, sc.n_bs).conjugate(),
        derivative_steering_bs(g.theta_bu, sc.n_bs).conjugate(),
        steering_bs(g.theta_br, sc.n_bs).conjugate();
    CMat b(sc.n_ris, 2);
    b << combined_ris_steering(g.theta_ru, g.phi_br, sc.n_ris).conjugate(),
        derivative_combined(g.theta_ru, g.phi_br, sc.n_ris).conjugate();
    const CMat pa = a * (a.adjoint() * a).inverse() * a.adjoint();
    const CMat pb = b * (b.adjoint() * b).inverse() * b.adjoint();
    auto covs = codebook_covariances(cb);
    const Mat8 full = channel_fim_from_covariances(g, covs, sc);
    const Mat8 diag = channel_fim_from_covariances(g, covs, sc, true);
    for (auto& c : covs) c.x = pa * c.x * pa;
    worst = std::max(worst, testing::normalized_fim_error(channel_fim_from_covariances(g, covs, sc), full));
    for (auto& c : covs) c.psi = pb * c.psi * pb;
    worst = std::max(worst, testing::normalized_fim_error(channel_fim_from_covariances(g, covs, sc, true), diag));
  }
  return {worst < 1e-9, "max normalized entry change " + fmt("%.2e", worst)};
}

// C4: allocation optimality on the toy instance and against uniform powers.
Outcome allocation_optimality() {
  std::mt19937_64 rng(404);
  Scenario sc = testing::small_scenario(rng, 4, 4, 8);
  const Codebook toy = testing::random_codebook(4, 4, 3, rng);
  const AllocationProblem prob(toy, {sc.p, sc.p + Vec2(0.3, 0.2)}, sc, BoundMetric::kPeb);
  const double solver = allocate_power(prob).worst_case;
  double brute = std::numeric_limits<double>::infinity();
  RVec rho(3);
  for (int a = 0; a <= 100; ++a)
    for (int b = 0; a + b <= 100; ++b) {
      rho << a / 100.0, b / 100.0, (100 - a - b) / 100.0;
      const double v = prob.squared_bounds(rho).maxCoeff();
      if (std::isfinite(v)) brute = std::min(brute, std::sqrt(v));
    }
  int wins = 0;
  for (int t = 0; t < 20; ++t) {
    const Scenario s2 = testing::small_scenario(rng, 4, 4, 8);
    const Codebook cb = testing::random_codebook(4, 4, 6, rng);
    const AllocationResult r =
        allocate_power(cb, {s2.p, s2.p + Vec2(0.4, 0.1), s2.p - Vec2(0.2, 0.3)}, s2, BoundMetric::kPeb);
    if (r.worst_case <= r.uniform_worst_case * (1 + 1e-12)) ++wins;
  }
  const bool ok = solver <= 1.01 * brute && wins == 20;
  return {ok, "toy solver/brute-force " + fmt("%.5f", solver / brute) + ", optimized <= uniform in " +
                  std::to_string(wins) + "/20"};
}

double worst_case_for(const std::string& kind, const std::string& metric) {
  ExperimentConfig cfg = load_config("desk");
  cfg.codebook_kind = kind;
  cfg.allocation_metric = metric;
  const Codebook cb = build_codebook(cfg).codebook;
  return worst_case_bound(cb, cfg.region.grid_points(), cfg.scenario, BoundMetric::kPeb);
}

// C5: codebook ordering on the reference geometry at desk scale.
Outcome codebook_ordering() {
  const double prop = worst_case_for("proposed", "peb");
  const double dir_opt = worst_case_for("directional_optimized", "peb");
  const double dir_uni = worst_case_for("directional_uniform", "none");
  const double dft = worst_case_for("dft_optimized", "peb");
  const auto le = [](double a, double b) { return a <= b * (1 + 1e-9); };
  const bool ok = le(prop, dir_opt) && le(dir_opt, dir_uni) && le(prop, dft);
  std::ostringstream os;
  os << "worst-case PEB [m] proposed-opt " << fmt("%.4f", prop) << ", directional-opt "
     << fmt("%.4f", dir_opt) << ", directional-uniform " << fmt("%.4f", dir_uni) << ", DFT-opt "
     << fmt("%.4f", dft);
  return {ok, os.str()};
}

// C6: PEB-driven and CEB-driven allocations give matching bounds.
Outcome metric_agreement() {
  const ExperimentConfig cfg = load_config("desk");
  const Codebook base = build_codebook(cfg).codebook;
  const auto pts = cfg.region.grid_points();
  double peb[2], ceb[2];
  int i = 0;
  for (BoundMetric m : {BoundMetric::kPeb, BoundMetric::kCeb}) {
    Codebook cb = base;
    cb.powers = allocate_power(cb, pts, cfg.scenario, m, cfg.allocation).powers;
    peb[i] = worst_case_bound(cb, pts, cfg.scenario, BoundMetric::kPeb);
    ceb[i] = worst_case_bound(cb, pts, cfg.scenario, BoundMetric::kCeb);
    ++i;
  }
  const double dp = std::abs(peb[0] - peb[1]) / std::min(peb[0], peb[1]);
  const double dc = std::abs(ceb[0] - ceb[1]) / std::min(ceb[0], ceb[1]);
  return {dp <= 0.10 && dc <= 0.10, "relative gap PEB " + fmt("%.4f", dp) + ", CEB " + fmt("%.4f", dc)};
}

// C7: noiseless recovery. On-lattice truth must be hit exactly by both grid
// searches; an off-lattice truth exercises the pipeline refinement.
Outcome estimator_consistency() {
  ExperimentConfig cfg = load_config("desk");
  const Codebook cb = build_codebook(cfg).codebook;
  const auto instance = [&](const Vec2& p, double delta) {
    Scenario sc = cfg.scenario;
    sc.p = p;
    sc.delta = delta;
    sc.power = snr_to_power(0.0, sc);
    KnownModel known{sc, cb, random_symbols(cb.size(), sc.n_sub, 7)};
    ObservationSet obs{noiseless_signal(sc, geo_to_channel(sc), cb, known.symbols), known.symbols, 7};
    return std::make_pair(known, obs);
  };
  const Vec2 p_on(cfg.search.axis(0)[12], cfg.search.axis(1)[20]);
  const double d_on = cfg.search.delta_axis()[8];
  const auto [known, obs] = instance(p_on, d_on);
  const Estimate j = jml_grid3d(obs, known, cfg.search);
  const Vec2 r = rml_grid2d(obs, known, cfg.search);
  const bool jml_ok = j.p_hat == p_on && j.delta_hat == d_on;
  const bool rml_ok = r == p_on;

  const double cell = cfg.search.axis(0)[1] - cfg.search.axis(0)[0];
  const double dcell = cfg.search.delta_axis()[1] - cfg.search.delta_axis()[0];
  const auto [known_off, obs_off] = instance(p_on + Vec2(0.37 * cell, -0.41 * cell), d_on + 0.33 * dcell);
  const Estimate e = estimate_pipeline(obs_off, known_off, cfg.search);
  const double init = jml_cost(e.p_coarse, e.delta_coarse, obs_off, known_off).cost;
  const double energy = obs_off.y.squaredNorm();
  const bool ok = jml_ok && rml_ok && e.jml_cost < 1e-6 * energy;
  return {ok, std::string("JML lattice ") + (jml_ok ? "exact" : "missed") + ", RML lattice " +
                  (rml_ok ? "exact" : "missed") + ", off-lattice cost/energy " + fmt("%.2e", init / energy) +
                  " coarse -> " + fmt("%.2e", e.jml_cost / energy) + " refined"};
}

// C8: bound attainment on the reduced-G desk profile.
Outcome bound_attainment(std::vector<ResultRow>* clean_rows) {
  ExperimentConfig cfg = load_config("desk");
  cfg.snr_grid = {0.0, 10.0};
  const auto rows = run_monte_carlo(cfg);
  *clean_rows = rows;
  const double f[2] = {1.5, 1.2};
  bool ok = true;
  std::ostringstream os;
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    ok = ok && r.rmse_pos_jml <= f[i] * r.peb && r.rmse_clock_jml <= f[i] * r.ceb;
    os << (i ? "; " : "") << fmt("%+.0f dB: ", r.snr_db) << "RMSE(p) " << fmt("%.3g", r.rmse_pos_jml)
       << " m vs PEB " << fmt("%.3g", r.peb) << " m, RMSE(clock) " << fmt("%.3g", r.rmse_clock_jml)
       << " s vs CEB " << fmt("%.3g", r.ceb) << " s, failures " << r.failures;
  }
  return {ok, os.str()};
}

// C9: FFT delay estimation.
Outcome fft_delay_accuracy() {
  const int n = 64, nf = 512;
  const double T = 1e-8;
  bool on_bin = true;
  for (int k = 0; k <= nf / 2; ++k) {
    const double tau = k * n * T / nf;
    on_bin = on_bin && std::abs(fft_delay(freq_steering(tau, n, T), nf, T) - tau) <= 1e-12 * n * T;
  }
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(0.0, 0.5 * n * T);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const double tau = u(rng);
    worst = std::max(worst, std::abs(fft_delay(freq_steering(tau, n, T), nf, T) - tau));
  }
  const double half_bin = n * T / (2.0 * nf);
  return {on_bin && worst <= half_bin,
          std::string("on-bin ") + (on_bin ? "exact" : "inexact") + ", off-bin worst/half-bin " +
              fmt("%.4f", worst / half_bin)};
}

// C10: robustness to two uncontrolled scatterers.
Outcome multipath_robustness(const std::vector<ResultRow>& clean_rows) {
  ExperimentConfig cfg = load_config("desk");
  cfg.snr_grid = {10.0};
  cfg.multipath.enabled = true;
  const auto rows = run_monte_carlo(cfg);
  const ResultRow& mp = rows[0];
  const ResultRow& clean = clean_rows[1];
  const double ratio = mp.rmse_pos_jml / clean.rmse_pos_jml;
  const bool ok = ratio < 1.25 && mp.failures <= clean.failures;
  return {ok, "+10 dB RMSE(p) with/without multipath " + fmt("%.4f", ratio) + ", failures " +
                  std::to_string(mp.failures) + " vs " + std::to_string(clean.failures)};
}

// C11: reduced-G against full-G, both with optimized powers.
Outcome reduced_tradeoff() {
  ExperimentConfig cfg = load_config("desk");
  cfg.allocation_metric = "peb";
  cfg.codebook_kind = "proposed";
  const Codebook full = build_codebook(cfg).codebook;
  cfg.codebook_kind = "proposed_reduced_g";
  const Codebook red = build_codebook(cfg).codebook;
  int never_better = 0;
  double max_ratio = 0, min_ratio = std::numeric_limits<double>::infinity();
  const auto pts = cfg.region.grid_points();
  for (const Vec2& p : pts) {
    Scenario sc = cfg.scenario;
    sc.p = p;
    const double ratio = scenario_bundle(sc, red).peb() / scenario_bundle(sc, full).peb();
    if (ratio >= 1.0) ++never_better;
    max_ratio = std::max(max_ratio, ratio);
    min_ratio = std::min(min_ratio, ratio);
  }
  const bool ok = never_better == static_cast<int>(pts.size()) && max_ratio <= 3.0;
  return {ok, "PEB(reduced)/PEB(full) over " + std::to_string(pts.size()) + " region points in [" +
                  fmt("%.4f", min_ratio) + ", " + fmt("%.4f", max_ratio) + "], reduced >= full at " +
                  std::to_string(never_better)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// C12: byte-identical CLI outputs across repeated runs.
Outcome determinism(const std::string& cli) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("risloc_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "config.json");
    cfg << R"({"trials": 3, "snr_grid": [0.0, 10.0]})";
  }
  const std::string base = "\"" + cli + "\" --preset desk --config \"" + (dir / "config.json").string() + "\"";
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"bounds", "bounds"},
      {"montecarlo", "montecarlo"},
      {"codebook", "codebook"},
      {"allocate", "allocate --metric ceb"},
      {"simulate", "simulate --snr 5 --trial 2"},
  };
  int same = 0, total = 0;
  std::string bad;
  for (const auto& [name, args] : runs) {
    std::string out[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path file = dir / (name + std::to_string(k));
      const std::string cmd = base + " --out \"" + file.string() + "\" " + args + " 2>/dev/null";
      if (std::system(cmd.c_str()) != 0) out[k] = "<exit failure " + std::to_string(k) + ">";
      else out[k] = slurp(file);
    }
    ++total;
    if (out[0] == out[1] && !out[0].empty() && out[0][0] != '<') ++same;
    else bad += " " + name;
  }
  std::string est[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path file = dir / ("estimate" + std::to_string(k));
    const std::string cmd = base + " --out \"" + file.string() + "\" estimate --obs \"" +
                            (dir / "simulate0").string() + "\" 2>/dev/null";
    est[k] = std::system(cmd.c_str()) == 0 ? slurp(file) : "<exit failure>";
  }
  ++total;
  if (est[0] == est[1] && !est[0].empty() && est[0][0] != '<') ++same;
  else bad += " estimate";
  fs::remove_all(dir);
  return {same == total, std::to_string(same) + "/" + std::to_string(total) + " subcommands byte-identical" +
                             (bad.empty() ? "" : " (differing:" + bad + ")")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <risloc-cli> [--report-only]\n";
    return 2;
  }
  const std::string cli = argv[1];
  const bool report_only = argc > 2 && std::string(argv[2]) == "--report-only";

  std::vector<ResultRow> clean_rows;
  struct Criterion {
    const char* name;
    double limit_s;  ///< runtime limit, 0 when none is set
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"C1 FIM closed form equals exact summation", 10, fim_equivalence},
      {"C2 derivatives match finite differences", 5, derivative_correctness},
      {"C3 FIM invariant to steering-span projection", 0, structural_invariance},
      {"C4 power allocation optimality", 60, allocation_optimality},
      {"C5 codebook ordering", 0, codebook_ordering},
      {"C6 PEB- and CEB-driven allocations agree", 0, metric_agreement},
      {"C7 estimator consistency on noiseless data", 30, estimator_consistency},
      {"C8 bound attainment", 900, [&] { return bound_attainment(&clean_rows); }},
      {"C9 FFT delay accuracy", 5, fft_delay_accuracy},
      {"C10 multipath robustness", 0, [&] { return multipath_robustness(clean_rows); }},
      {"C11 reduced-G trade-off", 0, reduced_tradeoff},
      {"C12 CLI determinism", 0, [&] { return determinism(cli); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double dt = seconds_since(t0);
    if (c.limit_s > 0 && dt > c.limit_s) {
      o.pass = false;
      o.detail += "; runtime limit exceeded";
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << o.detail << " ("
              << fmt("%.2f", dt) << " s)" << std::endl;
  }
  std::cout << (criteria.size() - static_cast<size_t>(failures)) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return report_only ? 0 : failures;
}
