/**
 * @file harness.cpp
 * @brief Configuration handling, bound sweeps, Monte Carlo trials and reporting.
 */
#include "risloc/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <thread>

namespace risloc {

using nlohmann::json;

namespace {

const std::vector<std::string> kCodebookKinds{"proposed", "proposed_reduced_g", "directional_uniform",
                                              "directional_optimized", "dft_optimized"};

Vec2 vec2_from(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) throw Error("invalid_config", what + " must be a 2-vector");
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

}  // namespace

void ExperimentConfig::validate() const {
  scenario.validate();
  region.validate();
  search.validate(scenario.n_sub);
  if (trials < 1) throw Error("invalid_config", "trials must be at least 1");
  if (snr_grid.empty()) throw Error("invalid_config", "snr_grid is empty");
  for (double s : snr_grid)
    if (!std::isfinite(s)) throw Error("invalid_config", "snr values must be finite");
  if (std::find(kCodebookKinds.begin(), kCodebookKinds.end(), codebook_kind) == kCodebookKinds.end())
    throw Error("invalid_config", "unknown codebook_kind '" + codebook_kind + "'");
  if (allocation_metric != "none") parse_metric(allocation_metric);
  if (multipath.enabled && !(multipath.gamma > 0 && multipath.gamma <= 1))
    throw Error("invalid_config", "multipath gamma must lie in (0, 1]");
  if (!(allocation.anneal > 0 && allocation.anneal < 1) || allocation.stage_window < 1 ||
      allocation.window < 1 || allocation.max_iter < 1 || !(allocation.stall_fraction > 0))
    throw Error("invalid_config", "allocation options out of range");
}

json preset_document(const std::string& name) {
  json doc = {
      {"scenario",
       {{"bs", {0.0, 0.0}},
        {"ris", {12.0, 7.0}},
        {"ue", {5.0, 5.0}},
        {"delta", nullptr},
        {"fc", 28e9},
        {"bandwidth", 1e8},
        {"n_sub", 64},
        {"n_bs", 8},
        {"n_ris", 16},
        {"noise_psd_dbm_hz", -174.0},
        {"seed", 1}}},
      {"region", {{"center", {5.0, 5.0}}, {"half_extent", {1.5, 1.5}}, {"grid_m", 9}}},
      {"codebook_kind", "proposed_reduced_g"},
      {"allocation_metric", "none"},
      {"snr_grid", {-10.0, -5.0, 0.0, 5.0, 10.0}},
      {"trials", 100},
      {"seed", 1},
      {"workers", 0},
      {"multipath",
       {{"enabled", false},
        {"scatterers", {{2.0, 7.0}, {6.0, 2.0}}},
        {"gamma", 0.7},
        {"reference_snr_db", -15.0}}},
      {"search",
       {{"q_grid", 31},
        {"q_delta", 17},
        {"delta_span", nullptr},
        {"n_fft", 512},
        {"refine", {{"max_iter", 400}, {"x_tol", 1e-5}, {"f_tol", 1e-15}, {"initial_step", 0.05}}}}},
      {"allocation",
       {{"rel_tol", 1e-6},
        {"window", 50},
        {"max_iter", 20000},
        {"anneal", 0.7},
        {"stage_window", 100},
        {"stall_fraction", 0.01}}},
      {"output_path", ""}};
  if (name == "desk") return doc;
  if (name == "paper") {
    doc["scenario"]["n_bs"] = 16;
    doc["scenario"]["n_ris"] = 32;
    doc["codebook_kind"] = "proposed";
    doc["allocation_metric"] = "peb";
    doc["trials"] = 1000;
    doc["snr_grid"] = {-15.0, -10.0, -5.0, 0.0, 5.0, 10.0};
    return doc;
  }
  throw Error("invalid_config", "unknown preset '" + name + "'");
}

json merge_strict(const json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw Error("invalid_config", "configuration" + path + " must be an object");
  json out = base;
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path + "." + it.key();
    if (!base.contains(it.key())) throw Error("invalid_config", "unknown configuration key '" + key.substr(1) + "'");
    const json& b = base[it.key()];
    if (b.is_object() && it.value().is_object())
      out[it.key()] = merge_strict(b, it.value(), key);
    else
      out[it.key()] = it.value();
  }
  return out;
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig c;
  try {
    const json& s = doc.at("scenario");
    c.scenario.q = vec2_from(s.at("bs"), "scenario.bs");
    c.scenario.r = vec2_from(s.at("ris"), "scenario.ris");
    c.scenario.p = vec2_from(s.at("ue"), "scenario.ue");
    c.scenario.fc = s.at("fc").get<double>();
    c.scenario.bandwidth = s.at("bandwidth").get<double>();
    c.scenario.n_sub = s.at("n_sub").get<int>();
    c.scenario.n_bs = s.at("n_bs").get<int>();
    c.scenario.n_ris = s.at("n_ris").get<int>();
    c.scenario.seed = s.at("seed").get<std::uint64_t>();
    const double span = c.scenario.n_sub * c.scenario.sample_period();
    c.scenario.delta = s.at("delta").is_null() ? span / 8.0 : s.at("delta").get<double>();
    c.scenario.noise_var =
        std::pow(10.0, (s.at("noise_psd_dbm_hz").get<double>() - 30.0) / 10.0) * c.scenario.bandwidth;

    const json& r = doc.at("region");
    c.region.center = vec2_from(r.at("center"), "region.center");
    c.region.half_extent = vec2_from(r.at("half_extent"), "region.half_extent");
    c.region.grid_m = r.at("grid_m").get<int>();

    c.codebook_kind = doc.at("codebook_kind").get<std::string>();
    c.allocation_metric = doc.at("allocation_metric").get<std::string>();
    c.snr_grid = doc.at("snr_grid").get<std::vector<double>>();
    c.trials = doc.at("trials").get<int>();
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.workers = doc.at("workers").get<int>();

    const json& m = doc.at("multipath");
    c.multipath.enabled = m.at("enabled").get<bool>();
    c.multipath.scatterers.clear();
    for (const auto& v : m.at("scatterers")) c.multipath.scatterers.push_back(vec2_from(v, "multipath.scatterers"));
    c.multipath.gamma = m.at("gamma").get<double>();
    if (m.at("reference_snr_db").is_null())
      c.multipath.reference_snr_db.reset();
    else
      c.multipath.reference_snr_db = m.at("reference_snr_db").get<double>();

    const json& q = doc.at("search");
    c.search.region = c.region;
    c.search.q_grid = q.at("q_grid").get<int>();
    c.search.q_delta = q.at("q_delta").get<int>();
    if (q.at("delta_span").is_null()) {
      c.search.delta_min = 0.0;
      c.search.delta_max = span / 4.0;
    } else {
      const Vec2 d = vec2_from(q.at("delta_span"), "search.delta_span");
      c.search.delta_min = d.x();
      c.search.delta_max = d.y();
    }
    c.search.n_fft = q.at("n_fft").get<int>();
    const json& rf = q.at("refine");
    c.search.refine.max_iter = rf.at("max_iter").get<int>();
    c.search.refine.x_tol = rf.at("x_tol").get<double>();
    c.search.refine.f_tol = rf.at("f_tol").get<double>();
    c.search.refine.initial_step = rf.at("initial_step").get<double>();

    const json& a = doc.at("allocation");
    c.allocation.rel_tol = a.at("rel_tol").get<double>();
    c.allocation.window = a.at("window").get<int>();
    c.allocation.max_iter = a.at("max_iter").get<int>();
    c.allocation.anneal = a.at("anneal").get<double>();
    c.allocation.stage_window = a.at("stage_window").get<int>();
    c.allocation.stall_fraction = a.at("stall_fraction").get<double>();
    c.output_path = doc.at("output_path").get<std::string>();
  } catch (const json::exception& e) {
    throw Error("invalid_config", std::string("malformed configuration: ") + e.what());
  }
  c.scenario.power = snr_to_power(0.0, c.scenario);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& preset, const json& user) {
  return config_from_json(merge_strict(preset_document(preset), user));
}

double snr_to_power(double snr_db, const Scenario& sc) {
  const double rho = sc.wavelength() / (4.0 * kPi * (sc.p - sc.q).norm());
  return sc.noise_var * std::pow(10.0, snr_db / 10.0) / (rho * rho);
}

double power_to_snr(double power, const Scenario& sc) {
  const double rho = sc.wavelength() / (4.0 * kPi * (sc.p - sc.q).norm());
  return 10.0 * std::log10(power * rho * rho / sc.noise_var);
}

namespace {

double scatterer_amplitude(const Scenario& sc, const Vec2& m, double gamma) {
  const double d1 = (m - sc.q).norm();
  const double d2 = (m - sc.p).norm();
  if (d1 <= 0 || d2 <= 0)
    throw Error("degenerate_geometry", "scatterer coincides with the BS or the UE");
  return gamma * sc.wavelength() / (4.0 * kPi * (d1 + d2));
}

}  // namespace

CMat multipath_signal(const Scenario& sc, const Codebook& cb, const CMat& symbols,
                      const std::vector<Vec2>& scatterers, double gamma, double power,
                      std::uint64_t seed) {
  const int G = cb.size();
  CMat out = CMat::Zero(G, sc.n_sub);
  std::mt19937_64 rng(derive_seed(seed, 0x4d50ULL));
  std::uniform_real_distribution<double> phase(-kPi, kPi);
  for (const Vec2& m : scatterers) {
    const double amp = scatterer_amplitude(sc, m, gamma);
    const cd alpha = amp * std::polar(1.0, phase(rng));
    const double tau = ((m - sc.q).norm() + (m - sc.p).norm()) / kSpeedOfLight + sc.delta;
    const Vec2 d = m - sc.q;
    const CVec a = steering_bs(std::atan2(d.y(), d.x()), sc.n_bs);
    const CVec c = freq_steering(tau, sc.n_sub, sc.sample_period());
    for (int g = 0; g < G; ++g) {
      const cd gain = std::sqrt(power) * alpha * (a.transpose() * cb.beam(g)).value();
      for (int n = 0; n < sc.n_sub; ++n) out(g, n) += gain * c(n) * symbols(g, n);
    }
  }
  return out;
}

CMat inject_multipath(const CMat& m_clean, const Scenario& sc, const Codebook& cb, const CMat& symbols,
                      const std::vector<Vec2>& scatterers, double gamma, double power,
                      std::uint64_t seed) {
  return m_clean + multipath_signal(sc, cb, symbols, scatterers, gamma, power, seed);
}

double lmr_db(const Scenario& sc, double los_power, double nlos_power,
              const std::vector<Vec2>& scatterers, double gamma) {
  const double rho = sc.wavelength() / (4.0 * kPi * (sc.p - sc.q).norm());
  double nlos = 0;
  for (const Vec2& m : scatterers) {
    const double a = scatterer_amplitude(sc, m, gamma);
    nlos += nlos_power * a * a;
  }
  return 10.0 * std::log10(los_power * rho * rho / nlos);
}

BuiltCodebook build_codebook(const ExperimentConfig& cfg) {
  const Scenario& sc = cfg.scenario;
  BuiltCodebook out;
  std::string metric = cfg.allocation_metric;
  const std::string& kind = cfg.codebook_kind;
  if (kind == "proposed") {
    out.codebook = proposed_codebook(cfg.region, sc);
  } else if (kind == "proposed_reduced_g") {
    out.codebook = reduced_g_codebook(proposed_codebook(cfg.region, sc), center_aod(cfg.region, sc.r), sc);
  } else if (kind == "directional_uniform") {
    out.codebook = directional_codebook(cfg.region, sc, true);
    metric = "none";
  } else if (kind == "directional_optimized") {
    out.codebook = directional_codebook(cfg.region, sc, true);
    if (metric == "none") metric = "peb";
  } else if (kind == "dft_optimized") {
    out.codebook = dft_codebook(cfg.region, sc);
    if (metric == "none") metric = "peb";
  } else {
    throw Error("invalid_config", "unknown codebook_kind '" + kind + "'");
  }
  if (metric != "none") {
    out.allocation = allocate_power(out.codebook, cfg.region.grid_points(), sc, parse_metric(metric),
                                    cfg.allocation);
    out.codebook.powers = out.allocation->powers;
  }
  return out;
}

std::vector<BoundsRow> run_bounds_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const BuiltCodebook built = build_codebook(cfg);
  const auto points = cfg.region.grid_points();
  std::vector<BoundsRow> rows;
  for (double snr : cfg.snr_grid) {
    Scenario sc = cfg.scenario;
    sc.power = snr_to_power(snr, sc);
    const FimBundle b = scenario_bundle(sc, built.codebook);
    BoundsRow row;
    row.snr_db = snr;
    row.peb = b.peb();
    row.ceb = b.ceb();
    row.worst_case_peb = worst_case_bound(built.codebook, points, sc, BoundMetric::kPeb);
    row.worst_case_ceb = worst_case_bound(built.codebook, points, sc, BoundMetric::kCeb);
    rows.push_back(row);
  }
  return rows;
}

namespace {

struct TrialOutcome {
  bool ok = false;
  double err_pos_rml = 0, err_pos_jml = 0, err_clock_rml = 0, err_clock_jml = 0;
};

struct TrialInputs {
  Scenario scenario;  ///< truth, with the trial's phase seed and power
  CMat y;
};

TrialInputs make_trial(const ExperimentConfig& cfg, const Codebook& cb, const CMat& symbols,
                       double snr_db, std::uint64_t trial_seed) {
  TrialInputs t;
  t.scenario = cfg.scenario;
  t.scenario.seed = trial_seed;
  t.scenario.power = snr_to_power(snr_db, t.scenario);
  const ChannelParams gamma = geo_to_channel(t.scenario);
  CMat clean = noiseless_signal(t.scenario, gamma, cb, symbols);
  if (cfg.multipath.enabled) {
    const double nlos_power = cfg.multipath.reference_snr_db
                                  ? snr_to_power(*cfg.multipath.reference_snr_db, t.scenario)
                                  : t.scenario.power;
    clean = inject_multipath(clean, t.scenario, cb, symbols, cfg.multipath.scatterers,
                             cfg.multipath.gamma, nlos_power, derive_seed(trial_seed, 2));
  }
  t.y = add_noise(clean, t.scenario.noise_var, derive_seed(trial_seed, 1));
  return t;
}

void check_unambiguous(const Scenario& sc) {
  const ChannelParams g = geo_to_channel(sc);
  const double limit = 0.5 * sc.n_sub * sc.sample_period();
  if (g.tau_r() > limit || g.tau_bu > limit)
    throw Error("aliasing", "path delay exceeds the unambiguous FFT delay range N T / 2");
}

}  // namespace

std::vector<ResultRow> run_monte_carlo(const ExperimentConfig& cfg) {
  cfg.validate();
  check_unambiguous(cfg.scenario);
  const BuiltCodebook built = build_codebook(cfg);
  const Codebook& cb = built.codebook;
  const CMat symbols = random_symbols(cb.size(), cfg.scenario.n_sub, derive_seed(cfg.seed, 0x5359ULL));
  const int workers = cfg.workers > 0 ? cfg.workers
                                      : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));

  std::vector<ResultRow> rows;
  for (size_t s = 0; s < cfg.snr_grid.size(); ++s) {
    const double snr = cfg.snr_grid[s];
    std::vector<TrialOutcome> outcomes(static_cast<size_t>(cfg.trials));
    std::atomic<int> next{0};
    auto work = [&]() {
      for (int t = next++; t < cfg.trials; t = next++) {
        TrialOutcome& out = outcomes[static_cast<size_t>(t)];
        try {
          const std::uint64_t trial_seed = derive_seed(cfg.seed, s + 1, static_cast<std::uint64_t>(t));
          const TrialInputs in = make_trial(cfg, cb, symbols, snr, trial_seed);
          ObservationSet obs{in.y, symbols, trial_seed};
          const KnownModel known{in.scenario, cb, symbols};
          const Estimate est = estimate_pipeline(obs, known, cfg.search);
          out.err_pos_rml = (est.p_coarse - in.scenario.p).squaredNorm();
          out.err_pos_jml = (est.p_hat - in.scenario.p).squaredNorm();
          out.err_clock_rml = std::pow(est.delta_coarse - in.scenario.delta, 2);
          out.err_clock_jml = std::pow(est.delta_hat - in.scenario.delta, 2);
          out.ok = std::isfinite(out.err_pos_jml) && std::isfinite(out.err_clock_jml);
        } catch (const std::exception&) {
          out.ok = false;
        }
      }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    ResultRow row;
    row.snr_db = snr;
    double a = 0, b = 0, c = 0, d = 0;
    for (const auto& o : outcomes) {
      if (!o.ok) {
        ++row.failures;
        continue;
      }
      ++row.trials_used;
      a += o.err_pos_rml;
      b += o.err_pos_jml;
      c += o.err_clock_rml;
      d += o.err_clock_jml;
    }
    if (row.trials_used > 0) {
      const double k = row.trials_used;
      row.rmse_pos_rml = std::sqrt(a / k);
      row.rmse_pos_jml = std::sqrt(b / k);
      row.rmse_clock_rml = std::sqrt(c / k);
      row.rmse_clock_jml = std::sqrt(d / k);
    } else {
      row.rmse_pos_rml = row.rmse_pos_jml = row.rmse_clock_rml = row.rmse_clock_jml = NAN;
    }
    Scenario sc = cfg.scenario;
    sc.power = snr_to_power(snr, sc);
    const FimBundle bundle = scenario_bundle(sc, cb);
    row.peb = bundle.peb();
    row.ceb = bundle.ceb();
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9e", v);
  return buf;
}

}  // namespace

std::string bounds_csv(const std::vector<BoundsRow>& rows) {
  std::ostringstream os;
  os << "snr_db,peb_m,ceb_s,worst_case_peb_m,worst_case_ceb_s\r\n";
  for (const auto& r : rows)
    os << sci(r.snr_db) << ',' << sci(r.peb) << ',' << sci(r.ceb) << ',' << sci(r.worst_case_peb) << ','
       << sci(r.worst_case_ceb) << "\r\n";
  return os.str();
}

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  os << "snr_db,rmse_pos_rml_m,rmse_pos_jml_m,rmse_clock_rml_s,rmse_clock_jml_s,peb_m,ceb_s,"
        "trials_used,failures\r\n";
  for (const auto& r : rows)
    os << sci(r.snr_db) << ',' << sci(r.rmse_pos_rml) << ',' << sci(r.rmse_pos_jml) << ','
       << sci(r.rmse_clock_rml) << ',' << sci(r.rmse_clock_jml) << ',' << sci(r.peb) << ','
       << sci(r.ceb) << ',' << r.trials_used << ',' << r.failures << "\r\n";
  return os.str();
}

namespace {

json complex_matrix_json(const CMat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

CMat complex_matrix_from(const json& rows, const std::string& what) {
  if (!rows.is_array() || rows.empty()) throw Error("invalid_observation", what + " is empty");
  CMat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != static_cast<size_t>(m.cols())) throw Error("invalid_observation", what + " is ragged");
    for (size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          cd(rows[i][j].at(0).get<double>(), rows[i][j].at(1).get<double>());
  }
  return m;
}

}  // namespace

json simulate_observation(const ExperimentConfig& cfg, double snr_db, int trial) {
  cfg.validate();
  const BuiltCodebook built = build_codebook(cfg);
  const CMat symbols =
      random_symbols(built.codebook.size(), cfg.scenario.n_sub, derive_seed(cfg.seed, 0x5359ULL));
  const std::uint64_t trial_seed = derive_seed(cfg.seed, 0x4f4253ULL, static_cast<std::uint64_t>(trial));
  const TrialInputs in = make_trial(cfg, built.codebook, symbols, snr_db, trial_seed);
  return {{"snr_db", snr_db},
          {"power", in.scenario.power},
          {"seed", trial_seed},
          {"truth", {{"ue", {in.scenario.p.x(), in.scenario.p.y()}}, {"delta", in.scenario.delta}}},
          {"y", complex_matrix_json(in.y)},
          {"symbols", complex_matrix_json(symbols)}};
}

json estimate_from_document(const ExperimentConfig& cfg, const json& doc) {
  cfg.validate();
  const BuiltCodebook built = build_codebook(cfg);
  ObservationSet obs;
  KnownModel known;
  try {
    obs.y = complex_matrix_from(doc.at("y"), "y");
    obs.symbols = complex_matrix_from(doc.at("symbols"), "symbols");
    obs.seed = doc.at("seed").get<std::uint64_t>();
    known.scenario = cfg.scenario;
    known.scenario.power = doc.at("power").get<double>();
  } catch (const json::exception& e) {
    throw Error("invalid_observation", std::string("malformed observation document: ") + e.what());
  }
  known.codebook = built.codebook;
  known.symbols = obs.symbols;
  const Estimate est = estimate_pipeline(obs, known, cfg.search);
  return {{"p_hat", {est.p_hat.x(), est.p_hat.y()}},
          {"delta_hat", est.delta_hat},
          {"alpha_hat", {{est.alpha_bu.real(), est.alpha_bu.imag()}, {est.alpha_r.real(), est.alpha_r.imag()}}},
          {"tau_hat_bu", est.tau_hat_bu},
          {"tau_hat_r", est.tau_hat_r},
          {"p_coarse", {est.p_coarse.x(), est.p_coarse.y()}},
          {"delta_coarse", est.delta_coarse},
          {"costs", {{"rml_cost", est.rml_cost}, {"jml_cost", est.jml_cost}}},
          {"iterations", est.iterations},
          {"rank_deficient_subcarriers", est.rank_deficient_subcarriers}};
}

}  // namespace risloc
