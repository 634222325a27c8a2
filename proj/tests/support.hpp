// Shared helpers for the unit tests and the acceptance binary: random
// instances and independent reference computations that do not reuse the
// library's vectorized code paths.
#pragma once

#include <cmath>
#include <complex>
#include <random>

#include "risloc/beamforming.hpp"
#include "risloc/codebook.hpp"
#include "risloc/common.hpp"
#include "risloc/fim.hpp"
#include "risloc/scenario.hpp"

namespace risloc::testing {

/// Small scenario with a UE drawn uniformly in a box away from the anchors.
inline Scenario small_scenario(std::mt19937_64& rng, int n_bs = 4, int n_ris = 6, int n_sub = 8) {
  std::uniform_real_distribution<double> ux(2.0, 9.0), uy(2.0, 9.0), ud(0.0, 60e-9);
  Scenario sc;
  sc.n_bs = n_bs;
  sc.n_ris = n_ris;
  sc.n_sub = n_sub;
  sc.p = Vec2(ux(rng), uy(rng));
  sc.delta = ud(rng);
  sc.seed = rng();
  return sc;
}

/// Codebook with random unit-norm beams, random unit-modulus profiles,
/// G random pairs and random positive powers summing to one.
inline Codebook random_codebook(int n_bs, int n_ris, int g, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> phase(-kPi, kPi), unit(0.1, 1.0);
  Codebook cb;
  cb.kind = "custom";
  cb.bs_beams.resize(n_bs, g);
  cb.ris_profiles.resize(n_ris, g);
  for (int j = 0; j < g; ++j) {
    for (int i = 0; i < n_bs; ++i) cb.bs_beams(i, j) = cd(gauss(rng), gauss(rng));
    cb.bs_beams.col(j).normalize();
    for (int i = 0; i < n_ris; ++i) cb.ris_profiles(i, j) = std::polar(1.0, phase(rng));
    cb.pairs.emplace_back(j, j);
    cb.bs_labels.push_back("directional");
    cb.ris_labels.push_back("directional");
  }
  cb.powers.resize(g);
  for (int j = 0; j < g; ++j) cb.powers(j) = unit(rng);
  cb.powers /= cb.powers.sum();
  return cb;
}

/// Element-by-element evaluation of the received noiseless signal from the
/// channel model definition.
inline cd reference_signal(const ChannelParams& gm, const Scenario& sc, const CVec& f,
                           const CVec& w, cd s, int n) {
  const double kappa = 2.0 * kPi * n / (sc.n_sub * sc.sample_period());
  cd los = 0.0, br = 0.0, ru = 0.0;
  for (int k = 0; k < sc.n_bs; ++k) {
    los += std::exp(kJ * (kPi * k * std::sin(gm.theta_bu))) * f(k);
    br += std::exp(kJ * (kPi * k * std::sin(gm.theta_br))) * f(k);
  }
  for (int k = 0; k < sc.n_ris; ++k)
    ru += std::exp(kJ * (kPi * k * (std::sin(gm.theta_ru) + std::sin(gm.phi_br)))) * w(k);
  const double sp = std::sqrt(sc.power);
  return sp * gm.rho_bu * std::exp(kJ * (gm.phi_bu - kappa * gm.tau_bu)) * los * s +
         sp * gm.rho_r * std::exp(kJ * (gm.phi_r - kappa * (gm.tau_ru + gm.tau_br))) * ru * br * s;
}

/// Channel parameters as an explicit function of the location parameters.
inline ChannelParams reference_channel(const Eigen::Matrix<double, 7, 1>& eta, const Vec2& r,
                                       const Vec2& q) {
  const Vec2 p(eta(0), eta(1));
  ChannelParams g;
  g.tau_bu = (p - q).norm() / kSpeedOfLight + eta(6);
  g.theta_bu = std::atan2(p.y() - q.y(), p.x() - q.x());
  g.rho_bu = eta(2);
  g.phi_bu = eta(3);
  g.tau_ru = (p - r).norm() / kSpeedOfLight + eta(6);
  g.theta_ru = std::atan2(p.y() - r.y(), p.x() - r.x());
  g.rho_r = eta(4);
  g.phi_r = eta(5);
  g.tau_br = (r - q).norm() / kSpeedOfLight;
  g.theta_br = std::atan2(r.y() - q.y(), r.x() - q.x());
  g.phi_br = wrap_angle(-kPi + g.theta_br);
  return g;
}

/// Largest FIM entry difference normalized by the geometric mean of the two
/// matching diagonal entries, which is invariant to parameter units.
inline double normalized_fim_error(const Mat8& a, const Mat8& b) {
  double worst = 0;
  for (int h = 0; h < 8; ++h)
    for (int k = 0; k < 8; ++k) {
      const double s = std::sqrt(std::abs(b(h, h) * b(k, k)));
      if (s > 0) worst = std::max(worst, std::abs(a(h, k) - b(h, k)) / s);
    }
  return worst;
}

/// Unit-modulus random symbols drawn from the test RNG.
inline CMat unit_symbols(int g, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> phase(-kPi, kPi);
  CMat s(g, n);
  for (int i = 0; i < g; ++i)
    for (int k = 0; k < n; ++k) s(i, k) = std::polar(1.0, phase(rng));
  return s;
}

/// Maximum relative error of the eight analytic partials against central
/// differences of the reference signal over every (g, n).
inline double derivative_error(const ChannelParams& gm, const Codebook& cb, const CMat& sym,
                               const Scenario& sc) {
  // The RIS term is orders of magnitude below the LoS term, so the step is
  // large enough to keep cancellation in the difference below the tolerance.
  const double steps[8] = {1e-5 * sc.sample_period(), 1e-5, 1e-5 * gm.rho_bu, 1e-5,
                           1e-5 * sc.sample_period(), 1e-5, 1e-5 * gm.rho_r, 1e-5};
  double worst = 0;
  for (int k = 0; k < 8; ++k) {
    double num = 0, den = 0;
    for (int g = 0; g < cb.size(); ++g)
      for (int n = 0; n < sc.n_sub; ++n) {
        const auto d = signal_derivatives(gm, cb.beam(g), cb.profile(g), sym(g, n), n, sc);
        Eigen::Matrix<double, 8, 1> v = gm.to_vector();
        ChannelParams plus = gm, minus = gm;
        v(k) += steps[k];
        plus.set_unknowns(v);
        v(k) -= 2 * steps[k];
        minus.set_unknowns(v);
        const cd fd = (reference_signal(plus, sc, cb.beam(g), cb.profile(g), sym(g, n), n) -
                       reference_signal(minus, sc, cb.beam(g), cb.profile(g), sym(g, n), n)) /
                      (2 * steps[k]);
        num = std::max(num, std::abs(fd - d[static_cast<size_t>(k)]));
        den = std::max(den, std::abs(d[static_cast<size_t>(k)]));
      }
    if (den > 0) worst = std::max(worst, num / den);
  }
  return worst;
}

/// Maximum relative error of each transform-matrix row against central
/// differences of the explicit location-to-channel map.
inline double transform_error(const LocationParams& eta, const Vec2& r, const Vec2& q) {
  const Mat78 t = transform_matrix(eta, r, q);
  const Eigen::Matrix<double, 7, 1> base = eta.to_vector();
  const double steps[7] = {1e-6, 1e-6, 1e-7 * eta.rho_bu, 1e-6, 1e-7 * eta.rho_r, 1e-6, 1e-15};
  double worst = 0;
  for (int i = 0; i < 7; ++i) {
    Eigen::Matrix<double, 7, 1> a = base, b = base;
    a(i) += steps[i];
    b(i) -= steps[i];
    const Eigen::Matrix<double, 8, 1> fd =
        (reference_channel(a, r, q).to_vector() - reference_channel(b, r, q).to_vector()) /
        (2 * steps[i]);
    const Eigen::Matrix<double, 8, 1> row = t.row(i).transpose();
    worst = std::max(worst, (fd - row).norm() / row.norm());
  }
  return worst;
}

}  // namespace risloc::testing
