/**
 * @file scenario.cpp
 * @brief Steering vectors, geometry-to-channel mapping and observation synthesis.
 */
#include "risloc/scenario.hpp"

#include <cmath>
#include <random>

namespace risloc {

void Scenario::validate() const {
  if (n_bs < 2 || n_ris < 2 || n_sub < 2)
    throw Error("invalid_scenario", "n_bs, n_ris and n_sub must all be at least 2");
  if (!(fc > 0) || !(bandwidth > 0) || !(power > 0) || !(noise_var > 0) || !(delta >= 0))
    throw Error("invalid_scenario", "physical quantities must be strictly positive");
  if ((p - q).norm() <= 0 || (r - p).norm() <= 0 || (r - q).norm() <= 0)
    throw Error("degenerate_geometry", "BS, RIS and UE positions must be distinct");
}

Eigen::Matrix<double, 8, 1> ChannelParams::to_vector() const {
  Eigen::Matrix<double, 8, 1> v;
  v << tau_bu, theta_bu, rho_bu, phi_bu, tau_ru, theta_ru, rho_r, phi_r;
  return v;
}

void ChannelParams::set_unknowns(const Eigen::Matrix<double, 8, 1>& v) {
  tau_bu = v(0);
  theta_bu = v(1);
  rho_bu = v(2);
  phi_bu = v(3);
  tau_ru = v(4);
  theta_ru = v(5);
  rho_r = v(6);
  phi_r = v(7);
}

Eigen::Matrix<double, 7, 1> LocationParams::to_vector() const {
  Eigen::Matrix<double, 7, 1> v;
  v << p.x(), p.y(), rho_bu, phi_bu, rho_r, phi_r, delta;
  return v;
}

LocationParams LocationParams::from_vector(const Eigen::Matrix<double, 7, 1>& v) {
  LocationParams eta;
  eta.p = Vec2(v(0), v(1));
  eta.rho_bu = v(2);
  eta.phi_bu = v(3);
  eta.rho_r = v(4);
  eta.phi_r = v(5);
  eta.delta = v(6);
  return eta;
}

CVec steering_bs(double theta, int n) {
  CVec a(n);
  const double s = std::sin(theta);
  for (int k = 0; k < n; ++k) a(k) = std::polar(1.0, kPi * k * s);
  return a;
}

CVec steering_ris(double theta, int n) { return steering_bs(theta, n); }

CVec combined_ris_steering(double theta, double phi_br, int n) {
  return steering_ris(theta, n).cwiseProduct(steering_ris(phi_br, n));
}

RVec subcarrier_kappa(int n_sub, double t_samp) {
  RVec kappa(n_sub);
  for (int n = 0; n < n_sub; ++n) kappa(n) = 2.0 * kPi * n / (n_sub * t_samp);
  return kappa;
}

CVec freq_steering(double tau, int n_sub, double t_samp) {
  CVec c(n_sub);
  for (int n = 0; n < n_sub; ++n) {
    // Reduce the phase in cycles first so that tau = N T wraps exactly.
    const double cycles = std::fmod(static_cast<double>(n) * tau / (n_sub * t_samp), 1.0);
    c(n) = std::polar(1.0, -2.0 * kPi * cycles);
  }
  return c;
}

CVec derivative_steering_bs(double theta, int n) {
  CVec a = steering_bs(theta, n);
  const double c = kPi * std::cos(theta);
  for (int k = 0; k < n; ++k) a(k) *= kJ * (c * k);
  return a;
}

CVec derivative_steering_ris(double theta, int n) { return derivative_steering_bs(theta, n); }

CVec derivative_combined(double theta, double phi_br, int n) {
  return derivative_steering_ris(theta, n).cwiseProduct(steering_ris(phi_br, n));
}

ChannelParams geo_to_channel(const Scenario& sc) {
  sc.validate();
  const Vec2 p = sc.p - sc.q;
  const Vec2 r = sc.r - sc.q;
  const Vec2 pr = sc.p - sc.r;
  const double lambda = sc.wavelength();

  ChannelParams g;
  g.tau_bu = p.norm() / kSpeedOfLight + sc.delta;
  g.tau_br = r.norm() / kSpeedOfLight;
  g.tau_ru = pr.norm() / kSpeedOfLight + sc.delta;
  g.theta_bu = wrap_angle(std::atan2(p.y(), p.x()));
  g.theta_ru = wrap_angle(std::atan2(pr.y(), pr.x()));
  g.theta_br = wrap_angle(std::atan2(r.y(), r.x()));
  g.phi_br = wrap_angle(-kPi + g.theta_br);
  g.rho_bu = lambda / (4.0 * kPi * p.norm());
  g.rho_r = lambda / (4.0 * kPi * r.norm()) * lambda / (4.0 * kPi * pr.norm());

  std::mt19937_64 rng(derive_seed(sc.seed, 0x5048415345ULL));
  std::uniform_real_distribution<double> phase(-kPi, kPi);
  g.phi_bu = phase(rng);
  g.phi_r = phase(rng);
  return g;
}

LocationParams location_params(const Scenario& sc, const ChannelParams& gamma) {
  LocationParams eta;
  eta.p = sc.p;
  eta.rho_bu = gamma.rho_bu;
  eta.phi_bu = gamma.phi_bu;
  eta.rho_r = gamma.rho_r;
  eta.phi_r = gamma.phi_r;
  eta.delta = sc.delta;
  return eta;
}

CMat random_symbols(int g, int n_sub, std::uint64_t seed) {
  CMat s(g, n_sub);
  const double h = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < g; ++i) {
    std::mt19937_64 rng(derive_seed(seed, 0x53594dULL, static_cast<std::uint64_t>(i)));
    for (int n = 0; n < n_sub; ++n) {
      const auto bits = rng();
      s(i, n) = cd((bits & 1) ? h : -h, (bits & 2) ? h : -h);
    }
  }
  return s;
}

CMat noiseless_signal(const Scenario& sc, const ChannelParams& gamma, const Codebook& cb,
                      const CMat& symbols) {
  const int G = cb.size();
  const int N = sc.n_sub;
  if (symbols.rows() != G || symbols.cols() != N)
    throw Error("dimension_mismatch", "symbol matrix must be G x N");
  if (cb.bs_beams.rows() != sc.n_bs || cb.ris_profiles.rows() != sc.n_ris)
    throw Error("dimension_mismatch", "codebook array sizes do not match the scenario");

  const double T = sc.sample_period();
  const double sqrt_p = std::sqrt(sc.power);
  const CVec a_bu = steering_bs(gamma.theta_bu, sc.n_bs);
  const CVec a_br = steering_bs(gamma.theta_br, sc.n_bs);
  const CVec b_ru = combined_ris_steering(gamma.theta_ru, gamma.phi_br, sc.n_ris);
  const CVec c_bu = freq_steering(gamma.tau_bu, N, T);
  const CVec c_r = freq_steering(gamma.tau_r(), N, T);
  const cd gain_bu = sqrt_p * gamma.rho_bu * std::polar(1.0, gamma.phi_bu);
  const cd gain_r = sqrt_p * gamma.rho_r * std::polar(1.0, gamma.phi_r);

  CMat m(G, N);
  for (int g = 0; g < G; ++g) {
    const CVec f = cb.beam(g);
    const CVec w = cb.profile(g);
    const cd los = gain_bu * (a_bu.transpose() * f).value();
    const cd ris = gain_r * (b_ru.transpose() * w).value() * (a_br.transpose() * f).value();
    for (int n = 0; n < N; ++n) m(g, n) = (los * c_bu(n) + ris * c_r(n)) * symbols(g, n);
  }
  return m;
}

CMat add_noise(const CMat& clean, double noise_var, std::uint64_t seed) {
  CMat y = clean;
  const double sd = std::sqrt(noise_var / 2.0);
  for (Eigen::Index g = 0; g < y.rows(); ++g) {
    std::mt19937_64 rng(derive_seed(seed, 0x4e4f495345ULL, static_cast<std::uint64_t>(g)));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index n = 0; n < y.cols(); ++n) {
      const double re = normal(rng);
      const double im = normal(rng);
      y(g, n) += cd(sd * re, sd * im);
    }
  }
  return y;
}

ObservationSet synthesize(const Scenario& sc, const ChannelParams& gamma, const Codebook& cb,
                          const CMat& symbols, std::uint64_t seed) {
  ObservationSet obs;
  obs.y = add_noise(noiseless_signal(sc, gamma, cb, symbols), sc.noise_var, seed);
  obs.symbols = symbols;
  obs.seed = seed;
  return obs;
}

}  // namespace risloc
