/**
 * @file scenario.hpp
 * @brief Geometry, channel parameterization, steering vectors and synthesis
 * of received OFDM observations for the BS -> UE and BS -> RIS -> UE links.
 */
#pragma once

#include <cstdint>

#include "risloc/codebook.hpp"
#include "risloc/common.hpp"

namespace risloc {

/// Physical setup. The BS sits at q, the RIS at r and the UE at p (meters).
struct Scenario {
  Vec2 q{0.0, 0.0};
  Vec2 r{12.0, 7.0};
  Vec2 p{5.0, 5.0};
  double delta = 80e-9;    ///< clock offset [s]
  double fc = 28e9;        ///< carrier frequency [Hz]
  double bandwidth = 1e8;  ///< B [Hz]
  int n_sub = 64;          ///< N subcarriers
  int n_bs = 8;
  int n_ris = 16;
  double power = 1.0;          ///< P [W]
  double noise_var = 4e-13;    ///< sigma^2 [W]
  std::uint64_t seed = 1;      ///< drives the random path phases

  double wavelength() const { return kSpeedOfLight / fc; }
  double sample_period() const { return 1.0 / bandwidth; }
  /// Half-wavelength element spacing assumed by the steering vectors.
  double element_spacing() const { return 0.5 * wavelength(); }
  /// Throws on non-positive quantities, too few elements, or coincident points.
  void validate() const;
};

/// Unknown channel parameters plus the known BS-RIS quantities.
struct ChannelParams {
  double tau_bu = 0, theta_bu = 0, rho_bu = 0, phi_bu = 0;
  double tau_ru = 0, theta_ru = 0, rho_r = 0, phi_r = 0;
  double tau_br = 0, theta_br = 0, phi_br = 0;

  /// Total delay of the reflected path.
  double tau_r() const { return tau_ru + tau_br; }
  /// [tau_bu, theta_bu, rho_bu, phi_bu, tau_ru, theta_ru, rho_r, phi_r].
  Eigen::Matrix<double, 8, 1> to_vector() const;
  /// Replaces the eight unknowns, keeping the known BS-RIS quantities.
  void set_unknowns(const Eigen::Matrix<double, 8, 1>& v);
};

/// Location-domain parameters [p_x, p_y, rho_bu, phi_bu, rho_r, phi_r, delta].
struct LocationParams {
  Vec2 p{0.0, 0.0};
  double rho_bu = 0, phi_bu = 0, rho_r = 0, phi_r = 0, delta = 0;

  Eigen::Matrix<double, 7, 1> to_vector() const;
  static LocationParams from_vector(const Eigen::Matrix<double, 7, 1>& v);
};

/// Received samples y(g, n) with the pilot symbols that produced them.
struct ObservationSet {
  CMat y;        ///< G x N
  CMat symbols;  ///< G x N
  std::uint64_t seed = 0;
};

/// Element k = exp(j pi k sin(theta)), k = 0..n-1.
CVec steering_bs(double theta, int n);
CVec steering_ris(double theta, int n);
/// a_RIS(theta) .* a_RIS(phi_br).
CVec combined_ris_steering(double theta, double phi_br, int n);
/// Element n = exp(-j kappa_n tau) with kappa_n = 2 pi n / (N T).
CVec freq_steering(double tau, int n_sub, double t_samp);
/// Subcarrier angular frequencies kappa_n = 2 pi n / (N T).
RVec subcarrier_kappa(int n_sub, double t_samp);
/// d a / d theta.
CVec derivative_steering_bs(double theta, int n);
CVec derivative_steering_ris(double theta, int n);
/// d b / d theta, the derivative acting on the UE-side factor only.
CVec derivative_combined(double theta, double phi_br, int n);

/// Channel parameters implied by the geometry. Phases are uniform on
/// [-pi, pi) drawn from scenario.seed.
ChannelParams geo_to_channel(const Scenario& scenario);
/// Location parameters consistent with a scenario and its channel phases.
LocationParams location_params(const Scenario& scenario, const ChannelParams& gamma);

/// Unit-modulus QPSK pilots, G x N, deterministic in the seed.
CMat random_symbols(int g, int n_sub, std::uint64_t seed);
/// Noise-free received samples m(g, n).
CMat noiseless_signal(const Scenario& scenario, const ChannelParams& gamma,
                      const Codebook& codebook, const CMat& symbols);
/// m(g, n) plus circular complex Gaussian noise of variance noise_var. The
/// noise of transmission g comes from a generator keyed on (seed, g).
ObservationSet synthesize(const Scenario& scenario, const ChannelParams& gamma,
                          const Codebook& codebook, const CMat& symbols, std::uint64_t seed);
/// Adds noise of variance noise_var to a noise-free G x N signal.
CMat add_noise(const CMat& clean, double noise_var, std::uint64_t seed);

}  // namespace risloc
