/**
 * @file estimation.hpp
 * @brief Joint ML and relaxed ML position/clock estimators, FFT delay
 * estimation, closed-form clock offset and Nelder-Mead refinement.
 */
#pragma once

#include <functional>
#include <vector>

#include "risloc/codebook.hpp"
#include "risloc/scenario.hpp"

namespace risloc {

/// Quantities the receiver knows: array geometry, OFDM numerology, transmit
/// power, noise level, the codebook and the pilots. The true position and
/// clock offset stored in `scenario` are never read by the estimators.
struct KnownModel {
  Scenario scenario;
  Codebook codebook;
  CMat symbols;
};

struct RefineOptions {
  int max_iter = 400;
  double x_tol = 1e-5;        ///< simplex diameter threshold in scaled units [m]
  double f_tol = 1e-15;       ///< cost spread threshold, relative to the observation energy
  double initial_step = 0.05; ///< initial simplex edge in scaled units [m]
};

struct SearchConfig {
  UncertaintyRegion region;
  int q_grid = 31;                    ///< lattice points per spatial dimension
  double delta_min = 0.0;             ///< clock-offset search span [s]
  double delta_max = 160e-9;
  int q_delta = 17;
  int n_fft = 512;
  RefineOptions refine;

  void validate(int n_sub) const;
  /// Spatial lattice coordinates along x and y, endpoints included.
  std::vector<double> axis(int dim) const;
  std::vector<double> delta_axis() const;
};

struct Estimate {
  Vec2 p_hat{0.0, 0.0};
  double delta_hat = 0;
  cd alpha_bu{0.0, 0.0};
  cd alpha_r{0.0, 0.0};
  double tau_hat_bu = 0;
  double tau_hat_r = 0;
  double rml_cost = 0;
  double jml_cost = 0;
  int iterations = 0;
  /// Coarse estimate from the relaxed search, FFT delays and clock formula.
  Vec2 p_coarse{0.0, 0.0};
  double delta_coarse = 0;
  int rank_deficient_subcarriers = 0;
};

struct JmlResult {
  double cost = 0;
  cd alpha_bu{0.0, 0.0};
  cd alpha_r{0.0, 0.0};
};

/// Precomputed per-transmission quantities shared by every cost evaluation.
class CostModel {
 public:
  CostModel(const ObservationSet& obs, const KnownModel& known);

  /// Concentrated least-squares cost over the two path amplitudes at
  /// theta = [p_x, p_y, delta]. Throws if the 2x2 normal matrix is singular.
  JmlResult jml(const Vec2& p, double delta) const;

  struct RmlResult {
    double cost = 0;
    CMat e_hat;  ///< 2 x N per-subcarrier path coefficients
    int rank_deficient = 0;
  };
  /// Per-subcarrier least squares with unstructured delays.
  RmlResult rml(const Vec2& p, bool keep_coefficients = false) const;

  double energy() const { return energy_; }
  const KnownModel& known() const { return known_; }

 private:
  const ObservationSet& obs_;
  const KnownModel& known_;
  CMat beams_;     ///< N_BS x G power-scaled precoders
  CMat profiles_;  ///< N_RIS x G
  CVec ris_gain_;  ///< a^T(theta_br) f_g per transmission
  double phi_br_ = 0;
  double energy_ = 0;
  double column_floor_ = 0;  ///< per-subcarrier column energy treated as zero
};

JmlResult jml_cost(const Vec2& p, double delta, const ObservationSet& obs, const KnownModel& known);
double rml_cost(const Vec2& p, const ObservationSet& obs, const KnownModel& known,
                int* rank_deficient = nullptr);

/// Exhaustive search over the Q x Q x Q_delta lattice (lexicographic ties).
Estimate jml_grid3d(const ObservationSet& obs, const KnownModel& known, const SearchConfig& config);
/// Exhaustive search of the relaxed cost over the Q x Q lattice.
Vec2 rml_grid2d(const ObservationSet& obs, const KnownModel& known, const SearchConfig& config);

/// Delay of the dominant tone of e_vec (zero-padded FFT of length n_fft),
/// mapped to [-N T / 2, N T / 2]. Ties resolve to the smallest bin.
double fft_delay(const CVec& e_vec, int n_fft, double t_samp);
/// The bin-to-delay map used by fft_delay, returned for a given peak bin.
double fft_bin_to_delay(int bin, int n_fft, int n_sub, double t_samp);

/// 1/2 [tau_bu - |p - q|/c + tau_r - (|r - q| + |r - p|)/c].
double clock_offset(double tau_bu_hat, double tau_r_hat, const Vec2& p_hat, const Scenario& scenario);

struct RefineResult {
  Eigen::Vector3d x;
  double cost = 0;
  int iterations = 0;
};

/// Nelder-Mead with reflection 1, expansion 2, contraction 1/2, shrink 1/2.
/// Stops when the simplex diameter drops below x_tol, the cost spread below
/// f_tol (absolute), or after max_iter iterations.
RefineResult nelder_mead(const std::function<double(const Eigen::Vector3d&)>& cost,
                         const Eigen::Vector3d& x0, double initial_step, int max_iter, double x_tol,
                         double f_tol);

/// Refines theta = [p_x, p_y, delta] on the JML cost. The simplex works on
/// [p_x, p_y, c * delta] so all three coordinates are in meters.
Estimate refine(const Vec2& p_init, double delta_init, const CostModel& model,
                const RefineOptions& options);

/// Relaxed 2D search, per-subcarrier coefficient reconstruction, FFT delays,
/// closed-form clock offset, then JML refinement.
Estimate estimate_pipeline(const ObservationSet& obs, const KnownModel& known,
                           const SearchConfig& config);

/// Noise variance estimate: residual energy of the JML fit divided by N G.
double noise_variance_estimate(const Vec2& p, double delta, const ObservationSet& obs,
                               const KnownModel& known);

}  // namespace risloc
