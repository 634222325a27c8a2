/**
 * @file fim.hpp
 * @brief Channel- and location-domain Fisher information, position and
 * clock-offset error bounds.
 */
#pragma once

#include <array>
#include <vector>

#include "risloc/codebook.hpp"
#include "risloc/scenario.hpp"

namespace risloc {

using Mat8 = Eigen::Matrix<double, 8, 8>;
using Mat78 = Eigen::Matrix<double, 7, 8>;
using Mat7 = Eigen::Matrix<double, 7, 7>;

/// Index of each channel parameter inside the 8-vector.
enum ChannelIndex { kTauBu = 0, kThetaBu, kRhoBu, kPhiBu, kTauRu, kThetaRu, kRhoR, kPhiR };

/// Second-order statistics of one transmission: precoder covariance
/// X = f f^H, RIS covariance Psi = omega omega^H and the profile omega itself
/// (the LoS/NLoS cross terms depend on omega, not only on Psi).
struct TransmitCovariance {
  CMat x;
  CMat psi;
  CVec omega;
};

/// Rank-one covariances of every transmission in a codebook.
std::vector<TransmitCovariance> codebook_covariances(const Codebook& codebook);

/// The eight partials of m(g, n) in ChannelIndex order.
std::array<cd, 8> signal_derivatives(const ChannelParams& gamma, const CVec& f, const CVec& omega,
                                     cd s, int n, const Scenario& scenario);

/// FIM by direct summation of derivative products over every (g, n).
Mat8 channel_fim_exact(const ChannelParams& gamma, const Codebook& codebook, const CMat& symbols,
                       const Scenario& scenario);

/// FIM assembled from quadratic forms in X_g, Psi_g and omega_g with the
/// subcarrier sums factored out. Assumes unit-modulus symbols.
/// block_diagonal zeroes the LoS/NLoS cross block.
Mat8 channel_fim_from_covariances(const ChannelParams& gamma,
                                  const std::vector<TransmitCovariance>& covariances,
                                  const Scenario& scenario, bool block_diagonal = false);

Mat8 channel_fim_closed_form(const ChannelParams& gamma, const Codebook& codebook,
                             const Scenario& scenario, bool block_diagonal = false);

/// Jacobian of the channel parameters with respect to the location
/// parameters, rows [p_x, p_y, rho_bu, phi_bu, rho_r, phi_r, delta].
/// BS position q defaults to the origin.
Mat78 transform_matrix(const LocationParams& eta, const Vec2& r, const Vec2& q = Vec2::Zero());

struct FimBundle {
  Mat8 j_gamma;
  Mat78 t_mat;
  Mat7 j_eta;
  Mat7 j_eta_inv;
  double peb_sq = 0;  ///< trace of the 2x2 position block of the inverse [m^2]
  double ceb_sq = 0;  ///< clock-offset diagonal entry of the inverse [s^2]
  double condition = 0;  ///< condition number after diagonal equilibration

  double peb() const;
  double ceb() const;
};

/// Pseudo-inverse of a symmetric positive semidefinite matrix through its
/// eigendecomposition after diagonal equilibration. Throws an
/// "unidentifiable" error if the equilibrated condition number exceeds
/// 1e12, naming the smallest eigenvalue. Writes the condition number.
RMat symmetric_inverse(const RMat& j, double* condition = nullptr);

FimBundle location_bundle(const ChannelParams& gamma, const LocationParams& eta,
                          const Codebook& codebook, const Scenario& scenario,
                          bool block_diagonal = false);

/// Convenience: bundle at the scenario's true position.
FimBundle scenario_bundle(const Scenario& scenario, const Codebook& codebook,
                          bool block_diagonal = false);

}  // namespace risloc
