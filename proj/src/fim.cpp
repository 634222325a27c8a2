/**
 * @file fim.cpp
 * @brief Slepian-Bangs Fisher information for the two-path channel, the
 * channel-to-location Jacobian and the resulting error bounds.
 */
#include "risloc/fim.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace risloc {

std::vector<TransmitCovariance> codebook_covariances(const Codebook& cb) {
  std::vector<TransmitCovariance> out;
  out.reserve(cb.size());
  for (int g = 0; g < cb.size(); ++g) {
    const CVec f = cb.beam(g);
    const CVec w = cb.profile(g);
    out.push_back({f * f.adjoint(), w * w.adjoint(), w});
  }
  return out;
}

std::array<cd, 8> signal_derivatives(const ChannelParams& gamma, const CVec& f, const CVec& omega,
                                     cd s, int n, const Scenario& sc) {
  const double T = sc.sample_period();
  const double kappa = 2.0 * kPi * n / (sc.n_sub * T);
  const double sqrt_p = std::sqrt(sc.power);

  const cd u = (steering_bs(gamma.theta_bu, sc.n_bs).transpose() * f).value();
  const cd u_dot = (derivative_steering_bs(gamma.theta_bu, sc.n_bs).transpose() * f).value();
  const cd v = (steering_bs(gamma.theta_br, sc.n_bs).transpose() * f).value();
  const cd w = (combined_ris_steering(gamma.theta_ru, gamma.phi_br, sc.n_ris).transpose() * omega)
                   .value();
  const cd w_dot =
      (derivative_combined(gamma.theta_ru, gamma.phi_br, sc.n_ris).transpose() * omega).value();

  // Path amplitudes without the modulus, so the modulus partial stays
  // defined when a path is switched off.
  const cd unit_bu = sqrt_p * std::polar(1.0, gamma.phi_bu) *
                     std::polar(1.0, -kappa * gamma.tau_bu) * s;
  const cd unit_r = sqrt_p * std::polar(1.0, gamma.phi_r) *
                    std::polar(1.0, -kappa * gamma.tau_r()) * s;
  const cd amp_bu = gamma.rho_bu * unit_bu;
  const cd amp_r = gamma.rho_r * unit_r;

  std::array<cd, 8> d;
  d[kTauBu] = amp_bu * (-kJ * kappa) * u;
  d[kThetaBu] = amp_bu * u_dot;
  d[kRhoBu] = unit_bu * u;
  d[kPhiBu] = kJ * amp_bu * u;
  d[kTauRu] = amp_r * (-kJ * kappa) * w * v;
  d[kThetaRu] = amp_r * w_dot * v;
  d[kRhoR] = unit_r * w * v;
  d[kPhiR] = kJ * amp_r * w * v;
  return d;
}

Mat8 channel_fim_exact(const ChannelParams& gamma, const Codebook& cb, const CMat& symbols,
                       const Scenario& sc) {
  if (symbols.rows() != cb.size() || symbols.cols() != sc.n_sub)
    throw Error("dimension_mismatch", "symbol matrix must be G x N");
  Mat8 j = Mat8::Zero();
  for (int g = 0; g < cb.size(); ++g) {
    const CVec f = cb.beam(g);
    const CVec w = cb.profile(g);
    for (int n = 0; n < sc.n_sub; ++n) {
      const auto d = signal_derivatives(gamma, f, w, symbols(g, n), n, sc);
      for (int h = 0; h < 8; ++h)
        for (int k = 0; k < 8; ++k) j(h, k) += std::real(std::conj(d[h]) * d[k]);
    }
  }
  return (2.0 / sc.noise_var) * j;
}

namespace {

/// Per-subcarrier factor multiplying the unit-modulus path amplitude in the
/// derivative with respect to the parameter at position `slot` (0..3) of a
/// path block: delay, angle, modulus, phase.
cd slot_factor(int slot, double kappa, double rho) {
  switch (slot) {
    case 0: return -kJ * kappa * rho;
    case 1: return rho;
    case 2: return 1.0;
    default: return kJ * rho;
  }
}

}  // namespace

Mat8 channel_fim_from_covariances(const ChannelParams& gamma,
                                  const std::vector<TransmitCovariance>& covs, const Scenario& sc,
                                  bool block_diagonal) {
  const int N = sc.n_sub;
  const RVec kappa = subcarrier_kappa(N, sc.sample_period());
  const CVec c_diff = freq_steering(gamma.tau_r() - gamma.tau_bu, N, sc.sample_period());
  const double P = sc.power;
  const double scale = 2.0 / sc.noise_var;

  // Conjugated array vectors per slot: the LoS angle slot uses the
  // derivative, every other slot the steering vector itself.
  const CVec a = steering_bs(gamma.theta_bu, sc.n_bs).conjugate();
  const CVec a_dot = derivative_steering_bs(gamma.theta_bu, sc.n_bs).conjugate();
  const CVec a_br = steering_bs(gamma.theta_br, sc.n_bs).conjugate();
  const CVec b = combined_ris_steering(gamma.theta_ru, gamma.phi_br, sc.n_ris).conjugate();
  const CVec b_dot = derivative_combined(gamma.theta_ru, gamma.phi_br, sc.n_ris).conjugate();
  const CVec* los_vec[4] = {&a, &a_dot, &a, &a};
  const CVec* ris_vec[4] = {&b, &b_dot, &b, &b};

  // Subcarrier sums of conj(k_h) k_k, and the same weighted by the
  // differential delay steering for the cross block.
  cd s_los[4][4], s_ris[4][4], s_cross[4][4];
  for (int h = 0; h < 4; ++h)
    for (int k = 0; k < 4; ++k) {
      s_los[h][k] = s_ris[h][k] = s_cross[h][k] = 0.0;
      for (int n = 0; n < N; ++n) {
        s_los[h][k] += std::conj(slot_factor(h, kappa(n), gamma.rho_bu)) *
                       slot_factor(k, kappa(n), gamma.rho_bu);
        s_ris[h][k] += std::conj(slot_factor(h, kappa(n), gamma.rho_r)) *
                       slot_factor(k, kappa(n), gamma.rho_r);
        s_cross[h][k] += std::conj(slot_factor(h, kappa(n), gamma.rho_bu)) *
                         slot_factor(k, kappa(n), gamma.rho_r) * c_diff(n);
      }
    }

  // Quadratic forms summed over transmissions. For conjugated vectors x, y
  // the form y^H X x equals x_k^T X x_h^* in the unconjugated notation.
  cd q_los[4][4] = {}, q_ris[4][4] = {}, q_cross[4][4] = {};
  for (const auto& cov : covs) {
    const cd gain_br = (a_br.adjoint() * cov.x * a_br).value();
    for (int h = 0; h < 4; ++h) {
      const CVec x_h = cov.x * (*los_vec[h]);
      const CVec psi_h = cov.psi * (*ris_vec[h]);
      const cd br_h = (a_br.adjoint() * x_h).value();
      for (int k = 0; k < 4; ++k) {
        q_los[h][k] += (los_vec[k]->adjoint() * x_h).value();
        q_ris[h][k] += gain_br * (ris_vec[k]->adjoint() * psi_h).value();
        q_cross[h][k] += br_h * (ris_vec[k]->adjoint() * cov.omega).value();
      }
    }
  }

  Mat8 j = Mat8::Zero();
  const double c_los = scale * P;
  const double c_ris = scale * P;
  const cd c_cross = scale * P * std::polar(1.0, gamma.phi_r - gamma.phi_bu);
  for (int h = 0; h < 4; ++h)
    for (int k = 0; k < 4; ++k) {
      j(h, k) = c_los * std::real(s_los[h][k] * q_los[h][k]);
      j(4 + h, 4 + k) = c_ris * std::real(s_ris[h][k] * q_ris[h][k]);
      if (!block_diagonal) {
        const double x = std::real(c_cross * s_cross[h][k] * q_cross[h][k]);
        j(h, 4 + k) = x;
        j(4 + k, h) = x;
      }
    }
  return j;
}

Mat8 channel_fim_closed_form(const ChannelParams& gamma, const Codebook& cb, const Scenario& sc,
                             bool block_diagonal) {
  return channel_fim_from_covariances(gamma, codebook_covariances(cb), sc, block_diagonal);
}

Mat78 transform_matrix(const LocationParams& eta, const Vec2& r, const Vec2& q) {
  const Vec2 d_bu = eta.p - q;
  const Vec2 d_ru = eta.p - r;
  const double n_bu = d_bu.norm();
  const double n_ru = d_ru.norm();
  if (n_bu <= 0 || n_ru <= 0)
    throw Error("degenerate_geometry", "UE position coincides with the BS or the RIS");

  Mat78 t = Mat78::Zero();
  t(0, kTauBu) = d_bu.x() / (kSpeedOfLight * n_bu);
  t(1, kTauBu) = d_bu.y() / (kSpeedOfLight * n_bu);
  t(0, kThetaBu) = -d_bu.y() / (n_bu * n_bu);
  t(1, kThetaBu) = d_bu.x() / (n_bu * n_bu);
  t(0, kTauRu) = d_ru.x() / (kSpeedOfLight * n_ru);
  t(1, kTauRu) = d_ru.y() / (kSpeedOfLight * n_ru);
  t(0, kThetaRu) = -d_ru.y() / (n_ru * n_ru);
  t(1, kThetaRu) = d_ru.x() / (n_ru * n_ru);
  t(2, kRhoBu) = 1.0;
  t(3, kPhiBu) = 1.0;
  t(4, kRhoR) = 1.0;
  t(5, kPhiR) = 1.0;
  t(6, kTauBu) = 1.0;
  t(6, kTauRu) = 1.0;
  return t;
}

double FimBundle::peb() const { return std::sqrt(peb_sq); }
double FimBundle::ceb() const { return std::sqrt(ceb_sq); }

RMat symmetric_inverse(const RMat& j, double* condition) {
  const Eigen::Index n = j.rows();
  RVec d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(j(i, i) > 0)) {
      std::ostringstream msg;
      msg << "unidentifiable configuration: parameter " << i
          << " carries no information (smallest eigenvalue 0)";
      throw Error("unidentifiable", msg.str());
    }
    d(i) = 1.0 / std::sqrt(j(i, i));
  }
  const RMat js = d.asDiagonal() * (0.5 * (j + j.transpose())) * d.asDiagonal();
  Eigen::SelfAdjointEigenSolver<RMat> eig(js);
  const RVec& lam = eig.eigenvalues();
  const double lmax = lam(n - 1);
  const double lmin = lam(0);
  const double cond = lmin > 0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (condition) *condition = cond;
  if (!(cond < 1e12)) {
    std::ostringstream msg;
    msg << "unidentifiable configuration: smallest eigenvalue " << lmin << " of the equilibrated FIM"
        << " (largest " << lmax << ")";
    throw Error("unidentifiable", msg.str());
  }
  RVec inv_lam(n);
  for (Eigen::Index i = 0; i < n; ++i) inv_lam(i) = lam(i) > 1e-12 * lmax ? 1.0 / lam(i) : 0.0;
  const RMat& v = eig.eigenvectors();
  return d.asDiagonal() * (v * inv_lam.asDiagonal() * v.transpose()) * d.asDiagonal();
}

FimBundle location_bundle(const ChannelParams& gamma, const LocationParams& eta,
                          const Codebook& cb, const Scenario& sc, bool block_diagonal) {
  FimBundle out;
  out.j_gamma = channel_fim_closed_form(gamma, cb, sc, block_diagonal);
  out.t_mat = transform_matrix(eta, sc.r, sc.q);
  out.j_eta = out.t_mat * out.j_gamma * out.t_mat.transpose();
  out.j_eta_inv = symmetric_inverse(out.j_eta, &out.condition);
  out.peb_sq = out.j_eta_inv(0, 0) + out.j_eta_inv(1, 1);
  out.ceb_sq = out.j_eta_inv(6, 6);
  return out;
}

FimBundle scenario_bundle(const Scenario& sc, const Codebook& cb, bool block_diagonal) {
  const ChannelParams gamma = geo_to_channel(sc);
  return location_bundle(gamma, location_params(sc, gamma), cb, sc, block_diagonal);
}

}  // namespace risloc
