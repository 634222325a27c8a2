/**
 * @file estimation.cpp
 * @brief Position and clock-offset estimators built on the two-path model.
 */
#include "risloc/estimation.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

namespace risloc {

void SearchConfig::validate(int n_sub) const {
  region.validate();
  if (q_grid < 2 || q_delta < 1) throw Error("invalid_config", "search lattice needs q_grid >= 2");
  if (n_fft < n_sub || (n_fft & (n_fft - 1)) != 0)
    throw Error("invalid_config", "n_fft must be a power of two no smaller than n_sub");
  if (!(delta_max >= delta_min)) throw Error("invalid_config", "empty clock-offset span");
  if (refine.max_iter < 1 || !(refine.initial_step > 0))
    throw Error("invalid_config", "refinement needs max_iter >= 1 and a positive step");
}

std::vector<double> SearchConfig::axis(int dim) const {
  std::vector<double> out;
  const double lo = region.center(dim) - region.half_extent(dim);
  const double hi = region.center(dim) + region.half_extent(dim);
  for (int i = 0; i < q_grid; ++i) out.push_back(lo + (hi - lo) * i / (q_grid - 1));
  return out;
}

std::vector<double> SearchConfig::delta_axis() const {
  if (q_delta == 1) return {0.5 * (delta_min + delta_max)};
  std::vector<double> out;
  for (int i = 0; i < q_delta; ++i)
    out.push_back(delta_min + (delta_max - delta_min) * i / (q_delta - 1));
  return out;
}

CostModel::CostModel(const ObservationSet& obs, const KnownModel& known) : obs_(obs), known_(known) {
  const Scenario& sc = known.scenario;
  const Codebook& cb = known.codebook;
  const int G = cb.size();
  if (obs.y.rows() != G || obs.y.cols() != sc.n_sub || known.symbols.rows() != G ||
      known.symbols.cols() != sc.n_sub)
    throw Error("dimension_mismatch", "observations, pilots and codebook disagree in size");
  beams_.resize(sc.n_bs, G);
  profiles_.resize(sc.n_ris, G);
  for (int g = 0; g < G; ++g) {
    beams_.col(g) = cb.beam(g);
    profiles_.col(g) = cb.profile(g);
  }
  const Vec2 d_br = sc.r - sc.q;
  const double theta_br = wrap_angle(std::atan2(d_br.y(), d_br.x()));
  phi_br_ = wrap_angle(-kPi + theta_br);
  ris_gain_ = (steering_bs(theta_br, sc.n_bs).transpose() * beams_).transpose();
  energy_ = obs.y.squaredNorm();
  // Largest response either path can produce per subcarrier; columns far
  // below it are treated as numerically absent.
  const double peak = beams_.colwise().squaredNorm().sum() * sc.n_bs * sc.n_ris * sc.n_ris *
                      known.symbols.cwiseAbs2().maxCoeff();
  column_floor_ = 1e-24 * peak;
}

namespace {

struct PathResponses {
  Eigen::RowVectorXcd los;  ///< a^T(theta_bu) f_g
  Eigen::RowVectorXcd ris;  ///< b^T(theta_ru) omega_g a^T(theta_br) f_g
  double range_bu = 0;
  double range_r = 0;
};

PathResponses path_responses(const Vec2& p, const Scenario& sc, const CMat& beams,
                             const CMat& profiles, const CVec& ris_gain, double phi_br) {
  const Vec2 d_bu = p - sc.q;
  const Vec2 d_ru = p - sc.r;
  if (d_bu.norm() <= 0 || d_ru.norm() <= 0)
    throw Error("degenerate_geometry", "candidate position coincides with the BS or the RIS");
  PathResponses out;
  out.los = steering_bs(std::atan2(d_bu.y(), d_bu.x()), sc.n_bs).transpose() * beams;
  out.ris = (combined_ris_steering(std::atan2(d_ru.y(), d_ru.x()), phi_br, sc.n_ris).transpose() *
             profiles)
                .cwiseProduct(ris_gain.transpose());
  out.range_bu = d_bu.norm();
  out.range_r = (sc.r - sc.q).norm() + d_ru.norm();
  return out;
}

}  // namespace

JmlResult CostModel::jml(const Vec2& p, double delta) const {
  const Scenario& sc = known_.scenario;
  const PathResponses pr = path_responses(p, sc, beams_, profiles_, ris_gain_, phi_br_);
  const double T = sc.sample_period();
  const CVec c_bu = freq_steering(pr.range_bu / kSpeedOfLight + delta, sc.n_sub, T);
  const CVec c_r = freq_steering(pr.range_r / kSpeedOfLight + delta, sc.n_sub, T);

  // Model columns laid out as G x N matrices.
  const CMat col1 = (pr.los.transpose() * c_bu.transpose()).cwiseProduct(known_.symbols);
  const CMat col2 = (pr.ris.transpose() * c_r.transpose()).cwiseProduct(known_.symbols);

  const double b11 = col1.squaredNorm();
  const double b22 = col2.squaredNorm();
  const cd b12 = (col1.conjugate().cwiseProduct(col2)).sum();
  const cd r1 = (col1.conjugate().cwiseProduct(obs_.y)).sum();
  const cd r2 = (col2.conjugate().cwiseProduct(obs_.y)).sum();
  const double det = b11 * b22 - std::norm(b12);
  const double floor = column_floor_ * sc.n_sub;
  if (!(b11 > floor) || !(b22 > floor) || !(det > 1e-14 * b11 * b22)) {
    std::ostringstream msg;
    msg << "singular amplitude normal matrix at p = [" << p.x() << ", " << p.y() << "]";
    throw Error("singular_model", msg.str());
  }
  const cd x1 = (b22 * r1 - b12 * r2) / det;
  const cd x2 = (b11 * r2 - std::conj(b12) * r1) / det;

  JmlResult out;
  out.cost = (obs_.y - x1 * col1 - x2 * col2).squaredNorm();
  const double sqrt_p = std::sqrt(sc.power);
  out.alpha_bu = x1 / sqrt_p;
  out.alpha_r = x2 / sqrt_p;
  return out;
}

CostModel::RmlResult CostModel::rml(const Vec2& p, bool keep_coefficients) const {
  const Scenario& sc = known_.scenario;
  const PathResponses pr = path_responses(p, sc, beams_, profiles_, ris_gain_, phi_br_);
  const int N = sc.n_sub;
  RmlResult out;
  if (keep_coefficients) out.e_hat.resize(2, N);

  const RVec los_sq = pr.los.cwiseAbs2().transpose();
  const RVec ris_sq = pr.ris.cwiseAbs2().transpose();
  const CVec cross_lr = pr.los.conjugate().cwiseProduct(pr.ris).transpose();
  for (int n = 0; n < N; ++n) {
    const CVec s = known_.symbols.col(n);
    const RVec s_sq = s.cwiseAbs2();
    const CVec phi1 = pr.los.transpose().cwiseProduct(s);
    const CVec phi2 = pr.ris.transpose().cwiseProduct(s);
    const CVec y = obs_.y.col(n);

    const double u = los_sq.dot(s_sq);
    const double z = ris_sq.dot(s_sq);
    const cd v = (cross_lr.array() * s_sq.array().cast<cd>()).sum();
    const cd w = std::conj(v);
    const cd det = u * z - v * w;
    cd e1, e2;
    if (!(u > column_floor_) || !(z > column_floor_) || std::abs(det) < 1e-14 * u * z) {
      CMat phi(phi1.size(), 2);
      phi.col(0) = phi1;
      phi.col(1) = phi2;
      const CVec e = phi.completeOrthogonalDecomposition().solve(y);
      e1 = e(0);
      e2 = e(1);
      ++out.rank_deficient;
    } else {
      const cd r1 = phi1.dot(y);
      const cd r2 = phi2.dot(y);
      e1 = (z * r1 - v * r2) / det;
      e2 = (-w * r1 + u * r2) / det;
    }
    out.cost += (y - e1 * phi1 - e2 * phi2).squaredNorm();
    if (keep_coefficients) {
      out.e_hat(0, n) = e1;
      out.e_hat(1, n) = e2;
    }
  }
  return out;
}

JmlResult jml_cost(const Vec2& p, double delta, const ObservationSet& obs, const KnownModel& known) {
  return CostModel(obs, known).jml(p, delta);
}

double rml_cost(const Vec2& p, const ObservationSet& obs, const KnownModel& known, int* rank_deficient) {
  const auto r = CostModel(obs, known).rml(p);
  if (rank_deficient) *rank_deficient = r.rank_deficient;
  return r.cost;
}

Estimate jml_grid3d(const ObservationSet& obs, const KnownModel& known, const SearchConfig& cfg) {
  cfg.validate(known.scenario.n_sub);
  const CostModel model(obs, known);
  const auto xs = cfg.axis(0);
  const auto ys = cfg.axis(1);
  const auto ds = cfg.delta_axis();
  Estimate best;
  best.jml_cost = std::numeric_limits<double>::infinity();
  for (double x : xs)
    for (double y : ys)
      for (double d : ds) {
        JmlResult r;
        try {
          r = model.jml(Vec2(x, y), d);
        } catch (const Error&) {
          continue;
        }
        if (r.cost < best.jml_cost) {
          best.jml_cost = r.cost;
          best.p_hat = Vec2(x, y);
          best.delta_hat = d;
          best.alpha_bu = r.alpha_bu;
          best.alpha_r = r.alpha_r;
        }
      }
  if (!std::isfinite(best.jml_cost))
    throw Error("singular_model", "joint ML cost is undefined on the whole lattice");
  return best;
}

Vec2 rml_grid2d(const ObservationSet& obs, const KnownModel& known, const SearchConfig& cfg) {
  cfg.validate(known.scenario.n_sub);
  const CostModel model(obs, known);
  const auto xs = cfg.axis(0);
  const auto ys = cfg.axis(1);
  Vec2 best_p = Vec2(xs.front(), ys.front());
  double best = std::numeric_limits<double>::infinity();
  for (double x : xs)
    for (double y : ys) {
      const double c = model.rml(Vec2(x, y)).cost;
      if (c < best) {
        best = c;
        best_p = Vec2(x, y);
      }
    }
  return best_p;
}

double fft_bin_to_delay(int bin, int n_fft, int n_sub, double t_samp) {
  // A tone exp(-j 2 pi n tau / (N T)) peaks at bin n_fft - tau n_fft / (N T).
  const int k = (n_fft - bin % n_fft) % n_fft;
  const double span = n_sub * t_samp;
  return k <= n_fft / 2 ? k * span / n_fft : (k - n_fft) * span / n_fft;
}

double fft_delay(const CVec& e_vec, int n_fft, double t_samp) {
  const int n = static_cast<int>(e_vec.size());
  if (n_fft < n) throw Error("invalid_config", "n_fft shorter than the input");
  if (e_vec.cwiseAbs().maxCoeff() == 0.0) throw Error("invalid_input", "all-zero delay input");

  static std::mutex plan_mutex;  // FFTW planning is not thread-safe
  fftw_complex* buf = fftw_alloc_complex(static_cast<size_t>(n_fft));
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    plan = fftw_plan_dft_1d(n_fft, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (int i = 0; i < n_fft; ++i) {
    buf[i][0] = i < n ? e_vec(i).real() : 0.0;
    buf[i][1] = i < n ? e_vec(i).imag() : 0.0;
  }
  fftw_execute(plan);
  int best = 0;
  double best_mag = -1.0;
  for (int k = 0; k < n_fft; ++k) {
    const double mag = buf[k][0] * buf[k][0] + buf[k][1] * buf[k][1];
    if (mag > best_mag) {
      best_mag = mag;
      best = k;
    }
  }
  {
    std::lock_guard<std::mutex> lock(plan_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  return fft_bin_to_delay(best, n_fft, n, t_samp);
}

double clock_offset(double tau_bu_hat, double tau_r_hat, const Vec2& p_hat, const Scenario& sc) {
  const double range_bu = (p_hat - sc.q).norm();
  const double range_r = (sc.r - sc.q).norm() + (sc.r - p_hat).norm();
  return 0.5 * (tau_bu_hat - range_bu / kSpeedOfLight + tau_r_hat - range_r / kSpeedOfLight);
}

RefineResult nelder_mead(const std::function<double(const Eigen::Vector3d&)>& cost,
                         const Eigen::Vector3d& x0, double initial_step, int max_iter, double x_tol,
                         double f_tol) {
  auto eval = [&](const Eigen::Vector3d& x) {
    const double f = cost(x);
    if (!std::isfinite(f)) {
      std::ostringstream msg;
      msg << "non-finite cost at [" << x(0) << ", " << x(1) << ", " << x(2) << "]";
      throw Error("non_finite_cost", msg.str());
    }
    return f;
  };

  std::array<Eigen::Vector3d, 4> xs;
  std::array<double, 4> fs;
  xs[0] = x0;
  fs[0] = eval(x0);
  for (int i = 0; i < 3; ++i) {
    xs[static_cast<size_t>(i + 1)] = x0;
    xs[static_cast<size_t>(i + 1)](i) += initial_step;
    fs[static_cast<size_t>(i + 1)] = eval(xs[static_cast<size_t>(i + 1)]);
  }

  int it = 0;
  for (; it < max_iter; ++it) {
    std::array<int, 4> order{0, 1, 2, 3};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fs[static_cast<size_t>(a)] < fs[static_cast<size_t>(b)]; });
    std::array<Eigen::Vector3d, 4> sx;
    std::array<double, 4> sf;
    for (size_t i = 0; i < 4; ++i) {
      sx[i] = xs[static_cast<size_t>(order[i])];
      sf[i] = fs[static_cast<size_t>(order[i])];
    }
    xs = sx;
    fs = sf;

    double diameter = 0;
    for (size_t i = 1; i < 4; ++i) diameter = std::max(diameter, (xs[i] - xs[0]).norm());
    if (diameter < x_tol || fs[3] - fs[0] <= f_tol) break;

    const Eigen::Vector3d centroid = (xs[0] + xs[1] + xs[2]) / 3.0;
    const Eigen::Vector3d xr = centroid + (centroid - xs[3]);
    const double fr = eval(xr);
    if (fr < fs[0]) {
      const Eigen::Vector3d xe = centroid + 2.0 * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        xs[3] = xe;
        fs[3] = fe;
      } else {
        xs[3] = xr;
        fs[3] = fr;
      }
      continue;
    }
    if (fr < fs[2]) {
      xs[3] = xr;
      fs[3] = fr;
      continue;
    }
    bool contracted = false;
    if (fr < fs[3]) {
      const Eigen::Vector3d xc = centroid + 0.5 * (xr - centroid);
      const double fc = eval(xc);
      if (fc <= fr) {
        xs[3] = xc;
        fs[3] = fc;
        contracted = true;
      }
    } else {
      const Eigen::Vector3d xc = centroid + 0.5 * (xs[3] - centroid);
      const double fc = eval(xc);
      if (fc < fs[3]) {
        xs[3] = xc;
        fs[3] = fc;
        contracted = true;
      }
    }
    if (!contracted) {
      for (size_t i = 1; i < 4; ++i) {
        xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
        fs[i] = eval(xs[i]);
      }
    }
  }

  size_t best = 0;
  for (size_t i = 1; i < 4; ++i)
    if (fs[i] < fs[best]) best = i;
  return {xs[best], fs[best], it};
}

Estimate refine(const Vec2& p_init, double delta_init, const CostModel& model,
                const RefineOptions& opt) {
  auto cost = [&](const Eigen::Vector3d& x) {
    return model.jml(Vec2(x(0), x(1)), x(2) / kSpeedOfLight).cost;
  };
  const Eigen::Vector3d x0(p_init.x(), p_init.y(), delta_init * kSpeedOfLight);
  const RefineResult r =
      nelder_mead(cost, x0, opt.initial_step, opt.max_iter, opt.x_tol, opt.f_tol * model.energy());

  Estimate est;
  est.p_hat = Vec2(r.x(0), r.x(1));
  est.delta_hat = r.x(2) / kSpeedOfLight;
  const JmlResult fit = model.jml(est.p_hat, est.delta_hat);
  est.jml_cost = fit.cost;
  est.alpha_bu = fit.alpha_bu;
  est.alpha_r = fit.alpha_r;
  est.iterations = r.iterations;
  return est;
}

Estimate estimate_pipeline(const ObservationSet& obs, const KnownModel& known,
                           const SearchConfig& cfg) {
  const Scenario& sc = known.scenario;
  cfg.validate(sc.n_sub);
  const CostModel model(obs, known);

  const Vec2 p0 = rml_grid2d(obs, known, cfg);
  const auto coarse = model.rml(p0, true);
  const double T = sc.sample_period();
  const double tau_bu = fft_delay(coarse.e_hat.row(0).transpose(), cfg.n_fft, T);
  const double tau_r = fft_delay(coarse.e_hat.row(1).transpose(), cfg.n_fft, T);
  const double delta0 = clock_offset(tau_bu, tau_r, p0, sc);

  Estimate est = refine(p0, delta0, model, cfg.refine);
  est.p_coarse = p0;
  est.delta_coarse = delta0;
  est.tau_hat_bu = tau_bu;
  est.tau_hat_r = tau_r;
  est.rml_cost = coarse.cost;
  est.rank_deficient_subcarriers = coarse.rank_deficient;
  return est;
}

double noise_variance_estimate(const Vec2& p, double delta, const ObservationSet& obs,
                               const KnownModel& known) {
  const double cost = jml_cost(p, delta, obs, known).cost;
  return cost / static_cast<double>(obs.y.rows() * obs.y.cols());
}

}  // namespace risloc
