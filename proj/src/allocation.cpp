/**
 * @file allocation.cpp
 * @brief Worst-case PEB/CEB beam power allocation over a grid of candidate
 * UE positions.
 */
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "risloc/beamforming.hpp"

namespace risloc {

BoundMetric parse_metric(const std::string& name) {
  if (name == "peb") return BoundMetric::kPeb;
  if (name == "ceb") return BoundMetric::kCeb;
  throw Error("invalid_config", "unknown bound metric '" + name + "'");
}

std::string metric_name(BoundMetric metric) { return metric == BoundMetric::kPeb ? "peb" : "ceb"; }

AllocationProblem::AllocationProblem(const Codebook& cb, const std::vector<Vec2>& points,
                                     const Scenario& scenario, BoundMetric metric)
    : g_(cb.size()), metric_(metric) {
  if (g_ < 1) throw Error("invalid_codebook", "codebook has no transmissions");
  if (points.empty()) throw Error("invalid_region", "no candidate positions");

  // Unit-power covariance of each transmission.
  std::vector<TransmitCovariance> unit;
  for (int g = 0; g < g_; ++g) {
    const CVec f = cb.bs_beams.col(cb.pairs[static_cast<size_t>(g)].first);
    const CVec w = cb.profile(g);
    unit.push_back({f * f.adjoint(), w * w.adjoint(), w});
  }

  for (const Vec2& p : points) {
    Scenario sc = scenario;
    sc.p = p;
    const ChannelParams gamma = geo_to_channel(sc);
    const Mat78 t = transform_matrix(location_params(sc, gamma), sc.r, sc.q);

    std::vector<Mat7> mats;
    Mat7 total = Mat7::Zero();
    for (int g = 0; g < g_; ++g) {
      const Mat8 jg = channel_fim_from_covariances(gamma, {unit[static_cast<size_t>(g)]}, sc);
      mats.push_back(t * jg * t.transpose());
      total += mats.back() / g_;
    }
    try {
      symmetric_inverse(total);
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "infeasible allocation: position [" << p.x() << ", " << p.y()
          << "] is not identifiable with uniform powers (" << e.what() << ")";
      throw Error("infeasible", msg.str());
    }
    Eigen::Matrix<double, 7, 1> s;
    for (int i = 0; i < 7; ++i) s(i) = 1.0 / std::sqrt(total(i, i));
    for (auto& m : mats) m = s.asDiagonal() * m * s.asDiagonal();
    per_point_.push_back(std::move(mats));
    scale_.push_back(s);
  }
}

RVec AllocationProblem::squared_bounds(const RVec& powers) const {
  return squared_bounds(powers, nullptr);
}

RVec AllocationProblem::squared_bounds(const RVec& powers, RMat* gradient) const {
  const int m_count = points();
  RVec f(m_count);
  if (gradient) gradient->setZero(m_count, g_);
  const std::vector<int> idx = metric_ == BoundMetric::kPeb ? std::vector<int>{0, 1}
                                                             : std::vector<int>{6};
  for (int m = 0; m < m_count; ++m) {
    const auto& mats = per_point_[static_cast<size_t>(m)];
    Mat7 j = Mat7::Zero();
    for (int g = 0; g < g_; ++g) j += powers(g) * mats[static_cast<size_t>(g)];
    Eigen::LLT<Mat7> llt(j);
    if (llt.info() != Eigen::Success) {
      f(m) = std::numeric_limits<double>::infinity();
      continue;
    }
    double value = 0;
    for (int i : idx) {
      Eigen::Matrix<double, 7, 1> e = Eigen::Matrix<double, 7, 1>::Zero();
      e(i) = 1.0;
      const Eigen::Matrix<double, 7, 1> z = llt.solve(e);
      const double s2 = scale_[static_cast<size_t>(m)](i) * scale_[static_cast<size_t>(m)](i);
      value += s2 * z(i);
      if (gradient)
        for (int g = 0; g < g_; ++g)
          (*gradient)(m, g) -= s2 * z.dot(mats[static_cast<size_t>(g)] * z);
    }
    f(m) = value > 0 ? value : std::numeric_limits<double>::infinity();
  }
  return f;
}

double AllocationProblem::worst_case(const RVec& powers) const {
  return std::sqrt(squared_bounds(powers).maxCoeff());
}

namespace {

/// Log-sum-exp smoothed maximum at absolute temperature t.
double smooth_max(const RVec& f, double t) {
  const double top = f.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + t * std::log((((f.array() - top) / t).exp()).sum());
}

RVec softmax_weights(const RVec& f, double t) {
  const double top = f.maxCoeff();
  RVec w = ((f.array() - top) / t).exp();
  return w / w.sum();
}

}  // namespace

AllocationResult allocate_power(const AllocationProblem& problem, const AllocationOptions& opt) {
  const int G = problem.transmissions();
  AllocationResult res;
  RVec rho = RVec::Constant(G, 1.0 / G);
  RMat grad;
  RVec f = problem.squared_bounds(rho, &grad);
  const double f_scale = f.maxCoeff();
  res.uniform_worst_case = std::sqrt(f_scale);
  if (!std::isfinite(f_scale)) throw Error("infeasible", "uniform allocation is unidentifiable");

  double best = f_scale;
  RVec best_rho = rho;
  double temp = opt.initial_temperature;
  double step = -1.0;
  // Smoothed objective at the start of the current temperature stage.
  double stage_start = smooth_max(f, temp * f_scale);
  int stage_iters = 0;
  int it = 0;

  for (it = 1; it <= opt.max_iter; ++it) {
    const double t_abs = temp * f_scale;
    const RVec w = softmax_weights(f, t_abs);
    const RVec direction = (grad.transpose() * w) / f_scale;
    const double span = direction.maxCoeff() - direction.minCoeff();
    if (step < 0) step = 1.0 / std::max(1e-300, span);

    const double current = smooth_max(f, t_abs);
    double trial_step = 2.0 * step;
    bool accepted = false;
    for (int tries = 0; tries < 60 && span > 0; ++tries) {
      const RVec expo = -trial_step * (direction.array() - direction.minCoeff());
      RVec trial = rho.array() * expo.array().exp();
      trial /= trial.sum();
      RMat trial_grad;
      const RVec trial_f = problem.squared_bounds(trial, &trial_grad);
      if (smooth_max(trial_f, t_abs) < current) {
        rho = trial;
        f = trial_f;
        grad = trial_grad;
        step = trial_step;
        accepted = true;
        break;
      }
      trial_step *= 0.5;
    }

    const double worst = f.maxCoeff();
    if (worst < best) {
      best = worst;
      best_rho = rho;
    }
    res.best_history.push_back(best);

    // Lower the temperature once the smoothed problem stops improving.
    ++stage_iters;
    const double now = smooth_max(f, t_abs);
    const bool cold = temp <= opt.final_temperature;
    if (!cold && (!accepted || (stage_iters >= opt.stage_window && stage_start - now <= opt.stall_fraction * temp * f_scale))) {
      temp = std::max(opt.final_temperature, temp * opt.anneal);
      stage_start = smooth_max(f, temp * f_scale);
      stage_iters = 0;
      continue;
    }
    if (!cold && stage_iters % opt.stage_window == 0) stage_start = now;
    if (cold && !accepted) break;
    if (cold && static_cast<int>(res.best_history.size()) > opt.window) {
      const double past = res.best_history[res.best_history.size() - 1 - static_cast<size_t>(opt.window)];
      if (past - best <= opt.rel_tol * best) break;
    }
  }

  res.powers = best_rho;
  res.worst_case = std::sqrt(best);
  res.iterations = std::min(it, opt.max_iter);
  return res;
}

AllocationResult allocate_power(const Codebook& cb, const std::vector<Vec2>& points,
                                const Scenario& scenario, BoundMetric metric,
                                const AllocationOptions& options) {
  return allocate_power(AllocationProblem(cb, points, scenario, metric), options);
}

double worst_case_bound(const Codebook& cb, const std::vector<Vec2>& points, const Scenario& scenario,
                        BoundMetric metric) {
  double worst = 0;
  for (const Vec2& p : points) {
    Scenario sc = scenario;
    sc.p = p;
    const FimBundle b = scenario_bundle(sc, cb);
    worst = std::max(worst, metric == BoundMetric::kPeb ? b.peb() : b.ceb());
  }
  return worst;
}

}  // namespace risloc
