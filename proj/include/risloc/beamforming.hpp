/**
 * @file beamforming.hpp
 * @brief Codebook construction (proposed, directional, DFT, reduced-G) and
 * worst-case bound power allocation over an uncertainty region.
 */
#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "risloc/codebook.hpp"
#include "risloc/fim.hpp"
#include "risloc/scenario.hpp"

namespace risloc {

/// AoDs from `anchor` spanning the region, spaced by at most 1.8/n_elements
/// radians, endpoints included. Count is ceil(interval/spacing) + 1.
std::vector<double> aod_grid(const UncertaintyRegion& region, const Vec2& anchor, int n_elements);

/// AoD from `anchor` towards the region center.
double center_aod(const UncertaintyRegion& region, const Vec2& anchor);

/// Elementwise exp(j arg v); zero entries map to 1.
CVec unit_modulus_project(const CVec& v);

/// BS: beam to the RIS, L_BS directional and L_BS derivative beams. RIS:
/// L_RIS directional and L_RIS projected derivative profiles. All pairs.
Codebook proposed_codebook(const UncertaintyRegion& region, const Scenario& scenario);

/// Same column counts as the proposed codebook, directional beams only.
/// With `doubled` the angular grids carry 2L angles over the same interval;
/// otherwise the L-point grids are used and the derivative slots are dropped.
Codebook directional_codebook(const UncertaintyRegion& region, const Scenario& scenario,
                              bool doubled = true);

/// 2L consecutive DFT columns around the one closest to the center AoD on
/// each side (cyclic wrap), plus the beam to the RIS on the BS side.
Codebook dft_codebook(const UncertaintyRegion& region, const Scenario& scenario);

/// Index of the N-point DFT column closest to `target`.
int closest_dft_column(const CVec& target);

/// Keeps every RIS profile for the RIS-aimed BS beam and pairs each
/// UE-aimed BS beam with a single profile steered at the center RIS AoD.
Codebook reduced_g_codebook(const Codebook& full, double center_ris_aod, const Scenario& scenario);

nlohmann::json codebook_to_json(const Codebook& codebook);
Codebook codebook_from_json(const nlohmann::json& doc);

enum class BoundMetric { kPeb, kCeb };
BoundMetric parse_metric(const std::string& name);
std::string metric_name(BoundMetric metric);

struct AllocationOptions {
  double rel_tol = 1e-6;  ///< relative improvement threshold over `window` iterations
  int window = 50;
  int max_iter = 20000;
  double initial_temperature = 0.05;  ///< log-sum-exp temperature relative to the objective scale
  double final_temperature = 1e-7;
  double anneal = 0.7;  ///< temperature decay factor applied when a stage stalls
  int stage_window = 100;  ///< iterations between stall checks within a temperature stage
  double stall_fraction = 0.01;  ///< stage stalls when the smoothed decrease is below this times the temperature
};

/// Worst-case bound over a set of positions as a function of the power
/// vector. The location FIM at every point is linear in the powers, so the
/// per-transmission matrices are computed once.
class AllocationProblem {
 public:
  AllocationProblem(const Codebook& codebook, const std::vector<Vec2>& points,
                    const Scenario& scenario, BoundMetric metric);

  int transmissions() const { return g_; }
  int points() const { return static_cast<int>(per_point_.size()); }
  /// Squared bound at every point; +inf where the FIM is singular.
  RVec squared_bounds(const RVec& powers) const;
  /// Squared bounds and their gradients (points x G).
  RVec squared_bounds(const RVec& powers, RMat* gradient) const;
  /// max over points of the (unsquared) bound.
  double worst_case(const RVec& powers) const;
  /// Equilibrated per-transmission FIM of transmission g at point m and the
  /// diagonal scaling that undoes the equilibration.
  const Mat7& point_matrix(int m, int g) const { return per_point_[static_cast<size_t>(m)][static_cast<size_t>(g)]; }
  const Eigen::Matrix<double, 7, 1>& point_scale(int m) const { return scale_[static_cast<size_t>(m)]; }

 private:
  int g_;
  BoundMetric metric_;
  std::vector<std::vector<Mat7>> per_point_;  ///< equilibrated per-transmission FIMs
  std::vector<Eigen::Matrix<double, 7, 1>> scale_;
};

struct AllocationResult {
  RVec powers;
  double worst_case = 0;          ///< achieved max bound [m or s]
  double uniform_worst_case = 0;  ///< the same with uniform powers
  int iterations = 0;
  std::vector<double> best_history;  ///< best-so-far squared objective per iteration
};

/// Minimizes the worst-case bound over the simplex by entropic mirror
/// descent on a log-sum-exp smoothed maximum with annealed temperature.
AllocationResult allocate_power(const Codebook& codebook, const std::vector<Vec2>& points,
                                const Scenario& scenario, BoundMetric metric,
                                const AllocationOptions& options = {});
AllocationResult allocate_power(const AllocationProblem& problem,
                                const AllocationOptions& options = {});

/// Worst-case bound of a codebook with its current powers.
double worst_case_bound(const Codebook& codebook, const std::vector<Vec2>& points,
                        const Scenario& scenario, BoundMetric metric);

}  // namespace risloc
