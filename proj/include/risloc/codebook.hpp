/**
 * @file codebook.hpp
 * @brief Beam/profile codebook and uncertainty-region value types.
 */
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "risloc/common.hpp"

namespace risloc {

/// Paired BS precoders and RIS phase profiles used over G transmissions.
///
/// Columns are stored already conjugated, so the channel applies them as
/// a^T f and b^T omega. Transmission g uses precoder sqrt(powers[g]) *
/// bs_beams.col(pairs[g].first) and profile ris_profiles.col(pairs[g].second).
struct Codebook {
  CMat bs_beams;      ///< N_BS x K_BS, unit-norm columns
  CMat ris_profiles;  ///< N_RIS x K_RIS, unit-modulus entries
  std::vector<std::pair<int, int>> pairs;
  RVec powers;  ///< length G, nonnegative, sums to one
  std::vector<std::string> bs_labels;   ///< bs_to_ris, directional or derivative
  std::vector<std::string> ris_labels;  ///< directional or derivative
  std::string kind;                     ///< proposed, directional, dft, reduced_g, custom

  int size() const { return static_cast<int>(pairs.size()); }
  /// Power-scaled precoder of transmission g.
  CVec beam(int g) const;
  /// RIS profile of transmission g.
  CVec profile(int g) const;
  /// Throws unless beams are unit-norm, profiles unit-modulus, pairs in
  /// range, and powers nonnegative with one entry per pair.
  void validate(int n_bs, int n_ris) const;
  /// Sets every power to 1/G.
  void set_uniform_powers();
};

/// Axis-aligned box of candidate UE positions with an M-point lattice.
struct UncertaintyRegion {
  Vec2 center{5.0, 5.0};
  Vec2 half_extent{1.5, 1.5};
  int grid_m = 9;

  void validate() const;
  /// sqrt(M) x sqrt(M) lattice including the corners, x-major order.
  std::vector<Vec2> grid_points() const;
  std::vector<Vec2> corners() const;
};

}  // namespace risloc
