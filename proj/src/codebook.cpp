/**
 * @file codebook.cpp
 * @brief Codebook value type, uncertainty region lattice, AoD grids and the
 * proposed, directional, DFT and reduced-G codebook constructions.
 */
#include <algorithm>
#include <cmath>
#include <sstream>

#include "risloc/beamforming.hpp"

namespace risloc {

CVec Codebook::beam(int g) const {
  return std::sqrt(powers(g)) * bs_beams.col(pairs.at(static_cast<size_t>(g)).first);
}

CVec Codebook::profile(int g) const {
  return ris_profiles.col(pairs.at(static_cast<size_t>(g)).second);
}

void Codebook::validate(int n_bs, int n_ris) const {
  if (bs_beams.rows() != n_bs || ris_profiles.rows() != n_ris)
    throw Error("invalid_codebook", "codebook array sizes do not match the scenario");
  for (Eigen::Index i = 0; i < bs_beams.cols(); ++i)
    if (std::abs(bs_beams.col(i).norm() - 1.0) > 1e-10)
      throw Error("invalid_codebook", "BS beam " + std::to_string(i) + " is not unit-norm");
  for (Eigen::Index j = 0; j < ris_profiles.cols(); ++j)
    for (Eigen::Index k = 0; k < n_ris; ++k)
      if (std::abs(std::abs(ris_profiles(k, j)) - 1.0) > 1e-10)
        throw Error("invalid_codebook", "RIS profile " + std::to_string(j) + " is not unit-modulus");
  if (powers.size() != size())
    throw Error("invalid_codebook", "one power per transmission is required");
  for (const auto& [i, j] : pairs)
    if (i < 0 || i >= bs_beams.cols() || j < 0 || j >= ris_profiles.cols())
      throw Error("invalid_codebook", "pair index out of range");
  if ((powers.array() < 0).any()) throw Error("invalid_codebook", "powers must be nonnegative");
}

void Codebook::set_uniform_powers() {
  powers = RVec::Constant(size(), 1.0 / std::max(1, size()));
}

void UncertaintyRegion::validate() const {
  if (!(half_extent.x() > 0) || !(half_extent.y() > 0))
    throw Error("invalid_region", "region half extents must be positive");
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(grid_m))));
  if (grid_m < 1 || side * side != grid_m)
    throw Error("invalid_region", "grid_m must be a positive perfect square");
}

std::vector<Vec2> UncertaintyRegion::grid_points() const {
  validate();
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(grid_m))));
  std::vector<Vec2> pts;
  if (side == 1) return {center};
  for (int ix = 0; ix < side; ++ix)
    for (int iy = 0; iy < side; ++iy) {
      const double fx = -1.0 + 2.0 * ix / (side - 1);
      const double fy = -1.0 + 2.0 * iy / (side - 1);
      pts.emplace_back(center.x() + fx * half_extent.x(), center.y() + fy * half_extent.y());
    }
  return pts;
}

std::vector<Vec2> UncertaintyRegion::corners() const {
  std::vector<Vec2> c;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      c.emplace_back(center.x() + sx * half_extent.x(), center.y() + sy * half_extent.y());
  return c;
}

namespace {

/// Angular interval [lo, hi] subtended by the region at the anchor,
/// expressed as offsets from the center AoD.
std::pair<double, double> aod_interval(const UncertaintyRegion& region, const Vec2& anchor) {
  const Vec2 off = (anchor - region.center).cwiseAbs();
  if (off.x() <= region.half_extent.x() && off.y() <= region.half_extent.y())
    throw Error("invalid_region", "anchor lies inside the uncertainty region");
  const double theta_c = center_aod(region, anchor);
  double lo = 0, hi = 0;
  for (const Vec2& c : region.corners()) {
    const Vec2 d = c - anchor;
    const double t = wrap_angle(std::atan2(d.y(), d.x()) - theta_c);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  return {lo, hi};
}

std::vector<double> spread_angles(const UncertaintyRegion& region, const Vec2& anchor, int count) {
  const double theta_c = center_aod(region, anchor);
  if (count <= 1) return {theta_c};
  const auto [lo, hi] = aod_interval(region, anchor);
  std::vector<double> out;
  for (int i = 0; i < count; ++i)
    out.push_back(wrap_angle(theta_c + lo + (hi - lo) * i / (count - 1)));
  return out;
}

double bs_ris_angle(const Scenario& sc) {
  const Vec2 d = sc.r - sc.q;
  return wrap_angle(std::atan2(d.y(), d.x()));
}

double ris_reference_angle(const Scenario& sc) { return wrap_angle(-kPi + bs_ris_angle(sc)); }

CVec unit_norm(const CVec& v, const std::string& what) {
  const double n = v.norm();
  if (!(n > 0)) throw Error("invalid_codebook", what + " has zero norm");
  return v / n;
}

Codebook assemble(const std::vector<CVec>& bs, const std::vector<std::string>& bs_labels,
                  const std::vector<CVec>& ris, const std::vector<std::string>& ris_labels,
                  const std::string& kind) {
  Codebook cb;
  cb.bs_beams.resize(bs.front().size(), static_cast<Eigen::Index>(bs.size()));
  for (size_t i = 0; i < bs.size(); ++i) cb.bs_beams.col(static_cast<Eigen::Index>(i)) = bs[i];
  cb.ris_profiles.resize(ris.front().size(), static_cast<Eigen::Index>(ris.size()));
  for (size_t j = 0; j < ris.size(); ++j) cb.ris_profiles.col(static_cast<Eigen::Index>(j)) = ris[j];
  cb.bs_labels = bs_labels;
  cb.ris_labels = ris_labels;
  cb.kind = kind;
  // Transmission g = i + K_BS * j walks the BS beams fastest.
  for (int j = 0; j < static_cast<int>(ris.size()); ++j)
    for (int i = 0; i < static_cast<int>(bs.size()); ++i) cb.pairs.emplace_back(i, j);
  cb.set_uniform_powers();
  return cb;
}

CVec dft_column(int n, int ell) {
  CVec c(n);
  for (int k = 0; k < n; ++k)
    c(k) = std::polar(1.0, 2.0 * kPi * static_cast<double>((static_cast<long>(k) * ell) % n) / n);
  return c;
}

}  // namespace

double center_aod(const UncertaintyRegion& region, const Vec2& anchor) {
  const Vec2 d = region.center - anchor;
  return wrap_angle(std::atan2(d.y(), d.x()));
}

std::vector<double> aod_grid(const UncertaintyRegion& region, const Vec2& anchor, int n_elements) {
  if (n_elements < 1) throw Error("invalid_region", "n_elements must be positive");
  const auto [lo, hi] = aod_interval(region, anchor);
  const double spacing = 1.8 / n_elements;
  // The small slack keeps exact multiples of the spacing from gaining a point.
  const int count = static_cast<int>(std::ceil((hi - lo) / spacing - 1e-6)) + 1;
  return spread_angles(region, anchor, std::max(1, count));
}

CVec unit_modulus_project(const CVec& v) {
  CVec w(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    w(i) = std::abs(v(i)) > 0 ? v(i) / std::abs(v(i)) : cd(1.0, 0.0);
  return w;
}

Codebook proposed_codebook(const UncertaintyRegion& region, const Scenario& sc) {
  region.validate();
  const auto bs_angles = aod_grid(region, sc.q, sc.n_bs);
  const auto ris_angles = aod_grid(region, sc.r, sc.n_ris);
  const double phi_br = ris_reference_angle(sc);

  std::vector<CVec> bs{unit_norm(steering_bs(bs_ris_angle(sc), sc.n_bs).conjugate(), "RIS beam")};
  std::vector<std::string> bs_labels{"bs_to_ris"};
  for (double t : bs_angles) {
    bs.push_back(unit_norm(steering_bs(t, sc.n_bs).conjugate(), "directional beam"));
    bs_labels.push_back("directional");
  }
  for (double t : bs_angles) {
    bs.push_back(unit_norm(derivative_steering_bs(t, sc.n_bs).conjugate(), "derivative beam"));
    bs_labels.push_back("derivative");
  }

  std::vector<CVec> ris;
  std::vector<std::string> ris_labels;
  for (double t : ris_angles) {
    ris.push_back(combined_ris_steering(t, phi_br, sc.n_ris).conjugate());
    ris_labels.push_back("directional");
  }
  for (double t : ris_angles) {
    ris.push_back(unit_modulus_project(derivative_combined(t, phi_br, sc.n_ris).conjugate()));
    ris_labels.push_back("derivative");
  }
  return assemble(bs, bs_labels, ris, ris_labels, "proposed");
}

Codebook directional_codebook(const UncertaintyRegion& region, const Scenario& sc, bool doubled) {
  region.validate();
  const int l_bs = static_cast<int>(aod_grid(region, sc.q, sc.n_bs).size());
  const int l_ris = static_cast<int>(aod_grid(region, sc.r, sc.n_ris).size());
  const int factor = doubled ? 2 : 1;
  const auto bs_angles = spread_angles(region, sc.q, factor * l_bs);
  const auto ris_angles = spread_angles(region, sc.r, factor * l_ris);
  const double phi_br = ris_reference_angle(sc);

  std::vector<CVec> bs{unit_norm(steering_bs(bs_ris_angle(sc), sc.n_bs).conjugate(), "RIS beam")};
  std::vector<std::string> bs_labels{"bs_to_ris"};
  for (double t : bs_angles) {
    bs.push_back(unit_norm(steering_bs(t, sc.n_bs).conjugate(), "directional beam"));
    bs_labels.push_back("directional");
  }
  std::vector<CVec> ris;
  std::vector<std::string> ris_labels;
  for (double t : ris_angles) {
    ris.push_back(combined_ris_steering(t, phi_br, sc.n_ris).conjugate());
    ris_labels.push_back("directional");
  }
  return assemble(bs, bs_labels, ris, ris_labels, "directional");
}

int closest_dft_column(const CVec& target) {
  const int n = static_cast<int>(target.size());
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int ell = 0; ell < n; ++ell) {
    const double d = (dft_column(n, ell) - target).norm();
    if (d < best_dist) {
      best_dist = d;
      best = ell;
    }
  }
  return best;
}

Codebook dft_codebook(const UncertaintyRegion& region, const Scenario& sc) {
  region.validate();
  const int l_bs = static_cast<int>(aod_grid(region, sc.q, sc.n_bs).size());
  const int l_ris = static_cast<int>(aod_grid(region, sc.r, sc.n_ris).size());
  const double phi_br = ris_reference_angle(sc);

  const int ell_bs = closest_dft_column(steering_bs(center_aod(region, sc.q), sc.n_bs).conjugate());
  const int ell_ris = closest_dft_column(
      combined_ris_steering(center_aod(region, sc.r), phi_br, sc.n_ris).conjugate());

  std::vector<CVec> bs{unit_norm(steering_bs(bs_ris_angle(sc), sc.n_bs).conjugate(), "RIS beam")};
  std::vector<std::string> bs_labels{"bs_to_ris"};
  // Columns ell - L + 1 .. ell + L, taken modulo N.
  for (int k = -l_bs + 1; k <= l_bs; ++k) {
    const int col = ((ell_bs + k) % sc.n_bs + sc.n_bs) % sc.n_bs;
    bs.push_back(dft_column(sc.n_bs, col) / std::sqrt(static_cast<double>(sc.n_bs)));
    bs_labels.push_back("directional");
  }
  std::vector<CVec> ris;
  std::vector<std::string> ris_labels;
  for (int k = -l_ris + 1; k <= l_ris; ++k) {
    const int col = ((ell_ris + k) % sc.n_ris + sc.n_ris) % sc.n_ris;
    ris.push_back(dft_column(sc.n_ris, col));
    ris_labels.push_back("directional");
  }
  return assemble(bs, bs_labels, ris, ris_labels, "dft");
}

Codebook reduced_g_codebook(const Codebook& full, double center_ris_aod, const Scenario& sc) {
  if (full.kind != "proposed")
    throw Error("invalid_codebook", "reduced-G construction requires a proposed codebook");
  Codebook out;
  out.kind = "reduced_g";
  out.bs_beams = full.bs_beams;
  out.bs_labels = full.bs_labels;
  const Eigen::Index k_ris = full.ris_profiles.cols();
  out.ris_profiles.resize(full.ris_profiles.rows(), k_ris + 1);
  out.ris_profiles.leftCols(k_ris) = full.ris_profiles;
  out.ris_profiles.col(k_ris) =
      combined_ris_steering(center_ris_aod, ris_reference_angle(sc), sc.n_ris).conjugate();
  out.ris_labels = full.ris_labels;
  out.ris_labels.push_back("directional");

  for (int i = 0; i < static_cast<int>(full.bs_beams.cols()); ++i) {
    if (full.bs_labels[static_cast<size_t>(i)] == "bs_to_ris") {
      for (int j = 0; j <= static_cast<int>(k_ris); ++j) out.pairs.emplace_back(i, j);
    } else {
      out.pairs.emplace_back(i, static_cast<int>(k_ris));
    }
  }
  out.set_uniform_powers();
  return out;
}

namespace {

nlohmann::json matrix_to_json(const CMat& m) {
  nlohmann::json cols = nlohmann::json::array();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    nlohmann::json col = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) col.push_back({m(i, j).real(), m(i, j).imag()});
    cols.push_back(col);
  }
  return cols;
}

CMat matrix_from_json(const nlohmann::json& cols) {
  if (!cols.is_array() || cols.empty()) throw Error("invalid_codebook", "empty column list");
  const auto rows = static_cast<Eigen::Index>(cols.at(0).size());
  CMat m(rows, static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) {
    if (static_cast<Eigen::Index>(cols[j].size()) != rows)
      throw Error("invalid_codebook", "ragged column list");
    for (Eigen::Index i = 0; i < rows; ++i) {
      const auto& e = cols[j].at(static_cast<size_t>(i));
      m(i, static_cast<Eigen::Index>(j)) = cd(e.at(0).get<double>(), e.at(1).get<double>());
    }
  }
  return m;
}

}  // namespace

nlohmann::json codebook_to_json(const Codebook& cb) {
  nlohmann::json doc;
  doc["bs_beams"] = matrix_to_json(cb.bs_beams);
  doc["ris_profiles"] = matrix_to_json(cb.ris_profiles);
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [i, j] : cb.pairs) pairs.push_back({i, j});
  doc["pairs"] = pairs;
  doc["powers"] = std::vector<double>(cb.powers.data(), cb.powers.data() + cb.powers.size());
  doc["labels"] = {{"bs", cb.bs_labels}, {"ris", cb.ris_labels}};
  doc["metadata"] = {{"kind", cb.kind},
                     {"n_bs", cb.bs_beams.rows()},
                     {"n_ris", cb.ris_profiles.rows()},
                     {"transmissions", cb.size()}};
  return doc;
}

Codebook codebook_from_json(const nlohmann::json& doc) {
  Codebook cb;
  try {
    cb.bs_beams = matrix_from_json(doc.at("bs_beams"));
    cb.ris_profiles = matrix_from_json(doc.at("ris_profiles"));
    for (const auto& p : doc.at("pairs")) cb.pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    const auto powers = doc.at("powers").get<std::vector<double>>();
    cb.powers = Eigen::Map<const RVec>(powers.data(), static_cast<Eigen::Index>(powers.size()));
    cb.bs_labels = doc.at("labels").at("bs").get<std::vector<std::string>>();
    cb.ris_labels = doc.at("labels").at("ris").get<std::vector<std::string>>();
    cb.kind = doc.at("metadata").at("kind").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid_codebook", std::string("malformed codebook document: ") + e.what());
  }
  cb.validate(static_cast<int>(cb.bs_beams.rows()), static_cast<int>(cb.ris_profiles.rows()));
  return cb;
}

}  // namespace risloc
