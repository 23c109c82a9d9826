#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace prs {

/// Axis-aligned box of named operating quantities. A dimension with
/// lower == upper is degenerate and stays fixed. `fixed` pins further
/// quantities for every sample without making them dimensions of the box.
///
/// Model coordinates normalize each dimension against a frame: the box's own
/// bounds, or `frame_lower`/`frame_upper` when set. Sub-boxes produced by
/// shrink_about_base keep the frame of the box they came from.
struct SubspaceBox {
  std::vector<std::string> names;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::optional<Eigen::VectorXd> base;
  std::vector<std::pair<std::string, double>> fixed;
  Eigen::VectorXd frame_lower;
  Eigen::VectorXd frame_upper;

  std::size_t dim() const noexcept { return names.size(); }
  bool degenerate(std::size_t d) const { return lower[static_cast<Eigen::Index>(d)] == upper[static_cast<Eigen::Index>(d)]; }

  /// Throws Error(invalid_argument) on empty or duplicate names, size
  /// mismatches, non-finite bounds, lower > upper, or a base outside the box.
  void validate() const;

  bool has_frame() const noexcept { return frame_lower.size() != 0; }

  /// Box units -> model coordinates (0..1 across the frame; 0 on a degenerate frame axis).
  Eigen::VectorXd to_unit(const Eigen::VectorXd& x) const;
  Eigen::VectorXd from_unit(const Eigen::VectorXd& u) const;

  /// Point at local position t in [0, 1]^d of this box; exact at the corners.
  Eigen::VectorXd at(const Eigen::VectorXd& t) const;

  bool contains(const Eigen::VectorXd& x) const;
  bool contains(const SubspaceBox& other) const;

  /// [b - a (b - l), b + a (u - b)] per dimension; a in [0, 1]. Needs a base.
  SubspaceBox shrink_about_base(double alpha) const;
};

/// Box from explicit bounds; base and fixed entries left empty.
SubspaceBox make_box(std::vector<std::string> names, const std::vector<double>& lower, const std::vector<double>& upper);

}  // namespace prs
