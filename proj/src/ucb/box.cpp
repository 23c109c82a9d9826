#include "prs/box.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "prs/error.hpp"

namespace prs {

void SubspaceBox::validate() const {
  const auto n = static_cast<Eigen::Index>(names.size());
  if (names.empty()) throw Error(Errc::invalid_argument, "box has no dimensions");
  if (lower.size() != n || upper.size() != n)
    throw Error(Errc::invalid_argument, "box bounds do not match the number of dimensions");
  std::set<std::string> seen;
  for (const auto& name : names)
    if (!seen.insert(name).second) throw Error(Errc::invalid_argument, "duplicate box dimension " + name);
  for (const auto& [name, value] : fixed) {
    if (!seen.insert(name).second) throw Error(Errc::invalid_argument, "quantity " + name + " is both fixed and a dimension");
    if (!std::isfinite(value)) throw Error(Errc::invalid_argument, "fixed value of " + name + " is not finite");
  }
  for (Eigen::Index d = 0; d < n; ++d) {
    if (!std::isfinite(lower[d]) || !std::isfinite(upper[d]))
      throw Error(Errc::invalid_argument, "bounds of " + names[d] + " are not finite");
    if (lower[d] > upper[d]) throw Error(Errc::invalid_argument, "lower bound of " + names[d] + " exceeds upper bound");
  }
  if (has_frame()) {
    if (frame_lower.size() != n || frame_upper.size() != n)
      throw Error(Errc::invalid_argument, "frame bounds do not match the number of dimensions");
    for (Eigen::Index d = 0; d < n; ++d)
      if (!std::isfinite(frame_lower[d]) || !std::isfinite(frame_upper[d]) || frame_lower[d] > frame_upper[d])
        throw Error(Errc::invalid_argument, "invalid frame bounds for " + names[d]);
  }
  if (base) {
    if (base->size() != n) throw Error(Errc::invalid_argument, "base point does not match the number of dimensions");
    if (!contains(*base)) throw Error(Errc::invalid_argument, "base point lies outside the box");
  }
}

Eigen::VectorXd SubspaceBox::to_unit(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd& lo = has_frame() ? frame_lower : lower;
  const Eigen::VectorXd& hi = has_frame() ? frame_upper : upper;
  Eigen::VectorXd u(x.size());
  for (Eigen::Index d = 0; d < x.size(); ++d) u[d] = lo[d] == hi[d] ? 0.0 : (x[d] - lo[d]) / (hi[d] - lo[d]);
  return u;
}

Eigen::VectorXd SubspaceBox::from_unit(const Eigen::VectorXd& u) const {
  const Eigen::VectorXd& lo = has_frame() ? frame_lower : lower;
  const Eigen::VectorXd& hi = has_frame() ? frame_upper : upper;
  Eigen::VectorXd x(u.size());
  for (Eigen::Index d = 0; d < u.size(); ++d) x[d] = lo[d] == hi[d] ? lo[d] : (1.0 - u[d]) * lo[d] + u[d] * hi[d];
  return x;
}

Eigen::VectorXd SubspaceBox::at(const Eigen::VectorXd& t) const {
  Eigen::VectorXd x(t.size());
  for (Eigen::Index d = 0; d < t.size(); ++d)
    x[d] = lower[d] == upper[d] ? lower[d]
                                : std::clamp((1.0 - t[d]) * lower[d] + t[d] * upper[d], lower[d], upper[d]);
  return x;
}

bool SubspaceBox::contains(const Eigen::VectorXd& x) const {
  if (x.size() != lower.size()) return false;
  for (Eigen::Index d = 0; d < x.size(); ++d)
    if (!(x[d] >= lower[d] && x[d] <= upper[d])) return false;
  return true;
}

bool SubspaceBox::contains(const SubspaceBox& other) const {
  return other.names == names && contains(other.lower) && contains(other.upper);
}

SubspaceBox SubspaceBox::shrink_about_base(double alpha) const {
  if (!base) throw Error(Errc::invalid_argument, "box has no base point");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::invalid_argument, "contraction factor must lie in [0, 1]");
  SubspaceBox out = *this;
  if (!has_frame()) {
    out.frame_lower = lower;
    out.frame_upper = upper;
  }
  const Eigen::VectorXd& b = *base;
  for (Eigen::Index d = 0; d < b.size(); ++d) {
    out.lower[d] = alpha == 1.0 ? lower[d] : std::clamp(b[d] - alpha * (b[d] - lower[d]), lower[d], b[d]);
    out.upper[d] = alpha == 1.0 ? upper[d] : std::clamp(b[d] + alpha * (upper[d] - b[d]), b[d], upper[d]);
  }
  return out;
}

SubspaceBox make_box(std::vector<std::string> names, const std::vector<double>& lower, const std::vector<double>& upper) {
  SubspaceBox box;
  box.names = std::move(names);
  box.lower = Eigen::Map<const Eigen::VectorXd>(lower.data(), static_cast<Eigen::Index>(lower.size()));
  box.upper = Eigen::Map<const Eigen::VectorXd>(upper.data(), static_cast<Eigen::Index>(upper.size()));
  return box;
}

}  // namespace prs
