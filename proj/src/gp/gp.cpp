#include "prs/gp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prs/error.hpp"

namespace prs {

namespace {

// Smallest accepted Cholesky pivot, relative to sigma_f^2. Anything below is
// treated as a failed factorization so that near-duplicate inputs escalate
// the jitter instead of producing an amplified, meaningless solve.
constexpr double kPivotFloor = 1e-12;
constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-6;

// Kernel between stored row i of x (one sample per row) and a point b.
double kernel_row(const Eigen::MatrixXd& x, Eigen::Index i, std::span<const double> b, const KernelParams& p) {
  double r2 = 0.0;
  for (std::size_t d = 0; d < b.size(); ++d) {
    const double u = (x(i, static_cast<Eigen::Index>(d)) - b[d]) / p.length(d);
    r2 += u * u;
  }
  return p.signal_variance * std::exp(-0.5 * r2);
}

}  // namespace

void KernelParams::validate(std::size_t dim) const {
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
    throw Error(Errc::invalid_argument, "signal variance must be positive");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd))
    throw Error(Errc::invalid_argument, "noise standard deviation must be non-negative");
  if (!length_scales.empty() && length_scales.size() != dim)
    throw Error(Errc::invalid_argument, "expected " + std::to_string(dim) + " length scales, got " +
                                            std::to_string(length_scales.size()));
  for (double l : length_scales)
    if (!(l > 0.0) || !std::isfinite(l)) throw Error(Errc::invalid_argument, "length scales must be positive");
}

double kernel_se(std::span<const double> a, std::span<const double> b, const KernelParams& p) {
  if (a.size() != b.size() || (!p.length_scales.empty() && p.length_scales.size() != a.size()))
    throw Error(Errc::invalid_argument, "kernel dimension mismatch");
  double r2 = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double u = (a[d] - b[d]) / p.length(d);
    r2 += u * u;
  }
  return p.signal_variance * std::exp(-0.5 * r2);
}

GpModel::GpModel(std::size_t dim, KernelParams params)
    : dim_(dim), params_(std::move(params)), x_(0, static_cast<Eigen::Index>(dim)) {
  params_.validate(dim_);
}

GpModel GpModel::fit(std::size_t dim, const std::vector<Eigen::VectorXd>& inputs, const std::vector<double>& targets,
                     KernelParams params) {
  if (inputs.size() != targets.size())
    throw Error(Errc::invalid_argument, "inputs and targets differ in length");
  GpModel gp(dim, std::move(params));
  const auto m = static_cast<Eigen::Index>(inputs.size());
  gp.x_.resize(m, static_cast<Eigen::Index>(dim));
  gp.y_.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (static_cast<std::size_t>(inputs[i].size()) != dim)
      throw Error(Errc::invalid_argument, "training input has the wrong dimension");
    if (!inputs[i].allFinite() || !std::isfinite(targets[i]))
      throw Error(Errc::invalid_argument, "training data must be finite");
    gp.x_.row(i) = inputs[i].transpose();
    gp.y_[i] = targets[i];
  }
  gp.factorize();
  return gp;
}

bool GpModel::try_factor(double jitter) {
  const Eigen::Index m = y_.size();
  const double floor = kPivotFloor * params_.signal_variance;
  const double diag_add = params_.noise_sd * params_.noise_sd + jitter;
  chol_.setZero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::VectorXd xj = x_.row(j).transpose();
    const std::span<const double> bj(xj.data(), dim_);
    for (Eigen::Index i = j; i < m; ++i) {
      double kij = kernel_row(x_, i, bj, params_);
      if (i == j) kij += diag_add;
      const double s = kij - chol_.row(i).head(j).dot(chol_.row(j).head(j));
      if (i == j) {
        if (!(s > floor)) return false;
        chol_(j, j) = std::sqrt(s);
      } else {
        chol_(i, j) = s / chol_(j, j);
      }
    }
  }
  jitter_ = jitter;
  return true;
}

void GpModel::factorize() {
  if (y_.size() == 0) {
    chol_.resize(0, 0);
    alpha_.resize(0);
    jitter_ = 0.0;
    return;
  }
  const double scale = params_.signal_variance;
  bool ok = try_factor(0.0);
  for (double j = kJitterStart; !ok && j <= kJitterMax * (1.0 + 1e-9); j *= 10.0) ok = try_factor(j * scale);
  if (!ok) throw Error(Errc::not_positive_definite, "kernel matrix not positive definite");
  solve_alpha();
}

void GpModel::solve_alpha() {
  alpha_ = chol_.triangularView<Eigen::Lower>().solve(y_);
  chol_.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha_);
}

GpModel GpModel::add_sample(const Eigen::VectorXd& x, double y) const {
  if (static_cast<std::size_t>(x.size()) != dim_) throw Error(Errc::invalid_argument, "sample has the wrong dimension");
  if (!x.allFinite() || !std::isfinite(y)) throw Error(Errc::invalid_argument, "training data must be finite");

  GpModel out(dim_, params_);
  const Eigen::Index m = y_.size();
  out.x_.resize(m + 1, static_cast<Eigen::Index>(dim_));
  out.x_.topRows(m) = x_;
  out.x_.row(m) = x.transpose();
  out.y_.resize(m + 1);
  out.y_.head(m) = y_;
  out.y_[m] = y;

  // Append one row to the factor when no jitter is in play; otherwise refit
  // so the result always equals a from-scratch fit of the extended set.
  if (jitter_ == 0.0) {
    Eigen::VectorXd k(m);
    for (Eigen::Index i = 0; i < m; ++i) k[i] = kernel_row(x_, i, std::span<const double>(x.data(), dim_), params_);
    const Eigen::VectorXd l = chol_.triangularView<Eigen::Lower>().solve(k);
    const double kxx = params_.signal_variance + params_.noise_sd * params_.noise_sd;
    const double pivot = kxx - l.squaredNorm();
    if (pivot > kPivotFloor * params_.signal_variance) {
      out.chol_.setZero(m + 1, m + 1);
      out.chol_.topLeftCorner(m, m) = chol_;
      out.chol_.row(m).head(m) = l.transpose();
      out.chol_(m, m) = std::sqrt(pivot);
      out.jitter_ = 0.0;
      out.solve_alpha();
      return out;
    }
  }
  out.factorize();
  return out;
}

Posterior GpModel::posterior(std::span<const double> x) const {
  if (x.size() != dim_) throw Error(Errc::invalid_argument, "query has the wrong dimension");
  const double prior = params_.signal_variance;
  const Eigen::Index m = y_.size();
  if (m == 0) return {0.0, prior};

  Eigen::VectorXd k(m);
  for (Eigen::Index i = 0; i < m; ++i) k[i] = kernel_row(x_, i, x, params_);
  Posterior p;
  p.mean = k.dot(alpha_);
  const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k);
  p.variance = std::clamp(prior - v.squaredNorm(), 0.0, prior);
  return p;
}

}  // namespace prs
