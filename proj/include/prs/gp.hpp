#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace prs {

/// Squared-exponential kernel hyperparameters. An empty `length_scales`
/// means unit length in every dimension.
struct KernelParams {
  double signal_variance = 1.0;
  std::vector<double> length_scales;
  double noise_sd = 1e-8;

  double length(std::size_t d) const { return length_scales.empty() ? 1.0 : length_scales[d]; }
  void validate(std::size_t dim) const;
};

/// sigma_f^2 * exp(-0.5 * sum_d ((a_d - b_d) / l_d)^2)
double kernel_se(std::span<const double> a, std::span<const double> b, const KernelParams& p);

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

/// Exact zero-mean GP regression posterior. Immutable: add_sample returns a
/// new model. The factor of K + (sigma_n^2 + jitter) I is cached; jitter
/// starts at zero and escalates 1e-10, 1e-9, ... 1e-6 (times sigma_f^2) only
/// when the plain factorization fails.
class GpModel {
 public:
  GpModel(std::size_t dim, KernelParams params);

  static GpModel fit(std::size_t dim, const std::vector<Eigen::VectorXd>& inputs, const std::vector<double>& targets,
                     KernelParams params);

  GpModel add_sample(const Eigen::VectorXd& x, double y) const;

  Posterior posterior(std::span<const double> x) const;
  Posterior posterior(const Eigen::VectorXd& x) const { return posterior(std::span<const double>(x.data(), x.size())); }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(y_.size()); }
  const KernelParams& params() const noexcept { return params_; }
  double jitter() const noexcept { return jitter_; }

  Eigen::VectorXd input(std::size_t i) const { return x_.row(static_cast<Eigen::Index>(i)).transpose(); }
  double target(std::size_t i) const { return y_[static_cast<Eigen::Index>(i)]; }
  const Eigen::MatrixXd& inputs() const noexcept { return x_; }  // one row per sample
  const Eigen::VectorXd& targets() const noexcept { return y_; }
  const Eigen::MatrixXd& factor() const noexcept { return chol_; }  // lower triangular

 private:
  void factorize();
  bool try_factor(double jitter);
  void solve_alpha();

  std::size_t dim_;
  KernelParams params_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
};

}  // namespace prs
