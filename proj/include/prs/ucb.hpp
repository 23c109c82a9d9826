#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prs/box.hpp"
#include "prs/gp.hpp"

namespace prs {

enum class BetaMode { practical, theoretical };

const char* beta_mode_name(BetaMode mode) noexcept;
BetaMode parse_beta_mode(std::string_view text);

/// practical: beta = z^2 with z the standard normal quantile at 1 - delta/2.
/// theoretical: beta_m = 2 ||V||^2 + 300 gamma_m ln^3(m / delta); gamma_m is
/// `gamma_of_m(m)` when set, else the constant `gamma`.
struct BetaSchedule {
  BetaMode mode = BetaMode::practical;
  double delta = 0.05;
  double rkhs_norm = 1.0;
  double gamma = 1.0;
  std::function<double(std::size_t)> gamma_of_m;
};

struct BetaValue {
  double beta = 0.0;
  bool clamped = false;  // theoretical mode with m / delta <= 1: ln term set to 0
};

BetaValue beta_value(const BetaSchedule& schedule, std::size_t m);
double beta(const BetaSchedule& schedule, std::size_t m);

/// mu(u) + sqrt(beta) sigma(u) at model coordinates u.
double acquisition(const GpModel& gp, std::span<const double> u, double beta);

struct UcbConfig {
  std::size_t max_samples = 200;
  int grid_density = 21;
  std::size_t max_grid_points = 10000;  // density is lowered until the grid fits
  int refine_iterations = 30;
  double tol_sigma = 1e-3;
  double tol_p = 1e-4;
  int patience = 3;
  std::uint64_t seed = 0;  // drives validation draws; the loop itself is deterministic
  KernelParams kernel;

  void validate() const;
};

/// Per-dimension grid density actually used for a box: the configured
/// density, reduced so density^k <= max_grid_points over the k free dimensions
/// (never below 2). Degenerate dimensions carry one grid point.
int effective_grid_density(const SubspaceBox& box, const UcbConfig& cfg);
std::size_t grid_size(const SubspaceBox& box, const UcbConfig& cfg);

/// Local coordinates t in [0, 1]^d of grid point `index` (lexicographic, last
/// dimension fastest); box.at(t) gives the point itself.
Eigen::VectorXd grid_point(const SubspaceBox& box, int density, std::size_t index);

struct AcquisitionMax {
  Eigen::VectorXd u;       // model coordinates of the maximizer
  Eigen::VectorXd x;       // the same point in box units
  double value = 0.0;      // after refinement
  double grid_value = 0.0; // best coarse-grid value
  std::size_t grid_index = 0;
  double max_sigma = 0.0;  // over the coarse grid
  double max_mean = 0.0;   // over the coarse grid
  int density = 0;
  std::size_t grid_points = 0;
};

/// Coarse grid scan (ties go to the lowest index) then pattern-search
/// refinement from the best cell: steps start at the cell width along each
/// free axis and halve after a sweep without improvement.
AcquisitionMax maximize_acquisition(const GpModel& gp, const SubspaceBox& box, double beta, const UcbConfig& cfg);

/// The stability oracle in box units. Failures are reported by throwing prs::Error.
using Oracle = std::function<double(std::span<const double>)>;

enum class StopReason { sigma, p_converged, max_samples, oracle_failure };
const char* stop_reason_name(StopReason r) noexcept;
StopReason parse_stop_reason(std::string_view text);

struct UcbRecord {
  std::size_t iteration = 0;  // 1-based
  Eigen::VectorXd x;          // box units
  double observed = 0.0;      // NaN when the oracle failed
  double acquisition = 0.0;   // value at x on the model before the sample
  double max_sigma = 0.0;     // coarse-grid max of sigma before the sample
  double p_estimate = 0.0;    // running certificate estimate (= acquisition at the maximizer)
  double elapsed_ms = 0.0;    // oracle time for this sample
};

struct Sample {
  Eigen::VectorXd x;  // box units
  double y = 0.0;
};

struct UcbHistory {
  std::vector<std::string> names;
  std::vector<UcbRecord> records;
  StopReason reason = StopReason::max_samples;
  std::string failure;  // oracle error text when reason == oracle_failure
  AcquisitionMax final_max;  // scan of the final model
  double final_beta = 0.0;
  bool beta_clamped = false;
  std::size_t warm_samples = 0;
};

struct UcbRun {
  GpModel gp{0, KernelParams{}};
  UcbHistory history;
  std::vector<Sample> samples;  // warm start plus every successful observation
};

/// GP-UCB: pick the acquisition maximizer, observe, condition, repeat until
/// the coarse-grid max sigma drops below tol_sigma, the certificate estimate
/// moves less than tol_p for `patience` consecutive iterations, or the model
/// holds max_samples points. Warm samples outside the box are ignored. An
/// oracle error stops the loop with reason oracle_failure; the failed point
/// is never added to the model.
UcbRun run_ucb_loop(const Oracle& oracle, const SubspaceBox& box, const BetaSchedule& schedule, const UcbConfig& cfg,
                    const std::vector<Sample>& warm = {});

}  // namespace prs
