#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prs/box.hpp"
#include "prs/network.hpp"
#include "prs/ucb.hpp"

namespace prs {

enum class Verdict { prs, not_certified, aborted_infeasible };
const char* verdict_name(Verdict v) noexcept;
Verdict parse_verdict(std::string_view text);

/// What an oracle failure inside the box means for the certificate.
enum class InfeasiblePolicy { abort, violate };
const char* infeasible_policy_name(InfeasiblePolicy p) noexcept;
InfeasiblePolicy parse_infeasible_policy(std::string_view text);

struct Certificate {
  Verdict verdict = Verdict::not_certified;
  SubspaceBox box;
  double delta = 0.05;
  BetaMode beta_mode = BetaMode::practical;
  double beta = 0.0;
  double p_m = 0.0;          // +inf when an infeasible point was counted as a violation
  Eigen::VectorXd argmax;    // maximizer of the bound, box units
  double max_sigma = 0.0;    // coarse-grid max of sigma on the final model
  double max_mean = 0.0;     // coarse-grid max of mu on the final model
  std::size_t samples = 0;   // points in the final model
  std::size_t oracle_calls = 0;
  StopReason reason = StopReason::max_samples;
  std::string failure;
  InfeasiblePolicy policy = InfeasiblePolicy::abort;
  int grid_density = 0;
  std::size_t grid_points = 0;
  int refine_iterations = 0;
  double tol_sigma = 0.0;
  double tol_p = 0.0;
  std::uint64_t seed = 0;
  double wall_ms = 0.0;
};

struct CertifyResult {
  Certificate cert;
  UcbRun run;
};

struct CertifyOptions {
  BetaSchedule schedule;  // carries delta
  UcbConfig ucb;
  InfeasiblePolicy policy = InfeasiblePolicy::abort;
};

/// Runs the UCB loop on the box and evaluates p_m = max of mu + sqrt(beta) sigma
/// (grid plus refinement) on the final model. PRS iff p_m < 0.
CertifyResult certify_prs(const Oracle& oracle, const SubspaceBox& box, const CertifyOptions& opts,
                          const std::vector<Sample>& warm = {});

/// Certificate for an existing model (no new samples) at the given schedule.
Certificate certificate_from_model(const GpModel& gp, const SubspaceBox& box, const BetaSchedule& schedule,
                                   const UcbConfig& cfg);

struct SubspaceSearchResult {
  SubspaceBox box;
  double alpha = 1.0;
  double anchor_lambda = 0.0;
  int certifications = 0;
  CertifyResult result;
};

/// Shrinks every half-width about the base point by one factor alpha,
/// bisecting alpha to within 1e-2, and returns the largest box found PRS.
/// Each trial box runs its own UCB loop warm-started with every earlier
/// sample falling inside it. If no alpha > 0 certifies, the degenerate box
/// at the base point is certified instead.
SubspaceSearchResult subspace_search(const Oracle& oracle, const SubspaceBox& box, const CertifyOptions& opts);

struct ConfidenceSearchResult {
  double delta_prime = 0.0;
  Certificate cert;
};

/// Smallest delta' in [delta, 1) (to within 5e-4) whose bound certifies the
/// box on the given model. Throws Error(no_delta) when the posterior mean
/// already reaches 0 somewhere on the grid.
ConfidenceSearchResult confidence_search(const GpModel& gp, const SubspaceBox& box, const BetaSchedule& schedule,
                                         const UcbConfig& cfg);

struct CoverageReport {
  std::size_t points = 0;
  std::size_t unstable = 0;     // lambda_c >= 0
  std::size_t above_bound = 0;  // lambda_c > mu + sqrt(beta) sigma
  double max_lambda = 0.0;
  double coverage() const { return points == 0 ? 1.0 : 1.0 - static_cast<double>(above_bound) / points; }
};

/// Compares the oracle with the model's bound at the given points (box units).
CoverageReport coverage(const Oracle& oracle, const GpModel& gp, const SubspaceBox& box, double beta,
                        const std::vector<Eigen::VectorXd>& points);

/// n points drawn uniformly from the box with a seeded mt19937_64.
std::vector<Eigen::VectorXd> uniform_points(const SubspaceBox& box, std::size_t n, std::uint64_t seed);

/// Monte-Carlo check of a PRS certificate against the true oracle.
CoverageReport validate_certificate(const Oracle& oracle, const CertifyResult& result, std::size_t n,
                                    std::uint64_t seed);

/// The network stability oracle over the box's named quantities, with the
/// box's fixed quantities applied to every sample.
Oracle make_network_oracle(const NetworkModel& net, const SubspaceBox& box);

}  // namespace prs
