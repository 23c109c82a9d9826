#include "prs/certify.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "prs/dae.hpp"
#include "prs/error.hpp"

namespace prs {

const char* verdict_name(Verdict v) noexcept {
  switch (v) {
    case Verdict::prs: return "PRS";
    case Verdict::not_certified: return "NOT_CERTIFIED";
    case Verdict::aborted_infeasible: return "ABORTED_INFEASIBLE";
  }
  return "unknown";
}

Verdict parse_verdict(std::string_view text) {
  for (auto v : {Verdict::prs, Verdict::not_certified, Verdict::aborted_infeasible})
    if (text == verdict_name(v)) return v;
  throw Error(Errc::parse, "unknown verdict '" + std::string(text) + "'");
}

const char* infeasible_policy_name(InfeasiblePolicy p) noexcept {
  return p == InfeasiblePolicy::abort ? "abort" : "violate";
}

InfeasiblePolicy parse_infeasible_policy(std::string_view text) {
  if (text == "abort") return InfeasiblePolicy::abort;
  if (text == "violate") return InfeasiblePolicy::violate;
  throw Error(Errc::invalid_argument, "unknown infeasibility policy '" + std::string(text) + "'");
}

namespace {

using Clock = std::chrono::steady_clock;

Certificate base_certificate(const SubspaceBox& box, const BetaSchedule& schedule, const UcbConfig& cfg,
                             const AcquisitionMax& am, double beta, std::size_t samples) {
  Certificate c;
  c.box = box;
  c.delta = schedule.delta;
  c.beta_mode = schedule.mode;
  c.beta = beta;
  c.p_m = am.value;
  c.argmax = am.x;
  c.max_sigma = am.max_sigma;
  c.max_mean = am.max_mean;
  c.samples = samples;
  c.grid_density = am.density;
  c.grid_points = am.grid_points;
  c.refine_iterations = cfg.refine_iterations;
  c.tol_sigma = cfg.tol_sigma;
  c.tol_p = cfg.tol_p;
  c.seed = cfg.seed;
  c.verdict = am.value < 0.0 ? Verdict::prs : Verdict::not_certified;
  return c;
}

// Bound maximum for a schedule on a fixed model.
AcquisitionMax bound_max(const GpModel& gp, const SubspaceBox& box, const BetaSchedule& s, const UcbConfig& cfg,
                         double* beta_out) {
  const double b = beta(s, gp.size() + 1);
  if (beta_out) *beta_out = b;
  return maximize_acquisition(gp, box, b, cfg);
}

}  // namespace

Certificate certificate_from_model(const GpModel& gp, const SubspaceBox& box, const BetaSchedule& schedule,
                                   const UcbConfig& cfg) {
  box.validate();
  double b = 0.0;
  const AcquisitionMax am = bound_max(gp, box, schedule, cfg, &b);
  Certificate c = base_certificate(box, schedule, cfg, am, b, gp.size());
  c.reason = StopReason::max_samples;
  return c;
}

CertifyResult certify_prs(const Oracle& oracle, const SubspaceBox& box, const CertifyOptions& opts,
                          const std::vector<Sample>& warm) {
  const auto t0 = Clock::now();
  UcbRun run = run_ucb_loop(oracle, box, opts.schedule, opts.ucb, warm);
  const UcbHistory& h = run.history;

  Certificate c = base_certificate(box, opts.schedule, opts.ucb, h.final_max, h.final_beta, run.gp.size());
  c.reason = h.reason;
  c.policy = opts.policy;
  c.oracle_calls = h.records.size();
  if (h.reason == StopReason::oracle_failure) {
    c.failure = h.failure;
    c.argmax = h.records.back().x;
    if (opts.policy == InfeasiblePolicy::abort) {
      c.verdict = Verdict::aborted_infeasible;
    } else {
      c.verdict = Verdict::not_certified;
      c.p_m = std::numeric_limits<double>::infinity();
    }
  }
  c.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  return {std::move(c), std::move(run)};
}

SubspaceSearchResult subspace_search(const Oracle& oracle, const SubspaceBox& box, const CertifyOptions& opts) {
  box.validate();
  if (!box.base) throw Error(Errc::no_anchor, "no anchor for subspace search: the box has no base point");

  SubspaceSearchResult out;
  try {
    out.anchor_lambda = oracle(std::span<const double>(box.base->data(), box.dim()));
  } catch (const Error& e) {
    throw Error(Errc::no_anchor, std::string("no anchor for subspace search: ") + e.what());
  }
  if (!(out.anchor_lambda < 0.0))
    throw Error(Errc::no_anchor, "no anchor for subspace search: lambda_c at the base point is " +
                                     std::to_string(out.anchor_lambda));

  std::vector<Sample> pool{{*box.base, out.anchor_lambda}};
  auto attempt = [&](const SubspaceBox& b) {
    CertifyResult r = certify_prs(oracle, b, opts, pool);
    ++out.certifications;
    const auto& s = r.run.samples;
    pool.insert(pool.end(), s.begin() + static_cast<std::ptrdiff_t>(r.run.history.warm_samples), s.end());
    return r;
  };

  CertifyResult full = attempt(box);
  if (full.cert.verdict == Verdict::prs) {
    out.box = box;
    out.alpha = 1.0;
    out.result = std::move(full);
    return out;
  }

  double lo = 0.0, hi = 1.0;
  std::optional<CertifyResult> best;
  while (hi - lo > 1e-2) {
    const double mid = 0.5 * (lo + hi);
    CertifyResult r = attempt(box.shrink_about_base(mid));
    if (r.cert.verdict == Verdict::prs) {
      lo = mid;
      best = std::move(r);
    } else {
      hi = mid;
    }
  }
  if (!best) best = attempt(box.shrink_about_base(0.0));
  out.alpha = lo;
  out.box = best->cert.box;
  out.result = std::move(*best);
  return out;
}

ConfidenceSearchResult confidence_search(const GpModel& gp, const SubspaceBox& box, const BetaSchedule& schedule,
                                         const UcbConfig& cfg) {
  box.validate();
  const auto at = [&](double d) {
    BetaSchedule s = schedule;
    s.delta = d;
    return certificate_from_model(gp, box, s, cfg);
  };

  ConfidenceSearchResult out;
  out.cert = at(schedule.delta);
  if (out.cert.verdict == Verdict::prs) {
    out.delta_prime = schedule.delta;
    return out;
  }
  const AcquisitionMax mean_max = maximize_acquisition(gp, box, 0.0, cfg);
  if (!(mean_max.value < 0.0))
    throw Error(Errc::no_delta, "subspace mean-unstable; no delta' exists (max mean " + std::to_string(mean_max.value) + ")");

  constexpr double kUpper = 1.0 - 1e-9;
  constexpr double kTolerance = 5e-4;
  double lo = schedule.delta, hi = kUpper;
  Certificate hi_cert = at(hi);
  if (hi_cert.verdict != Verdict::prs)
    throw Error(Errc::no_delta, "no delta' below 1 certifies the subspace");
  while (hi - lo > kTolerance) {
    const double mid = 0.5 * (lo + hi);
    Certificate c = at(mid);
    if (c.verdict == Verdict::prs) {
      hi = mid;
      hi_cert = std::move(c);
    } else {
      lo = mid;
    }
  }
  out.delta_prime = hi;
  out.cert = std::move(hi_cert);
  return out;
}

CoverageReport coverage(const Oracle& oracle, const GpModel& gp, const SubspaceBox& box, double beta,
                        const std::vector<Eigen::VectorXd>& points) {
  CoverageReport r;
  r.max_lambda = -std::numeric_limits<double>::infinity();
  const double sb = std::sqrt(beta);
  for (const auto& x : points) {
    const double lambda = oracle(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    const Posterior p = gp.posterior(box.to_unit(x));
    ++r.points;
    if (lambda >= 0.0) ++r.unstable;
    if (lambda > p.mean + sb * std::sqrt(p.variance)) ++r.above_bound;
    r.max_lambda = std::max(r.max_lambda, lambda);
  }
  if (r.points == 0) r.max_lambda = 0.0;
  return r;
}

std::vector<Eigen::VectorXd> uniform_points(const SubspaceBox& box, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd u(static_cast<Eigen::Index>(box.dim()));
    for (Eigen::Index d = 0; d < u.size(); ++d) u[d] = unit(rng);
    out.push_back(box.at(u));
  }
  return out;
}

CoverageReport validate_certificate(const Oracle& oracle, const CertifyResult& result, std::size_t n,
                                    std::uint64_t seed) {
  if (result.cert.verdict != Verdict::prs) throw Error(Errc::invalid_argument, "validation needs a PRS certificate");
  return coverage(oracle, result.run.gp, result.cert.box, result.cert.beta,
                  uniform_points(result.cert.box, n, seed));
}

Oracle make_network_oracle(const NetworkModel& net, const SubspaceBox& box) {
  box.validate();
  auto shared = std::make_shared<const NetworkModel>(net);
  OperatingTarget fixed;
  for (const auto& [name, value] : box.fixed) fixed.set(name, value);
  for (const auto& name : box.names) (void)Quantity::parse(name);
  return [shared, fixed, names = box.names](std::span<const double> x) {
    if (x.size() != names.size()) throw Error(Errc::invalid_argument, "sample has the wrong dimension");
    OperatingTarget z = fixed;
    for (std::size_t d = 0; d < names.size(); ++d) z.set(names[d], x[d]);
    return eval_lambda_c(*shared, z);
  };
}

}  // namespace prs
