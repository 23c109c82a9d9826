#include "prs/ucb.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>

#include "prs/error.hpp"

namespace prs {

const char* beta_mode_name(BetaMode mode) noexcept {
  return mode == BetaMode::practical ? "practical" : "theoretical";
}

BetaMode parse_beta_mode(std::string_view text) {
  if (text == "practical") return BetaMode::practical;
  if (text == "theoretical") return BetaMode::theoretical;
  throw Error(Errc::invalid_argument, "unknown beta mode '" + std::string(text) + "'");
}

BetaValue beta_value(const BetaSchedule& s, std::size_t m) {
  if (!(s.delta > 0.0 && s.delta < 1.0))
    throw Error(Errc::invalid_argument, "delta must lie in (0, 1)");
  BetaValue out;
  if (s.mode == BetaMode::practical) {
    const boost::math::normal_distribution<double> n;
    const double z = boost::math::quantile(boost::math::complement(n, s.delta / 2.0));
    out.beta = z * z;
    return out;
  }
  if (m < 1) throw Error(Errc::invalid_argument, "theoretical beta needs m >= 1");
  const double gamma = s.gamma_of_m ? s.gamma_of_m(m) : s.gamma;
  if (!(gamma >= 0.0) || !std::isfinite(s.rkhs_norm))
    throw Error(Errc::invalid_argument, "theoretical beta needs gamma >= 0 and a finite RKHS norm");
  double ln = std::log(static_cast<double>(m) / s.delta);
  if (ln <= 0.0) {
    ln = 0.0;
    out.clamped = true;
  }
  out.beta = 2.0 * s.rkhs_norm * s.rkhs_norm + 300.0 * gamma * ln * ln * ln;
  if (!(out.beta > 0.0)) throw Error(Errc::invalid_argument, "theoretical beta is not positive");
  return out;
}

double beta(const BetaSchedule& schedule, std::size_t m) { return beta_value(schedule, m).beta; }

double acquisition(const GpModel& gp, std::span<const double> u, double beta) {
  const Posterior p = gp.posterior(u);
  return p.mean + std::sqrt(beta) * std::sqrt(p.variance);
}

void UcbConfig::validate() const {
  if (max_samples < 1) throw Error(Errc::invalid_argument, "max samples must be positive");
  if (grid_density < 2) throw Error(Errc::invalid_argument, "grid density must be at least 2");
  if (max_grid_points < 2) throw Error(Errc::invalid_argument, "grid point budget must be at least 2");
  if (refine_iterations < 0) throw Error(Errc::invalid_argument, "refinement iterations must be non-negative");
  if (!(tol_sigma > 0.0) || !(tol_p > 0.0)) throw Error(Errc::invalid_argument, "tolerances must be positive");
  if (patience < 1) throw Error(Errc::invalid_argument, "patience must be positive");
}

namespace {

std::size_t free_dims(const SubspaceBox& box) {
  std::size_t k = 0;
  for (std::size_t d = 0; d < box.dim(); ++d) k += box.degenerate(d) ? 0 : 1;
  return k;
}

// density^k, saturating above `cap`.
std::size_t power_capped(std::size_t density, std::size_t k, std::size_t cap) {
  std::size_t n = 1;
  for (std::size_t i = 0; i < k; ++i) {
    if (n > cap / density) return cap + 1;
    n *= density;
  }
  return n;
}

}  // namespace

int effective_grid_density(const SubspaceBox& box, const UcbConfig& cfg) {
  const std::size_t k = free_dims(box);
  auto d = static_cast<std::size_t>(cfg.grid_density);
  while (d > 2 && power_capped(d, k, cfg.max_grid_points) > cfg.max_grid_points) --d;
  return static_cast<int>(d);
}

std::size_t grid_size(const SubspaceBox& box, const UcbConfig& cfg) {
  const auto d = static_cast<std::size_t>(effective_grid_density(box, cfg));
  return power_capped(d, free_dims(box), std::numeric_limits<std::size_t>::max() / 2);
}

Eigen::VectorXd grid_point(const SubspaceBox& box, int density, std::size_t index) {
  const auto n = static_cast<Eigen::Index>(box.dim());
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  const auto base = static_cast<std::size_t>(density);
  for (Eigen::Index d = n - 1; d >= 0; --d) {
    if (box.degenerate(static_cast<std::size_t>(d))) continue;
    u[d] = static_cast<double>(index % base) / static_cast<double>(density - 1);
    index /= base;
  }
  return u;
}

AcquisitionMax maximize_acquisition(const GpModel& gp, const SubspaceBox& box, double beta, const UcbConfig& cfg) {
  if (gp.dim() != box.dim()) throw Error(Errc::invalid_argument, "model and box dimensions differ");
  if (!(beta >= 0.0)) throw Error(Errc::invalid_argument, "beta must be non-negative");
  const double sb = std::sqrt(beta);

  AcquisitionMax out;
  out.density = effective_grid_density(box, cfg);
  out.grid_points = grid_size(box, cfg);
  out.grid_value = -std::numeric_limits<double>::infinity();
  out.max_sigma = 0.0;
  out.max_mean = -std::numeric_limits<double>::infinity();

  Eigen::VectorXd t;
  for (std::size_t i = 0; i < out.grid_points; ++i) {
    const Eigen::VectorXd ti = grid_point(box, out.density, i);
    const Posterior p = gp.posterior(box.to_unit(box.at(ti)));
    const double sigma = std::sqrt(p.variance);
    const double v = p.mean + sb * sigma;
    if (v > out.grid_value) {
      out.grid_value = v;
      out.grid_index = i;
      t = ti;
    }
    out.max_sigma = std::max(out.max_sigma, sigma);
    out.max_mean = std::max(out.max_mean, p.mean);
  }

  double best = out.grid_value;
  Eigen::VectorXd step = Eigen::VectorXd::Zero(t.size());
  for (Eigen::Index d = 0; d < t.size(); ++d)
    if (!box.degenerate(static_cast<std::size_t>(d))) step[d] = 1.0 / (out.density - 1);

  for (int it = 0; it < cfg.refine_iterations; ++it) {
    bool improved = false;
    for (Eigen::Index d = 0; d < t.size(); ++d) {
      if (step[d] == 0.0) continue;
      for (double sign : {1.0, -1.0}) {
        Eigen::VectorXd c = t;
        c[d] = std::clamp(t[d] + sign * step[d], 0.0, 1.0);
        if (c[d] == t[d]) continue;
        const Eigen::VectorXd u = box.to_unit(box.at(c));
        const double v = acquisition(gp, std::span<const double>(u.data(), static_cast<std::size_t>(u.size())), beta);
        if (v > best) {
          best = v;
          t = c;
          improved = true;
        }
      }
    }
    if (!improved) step /= 2.0;
  }

  out.x = box.at(t);
  out.u = box.to_unit(out.x);
  out.value = best;
  return out;
}

const char* stop_reason_name(StopReason r) noexcept {
  switch (r) {
    case StopReason::sigma: return "sigma";
    case StopReason::p_converged: return "p_converged";
    case StopReason::max_samples: return "max_samples";
    case StopReason::oracle_failure: return "oracle_failure";
  }
  return "unknown";
}

StopReason parse_stop_reason(std::string_view text) {
  for (auto r : {StopReason::sigma, StopReason::p_converged, StopReason::max_samples, StopReason::oracle_failure})
    if (text == stop_reason_name(r)) return r;
  throw Error(Errc::parse, "unknown termination reason '" + std::string(text) + "'");
}

UcbRun run_ucb_loop(const Oracle& oracle, const SubspaceBox& box, const BetaSchedule& schedule, const UcbConfig& cfg,
                    const std::vector<Sample>& warm) {
  box.validate();
  cfg.validate();
  if (!oracle) throw Error(Errc::invalid_argument, "no oracle given");

  std::vector<Sample> samples;
  std::vector<Eigen::VectorXd> inputs;
  std::vector<double> targets;
  for (const auto& s : warm) {
    if (!box.contains(s.x) || !std::isfinite(s.y)) continue;
    samples.push_back(s);
    inputs.push_back(box.to_unit(s.x));
    targets.push_back(s.y);
  }

  UcbRun run{GpModel::fit(box.dim(), inputs, targets, cfg.kernel), {}, std::move(samples)};
  run.history.names = box.names;
  run.history.warm_samples = run.samples.size();

  double prev_p = std::numeric_limits<double>::quiet_NaN();
  int steady = 0;
  for (std::size_t iteration = 1;; ++iteration) {
    const BetaValue b = beta_value(schedule, run.gp.size() + 1);
    run.history.beta_clamped = run.history.beta_clamped || b.clamped;
    const AcquisitionMax am = maximize_acquisition(run.gp, box, b.beta, cfg);
    run.history.final_max = am;
    run.history.final_beta = b.beta;

    if (std::isfinite(prev_p) && std::abs(am.value - prev_p) < cfg.tol_p)
      ++steady;
    else
      steady = 0;
    prev_p = am.value;

    if (am.max_sigma < cfg.tol_sigma) {
      run.history.reason = StopReason::sigma;
      break;
    }
    if (steady >= cfg.patience) {
      run.history.reason = StopReason::p_converged;
      break;
    }
    if (run.gp.size() >= cfg.max_samples) {
      run.history.reason = StopReason::max_samples;
      break;
    }

    UcbRecord rec;
    rec.iteration = iteration;
    rec.x = am.x;
    rec.acquisition = am.value;
    rec.max_sigma = am.max_sigma;
    rec.p_estimate = am.value;
    if (!box.contains(rec.x)) throw Error(Errc::invalid_argument, "internal: sample left the box");

    const auto t0 = std::chrono::steady_clock::now();
    try {
      rec.observed = oracle(std::span<const double>(rec.x.data(), static_cast<std::size_t>(rec.x.size())));
      if (!std::isfinite(rec.observed)) throw Error(Errc::eigensolve, "oracle returned a non-finite value");
    } catch (const Error& e) {
      rec.observed = std::numeric_limits<double>::quiet_NaN();
      rec.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      run.history.records.push_back(rec);
      run.history.reason = StopReason::oracle_failure;
      run.history.failure = e.what();
      break;
    }
    rec.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    run.history.records.push_back(rec);
    run.samples.push_back({rec.x, rec.observed});
    run.gp = run.gp.add_sample(am.u, rec.observed);
  }
  return run;
}

}  // namespace prs
