#include "prs/prs.h"

#include <new>
#include <optional>
#include <string>

#include "prs/certify.hpp"
#include "prs/dae.hpp"
#include "prs/error.hpp"
#include "prs/io.hpp"
#include "prs/network.hpp"

struct prs_network {
  prs::NetworkModel net;
};

struct prs_subspace {
  prs::SubspaceBox box;
};

struct prs_oracle {
  prs::Oracle fn;
};

struct prs_run {
  prs::CertifyResult result;
  prs::CertifyOptions options;
  prs::ReportExtras extras;
  bool has_search = false;
};

namespace {

thread_local std::string g_error;

prs_status status_of(prs::Errc code) {
  switch (code) {
    case prs::Errc::parse: return PRS_E_PARSE;
    case prs::Errc::invalid_model: return PRS_E_INVALID_MODEL;
    case prs::Errc::invalid_argument: return PRS_E_INVALID_ARGUMENT;
    case prs::Errc::diverged: return PRS_E_DIVERGED;
    case prs::Errc::singular: return PRS_E_SINGULAR;
    case prs::Errc::infeasible: return PRS_E_INFEASIBLE;
    case prs::Errc::overdetermined: return PRS_E_OVERDETERMINED;
    case prs::Errc::eigensolve: return PRS_E_EIGENSOLVE;
    case prs::Errc::not_positive_definite: return PRS_E_NOT_POSITIVE_DEFINITE;
    case prs::Errc::no_anchor: return PRS_E_NO_ANCHOR;
    case prs::Errc::no_delta: return PRS_E_NO_DELTA;
    case prs::Errc::io: return PRS_E_IO;
  }
  return PRS_E_INTERNAL;
}

template <typename F>
prs_status guard(F&& f) {
  try {
    f();
    g_error.clear();
    return PRS_OK;
  } catch (const prs::Error& e) {
    g_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
  } catch (const std::exception& e) {
    g_error = e.what();
  } catch (...) {
    g_error = "unknown error";
  }
  return PRS_E_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) throw prs::Error(prs::Errc::invalid_argument, what);
}

prs::OperatingTarget target_of(const char* const* names, const double* values, size_t n) {
  require(n == 0 || (names && values), "null target arrays");
  prs::OperatingTarget z;
  for (size_t i = 0; i < n; ++i) {
    require(names[i] != nullptr, "null quantity name");
    z.set(names[i], values[i]);
  }
  return z;
}

prs::CertifyOptions options_of(const prs_options* o) {
  prs_options defaults;
  prs_options_init(&defaults);
  if (!o) o = &defaults;
  prs::CertifyOptions c;
  c.schedule.delta = o->delta;
  require(o->beta_mode == PRS_BETA_PRACTICAL || o->beta_mode == PRS_BETA_THEORETICAL, "unknown beta mode");
  c.schedule.mode = o->beta_mode == PRS_BETA_PRACTICAL ? prs::BetaMode::practical : prs::BetaMode::theoretical;
  c.schedule.rkhs_norm = o->rkhs_norm;
  c.schedule.gamma = o->gamma;
  c.ucb.max_samples = o->max_samples;
  c.ucb.grid_density = o->grid_density;
  c.ucb.max_grid_points = o->max_grid_points;
  c.ucb.refine_iterations = o->refine_iterations;
  c.ucb.tol_sigma = o->tol_sigma;
  c.ucb.tol_p = o->tol_p;
  c.ucb.patience = o->patience;
  c.ucb.seed = o->seed;
  c.ucb.kernel.signal_variance = o->signal_variance;
  require(o->length_scale > 0.0, "length scale must be positive");
  c.ucb.kernel.noise_sd = o->noise_sd;
  require(o->infeasible_policy == PRS_INFEASIBLE_ABORT || o->infeasible_policy == PRS_INFEASIBLE_VIOLATE,
          "unknown infeasibility policy");
  c.policy = o->infeasible_policy == PRS_INFEASIBLE_ABORT ? prs::InfeasiblePolicy::abort : prs::InfeasiblePolicy::violate;
  if (!(c.schedule.delta > 0.0 && c.schedule.delta < 1.0))
    throw prs::Error(prs::Errc::invalid_argument, "delta must lie in (0, 1)");
  c.ucb.validate();
  return c;
}

// Kernel length scales are per dimension; expand the scalar option once the box is known.
void apply_length_scale(prs::CertifyOptions& c, const prs_options* o, std::size_t dim) {
  if (o && o->length_scale != 1.0) c.ucb.kernel.length_scales.assign(dim, o->length_scale);
}

}  // namespace

extern "C" {

void prs_options_init(prs_options* o) {
  if (!o) return;
  o->delta = 0.05;
  o->beta_mode = PRS_BETA_PRACTICAL;
  o->rkhs_norm = 1.0;
  o->gamma = 1.0;
  o->max_samples = 200;
  o->grid_density = 21;
  o->max_grid_points = 10000;
  o->refine_iterations = 30;
  o->tol_sigma = 1e-3;
  o->tol_p = 1e-4;
  o->patience = 3;
  o->seed = 0;
  o->signal_variance = 1.0;
  o->length_scale = 1.0;
  o->noise_sd = 1e-8;
  o->infeasible_policy = PRS_INFEASIBLE_ABORT;
}

const char* prs_last_error(void) { return g_error.c_str(); }

const char* prs_status_name(prs_status s) {
  switch (s) {
    case PRS_OK: return "ok";
    case PRS_E_PARSE: return "parse error";
    case PRS_E_INVALID_MODEL: return "invalid model";
    case PRS_E_INVALID_ARGUMENT: return "invalid argument";
    case PRS_E_DIVERGED: return "diverged";
    case PRS_E_SINGULAR: return "singular";
    case PRS_E_INFEASIBLE: return "infeasible";
    case PRS_E_OVERDETERMINED: return "overdetermined";
    case PRS_E_EIGENSOLVE: return "eigensolve failed";
    case PRS_E_NOT_POSITIVE_DEFINITE: return "not positive definite";
    case PRS_E_NO_ANCHOR: return "no anchor";
    case PRS_E_NO_DELTA: return "no delta";
    case PRS_E_IO: return "i/o error";
    case PRS_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* prs_verdict_name(int v) {
  if (v < 0 || v > 2) return "unknown";
  return prs::verdict_name(static_cast<prs::Verdict>(v));
}

const char* prs_termination_name(int t) {
  if (t < 0 || t > 3) return "unknown";
  return prs::stop_reason_name(static_cast<prs::StopReason>(t));
}

prs_status prs_network_load(const char* path, prs_network** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = new prs_network{prs::load_network(path)};
  });
}

prs_status prs_network_parse(const char* text, prs_network** out) {
  return guard([&] {
    require(text && out, "null argument");
    *out = new prs_network{prs::parse_network(text)};
  });
}

prs_status prs_network_save(const prs_network* net, const char* path) {
  return guard([&] {
    require(net && path, "null argument");
    prs::save_network(net->net, path);
  });
}

void prs_network_free(prs_network* net) { delete net; }

size_t prs_network_machine_count(const prs_network* net) { return net ? net->net.machines.size() : 0; }

prs_status prs_network_calibrate(const prs_network* net, const char* const* names, const double* values, size_t n,
                                 prs_network** out) {
  return guard([&] {
    require(net && out, "null argument");
    *out = new prs_network{prs::calibrate_base_loads(net->net, target_of(names, values, n))};
  });
}

prs_status prs_evaluate(const prs_network* net, const char* const* names, const double* values, size_t n, double* pg,
                        double* qg, double* vm, size_t cap, double* lambda_c) {
  return guard([&] {
    require(net && lambda_c, "null argument");
    const auto trace = prs::trace_lambda_c(net->net, target_of(names, values, n));
    const auto& eq = trace.equilibrium;
    for (size_t m = 0; m < cap && m < net->net.machines.size(); ++m) {
      const auto i = static_cast<Eigen::Index>(m);
      if (pg) pg[m] = eq.pg[i];
      if (qg) qg[m] = eq.qg[i];
      if (vm) vm[m] = eq.vm[static_cast<Eigen::Index>(net->net.bus_index(net->net.machines[m].bus))];
    }
    *lambda_c = trace.lambda_c;
  });
}

prs_status prs_subspace_load(const char* path, prs_subspace** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = new prs_subspace{prs::load_subspace(path)};
  });
}

prs_status prs_subspace_parse(const char* text, prs_subspace** out) {
  return guard([&] {
    require(text && out, "null argument");
    *out = new prs_subspace{prs::parse_subspace(text)};
  });
}

prs_status prs_subspace_create(size_t dim, const char* const* names, const double* lower, const double* upper,
                               const double* base, prs_subspace** out) {
  return guard([&] {
    require(names && lower && upper && out, "null argument");
    std::vector<std::string> n;
    for (size_t i = 0; i < dim; ++i) {
      require(names[i] != nullptr, "null dimension name");
      n.emplace_back(names[i]);
    }
    prs::SubspaceBox box = prs::make_box(std::move(n), std::vector<double>(lower, lower + dim),
                                         std::vector<double>(upper, upper + dim));
    if (base) box.base = Eigen::Map<const Eigen::VectorXd>(base, static_cast<Eigen::Index>(dim));
    box.validate();
    *out = new prs_subspace{std::move(box)};
  });
}

void prs_subspace_free(prs_subspace* box) { delete box; }

size_t prs_subspace_dim(const prs_subspace* box) { return box ? box->box.dim() : 0; }

const char* prs_subspace_name(const prs_subspace* box, size_t i) {
  if (!box || i >= box->box.dim()) return nullptr;
  return box->box.names[i].c_str();
}

prs_status prs_subspace_bounds(const prs_subspace* box, double* lower, double* upper) {
  return guard([&] {
    require(box && lower && upper, "null argument");
    for (size_t d = 0; d < box->box.dim(); ++d) {
      lower[d] = box->box.lower[static_cast<Eigen::Index>(d)];
      upper[d] = box->box.upper[static_cast<Eigen::Index>(d)];
    }
  });
}

int prs_subspace_has_base(const prs_subspace* box) { return box && box->box.base ? 1 : 0; }

prs_status prs_subspace_restrict(const prs_subspace* box, const char* d1, const char* d2, prs_subspace** out) {
  return guard([&] {
    require(box && d1 && d2 && out, "null argument");
    const auto& b = box->box;
    auto find = [&](const char* name) {
      for (size_t d = 0; d < b.dim(); ++d)
        if (b.names[d] == name) return d;
      throw prs::Error(prs::Errc::invalid_argument, std::string("box has no dimension ") + name);
    };
    const size_t i1 = find(d1), i2 = find(d2);
    require(i1 != i2, "surface dimensions must differ");
    if (b.dim() > 2) require(b.base.has_value(), "fixing the other dimensions needs a base point");
    prs::SubspaceBox r;
    r.names = {b.names[i1], b.names[i2]};
    r.lower = Eigen::Vector2d(b.lower[static_cast<Eigen::Index>(i1)], b.lower[static_cast<Eigen::Index>(i2)]);
    r.upper = Eigen::Vector2d(b.upper[static_cast<Eigen::Index>(i1)], b.upper[static_cast<Eigen::Index>(i2)]);
    if (b.base)
      r.base = Eigen::Vector2d((*b.base)[static_cast<Eigen::Index>(i1)], (*b.base)[static_cast<Eigen::Index>(i2)]);
    r.fixed = b.fixed;
    for (size_t d = 0; d < b.dim(); ++d)
      if (d != i1 && d != i2) r.fixed.emplace_back(b.names[d], (*b.base)[static_cast<Eigen::Index>(d)]);
    r.validate();
    *out = new prs_subspace{std::move(r)};
  });
}

prs_status prs_oracle_from_network(const prs_network* net, const prs_subspace* box, prs_oracle** out) {
  return guard([&] {
    require(net && box && out, "null argument");
    *out = new prs_oracle{prs::make_network_oracle(net->net, box->box)};
  });
}

prs_status prs_oracle_from_callback(prs_oracle_fn fn, void* user, prs_oracle** out) {
  return guard([&] {
    require(fn && out, "null argument");
    auto wrapped = [fn, user](std::span<const double> x) {
      double y = 0.0;
      const int rc = fn(user, x.data(), x.size(), &y);
      if (rc != 0) throw prs::Error(prs::Errc::infeasible, "oracle callback failed with code " + std::to_string(rc));
      return y;
    };
    *out = new prs_oracle{wrapped};
  });
}

void prs_oracle_free(prs_oracle* oracle) { delete oracle; }

prs_status prs_certify(const prs_oracle* oracle, const prs_subspace* box, const prs_options* opts, prs_run** out) {
  return guard([&] {
    require(oracle && box && out, "null argument");
    auto run = std::make_unique<prs_run>();
    run->options = options_of(opts);
    apply_length_scale(run->options, opts, box->box.dim());
    run->result = prs::certify_prs(oracle->fn, box->box, run->options);
    *out = run.release();
  });
}

prs_status prs_search_subspace(const prs_oracle* oracle, const prs_subspace* box, const prs_options* opts,
                               prs_run** out) {
  return guard([&] {
    require(oracle && box && out, "null argument");
    auto run = std::make_unique<prs_run>();
    run->options = options_of(opts);
    apply_length_scale(run->options, opts, box->box.dim());
    auto s = prs::subspace_search(oracle->fn, box->box, run->options);
    run->result = std::move(s.result);
    run->extras.alpha = s.alpha;
    run->extras.anchor_lambda = s.anchor_lambda;
    run->has_search = true;
    *out = run.release();
  });
}

prs_status prs_run_search_confidence(prs_run* run, const prs_options* opts) {
  return guard([&] {
    require(run != nullptr, "null argument");
    prs::CertifyOptions o = opts ? options_of(opts) : run->options;
    if (opts) apply_length_scale(o, opts, run->result.cert.box.dim());
    const auto r = prs::confidence_search(run->result.run.gp, run->result.cert.box, o.schedule, o.ucb);
    prs::Certificate c = r.cert;
    const auto& old = run->result.cert;
    c.reason = old.reason;
    c.policy = old.policy;
    c.failure = old.failure;
    c.oracle_calls = old.oracle_calls;
    c.wall_ms = old.wall_ms;
    if (old.verdict == prs::Verdict::aborted_infeasible) c.verdict = old.verdict;
    run->result.cert = std::move(c);
    run->extras.delta_prime = r.delta_prime;
  });
}

prs_status prs_run_validate(prs_run* run, const prs_oracle* oracle, size_t n, uint64_t seed) {
  return guard([&] {
    require(run && oracle, "null argument");
    run->extras.validation = prs::validate_certificate(oracle->fn, run->result, n, seed);
    run->extras.validation_seed = seed;
  });
}

void prs_run_free(prs_run* run) { delete run; }

prs_status prs_run_summary(const prs_run* run, prs_summary* out) {
  return guard([&] {
    require(run && out, "null argument");
    const auto& c = run->result.cert;
    prs_summary s{};
    s.verdict = static_cast<int>(c.verdict);
    s.termination = static_cast<int>(c.reason);
    s.delta = c.delta;
    s.beta = c.beta;
    s.p_m = c.p_m;
    s.max_sigma = c.max_sigma;
    s.max_mean = c.max_mean;
    s.samples = c.samples;
    s.oracle_calls = c.oracle_calls;
    s.grid_density = c.grid_density;
    s.grid_points = c.grid_points;
    s.wall_ms = c.wall_ms;
    s.has_search = run->has_search ? 1 : 0;
    s.alpha = run->extras.alpha.value_or(1.0);
    s.anchor_lambda = run->extras.anchor_lambda.value_or(0.0);
    s.has_delta_prime = run->extras.delta_prime ? 1 : 0;
    s.delta_prime = run->extras.delta_prime.value_or(c.delta);
    if (const auto& v = run->extras.validation) {
      s.has_validation = 1;
      s.validation_points = v->points;
      s.validation_unstable = v->unstable;
      s.validation_above_bound = v->above_bound;
      s.validation_coverage = v->coverage();
      s.validation_max_lambda = v->max_lambda;
    }
    *out = s;
  });
}

size_t prs_run_dim(const prs_run* run) { return run ? run->result.cert.box.dim() : 0; }

prs_status prs_run_box(const prs_run* run, double* lower, double* upper, double* argmax) {
  return guard([&] {
    require(run != nullptr, "null argument");
    const auto& c = run->result.cert;
    for (Eigen::Index d = 0; d < static_cast<Eigen::Index>(c.box.dim()); ++d) {
      if (lower) lower[d] = c.box.lower[d];
      if (upper) upper[d] = c.box.upper[d];
      if (argmax) argmax[d] = c.argmax[d];
    }
  });
}

prs_status prs_run_posterior(const prs_run* run, const double* x, double* mean, double* variance) {
  return guard([&] {
    require(run && x && mean && variance, "null argument");
    const auto& box = run->result.cert.box;
    const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(x, static_cast<Eigen::Index>(box.dim()));
    const auto post = run->result.run.gp.posterior(box.to_unit(p));
    *mean = post.mean;
    *variance = post.variance;
  });
}

prs_status prs_run_write_certificate(const prs_run* run, const char* path, int timing) {
  return guard([&] {
    require(run && path, "null argument");
    prs::write_text_file(path, prs::format_certificate(run->result.cert, run->extras, timing != 0));
  });
}

prs_status prs_run_write_history(const prs_run* run, const char* path, int timing) {
  return guard([&] {
    require(run && path, "null argument");
    prs::write_text_file(path, prs::format_history(run->result.run.history, timing != 0));
  });
}

prs_status prs_run_write_box_table(const prs_run* run, const char* path) {
  return guard([&] {
    require(run && path, "null argument");
    prs::write_text_file(path, prs::format_box_table(run->result.cert.box));
  });
}

prs_status prs_run_write_subspace(const prs_run* run, const char* path) {
  return guard([&] {
    require(run && path, "null argument");
    prs::write_text_file(path, prs::format_subspace(run->result.cert.box));
  });
}

prs_status prs_run_write_gp(const prs_run* run, const char* path) {
  return guard([&] {
    require(run && path, "null argument");
    prs::write_text_file(path, prs::format_gp(run->result.run.gp));
  });
}

prs_status prs_run_write_surface(const prs_run* run, const prs_oracle* truth, int density, const char* path) {
  return guard([&] {
    require(run && path, "null argument");
    const auto s = prs::evaluate_surface(run->result.run.gp, run->result.cert.box, run->result.cert.beta, density,
                                         truth ? &truth->fn : nullptr);
    prs::write_text_file(path, prs::format_surface(s));
  });
}

}  // extern "C"
