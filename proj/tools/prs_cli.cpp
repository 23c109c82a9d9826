// Command-line front end over the C interface.
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "prs/prs.h"

namespace {

enum Exit { kPrs = 0, kError = 1, kNotCertified = 2, kAborted = 3, kNoResult = 4 };

struct Common {
  std::string network;
  std::string subspace;
  std::string out = ".";
  std::string beta_mode = "practical";
  std::string infeasible = "abort";
  size_t validate = 0;
  bool timing = false;
  prs_options opts{};
};

// Owns one C handle.
template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Network = Handle<prs_network, prs_network_free>;
using Subspace = Handle<prs_subspace, prs_subspace_free>;
using Oracle = Handle<prs_oracle, prs_oracle_free>;
using Run = Handle<prs_run, prs_run_free>;

struct Failure {
  prs_status status;
  std::string what;
};

void check(prs_status s, const std::string& context) {
  if (s != PRS_OK) throw Failure{s, context + ": " + prs_last_error()};
}

void add_common(CLI::App* app, Common& c, bool needs_subspace) {
  app->add_option("-n,--network", c.network, "network file")->required()->check(CLI::ExistingFile);
  if (needs_subspace) app->add_option("-s,--subspace", c.subspace, "subspace spec file")->required()->check(CLI::ExistingFile);
  app->add_option("--delta", c.opts.delta, "risk level in (0, 1)")->capture_default_str();
  app->add_option("--beta-mode", c.beta_mode, "practical or theoretical")
      ->check(CLI::IsMember({"practical", "theoretical"}))
      ->capture_default_str();
  app->add_option("--rkhs-norm", c.opts.rkhs_norm, "theoretical beta: RKHS norm bound")->capture_default_str();
  app->add_option("--gamma", c.opts.gamma, "theoretical beta: information gain")->capture_default_str();
  app->add_option("--max-samples", c.opts.max_samples, "model size limit")->capture_default_str();
  app->add_option("--tol-sigma", c.opts.tol_sigma, "stop when grid max sigma falls below")->capture_default_str();
  app->add_option("--tol-p", c.opts.tol_p, "stop when p_m moves less than this")->capture_default_str();
  app->add_option("--patience", c.opts.patience, "consecutive steady iterations for tol-p")->capture_default_str();
  app->add_option("--grid-density", c.opts.grid_density, "points per dimension")->capture_default_str();
  app->add_option("--max-grid-points", c.opts.max_grid_points, "grid size budget")->capture_default_str();
  app->add_option("--refine-iterations", c.opts.refine_iterations, "pattern search sweeps")->capture_default_str();
  app->add_option("--length-scale", c.opts.length_scale, "kernel length (model units)")->capture_default_str();
  app->add_option("--signal-variance", c.opts.signal_variance, "kernel variance")->capture_default_str();
  app->add_option("--noise-sd", c.opts.noise_sd, "observation noise")->capture_default_str();
  app->add_option("--seed", c.opts.seed, "seed for validation draws")->capture_default_str();
  app->add_option("--infeasible", c.infeasible, "abort or violate")
      ->check(CLI::IsMember({"abort", "violate"}))
      ->capture_default_str();
  app->add_option("--validate", c.validate, "Monte-Carlo checks of a PRS result")->capture_default_str();
  app->add_option("-o,--out", c.out, "output directory")->capture_default_str();
  app->add_flag("--timing", c.timing, "include wall times in outputs");
}

void finalize(Common& c) {
  c.opts.beta_mode = c.beta_mode == "practical" ? PRS_BETA_PRACTICAL : PRS_BETA_THEORETICAL;
  c.opts.infeasible_policy = c.infeasible == "abort" ? PRS_INFEASIBLE_ABORT : PRS_INFEASIBLE_VIOLATE;
  std::error_code ec;
  std::filesystem::create_directories(c.out, ec);
  if (ec) throw Failure{PRS_E_IO, "cannot create " + c.out + ": " + ec.message()};
}

std::string path_in(const Common& c, const char* name) { return (std::filesystem::path(c.out) / name).string(); }

int exit_for(const prs_summary& s) {
  switch (s.verdict) {
    case PRS_VERDICT_PRS: return kPrs;
    case PRS_VERDICT_NOT_CERTIFIED: return kNotCertified;
    default: return kAborted;
  }
}

prs_summary summary_of(const Run& run) {
  prs_summary s{};
  check(prs_run_summary(run.get(), &s), "summary");
  return s;
}

void print_summary(const Run& run, const Common& c) {
  const prs_summary s = summary_of(run);
  const size_t dim = prs_run_dim(run.get());
  std::vector<double> lo(dim), hi(dim), arg(dim);
  check(prs_run_box(run.get(), lo.data(), hi.data(), arg.data()), "box");
  std::printf("verdict %s\n", prs_verdict_name(s.verdict));
  std::printf("p_m %.6g\n", s.p_m);
  std::printf("delta %.6g\n", s.delta);
  std::printf("beta %.6g\n", s.beta);
  std::printf("samples %zu\n", s.samples);
  std::printf("termination %s\n", prs_termination_name(s.termination));
  std::printf("max_sigma %.3g\n", s.max_sigma);
  if (s.has_search) std::printf("alpha %.6g\n", s.alpha);
  if (s.has_delta_prime) std::printf("delta_prime %.6g\n", s.delta_prime);
  if (s.has_validation)
    std::printf("validation %zu points, %zu unstable, %zu above bound, coverage %.4f\n", s.validation_points,
                s.validation_unstable, s.validation_above_bound, s.validation_coverage);
  if (c.timing) std::printf("wall_ms %.1f\n", s.wall_ms);
}

void maybe_validate(Run& run, const Oracle& oracle, const Common& c) {
  if (c.validate == 0) return;
  if (summary_of(run).verdict != PRS_VERDICT_PRS) {
    std::fprintf(stderr, "validation skipped: the box is not certified\n");
    return;
  }
  check(prs_run_validate(run.get(), oracle.get(), c.validate, c.opts.seed), "validation");
}

void write_run(const Run& run, const Common& c) {
  check(prs_run_write_certificate(run.get(), path_in(c, "certificate.txt").c_str(), c.timing), "certificate");
  check(prs_run_write_history(run.get(), path_in(c, "history.tsv").c_str(), c.timing), "history");
  check(prs_run_write_gp(run.get(), path_in(c, "model.gp").c_str()), "model");
}

void load_inputs(const Common& c, Network& net, Subspace& box, Oracle& oracle) {
  check(prs_network_load(c.network.c_str(), net.out()), c.network);
  check(prs_subspace_load(c.subspace.c_str(), box.out()), c.subspace);
  check(prs_oracle_from_network(net.get(), box.get(), oracle.out()), "oracle");
}

int cmd_certify(Common& c) {
  finalize(c);
  Network net;
  Subspace box;
  Oracle oracle;
  load_inputs(c, net, box, oracle);
  Run run;
  check(prs_certify(oracle.get(), box.get(), &c.opts, run.out()), "certify");
  maybe_validate(run, oracle, c);
  write_run(run, c);
  print_summary(run, c);
  return exit_for(summary_of(run));
}

int cmd_search(Common& c, const std::string& mode) {
  finalize(c);
  Network net;
  Subspace box;
  Oracle oracle;
  load_inputs(c, net, box, oracle);
  Run run;
  if (mode == "subspace") {
    const prs_status s = prs_search_subspace(oracle.get(), box.get(), &c.opts, run.out());
    if (s == PRS_E_NO_ANCHOR) {
      std::fprintf(stderr, "prs: %s\n", prs_last_error());
      return kNoResult;
    }
    check(s, "subspace search");
    check(prs_run_write_box_table(run.get(), path_in(c, "box.tsv").c_str()), "box table");
    check(prs_run_write_subspace(run.get(), path_in(c, "box.spec").c_str()), "box spec");
  } else {
    check(prs_certify(oracle.get(), box.get(), &c.opts, run.out()), "certify");
    if (summary_of(run).verdict != PRS_VERDICT_ABORTED_INFEASIBLE) {
      const prs_status s = prs_run_search_confidence(run.get(), &c.opts);
      if (s == PRS_E_NO_DELTA) {
        std::fprintf(stderr, "prs: %s\n", prs_last_error());
        write_run(run, c);
        print_summary(run, c);
        return kNoResult;
      }
      check(s, "confidence search");
    }
  }
  maybe_validate(run, oracle, c);
  write_run(run, c);
  print_summary(run, c);
  return exit_for(summary_of(run));
}

int cmd_surface(Common& c, const std::vector<std::string>& dims, int density, bool truth) {
  finalize(c);
  Network net;
  Subspace full;
  check(prs_network_load(c.network.c_str(), net.out()), c.network);
  check(prs_subspace_load(c.subspace.c_str(), full.out()), c.subspace);
  Subspace box;
  check(prs_subspace_restrict(full.get(), dims[0].c_str(), dims[1].c_str(), box.out()), "surface box");
  Oracle oracle;
  check(prs_oracle_from_network(net.get(), box.get(), oracle.out()), "oracle");
  Run run;
  check(prs_certify(oracle.get(), box.get(), &c.opts, run.out()), "certify");
  check(prs_run_write_surface(run.get(), truth ? oracle.get() : nullptr, density, path_in(c, "surface.csv").c_str()),
        "surface");
  maybe_validate(run, oracle, c);
  write_run(run, c);
  print_summary(run, c);
  return exit_for(summary_of(run));
}

// "Name=value" pairs.
void split_assignments(const std::vector<std::string>& items, std::vector<std::string>& names, std::vector<double>& values) {
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw Failure{PRS_E_INVALID_ARGUMENT, "expected name=value, got '" + item + "'"};
    names.push_back(item.substr(0, eq));
    try {
      size_t used = 0;
      values.push_back(std::stod(item.substr(eq + 1), &used));
      if (used != item.size() - eq - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Failure{PRS_E_INVALID_ARGUMENT, "invalid value in '" + item + "'"};
    }
  }
}

std::vector<const char*> c_names(const std::vector<std::string>& names) {
  std::vector<const char*> out;
  for (const auto& n : names) out.push_back(n.c_str());
  return out;
}

int cmd_calibrate(const std::string& network, const std::vector<std::string>& base, const std::string& output) {
  std::vector<std::string> names;
  std::vector<double> values;
  split_assignments(base, names, values);
  Network net, cal;
  check(prs_network_load(network.c_str(), net.out()), network);
  const auto cn = c_names(names);
  check(prs_network_calibrate(net.get(), cn.data(), values.data(), names.size(), cal.out()), "calibration");
  check(prs_network_save(cal.get(), output.c_str()), output);
  std::printf("wrote %s\n", output.c_str());
  return kPrs;
}

int cmd_eval(const std::string& network, const std::vector<std::string>& sets) {
  std::vector<std::string> names;
  std::vector<double> values;
  split_assignments(sets, names, values);
  Network net;
  check(prs_network_load(network.c_str(), net.out()), network);
  const size_t n = prs_network_machine_count(net.get());
  std::vector<double> pg(n), qg(n), vm(n);
  double lambda = 0.0;
  const auto cn = c_names(names);
  check(prs_evaluate(net.get(), cn.data(), values.data(), names.size(), pg.data(), qg.data(), vm.data(), n, &lambda),
        "evaluation");
  std::printf("machine\tPg\tQg\tVm\n");
  for (size_t m = 0; m < n; ++m) std::printf("%zu\t%.6f\t%.6f\t%.6f\n", m + 1, pg[m], qg[m], vm[m]);
  std::printf("lambda_c\t%.10g\n", lambda);
  return kPrs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic small-signal stability certification"};
  app.require_subcommand(1);

  Common certify_opts, search_opts, surface_opts;
  for (Common* c : {&certify_opts, &search_opts, &surface_opts}) prs_options_init(&c->opts);

  auto* certify = app.add_subcommand("certify", "certify a subspace");
  add_common(certify, certify_opts, true);

  auto* search = app.add_subcommand("search", "subspace or confidence search");
  std::string mode;
  search->add_option("mode", mode, "subspace or confidence")->required()->check(CLI::IsMember({"subspace", "confidence"}));
  add_common(search, search_opts, true);

  auto* surface = app.add_subcommand("surface", "posterior grid over two dimensions");
  std::vector<std::string> dims;
  int density = 21;
  bool truth = false;
  add_common(surface, surface_opts, true);
  surface->add_option("--dims", dims, "two dimension names")->required()->expected(2)->delimiter(',');
  surface->add_option("--density", density, "points per axis")->capture_default_str();
  surface->add_flag("--truth", truth, "add a lambda_c column from the oracle");

  auto* calibrate = app.add_subcommand("calibrate", "fit loads to a base point");
  std::string cal_network, cal_output;
  std::vector<std::string> cal_base;
  calibrate->add_option("-n,--network", cal_network, "network file")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--base", cal_base, "Name=value targets")->required()->delimiter(',');
  calibrate->add_option("-o,--output", cal_output, "calibrated network file")->required();

  auto* eval = app.add_subcommand("eval", "power flow and lambda_c at one point");
  std::string eval_network;
  std::vector<std::string> eval_sets;
  eval->add_option("-n,--network", eval_network, "network file")->required()->check(CLI::ExistingFile);
  eval->add_option("--set", eval_sets, "Name=value targets")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kError;
  }

  try {
    if (*certify) return cmd_certify(certify_opts);
    if (*search) return cmd_search(search_opts, mode);
    if (*surface) return cmd_surface(surface_opts, dims, density, truth);
    if (*calibrate) return cmd_calibrate(cal_network, cal_base, cal_output);
    if (*eval) return cmd_eval(eval_network, eval_sets);
  } catch (const Failure& f) {
    std::fprintf(stderr, "prs: %s\n", f.what.c_str());
    return f.status == PRS_E_NO_ANCHOR || f.status == PRS_E_NO_DELTA ? kNoResult : kError;
  }
  return kError;
}
