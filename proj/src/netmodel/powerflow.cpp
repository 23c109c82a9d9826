#include "prs/powerflow.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "equations.hpp"
#include "prs/error.hpp"

namespace prs {

using detail::DaeLayout;
using detail::Dual;

// ---------------------------------------------------------------------------
// Quantity names

Quantity Quantity::parse(std::string_view name) {
  static constexpr std::pair<std::string_view, QuantityKind> kPrefixes[] = {
      {"Pg", QuantityKind::pg},     {"Qg", QuantityKind::qg},     {"Vm", QuantityKind::vm},
      {"LP", QuantityKind::load_p}, {"LQ", QuantityKind::load_q},
  };
  for (const auto& [prefix, kind] : kPrefixes) {
    if (!name.starts_with(prefix)) continue;
    const auto digits = name.substr(prefix.size());
    int bus = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), bus);
    if (digits.empty() || ec != std::errc{} || ptr != digits.data() + digits.size() || bus <= 0) break;
    return Quantity{kind, bus};
  }
  throw Error(Errc::invalid_argument, "unknown operating quantity '" + std::string(name) + "'");
}

std::string Quantity::name() const {
  const char* prefix = "Pg";
  switch (kind) {
    case QuantityKind::pg: prefix = "Pg"; break;
    case QuantityKind::qg: prefix = "Qg"; break;
    case QuantityKind::vm: prefix = "Vm"; break;
    case QuantityKind::load_p: prefix = "LP"; break;
    case QuantityKind::load_q: prefix = "LQ"; break;
  }
  return prefix + std::to_string(bus);
}

OperatingTarget::OperatingTarget(std::initializer_list<std::pair<std::string_view, double>> entries) {
  for (const auto& [name, value] : entries) set(name, value);
}

void OperatingTarget::set(std::string_view name, double value) {
  if (!std::isfinite(value))
    throw Error(Errc::invalid_argument, "operating target '" + std::string(name) + "' is not finite");
  const Quantity q = Quantity::parse(name);
  for (auto& e : entries_) {
    if (e.quantity == q) {
      e.value = value;
      return;
    }
  }
  entries_.push_back({q, value});
}

std::optional<double> OperatingTarget::get(std::string_view name) const {
  const Quantity q = Quantity::parse(name);
  for (const auto& e : entries_)
    if (e.quantity == q) return e.value;
  return std::nullopt;
}

std::string OperatingTarget::describe() const {
  std::ostringstream out;
  out.precision(10);
  out << "{";
  for (std::size_t i = 0; i < entries_.size(); ++i)
    out << (i ? ", " : "") << entries_[i].quantity.name() << "=" << entries_[i].value;
  out << "}";
  return out.str();
}

// ---------------------------------------------------------------------------
// Newton power flow

namespace {

struct Controls {
  std::vector<double> pg;  // per machine (slack entry unused)
  std::vector<double> vm;  // per machine
  std::vector<double> lp;  // per load, multiplier
  std::vector<double> lq;
};

Controls base_controls(const NetworkModel& net) {
  Controls c;
  for (const auto& m : net.machines) {
    c.pg.push_back(m.p_set);
    c.vm.push_back(net.buses[net.bus_index(m.bus)].v_set);
  }
  c.lp.assign(net.loads.size(), 1.0);
  c.lq.assign(net.loads.size(), 1.0);
  return c;
}

std::vector<Load> effective_loads(const NetworkModel& net, const Controls& c) {
  std::vector<Load> out = net.loads;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].p *= c.lp[k];
    out[k].q *= c.lq[k];
  }
  return out;
}

struct PfState {
  std::vector<double> vm;
  std::vector<double> va;
  double mismatch = 0.0;
  int iterations = 0;
};

class PowerFlow {
 public:
  PowerFlow(const NetworkModel& net, const ComplexMatrix& ybus) : net_(net), ybus_(ybus) {
    const int n = static_cast<int>(net.buses.size());
    for (int b = 0; b < n; ++b) {
      if (net.buses[b].type != BusType::slack) angle_buses_.push_back(b);
      if (net.buses[b].type == BusType::pq) magnitude_buses_.push_back(b);
    }
  }

  PfState solve(const Controls& c, const PowerFlowOptions& opts, const PfState* warm) const {
    const int n = static_cast<int>(net_.buses.size());
    PfState st;
    if (warm) {
      st = *warm;
    } else {
      st.vm.assign(n, 1.0);
      st.va.assign(n, 0.0);
    }
    // Fixed magnitudes at generator buses, zero reference angle at the slack.
    for (std::size_t m = 0; m < net_.machines.size(); ++m) st.vm[net_.bus_index(net_.machines[m].bus)] = c.vm[m];
    st.va[net_.slack_bus_index()] = 0.0;

    std::vector<double> p_spec(n, 0.0), q_spec(n, 0.0);
    for (std::size_t m = 0; m < net_.machines.size(); ++m) p_spec[net_.bus_index(net_.machines[m].bus)] += c.pg[m];
    const auto loads = effective_loads(net_, c);
    for (const auto& l : loads) {
      p_spec[net_.bus_index(l.bus)] -= l.p;
      q_spec[net_.bus_index(l.bus)] -= l.q;
    }

    const int na = static_cast<int>(angle_buses_.size());
    const int nu = na + static_cast<int>(magnitude_buses_.size());
    Eigen::VectorXd f(nu);
    Eigen::MatrixXd jac(nu, nu);

    for (int iter = 0;; ++iter) {
      residual<double>(st, p_spec, q_spec, nullptr, f);
      st.mismatch = f.cwiseAbs().maxCoeff();
      st.iterations = iter;
      if (!std::isfinite(st.mismatch)) throw Error(Errc::diverged, "power flow diverged");
      if (st.mismatch < opts.tolerance) return st;
      if (iter >= opts.max_iterations)
        throw Error(Errc::diverged, "power flow diverged (mismatch " + std::to_string(st.mismatch) + " after " +
                                        std::to_string(iter) + " iterations)");

      for (int j = 0; j < nu; ++j) {
        Eigen::VectorXd col(nu);
        residual<Dual>(st, p_spec, q_spec, &j, col);
        jac.col(j) = col;
      }
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
      if (!(lu.rcond() > 1e-14)) throw Error(Errc::singular, "power flow Jacobian singular");
      const Eigen::VectorXd step = lu.solve(f);
      for (int k = 0; k < na; ++k) st.va[angle_buses_[k]] -= step[k];
      for (int k = na; k < nu; ++k) st.vm[magnitude_buses_[k - na]] -= step[k];
      for (double v : st.vm)
        if (!(v > 0.05) || !(v < 5.0)) throw Error(Errc::diverged, "power flow diverged (voltage collapse)");
    }
  }

  // Generation at each machine bus after a solve.
  void machine_outputs(const PfState& st, const Controls& c, Eigen::VectorXd& pg, Eigen::VectorXd& qg) const {
    std::vector<double> p, q;
    detail::network_injections(ybus_, st.vm, st.va, p, q);
    const auto loads = effective_loads(net_, c);
    for (const auto& l : loads) {
      p[net_.bus_index(l.bus)] += l.p;
      q[net_.bus_index(l.bus)] += l.q;
    }
    const auto nm = static_cast<Eigen::Index>(net_.machines.size());
    pg.resize(nm);
    qg.resize(nm);
    for (Eigen::Index m = 0; m < nm; ++m) {
      const int b = net_.bus_index(net_.machines[m].bus);
      pg[m] = p[b];
      qg[m] = q[b];
    }
  }

 private:
  // Mismatch (calculated - specified). With `seed` set, returns the directional
  // derivative along unknown *seed instead of the value.
  template <class T>
  void residual(const PfState& st, const std::vector<double>& p_spec, const std::vector<double>& q_spec,
                const int* seed, Eigen::VectorXd& out) const {
    const int n = static_cast<int>(st.vm.size());
    const int na = static_cast<int>(angle_buses_.size());
    std::vector<T> vm(n), va(n);
    for (int b = 0; b < n; ++b) {
      vm[b] = T(st.vm[b]);
      va[b] = T(st.va[b]);
    }
    if constexpr (std::is_same_v<T, Dual>) {
      if (*seed < na)
        va[angle_buses_[*seed]].d = 1.0;
      else
        vm[magnitude_buses_[*seed - na]].d = 1.0;
    }
    std::vector<T> p, q;
    detail::network_injections(ybus_, vm, va, p, q);
    int row = 0;
    for (int b : angle_buses_) {
      const T r = p[b] - T(p_spec[b]);
      if constexpr (std::is_same_v<T, Dual>) out[row++] = r.d; else out[row++] = r;
    }
    for (int b : magnitude_buses_) {
      const T r = q[b] - T(q_spec[b]);
      if constexpr (std::is_same_v<T, Dual>) out[row++] = r.d; else out[row++] = r;
    }
  }

  const NetworkModel& net_;
  const ComplexMatrix& ybus_;
  std::vector<int> angle_buses_;
  std::vector<int> magnitude_buses_;
};

EquilibriumPoint make_equilibrium(const NetworkModel& net, const PowerFlow& pf, const PfState& st,
                                  const Controls& c) {
  EquilibriumPoint eq;
  eq.vm = Eigen::Map<const Eigen::VectorXd>(st.vm.data(), static_cast<Eigen::Index>(st.vm.size()));
  eq.va = Eigen::Map<const Eigen::VectorXd>(st.va.data(), static_cast<Eigen::Index>(st.va.size()));
  pf.machine_outputs(st, c, eq.pg, eq.qg);
  eq.loads = effective_loads(net, c);
  eq.mismatch = st.mismatch;
  eq.iterations = st.iterations;
  initialize_machines(net, eq);
  return eq;
}

void apply_direct(const NetworkModel& net, Controls& c, const Quantity& q, double value) {
  const auto bus_name = std::to_string(q.bus);
  switch (q.kind) {
    case QuantityKind::pg: {
      auto m = net.machine_at(q.bus);
      if (!m) throw Error(Errc::invalid_argument, "no machine at bus " + bus_name + " for " + q.name());
      c.pg[*m] = value;
      return;
    }
    case QuantityKind::vm: {
      auto m = net.machine_at(q.bus);
      if (!m) throw Error(Errc::invalid_argument, q.name() + ": only generator voltage setpoints are controllable");
      c.vm[*m] = value;
      return;
    }
    case QuantityKind::load_p:
    case QuantityKind::load_q: {
      auto k = net.load_at(q.bus);
      if (!k) throw Error(Errc::invalid_argument, "no load at bus " + bus_name + " for " + q.name());
      (q.kind == QuantityKind::load_p ? c.lp : c.lq)[*k] = value;
      return;
    }
    case QuantityKind::qg:
      break;
  }
  throw Error(Errc::invalid_argument, q.name() + " is a power-flow output, not a setpoint");
}

bool is_derived(const NetworkModel& net, const Quantity& q) {
  if (q.kind == QuantityKind::qg) return true;
  if (q.kind == QuantityKind::pg) {
    auto m = net.machine_at(q.bus);
    return m && *m == net.slack_machine_index();
  }
  return false;
}

// Index into the flattened control vector [vm per machine | lp, lq per load].
struct FreeControl {
  enum class Kind { vm, lp, lq } kind;
  int index;
};

double& control_ref(Controls& c, const FreeControl& fc) {
  switch (fc.kind) {
    case FreeControl::Kind::vm: return c.vm[fc.index];
    case FreeControl::Kind::lp: return c.lp[fc.index];
    case FreeControl::Kind::lq: return c.lq[fc.index];
  }
  return c.vm[fc.index];
}

struct DerivedTarget {
  Quantity quantity;
  int machine;
  double value;
};

struct TargetSolve {
  bool converged = false;
  Controls controls;
  PfState state;
  Eigen::VectorXd residual;
  std::string failure;
};

class TargetSolver {
 public:
  TargetSolver(const NetworkModel& net, const ComplexMatrix& ybus, const MappingOptions& opts)
      : net_(net), pf_(net, ybus), opts_(opts) {}

  TargetSolve solve(Controls c, const std::vector<FreeControl>& free, const std::vector<DerivedTarget>& targets) const {
    TargetSolve out;
    PowerFlowOptions pf_opts;
    pf_opts.tolerance = opts_.inner_tolerance;

    auto trial = [&](const Controls& cc, const PfState* warm, PfState& st, Eigen::VectorXd& r) -> bool {
      for (double v : cc.vm)
        if (v < opts_.voltage_rail_low || v > opts_.voltage_rail_high) return false;
      try {
        st = pf_.solve(cc, pf_opts, warm);
      } catch (const Error&) {
        return false;
      }
      for (double v : st.vm)
        if (v < opts_.voltage_rail_low || v > opts_.voltage_rail_high) return false;
      r = residual(st, cc, targets);
      return true;
    };

    PfState st;
    Eigen::VectorXd r;
    if (!trial(c, nullptr, st, r))
      throw Error(Errc::infeasible,
                  "infeasible operating target: power flow at the direct setpoints failed or left the voltage rail");

    const int k = static_cast<int>(targets.size());
    const int nf = static_cast<int>(free.size());
    constexpr double kStep = 1e-6;

    for (int iter = 0; k > 0 && iter < opts_.max_iterations; ++iter) {
      const double rnorm = r.cwiseAbs().maxCoeff();
      if (rnorm < opts_.inner_tolerance) break;
      if (nf == 0) {
        out.failure = "no free controls";
        break;
      }

      Eigen::MatrixXd jac(k, nf);
      bool jac_ok = true;
      for (int j = 0; j < nf && jac_ok; ++j) {
        Controls plus = c, minus = c;
        control_ref(plus, free[j]) += kStep;
        control_ref(minus, free[j]) -= kStep;
        PfState sp, sm;
        Eigen::VectorXd rp, rm;
        jac_ok = trial(plus, &st, sp, rp) && trial(minus, &st, sm, rm);
        if (jac_ok) jac.col(j) = (rp - rm) / (2.0 * kStep);
      }
      if (!jac_ok) {
        out.failure = "sensitivity evaluation left the feasible region";
        break;
      }

      const Eigen::VectorXd step = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(jac).solve(-r);
      bool accepted = false;
      for (double t = 1.0; t > 1e-6; t *= 0.5) {
        Controls cand = c;
        for (int j = 0; j < nf; ++j) control_ref(cand, free[j]) += t * step[j];
        PfState sc;
        Eigen::VectorXd rc;
        if (trial(cand, &st, sc, rc) && rc.cwiseAbs().maxCoeff() < (1.0 - 1e-4 * t) * rnorm) {
          c = std::move(cand);
          st = std::move(sc);
          r = std::move(rc);
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        out.failure = "root-find stalled";
        break;
      }
    }

    out.controls = std::move(c);
    out.state = std::move(st);
    out.residual = r;
    out.converged = k == 0 || r.cwiseAbs().maxCoeff() < opts_.tolerance;
    if (!out.converged && out.failure.empty()) out.failure = "iteration limit reached";
    return out;
  }

  const PowerFlow& power_flow() const { return pf_; }

 private:
  Eigen::VectorXd residual(const PfState& st, const Controls& c, const std::vector<DerivedTarget>& targets) const {
    Eigen::VectorXd pg, qg;
    pf_.machine_outputs(st, c, pg, qg);
    Eigen::VectorXd r(static_cast<Eigen::Index>(targets.size()));
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const auto& t = targets[i];
      const double actual = t.quantity.kind == QuantityKind::pg ? pg[t.machine] : qg[t.machine];
      r[static_cast<Eigen::Index>(i)] = actual - t.value;
    }
    return r;
  }

  const NetworkModel& net_;
  PowerFlow pf_;
  MappingOptions opts_;
};

std::string residual_report(const std::vector<DerivedTarget>& targets, const Eigen::VectorXd& r) {
  std::ostringstream out;
  out.precision(6);
  for (std::size_t i = 0; i < targets.size(); ++i)
    out << (i ? ", " : "") << targets[i].quantity.name() << " residual " << r[static_cast<Eigen::Index>(i)];
  return out.str();
}

void check_rails(const Controls& c, const MappingOptions& opts) {
  for (double v : c.vm)
    if (v < opts.voltage_rail_low || v > opts.voltage_rail_high)
      throw Error(Errc::infeasible, "infeasible operating target: voltage setpoint " + std::to_string(v) +
                                        " outside sanity rail");
}

}  // namespace

// ---------------------------------------------------------------------------

void initialize_machines(const NetworkModel& net, EquilibriumPoint& eq) {
  const DaeLayout lay{static_cast<int>(net.machines.size()), static_cast<int>(net.buses.size())};
  eq.x = Eigen::VectorXd::Zero(lay.nx());
  eq.y = Eigen::VectorXd::Zero(lay.ny());
  eq.tm = Eigen::VectorXd::Zero(lay.machines);
  eq.vref = Eigen::VectorXd::Zero(lay.machines);

  for (int b = 0; b < lay.buses; ++b) {
    eq.y[lay.theta_index(b)] = eq.va[b];
    eq.y[lay.vm_index(b)] = eq.vm[b];
  }

  using cd = std::complex<double>;
  for (int m = 0; m < lay.machines; ++m) {
    const Machine& mc = net.machines[m];
    const Exciter& ex = mc.exciter;
    const int b = net.bus_index(mc.bus);
    const cd v = std::polar(eq.vm[b], eq.va[b]);
    const cd current = std::conj(cd(eq.pg[m], eq.qg[m]) / v);
    const double delta = std::arg(v + cd(mc.rs, mc.xq) * current);
    const cd rot = std::polar(1.0, -(delta - std::numbers::pi / 2.0));
    const cd idq = current * rot;
    const cd vdq = v * rot;
    const double id = idq.real(), iq = idq.imag();
    const double vd = vdq.real(), vq = vdq.imag();

    const double edp = vd + mc.rs * id - mc.xq_p * iq;
    const double eqp = vq + mc.rs * iq + mc.xd_p * id;
    const double efd = eqp + (mc.xd - mc.xd_p) * id;
    const double vr = (ex.ke + ex.sat_a * std::exp(ex.sat_b * efd)) * efd;
    const double rf = ex.kf / ex.tf * efd;

    eq.x[lay.x_index(m, detail::kDelta)] = delta;
    eq.x[lay.x_index(m, detail::kOmega)] = 1.0;
    eq.x[lay.x_index(m, detail::kEqp)] = eqp;
    eq.x[lay.x_index(m, detail::kEdp)] = edp;
    eq.x[lay.x_index(m, detail::kEfd)] = efd;
    eq.x[lay.x_index(m, detail::kRf)] = rf;
    eq.x[lay.x_index(m, detail::kVr)] = vr;
    eq.y[lay.id_index(m)] = id;
    eq.y[lay.iq_index(m)] = iq;
    eq.tm[m] = edp * id + eqp * iq + (mc.xq_p - mc.xd_p) * id * iq;
    eq.vref[m] = eq.vm[b] + vr / ex.ka;
  }
}

EquilibriumPoint solve_power_flow(const NetworkModel& net, const OperatingTarget& setpoints,
                                  const PowerFlowOptions& opts) {
  Controls c = base_controls(net);
  for (const auto& e : setpoints.entries()) {
    if (is_derived(net, e.quantity))
      throw Error(Errc::invalid_argument,
                  e.quantity.name() + " is a power-flow output; use map_sample_to_equilibrium");
    apply_direct(net, c, e.quantity, e.value);
  }
  const ComplexMatrix ybus = net.admittance();
  PowerFlow pf(net, ybus);
  const PfState st = pf.solve(c, opts, nullptr);
  return make_equilibrium(net, pf, st, c);
}

EquilibriumPoint map_sample_to_equilibrium(const NetworkModel& net, const OperatingTarget& z,
                                           const MappingOptions& opts) {
  Controls c = base_controls(net);
  std::vector<DerivedTarget> derived;
  std::vector<bool> vm_named(net.machines.size(), false);
  std::vector<bool> lp_named(net.loads.size(), false), lq_named(net.loads.size(), false);

  for (const auto& e : z.entries()) {
    const Quantity& q = e.quantity;
    if (is_derived(net, q)) {
      auto m = net.machine_at(q.bus);
      if (!m) throw Error(Errc::invalid_argument, "no machine at bus " + std::to_string(q.bus) + " for " + q.name());
      derived.push_back({q, *m, e.value});
      continue;
    }
    apply_direct(net, c, q, e.value);
    if (q.kind == QuantityKind::vm) vm_named[*net.machine_at(q.bus)] = true;
    if (q.kind == QuantityKind::load_p) lp_named[*net.load_at(q.bus)] = true;
    if (q.kind == QuantityKind::load_q) lq_named[*net.load_at(q.bus)] = true;
  }
  check_rails(c, opts);

  std::vector<FreeControl> free;
  for (std::size_t m = 0; m < net.machines.size(); ++m)
    if (!vm_named[m]) free.push_back({FreeControl::Kind::vm, static_cast<int>(m)});
  for (std::size_t k = 0; k < net.loads.size(); ++k) {
    if (!lp_named[k]) free.push_back({FreeControl::Kind::lp, static_cast<int>(k)});
    if (!lq_named[k]) free.push_back({FreeControl::Kind::lq, static_cast<int>(k)});
  }
  if (derived.size() > free.size())
    throw Error(Errc::overdetermined, "overdetermined target: " + std::to_string(derived.size()) +
                                          " derived quantities but only " + std::to_string(free.size()) +
                                          " free controls");

  const ComplexMatrix ybus = net.admittance();
  TargetSolver solver(net, ybus, opts);
  const TargetSolve res = solver.solve(std::move(c), free, derived);
  if (!res.converged)
    throw Error(Errc::infeasible,
                "infeasible operating target (" + res.failure + "): " + residual_report(derived, res.residual));
  EquilibriumPoint eq = make_equilibrium(net, solver.power_flow(), res.state, res.controls);
  return eq;
}

NetworkModel calibrate_base_loads(const NetworkModel& net, const OperatingTarget& base) {
  Controls c = base_controls(net);
  std::vector<DerivedTarget> derived;
  for (const auto& e : base.entries()) {
    if (is_derived(net, e.quantity)) {
      derived.push_back({e.quantity, *net.machine_at(e.quantity.bus), e.value});
    } else if (e.quantity.kind == QuantityKind::pg || e.quantity.kind == QuantityKind::vm) {
      apply_direct(net, c, e.quantity, e.value);
    } else {
      throw Error(Errc::invalid_argument, "calibration base point may only name Pg, Qg and Vm");
    }
  }
  const int slack = net.slack_machine_index();
  const bool has_slack_p = std::any_of(derived.begin(), derived.end(), [&](const DerivedTarget& t) {
    return t.quantity.kind == QuantityKind::pg && t.machine == slack;
  });
  if (!has_slack_p) throw Error(Errc::invalid_argument, "calibration base point must give the slack Pg");
  if (net.loads.empty()) throw Error(Errc::invalid_argument, "network has no loads to calibrate");

  MappingOptions opts;
  const ComplexMatrix ybus = net.admittance();
  TargetSolver solver(net, ybus, opts);

  // Proportional scaling matching the slack output.
  std::vector<DerivedTarget> slack_only;
  for (const auto& t : derived)
    if (t.quantity.kind == QuantityKind::pg) slack_only.push_back(t);
  std::vector<DerivedTarget> none;
  Controls prop = c;
  double scale = 1.0;
  {
    double total_gen = 0.0, total_load = 0.0;
    for (std::size_t m = 0; m < net.machines.size(); ++m)
      total_gen += (static_cast<int>(m) == slack) ? slack_only.front().value : c.pg[m];
    for (const auto& l : net.loads) total_load += l.p;
    if (total_load > 0.0) scale = total_gen / total_load;
  }
  auto slack_residual = [&](double s) -> std::optional<double> {
    Controls cc = c;
    std::fill(cc.lp.begin(), cc.lp.end(), s);
    std::fill(cc.lq.begin(), cc.lq.end(), s);
    const TargetSolve ts = solver.solve(cc, {}, slack_only);
    if (ts.state.vm.empty()) return std::nullopt;
    return ts.residual[0];
  };
  for (int iter = 0; iter < 30; ++iter) {
    std::optional<double> r0;
    try {
      r0 = slack_residual(scale);
    } catch (const Error&) {
      break;
    }
    if (!r0 || std::abs(*r0) < 1e-12) break;
    const double h = 1e-6;
    std::optional<double> r1;
    try {
      r1 = slack_residual(scale + h);
    } catch (const Error&) {
      break;
    }
    if (!r1) break;
    const double slope = (*r1 - *r0) / h;
    if (slope == 0.0) break;
    scale -= *r0 / slope;
  }
  std::fill(prop.lp.begin(), prop.lp.end(), scale);
  std::fill(prop.lq.begin(), prop.lq.end(), scale);

  std::vector<FreeControl> free;
  for (std::size_t k = 0; k < net.loads.size(); ++k) {
    free.push_back({FreeControl::Kind::lp, static_cast<int>(k)});
    free.push_back({FreeControl::Kind::lq, static_cast<int>(k)});
  }

  TargetSolve res;
  try {
    res = solver.solve(prop, free, derived);
  } catch (const Error& e) {
    throw Error(Errc::infeasible, std::string("load calibration failed: ") + e.what());
  }
  constexpr double kCalibrationTolerance = 1e-3;
  if (res.residual.size() == 0 || res.residual.cwiseAbs().maxCoeff() > kCalibrationTolerance)
    throw Error(Errc::infeasible, "load calibration failed (" + res.failure + "): " +
                                      residual_report(derived, res.residual));

  NetworkModel out = net;
  for (std::size_t k = 0; k < out.loads.size(); ++k) {
    out.loads[k].p *= res.controls.lp[k];
    out.loads[k].q *= res.controls.lq[k];
  }
  for (std::size_t m = 0; m < out.machines.size(); ++m) {
    if (static_cast<int>(m) != slack) out.machines[m].p_set = res.controls.pg[m];
    out.buses[out.bus_index(out.machines[m].bus)].v_set = res.controls.vm[m];
  }
  return out;
}

std::vector<double> load_scale_factors(const NetworkModel& nominal, const NetworkModel& calibrated) {
  std::vector<double> out;
  for (std::size_t k = 0; k < nominal.loads.size(); ++k) {
    out.push_back(calibrated.loads[k].p / nominal.loads[k].p);
    out.push_back(calibrated.loads[k].q / nominal.loads[k].q);
  }
  return out;
}

}  // namespace prs
