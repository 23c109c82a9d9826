#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "prs/network.hpp"

namespace prs {

/// Operating quantities a sample coordinate can name. Pg/Qg/Vm refer to the
/// machine at the given bus; LP/LQ are multipliers on the nominal load at the bus.
enum class QuantityKind { pg, qg, vm, load_p, load_q };

struct Quantity {
  QuantityKind kind = QuantityKind::pg;
  int bus = 0;

  /// "Pg2", "Qg1", "Vm3", "LP5", "LQ8". Throws Error(invalid_argument) otherwise.
  static Quantity parse(std::string_view name);
  std::string name() const;

  bool operator==(const Quantity&) const = default;
};

struct TargetEntry {
  Quantity quantity;
  double value = 0.0;
};

/// Named operating quantities with target values (pu, or multipliers for loads).
class OperatingTarget {
 public:
  OperatingTarget() = default;
  OperatingTarget(std::initializer_list<std::pair<std::string_view, double>> entries);

  /// Adds or overwrites an entry.
  void set(std::string_view name, double value);
  std::optional<double> get(std::string_view name) const;

  const std::vector<TargetEntry>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }
  std::string describe() const;

 private:
  std::vector<TargetEntry> entries_;
};

struct PowerFlowOptions {
  double tolerance = 1e-8;
  int max_iterations = 50;
};

/// Converged power flow plus initialized machine states.
struct EquilibriumPoint {
  Eigen::VectorXd vm;  // per bus, pu
  Eigen::VectorXd va;  // per bus, rad
  Eigen::VectorXd pg;  // per machine, pu
  Eigen::VectorXd qg;  // per machine, pu
  std::vector<Load> loads;  // effective loads after any scaling
  Eigen::VectorXd tm;       // per machine mechanical torque
  Eigen::VectorXd vref;     // per machine exciter reference
  Eigen::VectorXd x;        // dynamic states, 7 per machine
  Eigen::VectorXd y;        // algebraic states: (Id, Iq) per machine, then angles, then magnitudes
  double mismatch = 0.0;    // power-flow mismatch, inf-norm
  int iterations = 0;
};

/// Solves the power flow for direct setpoints (non-slack Pg, generator Vm,
/// load multipliers) and initializes machine states. Names not given take the
/// network's own dispatch. Derived names (slack Pg, any Qg) are rejected here;
/// use map_sample_to_equilibrium for those.
EquilibriumPoint solve_power_flow(const NetworkModel& net, const OperatingTarget& setpoints,
                                  const PowerFlowOptions& opts = {});

/// Rescales the loads so that the power flow at the base point reproduces the
/// slack output and every Qg. Starts from the best proportional scaling and
/// takes minimum-norm Newton steps from there. The returned network also
/// carries the base dispatch (Pg, Vm) as its own setpoints.
NetworkModel calibrate_base_loads(const NetworkModel& net, const OperatingTarget& base);

/// Load multipliers of `calibrated` relative to `nominal` (P then Q per load).
std::vector<double> load_scale_factors(const NetworkModel& nominal, const NetworkModel& calibrated);

struct MappingOptions {
  double tolerance = 1e-6;       // required accuracy of derived targets (pu)
  double inner_tolerance = 1e-11;
  int max_iterations = 50;
  double voltage_rail_low = 0.5;
  double voltage_rail_high = 1.5;
};

/// Applies direct names as setpoints and realizes derived names (slack Pg, Qg)
/// with a damped minimum-norm Newton search over the remaining free controls:
/// unnamed generator voltage setpoints first, then load multipliers.
EquilibriumPoint map_sample_to_equilibrium(const NetworkModel& net, const OperatingTarget& z,
                                           const MappingOptions& opts = {});

/// Machine-state initialization from a solved power flow (exposed for tests).
void initialize_machines(const NetworkModel& net, EquilibriumPoint& eq);

}  // namespace prs
