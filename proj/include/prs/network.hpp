#pragma once

#include <complex>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace prs {

enum class BusType { slack, pv, pq };

struct Bus {
  int id = 0;
  BusType type = BusType::pq;
  double v_set = 1.0;  // voltage setpoint (pu), used at slack and PV buses
};

/// Pi-model branch. `b` is the total line charging, split half per end.
struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;
};

/// IEEE Type-I exciter with exponential saturation S_E(E_fd) = sat_a * exp(sat_b * E_fd).
struct Exciter {
  double ka = 0.0;
  double ta = 0.0;
  double ke = 0.0;
  double te = 0.0;
  double kf = 0.0;
  double tf = 0.0;
  double sat_a = 0.0;
  double sat_b = 0.0;
};

/// Two-axis synchronous machine. Reactances in pu on system base, time constants in s.
struct Machine {
  int bus = 0;
  double p_set = 0.0;  // dispatch (pu); ignored at the slack bus
  double h = 0.0;
  double d = 0.0;
  double xd = 0.0;
  double xd_p = 0.0;
  double xq = 0.0;
  double xq_p = 0.0;
  double td0_p = 0.0;
  double tq0_p = 0.0;
  double rs = 0.0;
  Exciter exciter;
};

/// Constant-power load.
struct Load {
  int bus = 0;
  double p = 0.0;
  double q = 0.0;
};

using ComplexMatrix = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic>;

class NetworkModel {
 public:
  double base_mva = 100.0;
  double freq_hz = 60.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Machine> machines;
  std::vector<Load> loads;

  /// Checks every structural and parameter invariant; throws Error(invalid_model).
  void validate() const;

  int bus_index(int bus_id) const;  // throws if unknown
  std::optional<int> find_bus(int bus_id) const noexcept;
  std::optional<int> machine_at(int bus_id) const noexcept;
  std::optional<int> load_at(int bus_id) const noexcept;
  int slack_bus_index() const;
  int slack_machine_index() const;

  double omega_s() const noexcept;

  /// Nodal admittance matrix in bus-file order.
  ComplexMatrix admittance() const;
};

NetworkModel parse_network(std::string_view text, const std::string& source = "<string>");
NetworkModel load_network(const std::filesystem::path& path);
std::string format_network(const NetworkModel& net);
void save_network(const NetworkModel& net, const std::filesystem::path& path);

}  // namespace prs
