#pragma once

// Residual templates shared by the power flow and the DAE linearization. They
// are instantiated on double and on the forward-mode Dual.

#include <vector>

#include "dual.hpp"
#include "prs/network.hpp"

namespace prs::detail {

inline constexpr int kStatesPerMachine = 7;

// Dynamic-state slots per machine.
enum : int { kDelta = 0, kOmega, kEqp, kEdp, kEfd, kRf, kVr };

struct DaeLayout {
  int machines = 0;
  int buses = 0;

  int nx() const { return kStatesPerMachine * machines; }
  int ny() const { return 2 * machines + 2 * buses; }
  int x_index(int machine, int slot) const { return kStatesPerMachine * machine + slot; }
  int id_index(int machine) const { return 2 * machine; }
  int iq_index(int machine) const { return 2 * machine + 1; }
  int theta_index(int bus) const { return 2 * machines + bus; }
  int vm_index(int bus) const { return 2 * machines + buses + bus; }
};

// P and Q drawn by the network at every bus.
template <class T>
void network_injections(const ComplexMatrix& ybus, const std::vector<T>& vm, const std::vector<T>& va,
                        std::vector<T>& p, std::vector<T>& q) {
  const auto n = static_cast<int>(vm.size());
  p.assign(n, T(0.0));
  q.assign(n, T(0.0));
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const auto yik = ybus(i, k);
      if (yik == std::complex<double>(0.0, 0.0)) continue;
      const T dth = va[i] - va[k];
      const T c = cos(dth);
      const T s = sin(dth);
      const T vv = vm[i] * vm[k];
      p[i] += vv * (yik.real() * c + yik.imag() * s);
      q[i] += vv * (yik.real() * s - yik.imag() * c);
    }
  }
}

struct DaeParameters {
  const NetworkModel* net = nullptr;
  const ComplexMatrix* ybus = nullptr;
  const std::vector<Load>* loads = nullptr;
  const double* tm = nullptr;    // per machine
  const double* vref = nullptr;  // per machine
};

// f(x, y) and g(x, y) of the two-axis machine / IEEE Type-I exciter / constant-power load model.
template <class T>
void dae_residual(const DaeParameters& prm, const std::vector<T>& x, const std::vector<T>& y,
                  std::vector<T>& f, std::vector<T>& g) {
  const NetworkModel& net = *prm.net;
  const DaeLayout lay{static_cast<int>(net.machines.size()), static_cast<int>(net.buses.size())};
  const double ws = net.omega_s();

  f.assign(lay.nx(), T(0.0));
  g.assign(lay.ny(), T(0.0));

  std::vector<T> vm(lay.buses), va(lay.buses);
  for (int b = 0; b < lay.buses; ++b) {
    va[b] = y[lay.theta_index(b)];
    vm[b] = y[lay.vm_index(b)];
  }

  std::vector<T> pnet, qnet;
  network_injections(*prm.ybus, vm, va, pnet, qnet);

  // Network balance: machine injection - load - network draw.
  const int p_row0 = 2 * lay.machines;
  const int q_row0 = 2 * lay.machines + lay.buses;
  for (int b = 0; b < lay.buses; ++b) {
    g[p_row0 + b] = -pnet[b];
    g[q_row0 + b] = -qnet[b];
  }
  for (const auto& load : *prm.loads) {
    const int b = net.bus_index(load.bus);
    g[p_row0 + b] -= T(load.p);
    g[q_row0 + b] -= T(load.q);
  }

  for (int m = 0; m < lay.machines; ++m) {
    const Machine& mc = net.machines[m];
    const Exciter& ex = mc.exciter;
    const int b = net.bus_index(mc.bus);

    const T& delta = x[lay.x_index(m, kDelta)];
    const T& omega = x[lay.x_index(m, kOmega)];
    const T& eqp = x[lay.x_index(m, kEqp)];
    const T& edp = x[lay.x_index(m, kEdp)];
    const T& efd = x[lay.x_index(m, kEfd)];
    const T& rf = x[lay.x_index(m, kRf)];
    const T& vr = x[lay.x_index(m, kVr)];
    const T& id = y[lay.id_index(m)];
    const T& iq = y[lay.iq_index(m)];
    const T& v = vm[b];
    const T ang = delta - va[b];
    const T sn = sin(ang);
    const T cs = cos(ang);

    const T te = edp * id + eqp * iq + T(mc.xq_p - mc.xd_p) * id * iq;
    const T sat = T(ex.sat_a) * exp(T(ex.sat_b) * efd);

    f[lay.x_index(m, kDelta)] = T(ws) * (omega - T(1.0));
    f[lay.x_index(m, kOmega)] = (T(prm.tm[m]) - te - T(mc.d) * (omega - T(1.0))) / T(2.0 * mc.h);
    f[lay.x_index(m, kEqp)] = (-eqp - T(mc.xd - mc.xd_p) * id + efd) / T(mc.td0_p);
    f[lay.x_index(m, kEdp)] = (-edp + T(mc.xq - mc.xq_p) * iq) / T(mc.tq0_p);
    f[lay.x_index(m, kEfd)] = (-(T(ex.ke) + sat) * efd + vr) / T(ex.te);
    f[lay.x_index(m, kRf)] = (-rf + T(ex.kf / ex.tf) * efd) / T(ex.tf);
    f[lay.x_index(m, kVr)] =
        (-vr + T(ex.ka) * rf - T(ex.ka * ex.kf / ex.tf) * efd + T(ex.ka) * (T(prm.vref[m]) - v)) / T(ex.ta);

    g[lay.id_index(m)] = edp - v * sn - T(mc.rs) * id + T(mc.xq_p) * iq;
    g[lay.iq_index(m)] = eqp - v * cs - T(mc.rs) * iq - T(mc.xd_p) * id;

    g[p_row0 + b] += id * v * sn + iq * v * cs;
    g[q_row0 + b] += id * v * cs - iq * v * sn;
  }
}

}  // namespace prs::detail
