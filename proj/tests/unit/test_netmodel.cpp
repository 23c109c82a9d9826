#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "common.hpp"
#include "doctest.h"
#include "prs/dae.hpp"
#include "prs/error.hpp"
#include "prs/io.hpp"

using namespace prs;

namespace {

std::string replace_once(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected prs::Error");
  return Errc::io;
}

// Central differences of the DAE residual around the equilibrium.
DaeJacobians finite_difference(const NetworkModel& net, const EquilibriumPoint& eq) {
  const Eigen::Index nx = eq.x.size(), ny = eq.y.size();
  DaeJacobians j;
  j.a.resize(nx, nx);
  j.b.resize(nx, ny);
  j.c.resize(ny, nx);
  j.d.resize(ny, ny);
  for (Eigen::Index col = 0; col < nx + ny; ++col) {
    Eigen::VectorXd xp = eq.x, xm = eq.x, yp = eq.y, ym = eq.y;
    double& vp = col < nx ? xp[col] : yp[col - nx];
    double& vm = col < nx ? xm[col] : ym[col - nx];
    const double h = 1e-6 * std::max(1.0, std::abs(vp));
    vp += h;
    vm -= h;
    const auto rp = dae_residual(net, eq, xp, yp);
    const auto rm = dae_residual(net, eq, xm, ym);
    const Eigen::VectorXd df = (rp.f - rm.f) / (2 * h);
    const Eigen::VectorXd dg = (rp.g - rm.g) / (2 * h);
    if (col < nx) {
      j.a.col(col) = df;
      j.c.col(col) = dg;
    } else {
      j.b.col(col - nx) = df;
      j.d.col(col - nx) = dg;
    }
  }
  return j;
}

double block_error(const Eigen::MatrixXd& exact, const Eigen::MatrixXd& approx) {
  return (exact - approx).cwiseAbs().maxCoeff() / std::max(1.0, exact.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("network parse rejects two slack buses") {
  const std::string text = read_text_file(data_path("wscc9_standard.net"));
  const auto bad = replace_once(text, "bus id=2 type=pv", "bus id=2 type=slack");
  CHECK(code_of([&] { parse_network(bad); }) == Errc::invalid_model);
}

TEST_CASE("network parse names the machine with zero inertia") {
  const std::string text = read_text_file(data_path("wscc9_standard.net"));
  const auto bad = replace_once(text, "H=6.4", "H=0");
  try {
    parse_network(bad);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_model);
    CHECK(std::string(e.what()).find("machine 2") != std::string::npos);
  }
}

TEST_CASE("network format round trip") {
  const auto& net = standard_net();
  const auto again = parse_network(format_network(net));
  CHECK(format_network(again) == format_network(net));
  CHECK(again.machines.size() == 3);
  CHECK(again.buses.size() == 9);
}

TEST_CASE("flat start with no load and no charging stays flat") {
  NetworkModel net = standard_net();
  for (auto& l : net.loads) l.p = l.q = 0.0;
  for (auto& b : net.branches) b.b = 0.0;
  for (auto& m : net.machines) m.p_set = 0.0;
  for (auto& b : net.buses) b.v_set = 1.0;
  const auto eq = solve_power_flow(net, {});
  CHECK(eq.va.cwiseAbs().maxCoeff() < 1e-12);
  CHECK((eq.vm.array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(eq.pg.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(eq.qg.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("calibrated base point power flow") {
  const auto eq = map_sample_to_equilibrium(calibrated_net(), base_target());
  CHECK(std::abs(eq.pg[0] - 1.515) < 1e-3);
  CHECK(std::abs(eq.qg[0] - 1.421) < 1e-3);
  CHECK(std::abs(eq.qg[1] - 1.119) < 1e-3);
  CHECK(std::abs(eq.qg[2] - 0.590) < 1e-3);
  CHECK(eq.mismatch < 1e-8);
}

TEST_CASE("absurd dispatch does not converge") {
  const Errc c = code_of([] { solve_power_flow(calibrated_net(), {{"Pg2", 50.0}}); });
  CHECK((c == Errc::diverged || c == Errc::singular));
}

TEST_CASE("derived names are rejected by the plain power flow") {
  CHECK(code_of([] { solve_power_flow(calibrated_net(), {{"Qg1", 1.0}}); }) == Errc::invalid_argument);
  CHECK(code_of([] { Quantity::parse("Xg1"); }) == Errc::invalid_argument);
}

TEST_CASE("calibration at the network's own operating point keeps the loads") {
  const auto& net = standard_net();
  const auto eq = solve_power_flow(net, {});
  OperatingTarget base{{"Pg1", eq.pg[0]}, {"Qg1", eq.qg[0]}, {"Qg2", eq.qg[1]}, {"Qg3", eq.qg[2]}};
  const auto cal = calibrate_base_loads(net, base);
  for (double f : load_scale_factors(net, cal)) CHECK(std::abs(f - 1.0) < 1e-6);
}

TEST_CASE("calibration fails for an unreachable reactive target") {
  const auto& net = standard_net();
  const auto eq = solve_power_flow(net, {});
  OperatingTarget base{{"Pg1", eq.pg[0]}, {"Qg1", eq.qg[0] + 5.0}, {"Qg2", eq.qg[1]}, {"Qg3", eq.qg[2]}};
  CHECK(code_of([&] { calibrate_base_loads(net, base); }) == Errc::infeasible);
}

TEST_CASE("mapping with direct names only equals the plain power flow") {
  const auto a = map_sample_to_equilibrium(calibrated_net(), base_target());
  const auto b = solve_power_flow(calibrated_net(), base_target());
  CHECK((a.vm - b.vm).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((a.va - b.va).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("mapping realizes derived targets") {
  auto z = base_target();
  z.set("Qg1", 1.45);
  const auto eq = map_sample_to_equilibrium(calibrated_net(), z);
  CHECK(std::abs(eq.qg[0] - 1.45) < 1e-6);

  OperatingTarget all{{"Pg1", 1.55}, {"Pg2", 2.9}, {"Pg3", 1.5},  {"Qg1", 1.4},  {"Qg2", 1.1},
                      {"Qg3", 0.6},  {"Vm1", 1.04}, {"Vm2", 1.03}, {"Vm3", 1.02}};
  const auto eq9 = map_sample_to_equilibrium(calibrated_net(), all);
  CHECK(std::abs(eq9.pg[0] - 1.55) < 1e-6);
  CHECK(std::abs(eq9.qg[0] - 1.4) < 1e-6);
  CHECK(std::abs(eq9.qg[1] - 1.1) < 1e-6);
  CHECK(std::abs(eq9.qg[2] - 0.6) < 1e-6);
  CHECK(std::abs(eq9.vm[1] - 1.03) < 1e-12);
}

TEST_CASE("mapping with too many derived names is overdetermined") {
  NetworkModel net = calibrated_net();
  net.loads.resize(1);
  OperatingTarget z{{"Pg1", 1.5}, {"Qg1", 1.4}, {"Qg2", 1.1}, {"Qg3", 0.6}, {"Vm1", 1.04}, {"Vm2", 1.03}, {"Vm3", 1.02}};
  CHECK(code_of([&] { map_sample_to_equilibrium(net, z); }) == Errc::overdetermined);
}

TEST_CASE("machine initialization satisfies the DAE") {
  const auto eq = map_sample_to_equilibrium(calibrated_net(), base_target());
  const auto r = dae_residual(calibrated_net(), eq, eq.x, eq.y);
  CHECK(r.f.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(r.g.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(eq.x.size() == 21);
  CHECK(eq.y.size() == 24);
}

TEST_CASE("automatic Jacobians agree with finite differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dp(-0.15, 0.15), dv(-0.02, 0.02);
  for (int k = 0; k < 10; ++k) {
    OperatingTarget z{{"Pg2", 2.922 + dp(rng)}, {"Pg3", 1.523 + dp(rng)}, {"Vm1", 1.04 + dv(rng)},
                      {"Vm2", 1.025 + dv(rng)}, {"Vm3", 1.025 + dv(rng)}};
    const auto eq = solve_power_flow(calibrated_net(), z);
    const auto ad = linearize(calibrated_net(), eq);
    const auto fd = finite_difference(calibrated_net(), eq);
    CAPTURE(k);
    CHECK(block_error(ad.a, fd.a) < 1e-5);
    CHECK(block_error(ad.b, fd.b) < 1e-5);
    CHECK(block_error(ad.c, fd.c) < 1e-5);
    CHECK(block_error(ad.d, fd.d) < 1e-5);
  }
}

TEST_CASE("rotor angle rows hold only zero and the synchronous speed") {
  const auto& net = calibrated_net();
  const auto eq = map_sample_to_equilibrium(net, base_target());
  const auto j = linearize(net, eq);
  for (int m = 0; m < 3; ++m) {
    const int row = 7 * m;
    for (Eigen::Index c = 0; c < j.a.cols(); ++c) {
      const double v = j.a(row, c);
      CHECK((v == 0.0 || v == net.omega_s()));
    }
    CHECK(j.a(row, row + 1) == net.omega_s());
    CHECK(j.b.row(row).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("linearization is invariant under a common angle shift") {
  const auto& net = calibrated_net();
  const auto eq = map_sample_to_equilibrium(net, base_target());
  EquilibriumPoint shifted = eq;
  const double c = 0.37;
  for (int m = 0; m < 3; ++m) shifted.x[7 * m] += c;
  for (int b = 0; b < 9; ++b) shifted.y[6 + b] += c;
  const auto r = dae_residual(net, shifted, shifted.x, shifted.y);
  CHECK(r.f.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(r.g.cwiseAbs().maxCoeff() < 1e-9);
  const auto j1 = linearize(net, eq);
  const auto j2 = linearize(net, shifted);
  CHECK((j1.a - j2.a).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((j1.b - j2.b).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((j1.c - j2.c).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((j1.d - j2.d).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("reduce_jacobian on a scalar system") {
  DaeJacobians j;
  j.a = Eigen::MatrixXd::Constant(1, 1, 1.0);
  j.b = Eigen::MatrixXd::Constant(1, 1, 2.0);
  j.c = Eigen::MatrixXd::Constant(1, 1, 3.0);
  j.d = Eigen::MatrixXd::Constant(1, 1, 4.0);
  CHECK(reduce_jacobian(j)(0, 0) == doctest::Approx(-0.5));

  j.a = Eigen::Matrix2d{{1, 2}, {3, 4}};
  j.b = Eigen::Matrix2d{{1, 0}, {0, 1}};
  j.c = Eigen::Matrix2d{{2, 0}, {0, 2}};
  j.d = Eigen::Matrix2d{{2, 0}, {0, 4}};
  const Eigen::MatrixXd jr = reduce_jacobian(j);
  CHECK(jr(0, 0) == doctest::Approx(0.0));
  CHECK(jr(0, 1) == doctest::Approx(2.0));
  CHECK(jr(1, 0) == doctest::Approx(3.0));
  CHECK(jr(1, 1) == doctest::Approx(3.5));

  j.d = Eigen::Matrix2d{{1, 1}, {1, 1}};
  CHECK(code_of([&] { reduce_jacobian(j); }) == Errc::singular);
}

TEST_CASE("reduced spectrum equals the finite spectrum of the descriptor pencil") {
  const auto& net = calibrated_net();
  const auto eq = map_sample_to_equilibrium(net, base_target());
  const auto j = linearize(net, eq);
  const Eigen::MatrixXd jr = reduce_jacobian(j);
  const Eigen::Index nx = j.a.rows(), ny = j.d.rows();

  Eigen::MatrixXd m(nx + ny, nx + ny), e = Eigen::MatrixXd::Zero(nx + ny, nx + ny);
  m << j.a, j.b, j.c, j.d;
  e.topLeftCorner(nx, nx).setIdentity();
  Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> ges(m, e);
  REQUIRE(ges.info() == Eigen::Success);
  std::vector<std::complex<double>> pencil;
  for (Eigen::Index i = 0; i < nx + ny; ++i) {
    const std::complex<double> alpha = ges.alphas()[i];
    const double beta = ges.betas()[i];
    if (std::abs(beta) > 1e-9 * std::max(1.0, std::abs(alpha))) pencil.push_back(alpha / beta);
  }
  REQUIRE(pencil.size() == static_cast<std::size_t>(nx));

  Eigen::EigenSolver<Eigen::MatrixXd> es(jr, false);
  std::vector<bool> used(pencil.size(), false);
  for (Eigen::Index i = 0; i < nx; ++i) {
    const std::complex<double> l = es.eigenvalues()[i];
    std::size_t best = 0;
    double dist = INFINITY;
    for (std::size_t k = 0; k < pencil.size(); ++k)
      if (!used[k] && std::abs(pencil[k] - l) < dist) dist = std::abs(pencil[k] - l), best = k;
    used[best] = true;
    CAPTURE(l);
    CHECK(dist < 1e-6 * std::max(1.0, std::abs(l)));
  }
}

TEST_CASE("removing the angle reference drops only the structural zero") {
  const auto tr = trace_lambda_c(calibrated_net(), base_target());
  Eigen::EigenSolver<Eigen::MatrixXd> full(tr.reduced, false), ref(tr.referenced, false);
  CHECK(tr.referenced.rows() == 20);
  std::vector<std::complex<double>> a(full.eigenvalues().begin(), full.eigenvalues().end());
  auto zero = std::min_element(a.begin(), a.end(), [](auto x, auto y) { return std::abs(x) < std::abs(y); });
  CHECK(std::abs(*zero) < 1e-8);
  a.erase(zero);
  for (auto l : ref.eigenvalues()) {
    double best = INFINITY;
    for (auto v : a) best = std::min(best, std::abs(v - l));
    CHECK(best < 1e-7);
  }
}

TEST_CASE("critical eigenvalue of small known matrices") {
  CHECK(critical_eigenvalue(Eigen::Vector3d(-1, -2, 3).asDiagonal().toDenseMatrix()) == doctest::Approx(3.0));
  const Eigen::Matrix2d companion{{0, 1}, {-2, -3}};
  CHECK(std::abs(critical_eigenvalue(companion) + 1.0) < 1e-12);
  const Eigen::Matrix2d rotation{{-0.5, 2.0}, {-2.0, -0.5}};
  CHECK(std::abs(critical_eigenvalue(rotation) + 0.5) < 1e-12);
  CHECK_THROWS_AS(critical_eigenvalue(Eigen::MatrixXd(0, 0)), Error);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
  bad(0, 1) = NAN;
  CHECK_THROWS_AS(critical_eigenvalue(bad), Error);
}

TEST_CASE("balancing is a similarity transform") {
  Eigen::MatrixXd m{{1, 1e6, 0}, {1e-6, 2, 1e4}, {0, 1e-4, -3}};
  const Eigen::MatrixXd b = balance(m);
  CHECK(std::abs(b.trace() - m.trace()) < 1e-9);
  CHECK(std::abs(b.determinant() - m.determinant()) < 1e-6 * std::abs(m.determinant()));
  CHECK(b.cwiseAbs().maxCoeff() < m.cwiseAbs().maxCoeff());
}

TEST_CASE("base point is stable and the oracle is deterministic") {
  const double a = eval_lambda_c(calibrated_net(), base_target());
  const double b = eval_lambda_c(calibrated_net(), base_target());
  CHECK(a < 0.0);
  CHECK(a == b);
}

TEST_CASE("lambda_c varies continuously along a dispatch path") {
  double prev = NAN;
  for (int k = 0; k <= 200; ++k) {
    auto z = base_target();
    z.set("Pg2", 2.6 + 0.002 * k);
    const double l = eval_lambda_c(calibrated_net(), z);
    if (k > 0) CHECK(std::abs(l - prev) < 0.01);
    prev = l;
  }
}

TEST_CASE("voltage targets outside the sanity rail are infeasible") {
  auto z = base_target();
  z.set("Vm3", 1.7);
  CHECK(code_of([&] { eval_lambda_c(calibrated_net(), z); }) == Errc::infeasible);
}
