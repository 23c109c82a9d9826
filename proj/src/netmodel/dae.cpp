#include "prs/dae.hpp"

#include <cmath>
#include <vector>

#include "equations.hpp"
#include "prs/error.hpp"

namespace prs {

using detail::DaeLayout;
using detail::Dual;

namespace {

detail::DaeParameters parameters(const NetworkModel& net, const ComplexMatrix& ybus, const EquilibriumPoint& eq) {
  detail::DaeParameters prm;
  prm.net = &net;
  prm.ybus = &ybus;
  prm.loads = &eq.loads;
  prm.tm = eq.tm.data();
  prm.vref = eq.vref.data();
  return prm;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

DaeResidual dae_residual(const NetworkModel& net, const EquilibriumPoint& eq, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y) {
  const ComplexMatrix ybus = net.admittance();
  std::vector<double> f, g;
  detail::dae_residual(parameters(net, ybus, eq), to_std(x), to_std(y), f, g);
  DaeResidual out;
  out.f = Eigen::Map<Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
  out.g = Eigen::Map<Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
  return out;
}

DaeJacobians linearize(const NetworkModel& net, const EquilibriumPoint& eq) {
  const ComplexMatrix ybus = net.admittance();
  const auto prm = parameters(net, ybus, eq);
  const auto nx = static_cast<int>(eq.x.size());
  const auto ny = static_cast<int>(eq.y.size());

  std::vector<Dual> x(nx), y(ny), f, g;
  for (int i = 0; i < nx; ++i) x[i] = Dual(eq.x[i]);
  for (int i = 0; i < ny; ++i) y[i] = Dual(eq.y[i]);

  DaeJacobians j;
  j.a.resize(nx, nx);
  j.b.resize(nx, ny);
  j.c.resize(ny, nx);
  j.d.resize(ny, ny);

  for (int col = 0; col < nx + ny; ++col) {
    Dual& seed = col < nx ? x[col] : y[col - nx];
    seed.d = 1.0;
    detail::dae_residual(prm, x, y, f, g);
    seed.d = 0.0;
    for (int r = 0; r < nx; ++r) (col < nx ? j.a(r, col) : j.b(r, col - nx)) = f[r].d;
    for (int r = 0; r < ny; ++r) (col < nx ? j.c(r, col) : j.d(r, col - nx)) = g[r].d;
  }
  return j;
}

Eigen::MatrixXd reduce_jacobian(const DaeJacobians& jacs) {
  if (jacs.d.rows() != jacs.d.cols() || jacs.a.rows() != jacs.a.cols() || jacs.b.rows() != jacs.a.rows() ||
      jacs.b.cols() != jacs.d.rows() || jacs.c.rows() != jacs.d.rows() || jacs.c.cols() != jacs.a.cols())
    throw Error(Errc::invalid_argument, "inconsistent Jacobian block dimensions");
  if (jacs.d.size() == 0) return jacs.a;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(jacs.d);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-12))
    throw Error(Errc::singular, "algebraic singularity at operating point (rcond " + std::to_string(rcond) + ")");
  return jacs.a - jacs.b * lu.solve(jacs.c);
}

Eigen::MatrixXd remove_angle_reference(const Eigen::MatrixXd& jr, int machines) {
  const DaeLayout lay{machines, 0};
  if (machines < 1 || jr.rows() != lay.nx() || jr.cols() != lay.nx())
    throw Error(Errc::invalid_argument, "reduced Jacobian does not match the machine count");
  const int ref = lay.x_index(0, detail::kDelta);

  // Row transform: delta_i <- delta_i - delta_ref for the other machines.
  Eigen::MatrixXd t = jr;
  for (int m = 1; m < machines; ++m) t.row(lay.x_index(m, detail::kDelta)) -= jr.row(ref);

  const int n = lay.nx() - 1;
  Eigen::MatrixXd out(n, n);
  for (int r = 0, ro = 0; r <= n; ++r) {
    if (r == ref) continue;
    for (int c = 0, co = 0; c <= n; ++c) {
      if (c == ref) continue;
      out(ro, co++) = t(r, c);
    }
    ++ro;
  }
  return out;
}

Eigen::MatrixXd balance(const Eigen::MatrixXd& m) {
  constexpr double kRadix = 2.0;
  constexpr double kRadix2 = kRadix * kRadix;
  Eigen::MatrixXd a = m;
  const Eigen::Index n = a.rows();
  bool done = false;
  while (!done) {
    done = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = 0.0, r = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      const double s = c + r;
      double f = 1.0;
      double g = r / kRadix;
      while (c < g) {
        f *= kRadix;
        c *= kRadix2;
      }
      g = r * kRadix;
      while (c >= g) {
        f /= kRadix;
        c /= kRadix2;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        a.row(i) /= f;
        a.col(i) *= f;
      }
    }
  }
  return a;
}

double critical_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.size() == 0)
    throw Error(Errc::invalid_argument, "critical eigenvalue needs a non-empty square matrix");
  if (!m.allFinite()) throw Error(Errc::invalid_argument, "matrix has non-finite entries");
  Eigen::EigenSolver<Eigen::MatrixXd> es(balance(m), false);
  if (es.info() != Eigen::Success) throw Error(Errc::eigensolve, "eigensolve failed");
  const double out = es.eigenvalues().real().maxCoeff();
  if (!std::isfinite(out)) throw Error(Errc::eigensolve, "eigensolve failed (non-finite eigenvalue)");
  return out;
}

OracleTrace trace_lambda_c(const NetworkModel& net, const OperatingTarget& z) {
  constexpr double kRailLow = 0.5, kRailHigh = 1.5;
  constexpr double kResidualTolerance = 1e-8;
  try {
    for (const auto& e : z.entries())
      if (e.quantity.kind == QuantityKind::vm && (e.value < kRailLow || e.value > kRailHigh))
        throw Error(Errc::infeasible, "voltage " + e.quantity.name() + " outside the [0.5, 1.5] pu sanity rail");

    OracleTrace t;
    t.equilibrium = map_sample_to_equilibrium(net, z);
    if (!(t.equilibrium.mismatch < kResidualTolerance))
      throw Error(Errc::diverged, "power-flow residual above tolerance");
    const auto res = dae_residual(net, t.equilibrium, t.equilibrium.x, t.equilibrium.y);
    if (!(res.f.cwiseAbs().maxCoeff() < kResidualTolerance) || !(res.g.cwiseAbs().maxCoeff() < kResidualTolerance))
      throw Error(Errc::diverged, "machine-state initialization residual above tolerance");

    t.reduced = reduce_jacobian(linearize(net, t.equilibrium));
    t.referenced = remove_angle_reference(t.reduced, static_cast<int>(net.machines.size()));
    t.lambda_c = critical_eigenvalue(t.referenced);
    return t;
  } catch (const Error& e) {
    throw Error(e.code(), std::string(e.what()) + " at " + z.describe());
  }
}

double eval_lambda_c(const NetworkModel& net, const OperatingTarget& z) { return trace_lambda_c(net, z).lambda_c; }

}  // namespace prs
