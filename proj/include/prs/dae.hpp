#pragma once

#include <Eigen/Dense>

#include "prs/network.hpp"
#include "prs/powerflow.hpp"

namespace prs {

/// Partial derivatives of the DAE x' = f(x, y), 0 = g(x, y) at an equilibrium.
struct DaeJacobians {
  Eigen::MatrixXd a;  // df/dx
  Eigen::MatrixXd b;  // df/dy
  Eigen::MatrixXd c;  // dg/dx
  Eigen::MatrixXd d;  // dg/dy
};

struct DaeResidual {
  Eigen::VectorXd f;
  Eigen::VectorXd g;
};

/// Evaluates f and g at arbitrary (x, y) with the equilibrium's parameters
/// (loads, mechanical torque, exciter reference).
DaeResidual dae_residual(const NetworkModel& net, const EquilibriumPoint& eq, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y);

/// Exact Jacobian blocks by forward-mode automatic differentiation.
DaeJacobians linearize(const NetworkModel& net, const EquilibriumPoint& eq);

/// J_r = A - B D^{-1} C through an LU factorization of D. Throws
/// Error(singular) when D is singular or its condition estimate exceeds 1e12.
Eigen::MatrixXd reduce_jacobian(const DaeJacobians& jacs);

/// Removes the zero eigenvalue every network with absolute rotor angles has
/// (shifting all angles together is an equilibrium direction). Angles of
/// machines 2..n are re-expressed relative to machine 1 and the first
/// machine's angle state is dropped, giving an (n_x - 1)-square matrix whose
/// spectrum is that of J_r minus the structural zero.
Eigen::MatrixXd remove_angle_reference(const Eigen::MatrixXd& jr, int machines);

/// Diagonal similarity scaling (Parlett-Reinsch) that equalizes row and
/// column norms; returns the balanced matrix.
Eigen::MatrixXd balance(const Eigen::MatrixXd& m);

/// max_i Re(lambda_i(M)) from a dense nonsymmetric eigensolve after balancing.
double critical_eigenvalue(const Eigen::MatrixXd& m);

/// Everything the stability oracle computes for one operating target.
struct OracleTrace {
  EquilibriumPoint equilibrium;
  Eigen::MatrixXd reduced;     // J_r, n_x square
  Eigen::MatrixXd referenced;  // J_r without the rotational mode
  double lambda_c = 0.0;
};

OracleTrace trace_lambda_c(const NetworkModel& net, const OperatingTarget& z);

/// The critical-eigenvalue oracle: sample -> equilibrium -> linearization ->
/// reduced Jacobian -> max real part (rotational mode excluded). Pure and
/// deterministic; safe to call concurrently on a shared network.
double eval_lambda_c(const NetworkModel& net, const OperatingTarget& z);

}  // namespace prs
