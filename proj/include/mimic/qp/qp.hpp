#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <limits>
#include <stdexcept>

namespace mimic::qp {

// Convex quadratic program
//   min 1/2 x'Hx + g'x
//   s.t. A_eq x = b_eq,  lower <= A_in x <= upper
// H must be symmetric positive semidefinite; use +/- infinity for absent
// bounds. Box constraints on x are expressed as identity rows of A_in.
struct QuadraticProgram {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_in;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int n() const { return static_cast<int>(g.size()); }
  void validate() const;  // throws QpError on inconsistent dimensions
};

enum class QpStatus { optimal, max_iter, infeasible };

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd dual_eq;     // multipliers of A_eq x = b_eq (free sign)
  Eigen::VectorXd dual_lower;  // multipliers of lower <= A_in x, >= 0
  Eigen::VectorXd dual_upper;  // multipliers of A_in x <= upper, >= 0
  QpStatus status{QpStatus::max_iter};
  int iterations{0};
  double kkt_residual{std::numeric_limits<double>::infinity()};

  double objective(const QuadraticProgram& p) const {
    return 0.5 * x.dot(p.H * x) + p.g.dot(x);
  }
};

struct QpError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dual active-set solve (Goldfarb-Idnani): starts from the unconstrained
// minimum and adds violated constraints one at a time, so every intermediate
// iterate is dual feasible and infeasibility shows up as an unbounded dual
// step. Deterministic: ties are broken by lowest constraint index. A warm
// start seeds the active set from the previous solution's positive duals.
// Throws QpError when H has an eigenvalue below -1e-8; eigenvalues in
// (-1e-8, ~0] are repaired by adding 1e-9 * I.
QpSolution solve_qp(const QuadraticProgram& problem, const QpSolution* warm_start = nullptr,
                    double tolerance = 1e-8);

// Round-trip text dump of a QP for offline reproduction.
void dump_qp(const QuadraticProgram& problem, std::ostream& out);
QuadraticProgram load_qp(std::istream& in);

}  // namespace mimic::qp
