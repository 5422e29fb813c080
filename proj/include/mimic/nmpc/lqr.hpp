#pragma once

#include <vector>

#include <Eigen/Dense>

namespace mimic::nmpc {

// One stage of a time-varying linear-quadratic subproblem in deviation
// variables dx, du:
//   dx_{k+1} = a dx + b du + d
//   cost      0.5 dx'Qxx dx + qx'dx + 0.5 du'Ruu du + ru'du
//   equality  cx dx + cu du + c0 = 0     (0 rows allowed)
//   bounds    g du <= h                  (inputs only; 0 rows allowed)
struct LqrStage {
  Eigen::MatrixXd a, b;
  Eigen::VectorXd d;
  Eigen::MatrixXd qxx;
  Eigen::VectorXd qx;
  Eigen::MatrixXd ruu;
  Eigen::VectorXd ru;
  Eigen::MatrixXd cx, cu;
  Eigen::VectorXd c0;
  Eigen::MatrixXd g;
  Eigen::VectorXd h;
};

struct LqrSolution {
  std::vector<Eigen::VectorXd> dx;  // stages + 1
  std::vector<Eigen::VectorXd> du;  // stages
  // True when a stage equality was rank-deficient in du and solved in the
  // least-squares sense instead of exactly.
  bool relaxed{false};
};

// Riccati backward sweep with per-stage elimination of the equality rows,
// then a forward rollout. Stages whose linear feedback violates the input
// bounds solve a small dense QP on the stage Q-function instead, so the
// result stays feasible (and optimal stage-by-stage, though bound activity
// is not propagated backwards).
LqrSolution solve_lqr(const std::vector<LqrStage>& stages, const Eigen::MatrixXd& qn,
                      const Eigen::VectorXd& qn_vec, const Eigen::VectorXd& dx0);

}  // namespace mimic::nmpc
