#pragma once

#include "mimic/nmpc/lqr.hpp"
#include "mimic/nmpc/ocp.hpp"

namespace mimic::nmpc {

enum class SolveStatus { iterating, converged, relaxed };

struct OcpSolution {
  std::vector<Eigen::VectorXd> x;  // nodes + 1
  std::vector<Eigen::VectorXd> u;  // nodes
  // Max norm over the horizon of [dynamics defect; contact equality residual;
  // last step], evaluated at the returned iterate.
  double kkt_residual{std::numeric_limits<double>::infinity()};
  double solve_ms{0.0};
  SolveStatus status{SolveStatus::iterating};
};

// Warm-start trajectory equal to the tracked reference.
OcpSolution seed_from_reference(const rbd::RobotModel& model, const OcpDefinition& ocp);

// One real-time iteration: linearize around the warm trajectory, solve the
// constrained linear-quadratic subproblem by a Riccati sweep, take the full
// step. Swing-foot wrenches are eliminated (exactly zero in the output) and
// joint positions are clamped to their limits after the step.
OcpSolution sqp_rti_step(const rbd::RobotModel& model, const OcpDefinition& ocp,
                         const OcpSolution& warm);

// Sample the solution at `time` seconds past the solve instant by linear
// interpolation between nodes; out-of-horizon queries clamp and flag stale.
struct PolicySample {
  Eigen::VectorXd x;
  Eigen::VectorXd u;
  bool stale{false};
};
PolicySample mpc_policy(const OcpSolution& solution, double node_spacing, double time);

}  // namespace mimic::nmpc
