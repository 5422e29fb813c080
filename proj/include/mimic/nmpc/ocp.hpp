#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "mimic/nmpc/centroidal.hpp"
#include "mimic/retarget/motion.hpp"

namespace mimic::nmpc {

struct OcpParams {
  int nodes{20};
  double horizon{1.0};  // s
  // Tracking weights (diagonal), per state/input block.
  double w_momentum_lin{100.0};
  double w_momentum_ang{50.0};
  double w_base_pos{200.0};
  double w_base_rpy{100.0};
  double w_joint_pos{10.0};
  double w_wrench{1e-3};
  double w_joint_rate{1.0};
  // Contact wrench admissibility.
  double friction{0.7};
  double cone_margin{0.5};  // N, pyramid pulled strictly inside the cone
  double swing_apex{0.08};  // m, peak sole height of the swing profile

  double dt() const { return horizon / nodes; }
};

// Discretized tracking problem over one receding horizon.
struct OcpDefinition {
  OcpParams params;
  Eigen::VectorXd x0;
  std::vector<Eigen::VectorXd> x_ref;              // nodes + 1
  std::vector<Eigen::VectorXd> u_ref;              // nodes
  std::vector<std::array<bool, 2>> contact;        // per interval
  std::vector<std::array<double, 2>> swing_rate;   // target vertical sole velocity
  bool truncated{false};  // reference ended inside the horizon; tail holds the last frame
};

OcpDefinition build_ocp(const rbd::RobotModel& model, const retarget::ReferenceTrajectory& ref,
                        const Eigen::VectorXd& x0, double start_time, const OcpParams& params = {});

// Diagonals of the quadratic tracking cost.
Eigen::VectorXd state_weights(const rbd::RobotModel& model, const OcpParams& params);
Eigen::VectorXd input_weights(const rbd::RobotModel& model, const OcpParams& params);

// Vertical sole velocity of the smooth up-then-down swing profile at phase
// s in [0, 1] of a swing lasting `duration` seconds.
double swing_vertical_rate(double phase, double duration, double apex);

// Contact wrench admissibility margins, positive when satisfied:
// friction cone (with margin), center-of-pressure box, and the yaw torque
// window that a rectangular patch of half-extents (x, y) can transmit.
double friction_cone_margin(const Eigen::Vector3d& force, double mu, double margin);
double yaw_torque_lower(const Eigen::Vector3d& force, const Eigen::Vector3d& torque, double x,
                        double y, double mu);
double yaw_torque_upper(const Eigen::Vector3d& force, const Eigen::Vector3d& torque, double x,
                        double y, double mu);

// Residuals of all path constraints at one node. equality: stacked per foot,
// stance = sole velocity (3), swing = [vertical rate error (1); wrench (6)].
// inequality (>= 0 feasible): per stance foot [cone; cop_x; cop_y; tau_z low;
// tau_z high], then joint rate bounds (2 * n_j).
struct ConstraintValues {
  Eigen::VectorXd equality;
  Eigen::VectorXd inequality;
};
ConstraintValues evaluate_constraints(const rbd::RobotModel& model, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& u, const std::array<bool, 2>& contact,
                                      const std::array<double, 2>& swing_rate,
                                      const OcpParams& params);

}  // namespace mimic::nmpc
