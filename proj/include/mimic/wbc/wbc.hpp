#pragma once

#include <array>

#include <Eigen/Dense>

#include "mimic/qp/qp.hpp"
#include "mimic/rbd/model.hpp"

namespace mimic::wbc {

// Instantaneous torque controller: one quadratic program over
// [generalized accelerations, stance contact wrenches, joint torques].
// Hard constraints carry the physics (full rigid-body dynamics, stance feet
// pinned, wrench cone, torque limits); tracking objectives are weighted costs.
struct WbcParams {
  double w_momentum = 10.0;    // centroidal momentum-rate tracking
  double w_swing = 50.0;       // swing-foot linear acceleration tracking
  double w_joint_acc = 1.0;    // posture (non-stance-chain joints)
  double w_wrench = 1e-4;      // contact wrench regularization toward the plan
  double reg = 1e-6;           // Tikhonov floor on accelerations and torques

  // Feedback gains mapping tracking errors to commanded rates.
  double kp_joint = 100.0;
  double kd_joint = 20.0;
  double kp_swing = 100.0;
  double kd_swing = 20.0;
  double kp_momentum = 10.0;   // momentum error -> momentum-rate command
  double kp_base_pos = 20.0;   // base position error -> linear momentum rate
  double kp_base_rpy = 10.0;   // base orientation error -> angular momentum rate

  double friction = 0.7;       // inner-pyramid coefficient (applied as mu/sqrt(2))
};

struct WbcProblem {
  qp::QuadraticProgram qp;
  std::array<bool, 2> contact{{false, false}};
  int n_contacts = 0;
  int n_j = 0;
  bool valid = false;  // false when no foot is in stance
  // Decision layout: [nudot (6+n_j), F (6 per stance foot, stacked in foot
  // order), tau (n_j)].
  int wrench_offset() const { return 6 + n_j; }
  int torque_offset() const { return 6 + n_j + 6 * n_contacts; }
};

struct TorqueCommand {
  Eigen::VectorXd tau;               // n_j joint torques, N*m
  Eigen::VectorXd contact_wrenches;  // 6 per stance foot, [force; torque], world frame
  Eigen::VectorXd nudot;             // accepted generalized accelerations
  bool ok = false;
  double solve_ms = 0.0;
};

// Builds the tick QP from the measured state (configuration + generalized
// velocity) and the planner's desired state/input sample. Contact flags must
// match the plan at this instant. x_des/u_des use the reduced-model layout
// ([h; r_B; theta_B; q_j] and [f_1; tau_1; f_2; tau_2; qdot_j]).
WbcProblem build_wbc_qp(const rbd::RobotModel& model, const rbd::JointConfiguration& q,
                        const Eigen::VectorXd& nu, const Eigen::VectorXd& x_des,
                        const Eigen::VectorXd& u_des, const std::array<bool, 2>& contact,
                        const WbcParams& params = {});

// Solves the tick QP. On failure (invalid problem or infeasible QP) returns
// the previous command, if given, with ok = false.
TorqueCommand solve_wbc(const rbd::RobotModel& model, const WbcProblem& problem,
                        const TorqueCommand* previous = nullptr);

}  // namespace mimic::wbc
