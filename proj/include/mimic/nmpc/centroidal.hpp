#pragma once

#include <array>

#include <Eigen/Dense>

#include "mimic/rbd/kinematics.hpp"

namespace mimic::nmpc {

// Reduced-order model used by the predictive controller.
//   state x = [h (6, mass-normalized momentum), r_B (3), theta_B (3), q_j]
//   input u = [f_1 (3, N), tau_1 (3, N*m), f_2, tau_2, qdot_j]
// Contact wrenches act at the foot sole frames; the base twist is recovered
// from the momentum equation h_raw = A(q) * nu given the joint rates.
inline int state_dim(const rbd::RobotModel& model) { return 12 + model.n_j(); }
inline int input_dim(const rbd::RobotModel& model) { return 12 + model.n_j(); }

Eigen::VectorXd centroidal_dynamics(const rbd::RobotModel& model, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& u, const std::array<bool, 2>& contact);

// Jacobians of centroidal_dynamics at (x, u). Wrench blocks and momentum rows
// are analytic; base-rate sensitivities to orientation and joint angles are
// central finite differences (step 1e-6).
void linearize_dynamics(const rbd::RobotModel& model, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u, const std::array<bool, 2>& contact,
                        Eigen::MatrixXd& a, Eigen::MatrixXd& b);

// One explicit 4-stage Runge-Kutta step with the input held constant.
Eigen::VectorXd integrate_rk4(const rbd::RobotModel& model, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u, const std::array<bool, 2>& contact,
                              double dt);

// Dynamics Jacobians plus the sole-velocity rows used as stance/swing
// constraints, computed in one shared kinematic sweep. sole_velocity stacks
// [left; right] world-frame linear velocities.
struct StageLinearization {
  Eigen::MatrixXd a, b;  // continuous-time dynamics Jacobians
  Eigen::Matrix<double, 6, 1> sole_velocity;
  Eigen::MatrixXd sole_velocity_x;  // 6 x state_dim
  Eigen::MatrixXd sole_velocity_u;  // 6 x input_dim
};
StageLinearization linearize_stage(const rbd::RobotModel& model, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& u, const std::array<bool, 2>& contact);

// Discrete-time Jacobians consistent with integrate_rk4 for frozen continuous
// Jacobians (exact for linear time-invariant dynamics): the RK4 polynomial
// I + Z + Z^2/2 + Z^3/6 + Z^4/24 with Z = dt * A.
void discretize_rk4(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double dt,
                    Eigen::MatrixXd& ad, Eigen::MatrixXd& bd);

// World-frame linear velocity of a foot sole implied by (x, u); nu_out
// optionally receives the full generalized velocity.
Eigen::Vector3d foot_velocity(const rbd::RobotModel& model, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u, int foot,
                              Eigen::VectorXd* nu_out = nullptr);

}  // namespace mimic::nmpc
