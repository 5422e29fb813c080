#pragma once

#include <Eigen/Dense>

#include "mimic/rbd/kinematics.hpp"
#include "mimic/rbd/model.hpp"

namespace mimic::rbd {

// Inverse dynamics (Newton-Euler): generalized forces tau_gen with
// M(q) nudot + b(q, nu) = tau_gen. Rows follow the nu convention
// [base force; base moment about the base origin; joint torques].
Eigen::VectorXd inverse_dynamics(const RobotModel& model, const JointConfiguration& config,
                                 const Eigen::VectorXd& nu, const Eigen::VectorXd& nudot,
                                 bool with_gravity = true);

struct JointSpaceDynamics {
  Eigen::MatrixXd mass_matrix;  // (6+n_j) x (6+n_j), symmetric positive definite
  Eigen::VectorXd bias;         // Coriolis + gravity
};

JointSpaceDynamics joint_space_dynamics(const RobotModel& model, const JointConfiguration& config,
                                        const Eigen::VectorXd& nu);

double kinetic_energy(const RobotModel& model, const JointConfiguration& config,
                      const Eigen::VectorXd& nu);
double potential_energy(const RobotModel& model, const JointConfiguration& config);

}  // namespace mimic::rbd
