#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mimic/rbd/model.hpp"

namespace mimic::sim {

// Penalty-contact rigid-body simulator for closed-loop validation. Ground is
// the z = 0 plane; each sole touches it through its four corner points.
struct SimParams {
  double contact_kp = 1e5;   // normal spring, N/m
  double contact_kd = 1e3;   // normal damper, N*s/m
  double contact_kt = 1e3;   // tangential viscous gain, N*s/m
  double friction = 0.7;     // tangential clamp |f_t| <= friction * f_z
};

// Scheduled external force on the base, reported by its impulse integral.
struct PushEvent {
  enum class Profile { constant, trapezoid };

  double start = 0.0;     // s
  double duration = 0.0;  // s, > 0
  Eigen::Vector3d force{Eigen::Vector3d::Zero()};  // N (plateau value)
  Profile profile = Profile::constant;

  Eigen::Vector3d force_at(double t) const;
  double impulse() const;  // integral of the force magnitude, N*s
};

struct SimState {
  rbd::JointConfiguration q;
  Eigen::VectorXd nu;  // [v_B world; w_B world; qdot_j]
  double time = 0.0;
  std::array<Eigen::Vector3d, 2> foot_force{
      {Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()}};  // net world contact force
  double external_impulse = 0.0;  // accumulated push impulse, N*s
};

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

SimState make_sim_state(const rbd::RobotModel& model, const rbd::JointConfiguration& q);

// One semi-implicit Euler step under commanded joint torques and any active
// pushes. dt must lie in (0, 0.005]. Throws SimError with a diagnostic when
// the state stops being finite.
SimState sim_step(const rbd::RobotModel& model, const SimState& state,
                  const Eigen::VectorXd& tau, const std::vector<PushEvent>& pushes, double dt,
                  const SimParams& params = {});

struct FallCheck {
  bool fallen = false;
  std::string reason;
};

// Fall when the base drops below 60% of nominal standing height, the base
// tilts past 0.8 rad, or a non-foot link touches the ground.
FallCheck detect_fall(const rbd::RobotModel& model, const SimState& state);

}  // namespace mimic::sim
