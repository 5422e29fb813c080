#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mimic/rbd/model.hpp"

namespace mimic::retarget {

// Fixed human skeleton: joint names are free-form but must cover the limb
// pairs and feet referenced by the model's human_joint_map.
struct HumanMotion {
  double frame_rate{0.0};
  std::vector<std::string> joint_names;
  // positions[t] is n_h x 3 (meters, world frame, z up)
  std::vector<Eigen::MatrixX3d> positions;
  Eigen::MatrixX3d skeleton_offsets;  // n_h x 3
  double height{0.0};                 // standing height, m

  int frames() const { return static_cast<int>(positions.size()); }
  int n_joints() const { return static_cast<int>(joint_names.size()); }
  int joint_index(const std::string& name) const;
  void validate() const;  // throws rbd::ModelError on violation
};

HumanMotion load_motion(const std::string& motion_document);
HumanMotion load_motion_file(const std::string& path);
std::string motion_to_document(const HumanMotion& motion);

struct ContactPhase {
  bool stance{false};
  double start{0.0};
  double end{0.0};
};

struct ContactSchedule {
  std::vector<std::array<bool, 2>> contact;  // per frame, [left, right]
  double frame_rate{0.0};
  std::array<std::vector<ContactPhase>, 2> phases;

  int frames() const { return static_cast<int>(contact.size()); }
  bool foot_contact(int foot, double time) const;
  void rebuild_phases();
};

// Reference state layout matches the MPC state: [h(6), r_B(3), theta_B(3), q_j].
// Reference input layout: [f_l(3), tau_l(3), f_r(3), tau_r(3), qdot_j].
struct ReferenceTrajectory {
  double frame_rate{0.0};
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> inputs;
  ContactSchedule contacts;
  bool converged{true};
  bool contact_warning{false};

  int frames() const { return static_cast<int>(states.size()); }
  double duration() const { return frames() < 2 ? 0.0 : (frames() - 1) / frame_rate; }
  Eigen::VectorXd state_at(double time) const;  // linear interpolation, clamped
  Eigen::VectorXd input_at(double time) const;
};

std::string reference_to_document(const ReferenceTrajectory& ref);
ReferenceTrajectory load_reference(const std::string& document);
ReferenceTrajectory load_reference_file(const std::string& path);

}  // namespace mimic::retarget
