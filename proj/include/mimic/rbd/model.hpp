#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mimic::rbd {

constexpr double kGravity = 9.81;  // m/s^2, along -z

struct Capsule {
  Eigen::Vector3d p0{Eigen::Vector3d::Zero()};
  Eigen::Vector3d p1{Eigen::Vector3d::Zero()};
  double radius{0.0};
};

struct Joint {
  std::string name;
  Eigen::Vector3d axis{Eigen::Vector3d::UnitZ()};  // in link frame
  double lower{-3.14};
  double upper{3.14};
  double velocity_limit{10.0};
  double torque_limit{100.0};
};

struct Link {
  std::string name;
  int parent{-1};                          // link index, -1 for the root
  int joint{-1};                           // joint index, -1 for the root
  Eigen::Isometry3d offset{Eigen::Isometry3d::Identity()};  // parent frame -> joint frame
  double mass{0.0};
  Eigen::Vector3d com{Eigen::Vector3d::Zero()};  // in link frame
  Eigen::Matrix3d inertia{Eigen::Matrix3d::Zero()};  // about com, link frame
  std::optional<Capsule> capsule;
};

struct Foot {
  std::string name;        // "left" / "right"
  int link{-1};            // ankle link the sole frame is attached to
  Eigen::Isometry3d offset{Eigen::Isometry3d::Identity()};  // link frame -> sole frame
  double half_length_x{0.1};
  double half_width_y{0.05};
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Frame ids: [0, n_links) are link frames, n_links + f are the two foot soles.
struct RobotModel {
  std::string name;
  double height{0.0};
  std::vector<Link> links;
  std::vector<Joint> joints;
  std::array<Foot, 2> feet;
  std::map<std::string, std::string> human_joint_map;  // human joint -> robot frame name
  std::vector<int> leg_joints;
  std::vector<int> arm_joints;
  double total_mass{0.0};

  int n_j() const { return static_cast<int>(joints.size()); }
  int nv() const { return 6 + n_j(); }
  int n_frames() const { return static_cast<int>(links.size()) + 2; }
  int foot_frame(int f) const { return static_cast<int>(links.size()) + f; }
  bool is_foot_frame(int frame) const { return frame >= static_cast<int>(links.size()); }

  int link_index(const std::string& link_name) const;
  int frame_index(const std::string& frame_name) const;  // link or "left_sole"/"right_sole"
  int joint_link(int joint) const;  // link driven by a joint
};

// Parses and validates a model-schema-1 document (JSON text).
RobotModel load_model(const std::string& model_document);
RobotModel load_model_file(const std::string& path);

struct JointConfiguration {
  Eigen::Vector3d base_position{Eigen::Vector3d::Zero()};
  Eigen::Vector3d base_rpy{Eigen::Vector3d::Zero()};  // ZYX Euler: (roll, pitch, yaw)
  Eigen::VectorXd joint_angles;

  static JointConfiguration Zero(const RobotModel& model);
};

// Pitch stays clear of the ZYX singularity; joint angles within limits.
bool validate_configuration(const RobotModel& model, const JointConfiguration& q,
                            std::string* why = nullptr);

struct CentroidalState {
  Eigen::Matrix<double, 6, 1> h{Eigen::Matrix<double, 6, 1>::Zero()};  // normalized momentum [lin; ang]
  Eigen::Vector3d com{Eigen::Vector3d::Zero()};
};

}  // namespace mimic::rbd
