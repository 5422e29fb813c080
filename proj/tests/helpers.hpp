#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>

#include "mimic/rbd/dynamics.hpp"
#include "mimic/rbd/kinematics.hpp"
#include "mimic/rbd/model.hpp"

namespace mimic::test {

inline rbd::RobotModel reference_model() {
  static rbd::RobotModel model = rbd::load_model_file(std::string(MIMIC_MODEL_DIR) +
                                                      "/humanoid27.json");
  return model;
}

// Floating base carrying one revolute joint about y with a point-ish mass at
// distance l below the hinge.
inline std::string pendulum_document(double mass = 2.0, double length = 0.5,
                                     double base_mass = 10.0) {
  char buf[2048];
  std::snprintf(buf, sizeof(buf), R"({
    "model_schema": 1, "name": "pendulum", "height": %g,
    "links": [
      {"name": "base", "parent": "", "mass": %g, "com": [0,0,0],
       "inertia": [0.1, 0.1, 0.1, 0, 0, 0]},
      {"name": "rod", "parent": "base", "mass": %g, "com": [0, 0, %g],
       "inertia": [1e-9, 1e-9, 1e-9, 0, 0, 0],
       "joint": {"name": "hinge", "axis": [0,1,0], "lower": -6.3, "upper": 6.3,
                 "velocity": 50, "torque": 100}}
    ],
    "feet": [
      {"name": "left", "link": "rod", "offset": {"xyz": [0,0,%g]},
       "half_length_x": 0.1, "half_width_y": 0.1},
      {"name": "right", "link": "base", "half_length_x": 0.1, "half_width_y": 0.1}
    ]
  })", length, base_mass, mass, -length, -length);
  return buf;
}

inline rbd::JointConfiguration random_configuration(const rbd::RobotModel& model,
                                                    std::mt19937& rng,
                                                    double joint_scale = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  rbd::JointConfiguration q;
  q.base_position = Eigen::Vector3d(u(rng), u(rng), 0.8 + 0.2 * u(rng));
  q.base_rpy = Eigen::Vector3d(0.3 * u(rng), 0.3 * u(rng), 1.5 * u(rng));
  q.joint_angles.resize(model.n_j());
  for (int j = 0; j < model.n_j(); ++j) {
    const auto& joint = model.joints[j];
    const double mid = 0.5 * (joint.lower + joint.upper);
    const double half = 0.5 * (joint.upper - joint.lower);
    q.joint_angles[j] = mid + joint_scale * 0.8 * half * u(rng);
  }
  return q;
}

inline Eigen::VectorXd random_vector(int n, std::mt19937& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * u(rng);
  return v;
}

}  // namespace mimic::test
