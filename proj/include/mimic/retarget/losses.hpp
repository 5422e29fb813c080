#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mimic/rbd/kinematics.hpp"
#include "mimic/rbd/model.hpp"
#include "mimic/retarget/motion.hpp"

namespace mimic::retarget {

struct LossWeights {
  double vec{1.0};
  double foot{2.0};
  double smo{0.1};
  // the avoidance kernel exp(-d^2) stays near 1 at limb-scale separations, so
  // a large weight biases the whole posture; 0.1 keeps the term corrective
  double col{0.1};
};

// One limb vector: human joint pair and the matching robot frame pair.
struct LimbPair {
  int human_from{-1};
  int human_to{-1};
  int robot_from{-1};
  int robot_to{-1};
};

// Resolves the 8 limb vectors (hip->knee, knee->ankle, shoulder->elbow,
// elbow->wrist, both sides) through the model's human_joint_map.
std::vector<LimbPair> build_pair_table(const rbd::RobotModel& model, const HumanMotion& human);

// Link pairs eligible for the self-collision penalty: both carry capsules and
// are separated by more than 3 joints along the tree.
std::vector<std::pair<int, int>> build_collision_pairs(const rbd::RobotModel& model);

// All losses are per-frame; gradients are w.r.t. the frame's joint angles q_j.

double loss_vec(const Eigen::MatrixX3d& human_positions, const rbd::RobotModel& model,
                const rbd::FkResult& fk, const std::vector<LimbPair>& pairs,
                Eigen::VectorXd* grad = nullptr);

// Height norm plus velocity norm for feet in contact; velocity by finite
// difference against the previous frame at the clip frame rate (m/s).
// fk_prev == nullptr drops the velocity term (single-frame evaluation).
// smoothing > 0 replaces each norm |s| with sqrt(s^2 + smoothing^2) - smoothing
// (pseudo-Huber) so the gradient stays defined at the stance kinks.
double loss_foot(const rbd::RobotModel& model, const rbd::FkResult& fk,
                 const rbd::FkResult* fk_prev, const std::array<bool, 2>& contact,
                 double frame_rate, Eigen::VectorXd* grad = nullptr,
                 Eigen::VectorXd* grad_prev = nullptr, double smoothing = 0.0);

double loss_smo(const Eigen::VectorXd& q, const Eigen::VectorXd& q_prev,
                Eigen::VectorXd* grad = nullptr, Eigen::VectorXd* grad_prev = nullptr,
                double smoothing = 0.0);

double loss_col(const rbd::RobotModel& model, const rbd::FkResult& fk,
                const std::vector<std::pair<int, int>>& pairs,
                Eigen::VectorXd* grad = nullptr);

// Squared mismatch of the pelvis->shoulder directions. The limb vectors leave
// the torso lean unobserved (waist pitch against shoulder pitch); this smooth
// prior pins the torso to the human posture. Zero when the clip is an exact
// robot motion.
double loss_torso(const Eigen::MatrixX3d& human_positions, const rbd::RobotModel& model,
                  const rbd::FkResult& fk, const HumanMotion& skeleton,
                  Eigen::VectorXd* grad = nullptr);

}  // namespace mimic::retarget
