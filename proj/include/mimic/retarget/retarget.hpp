#pragma once

#include <optional>

#include "mimic/retarget/contacts.hpp"
#include "mimic/retarget/losses.hpp"
#include "mimic/retarget/motion.hpp"

namespace mimic::retarget {

struct RetargetOptions {
  LossWeights weights;
  ContactParams contact_params;
  int max_iterations{500};
  int online_iterations{5};
  double initial_step{0.05};
  double convergence_tol{1e-7};     // relative loss decrease
  double online_budget_ms{33.0};
  double friction_coefficient{0.7};
  double torso_weight{2.0};  // pelvis->shoulder alignment prior, see loss_torso
  double smoothing{1e-3};    // pseudo-Huber width for the nonsmooth loss terms
};

// Base reference poses/velocities from the human pelvis, scaled by
// robot height / human height. Yaw is reconstructed from the hip axis;
// roll/pitch are taken as zero (position-only input data).
struct RootTrajectory {
  std::vector<Eigen::Vector3d> position;
  std::vector<Eigen::Vector3d> rpy;
  std::vector<Eigen::Vector3d> velocity;
  double scale{1.0};
};
RootTrajectory scale_root(const HumanMotion& human, const rbd::RobotModel& model);

ReferenceTrajectory retarget_offline(const HumanMotion& human, const rbd::RobotModel& model,
                                     const RetargetOptions& options = {});

// Streaming retargeting with warm-start state held per session.
class OnlineRetargeter {
 public:
  OnlineRetargeter(const rbd::RobotModel& model, const RetargetOptions& options = {});

  struct StepResult {
    Eigen::VectorXd state;   // x_next
    Eigen::VectorXd input;   // u_next
    std::array<bool, 2> contact;
    bool stale{false};
    double solve_ms{0.0};
  };

  // window: most recent human frames, newest last (>= 2 frames once streaming).
  StepResult step(const HumanMotion& window);

 private:
  const rbd::RobotModel model_;
  RetargetOptions options_;
  std::vector<LimbPair> pairs_;
  std::vector<std::pair<int, int>> collision_pairs_;
  std::optional<Eigen::VectorXd> prev_q_;
  std::optional<StepResult> prev_result_;
  std::optional<Eigen::Vector3d> prev_base_;
  double human_ground_{0.0};
  bool ground_set_{false};
};

}  // namespace mimic::retarget
