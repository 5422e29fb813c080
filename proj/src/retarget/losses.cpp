#include "mimic/retarget/losses.hpp"

#include <random>

#include "mimic/rbd/capsule.hpp"
#include "mimic/rbd/kinematics.hpp"

namespace mimic::retarget {

using Eigen::Vector3d;
using Eigen::VectorXd;

std::vector<LimbPair> build_pair_table(const rbd::RobotModel& model, const HumanMotion& human) {
  static const std::array<std::pair<const char*, const char*>, 8> kLimbs{{
      {"l_hip", "l_knee"}, {"l_knee", "l_ankle"},
      {"r_hip", "r_knee"}, {"r_knee", "r_ankle"},
      {"l_shoulder", "l_elbow"}, {"l_elbow", "l_wrist"},
      {"r_shoulder", "r_elbow"}, {"r_elbow", "r_wrist"},
  }};
  std::vector<LimbPair> pairs;
  for (const auto& [from, to] : kLimbs) {
    LimbPair p;
    p.human_from = human.joint_index(from);
    p.human_to = human.joint_index(to);
    if (p.human_from < 0 || p.human_to < 0)
      throw rbd::ModelError(std::string("skeleton is missing limb joint '") + from + "'/'" + to +
                            "'");
    auto robot_frame = [&](const std::string& h) {
      auto it = model.human_joint_map.find(h);
      if (it == model.human_joint_map.end())
        throw rbd::ModelError("human_joint_map has no entry for '" + h + "'");
      const int frame = model.frame_index(it->second);
      if (frame < 0) throw rbd::ModelError("human_joint_map targets unknown frame '" + it->second + "'");
      return frame;
    };
    p.robot_from = robot_frame(from);
    p.robot_to = robot_frame(to);
    pairs.push_back(p);
  }
  return pairs;
}

std::vector<std::pair<int, int>> build_collision_pairs(const rbd::RobotModel& model) {
  const int n = static_cast<int>(model.links.size());
  // joint-count distance along the tree between two links
  auto depth_chain = [&](int link) {
    std::vector<int> chain;
    while (link >= 0) {
      chain.push_back(link);
      link = model.links[link].parent;
    }
    return chain;
  };
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i) {
    if (!model.links[i].capsule) continue;
    const auto ci = depth_chain(i);
    for (int j = i + 1; j < n; ++j) {
      if (!model.links[j].capsule) continue;
      const auto cj = depth_chain(j);
      // joint distance through the lowest common ancestor
      int dist = std::numeric_limits<int>::max();
      for (size_t a = 0; a < ci.size(); ++a)
        for (size_t b = 0; b < cj.size(); ++b)
          if (ci[a] == cj[b]) dist = std::min(dist, static_cast<int>(a + b));
      if (dist > 3) pairs.emplace_back(i, j);
    }
  }
  // keep only pairs that can actually approach each other inside the joint
  // limits; distant pairs would otherwise flood the avoidance term with a
  // posture-wide repulsion (exp(-d^2) decays slowly at limb scale)
  constexpr int kSamples = 256;
  constexpr double kReachable = 0.05;
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> min_dist(pairs.size(), std::numeric_limits<double>::max());
  for (int s = 0; s < kSamples; ++s) {
    rbd::JointConfiguration cfg = rbd::JointConfiguration::Zero(model);
    for (int j = 0; j < model.n_j(); ++j) {
      const auto& jt = model.joints[j];
      cfg.joint_angles[j] = jt.lower + unit(rng) * (jt.upper - jt.lower);
    }
    const rbd::FkResult fk = rbd::forward_kinematics(model, cfg);
    for (size_t p = 0; p < pairs.size(); ++p) {
      const auto [i, j] = pairs[p];
      const rbd::Capsule ca = rbd::transform_capsule(fk.rot[i], fk.pos[i], *model.links[i].capsule);
      const rbd::Capsule cb = rbd::transform_capsule(fk.rot[j], fk.pos[j], *model.links[j].capsule);
      min_dist[p] = std::min(min_dist[p], rbd::capsule_distance(ca, cb));
    }
  }
  std::vector<std::pair<int, int>> reachable;
  for (size_t p = 0; p < pairs.size(); ++p)
    if (min_dist[p] < kReachable) reachable.push_back(pairs[p]);
  return reachable;
}

namespace {

// d(unit(v))/dv applied through the chain rule for || vh_hat - vr_hat ||
Eigen::Matrix3d unit_vector_jacobian(const Vector3d& v) {
  const double n = v.norm();
  return (Eigen::Matrix3d::Identity() - (v / n) * (v / n).transpose()) / n;
}

// positional jacobian of a world point rigidly attached to a link, joint columns only
Eigen::Matrix3Xd point_jacobian_joints(const rbd::RobotModel& model, const rbd::FkResult& fk,
                                       int link, const Vector3d& point) {
  Eigen::Matrix3Xd j = Eigen::Matrix3Xd::Zero(3, model.n_j());
  int walk = link;
  while (model.links[walk].parent >= 0) {
    j.col(model.links[walk].joint) = fk.axis[walk].cross(point - fk.pos[walk]);
    walk = model.links[walk].parent;
  }
  return j;
}

Eigen::Matrix3Xd frame_jacobian_joints(const rbd::RobotModel& model, const rbd::FkResult& fk,
                                       int frame) {
  const int link = model.is_foot_frame(frame)
                       ? model.feet[frame - static_cast<int>(model.links.size())].link
                       : frame;
  return point_jacobian_joints(model, fk, link, fk.frame_pos(model, frame));
}

}  // namespace

double loss_vec(const Eigen::MatrixX3d& human_positions, const rbd::RobotModel& model,
                const rbd::FkResult& fk, const std::vector<LimbPair>& pairs, VectorXd* grad) {
  double loss = 0.0;
  if (grad) grad->setZero(model.n_j());
  for (const auto& p : pairs) {
    const Vector3d vh = human_positions.row(p.human_to) - human_positions.row(p.human_from);
    const Vector3d vr = fk.frame_pos(model, p.robot_to) - fk.frame_pos(model, p.robot_from);
    const double nh = vh.norm(), nr = vr.norm();
    if (nh < 1e-9 || nr < 1e-9) throw rbd::ModelError("zero-length limb vector");
    const Vector3d diff = vh / nh - vr / nr;
    const double term = diff.norm();
    loss += term;
    if (grad && term > 1e-12) {
      const Eigen::Matrix3Xd jv = frame_jacobian_joints(model, fk, p.robot_to) -
                                  frame_jacobian_joints(model, fk, p.robot_from);
      *grad += jv.transpose() * (unit_vector_jacobian(vr).transpose() * (-diff / term));
    }
  }
  return loss;
}

double loss_foot(const rbd::RobotModel& model, const rbd::FkResult& fk,
                 const rbd::FkResult* fk_prev, const std::array<bool, 2>& contact,
                 double frame_rate, VectorXd* grad, VectorXd* grad_prev, double smoothing) {
  // smoothing > 0 rounds the kinks of |z| and ||v|| into sqrt(s^2 + eps^2) - eps
  // so descent methods get a usable gradient at the stance-foot walls
  const double eps2 = smoothing * smoothing;
  double loss = 0.0;
  if (grad) grad->setZero(model.n_j());
  if (grad_prev) grad_prev->setZero(model.n_j());
  for (int f = 0; f < 2; ++f) {
    if (!contact[f]) continue;
    const int frame = model.foot_frame(f);
    const Vector3d p = fk.frame_pos(model, frame);
    const double zn = std::sqrt(p[2] * p[2] + eps2);
    loss += zn - smoothing;
    if (grad && zn > 1e-12) {
      const Eigen::Matrix3Xd j = frame_jacobian_joints(model, fk, frame);
      *grad += (p[2] / zn) * j.row(2).transpose();
    }
    if (fk_prev) {
      const Vector3d v = (p - fk_prev->frame_pos(model, frame)) * frame_rate;
      const double vn = std::sqrt(v.squaredNorm() + eps2);
      loss += vn - smoothing;
      if (vn > 1e-12) {
        if (grad) {
          const Eigen::Matrix3Xd j = frame_jacobian_joints(model, fk, frame);
          *grad += frame_rate * (j.transpose() * (v / vn));
        }
        if (grad_prev) {
          const Eigen::Matrix3Xd jp = frame_jacobian_joints(model, *fk_prev, frame);
          *grad_prev -= frame_rate * (jp.transpose() * (v / vn));
        }
      }
    }
  }
  return loss;
}

double loss_smo(const VectorXd& q, const VectorXd& q_prev, VectorXd* grad, VectorXd* grad_prev,
                double smoothing) {
  if (q.size() != q_prev.size()) throw rbd::ModelError("loss_smo: dimension mismatch");
  const VectorXd d = q - q_prev;
  const double n = std::sqrt(d.squaredNorm() + smoothing * smoothing);
  if (grad) *grad = n > 1e-12 ? (d / n).eval() : VectorXd::Zero(q.size()).eval();
  if (grad_prev) *grad_prev = n > 1e-12 ? (-d / n).eval() : VectorXd::Zero(q.size()).eval();
  return n - smoothing;
}

double loss_col(const rbd::RobotModel& model, const rbd::FkResult& fk,
                const std::vector<std::pair<int, int>>& pairs, VectorXd* grad) {
  double loss = 0.0;
  if (grad) grad->setZero(model.n_j());
  for (const auto& [i, j] : pairs) {
    const rbd::Capsule ca = rbd::transform_capsule(fk.rot[i], fk.pos[i], *model.links[i].capsule);
    const rbd::Capsule cb = rbd::transform_capsule(fk.rot[j], fk.pos[j], *model.links[j].capsule);
    rbd::SegmentWitness w;
    const double d = rbd::capsule_distance(ca, cb, &w);
    const double term = std::exp(-d * d);
    loss += term;
    if (grad && w.distance > 1e-9) {
      const Vector3d n = (w.on_a - w.on_b) / w.distance;
      const Eigen::Matrix3Xd ja = point_jacobian_joints(model, fk, i, w.on_a);
      const Eigen::Matrix3Xd jb = point_jacobian_joints(model, fk, j, w.on_b);
      const VectorXd dd = (ja - jb).transpose() * n;
      *grad += -2.0 * d * term * dd;
    }
  }
  return loss;
}

double loss_torso(const Eigen::MatrixX3d& human_positions, const rbd::RobotModel& model,
                  const rbd::FkResult& fk, const HumanMotion& skeleton, VectorXd* grad) {
  double loss = 0.0;
  if (grad) grad->setZero(model.n_j());
  const int h_pelvis = skeleton.joint_index("pelvis");
  if (h_pelvis < 0) throw rbd::ModelError("skeleton is missing pelvis joint");
  const int r_pelvis = model.frame_index(model.human_joint_map.at("pelvis"));
  for (const char* shoulder : {"l_shoulder", "r_shoulder"}) {
    const int h_sh = skeleton.joint_index(shoulder);
    if (h_sh < 0) throw rbd::ModelError("skeleton is missing shoulder joint");
    const int r_sh = model.frame_index(model.human_joint_map.at(shoulder));
    const Vector3d vh = human_positions.row(h_sh) - human_positions.row(h_pelvis);
    const Vector3d vr = fk.frame_pos(model, r_sh) - fk.frame_pos(model, r_pelvis);
    const double nh = vh.norm(), nr = vr.norm();
    if (nh < 1e-9 || nr < 1e-9) throw rbd::ModelError("zero-length torso vector");
    const Vector3d diff = vh / nh - vr / nr;
    loss += diff.squaredNorm();
    if (grad) {
      const Eigen::Matrix3Xd jv = frame_jacobian_joints(model, fk, r_sh) -
                                  frame_jacobian_joints(model, fk, r_pelvis);
      *grad += jv.transpose() * (unit_vector_jacobian(vr).transpose() * (-2.0 * diff));
    }
  }
  return loss;
}

}  // namespace mimic::retarget
