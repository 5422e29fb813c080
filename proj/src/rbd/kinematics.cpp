#include "mimic/rbd/kinematics.hpp"

namespace mimic::rbd {

FkResult forward_kinematics(const RobotModel& model, const JointConfiguration& config) {
  if (config.joint_angles.size() != model.n_j())
    throw ModelError("forward_kinematics: joint dimension mismatch");
  return forward_kinematics_t<double>(model, config.base_position, config.base_rpy,
                                      config.joint_angles);
}

Eigen::MatrixXd frame_jacobian(const RobotModel& model, const FkResult& fk, int frame) {
  if (frame < 0 || frame >= model.n_frames()) throw ModelError("frame_jacobian: unknown frame");
  const Eigen::Vector3d p = fk.frame_pos(model, frame);
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(6, model.nv());
  j.block<3, 3>(0, 0).setIdentity();
  j.block<3, 3>(0, 3) = -skew<double>(p - fk.pos[0]);
  j.block<3, 3>(3, 3).setIdentity();
  int walk = model.is_foot_frame(frame)
                 ? model.feet[frame - static_cast<int>(model.links.size())].link
                 : frame;
  while (model.links[walk].parent >= 0) {
    const int col = 6 + model.links[walk].joint;
    j.block<3, 1>(0, col) = fk.axis[walk].cross(p - fk.pos[walk]);
    j.block<3, 1>(3, col) = fk.axis[walk];
    walk = model.links[walk].parent;
  }
  return j;
}

Eigen::MatrixXd frame_jacobian(const RobotModel& model, const JointConfiguration& config,
                               const std::string& frame_name) {
  const int frame = model.frame_index(frame_name);
  if (frame < 0) throw ModelError("frame_jacobian: unknown frame '" + frame_name + "'");
  return frame_jacobian(model, forward_kinematics(model, config), frame);
}

namespace {

struct LinkMotion {
  Eigen::Vector3d w;      // angular velocity
  Eigen::Vector3d v;      // velocity of the frame origin
  Eigen::Vector3d alpha;  // angular acceleration
  Eigen::Vector3d a;      // acceleration of the frame origin
};

// Velocity/acceleration sweep for given nu, nudot (classical accelerations, world frame).
std::vector<LinkMotion> motion_sweep(const RobotModel& model, const FkResult& fk,
                                     const Eigen::VectorXd& nu, const Eigen::VectorXd& nudot) {
  const int n = static_cast<int>(model.links.size());
  std::vector<LinkMotion> m(n);
  m[0].v = nu.segment<3>(0);
  m[0].w = nu.segment<3>(3);
  m[0].a = nudot.segment<3>(0);
  m[0].alpha = nudot.segment<3>(3);
  for (int i = 1; i < n; ++i) {
    const int p = model.links[i].parent;
    const int j = model.links[i].joint;
    const Eigen::Vector3d r = fk.pos[i] - fk.pos[p];
    const Eigen::Vector3d& axis = fk.axis[i];
    m[i].v = m[p].v + m[p].w.cross(r);
    m[i].a = m[p].a + m[p].alpha.cross(r) + m[p].w.cross(m[p].w.cross(r));
    m[i].w = m[p].w + axis * nu[6 + j];
    m[i].alpha = m[p].alpha + axis * nudot[6 + j] + m[p].w.cross(axis * nu[6 + j]);
  }
  return m;
}

}  // namespace

Eigen::Matrix<double, 6, 1> frame_bias_acceleration(const RobotModel& model, const FkResult& fk,
                                                    const Eigen::VectorXd& nu, int frame) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(model.nv());
  const auto motion = motion_sweep(model, fk, nu, zero);
  const int link = model.is_foot_frame(frame)
                       ? model.feet[frame - static_cast<int>(model.links.size())].link
                       : frame;
  const Eigen::Vector3d r = fk.frame_pos(model, frame) - fk.pos[link];
  Eigen::Matrix<double, 6, 1> acc;
  acc.head<3>() = motion[link].a + motion[link].alpha.cross(r) +
                  motion[link].w.cross(motion[link].w.cross(r));
  acc.tail<3>() = motion[link].alpha;
  return acc;
}

CentroidalState centroidal_momentum(const RobotModel& model, const JointConfiguration& config,
                                    const Eigen::VectorXd& nu, Eigen::MatrixXd* a_out) {
  if (nu.size() != model.nv()) throw ModelError("centroidal_momentum: velocity dimension mismatch");
  const FkResult fk = forward_kinematics(model, config);
  const Eigen::Matrix<double, 6, Eigen::Dynamic> a = centroidal_momentum_matrix(model, fk);
  CentroidalState state;
  state.com = com_position(model, fk);
  state.h = a * nu / model.total_mass;
  if (a_out) *a_out = a;
  return state;
}

}  // namespace mimic::rbd
