#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mimic/rbd/model.hpp"

namespace mimic::rbd {

// Generalized velocity convention used everywhere:
//   nu = [v_B (world velocity of the base origin); w_B (world angular velocity); qdot_j]
// Frame twists and Jacobians are world-frame, [linear; angular].

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

template <typename Scalar>
Mat3<Scalar> rpy_to_rotation(const Vec3<Scalar>& rpy) {
  using std::cos;
  using std::sin;
  const Scalar cr = cos(rpy[0]), sr = sin(rpy[0]);
  const Scalar cp = cos(rpy[1]), sp = sin(rpy[1]);
  const Scalar cy = cos(rpy[2]), sy = sin(rpy[2]);
  Mat3<Scalar> rz, ry, rx;
  rz << cy, -sy, Scalar(0), sy, cy, Scalar(0), Scalar(0), Scalar(0), Scalar(1);
  ry << cp, Scalar(0), sp, Scalar(0), Scalar(1), Scalar(0), -sp, Scalar(0), cp;
  rx << Scalar(1), Scalar(0), Scalar(0), Scalar(0), cr, -sr, Scalar(0), sr, cr;
  return rz * ry * rx;
}

// w_B = euler_rate_map(rpy) * rpy_dot  (ZYX convention).
template <typename Scalar>
Mat3<Scalar> euler_rate_map(const Vec3<Scalar>& rpy) {
  using std::cos;
  using std::sin;
  const Scalar cp = cos(rpy[1]), sp = sin(rpy[1]);
  const Scalar cy = cos(rpy[2]), sy = sin(rpy[2]);
  Mat3<Scalar> e;
  e << cp * cy, -sy, Scalar(0),
       cp * sy, cy, Scalar(0),
       -sp, Scalar(0), Scalar(1);
  return e;
}

// Inverse of euler_rate_map; valid away from |pitch| = pi/2.
template <typename Scalar>
Mat3<Scalar> euler_rate_map_inverse(const Vec3<Scalar>& rpy) {
  using std::cos;
  using std::sin;
  using std::tan;
  const Scalar cp = cos(rpy[1]), tp = tan(rpy[1]);
  const Scalar cy = cos(rpy[2]), sy = sin(rpy[2]);
  Mat3<Scalar> e;
  e << cy / cp, sy / cp, Scalar(0),
       -sy, cy, Scalar(0),
       cy * tp, sy * tp, Scalar(1);
  return e;
}

template <typename Scalar>
Mat3<Scalar> skew(const Vec3<Scalar>& v) {
  Mat3<Scalar> s;
  s << Scalar(0), -v[2], v[1], v[2], Scalar(0), -v[0], -v[1], v[0], Scalar(0);
  return s;
}

template <typename Scalar>
Mat3<Scalar> axis_angle(const Vec3<Scalar>& axis, const Scalar& angle) {
  using std::cos;
  using std::sin;
  const Mat3<Scalar> k = skew<Scalar>(axis);
  return Mat3<Scalar>::Identity() + sin(angle) * k + (Scalar(1) - cos(angle)) * k * k;
}

template <typename Scalar>
struct FkResultT {
  std::vector<Mat3<Scalar>> rot;   // world rotation per link
  std::vector<Vec3<Scalar>> pos;   // world position of the link (joint) frame origin
  std::vector<Vec3<Scalar>> com;   // world position of the link com
  std::vector<Vec3<Scalar>> axis;  // world joint axis per link (zero for root)

  Mat3<Scalar> frame_rot(const RobotModel& m, int frame) const {
    if (!m.is_foot_frame(frame)) return rot[frame];
    const Foot& ft = m.feet[frame - static_cast<int>(m.links.size())];
    return rot[ft.link] * ft.offset.rotation().template cast<Scalar>();
  }
  Vec3<Scalar> frame_pos(const RobotModel& m, int frame) const {
    if (!m.is_foot_frame(frame)) return pos[frame];
    const Foot& ft = m.feet[frame - static_cast<int>(m.links.size())];
    return pos[ft.link] + rot[ft.link] * ft.offset.translation().template cast<Scalar>();
  }
};

using FkResult = FkResultT<double>;

template <typename Scalar>
FkResultT<Scalar> forward_kinematics_t(const RobotModel& model, const Vec3<Scalar>& base_pos,
                                       const Vec3<Scalar>& base_rpy,
                                       const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& q) {
  const int n = static_cast<int>(model.links.size());
  FkResultT<Scalar> out;
  out.rot.resize(n);
  out.pos.resize(n);
  out.com.resize(n);
  out.axis.assign(n, Vec3<Scalar>::Zero());
  for (int i = 0; i < n; ++i) {
    const Link& link = model.links[i];
    if (link.parent < 0) {
      out.rot[i] = rpy_to_rotation<Scalar>(base_rpy);
      out.pos[i] = base_pos;
    } else {
      const Mat3<Scalar> rp = out.rot[link.parent];
      const Mat3<Scalar> roff = link.offset.rotation().cast<Scalar>();
      const Vec3<Scalar> poff = link.offset.translation().cast<Scalar>();
      out.pos[i] = out.pos[link.parent] + rp * poff;
      const Mat3<Scalar> r_joint_frame = rp * roff;
      const Vec3<Scalar> axis_local = model.joints[link.joint].axis.cast<Scalar>();
      out.axis[i] = r_joint_frame * axis_local;
      out.rot[i] = r_joint_frame * axis_angle<Scalar>(axis_local, q[link.joint]);
    }
    out.com[i] = out.pos[i] + out.rot[i] * link.com.cast<Scalar>();
  }
  return out;
}

FkResult forward_kinematics(const RobotModel& model, const JointConfiguration& config);

// World twist of a frame w.r.t. nu; 6 x (6+n_j), rows [linear; angular].
Eigen::MatrixXd frame_jacobian(const RobotModel& model, const FkResult& fk, int frame);
Eigen::MatrixXd frame_jacobian(const RobotModel& model, const JointConfiguration& config,
                               const std::string& frame_name);

// Classical frame acceleration with nudot = 0 (the Jdot*nu term), [linear; angular].
Eigen::Matrix<double, 6, 1> frame_bias_acceleration(const RobotModel& model, const FkResult& fk,
                                                    const Eigen::VectorXd& nu, int frame);

template <typename Scalar>
Vec3<Scalar> com_position(const RobotModel& model, const FkResultT<Scalar>& fk) {
  Vec3<Scalar> c = Vec3<Scalar>::Zero();
  for (size_t i = 0; i < model.links.size(); ++i) c += Scalar(model.links[i].mass) * fk.com[i];
  return c / Scalar(model.total_mass);
}

// Centroidal momentum matrix: h_raw = A * nu, rows [linear momentum; angular momentum about com].
template <typename Scalar>
Eigen::Matrix<Scalar, 6, Eigen::Dynamic> centroidal_momentum_matrix(const RobotModel& model,
                                                                    const FkResultT<Scalar>& fk) {
  const int nv = model.nv();
  const int n = static_cast<int>(model.links.size());
  const Vec3<Scalar> com = com_position(model, fk);
  Eigen::Matrix<Scalar, 6, Eigen::Dynamic> a(6, nv);
  a.setZero();
  const Vec3<Scalar> base_origin = fk.pos[0];
  for (int i = 0; i < n; ++i) {
    const Link& link = model.links[i];
    const Scalar m(link.mass);
    const Mat3<Scalar> iw =
        fk.rot[i] * link.inertia.cast<Scalar>() * fk.rot[i].transpose();
    const Mat3<Scalar> cxi = skew<Scalar>(Vec3<Scalar>(fk.com[i] - com));
    // Base columns: v_ci = v_B + w x (c_i - r_B); w_i = w_B.
    a.template block<3, 3>(0, 0) += m * Mat3<Scalar>::Identity();
    a.template block<3, 3>(0, 3) += -m * skew<Scalar>(Vec3<Scalar>(fk.com[i] - base_origin));
    a.template block<3, 3>(3, 0) += m * cxi;
    a.template block<3, 3>(3, 3) += iw - m * cxi * skew<Scalar>(Vec3<Scalar>(fk.com[i] - base_origin));
    // Joint columns along the path to the root.
    int walk = i;
    while (model.links[walk].parent >= 0) {
      const int j = model.links[walk].joint;
      const Vec3<Scalar> lin = fk.axis[walk].cross(Vec3<Scalar>(fk.com[i] - fk.pos[walk]));
      a.template block<3, 1>(0, 6 + j) += m * lin;
      a.template block<3, 1>(3, 6 + j) += iw * fk.axis[walk] + m * cxi * lin;
      walk = model.links[walk].parent;
    }
  }
  return a;
}

// h normalized by total mass, plus the (unnormalized) momentum matrix.
CentroidalState centroidal_momentum(const RobotModel& model, const JointConfiguration& config,
                                    const Eigen::VectorXd& nu, Eigen::MatrixXd* a_out = nullptr);

}  // namespace mimic::rbd
