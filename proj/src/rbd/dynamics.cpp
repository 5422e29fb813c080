#include "mimic/rbd/dynamics.hpp"

namespace mimic::rbd {

namespace {

struct LinkMotion {
  Eigen::Vector3d w, v, alpha, a;
};

}  // namespace

Eigen::VectorXd inverse_dynamics(const RobotModel& model, const JointConfiguration& config,
                                 const Eigen::VectorXd& nu, const Eigen::VectorXd& nudot,
                                 bool with_gravity) {
  const int n = static_cast<int>(model.links.size());
  if (nu.size() != model.nv() || nudot.size() != model.nv())
    throw ModelError("inverse_dynamics: dimension mismatch");
  const FkResult fk = forward_kinematics(model, config);

  // Outward sweep: classical velocities/accelerations of each joint-frame origin.
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

  const Eigen::Vector3d g =
      with_gravity ? Eigen::Vector3d(0, 0, -kGravity) : Eigen::Vector3d::Zero();

  // Per-link net force/moment about the link com.
  std::vector<Eigen::Vector3d> f(n), tau_com(n);
  for (int i = 0; i < n; ++i) {
    const Link& link = model.links[i];
    const Eigen::Vector3d rc = fk.rot[i] * link.com;
    const Eigen::Vector3d a_com =
        m[i].a + m[i].alpha.cross(rc) + m[i].w.cross(m[i].w.cross(rc));
    const Eigen::Matrix3d iw = fk.rot[i] * link.inertia * fk.rot[i].transpose();
    f[i] = link.mass * (a_com - g);
    tau_com[i] = iw * m[i].alpha + m[i].w.cross(iw * m[i].w);
  }

  // Inward sweep: accumulate wrenches (moment about each link's joint-frame origin).
  std::vector<Eigen::Vector3d> fi(n, Eigen::Vector3d::Zero()), ni(n, Eigen::Vector3d::Zero());
  for (int i = n - 1; i >= 0; --i) {
    fi[i] += f[i];
    ni[i] += tau_com[i] + (fk.com[i] - fk.pos[i]).cross(f[i]);
    const int p = model.links[i].parent;
    if (p >= 0) {
      fi[p] += fi[i];
      ni[p] += ni[i] + (fk.pos[i] - fk.pos[p]).cross(fi[i]);
    }
  }

  Eigen::VectorXd tau(model.nv());
  tau.segment<3>(0) = fi[0];
  tau.segment<3>(3) = ni[0];
  for (int i = 1; i < n; ++i) tau[6 + model.links[i].joint] = fk.axis[i].dot(ni[i]);
  return tau;
}

JointSpaceDynamics joint_space_dynamics(const RobotModel& model, const JointConfiguration& config,
                                        const Eigen::VectorXd& nu) {
  const int nv = model.nv();
  JointSpaceDynamics out;
  out.bias = inverse_dynamics(model, config, nu, Eigen::VectorXd::Zero(nv));
  out.mass_matrix.resize(nv, nv);
  const Eigen::VectorXd zero_nu = Eigen::VectorXd::Zero(nv);
  // M columns from unit-acceleration inverse dynamics (gravity off, zero velocity).
  for (int k = 0; k < nv; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(nv);
    e[k] = 1.0;
    out.mass_matrix.col(k) = inverse_dynamics(model, config, zero_nu, e, false);
  }
  out.mass_matrix = 0.5 * (out.mass_matrix + out.mass_matrix.transpose()).eval();
  return out;
}

double kinetic_energy(const RobotModel& model, const JointConfiguration& config,
                      const Eigen::VectorXd& nu) {
  const auto dyn = joint_space_dynamics(model, config, nu);
  return 0.5 * nu.dot(dyn.mass_matrix * nu);
}

double potential_energy(const RobotModel& model, const JointConfiguration& config) {
  const FkResult fk = forward_kinematics(model, config);
  double e = 0.0;
  for (size_t i = 0; i < model.links.size(); ++i)
    e += model.links[i].mass * kGravity * fk.com[i][2];
  return e;
}

}  // namespace mimic::rbd
