#include "mimic/nmpc/ocp.hpp"

#include <algorithm>
#include <cmath>

namespace mimic::nmpc {

using Eigen::Vector3d;
using Eigen::VectorXd;

OcpDefinition build_ocp(const rbd::RobotModel& model, const retarget::ReferenceTrajectory& ref,
                        const VectorXd& x0, double start_time, const OcpParams& params) {
  OcpDefinition ocp;
  ocp.params = params;
  ocp.x0 = x0;
  const double dt = params.dt();
  const double duration = ref.duration();
  ocp.truncated = start_time + params.horizon > duration + 1e-12;
  ocp.x_ref.reserve(params.nodes + 1);
  ocp.u_ref.reserve(params.nodes);
  ocp.contact.reserve(params.nodes);
  ocp.swing_rate.reserve(params.nodes);
  for (int k = 0; k <= params.nodes; ++k) {
    const double t = start_time + k * dt;
    ocp.x_ref.push_back(ref.state_at(t));
    if (k == params.nodes) break;
    ocp.u_ref.push_back(ref.input_at(t));
    std::array<bool, 2> contact{};
    std::array<double, 2> rate{0.0, 0.0};
    for (int f = 0; f < 2; ++f) {
      const double tc = std::clamp(t, 0.0, duration);
      contact[f] = ref.contacts.foot_contact(f, tc);
      if (contact[f] || t > duration) continue;
      for (const retarget::ContactPhase& phase : ref.contacts.phases[f]) {
        if (phase.stance || tc < phase.start || tc >= phase.end) continue;
        const double span = phase.end - phase.start;
        // A swing running into the end of the clip never lands; hold it.
        if (span > 1e-9 && phase.end < duration - 1e-9)
          rate[f] = swing_vertical_rate((tc - phase.start) / span, span, params.swing_apex);
        break;
      }
    }
    ocp.contact.push_back(contact);
    ocp.swing_rate.push_back(rate);
  }
  return ocp;
}

VectorXd state_weights(const rbd::RobotModel& model, const OcpParams& params) {
  VectorXd w(state_dim(model));
  w.segment<3>(0).setConstant(params.w_momentum_lin);
  w.segment<3>(3).setConstant(params.w_momentum_ang);
  w.segment<3>(6).setConstant(params.w_base_pos);
  w.segment<3>(9).setConstant(params.w_base_rpy);
  w.tail(model.n_j()).setConstant(params.w_joint_pos);
  return w;
}

VectorXd input_weights(const rbd::RobotModel& model, const OcpParams& params) {
  VectorXd w(input_dim(model));
  w.head<12>().setConstant(params.w_wrench);
  w.tail(model.n_j()).setConstant(params.w_joint_rate);
  return w;
}

double swing_vertical_rate(double phase, double duration, double apex) {
  if (duration <= 0.0) return 0.0;
  const double s = std::clamp(phase, 0.0, 1.0);
  // Height apex * smoothstep(2s) up, apex * smoothstep(2 - 2s) down.
  const double t = s < 0.5 ? 2.0 * s : 2.0 - 2.0 * s;
  const double slope = 6.0 * t - 6.0 * t * t;
  return (s < 0.5 ? 1.0 : -1.0) * 2.0 * apex * slope / duration;
}

double friction_cone_margin(const Vector3d& force, double mu, double margin) {
  return mu * force[2] - std::hypot(force[0], force[1]) - margin;
}

double yaw_torque_lower(const Vector3d& force, const Vector3d& torque, double x, double y,
                        double mu) {
  return -mu * (x + y) * force[2] + std::abs(y * force[0] - mu * torque[0]) +
         std::abs(x * force[1] - mu * torque[1]);
}

double yaw_torque_upper(const Vector3d& force, const Vector3d& torque, double x, double y,
                        double mu) {
  return mu * (x + y) * force[2] - std::abs(y * force[0] + mu * torque[0]) -
         std::abs(x * force[1] + mu * torque[1]);
}

ConstraintValues evaluate_constraints(const rbd::RobotModel& model, const VectorXd& x,
                                      const VectorXd& u, const std::array<bool, 2>& contact,
                                      const std::array<double, 2>& swing_rate,
                                      const OcpParams& params) {
  const int nj = model.n_j();
  ConstraintValues out;
  out.equality.resize(3 * (contact[0] + contact[1]) + 7 * (!contact[0] + !contact[1]));
  out.inequality.resize(5 * (contact[0] + contact[1]) + 2 * nj);
  int eq = 0, in = 0;
  for (int f = 0; f < 2; ++f) {
    const Vector3d force = u.segment<3>(6 * f);
    const Vector3d torque = u.segment<3>(6 * f + 3);
    const Vector3d velocity = foot_velocity(model, x, u, f);
    if (contact[f]) {
      out.equality.segment<3>(eq) = velocity;
      eq += 3;
      out.inequality[in++] = friction_cone_margin(force, params.friction, params.cone_margin);
      out.inequality[in++] = model.feet[f].half_width_y * force[2] - std::abs(torque[0]);
      out.inequality[in++] = model.feet[f].half_length_x * force[2] - std::abs(torque[1]);
      out.inequality[in++] =
          torque[2] - yaw_torque_lower(force, torque, model.feet[f].half_length_x,
                                       model.feet[f].half_width_y, params.friction);
      out.inequality[in++] =
          yaw_torque_upper(force, torque, model.feet[f].half_length_x,
                           model.feet[f].half_width_y, params.friction) -
          torque[2];
    } else {
      out.equality[eq++] = velocity[2] - swing_rate[f];
      out.equality.segment<3>(eq) = force;
      out.equality.segment<3>(eq + 3) = torque;
      eq += 6;
    }
  }
  for (int j = 0; j < nj; ++j) {
    const double qd = u[12 + j];
    out.inequality[in++] = qd + model.joints[j].velocity_limit;
    out.inequality[in++] = model.joints[j].velocity_limit - qd;
  }
  return out;
}

}  // namespace mimic::nmpc
