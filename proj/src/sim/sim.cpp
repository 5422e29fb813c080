#include "mimic/sim/sim.hpp"

#include <cmath>
#include <sstream>

#include "mimic/rbd/dynamics.hpp"
#include "mimic/rbd/kinematics.hpp"

namespace mimic::sim {
namespace {

// Trapezoid ramps over the first and last 10% of the event; the plateau is
// scaled so the impulse matches a constant profile of the same force.
constexpr double kRampFraction = 0.1;

}  // namespace

Eigen::Vector3d PushEvent::force_at(double t) const {
  const double s = t - start;
  if (s < 0.0 || s >= duration) return Eigen::Vector3d::Zero();
  if (profile == Profile::constant) return force;
  const double ramp = kRampFraction * duration;
  const double plateau_scale = 1.0 / (1.0 - kRampFraction);
  double shape = 1.0;
  if (s < ramp)
    shape = s / ramp;
  else if (s > duration - ramp)
    shape = (duration - s) / ramp;
  return plateau_scale * shape * force;
}

double PushEvent::impulse() const { return force.norm() * duration; }

SimState make_sim_state(const rbd::RobotModel& model, const rbd::JointConfiguration& q) {
  SimState state;
  state.q = q;
  state.nu = Eigen::VectorXd::Zero(model.nv());
  return state;
}

SimState sim_step(const rbd::RobotModel& model, const SimState& state,
                  const Eigen::VectorXd& tau, const std::vector<PushEvent>& pushes, double dt,
                  const SimParams& params) {
  if (!(dt > 0.0) || dt > 0.005) throw SimError("sim: dt must lie in (0, 0.005]");
  if (tau.size() != model.n_j()) throw SimError("sim: torque dimension mismatch");

  const auto fk = rbd::forward_kinematics(model, state.q);
  const auto dyn = rbd::joint_space_dynamics(model, state.q, state.nu);

  Eigen::VectorXd force_gen = Eigen::VectorXd::Zero(model.nv());
  force_gen.tail(model.n_j()) = tau;

  SimState next = state;

  // Pushes act at the base origin.
  Eigen::Vector3d push = Eigen::Vector3d::Zero();
  for (const auto& event : pushes) push += event.force_at(state.time);
  force_gen.head<3>() += push;
  next.external_impulse += push.norm() * dt;

  // Ground contact at the sole corners. The stiff spring-damper is handled
  // linearly implicitly (force linearized in the end-of-step velocity, with
  // the stiffness folded in as dt * kp extra damping), which keeps the 1 kHz
  // step stable despite the small effective mass at a foot corner. Sticking
  // tangential forces are implicit too; sliding ones are a constant friction
  // force at the cone bound.
  struct Corner {
    Eigen::Matrix<double, 3, Eigen::Dynamic> jac;  // world-point Jacobian
    Eigen::Vector3d force_expl;                    // force at the current velocity
    Eigen::Vector3d damping;                       // per-axis implicit coefficients
    int foot;
    bool active;
  };
  std::vector<Corner> corners;
  for (int f = 0; f < 2; ++f) {
    const int frame = model.foot_frame(f);
    const Eigen::MatrixXd jac6 = rbd::frame_jacobian(model, fk, frame);
    const Eigen::Vector3d p_sole = fk.frame_pos(model, frame);
    const Eigen::Matrix3d r_sole = fk.frame_rot(model, frame);
    for (int cx = -1; cx <= 1; cx += 2) {
      for (int cy = -1; cy <= 1; cy += 2) {
        const Eigen::Vector3d arm =
            r_sole * Eigen::Vector3d(cx * model.feet[f].half_length_x,
                                     cy * model.feet[f].half_width_y, 0.0);
        const Eigen::Vector3d p = p_sole + arm;
        if (p.z() >= 0.0) continue;
        Corner c;
        c.jac = jac6.topRows<3>() - rbd::skew<double>(arm) * jac6.bottomRows<3>();
        const Eigen::Vector3d v = c.jac * state.nu;
        const double d_n = params.contact_kd + dt * params.contact_kp;
        const double fz_expl = -params.contact_kp * p.z() - d_n * v.z();
        c.damping = Eigen::Vector3d(params.contact_kt, params.contact_kt, d_n);
        c.force_expl = Eigen::Vector3d(-params.contact_kt * v.x(),
                                       -params.contact_kt * v.y(), fz_expl);
        c.foot = f;
        c.active = true;
        corners.push_back(std::move(c));
      }
    }
  }

  Eigen::VectorXd delta_nu = Eigen::VectorXd::Zero(model.nv());
  next.foot_force = {Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
  for (int pass = 0; pass < 4; ++pass) {
    Eigen::MatrixXd lhs = dyn.mass_matrix;
    Eigen::VectorXd rhs = force_gen - dyn.bias;
    for (const Corner& c : corners) {
      if (!c.active) continue;
      lhs += dt * c.jac.transpose() * c.damping.asDiagonal() * c.jac;
      rhs += c.jac.transpose() * c.force_expl;
    }
    delta_nu = dt * lhs.llt().solve(rhs);

    bool adjusted = false;
    next.foot_force = {Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
    for (Corner& c : corners) {
      if (!c.active) continue;
      Eigen::Vector3d force = c.force_expl - c.damping.asDiagonal() * (c.jac * delta_nu);
      if (force.z() < 0.0) {  // separating corner: the ground cannot pull
        c.active = false;
        adjusted = true;
        continue;
      }
      const double tangent = force.head<2>().norm();
      const double limit = params.friction * force.z();
      if (tangent > limit + 1e-9) {
        // Sliding: shrink the viscous law onto the cone. The force keeps
        // opposing the end-of-step velocity, so it still only dissipates.
        const double scale = limit / tangent;
        c.damping.head<2>() *= scale;
        c.force_expl.head<2>() *= scale;
        adjusted = true;
        force.head<2>() *= scale;
      }
      next.foot_force[c.foot] += force;
    }
    if (!adjusted) break;
  }

  const Eigen::VectorXd nudot = delta_nu / dt;

  // Velocities first; positions advance with the velocity midpoint, which is
  // exact for constant acceleration (free fall) and as dissipative as the
  // plain semi-implicit update in contact.
  next.nu = state.nu + dt * nudot;
  const Eigen::VectorXd nu_mid = 0.5 * (state.nu + next.nu);
  next.q.base_position += dt * nu_mid.head<3>();
  next.q.base_rpy +=
      dt * rbd::euler_rate_map_inverse<double>(state.q.base_rpy) * nu_mid.segment<3>(3);
  next.q.joint_angles += dt * nu_mid.tail(model.n_j());
  next.time = state.time + dt;

  if (!next.nu.allFinite() || !next.q.joint_angles.allFinite() ||
      !next.q.base_position.allFinite() || !next.q.base_rpy.allFinite()) {
    std::ostringstream what;
    what << "sim: state became non-finite at t = " << next.time
         << " (|nu| = " << state.nu.lpNorm<Eigen::Infinity>()
         << ", |tau| = " << tau.lpNorm<Eigen::Infinity>() << ")";
    throw SimError(what.str());
  }
  return next;
}

FallCheck detect_fall(const rbd::RobotModel& model, const SimState& state) {
  // Nominal bent-knee standing puts the base at roughly 57% of total height.
  const double nominal_base = 0.567 * model.height;
  if (state.q.base_position.z() < 0.6 * nominal_base) return {true, "base height"};
  if (std::abs(state.q.base_rpy[0]) > 0.8 || std::abs(state.q.base_rpy[1]) > 0.8)
    return {true, "orientation"};
  const auto fk = rbd::forward_kinematics(model, state.q);
  for (size_t i = 0; i < model.links.size(); ++i) {
    const int link = static_cast<int>(i);
    if (link == model.feet[0].link || link == model.feet[1].link) continue;
    if (!model.links[i].capsule) continue;
    const auto& cap = *model.links[i].capsule;
    const double z0 = (fk.pos[i] + fk.rot[i] * cap.p0).z();
    const double z1 = (fk.pos[i] + fk.rot[i] * cap.p1).z();
    if (std::min(z0, z1) - cap.radius < 0.0) return {true, "body contact"};
  }
  return {false, ""};
}

}  // namespace mimic::sim
