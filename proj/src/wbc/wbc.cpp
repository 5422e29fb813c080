#include "mimic/wbc/wbc.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include "mimic/nmpc/centroidal.hpp"
#include "mimic/rbd/dynamics.hpp"
#include "mimic/rbd/kinematics.hpp"

namespace mimic::wbc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double wrap_angle(double a) { return std::remainder(a, 2.0 * M_PI); }

// d(A)/dt * nu by central differences along the configuration flow.
Eigen::Matrix<double, 6, 1> momentum_matrix_drift(const rbd::RobotModel& model,
                                                  const rbd::JointConfiguration& q,
                                                  const Eigen::VectorXd& nu) {
  const Eigen::Vector3d rpy_dot =
      rbd::euler_rate_map_inverse<double>(q.base_rpy) * nu.segment<3>(3);
  const double eps = 1e-6;
  rbd::JointConfiguration plus = q, minus = q;
  plus.base_position += eps * nu.head<3>();
  plus.base_rpy += eps * rpy_dot;
  plus.joint_angles += eps * nu.tail(model.n_j());
  minus.base_position -= eps * nu.head<3>();
  minus.base_rpy -= eps * rpy_dot;
  minus.joint_angles -= eps * nu.tail(model.n_j());
  const auto fk_p = rbd::forward_kinematics(model, plus);
  const auto fk_m = rbd::forward_kinematics(model, minus);
  const Eigen::MatrixXd a_p = rbd::centroidal_momentum_matrix(model, fk_p);
  const Eigen::MatrixXd a_m = rbd::centroidal_momentum_matrix(model, fk_m);
  return ((a_p - a_m) / (2.0 * eps)) * nu;
}

// Joints on the kinematic chain from a foot to the root.
void mark_chain_joints(const rbd::RobotModel& model, int foot, std::vector<bool>& mask) {
  int walk = model.feet[foot].link;
  while (model.links[walk].parent >= 0) {
    mask[model.links[walk].joint] = true;
    walk = model.links[walk].parent;
  }
}

}  // namespace

WbcProblem build_wbc_qp(const rbd::RobotModel& model, const rbd::JointConfiguration& q,
                        const Eigen::VectorXd& nu, const Eigen::VectorXd& x_des,
                        const Eigen::VectorXd& u_des, const std::array<bool, 2>& contact,
                        const WbcParams& params) {
  const int nj = model.n_j();
  const int nv = model.nv();

  WbcProblem out;
  out.contact = contact;
  out.n_contacts = (contact[0] ? 1 : 0) + (contact[1] ? 1 : 0);
  out.n_j = nj;
  if (out.n_contacts == 0) return out;  // flight is not supported
  out.valid = true;

  const int n = nv + 6 * out.n_contacts + nj;
  const int f_off = out.wrench_offset();
  const int t_off = out.torque_offset();

  const auto fk = rbd::forward_kinematics(model, q);
  const auto dyn = rbd::joint_space_dynamics(model, q, nu);
  Eigen::MatrixXd a_cmm;
  const rbd::CentroidalState cs = rbd::centroidal_momentum(model, q, nu, &a_cmm);
  const Eigen::Matrix<double, 6, 1> a_drift = momentum_matrix_drift(model, q, nu);

  // ---- hard constraints -------------------------------------------------
  const int n_eq = nv + 6 * out.n_contacts;
  Eigen::MatrixXd a_eq = Eigen::MatrixXd::Zero(n_eq, n);
  Eigen::VectorXd b_eq = Eigen::VectorXd::Zero(n_eq);

  // Dynamics: M nudot + bias = S' tau + sum J' F.
  a_eq.topLeftCorner(nv, nv) = dyn.mass_matrix;
  a_eq.block(6, t_off, nj, nj) = -Eigen::MatrixXd::Identity(nj, nj);
  b_eq.head(nv) = -dyn.bias;

  std::vector<Eigen::MatrixXd> jac(2);
  int row = nv;
  int slot = 0;
  for (int f = 0; f < 2; ++f) {
    if (!contact[f]) continue;
    jac[f] = rbd::frame_jacobian(model, fk, model.foot_frame(f));
    a_eq.block(0, f_off + 6 * slot, nv, 6) = -jac[f].transpose();
    // Stance sole pinned: J nudot = -Jdot nu.
    a_eq.block(row, 0, 6, nv) = jac[f];
    b_eq.segment<6>(row) = -rbd::frame_bias_acceleration(model, fk, nu, model.foot_frame(f));
    row += 6;
    ++slot;
  }

  // Wrench cone (inner pyramid + center-of-pressure + twist window, world
  // frame, flat ground) and torque limits.
  const int n_in = 11 * out.n_contacts + nj;
  Eigen::MatrixXd a_in = Eigen::MatrixXd::Zero(n_in, n);
  Eigen::VectorXd lower = Eigen::VectorXd::Constant(n_in, -kInf);
  Eigen::VectorXd upper = Eigen::VectorXd::Constant(n_in, kInf);
  const double c1 = params.friction / std::sqrt(2.0);
  row = 0;
  slot = 0;
  for (int f = 0; f < 2; ++f) {
    if (!contact[f]) continue;
    const int c = f_off + 6 * slot;
    const double x_half = model.feet[f].half_length_x;
    const double y_half = model.feet[f].half_width_y;
    const double tz = params.friction * (x_half + y_half);
    auto one_sided = [&](int var, double fz_coeff, bool is_upper) {
      a_in(row, c + var) = 1.0;
      a_in(row, c + 2) = fz_coeff;
      (is_upper ? upper : lower)(row) = 0.0;
      ++row;
    };
    one_sided(0, -c1, true);   //  fx <= c1 fz
    one_sided(0, c1, false);   // -fx <= c1 fz
    one_sided(1, -c1, true);
    one_sided(1, c1, false);
    one_sided(3, -y_half, true);  // |tau_x| <= half_width * fz
    one_sided(3, y_half, false);
    one_sided(4, -x_half, true);  // |tau_y| <= half_length * fz
    one_sided(4, x_half, false);
    one_sided(5, -tz, true);      // |tau_z| <= mu (X + Y) fz
    one_sided(5, tz, false);
    a_in(row, c + 2) = 1.0;  // fz >= 0
    lower(row) = 0.0;
    ++row;
    ++slot;
  }
  for (int j = 0; j < nj; ++j) {
    a_in(row, t_off + j) = 1.0;
    lower(row) = -model.joints[j].torque_limit;
    upper(row) = model.joints[j].torque_limit;
    ++row;
  }

  // ---- tracking costs ----------------------------------------------------
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  auto add_task = [&](const Eigen::MatrixXd& c_nudot, const Eigen::VectorXd& d, double w) {
    h.topLeftCorner(nv, nv) += w * c_nudot.transpose() * c_nudot;
    g.head(nv) -= w * c_nudot.transpose() * d;
  };

  // Centroidal momentum rate toward the plan, with momentum / base-pose
  // feedback (rates are mass-normalized in the reduced model).
  const Eigen::VectorXd xdot_des = nmpc::centroidal_dynamics(model, x_des, u_des, contact);
  Eigen::Matrix<double, 6, 1> hdot_cmd = xdot_des.head<6>();
  hdot_cmd += params.kp_momentum * (x_des.head<6>() - cs.h);
  hdot_cmd.head<3>() += params.kp_base_pos * (x_des.segment<3>(6) - q.base_position);
  for (int i = 0; i < 3; ++i)
    hdot_cmd[3 + i] += params.kp_base_rpy * wrap_angle(x_des[9 + i] - q.base_rpy[i]);
  add_task(a_cmm, model.total_mass * hdot_cmd - a_drift, params.w_momentum);

  // Swing feet: track the planned sole position/velocity in acceleration.
  const rbd::JointConfiguration q_des{x_des.segment<3>(6), x_des.segment<3>(9),
                                      x_des.tail(nj)};
  for (int f = 0; f < 2; ++f) {
    if (contact[f]) continue;
    const auto fk_des = rbd::forward_kinematics(model, q_des);
    const Eigen::MatrixXd j = rbd::frame_jacobian(model, fk, model.foot_frame(f));
    const Eigen::Vector3d p = fk.frame_pos(model, model.foot_frame(f));
    const Eigen::Vector3d p_des = fk_des.frame_pos(model, model.foot_frame(f));
    const Eigen::Vector3d v = (j * nu).head<3>();
    const Eigen::Vector3d v_des = nmpc::foot_velocity(model, x_des, u_des, f);
    const Eigen::Vector3d a_cmd =
        params.kp_swing * (p_des - p) + params.kd_swing * (v_des - v);
    const Eigen::Vector3d bias =
        rbd::frame_bias_acceleration(model, fk, nu, model.foot_frame(f)).head<3>();
    add_task(j.topRows<3>(), a_cmd - bias, params.w_swing);
  }

  // Posture: joint accelerations toward the plan, skipping stance chains
  // (those joints are governed by the contact constraint and the centroidal
  // task; penalizing them would fight every commanded base motion).
  std::vector<bool> stance_chain(nj, false);
  for (int f = 0; f < 2; ++f)
    if (contact[f]) mark_chain_joints(model, f, stance_chain);
  for (int j = 0; j < nj; ++j) {
    if (stance_chain[j]) continue;
    const double qdd_cmd = params.kp_joint * (x_des[12 + j] - q.joint_angles[j]) +
                           params.kd_joint * (u_des[12 + j] - nu[6 + j]);
    h(6 + j, 6 + j) += params.w_joint_acc;
    g[6 + j] -= params.w_joint_acc * qdd_cmd;
  }

  // Contact wrenches toward the plan.
  slot = 0;
  for (int f = 0; f < 2; ++f) {
    if (!contact[f]) continue;
    for (int i = 0; i < 6; ++i) {
      h(f_off + 6 * slot + i, f_off + 6 * slot + i) += params.w_wrench;
      g[f_off + 6 * slot + i] -= params.w_wrench * u_des[6 * f + i];
    }
    ++slot;
  }

  // Tikhonov floor; torques pulled toward the quasi-static solution so the
  // floor is bias-free at equilibrium.
  Eigen::VectorXd tau_ref = dyn.bias.tail(nj);
  slot = 0;
  for (int f = 0; f < 2; ++f) {
    if (!contact[f]) continue;
    tau_ref -= (jac[f].transpose() * u_des.segment<6>(6 * f)).tail(nj);
    ++slot;
  }
  h.topLeftCorner(nv, nv) += params.reg * Eigen::MatrixXd::Identity(nv, nv);
  h.block(t_off, t_off, nj, nj) += params.reg * Eigen::MatrixXd::Identity(nj, nj);
  g.segment(t_off, nj) -= params.reg * tau_ref;

  out.qp = qp::QuadraticProgram{std::move(h), std::move(g), std::move(a_eq), std::move(b_eq),
                                std::move(a_in), std::move(lower), std::move(upper)};
  return out;
}

TorqueCommand solve_wbc(const rbd::RobotModel& model, const WbcProblem& problem,
                        const TorqueCommand* previous) {
  const auto t0 = std::chrono::steady_clock::now();
  TorqueCommand out;
  out.tau = Eigen::VectorXd::Zero(model.n_j());
  out.nudot = Eigen::VectorXd::Zero(model.nv());
  out.contact_wrenches = Eigen::VectorXd::Zero(6 * problem.n_contacts);

  bool solved = false;
  if (problem.valid) {
    const qp::QpSolution sol = qp::solve_qp(problem.qp, nullptr, 1e-8);
    if (sol.status == qp::QpStatus::optimal) {
      out.nudot = sol.x.head(model.nv());
      out.contact_wrenches = sol.x.segment(problem.wrench_offset(), 6 * problem.n_contacts);
      out.tau = sol.x.tail(model.n_j());
      for (int j = 0; j < model.n_j(); ++j) {
        const double lim = model.joints[j].torque_limit;
        out.tau[j] = std::clamp(out.tau[j], -lim, lim);
      }
      solved = true;
    }
  }
  if (!solved && previous != nullptr) out.tau = previous->tau;
  out.ok = solved;
  out.solve_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace mimic::wbc
