#include "mimic/nmpc/centroidal.hpp"

namespace mimic::nmpc {
namespace {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

struct Evaluation {
  rbd::FkResult fk;
  Vector3d com;
  MatrixXd momentum_matrix;                 // 6 x (6 + n_j), unnormalized
  Eigen::PartialPivLU<Eigen::Matrix<double, 6, 6>> base_lu;
  VectorXd nu;                              // [v_B; w_B; qdot_j]
};

Evaluation evaluate(const rbd::RobotModel& model, const VectorXd& x, const VectorXd& u) {
  const int nj = model.n_j();
  Evaluation ev;
  rbd::JointConfiguration config;
  config.base_position = x.segment<3>(6);
  config.base_rpy = x.segment<3>(9);
  config.joint_angles = x.tail(nj);
  ev.fk = rbd::forward_kinematics(model, config);
  ev.com = rbd::com_position(model, ev.fk);
  ev.momentum_matrix = rbd::centroidal_momentum_matrix<double>(model, ev.fk);
  ev.base_lu.compute(ev.momentum_matrix.leftCols<6>());
  const VectorXd qd = u.tail(nj);
  const Eigen::Matrix<double, 6, 1> rhs =
      model.total_mass * x.head<6>() - ev.momentum_matrix.rightCols(nj) * qd;
  ev.nu.resize(6 + nj);
  ev.nu.head<6>() = ev.base_lu.solve(rhs);
  ev.nu.tail(nj) = qd;
  return ev;
}

// Base position and orientation rates implied by the momentum state.
Eigen::Matrix<double, 6, 1> base_rates(const Evaluation& ev, const Vector3d& rpy) {
  Eigen::Matrix<double, 6, 1> out;
  out.head<3>() = ev.nu.head<3>();
  out.tail<3>() = rbd::euler_rate_map_inverse<double>(rpy) * ev.nu.segment<3>(3);
  return out;
}

// World linear velocity of a sole without forming the frame Jacobian.
Vector3d sole_velocity_of(const rbd::RobotModel& model, const Evaluation& ev, int foot) {
  const Vector3d p = ev.fk.frame_pos(model, model.foot_frame(foot));
  Vector3d v = ev.nu.head<3>() + ev.nu.segment<3>(3).cross(Vector3d(p - ev.fk.pos[0]));
  int walk = model.feet[foot].link;
  while (model.links[walk].parent >= 0) {
    v += ev.nu[6 + model.links[walk].joint] * ev.fk.axis[walk].cross(Vector3d(p - ev.fk.pos[walk]));
    walk = model.links[walk].parent;
  }
  return v;
}

}  // namespace

VectorXd centroidal_dynamics(const rbd::RobotModel& model, const VectorXd& x, const VectorXd& u,
                             const std::array<bool, 2>& contact) {
  const int nj = model.n_j();
  const Evaluation ev = evaluate(model, x, u);

  Vector3d force_sum = Vector3d::Zero();
  Vector3d moment_sum = Vector3d::Zero();
  for (int f = 0; f < 2; ++f) {
    if (!contact[f]) continue;
    const Vector3d force = u.segment<3>(6 * f);
    const Vector3d torque = u.segment<3>(6 * f + 3);
    const Vector3d sole = ev.fk.frame_pos(model, model.foot_frame(f));
    force_sum += force;
    moment_sum += (sole - ev.com).cross(force) + torque;
  }

  VectorXd xdot(x.size());
  xdot.segment<3>(0) = force_sum / model.total_mass + Vector3d(0, 0, -rbd::kGravity);
  xdot.segment<3>(3) = moment_sum / model.total_mass;
  xdot.segment<6>(6) = base_rates(ev, x.segment<3>(9));
  xdot.tail(nj) = u.tail(nj);
  return xdot;
}

StageLinearization linearize_stage(const rbd::RobotModel& model, const VectorXd& x,
                                   const VectorXd& u, const std::array<bool, 2>& contact) {
  const int nj = model.n_j();
  const int nx = 12 + nj;
  const double mass = model.total_mass;
  StageLinearization out;
  out.a = MatrixXd::Zero(nx, nx);
  out.b = MatrixXd::Zero(nx, nx);
  out.sole_velocity_x = MatrixXd::Zero(6, nx);
  out.sole_velocity_u = MatrixXd::Zero(6, nx);

  const Evaluation ev = evaluate(model, x, u);
  const Matrix3d euler_map = rbd::euler_rate_map<double>(x.segment<3>(9));
  const Eigen::Matrix<double, 6, 6> base_inv = ev.base_lu.inverse();
  const MatrixXd dnu_dqd = -base_inv * ev.momentum_matrix.rightCols(nj);

  // Position sensitivity of the com w.r.t. (theta_B, q_j), from the momentum
  // matrix linear rows: com velocity = (A_lin / m) * nu and w_B = E * rpy_dot.
  MatrixXd dcom(3, 3 + nj);
  dcom.leftCols<3>() = ev.momentum_matrix.block(0, 3, 3, 3) * euler_map / mass;
  dcom.rightCols(nj) = ev.momentum_matrix.block(0, 6, 3, nj) / mass;

  for (int f = 0; f < 2; ++f) {
    const MatrixXd jac = rbd::frame_jacobian(model, ev.fk, model.foot_frame(f)).topRows<3>();
    out.sole_velocity.segment<3>(3 * f) = jac * ev.nu;
    out.sole_velocity_x.block(3 * f, 0, 3, 6) = jac.leftCols<6>() * (mass * base_inv);
    out.sole_velocity_u.block(3 * f, 12, 3, nj) =
        jac.rightCols(nj) + jac.leftCols<6>() * dnu_dqd;

    if (!contact[f]) continue;
    const Vector3d force = u.segment<3>(6 * f);
    const Vector3d sole = ev.fk.frame_pos(model, model.foot_frame(f));

    out.b.block<3, 3>(0, 6 * f) = Matrix3d::Identity() / mass;
    out.b.block<3, 3>(3, 6 * f) = rbd::skew<double>(sole - ev.com) / mass;
    out.b.block<3, 3>(3, 6 * f + 3) = Matrix3d::Identity() / mass;

    // d/ds [(p - com) x f] = -skew(f) * (dp/ds - dcom/ds); the base-position
    // sensitivity cancels exactly, so only (theta_B, q_j) columns remain.
    MatrixXd dsole(3, 3 + nj);
    dsole.leftCols<3>() = jac.middleCols<3>(3) * euler_map;
    dsole.rightCols(nj) = jac.rightCols(nj);
    out.a.block(3, 9, 3, 3 + nj) -= rbd::skew<double>(force) * (dsole - dcom) / mass;
  }

  // Base rates: analytic in h and qdot through the momentum solve ...
  const Eigen::Matrix<double, 6, 6> dnu_dh = mass * base_inv;
  const Matrix3d euler_inv = rbd::euler_rate_map_inverse<double>(x.segment<3>(9));
  out.a.block(6, 0, 3, 6) = dnu_dh.topRows<3>();
  out.a.block(9, 0, 3, 6) = euler_inv * dnu_dh.bottomRows<3>();
  out.b.block(6, 12, 3, nj) = dnu_dqd.topRows(3);
  out.b.block(9, 12, 3, nj) = euler_inv * dnu_dqd.bottomRows(3);

  // ... and central differences over the kinematic coordinates (theta_B, q_j)
  // for the base rates and sole velocities alike.
  const double step = 1e-6;
  VectorXd xp = x, xm = x;
  for (int k = 0; k < 3 + nj; ++k) {
    const int col = 9 + k;
    xp[col] = x[col] + step;
    xm[col] = x[col] - step;
    const Evaluation evp = evaluate(model, xp, u);
    const Evaluation evm = evaluate(model, xm, u);
    out.a.block(6, col, 6, 1) =
        (base_rates(evp, xp.segment<3>(9)) - base_rates(evm, xm.segment<3>(9))) / (2 * step);
    for (int f = 0; f < 2; ++f)
      out.sole_velocity_x.block(3 * f, col, 3, 1) =
          (sole_velocity_of(model, evp, f) - sole_velocity_of(model, evm, f)) / (2 * step);
    xp[col] = x[col];
    xm[col] = x[col];
  }

  out.b.block(12, 12, nj, nj).setIdentity();
  return out;
}

void linearize_dynamics(const rbd::RobotModel& model, const VectorXd& x, const VectorXd& u,
                        const std::array<bool, 2>& contact, MatrixXd& a, MatrixXd& b) {
  StageLinearization stage = linearize_stage(model, x, u, contact);
  a = std::move(stage.a);
  b = std::move(stage.b);
}

VectorXd integrate_rk4(const rbd::RobotModel& model, const VectorXd& x, const VectorXd& u,
                       const std::array<bool, 2>& contact, double dt) {
  const VectorXd k1 = centroidal_dynamics(model, x, u, contact);
  const VectorXd k2 = centroidal_dynamics(model, x + 0.5 * dt * k1, u, contact);
  const VectorXd k3 = centroidal_dynamics(model, x + 0.5 * dt * k2, u, contact);
  const VectorXd k4 = centroidal_dynamics(model, x + dt * k3, u, contact);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void discretize_rk4(const MatrixXd& a, const MatrixXd& b, double dt, MatrixXd& ad, MatrixXd& bd) {
  const int n = static_cast<int>(a.rows());
  const MatrixXd z = dt * a;
  const MatrixXd z2 = z * z;
  ad = MatrixXd::Identity(n, n) + z + z2 / 2.0 + z2 * z / 6.0 + z2 * z2 / 24.0;
  bd = dt * (MatrixXd::Identity(n, n) + z / 2.0 + z2 / 6.0 + z2 * z / 24.0) * b;
}

Vector3d foot_velocity(const rbd::RobotModel& model, const VectorXd& x, const VectorXd& u,
                       int foot, VectorXd* nu_out) {
  const Evaluation ev = evaluate(model, x, u);
  if (nu_out != nullptr) *nu_out = ev.nu;
  return sole_velocity_of(model, ev, foot);
}

}  // namespace mimic::nmpc
