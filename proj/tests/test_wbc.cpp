#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <random>

#include "helpers.hpp"
#include "mimic/nmpc/centroidal.hpp"
#include "mimic/rbd/dynamics.hpp"
#include "mimic/rbd/kinematics.hpp"
#include "mimic/wbc/wbc.hpp"

using namespace mimic;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

int joint_id(const rbd::RobotModel& model, const std::string& name) {
  for (int j = 0; j < model.n_j(); ++j)
    if (model.joints[j].name == name) return j;
  REQUIRE(false);
  return -1;
}

// Knees-bent standing state with both soles flat on the ground.
VectorXd standing_state(const rbd::RobotModel& model) {
  VectorXd x = VectorXd::Zero(nmpc::state_dim(model));
  const double bend = 0.2;
  for (const char* side : {"l", "r"}) {
    x[12 + joint_id(model, std::string(side) + "_hip_pitch")] = -bend;
    x[12 + joint_id(model, std::string(side) + "_knee_pitch")] = 2 * bend;
    x[12 + joint_id(model, std::string(side) + "_ankle_pitch")] = -bend;
  }
  rbd::JointConfiguration config;
  config.joint_angles = x.tail(model.n_j());
  const auto fk = rbd::forward_kinematics(model, config);
  x[8] = -fk.frame_pos(model, model.foot_frame(0))[2];
  return x;
}

rbd::JointConfiguration config_of(const rbd::RobotModel& model, const VectorXd& x) {
  return {x.segment<3>(6), x.segment<3>(9), x.tail(model.n_j())};
}

// Supporting wrenches producing net force m * a_lin and zero moment about the
// com, split evenly between the feet.
VectorXd supporting_input(const rbd::RobotModel& model, const VectorXd& x,
                          const Vector3d& com_accel = Vector3d::Zero()) {
  VectorXd u = VectorXd::Zero(nmpc::input_dim(model));
  const auto fk = rbd::forward_kinematics(model, config_of(model, x));
  const Vector3d com = rbd::com_position(model, fk);
  const Vector3d force =
      0.5 * model.total_mass * (Vector3d(0, 0, rbd::kGravity) + com_accel);
  Vector3d moment = Vector3d::Zero();
  for (int f = 0; f < 2; ++f) {
    u.segment<3>(6 * f) = force;
    moment += (Vector3d(fk.frame_pos(model, model.foot_frame(f))) - com).cross(force);
  }
  u.segment<3>(3) = -0.5 * moment;
  u.segment<3>(9) = -0.5 * moment;
  return u;
}

// Quasi-static joint torques realizing the given contact wrenches at rest.
VectorXd quasi_static_torques(const rbd::RobotModel& model, const VectorXd& x,
                              const VectorXd& u) {
  const auto config = config_of(model, x);
  const auto fk = rbd::forward_kinematics(model, config);
  const VectorXd zero = VectorXd::Zero(model.nv());
  VectorXd tau_gen = rbd::inverse_dynamics(model, config, zero, zero);
  for (int f = 0; f < 2; ++f)
    tau_gen -= rbd::frame_jacobian(model, fk, model.foot_frame(f)).transpose() *
               u.segment<6>(6 * f);
  return tau_gen.tail(model.n_j());
}

}  // namespace

TEST_CASE("wbc: equilibrium torques match the inverse-dynamics oracle") {
  const auto model = test::reference_model();
  const VectorXd x = standing_state(model);
  const VectorXd u = supporting_input(model, x);
  const VectorXd nu = VectorXd::Zero(model.nv());
  const auto problem =
      wbc::build_wbc_qp(model, config_of(model, x), nu, x, u, {true, true});
  REQUIRE(problem.valid);
  const auto cmd = wbc::solve_wbc(model, problem);
  REQUIRE(cmd.ok);

  const VectorXd tau_oracle = quasi_static_torques(model, x, u);
  CHECK((cmd.tau - tau_oracle).lpNorm<Eigen::Infinity>() < 1e-4);
  CHECK(cmd.nudot.lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK((cmd.contact_wrenches.head<6>() - u.head<6>()).lpNorm<Eigen::Infinity>() < 1e-4);

  // Dynamics is a hard equality: residual at the solution is solver-tight.
  const auto dyn = rbd::joint_space_dynamics(model, config_of(model, x), nu);
  const auto fk = rbd::forward_kinematics(model, config_of(model, x));
  VectorXd residual = dyn.mass_matrix * cmd.nudot + dyn.bias;
  residual.tail(model.n_j()) -= cmd.tau;
  for (int f = 0; f < 2; ++f)
    residual -= rbd::frame_jacobian(model, fk, model.foot_frame(f)).transpose() *
                cmd.contact_wrenches.segment<6>(6 * f);
  CHECK(residual.lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("wbc: commanded upward com acceleration obeys Newton's law") {
  const auto model = test::reference_model();
  const VectorXd x = standing_state(model);
  const VectorXd u = supporting_input(model, x, Vector3d(0, 0, 0.5));
  const VectorXd nu = VectorXd::Zero(model.nv());
  const auto problem =
      wbc::build_wbc_qp(model, config_of(model, x), nu, x, u, {true, true});
  const auto cmd = wbc::solve_wbc(model, problem);
  REQUIRE(cmd.ok);
  const double sum_fz = cmd.contact_wrenches[2] + cmd.contact_wrenches[8];
  CHECK(std::abs(sum_fz - model.total_mass * (rbd::kGravity + 0.5)) < 1e-3);
}

TEST_CASE("wbc: stance feet stay pinned while tracking a moving plan") {
  const auto model = test::reference_model();
  std::mt19937 rng(7);
  std::normal_distribution<double> nd(0.0, 0.05);
  VectorXd x = standing_state(model);
  VectorXd x_des = x;
  for (int j = 0; j < model.n_j(); ++j) x_des[12 + j] += 0.3 * nd(rng);
  x_des[6] += 0.02;
  const VectorXd u = supporting_input(model, x);
  VectorXd nu = VectorXd::Zero(model.nv());
  for (int i = 0; i < nu.size(); ++i) nu[i] = nd(rng);

  const auto config = config_of(model, x);
  const auto problem = wbc::build_wbc_qp(model, config, nu, x_des, u, {true, true});
  const auto cmd = wbc::solve_wbc(model, problem);
  REQUIRE(cmd.ok);

  const auto fk = rbd::forward_kinematics(model, config);
  for (int f = 0; f < 2; ++f) {
    const Eigen::Matrix<double, 6, 1> accel =
        rbd::frame_jacobian(model, fk, model.foot_frame(f)) * cmd.nudot +
        rbd::frame_bias_acceleration(model, fk, nu, model.foot_frame(f));
    CHECK(accel.lpNorm<Eigen::Infinity>() < 1e-6);
  }
}

TEST_CASE("wbc: contact wrenches stay inside the friction pyramid") {
  const auto model = test::reference_model();
  const wbc::WbcParams params;
  VectorXd x = standing_state(model);
  VectorXd x_des = x;
  // Ask for a hard lateral momentum surge; the cone must clamp it.
  x_des[0] += 5.0;
  x_des[1] -= 4.0;
  const VectorXd u = supporting_input(model, x);
  const auto problem = wbc::build_wbc_qp(model, config_of(model, x),
                                         VectorXd::Zero(model.nv()), x_des, u, {true, true});
  const auto cmd = wbc::solve_wbc(model, problem);
  REQUIRE(cmd.ok);
  const double slope = params.friction / std::sqrt(2.0);
  for (int c = 0; c < 2; ++c) {
    const auto w = cmd.contact_wrenches.segment<6>(6 * c);
    CHECK(w[2] >= -1e-9);
    CHECK(std::abs(w[0]) <= slope * w[2] + 1e-9);
    CHECK(std::abs(w[1]) <= slope * w[2] + 1e-9);
  }
  // The clamp is actually engaged in this scenario.
  const double fx = cmd.contact_wrenches[0] + cmd.contact_wrenches[6];
  CHECK(std::abs(fx) > 10.0);
}

TEST_CASE("wbc: torque limits clamp the solution") {
  auto model = test::reference_model();
  for (auto& joint : model.joints) joint.torque_limit = 1.0;
  const VectorXd x = standing_state(model);
  const VectorXd u = supporting_input(model, x);
  const auto problem = wbc::build_wbc_qp(model, config_of(model, x),
                                         VectorXd::Zero(model.nv()), x, u, {true, true});
  const auto cmd = wbc::solve_wbc(model, problem);
  REQUIRE(cmd.ok);
  // Gravity support needs tens of N*m at the knees, so the bound is active.
  CHECK(cmd.tau.lpNorm<Eigen::Infinity>() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(cmd.tau.lpNorm<Eigen::Infinity>() <= 1.0 + 1e-9);
}

TEST_CASE("wbc: removing a cost task never hurts the remaining tasks") {
  const auto model = test::reference_model();
  std::mt19937 rng(11);
  std::normal_distribution<double> nd(0.0, 0.05);
  VectorXd x = standing_state(model);
  VectorXd x_des = x;
  for (int j = 0; j < model.n_j(); ++j) x_des[12 + j] += nd(rng);
  x_des[0] += 0.3;
  x_des[7] -= 0.05;
  VectorXd u = supporting_input(model, x);
  u.segment<6>(6).setZero();  // right foot in swing
  VectorXd nu(model.nv());
  for (int i = 0; i < nu.size(); ++i) nu[i] = nd(rng);
  const std::array<bool, 2> contact{true, false};
  const auto config = config_of(model, x);

  auto solve_x = [&](const wbc::WbcParams& p) {
    const auto problem = wbc::build_wbc_qp(model, config, nu, x_des, u, contact, p);
    const auto sol = qp::solve_qp(problem.qp);
    REQUIRE(sol.status == qp::QpStatus::optimal);
    return sol.x;
  };

  const wbc::WbcParams base;
  const VectorXd with_all = solve_x(base);
  for (int task = 0; task < 4; ++task) {
    wbc::WbcParams reduced = base;
    (task == 0   ? reduced.w_momentum
     : task == 1 ? reduced.w_swing
     : task == 2 ? reduced.w_joint_acc
                 : reduced.w_wrench) = 0.0;
    const auto remaining = wbc::build_wbc_qp(model, config, nu, x_des, u, contact, reduced);
    const VectorXd without = solve_x(reduced);
    const double obj_without = 0.5 * without.dot(remaining.qp.H * without) +
                               remaining.qp.g.dot(without);
    const double obj_with = 0.5 * with_all.dot(remaining.qp.H * with_all) +
                            remaining.qp.g.dot(with_all);
    CHECK(obj_without <= obj_with + 1e-9 * std::abs(obj_with));
  }
}

TEST_CASE("wbc: flight is rejected and the previous command is kept") {
  const auto model = test::reference_model();
  const VectorXd x = standing_state(model);
  const VectorXd u = supporting_input(model, x);
  const auto problem = wbc::build_wbc_qp(model, config_of(model, x),
                                         VectorXd::Zero(model.nv()), x, u, {false, false});
  CHECK_FALSE(problem.valid);

  wbc::TorqueCommand previous;
  previous.tau = VectorXd::Constant(model.n_j(), 0.25);
  const auto cmd = wbc::solve_wbc(model, problem, &previous);
  CHECK_FALSE(cmd.ok);
  CHECK((cmd.tau - previous.tau).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("wbc: mean solve time stays under budget") {
  const auto model = test::reference_model();
  std::mt19937 rng(3);
  std::normal_distribution<double> nd(0.0, 0.02);
  const VectorXd x = standing_state(model);
  const VectorXd u = supporting_input(model, x);
  const int solves = 300;
  double total_ms = 0.0;
  for (int i = 0; i < solves; ++i) {
    VectorXd x_des = x;
    for (int j = 0; j < model.n_j(); ++j) x_des[12 + j] += nd(rng);
    VectorXd nu(model.nv());
    for (int k = 0; k < nu.size(); ++k) nu[k] = nd(rng);
    const auto problem =
        wbc::build_wbc_qp(model, config_of(model, x), nu, x_des, u, {true, true});
    const auto cmd = wbc::solve_wbc(model, problem);
    REQUIRE(cmd.ok);
    total_ms += cmd.solve_ms;
  }
  CHECK(total_ms / solves < 2.0);
}
