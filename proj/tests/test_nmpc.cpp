#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <random>

#include "helpers.hpp"
#include "mimic/nmpc/rti.hpp"
#include "mimic/qp/qp.hpp"

using namespace mimic;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

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
  config.base_position.setZero();
  config.base_rpy.setZero();
  config.joint_angles = x.tail(model.n_j());
  const auto fk = rbd::forward_kinematics(model, config);
  x[8] = -fk.frame_pos(model, model.foot_frame(0))[2];
  return x;
}

// Evenly split supporting wrench whose net force and moment about the com
// cancel gravity exactly.
VectorXd balanced_input(const rbd::RobotModel& model, const VectorXd& x) {
  VectorXd u = VectorXd::Zero(nmpc::input_dim(model));
  rbd::JointConfiguration config;
  config.base_position = x.segment<3>(6);
  config.base_rpy = x.segment<3>(9);
  config.joint_angles = x.tail(model.n_j());
  const auto fk = rbd::forward_kinematics(model, config);
  const Vector3d com = rbd::com_position(model, fk);
  const Vector3d force(0, 0, 0.5 * model.total_mass * rbd::kGravity);
  Vector3d moment = Vector3d::Zero();
  for (int f = 0; f < 2; ++f) {
    u.segment<3>(6 * f) = force;
    moment += (Vector3d(fk.frame_pos(model, model.foot_frame(f))) - com).cross(force);
  }
  u.segment<3>(3) = -0.5 * moment;
  u.segment<3>(9) = -0.5 * moment;
  return u;
}

retarget::ReferenceTrajectory standing_reference(const rbd::RobotModel& model,
                                                 double duration = 2.0) {
  retarget::ReferenceTrajectory ref;
  ref.frame_rate = 30.0;
  const int frames = static_cast<int>(duration * ref.frame_rate) + 1;
  const VectorXd x = standing_state(model);
  ref.states.assign(frames, x);
  ref.inputs.assign(frames, balanced_input(model, x));
  ref.contacts.frame_rate = ref.frame_rate;
  ref.contacts.contact.assign(frames, {true, true});
  ref.contacts.rebuild_phases();
  return ref;
}

// Standing clip whose right foot swings over [0.6 s, 1.0 s).
retarget::ReferenceTrajectory swing_reference(const rbd::RobotModel& model) {
  retarget::ReferenceTrajectory ref = standing_reference(model);
  for (int t = 18; t < 30; ++t) {
    ref.contacts.contact[t][1] = false;
    ref.inputs[t].segment<6>(6).setZero();
  }
  ref.contacts.rebuild_phases();
  return ref;
}

VectorXd random_mpc_state(const rbd::RobotModel& model, std::mt19937& rng) {
  std::normal_distribution<double> nd(0.0, 0.2);
  VectorXd x(nmpc::state_dim(model));
  for (int i = 0; i < x.size(); ++i) x[i] = nd(rng);
  x[8] += 0.85;
  x[10] *= 0.3;
  for (int j = 0; j < model.n_j(); ++j)
    x[12 + j] = std::clamp(x[12 + j], model.joints[j].lower, model.joints[j].upper);
  return x;
}

struct DenseLqr {
  qp::QuadraticProgram prob;
  int nx, nu, n;
};

// Stacked sparse-as-dense transcription of the same subproblem, variables
// z = [dx_1 .. dx_n, du_0 .. du_{n-1}], used as an independent oracle.
DenseLqr dense_transcription(const std::vector<nmpc::LqrStage>& stages, const MatrixXd& qn,
                             const VectorXd& qn_vec, const VectorXd& dx0) {
  DenseLqr d;
  d.n = static_cast<int>(stages.size());
  d.nx = static_cast<int>(stages[0].a.rows());
  d.nu = static_cast<int>(stages[0].b.cols());
  const int nz = d.n * (d.nx + d.nu);
  const auto xvar = [&](int k) { return (k - 1) * d.nx; };          // dx_k, k >= 1
  const auto uvar = [&](int k) { return d.n * d.nx + k * d.nu; };   // du_k

  d.prob.H = MatrixXd::Zero(nz, nz);
  d.prob.g = VectorXd::Zero(nz);
  int eq_rows = d.n * d.nx;
  for (const auto& st : stages) eq_rows += static_cast<int>(st.cu.rows());
  d.prob.A_eq = MatrixXd::Zero(eq_rows, nz);
  d.prob.b_eq = VectorXd::Zero(eq_rows);
  int in_rows = 0;
  for (const auto& st : stages) in_rows += static_cast<int>(st.g.rows());
  d.prob.A_in = MatrixXd::Zero(in_rows, nz);
  d.prob.lower = VectorXd::Constant(in_rows, -kInf);
  d.prob.upper = VectorXd::Zero(in_rows);

  int eq = 0, in = 0;
  for (int k = 0; k < d.n; ++k) {
    const auto& st = stages[k];
    const MatrixXd qxx = k + 1 < d.n ? stages[k + 1].qxx : qn;
    const VectorXd qx = k + 1 < d.n ? stages[k + 1].qx : qn_vec;
    d.prob.H.block(xvar(k + 1), xvar(k + 1), d.nx, d.nx) = qxx;
    d.prob.g.segment(xvar(k + 1), d.nx) = qx;
    d.prob.H.block(uvar(k), uvar(k), d.nu, d.nu) = st.ruu;
    d.prob.g.segment(uvar(k), d.nu) = st.ru;

    d.prob.A_eq.block(eq, xvar(k + 1), d.nx, d.nx) = -MatrixXd::Identity(d.nx, d.nx);
    d.prob.A_eq.block(eq, uvar(k), d.nx, d.nu) = st.b;
    d.prob.b_eq.segment(eq, d.nx) = -st.d;
    if (k > 0) d.prob.A_eq.block(eq, xvar(k), d.nx, d.nx) = st.a;
    else d.prob.b_eq.segment(eq, d.nx) -= st.a * dx0;
    eq += d.nx;

    if (st.cu.rows() > 0) {
      const int m = static_cast<int>(st.cu.rows());
      d.prob.A_eq.block(eq, uvar(k), m, d.nu) = st.cu;
      d.prob.b_eq.segment(eq, m) = -st.c0;
      if (k > 0) d.prob.A_eq.block(eq, xvar(k), m, d.nx) = st.cx;
      else d.prob.b_eq.segment(eq, m) -= st.cx * dx0;
      eq += m;
    }
    if (st.g.rows() > 0) {
      const int m = static_cast<int>(st.g.rows());
      d.prob.A_in.block(in, uvar(k), m, d.nu) = st.g;
      d.prob.upper.segment(in, m) = st.h;
      in += m;
    }
  }
  return d;
}

std::vector<nmpc::LqrStage> random_stages(int n, int nx, int nu, std::mt19937& rng,
                                          bool with_equalities) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<nmpc::LqrStage> stages(n);
  for (auto& st : stages) {
    st.a = 0.9 * test::random_vector(nx * nx, rng).reshaped(nx, nx);
    st.b = test::random_vector(nx * nu, rng).reshaped(nx, nu);
    st.d = 0.1 * test::random_vector(nx, rng);
    st.qxx = (VectorXd::Ones(nx) + test::random_vector(nx, rng, 0.5).cwiseAbs()).asDiagonal();
    st.qx = test::random_vector(nx, rng);
    st.ruu = (VectorXd::Ones(nu) + test::random_vector(nu, rng, 0.5).cwiseAbs()).asDiagonal();
    st.ru = test::random_vector(nu, rng);
    if (with_equalities) {
      st.cx = test::random_vector(nx, rng).transpose();
      st.cu = test::random_vector(nu, rng).transpose();
      st.c0 = test::random_vector(1, rng);
    }
  }
  return stages;
}

}  // namespace

TEST_CASE("dynamics: free fall and gravity compensation") {
  const auto model = test::reference_model();
  std::mt19937 rng(3);
  VectorXd x = random_mpc_state(model, rng);
  VectorXd u = test::random_vector(nmpc::input_dim(model), rng, 10.0);

  VectorXd xdot = nmpc::centroidal_dynamics(model, x, u, {false, false});
  CHECK((xdot.segment<3>(0) - Vector3d(0, 0, -rbd::kGravity)).norm() < 1e-14);
  CHECK(xdot.segment<3>(3).norm() < 1e-14);
  CHECK((xdot.tail(model.n_j()) - u.tail(model.n_j())).norm() == 0.0);

  x = standing_state(model);
  u = balanced_input(model, x);
  CHECK(u.segment<3>(0)[2] + u.segment<3>(6)[2] == doctest::Approx(510.12).epsilon(1e-12));
  xdot = nmpc::centroidal_dynamics(model, x, u, {true, true});
  CHECK(xdot.head<6>().norm() < 1e-10);
  CHECK(xdot.segment<6>(6).norm() < 1e-10);  // zero momentum, zero joint rates

  // Single supporting foot, no ankle torque: the angular rate follows the
  // lever arm between the sole and the com.
  u.setZero();
  u.segment<3>(0) = Vector3d(0, 0, model.total_mass * rbd::kGravity);
  xdot = nmpc::centroidal_dynamics(model, x, u, {true, false});
  rbd::JointConfiguration config{x.segment<3>(6), x.segment<3>(9), x.tail(model.n_j())};
  const auto fk = rbd::forward_kinematics(model, config);
  const Vector3d lever =
      Vector3d(fk.frame_pos(model, model.foot_frame(0))) - rbd::com_position(model, fk);
  CHECK(xdot.segment<3>(0).norm() < 1e-12);
  CHECK((xdot.segment<3>(3) - lever.cross(u.segment<3>(0)) / model.total_mass).norm() < 1e-12);
}

TEST_CASE("dynamics: base rates reproduce the stored momentum") {
  const auto model = test::reference_model();
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd x = random_mpc_state(model, rng);
    const VectorXd u = test::random_vector(nmpc::input_dim(model), rng);
    VectorXd nu;
    nmpc::foot_velocity(model, x, u, 0, &nu);
    rbd::JointConfiguration config{x.segment<3>(6), x.segment<3>(9), x.tail(model.n_j())};
    const rbd::CentroidalState cs = rbd::centroidal_momentum(model, config, nu);
    CHECK((cs.h - x.head<6>()).lpNorm<Eigen::Infinity>() < 1e-9);
    CHECK((nu.tail(model.n_j()) - u.tail(model.n_j())).norm() == 0.0);
  }
}

TEST_CASE("dynamics: linearization matches central differences") {
  const auto model = test::reference_model();
  const int nx = nmpc::state_dim(model), nu = nmpc::input_dim(model);
  std::mt19937 rng(7);
  const double step = 1e-5;
  for (int trial = 0; trial < 50; ++trial) {
    const VectorXd x = random_mpc_state(model, rng);
    VectorXd u = test::random_vector(nu, rng, 50.0);
    u.tail(model.n_j()) /= 50.0;
    const std::array<bool, 2> contact{trial % 3 != 0, trial % 2 == 0};
    MatrixXd a, b;
    nmpc::linearize_dynamics(model, x, u, contact, a, b);
    MatrixXd a_fd(nx, nx), b_fd(nx, nu);
    for (int k = 0; k < nx; ++k) {
      VectorXd xp = x, xm = x;
      xp[k] += step;
      xm[k] -= step;
      a_fd.col(k) = (nmpc::centroidal_dynamics(model, xp, u, contact) -
                     nmpc::centroidal_dynamics(model, xm, u, contact)) / (2 * step);
    }
    for (int k = 0; k < nu; ++k) {
      VectorXd up = u, um = u;
      up[k] += step;
      um[k] -= step;
      b_fd.col(k) = (nmpc::centroidal_dynamics(model, x, up, contact) -
                     nmpc::centroidal_dynamics(model, x, um, contact)) / (2 * step);
    }
    const double scale = std::max(1.0, a_fd.cwiseAbs().maxCoeff());
    CHECK((a - a_fd).cwiseAbs().maxCoeff() / scale < 1e-5);
    CHECK((b - b_fd).cwiseAbs().maxCoeff() /
              std::max(1.0, b_fd.cwiseAbs().maxCoeff()) < 1e-5);
  }
}

TEST_CASE("dynamics: integrator accuracy and linear-case discretization") {
  const auto model = test::reference_model();
  std::mt19937 rng(19);
  const VectorXd x = random_mpc_state(model, rng);
  VectorXd u = test::random_vector(nmpc::input_dim(model), rng, 30.0);
  u.tail(model.n_j()) /= 30.0;
  const std::array<bool, 2> contact{true, true};

  // Fourth-order convergence against a finely resolved rollout.
  const double dt = 0.05;
  VectorXd truth = x;
  for (int i = 0; i < 400; ++i) truth = nmpc::integrate_rk4(model, truth, u, contact, dt / 400);
  const double coarse = (nmpc::integrate_rk4(model, x, u, contact, dt) - truth).norm();
  VectorXd half = nmpc::integrate_rk4(model, x, u, contact, dt / 2);
  half = nmpc::integrate_rk4(model, half, u, contact, dt / 2);
  const double fine = (half - truth).norm();
  CHECK(coarse / fine > 10.0);
  CHECK(coarse < 1e-4);

  // For frozen Jacobians the discretization reproduces one RK4 step of the
  // linear system exactly.
  const int n = 5, m = 2;
  const MatrixXd a = test::random_vector(n * n, rng).reshaped(n, n);
  const MatrixXd b = test::random_vector(n * m, rng).reshaped(n, m);
  MatrixXd ad, bd;
  nmpc::discretize_rk4(a, b, 0.1, ad, bd);
  const VectorXd x0 = test::random_vector(n, rng), u0 = test::random_vector(m, rng);
  const auto f = [&](const VectorXd& z) { return VectorXd(a * z + b * u0); };
  const VectorXd k1 = f(x0), k2 = f(x0 + 0.05 * k1), k3 = f(x0 + 0.05 * k2),
                 k4 = f(x0 + 0.1 * k3);
  const VectorXd rk4 = x0 + 0.1 / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  CHECK((ad * x0 + bd * u0 - rk4).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("ocp: reference sampling, truncation, swing profile") {
  const auto model = test::reference_model();
  const auto ref = standing_reference(model);
  const VectorXd x0 = ref.states[0];

  nmpc::OcpDefinition ocp = nmpc::build_ocp(model, ref, x0, 0.0);
  CHECK(ocp.x_ref.size() == 21);
  CHECK(ocp.u_ref.size() == 20);
  CHECK_FALSE(ocp.truncated);
  for (const auto& xr : ocp.x_ref) CHECK((xr - x0).norm() < 1e-12);
  for (const auto& c : ocp.contact) CHECK((c[0] && c[1]));
  for (const auto& r : ocp.swing_rate) CHECK((r[0] == 0.0 && r[1] == 0.0));

  ocp = nmpc::build_ocp(model, ref, x0, 1.5);
  CHECK(ocp.truncated);
  CHECK((ocp.x_ref.back() - ref.states.back()).norm() < 1e-12);

  const auto swing = swing_reference(model);
  ocp = nmpc::build_ocp(model, swing, x0, 0.0);
  bool saw_lift = false, saw_drop = false;
  for (int k = 0; k < 20; ++k) {
    if (ocp.contact[k][1]) {
      CHECK(ocp.swing_rate[k][1] == 0.0);
    } else {
      saw_lift = saw_lift || ocp.swing_rate[k][1] > 0.01;
      saw_drop = saw_drop || ocp.swing_rate[k][1] < -0.01;
    }
    CHECK(ocp.contact[k][0]);
  }
  CHECK(saw_lift);
  CHECK(saw_drop);

  // The profile rises to the apex by mid-swing and returns to zero height.
  const double duration = 0.4;
  double height = 0.0, peak = 0.0;
  const int steps = 4000;
  for (int i = 0; i < steps; ++i) {
    height += nmpc::swing_vertical_rate((i + 0.5) / steps, duration, 0.08) * duration / steps;
    peak = std::max(peak, height);
  }
  CHECK(peak == doctest::Approx(0.08).epsilon(1e-6));
  CHECK(std::abs(height) < 1e-6);
  CHECK(nmpc::swing_vertical_rate(0.0, duration, 0.08) == 0.0);
  CHECK(nmpc::swing_vertical_rate(1.0, duration, 0.08) == 0.0);
}

TEST_CASE("ocp: wrench admissibility margins") {
  const Vector3d force(0, 0, 100);
  const Vector3d no_torque = Vector3d::Zero();
  CHECK(std::abs(nmpc::friction_cone_margin(force, 0.7, 0.5) - 69.5) < 1e-12);
  CHECK(std::abs(nmpc::yaw_torque_lower(force, no_torque, 0.1, 0.05, 0.7) + 10.5) < 1e-12);
  CHECK(std::abs(nmpc::yaw_torque_upper(force, no_torque, 0.1, 0.05, 0.7) - 10.5) < 1e-12);

  // Loading one edge tightens the window from both sides.
  const Vector3d torque(2.0, -1.0, 0.3);
  const double lo = nmpc::yaw_torque_lower(force, torque, 0.1, 0.05, 0.7);
  const double hi = nmpc::yaw_torque_upper(force, torque, 0.1, 0.05, 0.7);
  CHECK(lo > -10.5);
  CHECK(hi < 10.5);
  CHECK(lo < hi);

  const auto model = test::reference_model();
  const VectorXd x = standing_state(model);
  const VectorXd u = balanced_input(model, x);
  const auto values =
      nmpc::evaluate_constraints(model, x, u, {true, true}, {0.0, 0.0}, nmpc::OcpParams{});
  CHECK(values.equality.size() == 6);
  CHECK(values.equality.lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(values.inequality.size() == 10 + 2 * model.n_j());
  CHECK(values.inequality.minCoeff() > 0.0);
}

TEST_CASE("lqr: matches a dense transcription") {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const auto stages = random_stages(5, 4, 2, rng, trial % 2 == 1);
    const MatrixXd qn = MatrixXd::Identity(4, 4) * 2.0;
    const VectorXd qn_vec = test::random_vector(4, rng);
    const VectorXd dx0 = test::random_vector(4, rng);
    const auto sol = nmpc::solve_lqr(stages, qn, qn_vec, dx0);
    CHECK_FALSE(sol.relaxed);

    const auto dense = dense_transcription(stages, qn, qn_vec, dx0);
    const auto oracle = qp::solve_qp(dense.prob);
    REQUIRE(oracle.status == qp::QpStatus::optimal);
    for (int k = 0; k < dense.n; ++k) {
      CHECK((sol.du[k] - oracle.x.segment(dense.n * dense.nx + k * dense.nu, dense.nu))
                .lpNorm<Eigen::Infinity>() < 1e-6);
      CHECK((sol.dx[k + 1] - oracle.x.segment(k * dense.nx, dense.nx))
                .lpNorm<Eigen::Infinity>() < 1e-6);
    }
    if (trial % 2 == 1)
      for (int k = 0; k < dense.n; ++k)
        CHECK(std::abs((stages[k].cx * sol.dx[k] + stages[k].cu * sol.du[k] +
                        stages[k].c0)[0]) < 1e-9);
  }
}

TEST_CASE("lqr: single-stage input bounds match the dense solution") {
  std::mt19937 rng(29);
  for (int trial = 0; trial < 5; ++trial) {
    auto stages = random_stages(1, 4, 3, rng, false);
    stages[0].g = MatrixXd::Zero(6, 3);
    stages[0].g.topRows<3>().setIdentity();
    stages[0].g.bottomRows<3>() = -MatrixXd::Identity(3, 3);
    stages[0].h = VectorXd::Constant(6, 0.05);
    stages[0].ru = VectorXd::Constant(3, -2.0);  // push the optimum into the box walls
    const MatrixXd qn = MatrixXd::Identity(4, 4);
    const VectorXd qn_vec = VectorXd::Zero(4);
    const auto sol = nmpc::solve_lqr(stages, qn, qn_vec, test::random_vector(4, rng));
    CHECK(sol.du[0].lpNorm<Eigen::Infinity>() <= 0.05 + 1e-10);

    const auto dense = dense_transcription(stages, qn, qn_vec, VectorXd::Zero(4));
    // dx0 enters stage 0 only through constants; rebuild with the same start.
    const auto dense2 = dense_transcription(stages, qn, qn_vec, sol.dx[0]);
    const auto oracle = qp::solve_qp(dense2.prob);
    REQUIRE(oracle.status == qp::QpStatus::optimal);
    CHECK((sol.du[0] - oracle.x.tail(3)).lpNorm<Eigen::Infinity>() < 1e-7);
    (void)dense;
  }
}

TEST_CASE("rti: monotone convergence on a frozen standing problem") {
  const auto model = test::reference_model();
  const auto ref = standing_reference(model);
  VectorXd x0 = ref.states[0];
  x0[6] += 0.02;   // com shifted forward
  x0[8] -= 0.01;
  x0[0] += 0.05;   // and moving
  const auto ocp = nmpc::build_ocp(model, ref, x0, 0.0);

  nmpc::OcpSolution sol = nmpc::seed_from_reference(model, ocp);
  double last = kInf;
  int iters = 0;
  while (iters < 20) {
    sol = nmpc::sqp_rti_step(model, ocp, sol);
    ++iters;
    CHECK(sol.kkt_residual < last);
    last = sol.kkt_residual;
    if (sol.status == nmpc::SolveStatus::converged) break;
  }
  CHECK(sol.status == nmpc::SolveStatus::converged);
  CHECK(sol.kkt_residual < 1e-4);
  CHECK((sol.x[0] - x0).norm() < 1e-12);

  for (int k = 0; k < ocp.params.nodes; ++k) {
    const auto values = nmpc::evaluate_constraints(model, sol.x[k], sol.u[k], ocp.contact[k],
                                                   ocp.swing_rate[k], ocp.params);
    CHECK(values.equality.lpNorm<Eigen::Infinity>() < 1e-4);
    CHECK(values.inequality.minCoeff() > -1e-6);
  }
}

TEST_CASE("rti: fixed point once converged") {
  const auto model = test::reference_model();
  const auto ref = standing_reference(model);
  VectorXd x0 = ref.states[0];
  x0[7] -= 0.015;
  const auto ocp = nmpc::build_ocp(model, ref, x0, 0.0);
  nmpc::OcpSolution sol = nmpc::seed_from_reference(model, ocp);
  for (int i = 0; i < 25 && sol.kkt_residual > 1e-9; ++i) sol = nmpc::sqp_rti_step(model, ocp, sol);
  REQUIRE(sol.kkt_residual < 1e-7);
  const auto next = nmpc::sqp_rti_step(model, ocp, sol);
  double moved = 0.0;
  for (size_t k = 0; k < sol.x.size(); ++k)
    moved = std::max(moved, (next.x[k] - sol.x[k]).lpNorm<Eigen::Infinity>());
  CHECK(moved < 1e-8);
}

TEST_CASE("rti: swing phase tracks the profile with zero wrench") {
  const auto model = test::reference_model();
  const auto ref = swing_reference(model);
  const auto ocp = nmpc::build_ocp(model, ref, ref.states[0], 0.4);
  nmpc::OcpSolution sol = nmpc::seed_from_reference(model, ocp);
  // The swing reference is infeasible as-is (the foot must leave the tracked pose),
  // so residuals stay large at the optimum and the Gauss-Newton tail is linear.
  for (int i = 0; i < 80; ++i) {
    sol = nmpc::sqp_rti_step(model, ocp, sol);
    if (sol.status == nmpc::SolveStatus::converged) break;
  }
  CHECK(sol.status == nmpc::SolveStatus::converged);
  bool saw_swing = false;
  for (int k = 0; k < ocp.params.nodes; ++k) {
    if (ocp.contact[k][1]) continue;
    saw_swing = true;
    CHECK(sol.u[k].segment<6>(6).lpNorm<Eigen::Infinity>() == 0.0);
    const Vector3d v = nmpc::foot_velocity(model, sol.x[k], sol.u[k], 1);
    CHECK(std::abs(v[2] - ocp.swing_rate[k][1]) < 1e-4);
  }
  CHECK(saw_swing);
}

TEST_CASE("rti: policy interpolation and staleness") {
  nmpc::OcpSolution sol;
  const int n = 4;
  for (int k = 0; k <= n; ++k) sol.x.push_back(VectorXd::Constant(2, double(k)));
  for (int k = 0; k < n; ++k) sol.u.push_back(VectorXd::Constant(1, 10.0 * k));
  const double dt = 0.05;

  auto s = nmpc::mpc_policy(sol, dt, 2 * dt);
  CHECK_FALSE(s.stale);
  CHECK(s.x[0] == doctest::Approx(2.0));
  CHECK(s.u[0] == doctest::Approx(20.0));

  s = nmpc::mpc_policy(sol, dt, 2.5 * dt);  // midway: arithmetic mean of neighbors
  CHECK(s.x[0] == doctest::Approx(2.5));
  CHECK(s.u[0] == doctest::Approx(25.0));

  s = nmpc::mpc_policy(sol, dt, n * dt);
  CHECK_FALSE(s.stale);
  CHECK(s.x[0] == doctest::Approx(4.0));
  CHECK(s.u[0] == doctest::Approx(30.0));  // input horizon is one node shorter

  s = nmpc::mpc_policy(sol, dt, n * dt + 0.01);
  CHECK(s.stale);
  CHECK(s.x[0] == doctest::Approx(4.0));
  CHECK(nmpc::mpc_policy(sol, dt, -0.01).stale);
}

TEST_CASE("rti: warm-started solve stays within budget") {
  const auto model = test::reference_model();
  const auto ref = standing_reference(model);
  VectorXd x0 = ref.states[0];
  const auto ocp = nmpc::build_ocp(model, ref, x0, 0.0);
  nmpc::OcpSolution sol = nmpc::seed_from_reference(model, ocp);
  double total = 0.0;
  const int solves = 30;
  for (int i = 0; i < solves; ++i) {
    x0[6] = ref.states[0][6] + 0.005 * std::sin(0.3 * i);
    const auto shifted = nmpc::build_ocp(model, ref, x0, 0.0);
    sol = nmpc::sqp_rti_step(model, shifted, sol);
    total += sol.solve_ms;
  }
  CHECK(total / solves < 40.0);
}
