#include "mimic/nmpc/rti.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace mimic::nmpc {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kPitchGuard = 1.5697;  // pi/2 - 0.0011, clear of the Euler singularity
constexpr double kConvergedTol = 1e-4;

// Linear admissibility rows for one stance-foot wrench [f; tau], as
// coeff * w <= rhs: an inner pyramid of the friction cone (|f_x| + |f_y| <=
// mu f_z - margin implies the cone with margin), the center-of-pressure box,
// and the yaw torque window with its absolute values split by sign.
void wrench_rows(double x, double y, double mu, double margin,
                 Eigen::Matrix<double, 16, 6>& coeff, Eigen::Matrix<double, 16, 1>& rhs) {
  coeff.setZero();
  rhs.setZero();
  int row = 0;
  for (const double s1 : {-1.0, 1.0})
    for (const double s2 : {-1.0, 1.0}) {
      coeff.row(row) << s1, s2, -mu, 0, 0, 0;
      rhs[row++] = -margin;
    }
  for (const double s : {-1.0, 1.0}) coeff.row(row++) << 0, 0, -y, s, 0, 0;
  for (const double s : {-1.0, 1.0}) coeff.row(row++) << 0, 0, -x, 0, s, 0;
  for (const double sz : {-1.0, 1.0})
    for (const double s1 : {-1.0, 1.0})
      for (const double s2 : {-1.0, 1.0})
        coeff.row(row++) << s1 * y, s2 * x, -mu * (x + y), sz * s1 * mu, sz * s2 * mu, sz;
}

std::vector<int> kept_inputs(const rbd::RobotModel& model, const std::array<bool, 2>& contact) {
  std::vector<int> keep;
  keep.reserve(input_dim(model));
  for (int f = 0; f < 2; ++f)
    if (contact[f])
      for (int i = 0; i < 6; ++i) keep.push_back(6 * f + i);
  for (int j = 0; j < model.n_j(); ++j) keep.push_back(12 + j);
  return keep;
}

void clamp_state(const rbd::RobotModel& model, VectorXd& x) {
  x[10] = std::clamp(x[10], -kPitchGuard, kPitchGuard);
  for (int j = 0; j < model.n_j(); ++j)
    x[12 + j] = std::clamp(x[12 + j], model.joints[j].lower, model.joints[j].upper);
}

}  // namespace

OcpSolution seed_from_reference(const rbd::RobotModel& model, const OcpDefinition& ocp) {
  OcpSolution seed;
  seed.x = ocp.x_ref;
  seed.u = ocp.u_ref;
  for (size_t k = 0; k < seed.u.size(); ++k)
    for (int f = 0; f < 2; ++f)
      if (!ocp.contact[k][f]) seed.u[k].segment<6>(6 * f).setZero();
  return seed;
}

OcpSolution sqp_rti_step(const rbd::RobotModel& model, const OcpDefinition& ocp,
                         const OcpSolution& warm) {
  const auto start = std::chrono::steady_clock::now();
  const int nodes = ocp.params.nodes;
  const int nj = model.n_j();
  const double dt = ocp.params.dt();
  const VectorXd wx = state_weights(model, ocp.params);
  const VectorXd wu = input_weights(model, ocp.params);

  OcpSolution out;
  out.x = warm.x;
  out.u = warm.u;
  for (int k = 0; k < nodes; ++k)
    for (int f = 0; f < 2; ++f)
      if (!ocp.contact[k][f]) out.u[k].segment<6>(6 * f).setZero();

  std::vector<LqrStage> stages(nodes);
  std::vector<std::vector<int>> keeps(nodes);
  for (int k = 0; k < nodes; ++k) {
    const VectorXd& xk = out.x[k];
    const VectorXd& uk = out.u[k];
    const std::array<bool, 2>& contact = ocp.contact[k];
    const std::vector<int> keep = keeps[k] = kept_inputs(model, contact);
    const int nk = static_cast<int>(keep.size());
    LqrStage& st = stages[k];

    const StageLinearization lin = linearize_stage(model, xk, uk, contact);
    MatrixXd bd;
    discretize_rk4(lin.a, lin.b, dt, st.a, bd);
    st.b.resize(st.a.rows(), nk);
    for (int i = 0; i < nk; ++i) st.b.col(i) = bd.col(keep[i]);
    st.d = integrate_rk4(model, xk, uk, contact, dt) - out.x[k + 1];

    st.qxx = (wx * dt).asDiagonal();
    st.qx = (wx * dt).cwiseProduct(xk - ocp.x_ref[k]);
    st.ruu.setZero(nk, nk);
    st.ru.resize(nk);
    const VectorXd ru_full = (wu * dt).cwiseProduct(uk - ocp.u_ref[k]);
    for (int i = 0; i < nk; ++i) {
      st.ruu(i, i) = wu[keep[i]] * dt;
      st.ru[i] = ru_full[keep[i]];
    }

    // Contact equalities: stance soles pinned, swing soles tracking the
    // vertical profile rate.
    const int eq_rows = 3 * (contact[0] + contact[1]) + (!contact[0] + !contact[1]);
    st.cx.setZero(eq_rows, st.a.rows());
    st.cu.setZero(eq_rows, nk);
    st.c0.resize(eq_rows);
    int row = 0;
    for (int f = 0; f < 2; ++f) {
      const int span = contact[f] ? 3 : 1;
      const int first = contact[f] ? 3 * f : 3 * f + 2;
      st.cx.middleRows(row, span) = lin.sole_velocity_x.middleRows(first, span);
      for (int i = 0; i < nk; ++i)
        st.cu.block(row, i, span, 1) = lin.sole_velocity_u.block(first, keep[i], span, 1);
      st.c0.segment(row, span) = lin.sole_velocity.segment(first, span);
      if (!contact[f]) st.c0[row] -= ocp.swing_rate[k][f];
      row += span;
    }

    // Input bounds: wrench admissibility per stance foot, joint rate limits.
    const int stance = contact[0] + contact[1];
    st.g.setZero(16 * stance + 2 * nj, nk);
    st.h.resize(16 * stance + 2 * nj);
    int grow = 0, offset = 0;
    for (int f = 0; f < 2; ++f) {
      if (!contact[f]) continue;
      Eigen::Matrix<double, 16, 6> coeff;
      Eigen::Matrix<double, 16, 1> rhs;
      wrench_rows(model.feet[f].half_length_x, model.feet[f].half_width_y, ocp.params.friction,
                  ocp.params.cone_margin, coeff, rhs);
      st.g.block(grow, offset, 16, 6) = coeff;
      st.h.segment<16>(grow) = rhs - coeff * uk.segment<6>(6 * f);
      grow += 16;
      offset += 6;
    }
    for (int j = 0; j < nj; ++j) {
      const double limit = model.joints[j].velocity_limit;
      st.g(grow, offset + j) = 1.0;
      st.h[grow++] = limit - uk[12 + j];
      st.g(grow, offset + j) = -1.0;
      st.h[grow++] = limit + uk[12 + j];
    }
  }

  const MatrixXd qn = wx.asDiagonal();
  const VectorXd qn_vec = wx.cwiseProduct(out.x[nodes] - ocp.x_ref[nodes]);
  const LqrSolution step = solve_lqr(stages, qn, qn_vec, ocp.x0 - out.x[0]);

  double step_norm = 0.0;
  for (int k = 0; k <= nodes; ++k) {
    step_norm = std::max(step_norm, step.dx[k].lpNorm<Eigen::Infinity>());
    if (k < nodes) step_norm = std::max(step_norm, step.du[k].lpNorm<Eigen::Infinity>());
  }

  // Exact-penalty merit of a candidate trajectory: tracking cost plus a large
  // multiple of the total infeasibility (dynamics defects and contact
  // equalities). infeasibility() alone reports the worst violation.
  const auto infeasibility = [&](const std::vector<VectorXd>& x, const std::vector<VectorXd>& u,
                                 double* total = nullptr) {
    double worst = (x[0] - ocp.x0).lpNorm<Eigen::Infinity>();
    double sum = worst;
    for (int k = 0; k < nodes; ++k) {
      const VectorXd defect = integrate_rk4(model, x[k], u[k], ocp.contact[k], dt) - x[k + 1];
      const ConstraintValues values = evaluate_constraints(model, x[k], u[k], ocp.contact[k],
                                                           ocp.swing_rate[k], ocp.params);
      worst = std::max(worst, defect.lpNorm<Eigen::Infinity>());
      sum += defect.lpNorm<1>();
      if (values.equality.size() > 0) {
        worst = std::max(worst, values.equality.lpNorm<Eigen::Infinity>());
        sum += values.equality.lpNorm<1>();
      }
    }
    if (total != nullptr) *total = sum;
    return worst;
  };
  const auto cost = [&](const std::vector<VectorXd>& x, const std::vector<VectorXd>& u) {
    double value = 0.0;
    for (int k = 0; k < nodes; ++k) {
      value += 0.5 * dt * (wx.cwiseProduct(x[k] - ocp.x_ref[k]).dot(x[k] - ocp.x_ref[k]) +
                           wu.cwiseProduct(u[k] - ocp.u_ref[k]).dot(u[k] - ocp.u_ref[k]));
    }
    const VectorXd en = x[nodes] - ocp.x_ref[nodes];
    return value + 0.5 * wx.cwiseProduct(en).dot(en);
  };
  constexpr double kPenalty = 1e4;
  const auto merit = [&](const std::vector<VectorXd>& x, const std::vector<VectorXd>& u,
                         double* worst = nullptr) {
    double total = 0.0;
    const double w = infeasibility(x, u, &total);
    if (worst != nullptr) *worst = w;
    return cost(x, u) + kPenalty * total;
  };

  // The full Gauss-Newton step can overshoot on strongly nonlinear segments
  // (touchdowns) and limit-cycle; backtrack on the merit, keeping the best
  // candidate seen.
  const double merit0 = merit(out.x, out.u);
  std::vector<VectorXd> best_x, best_u;
  double best_merit = std::numeric_limits<double>::infinity();
  double best_worst = std::numeric_limits<double>::infinity();
  for (const double a : {1.0, 0.5, 0.25, 0.125}) {
    std::vector<VectorXd> cand_x = out.x;
    std::vector<VectorXd> cand_u = out.u;
    for (int k = 0; k <= nodes; ++k) {
      cand_x[k] += a * step.dx[k];
      clamp_state(model, cand_x[k]);
      if (k == nodes) break;
      for (size_t i = 0; i < keeps[k].size(); ++i) cand_u[k][keeps[k][i]] += a * step.du[k][i];
    }
    double worst = 0.0;
    const double m = merit(cand_x, cand_u, &worst);
    if (m < best_merit) {
      best_merit = m;
      best_worst = worst;
      best_x = std::move(cand_x);
      best_u = std::move(cand_u);
    }
    if (best_merit < merit0) break;
  }
  out.x = std::move(best_x);
  out.u = std::move(best_u);
  out.kkt_residual = std::max(best_worst, step_norm);
  out.status = step.relaxed ? SolveStatus::relaxed
                            : (out.kkt_residual < kConvergedTol ? SolveStatus::converged
                                                        : SolveStatus::iterating);
  out.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                           start).count();
  return out;
}

PolicySample mpc_policy(const OcpSolution& solution, double node_spacing, double time) {
  PolicySample sample;
  const int nodes = static_cast<int>(solution.u.size());
  const double horizon = nodes * node_spacing;
  sample.stale = time < -1e-9 || time > horizon + 1e-9;
  const auto interpolate = [&](const std::vector<VectorXd>& traj, double t) {
    const double s = std::clamp(t / node_spacing, 0.0, double(traj.size() - 1));
    const int k = std::min(static_cast<int>(s), static_cast<int>(traj.size()) - 2);
    if (k < 0) return traj[0];
    const double a = s - k;
    return VectorXd((1.0 - a) * traj[k] + a * traj[k + 1]);
  };
  sample.x = interpolate(solution.x, std::clamp(time, 0.0, horizon));
  sample.u = interpolate(solution.u, std::clamp(time, 0.0, horizon));
  return sample;
}

}  // namespace mimic::nmpc
