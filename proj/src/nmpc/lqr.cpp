#include "mimic/nmpc/lqr.hpp"

#include <cstdio>
#include <cstdlib>
#include <limits>

#include "mimic/qp/qp.hpp"

namespace mimic::nmpc {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Affine reparameterization x = offset + slope * dx + basis * y solving a set
// of affine rows in the least-squares sense, with basis spanning their null
// space.
struct Elimination {
  VectorXd offset;
  MatrixXd slope, basis;
  bool deficient{false};
};

Elimination eliminate(const MatrixXd& cu, const MatrixXd& cx_in, const VectorXd& c0, int n,
                      int nx) {
  Elimination out;
  if (cu.rows() == 0) {
    out.offset = VectorXd::Zero(n);
    out.slope = MatrixXd::Zero(n, nx);
    out.basis = MatrixXd::Identity(n, n);
    return out;
  }
  const MatrixXd cx = cx_in.size() > 0 ? cx_in : MatrixXd::Zero(cu.rows(), nx);
  Eigen::JacobiSVD<MatrixXd> svd(cu, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const double tol = 1e-10 * svd.singularValues()[0];
  int rank = 0;
  while (rank < svd.singularValues().size() && svd.singularValues()[rank] > tol) ++rank;
  out.deficient = rank < cu.rows();
  const MatrixXd pinv = svd.matrixV().leftCols(rank) *
                        svd.singularValues().head(rank).cwiseInverse().asDiagonal() *
                        svd.matrixU().leftCols(rank).transpose();
  out.offset = -pinv * c0;
  out.slope = -pinv * cx;
  out.basis = svd.matrixV().rightCols(n - rank);
  return out;
}

// Stage Q-function pieces in the equality-reduced input w.
struct StageData {
  Elimination eq;            // du = eq(dx, w)
  MatrixXd hww, hxw;
  VectorXd hw;
  MatrixXd gz;               // bounds mapped to w: gz * w <= h - g * (offset + slope * dx)
};

}  // namespace

LqrSolution solve_lqr(const std::vector<LqrStage>& stages, const MatrixXd& qn,
                      const VectorXd& qn_vec, const VectorXd& dx0) {
  const int n = static_cast<int>(stages.size());
  const int nx = static_cast<int>(qn.rows());
  LqrSolution sol;
  std::vector<StageData> data(n);
  for (int k = 0; k < n; ++k) {
    data[k].eq = eliminate(stages[k].cu, stages[k].cx, stages[k].c0,
                           static_cast<int>(stages[k].b.cols()), nx);
    if (data[k].eq.deficient) sol.relaxed = true;
    if (stages[k].g.rows() > 0) data[k].gz = stages[k].g * data[k].eq.basis;
  }

  // Bound rows treated as active (eliminated at the value level) during the
  // current backward sweep; refined from the forward stage QPs until stable.
  std::vector<std::vector<int>> active(n);
  sol.dx.assign(n + 1, VectorXd());
  sol.du.assign(n, VectorXd());

  const int max_sweeps = 10;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    MatrixXd value = qn;
    VectorXd value_vec = qn_vec;
    std::vector<MatrixXd> feedback(n);
    std::vector<VectorXd> feedforward(n);
    for (int k = n - 1; k >= 0; --k) {
      const LqrStage& st = stages[k];
      StageData& sd = data[k];
      const Elimination& eq = sd.eq;

      const MatrixXd at = st.a + st.b * eq.slope;
      const MatrixXd bt = st.b * eq.basis;
      const VectorXd dt = st.d + st.b * eq.offset;
      const VectorXd ru_eff = st.ruu * eq.offset + st.ru;
      const VectorXd pd = value * dt + value_vec;

      const MatrixXd hxx =
          st.qxx + eq.slope.transpose() * st.ruu * eq.slope + at.transpose() * value * at;
      const VectorXd hx = st.qx + eq.slope.transpose() * ru_eff + at.transpose() * pd;
      sd.hww = eq.basis.transpose() * st.ruu * eq.basis + bt.transpose() * value * bt;
      sd.hxw = eq.slope.transpose() * st.ruu * eq.basis + at.transpose() * value * bt;
      sd.hw = eq.basis.transpose() * ru_eff + bt.transpose() * pd;

      // Pin the bound rows believed active, then take the unconstrained
      // minimizer of the remaining freedom for the value recursion.
      MatrixXd act_cu(active[k].size(), sd.hww.rows());
      MatrixXd act_cx(active[k].size(), nx);
      VectorXd act_c0(active[k].size());
      for (size_t i = 0; i < active[k].size(); ++i) {
        const int row = active[k][i];
        act_cu.row(i) = sd.gz.row(row);
        act_cx.row(i) = st.g.row(row) * eq.slope;
        act_c0[i] = st.g.row(row).dot(eq.offset) - st.h[row];
      }
      const Elimination pin = eliminate(act_cu, act_cx, act_c0,
                                        static_cast<int>(sd.hww.rows()), nx);

      // Q-function over (dx, v) with w = pin(dx, v).
      const MatrixXd hvv = pin.basis.transpose() * sd.hww * pin.basis;
      const MatrixXd hxv = (sd.hxw + pin.slope.transpose() * sd.hww) * pin.basis;
      const VectorXd hv = pin.basis.transpose() * (sd.hww * pin.offset + sd.hw);
      MatrixXd vxx = hxx + pin.slope.transpose() * sd.hww * pin.slope +
                     sd.hxw * pin.slope + pin.slope.transpose() * sd.hxw.transpose();
      VectorXd vx = hx + pin.slope.transpose() * (sd.hww * pin.offset + sd.hw) +
                    sd.hxw * pin.offset;
      if (pin.basis.cols() > 0) {
        const Eigen::LLT<MatrixXd> llt(hvv);
        const MatrixXd gain = -llt.solve(hxv.transpose());
        const VectorXd ff = -llt.solve(hv);
        feedback[k] = pin.slope + pin.basis * gain;
        feedforward[k] = pin.offset + pin.basis * ff;
        vxx += hxv * gain;
        vx += hxv * ff;
      } else {
        feedback[k] = pin.slope;
        feedforward[k] = pin.offset;
      }
      value = 0.5 * (vxx + vxx.transpose());
      value_vec = vx;
    }

    bool changed = false;
    sol.dx[0] = dx0;
    for (int k = 0; k < n; ++k) {
      const LqrStage& st = stages[k];
      const StageData& sd = data[k];
      VectorXd w = feedforward[k] + feedback[k] * sol.dx[k];
      std::vector<int> now_active;
      if (st.g.rows() > 0 && sd.eq.basis.cols() > 0) {
        const VectorXd base = sd.eq.offset + sd.eq.slope * sol.dx[k];
        const VectorXd slack = st.h - st.g * base;
        if (((sd.gz * w - slack).array() > -1e-10).any()) {
          qp::QuadraticProgram prob;
          prob.H = sd.hww;
          prob.g = sd.hw + sd.hxw.transpose() * sol.dx[k];
          prob.A_in = sd.gz;
          prob.upper = slack;
          prob.lower = VectorXd::Constant(sd.gz.rows(), -std::numeric_limits<double>::infinity());
          const qp::QpSolution qps = qp::solve_qp(prob);
          w = qps.x;
          for (int row = 0; row < sd.gz.rows(); ++row)
            if (qps.dual_upper[row] > 1e-10) now_active.push_back(row);
        }
      }
      changed = changed || now_active != active[k];
      active[k] = std::move(now_active);
      sol.du[k] = sd.eq.offset + sd.eq.slope * sol.dx[k] + sd.eq.basis * w;
      sol.dx[k + 1] = st.a * sol.dx[k] + st.b * sol.du[k] + st.d;
    }
    if (std::getenv("MIMIC_DEBUG_LQR") != nullptr) {
      int pinned = 0;
      for (const auto& rows : active) pinned += static_cast<int>(rows.size());
      std::fprintf(stderr, "lqr sweep %d pinned %d changed %d\n", sweep, pinned, changed);
    }
    if (!changed) break;
  }
  return sol;
}

}  // namespace mimic::nmpc
