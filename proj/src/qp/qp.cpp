#include "mimic/qp/qp.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <vector>

#include <json.hpp>

namespace mimic::qp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One single-sided constraint a'x <= b drawn from the problem. Equalities are
// carried with a free-sign dual; the orientation they were activated with is
// recorded so the reported multiplier keeps the row's original sign convention.
struct Constraint {
  Eigen::VectorXd a;
  double b;
  bool equality;
  int row;    // index into A_eq or A_in
  int side;   // equalities 0, upper bound +1, lower bound -1
};

struct ActiveEntry {
  int id;            // index into the constraint list
  double sign;       // orientation the constraint was added with (equalities only differ)
  double dual{0.0};  // multiplier for sign * a'x <= sign * b
};

}  // namespace

void QuadraticProgram::validate() const {
  const int nv = n();
  if (H.rows() != nv || H.cols() != nv) throw QpError("qp: H dimension mismatch");
  if ((H - H.transpose()).lpNorm<Eigen::Infinity>() > 1e-10) throw QpError("qp: H not symmetric");
  if (A_eq.rows() != b_eq.size()) throw QpError("qp: equality row count mismatch");
  if (A_eq.rows() > 0 && A_eq.cols() != nv) throw QpError("qp: A_eq column mismatch");
  if (A_in.rows() != lower.size() || A_in.rows() != upper.size())
    throw QpError("qp: inequality bound count mismatch");
  if (A_in.rows() > 0 && A_in.cols() != nv) throw QpError("qp: A_in column mismatch");
  for (int i = 0; i < lower.size(); ++i)
    if (lower[i] > upper[i]) throw QpError("qp: crossed bounds");
}

namespace {

// Worst KKT violation of a candidate solution, in the problem's own scale.
double kkt_violation(const QuadraticProgram& problem, const QpSolution& sol) {
  const int m_eq = static_cast<int>(problem.A_eq.rows());
  const int m_in = static_cast<int>(problem.A_in.rows());
  Eigen::VectorXd stat = problem.H * sol.x + problem.g;
  if (m_eq > 0) stat += problem.A_eq.transpose() * sol.dual_eq;
  if (m_in > 0) stat += problem.A_in.transpose() * (sol.dual_upper - sol.dual_lower);
  double res = stat.lpNorm<Eigen::Infinity>();
  if (m_eq > 0)
    res = std::max(res, (problem.A_eq * sol.x - problem.b_eq).lpNorm<Eigen::Infinity>());
  for (int i = 0; i < m_in; ++i) {
    const double v = problem.A_in.row(i).dot(sol.x);
    res = std::max(res, std::max(v - problem.upper[i], problem.lower[i] - v));
    if (problem.upper[i] < kInf) res = std::max(res, sol.dual_upper[i] * std::abs(v - problem.upper[i]));
    if (problem.lower[i] > -kInf) res = std::max(res, sol.dual_lower[i] * std::abs(v - problem.lower[i]));
  }
  return res;
}

}  // namespace

QpSolution solve_qp(const QuadraticProgram& problem, const QpSolution* warm_start,
                    double tolerance) {
  problem.validate();
  const int n = problem.n();
  const int m_eq = static_cast<int>(problem.A_eq.rows());
  const int m_in = static_cast<int>(problem.A_in.rows());

  // Full-row-rank equalities are eliminated up front: the problem is reduced
  // onto the nullspace of A_eq and solved there, which keeps the active-set
  // loop small (it re-solves an n x k system per iteration). Rank-deficient
  // equality sets fall through to the general path below.
  if (m_eq > 0 && m_eq < n) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(problem.A_eq.transpose());
    if (qr.rank() == m_eq) {
      const Eigen::MatrixXd q_full = qr.householderQ();
      const Eigen::MatrixXd z = q_full.rightCols(n - m_eq);
      // Minimum-norm particular solution of A_eq x = b_eq.
      const Eigen::VectorXd pb = qr.colsPermutation().transpose() * problem.b_eq;
      const Eigen::VectorXd y = qr.matrixR()
                                    .topLeftCorner(m_eq, m_eq)
                                    .triangularView<Eigen::Upper>()
                                    .transpose()
                                    .solve(pb);
      const Eigen::VectorXd x_p = q_full.leftCols(m_eq) * y;

      QuadraticProgram reduced;
      reduced.H = z.transpose() * problem.H * z;
      reduced.g = z.transpose() * (problem.g + problem.H * x_p);
      if (m_in > 0) {
        reduced.A_in = problem.A_in * z;
        const Eigen::VectorXd shift = problem.A_in * x_p;
        reduced.lower = problem.lower - shift;
        reduced.upper = problem.upper - shift;
      }
      QpSolution rsol = solve_qp(reduced, warm_start, tolerance);

      QpSolution sol;
      sol.x = x_p + z * rsol.x;
      sol.dual_lower = std::move(rsol.dual_lower);
      sol.dual_upper = std::move(rsol.dual_upper);
      sol.status = rsol.status;
      sol.iterations = rsol.iterations;
      // Equality multipliers restore stationarity in the original space.
      Eigen::VectorXd rhs = -(problem.H * sol.x + problem.g);
      if (m_in > 0) rhs -= problem.A_in.transpose() * (sol.dual_upper - sol.dual_lower);
      sol.dual_eq = qr.solve(rhs);
      sol.kkt_residual = std::max(kkt_violation(problem, sol), rsol.kkt_residual);
      return sol;
    }
  }

  Eigen::MatrixXd h = problem.H;
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < -1e-8) throw QpError("qp: H is not positive semidefinite");
    if (min_eig < 1e-12) h.diagonal().array() += 1e-9;  // PSD roundoff repair
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) throw QpError("qp: Cholesky factorization failed");

  std::vector<Constraint> cons;
  cons.reserve(m_eq + 2 * m_in);
  for (int k = 0; k < m_eq; ++k)
    cons.push_back({problem.A_eq.row(k).transpose(), problem.b_eq[k], true, k, 0});
  for (int i = 0; i < m_in; ++i) {
    if (problem.upper[i] < kInf)
      cons.push_back({problem.A_in.row(i).transpose(), problem.upper[i], false, i, +1});
    if (problem.lower[i] > -kInf)
      cons.push_back({-problem.A_in.row(i).transpose(), -problem.lower[i], false, i, -1});
  }
  const int nc = static_cast<int>(cons.size());

  // constraints the warm start had active get first consideration
  std::vector<char> preferred(nc, 0);
  if (warm_start && warm_start->dual_lower.size() == m_in &&
      warm_start->dual_upper.size() == m_in) {
    for (int c = 0; c < nc; ++c) {
      const Constraint& con = cons[c];
      if (con.equality) continue;
      const double d = con.side > 0 ? warm_start->dual_upper[con.row]
                                    : warm_start->dual_lower[con.row];
      if (d > tolerance) preferred[c] = 1;
    }
  }

  QpSolution sol;
  sol.x = -llt.solve(problem.g);
  sol.dual_eq = Eigen::VectorXd::Zero(m_eq);
  sol.dual_lower = Eigen::VectorXd::Zero(m_in);
  sol.dual_upper = Eigen::VectorXd::Zero(m_in);

  std::vector<ActiveEntry> active;
  std::vector<char> in_active(nc, 0);
  std::vector<char> eq_done(nc, 0);

  auto violation = [&](int c) {
    const Constraint& con = cons[c];
    const double s = con.a.dot(sol.x) - con.b;
    return con.equality ? std::abs(s) : s;
  };

  auto finish = [&](QpStatus status, double extra_violation) {
    if (status == QpStatus::optimal && !active.empty()) {
      // Incremental steps leave roundoff on the active rows; one least-norm
      // projection restores a'x = b there to working precision.
      const int k = static_cast<int>(active.size());
      Eigen::MatrixXd nt(n, k);
      Eigen::VectorXd r(k);
      for (int j = 0; j < k; ++j) {
        const Constraint& con = cons[active[j].id];
        nt.col(j) = con.a;
        r[j] = con.b - con.a.dot(sol.x);
      }
      sol.x += nt * (nt.transpose() * nt).ldlt().solve(r);
    }
    for (const auto& e : active) {
      const Constraint& con = cons[e.id];
      if (con.equality)
        sol.dual_eq[con.row] = e.sign * e.dual;
      else if (con.side > 0)
        sol.dual_upper[con.row] = e.dual;
      else
        sol.dual_lower[con.row] = e.dual;
    }
    // KKT residual: stationarity, feasibility, complementary slackness
    sol.kkt_residual = std::max(kkt_violation(problem, sol), extra_violation);
    sol.status = status;
    return sol;
  };

  const int max_iter = 100 + 20 * nc;
  for (sol.iterations = 0; sol.iterations < max_iter; ++sol.iterations) {
    // candidate: unprocessed equalities first, then the most violated
    // inequality (warm-preferred ones ahead, ties to the lowest index)
    int p = -1;
    double worst = tolerance;
    for (int c = 0; c < nc && p < 0; ++c)
      if (cons[c].equality && !eq_done[c]) p = c;
    if (p < 0) {
      for (int pass = 0; pass < 2 && p < 0; ++pass) {
        for (int c = 0; c < nc; ++c) {
          if (in_active[c] || cons[c].equality) continue;
          if (pass == 0 && !preferred[c]) continue;
          const double v = violation(c);
          if (v > worst) {
            worst = v;
            p = c;
          }
        }
      }
    }
    if (p < 0) return finish(QpStatus::optimal, 0.0);

    const Constraint& con = cons[p];
    const double raw = con.a.dot(sol.x) - con.b;
    const double sign = con.equality && raw < 0 ? -1.0 : 1.0;
    if (con.equality) eq_done[p] = 1;
    const Eigen::VectorXd n_p = sign * con.a;
    double lambda_p = 0.0;

    // inner loop: step toward constraint p, dropping blocking duals as needed
    bool placed = false;
    while (!placed) {
      const int k = static_cast<int>(active.size());
      Eigen::MatrixXd nt(n, k);
      for (int j = 0; j < k; ++j) nt.col(j) = cons[active[j].id].a * active[j].sign;
      const Eigen::VectorXd hi_np = llt.solve(n_p);
      Eigen::VectorXd r(k), z;
      if (k > 0) {
        const Eigen::MatrixXd m = nt.transpose() * llt.solve(nt);
        r = m.ldlt().solve(nt.transpose() * hi_np);
        z = llt.solve(n_p - nt * r);
      } else {
        z = hi_np;
      }
      const double curv = n_p.dot(z);
      const double viol = sign * (con.a.dot(sol.x) - con.b);
      const double t2 = curv > 1e-12 ? viol / curv : kInf;

      double t1 = kInf;
      int blocker = -1;
      for (int j = 0; j < k; ++j) {
        if (cons[active[j].id].equality) continue;  // equalities never leave
        if (r[j] > 1e-12 && active[j].dual / r[j] < t1) {
          t1 = active[j].dual / r[j];
          blocker = j;
        }
      }

      if (viol <= tolerance && t2 == kInf) break;  // dependent but satisfied: skip
      const double t = std::min(t1, t2);
      if (t == kInf) return finish(QpStatus::infeasible, viol);

      if (t > 0.0) {
        sol.x -= t * z;
        for (int j = 0; j < k; ++j) active[j].dual -= t * r[j];
        lambda_p += t;
      }
      if (t2 <= t1) {
        active.push_back({p, sign, lambda_p});
        in_active[p] = 1;
        placed = true;
      } else {
        in_active[active[blocker].id] = 0;
        active.erase(active.begin() + blocker);
      }
    }
  }
  return finish(QpStatus::max_iter, 0.0);
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const int rows = static_cast<int>(j.size());
  if (rows == 0) return {};
  const int cols = static_cast<int>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  // JSON has no infinity literal; clamp absent bounds to a huge finite value
  for (int i = 0; i < v.size(); ++i) a.push_back(std::clamp(v[i], -1e300, 1e300));
  return a;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(j.size());
  for (int i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

}  // namespace

void dump_qp(const QuadraticProgram& problem, std::ostream& out) {
  nlohmann::json doc;
  doc["H"] = matrix_to_json(problem.H);
  doc["g"] = vector_to_json(problem.g);
  doc["A_eq"] = matrix_to_json(problem.A_eq);
  doc["b_eq"] = vector_to_json(problem.b_eq);
  doc["A_in"] = matrix_to_json(problem.A_in);
  doc["lower"] = vector_to_json(problem.lower);
  doc["upper"] = vector_to_json(problem.upper);
  out << doc.dump(2) << '\n';
}

QuadraticProgram load_qp(std::istream& in) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw QpError(std::string("qp: malformed dump: ") + e.what());
  }
  QuadraticProgram p;
  p.H = matrix_from_json(doc.at("H"));
  p.g = vector_from_json(doc.at("g"));
  p.A_eq = matrix_from_json(doc.at("A_eq"));
  p.b_eq = vector_from_json(doc.at("b_eq"));
  p.A_in = matrix_from_json(doc.at("A_in"));
  p.lower = vector_from_json(doc.at("lower"));
  p.upper = vector_from_json(doc.at("upper"));
  if (p.A_eq.rows() > 0 && p.A_eq.cols() != p.n()) throw QpError("qp: malformed dump");
  p.validate();
  return p;
}

}  // namespace mimic::qp
