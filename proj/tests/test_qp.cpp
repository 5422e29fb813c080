#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "mimic/qp/qp.hpp"

using namespace mimic;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

qp::QuadraticProgram scalar_problem() {
  qp::QuadraticProgram p;
  p.H = MatrixXd::Constant(1, 1, 1.0);
  p.g = VectorXd::Constant(1, -1.0);
  return p;
}

// random strictly convex H = B'B + I
MatrixXd random_spd(int n, std::mt19937& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = g(rng);
  MatrixXd h = b.transpose() * b + MatrixXd::Identity(n, n);
  return 0.5 * (h + h.transpose());
}

VectorXd random_vector(int n, std::mt19937& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

}  // namespace

TEST_CASE("unconstrained scalar minimum") {
  const auto sol = qp::solve_qp(scalar_problem());
  REQUIRE(sol.status == qp::QpStatus::optimal);
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.kkt_residual < 1e-8);
}

TEST_CASE("scalar upper bound becomes active with its hand-computed dual") {
  auto p = scalar_problem();
  p.A_in = MatrixXd::Identity(1, 1);
  p.lower = VectorXd::Constant(1, -kInf);
  p.upper = VectorXd::Constant(1, 0.5);
  const auto sol = qp::solve_qp(p);
  REQUIRE(sol.status == qp::QpStatus::optimal);
  CHECK(sol.x[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sol.dual_upper[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(sol.dual_lower[0] == 0.0);
  CHECK(sol.kkt_residual < 1e-8);
}

TEST_CASE("equality-only solutions match the dense KKT linear solve") {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 7;
    const int m = 1 + trial % n;
    qp::QuadraticProgram p;
    p.H = random_spd(n, rng);
    p.g = random_vector(n, rng);
    p.A_eq = MatrixXd(m, n);
    for (int i = 0; i < m; ++i) p.A_eq.row(i) = random_vector(n, rng).transpose();
    p.b_eq = random_vector(m, rng);

    // oracle: [H A'; A 0] [x; nu] = [-g; b]
    MatrixXd kkt = MatrixXd::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = p.H;
    kkt.topRightCorner(n, m) = p.A_eq.transpose();
    kkt.bottomLeftCorner(m, n) = p.A_eq;
    VectorXd rhs(n + m);
    rhs << -p.g, p.b_eq;
    const VectorXd direct = kkt.fullPivLu().solve(rhs);

    const auto sol = qp::solve_qp(p);
    REQUIRE(sol.status == qp::QpStatus::optimal);
    CHECK((sol.x - direct.head(n)).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK((sol.dual_eq - direct.tail(m)).lpNorm<Eigen::Infinity>() < 1e-6);
  }
}

TEST_CASE("optimum dominates randomly sampled feasible points") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 4;
    qp::QuadraticProgram p;
    p.H = random_spd(n, rng);
    p.g = random_vector(n, rng);
    p.A_in = MatrixXd::Identity(n, n);  // box so feasible sampling is direct
    p.lower = VectorXd::Constant(n, -0.8);
    p.upper = VectorXd::Constant(n, 0.8);
    const auto sol = qp::solve_qp(p);
    REQUIRE(sol.status == qp::QpStatus::optimal);
    const double best = sol.objective(p);
    for (int s = 0; s < 1000; ++s) {
      VectorXd x(n);
      for (int i = 0; i < n; ++i) x[i] = 0.8 * u(rng);
      const double obj = 0.5 * x.dot(p.H * x) + p.g.dot(x);
      CHECK(best <= obj + 1e-12);
    }
  }
}

TEST_CASE("mixed equality and inequality constraints satisfy KKT") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 6;
    qp::QuadraticProgram p;
    p.H = random_spd(n, rng);
    p.g = 3.0 * random_vector(n, rng);
    p.A_eq = MatrixXd(1, n);
    p.A_eq.row(0) = random_vector(n, rng).transpose();
    p.b_eq = VectorXd::Constant(1, 0.3);
    p.A_in = MatrixXd::Identity(n, n);
    p.lower = VectorXd::Constant(n, -0.5);
    p.upper = VectorXd::Constant(n, 0.5);
    const auto sol = qp::solve_qp(p);
    REQUIRE(sol.status == qp::QpStatus::optimal);
    CHECK(sol.kkt_residual < 1e-8);
    CHECK(std::abs(p.A_eq.row(0).dot(sol.x) - 0.3) < 1e-9);
    for (int i = 0; i < n; ++i) {
      CHECK(sol.x[i] <= 0.5 + 1e-9);
      CHECK(sol.x[i] >= -0.5 - 1e-9);
      CHECK(sol.dual_lower[i] >= 0.0);
      CHECK(sol.dual_upper[i] >= 0.0);
    }
  }
}

TEST_CASE("identical inputs give bitwise identical outputs") {
  std::mt19937 rng(3);
  qp::QuadraticProgram p;
  p.H = random_spd(5, rng);
  p.g = random_vector(5, rng);
  p.A_in = MatrixXd::Identity(5, 5);
  p.lower = VectorXd::Constant(5, -0.2);
  p.upper = VectorXd::Constant(5, 0.2);
  const auto a = qp::solve_qp(p);
  const auto b = qp::solve_qp(p);
  CHECK((a.x - b.x).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.dual_upper - b.dual_upper).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.dual_lower - b.dual_lower).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("positive objective scaling leaves the argmin unchanged") {
  std::mt19937 rng(19);
  qp::QuadraticProgram p;
  p.H = random_spd(5, rng);
  p.g = random_vector(5, rng);
  p.A_in = MatrixXd::Identity(5, 5);
  p.lower = VectorXd::Constant(5, -0.3);
  p.upper = VectorXd::Constant(5, 0.3);
  const auto base = qp::solve_qp(p);
  for (double c : {0.01, 7.0, 1e4}) {
    qp::QuadraticProgram ps = p;
    ps.H *= c;
    ps.g *= c;
    const auto sol = qp::solve_qp(ps, nullptr, 1e-8 * c);
    REQUIRE(sol.status == qp::QpStatus::optimal);
    CHECK((sol.x - base.x).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("warm start reproduces the cold optimum in fewer iterations") {
  std::mt19937 rng(23);
  qp::QuadraticProgram p;
  const int n = 8;
  p.H = random_spd(n, rng);
  p.g = 2.0 * random_vector(n, rng);
  p.A_in = MatrixXd::Identity(n, n);
  p.lower = VectorXd::Constant(n, -0.15);
  p.upper = VectorXd::Constant(n, 0.15);
  const auto cold = qp::solve_qp(p);
  REQUIRE(cold.status == qp::QpStatus::optimal);

  qp::QuadraticProgram shifted = p;
  shifted.g += 0.01 * random_vector(n, rng);
  const auto re_cold = qp::solve_qp(shifted);
  const auto warm = qp::solve_qp(shifted, &cold);
  REQUIRE(warm.status == qp::QpStatus::optimal);
  CHECK((warm.x - re_cold.x).lpNorm<Eigen::Infinity>() < 1e-9);
  CHECK(warm.objective(shifted) <= re_cold.objective(shifted) + 1e-12);
  CHECK(warm.iterations <= re_cold.iterations);
}

TEST_CASE("contradictory bounds are reported infeasible") {
  auto p = scalar_problem();
  p.A_in = MatrixXd(2, 1);
  p.A_in << 1.0, -1.0;
  p.lower = VectorXd::Constant(2, -kInf);
  p.upper = VectorXd(2);
  p.upper << -1.0, -1.0;  // x <= -1 and x >= 1
  const auto sol = qp::solve_qp(p);
  CHECK(sol.status == qp::QpStatus::infeasible);
  CHECK(sol.kkt_residual > 0.1);  // certificate: remaining violation
}

TEST_CASE("indefinite Hessian is rejected") {
  qp::QuadraticProgram p;
  p.H = MatrixXd::Constant(1, 1, -1.0);
  p.g = VectorXd::Constant(1, 0.0);
  CHECK_THROWS_AS(qp::solve_qp(p), qp::QpError);
}

TEST_CASE("semidefinite Hessian is repaired instead of rejected") {
  qp::QuadraticProgram p;
  p.H = MatrixXd::Zero(2, 2);
  p.H(0, 0) = 1.0;  // second variable unpenalized, pinned by bounds
  p.g = VectorXd::Zero(2);
  p.g[0] = -1.0;
  p.g[1] = 1.0;
  p.A_in = MatrixXd::Identity(2, 2);
  p.lower = VectorXd::Constant(2, -2.0);
  p.upper = VectorXd::Constant(2, 2.0);
  const auto sol = qp::solve_qp(p);
  REQUIRE(sol.status == qp::QpStatus::optimal);
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.x[1] == doctest::Approx(-2.0).epsilon(1e-6));
}

TEST_CASE("dump and reload round-trips a problem") {
  std::mt19937 rng(31);
  qp::QuadraticProgram p;
  p.H = random_spd(3, rng);
  p.g = random_vector(3, rng);
  p.A_eq = MatrixXd(1, 3);
  p.A_eq.row(0) = random_vector(3, rng).transpose();
  p.b_eq = VectorXd::Constant(1, 0.1);
  p.A_in = MatrixXd::Identity(3, 3);
  p.lower = VectorXd::Constant(3, -1.0);
  p.upper = VectorXd::Constant(3, 1.0);

  std::stringstream buffer;
  qp::dump_qp(p, buffer);
  const auto q = qp::load_qp(buffer);
  const auto a = qp::solve_qp(p);
  const auto b = qp::solve_qp(q);
  CHECK((a.x - b.x).lpNorm<Eigen::Infinity>() < 1e-12);
}
