#include "mimic/retarget/retarget.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>

#include "mimic/rbd/kinematics.hpp"

namespace mimic::retarget {

using Eigen::Vector3d;
using Eigen::VectorXd;

RootTrajectory scale_root(const HumanMotion& human, const rbd::RobotModel& model) {
  if (human.height <= 0.0) throw rbd::ModelError("scale_root: zero human height");
  const double scale = model.height / human.height;
  const int pelvis = human.joint_index("pelvis");
  const int lh = human.joint_index("l_hip");
  const int rh = human.joint_index("r_hip");
  if (pelvis < 0) throw rbd::ModelError("scale_root: skeleton has no pelvis joint");

  // ground plane from the feet so scaled heights are above z = 0
  const int lf = human.joint_index("l_ankle");
  const int rf = human.joint_index("r_ankle");
  double ground = 0.0;
  if (lf >= 0 && rf >= 0) {
    ground = std::numeric_limits<double>::max();
    for (const auto& p : human.positions) ground = std::min({ground, p(lf, 2), p(rf, 2)});
  }

  RootTrajectory out;
  out.scale = scale;
  const int tn = human.frames();
  out.position.resize(tn);
  out.rpy.resize(tn);
  out.velocity.resize(tn);
  // the "ground" above is the ankle marker height; the robot's ankle sits
  // this far above its own sole, so add the clearance back after scaling
  const double ankle_clearance =
      std::max(0.0, -model.feet[0].offset.translation()[2]);
  for (int t = 0; t < tn; ++t) {
    Vector3d p = human.positions[t].row(pelvis);
    p[2] -= ground;
    out.position[t] = p * scale;
    out.position[t][2] += ankle_clearance;
    double yaw = 0.0;
    if (lh >= 0 && rh >= 0) {
      const Vector3d hip_axis = human.positions[t].row(lh) - human.positions[t].row(rh);
      if (hip_axis.head<2>().norm() > 1e-9)
        yaw = std::atan2(hip_axis[1], hip_axis[0]) - M_PI / 2.0;  // hip axis points +y at yaw 0
    }
    out.rpy[t] = Vector3d(0, 0, yaw);
  }
  for (int t = 0; t < tn; ++t) {
    const int t0 = std::max(0, t - 1);
    const int t1 = std::min(tn - 1, t + 1);
    out.velocity[t] = (out.position[t1] - out.position[t0]) * human.frame_rate / (t1 - t0);
  }
  return out;
}

namespace {

struct FrameContext {
  rbd::JointConfiguration config;
  rbd::FkResult fk;
};

FrameContext eval_frame(const rbd::RobotModel& model, const Vector3d& base_pos,
                        const Vector3d& base_rpy, const VectorXd& q) {
  FrameContext ctx;
  ctx.config.base_position = base_pos;
  ctx.config.base_rpy = base_rpy;
  ctx.config.joint_angles = q;
  ctx.fk = rbd::forward_kinematics(model, ctx.config);
  return ctx;
}

void clamp_joints(const rbd::RobotModel& model, VectorXd& q) {
  for (int j = 0; j < model.n_j(); ++j)
    q[j] = std::clamp(q[j], model.joints[j].lower, model.joints[j].upper);
}

struct TrajectoryObjective {
  const rbd::RobotModel& model;
  const HumanMotion& human;
  const RootTrajectory& root;
  const ContactSchedule& contacts;
  const std::vector<LimbPair>& pairs;
  const std::vector<std::pair<int, int>>& collision_pairs;
  const LossWeights& w;
  double torso_weight;
  double smoothing;

  // X holds q_j per frame, column-major [n_j x T]
  double operator()(const Eigen::MatrixXd& x, Eigen::MatrixXd* grad) const {
    const int tn = static_cast<int>(x.cols());
    if (grad) grad->setZero(x.rows(), tn);
    double total = 0.0;
    std::vector<rbd::FkResult> fks(tn);
    for (int t = 0; t < tn; ++t)
      fks[t] = eval_frame(model, root.position[t], root.rpy[t], x.col(t)).fk;
    VectorXd g, gp;
    for (int t = 0; t < tn; ++t) {
      total += w.vec * loss_vec(human.positions[t], model, fks[t], pairs, grad ? &g : nullptr);
      if (grad) grad->col(t) += w.vec * g;
      const rbd::FkResult* prev = t > 0 ? &fks[t - 1] : nullptr;
      total += w.foot * loss_foot(model, fks[t], prev, contacts.contact[t], human.frame_rate,
                                  grad ? &g : nullptr, grad && prev ? &gp : nullptr, smoothing);
      if (grad) {
        grad->col(t) += w.foot * g;
        if (prev) grad->col(t - 1) += w.foot * gp;
      }
      if (t > 0) {
        total += w.smo * loss_smo(x.col(t), x.col(t - 1), grad ? &g : nullptr,
                                  grad ? &gp : nullptr, smoothing);
        if (grad) {
          grad->col(t) += w.smo * g;
          grad->col(t - 1) += w.smo * gp;
        }
      }
      total += w.col * loss_col(model, fks[t], collision_pairs, grad ? &g : nullptr);
      if (grad) grad->col(t) += w.col * g;
      total +=
          torso_weight * loss_torso(human.positions[t], model, fks[t], human, grad ? &g : nullptr);
      if (grad) grad->col(t) += torso_weight * g;
    }
    return total;
  }
};

// joints on the base-to-sole chain of one foot
std::vector<int> foot_chain_joints(const rbd::RobotModel& model, int foot) {
  std::vector<int> joints;
  for (int link = model.feet[foot].link; link >= 0; link = model.links[link].parent)
    if (model.links[link].joint >= 0) joints.push_back(model.links[link].joint);
  return joints;
}

// Projected limited-memory quasi-Newton descent with a monotone backtracking
// line search. Curvature memory lets the iterates follow the narrow coupled
// valleys of the objective (e.g. waist and shoulder pitch trading off against
// each other) that plain scaled gradient steps crawl along. Joint limits are
// enforced by clamping each candidate; curvature pairs that the projection
// invalidates are dropped. Accepted iterates never increase the objective.
using DirectionFilter = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

template <typename Objective>
int minimize(const rbd::RobotModel& model, const Objective& objective, Eigen::MatrixXd& x,
             int max_iterations, double initial_step, double tol, bool* converged = nullptr,
             const std::vector<DirectionFilter>& fallbacks = {}) {
  constexpr int kMemory = 12;
  constexpr int kWindow = 25;
  constexpr double kBeta2 = 0.99;
  constexpr double kEps = 1e-8;
  Eigen::MatrixXd grad(x.rows(), x.cols());
  double loss = objective(x, &grad);
  double window_loss = loss;
  if (converged) *converged = false;
  std::vector<Eigen::MatrixXd> s_mem, y_mem;
  std::vector<double> rho_mem;
  // running second moment of the gradient; used as the diagonal seed of the
  // inverse Hessian so the stiff contact-wall coordinates and the gentle
  // limb-vector coordinates get equilibrated step sizes
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  auto dot = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.cwiseProduct(b).sum();
  };

  auto clamp_all = [&](Eigen::MatrixXd& q) {
    for (int t = 0; t < q.cols(); ++t) {
      VectorXd col = q.col(t);
      clamp_joints(model, col);
      q.col(t) = col;
    }
  };

  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
    const double c2 = 1.0 - std::pow(kBeta2, iter + 1);
    const Eigen::MatrixXd d0 =
        ((v / c2).cwiseSqrt().array() + kEps).inverse().matrix();
    // two-loop recursion with diagonal seed d0
    Eigen::MatrixXd direction = grad;
    const int k = static_cast<int>(s_mem.size());
    std::vector<double> a_coef(k);
    for (int i = k - 1; i >= 0; --i) {
      a_coef[i] = rho_mem[i] * dot(s_mem[i], direction);
      direction -= a_coef[i] * y_mem[i];
    }
    direction = direction.cwiseProduct(d0);
    if (k > 0) {
      // secant scaling of the seed in the d0 metric
      const Eigen::MatrixXd dy = y_mem[k - 1].cwiseProduct(d0);
      const double denom = dot(y_mem[k - 1], dy);
      if (denom > 0.0) direction *= dot(s_mem[k - 1], y_mem[k - 1]) / denom;
    } else {
      direction *= initial_step / std::max(1e-12, direction.lpNorm<Eigen::Infinity>());
    }
    for (int i = 0; i < k; ++i) {
      const double b = rho_mem[i] * dot(y_mem[i], direction);
      direction += (a_coef[i] - b) * s_mem[i];
    }

    bool accepted = false;
    int used = -1;
    auto try_direction = [&](const Eigen::MatrixXd& d, int tag) {
      if (d.lpNorm<Eigen::Infinity>() < 1e-15) return;
      double a = 1.0;
      for (int ls = 0; ls < 40 && a > 1e-14; ++ls) {
        Eigen::MatrixXd cand = x - a * d;
        clamp_all(cand);
        const double cand_loss = objective(cand, nullptr);
        if (cand_loss < loss) {
          Eigen::MatrixXd new_grad(x.rows(), x.cols());
          objective(cand, &new_grad);
          const Eigen::MatrixXd s = cand - x;
          const Eigen::MatrixXd y = new_grad - grad;
          const double sy = dot(s, y);
          if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
            s_mem.push_back(s);
            y_mem.push_back(y);
            rho_mem.push_back(1.0 / sy);
            if (static_cast<int>(s_mem.size()) > kMemory) {
              s_mem.erase(s_mem.begin());
              y_mem.erase(y_mem.begin());
              rho_mem.erase(rho_mem.begin());
            }
          }
          x = cand;
          loss = cand_loss;
          grad = new_grad;
          accepted = true;
          used = tag;
          return;
        }
        a *= 0.5;
      }
    };

    try_direction(direction, 0);
    if (!accepted && !s_mem.empty()) {
      // stale curvature can produce an ascent direction; restart from scratch
      s_mem.clear();
      y_mem.clear();
      rho_mem.clear();
      try_direction(grad * (initial_step / std::max(1.0, grad.lpNorm<Eigen::Infinity>())), 1);
    }
    // the objective has steep walls (contact terms pin stance feet); when the
    // raw direction is blocked, the fallbacks restrict it to moves that slide
    // along those walls instead of into them
    for (size_t f = 0; f < fallbacks.size() && !accepted; ++f)
      try_direction(fallbacks[f](grad), static_cast<int>(f) + 2);
    if (std::getenv("MIMIC_DEBUG_OPT"))
      std::fprintf(stderr, "it=%d acc=%d var=%d loss=%.8f |g|=%.4f\n", iter, (int)accepted, used,
                   loss, grad.norm());
    if (!accepted) {
      if (converged) *converged = true;
      return iter;
    }
    if ((iter + 1) % kWindow == 0) {
      if (window_loss - loss < tol * std::max(1.0, loss)) {
        if (converged) *converged = true;
        return iter + 1;
      }
      window_loss = loss;
    }
  }
  return iter;
}

}  // namespace

ReferenceTrajectory retarget_offline(const HumanMotion& human, const rbd::RobotModel& model,
                                     const RetargetOptions& options) {
  human.validate();
  const auto pairs = build_pair_table(model, human);
  const auto collision_pairs = build_collision_pairs(model);
  const auto contacts = extract_contacts(human, options.contact_params);
  const auto root = scale_root(human, model);
  const int tn = human.frames();
  const int nj = model.n_j();

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(nj, tn);
  for (int t = 0; t < tn; ++t) {
    VectorXd col = x.col(t);
    clamp_joints(model, col);
    x.col(t) = col;
  }
  // the avoidance kernel exp(-d^2) decays slowly at limb scale, so its
  // gradient perturbs every joint even in collision-free poses; solving the
  // geometric terms first and polishing with the full objective afterwards
  // keeps the avoidance term from steering the whole descent
  LossWeights geometric = options.weights;
  geometric.col = 0.0;
  TrajectoryObjective shape_only{model,   human,           root, contacts,
                                 pairs,   collision_pairs, geometric,
                                 options.torso_weight, options.smoothing};
  TrajectoryObjective objective{model,           human, root,  contacts,
                                pairs,           collision_pairs, options.weights,
                                options.torso_weight, options.smoothing};

  // wall-sliding fallbacks: a stance foot's chain may only move uniformly
  // over the whole stance run (keeps the contact-velocity terms at zero), or
  // not at all
  std::vector<DirectionFilter> fallbacks;
  const std::array<std::vector<int>, 2> chains{foot_chain_joints(model, 0),
                                               foot_chain_joints(model, 1)};
  fallbacks.push_back([&chains, &contacts, tn](const Eigen::MatrixXd& d) {
    Eigen::MatrixXd out = d;
    for (int f = 0; f < 2; ++f) {
      int run_start = -1;
      for (int t = 0; t <= tn; ++t) {
        const bool stance = t < tn && contacts.contact[t][f];
        if (stance && run_start < 0) run_start = t;
        if (!stance && run_start >= 0) {
          for (int j : chains[f]) {
            const double mean = out.row(j).segment(run_start, t - run_start).mean();
            out.row(j).segment(run_start, t - run_start).setConstant(mean);
          }
          run_start = -1;
        }
      }
    }
    return out;
  });
  fallbacks.push_back([&chains](const Eigen::MatrixXd& d) {
    Eigen::MatrixXd out = d;
    for (const auto& chain : chains)
      for (int j : chain) out.row(j).setZero();
    return out;
  });

  bool converged = false;
  minimize(model, shape_only, x, options.max_iterations, options.initial_step,
           options.convergence_tol, &converged, fallbacks);
  if (options.weights.col > 0.0) {
    bool polish_converged = false;
    minimize(model, objective, x, options.max_iterations / 4, options.initial_step,
             options.convergence_tol, &polish_converged, fallbacks);
    converged = converged && polish_converged;
  }

  ReferenceTrajectory ref;
  ref.frame_rate = human.frame_rate;
  ref.contacts = contacts;
  ref.converged = converged;
  ref.states.resize(tn);
  ref.inputs.resize(tn);
  const double dt = 1.0 / human.frame_rate;
  for (int t = 0; t < tn; ++t) {
    const int t0 = std::max(0, t - 1);
    const int t1 = std::min(tn - 1, t + 1);
    const VectorXd qdot = (x.col(t1) - x.col(t0)) / ((t1 - t0) * dt);
    rbd::JointConfiguration cfg;
    cfg.base_position = root.position[t];
    cfg.base_rpy = root.rpy[t];
    cfg.joint_angles = x.col(t);
    const Vector3d rpy_rate = (root.rpy[t1] - root.rpy[t0]) / ((t1 - t0) * dt);
    VectorXd nu(model.nv());
    nu.head<3>() = root.velocity[t];
    nu.segment<3>(3) = rbd::euler_rate_map<double>(root.rpy[t]) * rpy_rate;
    nu.tail(nj) = qdot;
    const auto cs = rbd::centroidal_momentum(model, cfg, nu);

    VectorXd state(12 + nj);
    state << cs.h, root.position[t], root.rpy[t], x.col(t);
    ref.states[t] = state;

    VectorXd input = VectorXd::Zero(12 + nj);
    const int n_stance = (contacts.contact[t][0] ? 1 : 0) + (contacts.contact[t][1] ? 1 : 0);
    if (n_stance == 0) {
      ref.contact_warning = true;
    } else {
      const double fz = model.total_mass * rbd::kGravity / n_stance;
      for (int f = 0; f < 2; ++f)
        if (contacts.contact[t][f]) input[6 * f + 2] = fz;
    }
    input.tail(nj) = qdot;
    ref.inputs[t] = input;
  }
  return ref;
}

OnlineRetargeter::OnlineRetargeter(const rbd::RobotModel& model, const RetargetOptions& options)
    : model_(model), options_(options), collision_pairs_(build_collision_pairs(model)) {}

OnlineRetargeter::StepResult OnlineRetargeter::step(const HumanMotion& window) {
  const auto start = std::chrono::steady_clock::now();
  if (window.frames() < 1) throw rbd::ModelError("online step needs at least one frame");
  if (pairs_.empty()) pairs_ = build_pair_table(model_, window);

  const int lf = window.joint_index("l_ankle");
  const int rf = window.joint_index("r_ankle");
  const int newest = window.frames() - 1;
  for (int t = 0; t < window.frames(); ++t) {
    const double lo = std::min(window.positions[t](lf, 2), window.positions[t](rf, 2));
    human_ground_ = ground_set_ ? std::min(human_ground_, lo) : lo;
    ground_set_ = true;
  }

  // contact flags from the newest pair of frames
  std::array<bool, 2> contact{true, true};
  if (window.frames() >= 2) {
    const std::array<int, 2> feet{lf, rf};
    for (int f = 0; f < 2; ++f) {
      const double h = window.positions[newest](feet[f], 2) - human_ground_;
      const double speed =
          (window.positions[newest].row(feet[f]) - window.positions[newest - 1].row(feet[f]))
              .norm() *
          window.frame_rate;
      contact[f] = h < options_.contact_params.height_threshold &&
                   speed < options_.contact_params.speed_threshold;
    }
  }

  const double scale = model_.height / window.height;
  const int pelvis = window.joint_index("pelvis");
  Vector3d base = window.positions[newest].row(pelvis);
  base[2] -= human_ground_;
  base *= scale;
  base[2] += std::max(0.0, -model_.feet[0].offset.translation()[2]);
  const int lh = window.joint_index("l_hip");
  const int rh = window.joint_index("r_hip");
  double yaw = 0.0;
  if (lh >= 0 && rh >= 0) {
    const Vector3d hip_axis = window.positions[newest].row(lh) - window.positions[newest].row(rh);
    if (hip_axis.head<2>().norm() > 1e-9) yaw = std::atan2(hip_axis[1], hip_axis[0]) - M_PI / 2.0;
  }
  const Vector3d rpy(0, 0, yaw);

  const bool first = !prev_q_.has_value();
  VectorXd q = first ? VectorXd::Zero(model_.n_j()) : *prev_q_;
  clamp_joints(model_, q);
  const VectorXd q_prev = q;
  const Vector3d base_prev = prev_base_.value_or(base);

  // frame-local objective with warm start from the previous emitted frame
  auto objective = [&](const Eigen::MatrixXd& xm, Eigen::MatrixXd* gm) {
    const VectorXd qq = xm.col(0);
    const auto ctx = eval_frame(model_, base, rpy, qq);
    VectorXd g;
    double total = options_.weights.vec *
                   loss_vec(window.positions[newest], model_, ctx.fk, pairs_, gm ? &g : nullptr);
    if (gm) gm->col(0) = options_.weights.vec * g;
    const rbd::FkResult* prev_fk = nullptr;
    rbd::FkResult prev_store;
    if (!first) {
      prev_store = eval_frame(model_, base_prev, rpy, q_prev).fk;
      prev_fk = &prev_store;
    }
    total += options_.weights.foot *
             loss_foot(model_, ctx.fk, prev_fk, contact, window.frame_rate, gm ? &g : nullptr,
                       nullptr, options_.smoothing);
    if (gm) gm->col(0) += options_.weights.foot * g;
    if (!first) {
      total += options_.weights.smo *
               loss_smo(qq, q_prev, gm ? &g : nullptr, nullptr, options_.smoothing);
      if (gm) gm->col(0) += options_.weights.smo * g;
    }
    total += options_.weights.col * loss_col(model_, ctx.fk, collision_pairs_, gm ? &g : nullptr);
    if (gm) gm->col(0) += options_.weights.col * g;
    total += options_.torso_weight *
             loss_torso(window.positions[newest], model_, ctx.fk, window, gm ? &g : nullptr);
    if (gm) gm->col(0) += options_.torso_weight * g;
    return total;
  };

  std::vector<DirectionFilter> fallbacks;
  fallbacks.push_back([this](const Eigen::MatrixXd& d) {
    Eigen::MatrixXd out = d;
    for (int f = 0; f < 2; ++f)
      for (int j : foot_chain_joints(model_, f)) out.row(j).setZero();
    return out;
  });

  Eigen::MatrixXd xm = q;
  const int iters = first ? 60 : options_.online_iterations;
  minimize(model_, objective, xm, iters, options_.initial_step, 0.0, nullptr, fallbacks);
  q = xm.col(0);

  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (!first && prev_result_ && ms > options_.online_budget_ms) {
    StepResult stale = *prev_result_;
    stale.stale = true;
    stale.solve_ms = ms;
    return stale;
  }

  const double dt = 1.0 / window.frame_rate;
  const VectorXd qdot = first ? VectorXd::Zero(model_.n_j()).eval() : ((q - q_prev) / dt).eval();
  rbd::JointConfiguration cfg;
  cfg.base_position = base;
  cfg.base_rpy = rpy;
  cfg.joint_angles = q;
  VectorXd nu(model_.nv());
  nu.head<3>() = first ? Vector3d::Zero() : Vector3d((base - base_prev) / dt);
  nu.segment<3>(3).setZero();
  nu.tail(model_.n_j()) = qdot;
  const auto cs = rbd::centroidal_momentum(model_, cfg, nu);

  StepResult result;
  result.state.resize(12 + model_.n_j());
  result.state << cs.h, base, rpy, q;
  result.input = VectorXd::Zero(12 + model_.n_j());
  const int n_stance = (contact[0] ? 1 : 0) + (contact[1] ? 1 : 0);
  if (n_stance > 0) {
    const double fz = model_.total_mass * rbd::kGravity / n_stance;
    for (int f = 0; f < 2; ++f)
      if (contact[f]) result.input[6 * f + 2] = fz;
  }
  result.input.tail(model_.n_j()) = qdot;
  result.contact = contact;
  result.solve_ms = ms;

  prev_q_ = q;
  prev_base_ = base;
  prev_result_ = result;
  return result;
}

}  // namespace mimic::retarget
