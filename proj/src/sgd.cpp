#include "e2tc/sgd.hpp"

#include <cmath>
#include <stdexcept>

namespace e2tc {

namespace {

constexpr std::size_t kFullStorageSteps = 100000;
constexpr std::size_t kCheckpoints = 1024;

double positive_log_log(double y) {
  if (!(y > std::exp(1.0))) return 0.0;
  return std::log(std::log(y));
}

}  // namespace

Vector grad_w(const Architecture& arch, const Vector& w, const Vector& theta, const Vector& x, double r) {
  const Vector phi = forward(arch, theta, x);
  return 2.0 * (w.dot(phi) - r) * phi;
}

Vector grad_theta(const Architecture& arch, const Vector& w, const Vector& theta, const Vector& x, double r) {
  const Vector phi = forward(arch, theta, x);
  const double residual = w.dot(phi) - r;
  return 2.0 * residual * jacobian_t_apply(arch, theta, x, w);
}

StepInfo sgd_step(const Architecture& arch, SgdState& state, const Sample& sample, const SgdConfig& config,
                  const RegularizedCovariance* cov) {
  if (config.precondition && cov == nullptr)
    throw std::invalid_argument("sgd_step: preconditioning requested without a covariance");
  ParameterState& p = state.params;
  const Vector phi = forward(arch, p.theta, sample.x);
  const double residual = p.w.dot(phi) - sample.r;
  const Vector v_w = 2.0 * residual * phi;
  const Vector v_theta = 2.0 * residual * jacobian_t_apply(arch, p.theta, sample.x, p.w);

  StepInfo info;
  info.grad_w_norm = v_w.norm();
  info.grad_theta_norm = v_theta.norm();

  Vector w_next = config.precondition ? Vector(p.w - config.zeta_w * cov->solve(v_w))
                                      : Vector(p.w - config.zeta_w * v_w);
  Vector theta_next = p.theta - config.zeta_theta * v_theta;
  if (config.project) {
    if (w_next.norm() > p.B_w) {
      w_next = project_ball(w_next, p.B_w);
      info.w_projected = true;
      ++state.w_projections;
    }
    if (theta_next.norm() > p.B_theta) {
      theta_next = project_ball(theta_next, p.B_theta);
      info.theta_projected = true;
      ++state.theta_projections;
    }
  }
  p.w = std::move(w_next);
  p.theta = std::move(theta_next);
  return info;
}

Trajectory::Trajectory(std::size_t planned_steps, Eigen::Index dim_w, Eigen::Index dim_theta)
    : sum_w_(Vector::Zero(dim_w)), sum_theta_(Vector::Zero(dim_theta)) {
  if (planned_steps > kFullStorageSteps) stride_ = (planned_steps + kCheckpoints - 1) / kCheckpoints;
}

void Trajectory::record(const Vector& w, const Vector& theta) {
  if (sum_w_.size() == 0 && sum_theta_.size() == 0 && steps_ == 0) {
    sum_w_ = Vector::Zero(w.size());
    sum_theta_ = Vector::Zero(theta.size());
  }
  sum_w_ += w;
  sum_theta_ += theta;
  if (steps_ % stride_ == 0) {
    stored_steps_.push_back(steps_);
    stored_w_.push_back(w);
    stored_theta_.push_back(theta);
  }
  ++steps_;
}

Vector Trajectory::w_bar() const {
  if (steps_ == 0) throw std::logic_error("Trajectory::w_bar on an empty trajectory");
  return sum_w_ / static_cast<double>(steps_);
}

Vector Trajectory::theta_bar() const {
  if (steps_ == 0) throw std::logic_error("Trajectory::theta_bar on an empty trajectory");
  return sum_theta_ / static_cast<double>(steps_);
}

SgdResult run_sgd(const Architecture& arch, const SampleStream& stream, const ParameterState& init,
                  const SgdConfig& config, const RegularizedCovariance* cov, Rng& rng) {
  if (config.T2 < 1) throw std::invalid_argument("run_sgd: T2 must be >= 1");
  if (config.precondition && cov == nullptr)
    throw std::invalid_argument("run_sgd: preconditioning requested without a covariance");

  SgdResult out;
  out.final_state.params = init;
  out.trajectory = Trajectory(config.T2, init.w.size(), init.theta.size());
  for (std::size_t t = 0; t < config.T2; ++t) {
    out.trajectory.record(out.final_state.params.w, out.final_state.params.theta);
    const Sample sample = stream(rng);
    const StepInfo info = sgd_step(arch, out.final_state, sample, config, cov);
    out.max_grad_w_norm = std::max(out.max_grad_w_norm, info.grad_w_norm);
    out.max_grad_theta_norm = std::max(out.max_grad_theta_norm, info.grad_theta_norm);
  }
  out.trajectory.w_projections = out.final_state.w_projections;
  out.trajectory.theta_projections = out.final_state.theta_projections;
  out.w_bar = out.trajectory.w_bar();
  out.theta_bar = out.trajectory.theta_bar();
  return out;
}

double suboptimality_gap(const RealizableEnv& env, const Vector& w, const Vector& theta, std::size_t mc_samples,
                         std::uint64_t seed) {
  if (!env.realizable()) throw EnvError("risk evaluation requires a realizable environment");
  const auto sq_gap = [&](const Vector& x) {
    const double diff = w.dot(forward(env.arch(), theta, x)) - env.mean_reward(x);
    return diff * diff;
  };
  if (const auto* fs = env.finite_support()) {
    double total = 0.0;
    for (std::size_t i = 0; i < fs->points.size(); ++i) total += fs->probs[i] * sq_gap(fs->points[i]);
    return total;
  }
  if (mc_samples == 0) throw EnvError("generator-mode risk needs a Monte-Carlo sample size");
  Rng rng(seed);
  double total = 0.0;
  for (std::size_t i = 0; i < mc_samples; ++i) total += sq_gap(env.draw_input(rng));
  return total / static_cast<double>(mc_samples);
}

double risk(const RealizableEnv& env, const Vector& w, const Vector& theta, std::size_t mc_samples,
            std::uint64_t seed) {
  return suboptimality_gap(env, w, theta, mc_samples, seed) + env.noise_second_moment();
}

std::optional<std::size_t> containment_check(const Trajectory& trajectory, const Vector& w_star,
                                             const Vector& theta_star, const SymMatrix* sigma0, double eps_c) {
  const double limit = eps_c * eps_c;
  const auto& ws = trajectory.stored_w();
  const auto& thetas = trajectory.stored_theta();
  for (std::size_t i = 0; i < ws.size(); ++i) {
    if (ws[i].size() != w_star.size() || thetas[i].size() != theta_star.size())
      throw DimensionError("containment_check: iterate dimension mismatch");
    double dist = (thetas[i] - theta_star).squaredNorm();
    if (w_star.size() > 0) {
      if (sigma0 == nullptr) throw std::invalid_argument("containment_check: Sigma0 required for w");
      const double nw = weighted_norm(ws[i] - w_star, *sigma0, 0.0);
      dist += nw * nw;
    }
    if (dist >= limit) return trajectory.stored_steps()[i];
  }
  return std::nullopt;
}

Table trajectory_table(const Trajectory& trajectory, const RealizableEnv& env, const SymMatrix& sigma0) {
  Table table;
  table.columns = {"t", "w_dist_sigma0", "theta_dist"};
  const bool exact = env.finite_support() != nullptr;
  if (exact) table.columns.emplace_back("risk_gap");
  for (std::size_t i = 0; i < trajectory.stored_w().size(); ++i) {
    const Vector& w = trajectory.stored_w()[i];
    const Vector& theta = trajectory.stored_theta()[i];
    std::vector<Cell> row{static_cast<std::int64_t>(trajectory.stored_steps()[i] + 1),
                          weighted_norm(w - env.w_star(), sigma0, 0.0), (theta - env.theta_star()).norm()};
    if (exact) row.emplace_back(suboptimality_gap(env, w, theta));
    table.rows.push_back(std::move(row));
  }
  return table;
}

Trajectory run_projected_sgd(const Vector& omega1, double zeta, std::size_t steps, double B_omega,
                             const GradientOracle& oracle, Rng& rng) {
  Trajectory traj(steps, 0, omega1.size());
  Vector omega = omega1;
  const Vector empty(0);
  for (std::size_t t = 0; t < steps; ++t) {
    traj.record(empty, omega);
    Vector next = omega - zeta * oracle(omega, rng);
    if (next.norm() > B_omega) {
      next = project_ball(next, B_omega);
      ++traj.theta_projections;
    }
    omega = std::move(next);
  }
  return traj;
}

double azuma_bound(double B, double T, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in (0, 1]");
  return B * std::sqrt(2.0 * T * std::log(1.0 / delta));
}

double uniform_azuma_bound(double B, double t, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (!(B > 0.0) || !(t >= 1.0)) throw std::invalid_argument("uniform_azuma_bound: need B > 0 and t >= 1");
  return 2.5 * B * std::sqrt(t * (positive_log_log(std::exp(1.0) * t * B * B) + std::log(2.0 / delta)));
}

ContainmentResult containment_condition(double zeta, double D, double T, double delta, double gap,
                                        double B_omega) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  const double zd = zeta * D;
  const double inner = 2.0 * zd * zd + 8.0 * zd * B_omega;
  const double root = std::sqrt(T * positive_log_log(std::exp(1.0) * T * inner * inner) + T * std::log(2.0 / delta));
  ContainmentResult out;
  out.lhs = zd * zd * T + 5.0 * (zd * zd + 4.0 * zd * B_omega) * root;
  out.feasible = out.lhs < gap;
  return out;
}

double largest_feasible_rate(double D, double T, double delta, double gap, double B_omega) {
  double lo = 0.0;
  double hi = 1.0;
  while (containment_condition(hi, D, T, delta, gap, B_omega).feasible && hi < 1e12) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (containment_condition(mid, D, T, delta, gap, B_omega).feasible)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

double highp_sgd_bound(double norm_init_dist_sq, double zeta, double T, double D, double B_omega, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in (0, 1]");
  return norm_init_dist_sq / (2.0 * zeta * T) + zeta * D * D / 2.0 +
         4.0 * D * B_omega * std::sqrt(2.0 * std::log(1.0 / delta) / T);
}

}  // namespace e2tc
