#pragma once

// Stage-2 optimizer: unbiased gradient estimators of the squared risk, projected SGD
// with optional (Sigma_hat_0 + lambda I) preconditioning on w, trajectory averaging,
// exact risk evaluation on finite support, and martingale / containment bound evaluators.

#include <functional>
#include <optional>

#include "e2tc/bandit_env.hpp"
#include "e2tc/ridge.hpp"
#include "e2tc/table.hpp"

namespace e2tc {

struct SgdConfig {
  double zeta_w = 1e-2;
  double zeta_theta = 1e-2;
  std::size_t T2 = 0;
  bool precondition = false;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  bool project = true;
};

struct Sample {
  Vector x;
  double r = 0.0;
};

using SampleStream = std::function<Sample(Rng&)>;

/// v^w = 2 (w^T phi_theta(x) - r) phi_theta(x)
Vector grad_w(const Architecture& arch, const Vector& w, const Vector& theta, const Vector& x, double r);
/// v^theta = 2 (w^T phi_theta(x) - r) J_theta(x)^T w
Vector grad_theta(const Architecture& arch, const Vector& w, const Vector& theta, const Vector& x, double r);

struct SgdState {
  ParameterState params;
  std::size_t w_projections = 0;
  std::size_t theta_projections = 0;
};

struct StepInfo {
  double grad_w_norm = 0.0;
  double grad_theta_norm = 0.0;
  bool w_projected = false;
  bool theta_projected = false;
};

/// w <- Pi_{B_w}(w - zeta_w P^{-1} v^w), theta <- Pi_{B_theta}(theta - zeta_theta v^theta),
/// with P = Sigma_hat_lambda when preconditioning and I otherwise.
StepInfo sgd_step(const Architecture& arch, SgdState& state, const Sample& sample, const SgdConfig& config,
                  const RegularizedCovariance* cov);

/// Iterates of one run. Stores every iterate up to 1e5 steps, else 1024 evenly spaced
/// checkpoints; the running sums behind the averages are always exact.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::size_t planned_steps, Eigen::Index dim_w, Eigen::Index dim_theta);

  void record(const Vector& w, const Vector& theta);

  std::size_t steps() const { return steps_; }
  Vector w_bar() const;
  Vector theta_bar() const;

  const std::vector<std::size_t>& stored_steps() const { return stored_steps_; }
  const std::vector<Vector>& stored_w() const { return stored_w_; }
  const std::vector<Vector>& stored_theta() const { return stored_theta_; }

  std::size_t w_projections = 0;
  std::size_t theta_projections = 0;

 private:
  std::size_t stride_ = 1;
  std::size_t steps_ = 0;
  Vector sum_w_, sum_theta_;
  std::vector<std::size_t> stored_steps_;
  std::vector<Vector> stored_w_, stored_theta_;
};

struct SgdResult {
  Vector w_bar;
  Vector theta_bar;
  Trajectory trajectory;
  SgdState final_state;
  double max_grad_w_norm = 0.0;
  double max_grad_theta_norm = 0.0;
};

/// T2 steps on fresh samples; the averages run over the pre-update iterates.
SgdResult run_sgd(const Architecture& arch, const SampleStream& stream, const ParameterState& init,
                  const SgdConfig& config, const RegularizedCovariance* cov, Rng& rng);

/// E[(w^T phi_theta(X) - w*^T phi_theta*(X))^2] + E[eta^2]. Exact on finite support,
/// Monte-Carlo over `mc_samples` draws otherwise.
double risk(const RealizableEnv& env, const Vector& w, const Vector& theta, std::size_t mc_samples = 0,
            std::uint64_t seed = 0);
double suboptimality_gap(const RealizableEnv& env, const Vector& w, const Vector& theta,
                         std::size_t mc_samples = 0, std::uint64_t seed = 0);

/// First stored iterate with ||w - w*||^2_{Sigma0} + ||theta - theta*||^2 >= eps_c^2.
/// Returns the step index of that iterate.
std::optional<std::size_t> containment_check(const Trajectory& trajectory, const Vector& w_star,
                                             const Vector& theta_star, const SymMatrix* sigma0, double eps_c);

/// Trajectory export: t, ||w_t - w*||_{Sigma0}, ||theta_t - theta*||, and the risk gap on finite support.
Table trajectory_table(const Trajectory& trajectory, const RealizableEnv& env, const SymMatrix& sigma0);

/// Plain projected SGD on a generic parameter vector, used for basin experiments.
using GradientOracle = std::function<Vector(const Vector&, Rng&)>;
Trajectory run_projected_sgd(const Vector& omega1, double zeta, std::size_t steps, double B_omega,
                             const GradientOracle& oracle, Rng& rng);

/// B sqrt(2 T log(1/delta))
double azuma_bound(double B, double T, double delta);
/// (5B/2) sqrt(t ((log log(e t B^2))_+ + log(2/delta)))
double uniform_azuma_bound(double B, double t, double delta);

struct ContainmentResult {
  bool feasible = false;
  double lhs = 0.0;
};

ContainmentResult containment_condition(double zeta, double D, double T, double delta, double gap,
                                        double B_omega);

/// Largest zeta satisfying containment_condition, by bisection.
double largest_feasible_rate(double D, double T, double delta, double gap, double B_omega);

/// dist^2/(2 zeta T) + zeta D^2 / 2 + 4 D B_omega sqrt(2 log(1/delta) / T)
double highp_sgd_bound(double norm_init_dist_sq, double zeta, double T, double D, double B_omega, double delta);

}  // namespace e2tc
