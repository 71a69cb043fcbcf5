#pragma once

// Explore-Twice-then-Commit: uniform exploration with a Ridge fit of the last layer,
// uniform exploration with (preconditioned) projected SGD on (w, theta), then greedy
// commitment. Also the weak-training variant (T2 = 0) and the greedy baselines.

#include <map>
#include <string>
#include <vector>

#include "e2tc/bandit_env.hpp"
#include "e2tc/ridge.hpp"
#include "e2tc/sgd.hpp"

namespace e2tc {

struct PretrainedModel {
  Architecture arch;
  Vector theta0;
  double B_w = 1.0;
  double B_theta = 1.0;
};

struct E2tcConfig {
  std::size_t T = 0;
  std::size_t T1 = 0;
  std::size_t T2 = 0;
  double lambda = 1.0;
  double zeta_w = 1e-2;
  double zeta_theta = 1e-2;
  bool precondition = true;
  bool random_last_layer = false;  // ablation: skip Ridge, start SGD from a random w (needs T1 == 0)
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Stage { Explore1, Explore2, Commit, Greedy };

std::string stage_name(Stage stage);
Stage parse_stage(const std::string& name);

struct StepRecord {
  std::size_t t = 0;  // 1-based round index
  Stage stage = Stage::Commit;
  std::size_t action = 0;
  double reward = 0.0;
  double instant_regret = 0.0;
};

struct RunTrace {
  std::vector<StepRecord> steps;
  Vector w0;
  Vector w_bar;
  Vector theta_bar;
  std::map<std::string, double> diagnostics;

  std::size_t count(Stage stage) const;
  std::vector<double> instant_regrets() const;
};

/// Greedy choice argmax_a w^T phi_theta(X_a), ties to the lowest index.
std::size_t greedy_action(const Architecture& arch, const Vector& w, const Vector& theta, const Context& ctx);

/// Pseudo-regret of `action`: mean-reward gap, or squared prediction error for regression bandits.
double instant_regret(const BanditEnvironment& env, const Context& ctx, std::size_t action, double prediction);

RunTrace run_e2tc(const BanditEnvironment& env, const PretrainedModel& model, const E2tcConfig& config);

/// Commit loop: greedy actions under fixed weights, rounds numbered from `first_t`.
std::vector<StepRecord> commit_phase(const BanditEnvironment& env, const Architecture& arch, const Vector& w_bar,
                                     const Vector& theta_bar, std::size_t steps, Rng& rng, std::size_t first_t = 1);

/// T2 = 0 run with lambda taken from the regime prescription. On a realizable
/// finite-support environment the trace diagnostics include eps0 and ||w0 - w*||^2_{Sigma0}.
RunTrace run_weak_training(const BanditEnvironment& env, const PretrainedModel& model, E2tcConfig config,
                           Regime regime, double B_phi);

/// round((K T)^{4/5}), the data-poor exploration length.
std::size_t data_poor_T1(std::size_t num_actions, std::size_t horizon);

enum class GreedyVariant { LastLayerOnly, FromScratch, Pretrained };

GreedyVariant parse_greedy_variant(const std::string& name);
std::string greedy_variant_name(GreedyVariant variant);

struct GreedyConfig {
  GreedyVariant variant = GreedyVariant::Pretrained;
  double zeta_w = 1e-2;
  double zeta_theta = 1e-2;
  std::size_t T = 0;
  std::uint64_t seed = 0;
};

/// Greedy selection with the unprojected, unpreconditioned update after every round.
/// w starts from N(0, 1/d); theta from theta0, or from a fresh initialization for FromScratch.
RunTrace run_greedy(const BanditEnvironment& env, const PretrainedModel& model, const GreedyConfig& config);

/// theta0 = Pi_{B_theta}(theta* + eps_theta u), u uniform on the unit sphere.
Vector perturb_theta(const Vector& theta_star, double eps_theta, double B_theta, Rng& rng);

/// Moves theta* along `direction` until the exact misspecification equals `target_eps0`.
Vector theta0_with_eps0(const RealizableEnv& env, const Vector& direction, double target_eps0);

}  // namespace e2tc
