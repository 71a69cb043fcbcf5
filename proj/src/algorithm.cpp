#include "e2tc/algorithm.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace e2tc {

void E2tcConfig::validate() const {
  if (T1 + T2 > T) throw std::invalid_argument("E2TC config: T1 + T2 must not exceed T");
  if ((T1 > 0 || precondition) && !(lambda > 0.0))
    throw std::invalid_argument("E2TC config: lambda must be positive when T1 > 0 or preconditioning");
  if (zeta_w < 0.0 || zeta_theta < 0.0) throw std::invalid_argument("E2TC config: learning rates must be nonnegative");
  if (random_last_layer && T1 > 0) throw std::invalid_argument("E2TC config: random_last_layer requires T1 == 0");
}

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::Explore1: return "explore1";
    case Stage::Explore2: return "explore2";
    case Stage::Commit: return "commit";
    case Stage::Greedy: return "greedy";
  }
  return "unknown";
}

Stage parse_stage(const std::string& name) {
  if (name == "explore1") return Stage::Explore1;
  if (name == "explore2") return Stage::Explore2;
  if (name == "commit") return Stage::Commit;
  if (name == "greedy") return Stage::Greedy;
  throw std::invalid_argument("unknown stage '" + name + "'");
}

std::size_t RunTrace::count(Stage stage) const {
  std::size_t n = 0;
  for (const StepRecord& s : steps) n += s.stage == stage ? 1 : 0;
  return n;
}

std::vector<double> RunTrace::instant_regrets() const {
  std::vector<double> out;
  out.reserve(steps.size());
  for (const StepRecord& s : steps) out.push_back(s.instant_regret);
  return out;
}

std::size_t greedy_action(const Architecture& arch, const Vector& w, const Vector& theta, const Context& ctx) {
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < ctx.actions.size(); ++a) {
    const double score = w.dot(forward(arch, theta, ctx.actions[a]));
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  return best;
}

double instant_regret(const BanditEnvironment& env, const Context& ctx, std::size_t action, double prediction) {
  if (env.regret_kind() == RegretKind::SquaredError) {
    const double diff = prediction - env.mean_reward(ctx, action);
    return diff * diff;
  }
  const double best = env.mean_reward(ctx, env.optimal_action(ctx));
  return std::max(best - env.mean_reward(ctx, action), 0.0);
}

namespace {

struct Observation {
  StepRecord record;
  Vector x;
};

Observation explore_round(const BanditEnvironment& env, const Architecture& arch, const Vector& w,
                          const Vector& theta, Stage stage, std::size_t t, Rng& rng) {
  const Context ctx = env.sample_context(rng);
  std::uniform_int_distribution<std::size_t> pick(0, ctx.actions.size() - 1);
  const std::size_t a = pick(rng);
  Observation obs;
  obs.record.t = t;
  obs.record.stage = stage;
  obs.record.action = a;
  obs.record.reward = env.sample_reward(ctx, a, rng);
  const double prediction =
      env.regret_kind() == RegretKind::SquaredError ? w.dot(forward(arch, theta, ctx.actions[a])) : 0.0;
  obs.record.instant_regret = instant_regret(env, ctx, a, prediction);
  obs.x = ctx.actions[a];
  return obs;
}

}  // namespace

std::vector<StepRecord> commit_phase(const BanditEnvironment& env, const Architecture& arch, const Vector& w_bar,
                                     const Vector& theta_bar, std::size_t steps, Rng& rng, std::size_t first_t) {
  std::vector<StepRecord> out;
  out.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const Context ctx = env.sample_context(rng);
    const std::size_t a = greedy_action(arch, w_bar, theta_bar, ctx);
    StepRecord rec;
    rec.t = first_t + i;
    rec.stage = Stage::Commit;
    rec.action = a;
    rec.reward = env.sample_reward(ctx, a, rng);
    const double prediction =
        env.regret_kind() == RegretKind::SquaredError ? w_bar.dot(forward(arch, theta_bar, ctx.actions[a])) : 0.0;
    rec.instant_regret = instant_regret(env, ctx, a, prediction);
    out.push_back(rec);
  }
  return out;
}

RunTrace run_e2tc(const BanditEnvironment& env, const PretrainedModel& model, const E2tcConfig& config) {
  config.validate();
  const Architecture& arch = model.arch;
  if (env.input_dim() != arch.input_dim) throw DimensionError("run_e2tc: environment and model input dims differ");
  Rng rng(config.seed);
  RunTrace trace;
  trace.steps.reserve(config.T);
  const auto d = static_cast<Eigen::Index>(arch.feature_dim);

  // Stage 1: uniform exploration, Ridge on phi_{theta0}.
  std::vector<Vector> features;
  std::vector<double> rewards;
  features.reserve(config.T1);
  rewards.reserve(config.T1);
  const Vector zero_w = Vector::Zero(d);
  for (std::size_t t = 0; t < config.T1; ++t) {
    Observation obs = explore_round(env, arch, zero_w, model.theta0, Stage::Explore1, t + 1, rng);
    features.push_back(forward(arch, model.theta0, obs.x));
    rewards.push_back(obs.record.reward);
    trace.steps.push_back(obs.record);
  }

  std::optional<RegularizedCovariance> cov;
  if (config.T1 > 0) {
    cov.emplace(empirical_covariance(features), config.lambda);
    trace.w0 = ridge_fit(features, rewards, config.lambda);
  } else {
    if (config.lambda > 0.0) cov.emplace(SymMatrix::zeros(arch.feature_dim), config.lambda);
    trace.w0 = config.random_last_layer ? init_params(arch, config.seed ^ 0x5bd1e995ULL).w : zero_w;
  }

  // Stage 2: uniform exploration, projected SGD from (w0, theta0).
  Vector w_bar = trace.w0;
  Vector theta_bar = model.theta0;
  if (config.T2 > 0) {
    SgdConfig sgd;
    sgd.zeta_w = config.zeta_w;
    sgd.zeta_theta = config.zeta_theta;
    sgd.T2 = config.T2;
    sgd.precondition = config.precondition;
    sgd.lambda = config.lambda;

    SgdState state;
    state.params = ParameterState{trace.w0, model.theta0, model.B_w, model.B_theta};
    Trajectory traj(config.T2, d, model.theta0.size());
    for (std::size_t t = 0; t < config.T2; ++t) {
      traj.record(state.params.w, state.params.theta);
      Observation obs =
          explore_round(env, arch, state.params.w, state.params.theta, Stage::Explore2, config.T1 + t + 1, rng);
      sgd_step(arch, state, Sample{obs.x, obs.record.reward}, sgd, config.precondition ? &*cov : nullptr);
      trace.steps.push_back(obs.record);
    }
    w_bar = traj.w_bar();
    theta_bar = traj.theta_bar();
    trace.diagnostics["w_projections"] = static_cast<double>(state.w_projections);
    trace.diagnostics["theta_projections"] = static_cast<double>(state.theta_projections);
  }
  trace.w_bar = w_bar;
  trace.theta_bar = theta_bar;

  // Commit.
  const std::size_t commit_steps = config.T - config.T1 - config.T2;
  auto commits = commit_phase(env, arch, w_bar, theta_bar, commit_steps, rng, config.T1 + config.T2 + 1);
  trace.steps.insert(trace.steps.end(), commits.begin(), commits.end());
  return trace;
}

RunTrace run_weak_training(const BanditEnvironment& env, const PretrainedModel& model, E2tcConfig config,
                           Regime regime, double B_phi) {
  if (config.T2 != 0) throw std::invalid_argument("run_weak_training: T2 must be 0");
  config.lambda = regime_lambda(regime, static_cast<double>(config.T1), B_phi);
  config.precondition = false;
  RunTrace trace = run_e2tc(env, model, config);
  trace.diagnostics["lambda"] = config.lambda;

  const auto* real = dynamic_cast<const RealizableEnv*>(&env);
  if (real != nullptr && real->finite_support() != nullptr && real->arch() == model.arch) {
    trace.diagnostics["eps0"] = misspecification_eps0(*real, model.theta0).value;
    const SymMatrix sigma0 = true_covariance(*real, model.theta0);
    const double dist = weighted_norm(trace.w0 - real->w_star(), sigma0, 0.0);
    trace.diagnostics["w0_dist_sigma0_sq"] = dist * dist;
  }
  return trace;
}

std::size_t data_poor_T1(std::size_t num_actions, std::size_t horizon) {
  const double kt = static_cast<double>(num_actions) * static_cast<double>(horizon);
  return static_cast<std::size_t>(std::llround(std::pow(kt, 0.8)));
}

GreedyVariant parse_greedy_variant(const std::string& name) {
  if (name == "last-layer-only") return GreedyVariant::LastLayerOnly;
  if (name == "from-scratch") return GreedyVariant::FromScratch;
  if (name == "pretrained") return GreedyVariant::Pretrained;
  throw std::invalid_argument("unknown greedy variant '" + name + "'");
}

std::string greedy_variant_name(GreedyVariant variant) {
  switch (variant) {
    case GreedyVariant::LastLayerOnly: return "last-layer-only";
    case GreedyVariant::FromScratch: return "from-scratch";
    case GreedyVariant::Pretrained: return "pretrained";
  }
  return "unknown";
}

RunTrace run_greedy(const BanditEnvironment& env, const PretrainedModel& model, const GreedyConfig& config) {
  const Architecture& arch = model.arch;
  if (env.input_dim() != arch.input_dim) throw DimensionError("run_greedy: environment and model input dims differ");
  Rng rng(config.seed);
  const InitialParams init = init_params(arch, config.seed ^ 0x5bd1e995ULL);
  Vector w = init.w;
  Vector theta = config.variant == GreedyVariant::FromScratch ? init.theta : model.theta0;
  const bool train_theta = config.variant != GreedyVariant::LastLayerOnly;

  RunTrace trace;
  trace.steps.reserve(config.T);
  trace.w0 = w;
  for (std::size_t t = 0; t < config.T; ++t) {
    const Context ctx = env.sample_context(rng);
    const std::size_t a = greedy_action(arch, w, theta, ctx);
    const double r = env.sample_reward(ctx, a, rng);
    const Vector& x = ctx.actions[a];
    const Vector phi = forward(arch, theta, x);
    const double prediction = w.dot(phi);

    StepRecord rec;
    rec.t = t + 1;
    rec.stage = Stage::Greedy;
    rec.action = a;
    rec.reward = r;
    rec.instant_regret = instant_regret(env, ctx, a, prediction);
    trace.steps.push_back(rec);

    const double residual = prediction - r;
    if (train_theta) {
      const Vector v_theta = 2.0 * residual * jacobian_t_apply(arch, theta, x, w);
      theta -= config.zeta_theta * v_theta;
    }
    w -= config.zeta_w * (2.0 * residual * phi);
  }
  trace.w_bar = w;
  trace.theta_bar = theta;
  return trace;
}

Vector perturb_theta(const Vector& theta_star, double eps_theta, double B_theta, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector u(theta_star.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = normal(rng);
  u.normalize();
  return project_ball(theta_star + eps_theta * u, B_theta);
}

Vector theta0_with_eps0(const RealizableEnv& env, const Vector& direction, double target_eps0) {
  if (target_eps0 < 0.0) throw std::invalid_argument("theta0_with_eps0: target must be nonnegative");
  const Vector u = direction.normalized();
  const auto theta_at = [&](double s) { return project_ball(env.theta_star() + s * u, env.B_theta()); };
  const auto eps_at = [&](double s) { return misspecification_eps0(env, theta_at(s)).value; };
  if (target_eps0 == 0.0) return env.theta_star();

  double lo = 0.0;
  double hi = 1e-3;
  while (eps_at(hi) < target_eps0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) throw std::runtime_error("theta0_with_eps0: target misspecification not reachable");
  }
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (eps_at(mid) < target_eps0)
      lo = mid;
    else
      hi = mid;
  }
  return theta_at(hi);
}

}  // namespace e2tc
