// e2tc: command-line front end.
//
//   e2tc pretrain <config>          theta0 file + spectrum CSVs
//   e2tc run <config> [--seed N] [--plot]
//   e2tc sweep <config>             ranked grid table
//   e2tc tune-t2 <config>           fitted curve + T2*
//   e2tc diag <config>              bound calculator CSV
//   e2tc report <dir>               aggregate of trace_*.csv in a directory
//
// Exit status: 0 success, 1 usage or configuration error, 2 runtime error.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "e2tc/algorithm.hpp"
#include "e2tc/config.hpp"
#include "e2tc/harness.hpp"
#include "e2tc/pretrain.hpp"
#include "e2tc/tuning.hpp"

namespace fs = std::filesystem;
using namespace e2tc;

namespace {

const std::vector<std::string> kEnvKeys = {
    "kind",        "input_dim",  "hidden_dim",  "feature_dim", "num_actions", "noise_bound", "support_size",
    "context_scale", "radius_factor", "env_seed", "eps_theta",  "eps0",        "theta0_seed", "theta0_path",
    "item_dim",    "items",      "class_noise", "data_path",   "B_w",         "B_theta"};

const std::vector<std::string> kAlgoKeys = {
    "algorithm",       "T",         "T1",         "T2",          "lambda",      "zeta_w",     "zeta_theta",
    "precondition",    "random_last_layer", "regime", "B_phi",   "seeds",       "master_seed", "workers",
    "zeta_w_grid",     "zeta_theta_grid", "lambda_grid", "t2_values", "measured_t2", "measured_f",
    "explore_cost",    "mc_samples"};

std::vector<ConfigKey> schema(const std::vector<std::string>& env_keys, const std::vector<std::string>& algo_keys,
                              const std::vector<std::string>& required) {
  std::vector<ConfigKey> out;
  const auto add = [&](const std::string& section, const std::string& key) {
    const std::string full = section + "." + key;
    out.push_back({section, key, std::find(required.begin(), required.end(), full) != required.end()});
  };
  for (const auto& k : env_keys) add("env", k);
  for (const auto& k : algo_keys) add("algo", k);
  add("output", "dir");
  add("output", "plot");
  return out;
}

struct Experiment {
  std::unique_ptr<BanditEnvironment> env;
  const RealizableEnv* realizable = nullptr;
  PretrainedModel model;
};

std::size_t get_size(const Config& cfg, const std::string& section, const std::string& key) {
  return static_cast<std::size_t>(cfg.get_uint(section, key));
}

std::size_t get_size(const Config& cfg, const std::string& section, const std::string& key, std::size_t fallback) {
  return static_cast<std::size_t>(cfg.get_uint(section, key, fallback));
}

Vector random_direction(Eigen::Index dim, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Vector u(dim);
  for (Eigen::Index i = 0; i < dim; ++i) u(i) = normal(rng);
  return u.normalized();
}

Experiment build_experiment(const Config& cfg) {
  const std::string kind = cfg.get_string("env", "kind", "synthetic");
  const std::uint64_t env_seed = cfg.get_uint("env", "env_seed", 0);
  const std::uint64_t theta0_seed = cfg.get_uint("env", "theta0_seed", env_seed + 1);
  Experiment exp;

  if (kind == "synthetic") {
    SyntheticSpec spec;
    spec.arch = Architecture{get_size(cfg, "env", "input_dim", 8), get_size(cfg, "env", "hidden_dim", 16),
                             get_size(cfg, "env", "feature_dim", 8)};
    spec.num_actions = get_size(cfg, "env", "num_actions", 3);
    spec.noise_bound = cfg.get_double("env", "noise_bound", 0.1);
    spec.support_size = get_size(cfg, "env", "support_size", 0);
    spec.context_scale = cfg.get_double("env", "context_scale", 1.0);
    spec.radius_factor = cfg.get_double("env", "radius_factor", 2.0);
    spec.seed = env_seed;
    auto env = std::make_unique<RealizableEnv>(make_synthetic_env(spec));
    Vector theta0;
    if (cfg.has("env", "theta0_path")) {
      theta0 = load_params(cfg.get_string("env", "theta0_path"));
    } else if (cfg.has("env", "eps0")) {
      theta0 = theta0_with_eps0(*env, random_direction(env->theta_star().size(), theta0_seed),
                                cfg.get_double("env", "eps0"));
    } else {
      Rng rng(theta0_seed);
      theta0 = perturb_theta(env->theta_star(), cfg.get_double("env", "eps_theta", 0.1), env->B_theta(), rng);
    }
    exp.model = PretrainedModel{spec.arch, theta0, cfg.get_double("env", "B_w", env->B_w()),
                                cfg.get_double("env", "B_theta", env->B_theta())};
    exp.realizable = env.get();
    exp.env = std::move(env);
    return exp;
  }

  if (kind == "classification") {
    const std::size_t K = get_size(cfg, "env", "num_actions", 3);
    ClassificationData data = make_synthetic_classification(get_size(cfg, "env", "item_dim", 16), K,
                                                            get_size(cfg, "env", "items", 600),
                                                            cfg.get_double("env", "class_noise", 0.3), env_seed);
    exp.env = std::make_unique<ClassificationBandit>(std::move(data), K);
  } else if (kind == "regression") {
    if (!cfg.has("env", "data_path")) throw ConfigError(cfg.source() + ": regression env needs env.data_path");
    exp.env = std::make_unique<RegressionBandit>(load_tabular_dataset(cfg.get_string("env", "data_path")));
  } else {
    throw ConfigError(cfg.source() + ": unknown env.kind '" + kind + "'");
  }

  if (cfg.has("env", "theta0_path")) {
    const fs::path path = cfg.get_string("env", "theta0_path");
    exp.model.arch = load_architecture(path);
    exp.model.theta0 = load_params(path);
  } else {
    exp.model.arch = Architecture{exp.env->input_dim(), get_size(cfg, "env", "hidden_dim", 16),
                                  get_size(cfg, "env", "feature_dim", 8)};
    exp.model.theta0 = init_params(exp.model.arch, theta0_seed).theta;
  }
  exp.model.B_w = cfg.get_double("env", "B_w", 10.0);
  exp.model.B_theta = cfg.get_double("env", "B_theta", 2.0 * exp.model.theta0.norm() + 1.0);
  return exp;
}

double estimated_B_phi(const Experiment& exp, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vector> samples;
  for (int i = 0; i < 256; ++i)
    for (Vector& x : exp.env->sample_context(rng).actions) samples.push_back(std::move(x));
  return estimate_regularity(exp.model.arch, exp.model.theta0, samples, exp.model.B_w, 0.0, seed).B_phi;
}

RunTrace run_one(const Experiment& exp, const Config& cfg, std::uint64_t seed) {
  const std::string algorithm = cfg.get_string("algo", "algorithm", "e2tc");
  const std::size_t T = get_size(cfg, "algo", "T");
  if (algorithm.rfind("greedy-", 0) == 0) {
    GreedyConfig g;
    g.variant = parse_greedy_variant(algorithm.substr(7));
    g.zeta_w = cfg.get_double("algo", "zeta_w", 1e-2);
    g.zeta_theta = cfg.get_double("algo", "zeta_theta", 1e-2);
    g.T = T;
    g.seed = seed;
    return run_greedy(*exp.env, exp.model, g);
  }
  E2tcConfig c;
  c.T = T;
  c.lambda = cfg.get_double("algo", "lambda", 1.0);
  c.zeta_w = cfg.get_double("algo", "zeta_w", 1e-2);
  c.zeta_theta = cfg.get_double("algo", "zeta_theta", 1e-2);
  c.precondition = cfg.get_bool("algo", "precondition", true);
  c.random_last_layer = cfg.get_bool("algo", "random_last_layer", false);
  c.seed = seed;
  if (algorithm == "weak") {
    c.T1 = get_size(cfg, "algo", "T1", std::min(T, data_poor_T1(exp.env->num_actions(), T)));
    c.T2 = 0;
    const Regime regime = parse_regime(cfg.get_string("algo", "regime", "data-poor"));
    const double B_phi = cfg.has("algo", "B_phi") ? cfg.get_double("algo", "B_phi") : estimated_B_phi(exp, seed);
    return run_weak_training(*exp.env, exp.model, c, regime, B_phi);
  }
  if (algorithm != "e2tc") throw ConfigError(cfg.source() + ": unknown algo.algorithm '" + algorithm + "'");
  c.T1 = get_size(cfg, "algo", "T1");
  c.T2 = get_size(cfg, "algo", "T2");
  return run_e2tc(*exp.env, exp.model, c);
}

Config load_checked(const std::string& path, const std::vector<ConfigKey>& keys) {
  Config cfg = Config::load(path);
  cfg.validate(keys);
  return cfg;
}

fs::path output_dir(const Config& cfg) {
  fs::path dir = cfg.get_string("output", "dir");
  if (dir.is_relative()) dir = fs::path(cfg.source()).parent_path() / dir;
  fs::create_directories(dir);
  return dir;
}

std::vector<std::uint64_t> run_seeds(const Config& cfg, std::optional<std::uint64_t> master_override) {
  const std::uint64_t master = master_override ? *master_override : cfg.get_uint("algo", "master_seed", 0);
  const std::size_t n = get_size(cfg, "algo", "seeds", 1);
  if (n < 1) throw ConfigError(cfg.source() + ": algo.seeds must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n; ++i) seeds.push_back(derive_seed(master, i));
  return seeds;
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, bool plot) {
  const Config cfg = load_checked(path, schema(kEnvKeys, kAlgoKeys, {"algo.T", "output.dir"}));
  const Experiment exp = build_experiment(cfg);
  const std::vector<std::uint64_t> seeds = run_seeds(cfg, seed);
  const std::size_t workers = worker_count(get_size(cfg, "algo", "workers", 1));

  std::vector<RunTrace> traces(seeds.size());
  parallel_for(seeds.size(), workers, [&](std::size_t i) { traces[i] = run_one(exp, cfg, seeds[i]); });

  const fs::path dir = output_dir(cfg);
  std::vector<std::vector<double>> cumulative;
  Table summary;
  summary.columns = {"run", "seed", "final_regret"};
  for (std::size_t i = 0; i < traces.size(); ++i) {
    emit_csv(trace_table(traces[i]), dir / ("trace_" + std::to_string(i) + ".csv"));
    cumulative.push_back(track_regret(traces[i]).cumulative);
    summary.rows.push_back({static_cast<std::int64_t>(i), std::to_string(seeds[i]),
                            cumulative.back().empty() ? 0.0 : cumulative.back().back()});
  }
  emit_csv(summary, dir / "summary.csv");

  std::vector<double> mean = cumulative[0];
  std::vector<double> sd(mean.size(), 0.0);
  if (cumulative.size() > 1) {
    const AggregateSeries agg = aggregate_runs(cumulative);
    mean = agg.mean;
    sd = agg.std_dev;
  }
  Table regret;
  regret.columns = {"t", "mean_cum_regret", "std_cum_regret"};
  for (std::size_t t = 0; t < mean.size(); ++t) regret.rows.push_back({static_cast<std::int64_t>(t + 1), mean[t], sd[t]});
  emit_csv(regret, dir / "regret.csv");

  if (plot || cfg.get_bool("output", "plot", false)) {
    std::vector<double> xs(mean.size());
    for (std::size_t t = 0; t < xs.size(); ++t) xs[t] = static_cast<double>(t + 1);
    const SvgSeries s{cfg.get_string("algo", "algorithm", "e2tc"), xs, mean, sd};
    SvgOptions opt;
    opt.title = "cumulative pseudo-regret";
    emit_svg_lines(std::span(&s, 1), dir / "regret.svg", opt);
  }
  std::cout << "wrote " << traces.size() << " trace(s) to " << dir.string() << "\n";
  return 0;
}

int cmd_sweep(const std::string& path) {
  const Config cfg = load_checked(path, schema(kEnvKeys, kAlgoKeys, {"algo.T", "output.dir"}));
  const Experiment exp = build_experiment(cfg);
  const auto list_or = [&](const std::string& key, double fallback) {
    return cfg.has("algo", key) ? cfg.get_list("algo", key) : std::vector<double>{fallback};
  };
  const std::vector<GridPoint> grid = make_grid(list_or("zeta_w_grid", cfg.get_double("algo", "zeta_w", 1e-2)),
                                                list_or("zeta_theta_grid", cfg.get_double("algo", "zeta_theta", 1e-2)),
                                                list_or("lambda_grid", cfg.get_double("algo", "lambda", 1.0)));
  const std::vector<std::uint64_t> seeds = run_seeds(cfg, std::nullopt);
  const SweepProtocol protocol = [&](const GridPoint& p, std::uint64_t seed) {
    const std::string algorithm = cfg.get_string("algo", "algorithm", "e2tc");
    RunTrace trace;
    if (algorithm.rfind("greedy-", 0) == 0) {
      GreedyConfig g;
      g.variant = parse_greedy_variant(algorithm.substr(7));
      g.zeta_w = p.zeta_w;
      g.zeta_theta = p.zeta_theta;
      g.T = get_size(cfg, "algo", "T");
      g.seed = seed;
      trace = run_greedy(*exp.env, exp.model, g);
    } else {
      E2tcConfig c;
      c.T = get_size(cfg, "algo", "T");
      c.T1 = get_size(cfg, "algo", "T1", 0);
      c.T2 = get_size(cfg, "algo", "T2", 0);
      c.lambda = p.lambda;
      c.zeta_w = p.zeta_w;
      c.zeta_theta = p.zeta_theta;
      c.precondition = cfg.get_bool("algo", "precondition", true);
      c.seed = seed;
      trace = run_e2tc(*exp.env, exp.model, c);
    }
    const RegretSeries r = track_regret(trace);
    return r.cumulative.empty() ? 0.0 : r.cumulative.back();
  };
  const std::vector<SweepRow> rows =
      grid_sweep(grid, protocol, seeds, worker_count(get_size(cfg, "algo", "workers", 1)));

  Table table;
  table.columns = {"rank", "grid_index", "zeta_w", "zeta_theta", "lambda", "row", "seed", "final_regret", "std"};
  for (std::size_t rank = 0; rank < rows.size(); ++rank) {
    const SweepRow& r = rows[rank];
    const auto base = [&](const std::string& kind, const std::string& seed, double value, Cell sd) {
      table.rows.push_back({static_cast<std::int64_t>(rank + 1), static_cast<std::int64_t>(r.grid_index),
                            r.point.zeta_w, r.point.zeta_theta, r.point.lambda, kind, seed, value, std::move(sd)});
    };
    base("mean", "", r.mean, r.std_dev);
    for (std::size_t s = 0; s < seeds.size(); ++s) base("run", std::to_string(seeds[s]), r.per_seed[s], std::string());
  }
  const fs::path dir = output_dir(cfg);
  emit_csv(table, dir / "sweep.csv");
  std::cout << "best grid point: zeta_w=" << rows[0].point.zeta_w << " zeta_theta=" << rows[0].point.zeta_theta
            << " lambda=" << rows[0].point.lambda << " mean final regret=" << rows[0].mean << "\n";
  return 0;
}

int cmd_tune_t2(const std::string& path) {
  const Config cfg = load_checked(path, schema(kEnvKeys, kAlgoKeys, {"algo.T", "output.dir"}));
  std::vector<std::pair<double, double>> points;
  if (cfg.has("algo", "measured_t2") || cfg.has("algo", "measured_f")) {
    const std::vector<double> t2 = cfg.get_list("algo", "measured_t2");
    const std::vector<double> f = cfg.get_list("algo", "measured_f");
    if (t2.size() != f.size()) throw ConfigError(cfg.source() + ": measured_t2 and measured_f differ in length");
    for (std::size_t i = 0; i < t2.size(); ++i) points.emplace_back(t2[i], f[i]);
  } else {
    const Experiment exp = build_experiment(cfg);
    if (exp.realizable == nullptr)
      throw ConfigError(cfg.source() + ": measuring T2 curves needs a synthetic environment or measured_* lists");
    const std::vector<double> t2_values = cfg.get_list("algo", "t2_values");
    const std::vector<std::uint64_t> seeds = run_seeds(cfg, std::nullopt);
    const std::size_t T1 = get_size(cfg, "algo", "T1", 0);
    const std::size_t mc = get_size(cfg, "algo", "mc_samples", 20000);
    std::vector<double> gaps(t2_values.size() * seeds.size());
    parallel_for(gaps.size(), worker_count(get_size(cfg, "algo", "workers", 1)), [&](std::size_t job) {
      E2tcConfig c;
      c.T1 = T1;
      c.T2 = static_cast<std::size_t>(t2_values[job / seeds.size()]);
      c.T = c.T1 + c.T2;
      c.lambda = cfg.get_double("algo", "lambda", 1.0);
      c.zeta_w = cfg.get_double("algo", "zeta_w", 1e-2);
      c.zeta_theta = cfg.get_double("algo", "zeta_theta", 1e-2);
      c.precondition = cfg.get_bool("algo", "precondition", true);
      c.seed = seeds[job % seeds.size()];
      const RunTrace trace = run_e2tc(*exp.env, exp.model, c);
      gaps[job] = suboptimality_gap(*exp.realizable, trace.w_bar, trace.theta_bar, mc, 12345);
    });
    for (std::size_t k = 0; k < t2_values.size(); ++k) {
      double sum = 0.0;
      for (std::size_t s = 0; s < seeds.size(); ++s) sum += gaps[k * seeds.size() + s];
      points.emplace_back(t2_values[k], sum / static_cast<double>(seeds.size()));
    }
  }
  const PowerCurve curve = fit_power_curve(points);
  const std::size_t T = get_size(cfg, "algo", "T");
  const std::size_t T1 = get_size(cfg, "algo", "T1", 0);
  const std::size_t t2_star = select_t2(curve, T, T1, cfg.get_double("algo", "explore_cost", 0.9));

  const fs::path dir = output_dir(cfg);
  Table pts;
  pts.columns = {"t2", "f", "fitted"};
  for (const auto& [t2, f] : points) pts.rows.push_back({t2, f, curve(t2)});
  emit_csv(pts, dir / "tune_t2_points.csv");
  const std::vector<DiagRow> fit = {{"a", curve.a, {}},       {"b", curve.b, {}},
                                    {"c", curve.c, {}},       {"alpha", curve.alpha, {}},
                                    {"rmse", curve.rmse, {}}, {"T2_star", static_cast<double>(t2_star), {}}};
  emit_csv(diag_table(fit), dir / "tune_t2.csv");
  std::cout << "alpha=" << curve.alpha << " T2*=" << t2_star << "\n";
  return 0;
}

int cmd_diag(const std::string& path) {
  const std::vector<std::string> env_keys = {"eigenvalues", "B_w", "B_phi", "B_eta", "eps0", "B_theta", "D_w",
                                             "D_theta"};
  const std::vector<std::string> algo_keys = {"lambda", "T1", "T2", "T", "K", "delta", "zeta", "eps_c",
                                              "eps_theta", "c_zeta", "epsilon"};
  const Config cfg = load_checked(path, schema(env_keys, algo_keys, {"env.eigenvalues", "output.dir"}));
  const std::vector<double> eig_list = cfg.get_list("env", "eigenvalues");
  Vector eigs(static_cast<Eigen::Index>(eig_list.size()));
  for (std::size_t i = 0; i < eig_list.size(); ++i) eigs(static_cast<Eigen::Index>(i)) = eig_list[i];
  std::sort(eigs.data(), eigs.data() + eigs.size(), std::greater<>());
  const double d = static_cast<double>(eigs.size());

  const double B_w = cfg.get_double("env", "B_w", 1.0);
  const double B_phi = cfg.get_double("env", "B_phi", 1.0);
  const double B_eta = cfg.get_double("env", "B_eta", 0.0);
  const double eps0 = cfg.get_double("env", "eps0", 0.0);
  const double lambda = cfg.get_double("algo", "lambda", 0.1);
  const double T1 = cfg.get_double("algo", "T1", 1000.0);
  const double T2 = cfg.get_double("algo", "T2", 1000.0);
  const double delta = cfg.get_double("algo", "delta", 0.05);
  const double zeta = cfg.get_double("algo", "zeta", 1e-3);

  std::vector<DiagRow> rows;
  RidgeBaseInputs in;
  in.eigenvalues = eigs;
  in.lambda = lambda;
  in.T1 = T1;
  in.delta = delta;
  in.B_w = B_w;
  in.B_phi = B_phi;
  in.B_eta = B_eta;
  in.eps0 = eps0;
  in.approx_sq = approx_sq_fallback(B_w, T1, eps0);
  const RidgeBaseBounds rb = ridge_base_bounds(in);
  rows.push_back({"d1", rb.dims.d1, {}});
  rows.push_back({"d2", rb.dims.d2, {}});
  rows.push_back({"d2_hat", rb.dims.d2_hat, {}});
  rows.push_back({"c_eff", rb.dims.c_eff, {}});
  rows.push_back({"rho", rb.rho, {}});
  rows.push_back({"b_lambda", rb.b_lambda, {}});
  rows.push_back({"delta_s", rb.delta_s, {}});
  rows.push_back({"delta_f", rb.delta_f, {}});
  rows.push_back({"eps_bs_bound", rb.eps_bs_bound, {}});
  rows.push_back({"eps_vr_bound", rb.eps_vr_bound, {}});
  const RegErrorBounds reg = bound_reg_error(eigs, lambda, B_w, eps0);
  rows.push_back({"reg_error_wrt_wtilde", reg.wrt_wtilde, {}});
  rows.push_back({"reg_error_wrt_wstar", reg.wrt_wstar, {}});
  rows.push_back({"misspec_bound", bound_misspec(d, eps0, B_w, B_phi, T1, delta), {}});
  rows.push_back({"noise_bound", bound_noise(d, T1, delta), {}});
  rows.push_back({"second_moment_bound", second_moment_bound(B_phi, eigs.size() ? eigs(0) : 0.0, T1, d, delta), {}});

  const double B_theta = cfg.get_double("env", "B_theta", 1.0);
  const double D_w = cfg.get_double("env", "D_w", 1.0);
  const double D_theta = cfg.get_double("env", "D_theta", 1.0);
  const double D = std::sqrt(D_w * D_w + D_theta * D_theta);
  const double B_omega = std::sqrt(B_w * B_w + B_theta * B_theta);
  rows.push_back({"azuma_bound", azuma_bound(B_omega, T2, delta), {}});
  if (delta < 1.0) rows.push_back({"uniform_azuma_bound", uniform_azuma_bound(B_omega, T2, delta), {}});
  const double eps_c = cfg.get_double("algo", "eps_c", 0.5);
  const ContainmentResult cont = containment_condition(zeta, D, T2, delta, eps_c * eps_c, B_omega);
  rows.push_back({"containment_lhs", cont.lhs, cont.feasible});
  rows.push_back({"largest_feasible_rate", largest_feasible_rate(D, T2, delta, eps_c * eps_c, B_omega), {}});
  rows.push_back({"highp_sgd_bound", highp_sgd_bound(eps_c * eps_c, zeta, T2, D, B_omega, delta), {}});

  TheoryConstants k;
  k.B_w = B_w;
  k.D_w = D_w;
  k.B_theta = B_theta;
  k.D_theta = D_theta;
  k.B_phi = B_phi;
  k.c_zeta = cfg.get_double("algo", "c_zeta", 0.1);
  try {
    const TheoryHyperparams th = theory_hyperparams(eps_c, eps0, cfg.get_double("algo", "eps_theta", 0.0),
                                                    eigs.size(), static_cast<std::size_t>(T2), delta, k,
                                                    static_cast<std::size_t>(T1));
    rows.push_back({"theory_delta_eps", th.delta_eps, {}});
    rows.push_back({"theory_zeta", th.zeta, {}});
    rows.push_back({"theory_lambda", th.lambda, {}});
    rows.push_back({"theory_eps_w_sq", th.eps_w_sq, {}});
    rows.push_back({"theory_T1_floor", static_cast<double>(th.T1_floor), {}});
    rows.push_back({"small_eps_lhs", th.small_eps_lhs, th.small_eps_feasible});
    rows.push_back({"small_zeta_lhs", th.small_zeta_lhs, th.small_zeta_feasible});
  } catch (const std::domain_error& e) {
    std::cerr << "warning: " << e.what() << "\n";
  }
  if (cfg.has("algo", "T")) {
    const auto T = get_size(cfg, "algo", "T");
    rows.push_back({"regret_bound",
                    risk_to_regret_bound(cfg.get_double("algo", "epsilon", 0.0), T, static_cast<std::size_t>(T1),
                                         static_cast<std::size_t>(T2), get_size(cfg, "algo", "K", 2), delta, B_w,
                                         B_phi),
                    {}});
  }
  for (const std::string& w : rb.warnings) std::cerr << "warning: " << w << "\n";
  emit_csv(diag_table(rows), output_dir(cfg) / "diag.csv");
  return 0;
}

int cmd_pretrain(const std::string& path) {
  const std::vector<std::string> env_keys = {"kind", "num_actions", "item_dim", "items", "class_noise",
                                             "env_seed", "data_path"};
  const std::vector<std::string> algo_keys = {"hidden_dim", "feature_dim", "c1", "c2", "c3", "batch_size",
                                              "epochs", "learning_rate", "seed"};
  const Config cfg = load_checked(path, schema(env_keys, algo_keys, {"output.dir"}));
  const std::string kind = cfg.get_string("env", "kind", "classification");
  std::vector<PretrainItem> items;
  if (kind == "classification") {
    const std::size_t K = get_size(cfg, "env", "num_actions", 3);
    const ClassificationData data = make_synthetic_classification(
        get_size(cfg, "env", "item_dim", 16), K, get_size(cfg, "env", "items", 600),
        cfg.get_double("env", "class_noise", 0.3), cfg.get_uint("env", "env_seed", 0));
    items = classification_pretrain_items(data, K);
  } else if (kind == "regression") {
    items = regression_pretrain_items(load_tabular_dataset(cfg.get_string("env", "data_path")));
  } else {
    throw ConfigError(cfg.source() + ": unknown env.kind '" + kind + "'");
  }
  const Architecture arch{static_cast<std::size_t>(items.front().x.size()), get_size(cfg, "algo", "hidden_dim", 32),
                          get_size(cfg, "algo", "feature_dim", 32)};
  const DecoderArchitecture decoder =
      mirror_decoder(arch, static_cast<std::size_t>(items.front().recon_target.size()));
  PretrainConfig pc;
  pc.c1 = cfg.get_double("algo", "c1", 0.0);
  pc.c2 = cfg.get_double("algo", "c2", 0.0);
  pc.c3 = cfg.get_double("algo", "c3", 0.0);
  pc.batch_size = get_size(cfg, "algo", "batch_size", 32);
  pc.epochs = get_size(cfg, "algo", "epochs", 50);
  pc.learning_rate = cfg.get_double("algo", "learning_rate", 1e-2);
  pc.seed = cfg.get_uint("algo", "seed", 0);
  const PretrainResult res = pretrain(items, arch, decoder, pc);

  std::vector<Vector> features;
  features.reserve(items.size());
  for (const PretrainItem& item : items) features.push_back(forward(arch, res.theta, item.x));
  const SpectrumReport spec = spectrum_report(empirical_covariance(features));

  const fs::path dir = output_dir(cfg);
  save_params(dir / "theta0.bin", res.theta, arch);
  emit_csv(spectrum_table(spec), dir / "spectrum.csv");
  emit_csv(histogram_table(spec), dir / "spectrum_hist.csv");
  const std::vector<DiagRow> summary = {{"initial_mse", res.initial_mse, {}},
                                        {"final_mse", res.final_mse, {}},
                                        {"k90", static_cast<double>(spec.k90), {}},
                                        {"positive_eigenvalues", static_cast<double>(spec.positive_count), {}}};
  emit_csv(diag_table(summary), dir / "pretrain.csv");
  for (const std::string& w : spec.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "final mse " << res.final_mse << ", k90 " << spec.k90 << "\n";
  return 0;
}

int cmd_report(const std::string& dir_arg) {
  const fs::path dir = dir_arg;
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("trace_", 0) == 0 && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  if (files.empty()) throw ConfigError("no trace_*.csv files in " + dir.string());
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    const auto index = [](const fs::path& p) {
      const std::string stem = p.stem().string().substr(6);
      return std::make_pair(stem.size(), stem);
    };
    return index(a) < index(b);
  });

  std::vector<std::vector<double>> cumulative;
  for (const fs::path& f : files) {
    const CsvData csv = read_csv(f);
    const std::size_t col = csv.column("cum_regret");
    std::vector<double> series;
    for (const auto& row : csv.rows) series.push_back(std::stod(row.at(col)));
    cumulative.push_back(std::move(series));
  }
  std::vector<double> mean = cumulative[0];
  std::vector<double> sd(mean.size(), 0.0);
  if (cumulative.size() > 1) {
    const AggregateSeries agg = aggregate_runs(cumulative);
    mean = agg.mean;
    sd = agg.std_dev;
  }
  Table table;
  table.columns = {"t", "mean_cum_regret", "std_cum_regret"};
  std::vector<double> xs;
  for (std::size_t t = 0; t < mean.size(); ++t) {
    table.rows.push_back({static_cast<std::int64_t>(t + 1), mean[t], sd[t]});
    xs.push_back(static_cast<double>(t + 1));
  }
  emit_csv(table, dir / "report.csv");
  const SvgSeries s{"mean over " + std::to_string(cumulative.size()) + " runs", xs, mean, sd};
  SvgOptions opt;
  opt.title = "cumulative pseudo-regret";
  emit_svg_lines(std::span(&s, 1), dir / "report.svg", opt);
  std::cout << "aggregated " << cumulative.size() << " trace(s)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explore-Twice-then-Commit bandit lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool plot = false;

  auto* pre = app.add_subcommand("pretrain", "pre-train theta0 and report the feature spectrum");
  pre->add_option("config", config_path, "configuration file")->required();
  auto* run = app.add_subcommand("run", "run an algorithm and write trace/regret CSVs");
  run->add_option("config", config_path, "configuration file")->required();
  run->add_option("--seed", seed, "master seed (overrides algo.master_seed)");
  run->add_flag("--plot", plot, "also write regret.svg");
  auto* sweep = app.add_subcommand("sweep", "grid search over learning rates and lambda");
  sweep->add_option("config", config_path, "configuration file")->required();
  auto* tune = app.add_subcommand("tune-t2", "fit the T2 curve and choose T2");
  tune->add_option("config", config_path, "configuration file")->required();
  auto* diag = app.add_subcommand("diag", "evaluate theory bounds at given constants");
  diag->add_option("config", config_path, "configuration file")->required();
  std::string report_dir;
  auto* report = app.add_subcommand("report", "aggregate trace_*.csv files of a directory");
  report->add_option("dir", report_dir, "directory with trace CSVs")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (*pre) return cmd_pretrain(config_path);
    if (*run) return cmd_run(config_path, seed, plot);
    if (*sweep) return cmd_sweep(config_path);
    if (*tune) return cmd_tune_t2(config_path);
    if (*diag) return cmd_diag(config_path);
    if (*report) return cmd_report(report_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
