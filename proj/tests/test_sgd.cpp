#include <cmath>
#include <random>

#include "doctest.h"
#include "e2tc/sgd.hpp"

using namespace e2tc;

namespace {

Vector gaussian(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

const Architecture kArch{3, 5, 3};

double loss(const Vector& w, const Vector& theta, const Vector& x, double r) {
  const double e = w.dot(forward(kArch, theta, x)) - r;
  return e * e;
}

RealizableEnv finite_env(std::mt19937_64& rng, std::size_t points, double noise) {
  const Vector theta_star = gaussian(static_cast<Eigen::Index>(kArch.param_count()), rng, 0.6);
  const Vector w_star = gaussian(3, rng);
  std::vector<Vector> support;
  for (std::size_t i = 0; i < points; ++i) support.push_back(gaussian(3, rng));
  return RealizableEnv(kArch, theta_star, w_star, noise, 1, FiniteSupport::uniform(support), 2.0 * w_star.norm(),
                       2.0 * theta_star.norm());
}

SampleStream env_stream(const RealizableEnv& env) {
  return [&env](Rng& rng) {
    Sample s;
    s.x = env.draw_input(rng);
    s.r = env.reward(s.x, rng);
    return s;
  };
}

RegularizedCovariance random_cov(std::mt19937_64& rng, double lambda) {
  Matrix m = Matrix::Zero(3, 3);
  for (int i = 0; i < 12; ++i) {
    const Vector f = gaussian(3, rng);
    m += f * f.transpose() / 12.0;
  }
  return RegularizedCovariance(SymMatrix(m), lambda);
}

}  // namespace

TEST_CASE("grad_w closed forms and finite differences") {
  std::mt19937_64 rng(1);
  const Vector theta = gaussian(static_cast<Eigen::Index>(kArch.param_count()), rng, 0.6);
  const Vector x = gaussian(3, rng);
  const Vector f = forward(kArch, theta, x);
  CHECK((grad_w(kArch, Vector::Zero(3), theta, x, 1.0) + 2.0 * f).norm() < 1e-15);

  const Vector w = gaussian(3, rng);
  CHECK(grad_w(kArch, w, theta, x, w.dot(f)).norm() == 0.0);

  for (int trial = 0; trial < 20; ++trial) {
    const Vector wt = gaussian(3, rng);
    const Vector xt = gaussian(3, rng);
    const double r = gaussian(1, rng)(0);
    const Vector g = grad_w(kArch, wt, theta, xt, r);
    Vector fd(3);
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i) {
      Vector p = wt, m = wt;
      p(i) += h;
      m(i) -= h;
      fd(i) = (loss(p, theta, xt, r) - loss(m, theta, xt, r)) / (2.0 * h);
    }
    CHECK((g - fd).norm() <= 1e-7 * std::max(g.norm(), 1.0));
  }
}

TEST_CASE("grad_theta vanishing cases and finite differences") {
  std::mt19937_64 rng(2);
  const Vector theta = gaussian(static_cast<Eigen::Index>(kArch.param_count()), rng, 0.6);
  const Vector x = gaussian(3, rng);
  const Vector w = gaussian(3, rng);
  CHECK(grad_theta(kArch, w, theta, x, w.dot(forward(kArch, theta, x))).norm() == 0.0);
  CHECK(grad_theta(kArch, Vector::Zero(3), theta, x, 0.7).norm() == 0.0);

  for (int trial = 0; trial < 20; ++trial) {
    const Vector th = gaussian(theta.size(), rng, 0.6);
    const Vector wt = gaussian(3, rng);
    const Vector xt = gaussian(3, rng);
    const double r = gaussian(1, rng)(0);
    const Vector g = grad_theta(kArch, wt, th, xt, r);
    Vector fd(th.size());
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < th.size(); ++i) {
      Vector p = th, m = th;
      p(i) += h;
      m(i) -= h;
      fd(i) = (loss(wt, p, xt, r) - loss(wt, m, xt, r)) / (2.0 * h);
    }
    CHECK((g - fd).norm() <= 1e-6 * std::max(g.norm(), 1.0));
  }
}

TEST_CASE("sgd_step: zero gradient, identity preconditioner, missing covariance") {
  std::mt19937_64 rng(3);
  SgdState state;
  state.params = {gaussian(3, rng), gaussian(static_cast<Eigen::Index>(kArch.param_count()), rng, 0.5), 100.0, 100.0};
  const Vector x = gaussian(3, rng);
  const Sample exact{x, state.params.w.dot(forward(kArch, state.params.theta, x))};
  SgdConfig cfg;
  cfg.zeta_w = 0.1;
  cfg.zeta_theta = 0.1;
  const SgdState before = state;
  sgd_step(kArch, state, exact, cfg, nullptr);
  CHECK(state.params.w == before.params.w);
  CHECK(state.params.theta == before.params.theta);

  const Sample s{x, 1.5};
  SgdState plain = before, pre = before;
  sgd_step(kArch, plain, s, cfg, nullptr);
  SgdConfig pcfg = cfg;
  pcfg.precondition = true;
  const RegularizedCovariance identity(SymMatrix::zeros(3), 1.0);
  sgd_step(kArch, pre, s, pcfg, &identity);
  CHECK((plain.params.w - pre.params.w).norm() < 1e-15);
  CHECK(plain.params.theta == pre.params.theta);

  CHECK_THROWS(sgd_step(kArch, pre, s, pcfg, nullptr));
}

TEST_CASE("preconditioned step equals a vanilla step in transformed coordinates") {
  std::mt19937_64 rng(4);
  const RegularizedCovariance cov = random_cov(rng, 0.3);
  const Matrix root = cov.sqrt().dense();
  const Matrix inv_root = cov.inv_sqrt().dense();
  SgdConfig cfg;
  cfg.zeta_w = 0.05;
  cfg.zeta_theta = 0.02;
  cfg.precondition = true;
  for (int trial = 0; trial < 20; ++trial) {
    SgdState state;
    state.params = {gaussian(3, rng), gaussian(static_cast<Eigen::Index>(kArch.param_count()), rng, 0.5), 1e6, 1e6};
    const Sample s{gaussian(3, rng), gaussian(1, rng)(0)};
    const Vector v = grad_w(kArch, state.params.w, state.params.theta, s.x, s.r);
    const Vector w_tilde = root * state.params.w - cfg.zeta_w * (inv_root * v);
    const Vector expected = inv_root * w_tilde;
    const Vector theta_expected =
        state.params.theta - cfg.zeta_theta * grad_theta(kArch, state.params.w, state.params.theta, s.x, s.r);
    sgd_step(kArch, state, s, cfg, &cov);
    CHECK((state.params.w - expected).norm() < 1e-10);
    CHECK((state.params.theta - theta_expected).norm() < 1e-14);
  }
}

TEST_CASE("preconditioning equivalence over 1000 steps") {
  std::mt19937_64 gen(5);
  const RealizableEnv env = finite_env(gen, 10, 0.2);
  const RegularizedCovariance cov = random_cov(gen, 0.5);
  const Matrix root = cov.sqrt().dense();
  const Matrix inv_root = cov.inv_sqrt().dense();

  SgdConfig cfg;
  cfg.zeta_w = 0.01;
  cfg.zeta_theta = 0.005;
  cfg.T2 = 1000;
  cfg.precondition = true;
  cfg.project = false;
  const ParameterState init{Vector::Zero(3), env.theta_star() * 0.9, 1.0, 1.0};
  Rng rng(6);
  const SgdResult run = run_sgd(kArch, env_stream(env), init, cfg, &cov, rng);

  Rng replay(6);
  Vector w_tilde = root * init.w;
  Vector theta = init.theta;
  const SampleStream stream = env_stream(env);
  for (std::size_t t = 0; t < cfg.T2; ++t) {
    const Vector w = inv_root * w_tilde;
    const Sample s = stream(replay);
    const Vector v = grad_w(kArch, w, theta, s.x, s.r);
    const Vector vt = grad_theta(kArch, w, theta, s.x, s.r);
    w_tilde -= cfg.zeta_w * (inv_root * v);
    theta -= cfg.zeta_theta * vt;
  }
  CHECK((inv_root * w_tilde - run.final_state.params.w).norm() < 1e-8);
  CHECK((theta - run.final_state.params.theta).norm() < 1e-8);
}

TEST_CASE("run_sgd averaging of pre-update iterates") {
  std::mt19937_64 gen(7);
  const RealizableEnv env = finite_env(gen, 5, 0.1);
  const ParameterState init{Vector::Constant(3, 0.1), env.theta_star(), 10.0, 10.0};
  SgdConfig cfg;
  cfg.zeta_w = 0.1;
  cfg.zeta_theta = 0.1;
  cfg.T2 = 1;
  Rng rng(1);
  const SgdResult one = run_sgd(kArch, env_stream(env), init, cfg, nullptr, rng);
  CHECK(one.w_bar == init.w);
  CHECK(one.theta_bar == init.theta);

  cfg.zeta_w = 0.0;
  cfg.zeta_theta = 0.0;
  cfg.T2 = 50;
  const SgdResult frozen = run_sgd(kArch, env_stream(env), init, cfg, nullptr, rng);
  CHECK((frozen.w_bar - init.w).norm() < 1e-12);
  CHECK((frozen.theta_bar - init.theta).norm() < 1e-12);

  cfg.zeta_w = 0.05;
  cfg.zeta_theta = 0.02;
  cfg.T2 = 300;
  const SgdResult run = run_sgd(kArch, env_stream(env), init, cfg, nullptr, rng);
  const Trajectory& tr = run.trajectory;
  REQUIRE(tr.stored_w().size() == 300);
  Vector mean_w = Vector::Zero(3), mean_theta = Vector::Zero(init.theta.size());
  for (std::size_t i = 0; i < 300; ++i) {
    mean_w += tr.stored_w()[i] / 300.0;
    mean_theta += tr.stored_theta()[i] / 300.0;
  }
  CHECK((mean_w - run.w_bar).norm() < 1e-12);
  CHECK((mean_theta - run.theta_bar).norm() < 1e-12);
  CHECK(tr.stored_w().front() == init.w);
  CHECK(tr.w_projections <= 300);
  CHECK(tr.theta_projections <= 300);

  cfg.T2 = 0;
  CHECK_THROWS(run_sgd(kArch, env_stream(env), init, cfg, nullptr, rng));
}

TEST_CASE("trajectory thinning keeps exact averages") {
  const std::size_t steps = 200000;
  Trajectory tr(steps, 1, 1);
  double sum = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const double v = std::sin(0.001 * static_cast<double>(t));
    sum += v;
    tr.record(Vector::Constant(1, v), Vector::Constant(1, -v));
  }
  CHECK(tr.stored_w().size() <= 1024);
  CHECK(tr.stored_w().size() >= 1000);
  CHECK(tr.w_bar()(0) == doctest::Approx(sum / steps).epsilon(1e-12));
  CHECK(tr.theta_bar()(0) == doctest::Approx(-sum / steps).epsilon(1e-12));
}

TEST_CASE("projection counters zero means replay without projection is identical") {
  std::mt19937_64 gen(8);
  const RealizableEnv env = finite_env(gen, 6, 0.3);
  const ParameterState init{Vector::Zero(3), env.theta_star(), 50.0, 50.0};
  SgdConfig cfg;
  cfg.zeta_w = 0.02;
  cfg.zeta_theta = 0.01;
  cfg.T2 = 500;
  Rng a(3), b(3);
  const SgdResult projected = run_sgd(kArch, env_stream(env), init, cfg, nullptr, a);
  REQUIRE(projected.trajectory.w_projections == 0);
  REQUIRE(projected.trajectory.theta_projections == 0);
  cfg.project = false;
  const SgdResult free = run_sgd(kArch, env_stream(env), init, cfg, nullptr, b);
  CHECK(projected.final_state.params.w == free.final_state.params.w);
  CHECK(projected.final_state.params.theta == free.final_state.params.theta);
  CHECK(projected.w_bar == free.w_bar);

  ParameterState tight = init;
  tight.B_w = 0.05;
  cfg.project = true;
  Rng c(3);
  const SgdResult clipped = run_sgd(kArch, env_stream(env), tight, cfg, nullptr, c);
  CHECK(clipped.trajectory.w_projections > 0);
  for (const Vector& w : clipped.trajectory.stored_w()) CHECK(w.norm() <= 0.05 + 1e-12);
}

TEST_CASE("gradient norms stay within D_w and D_theta") {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 5; ++trial) {
    const RealizableEnv env = finite_env(gen, 8, 0.2);
    const std::vector<Vector>& pts = env.finite_support()->points;
    const double B_w = env.w_star().norm();
    const RegularityEstimate reg = estimate_regularity(kArch, env.theta_star(), pts, B_w, 0.2);
    const ParameterState init{0.5 * env.w_star(), env.theta_star(), B_w, env.B_theta()};
    SgdConfig cfg;
    cfg.zeta_w = 0.01;
    cfg.zeta_theta = 1e-4;
    cfg.T2 = 400;
    Rng rng(trial);
    const SgdResult run = run_sgd(kArch, env_stream(env), init, cfg, nullptr, rng);
    CHECK(run.max_grad_w_norm <= reg.D_w);
    CHECK(run.max_grad_theta_norm <= reg.D_theta);
  }
}

TEST_CASE("gradient estimators are unbiased for the exact risk") {
  std::mt19937_64 gen(10);
  const RealizableEnv env = finite_env(gen, 7, 0.4);
  const FiniteSupport& fs = *env.finite_support();
  const Vector w = gaussian(3, gen);
  const Vector theta = env.theta_star() + gaussian(env.theta_star().size(), gen, 0.2);

  Vector avg_w = Vector::Zero(3), avg_theta = Vector::Zero(theta.size());
  for (std::size_t i = 0; i < fs.points.size(); ++i) {
    const double mu = env.mean_reward(fs.points[i]);
    avg_w += fs.probs[i] * grad_w(kArch, w, theta, fs.points[i], mu);
    avg_theta += fs.probs[i] * grad_theta(kArch, w, theta, fs.points[i], mu);
  }
  const Vector analytic = 2.0 * (true_covariance(env, theta).dense() * w -
                                 cross_moment(env, theta, env.theta_star()) * env.w_star());
  CHECK((avg_w - analytic).norm() < 1e-10);

  Vector fd(theta.size());
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Vector p = theta, m = theta;
    p(i) += h;
    m(i) -= h;
    fd(i) = (risk(env, w, p) - risk(env, w, m)) / (2.0 * h);
  }
  CHECK((avg_theta - fd).norm() <= 1e-6 * std::max(fd.norm(), 1.0));
}

TEST_CASE("risk and suboptimality gap") {
  std::mt19937_64 gen(11);
  const RealizableEnv env = finite_env(gen, 4, 0.6);
  CHECK(suboptimality_gap(env, env.w_star(), env.theta_star()) == 0.0);
  CHECK(risk(env, env.w_star(), env.theta_star()) == doctest::Approx(0.36 / 3.0));

  const RealizableEnv clean = finite_env(gen, 4, 0.0);
  CHECK(risk(clean, clean.w_star(), clean.theta_star()) == 0.0);

  const Vector x1 = gaussian(3, gen), x2 = gaussian(3, gen);
  const Vector theta_star = gaussian(static_cast<Eigen::Index>(kArch.param_count()), gen, 0.6);
  const Vector w_star = gaussian(3, gen);
  const RealizableEnv two(kArch, theta_star, w_star, 0.3, 1, FiniteSupport{{x1, x2}, {0.25, 0.75}}, 10.0, 10.0);
  const Vector w = gaussian(3, gen);
  const Vector theta = gaussian(theta_star.size(), gen, 0.6);
  const double d1 = w.dot(forward(kArch, theta, x1)) - w_star.dot(forward(kArch, theta_star, x1));
  const double d2 = w.dot(forward(kArch, theta, x2)) - w_star.dot(forward(kArch, theta_star, x2));
  const double gap = 0.25 * d1 * d1 + 0.75 * d2 * d2;
  CHECK(suboptimality_gap(two, w, theta) == doctest::Approx(gap).epsilon(1e-13));
  CHECK(risk(two, w, theta) == doctest::Approx(gap + 0.09 / 3.0).epsilon(1e-13));
  CHECK(suboptimality_gap(two, w, theta) >= -1e-12);

  const RealizableEnv gen_env(kArch, theta_star, w_star, 0.0, 1, gaussian_generator(3, 1, 1.0), 10.0, 10.0);
  CHECK_THROWS(risk(gen_env, w, theta));
  CHECK(risk(gen_env, w_star, theta_star, 100, 1) == 0.0);
}

TEST_CASE("averaged SGD on a frozen-feature quadratic improves with T2") {
  std::mt19937_64 gen(12);
  const RealizableEnv env = finite_env(gen, 20, 0.5);
  const ParameterState init{Vector::Zero(3), env.theta_star(), env.B_w(), env.B_theta()};
  std::vector<double> gaps;
  for (std::size_t T2 : {100, 400, 1600}) {
    double total = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
      SgdConfig cfg;
      cfg.zeta_w = 0.02;
      cfg.zeta_theta = 0.0;
      cfg.T2 = T2;
      Rng rng(static_cast<std::uint64_t>(seed) * 31 + T2);
      const SgdResult run = run_sgd(kArch, env_stream(env), init, cfg, nullptr, rng);
      CHECK((run.theta_bar - env.theta_star()).norm() < 1e-12);
      total += suboptimality_gap(env, run.w_bar, run.theta_bar);
    }
    gaps.push_back(total / 20.0);
  }
  CHECK(gaps[1] < gaps[0]);
  CHECK(gaps[2] < gaps[1]);
}

TEST_CASE("containment_check") {
  const Vector w_star = Vector::Zero(2);
  const Vector theta_star = Vector::Zero(3);
  const SymMatrix sigma = SymMatrix::identity(2);
  const double eps_c = 1.0;

  Trajectory constant(10, 2, 3);
  for (int i = 0; i < 10; ++i) constant.record(w_star, theta_star);
  CHECK(!containment_check(constant, w_star, theta_star, &sigma, eps_c).has_value());

  Trajectory single(1, 2, 3);
  single.record(w_star, Vector::Constant(3, 2.0 / std::sqrt(3.0)));
  CHECK(containment_check(single, w_star, theta_star, &sigma, eps_c) == std::optional<std::size_t>(0));

  Trajectory straddle(20, 2, 3);
  const std::size_t k = 13;
  for (std::size_t i = 0; i < 20; ++i) {
    const double radius = i < k ? 0.5 + 0.03 * static_cast<double>(i) : 1.2;
    Vector w(2);
    w << radius * 0.6, 0.0;
    straddle.record(w, Vector::Constant(3, radius * 0.8 / std::sqrt(3.0)));
  }
  CHECK(containment_check(straddle, w_star, theta_star, &sigma, eps_c) == std::optional<std::size_t>(k));

  Vector d(2);
  d << 4.0, 0.0;
  const SymMatrix scaled = SymMatrix::diagonal(d);
  Trajectory weighted(1, 2, 3);
  Vector w(2);
  w << 0.6, 0.0;
  weighted.record(w, theta_star);
  CHECK(!containment_check(weighted, w_star, theta_star, &sigma, eps_c).has_value());
  CHECK(containment_check(weighted, w_star, theta_star, &scaled, eps_c).has_value());

  CHECK_THROWS(containment_check(weighted, Vector::Zero(3), theta_star, &sigma, eps_c));
}

TEST_CASE("trajectory_table columns") {
  std::mt19937_64 gen(13);
  const RealizableEnv env = finite_env(gen, 3, 0.0);
  Trajectory tr(2, 3, static_cast<Eigen::Index>(kArch.param_count()));
  tr.record(env.w_star(), env.theta_star());
  tr.record(Vector::Zero(3), env.theta_star());
  const Table t = trajectory_table(tr, env, true_covariance(env, env.theta_star()));
  REQUIRE(t.columns.size() == 4);
  CHECK(t.columns[3] == "risk_gap");
  REQUIRE(t.rows.size() == 2);
  CHECK(std::get<std::int64_t>(t.rows[0][0]) == 1);
  CHECK(std::get<double>(t.rows[0][1]) == 0.0);
  CHECK(std::get<double>(t.rows[1][3]) == doctest::Approx(suboptimality_gap(env, Vector::Zero(3), env.theta_star())));
}

TEST_CASE("martingale bound evaluators") {
  CHECK(uniform_azuma_bound(1.0, 1.0, 2.0 / std::exp(1.0)) == doctest::Approx(2.5));
  double prev = 0.0;
  for (double t = 1.0; t < 1e6; t *= 1.7) {
    const double b = uniform_azuma_bound(1.0, t, 0.05);
    CHECK(b >= prev);
    prev = b;
  }
  CHECK(azuma_bound(1.0, 2.0, std::exp(-1.0)) == doctest::Approx(2.0));
  CHECK_THROWS(uniform_azuma_bound(1.0, 1.0, 1.0));
  CHECK_THROWS(uniform_azuma_bound(1.0, 1.0, 0.0));
  CHECK_THROWS(azuma_bound(1.0, 1.0, 0.0));
}

TEST_CASE("time-uniform bound covers simulated coin-flip martingales") {
  const int paths = 1000, steps = 2000;
  const double delta = 0.05;
  std::vector<double> bound(steps + 1);
  for (int t = 1; t <= steps; ++t) bound[t] = uniform_azuma_bound(1.0, t, delta);
  Rng rng(14);
  std::bernoulli_distribution coin(0.5);
  int crossed = 0;
  for (int p = 0; p < paths; ++p) {
    double s = 0.0;
    for (int t = 1; t <= steps; ++t) {
      s += coin(rng) ? 1.0 : -1.0;
      if (s > bound[t]) {
        ++crossed;
        break;
      }
    }
  }
  CHECK(crossed <= delta * paths + 3.0 * std::sqrt(paths * delta * (1.0 - delta)));
}

TEST_CASE("containment condition and largest feasible rate") {
  CHECK(containment_condition(0.0, 1.0, 100.0, 0.05, 0.1, 1.0).feasible);
  CHECK(containment_condition(0.0, 1.0, 100.0, 0.05, 0.1, 1.0).lhs == 0.0);
  double prev = -1.0;
  for (double z = 1e-5; z < 1.0; z *= 1.5) {
    const double lhs = containment_condition(z, 2.0, 500.0, 0.05, 1.0, 1.0).lhs;
    CHECK(lhs > prev);
    prev = lhs;
  }
  const double zeta = largest_feasible_rate(2.0, 500.0, 0.05, 0.3, 1.5);
  CHECK(zeta > 0.0);
  CHECK(containment_condition(zeta, 2.0, 500.0, 0.05, 0.3, 1.5).feasible);
  CHECK(!containment_condition(zeta * 1.001, 2.0, 500.0, 0.05, 0.3, 1.5).feasible);
}

TEST_CASE("highp_sgd_bound closed forms") {
  const double D = 3.0, B = 0.7, T = 400.0;
  const double zeta = 2.0 * B / (D * std::sqrt(T));
  CHECK(highp_sgd_bound(4.0 * B * B, zeta, T, D, B, 1.0) == doctest::Approx(2.0 * D * B / std::sqrt(T)));
  CHECK(highp_sgd_bound(1.0, 0.01, T, D, B, 0.01) > highp_sgd_bound(1.0, 0.01, T, D, B, 0.1));
  const double z4 = 2.0 * B / (D * std::sqrt(4.0 * T));
  CHECK(highp_sgd_bound(4.0 * B * B, z4, 4.0 * T, D, B, 0.1) ==
        doctest::Approx(0.5 * highp_sgd_bound(4.0 * B * B, zeta, T, D, B, 0.1)));
}

TEST_CASE("trajectories stay in a convex basin when the rate passes the containment condition") {
  // Quadratic inside radius eps_c around the origin, concave bump outside; noisy gradients of norm <= D.
  const double eps_c = 0.5, eps = 0.3, B_omega = 1.0, noise = 0.5, delta = 0.05;
  const double D = 1.0 + noise;
  const std::size_t T = 400;
  const double zeta = 0.9 * largest_feasible_rate(D, static_cast<double>(T), delta, eps_c * eps_c - eps * eps, B_omega);
  REQUIRE(containment_condition(zeta, D, static_cast<double>(T), delta, eps_c * eps_c - eps * eps, B_omega).feasible);

  const GradientOracle oracle = [&](const Vector& w, Rng& rng) {
    const double r = w.norm();
    Vector g = r < eps_c ? Vector(w) : Vector(w / r * std::max(0.0, 2.0 * eps_c - r));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector n(2);
    do {
      n << u(rng), u(rng);
    } while (n.norm() > 1.0);
    return Vector(g + noise * n);
  };
  int escaped = 0;
  for (int p = 0; p < 200; ++p) {
    Rng rng(700 + p);
    const double angle = 0.1 * p;
    Vector start(2);
    start << eps * 0.99 * std::cos(angle), eps * 0.99 * std::sin(angle);
    const Trajectory tr = run_projected_sgd(start, zeta, T, B_omega, oracle, rng);
    if (containment_check(tr, Vector(0), Vector::Zero(2), nullptr, eps_c).has_value()) ++escaped;
  }
  CHECK(escaped <= 0.10 * 200 + 3.0 * std::sqrt(200 * 0.1 * 0.9));
}
