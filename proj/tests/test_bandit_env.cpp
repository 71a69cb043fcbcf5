#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "e2tc/bandit_env.hpp"

using namespace e2tc;

namespace {

// {1,2,1} net whose feature is exactly GELU(x): hidden pair (s x, -s x) recombined with (1/s, -1/s).
const Architecture kPair{1, 2, 1};

Vector pair_theta(double s = 0.5) {
  Vector t(6);
  t << s, -s, 0.0, 0.0, 1.0 / s, -1.0 / s;
  return t;
}

// x > 0 with GELU(x) == y, by bisection.
double gelu_inverse(double y) {
  double lo = 0.0, hi = 20.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gelu(mid) < y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Vector scalar(double v) { return Vector::Constant(1, v); }

RealizableEnv pair_env(std::vector<Vector> points, double w, double noise, std::size_t K = 1,
                       std::vector<double> probs = {}) {
  FiniteSupport fs = probs.empty() ? FiniteSupport::uniform(std::move(points)) : FiniteSupport{std::move(points), probs};
  return RealizableEnv(kPair, pair_theta(), Vector::Constant(1, w), noise, K, fs, std::abs(w) + 1.0, 10.0);
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto dir = std::filesystem::temp_directory_path() / "e2tc_test_env";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << content;
  return path;
}

}  // namespace

TEST_CASE("sample_context: action count, support frequencies, determinism") {
  const RealizableEnv single = pair_env({scalar(1.0)}, 1.0, 0.0, 1);
  Rng rng(1);
  CHECK(single.sample_context(rng).actions.size() == 1);

  const RealizableEnv two = pair_env({scalar(-1.0), scalar(1.0)}, 1.0, 0.0, 1);
  int first = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) first += two.sample_context(rng).actions[0](0) < 0.0 ? 1 : 0;
  CHECK(std::abs(first / static_cast<double>(n) - 0.5) < 0.02);

  const RealizableEnv gen(Architecture{3, 4, 2}, Vector::Zero(24), Vector::Zero(2), 0.1, 4,
                          gaussian_generator(3, 4, 1.0), 1.0, 1.0);
  Rng a(9), b(9);
  for (int i = 0; i < 20; ++i) {
    const Context ca = gen.sample_context(a), cb = gen.sample_context(b);
    CHECK(ca.actions.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) CHECK(ca.actions[k] == cb.actions[k]);
  }
}

TEST_CASE("rewards: noise-free equality, bounded noise, CLT mean") {
  const RealizableEnv clean = pair_env({scalar(1.0)}, 1.0, 0.0);
  Rng rng(2);
  CHECK(clean.reward(scalar(0.7), rng) == clean.mean_reward(scalar(0.7)));
  CHECK(clean.mean_reward(scalar(0.7)) == doctest::Approx(gelu(0.7)).epsilon(1e-14));

  const double B = 0.5;
  const RealizableEnv noisy = pair_env({scalar(1.0)}, 1.0, B);
  const Vector x = scalar(0.3);
  const double mu = noisy.mean_reward(x);
  const int n = 10000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = noisy.reward(x, rng);
    CHECK(std::abs(r - mu) <= B);
    CHECK(std::abs(r) <= noisy.w_star().norm() * std::abs(gelu(0.3)) + B + 1e-12);
    sum += r;
  }
  CHECK(std::abs(sum / n - mu) <= 3.0 * B / std::sqrt(3.0 * n));
  CHECK(noisy.noise_second_moment() == doctest::Approx(B * B / 3.0));
}

TEST_CASE("optimal_action: ties, constructed means, single action") {
  const RealizableEnv zero(kPair, pair_theta(), Vector::Zero(1), 0.0, 3, FiniteSupport::uniform({scalar(1.0)}), 1.0,
                           10.0);
  Context ctx{{scalar(0.1), scalar(2.0), scalar(-1.0)}};
  for (double m : zero.mean_rewards(ctx)) CHECK(m == 0.0);
  CHECK(zero.optimal_action(ctx) == 0);

  const RealizableEnv env = pair_env({scalar(1.0)}, 1.0, 0.0, 3);
  Context c3{{scalar(gelu_inverse(0.1)), scalar(gelu_inverse(0.9)), scalar(gelu_inverse(0.3))}};
  const auto means = env.mean_rewards(c3);
  CHECK(means[0] == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(means[1] == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(env.optimal_action(c3) == 1);
  for (std::size_t a = 0; a < 3; ++a) CHECK(means[env.optimal_action(c3)] >= means[a]);

  Context c1{{scalar(0.5)}};
  CHECK(env.optimal_action(c1) == 0);
}

TEST_CASE("classification_context block placement") {
  const Context big = classification_context(Vector::Ones(784), 5);
  CHECK(big.actions.size() == 5);
  for (const Vector& v : big.actions) CHECK(v.size() == 784 * 5);

  Vector item(2);
  item << 1, 2;
  const Context c = classification_context(item, 2);
  Vector a0(4), a1(4);
  a0 << 1, 2, 0, 0;
  a1 << 0, 0, 1, 2;
  CHECK(c.actions[0] == a0);
  CHECK(c.actions[1] == a1);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  Vector it(7);
  for (Eigen::Index i = 0; i < 7; ++i) it(i) = n(rng) + 5.0;
  const Context ck = classification_context(it, 4);
  Vector sum = Vector::Zero(28);
  for (std::size_t a = 0; a < 4; ++a) {
    for (Eigen::Index i = 0; i < 28; ++i) {
      const bool inside = i >= static_cast<Eigen::Index>(a * 7) && i < static_cast<Eigen::Index>((a + 1) * 7);
      CHECK((ck.actions[a](i) != 0.0) == inside);
    }
    sum += ck.actions[a];
  }
  for (std::size_t a = 0; a < 4; ++a) CHECK(sum.segment(static_cast<Eigen::Index>(a * 7), 7) == it);
}

TEST_CASE("classification bandit rewards the true class") {
  ClassificationData data = make_synthetic_classification(4, 3, 60, 0.1, 7);
  CHECK(data.items.size() == 60);
  const ClassificationBandit env(data, 3);
  CHECK(env.input_dim() == 12);
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const Context ctx = env.sample_context(rng);
    REQUIRE(ctx.label >= 0);
    for (std::size_t a = 0; a < 3; ++a) {
      const double expected = static_cast<int>(a) == ctx.label ? 1.0 : 0.0;
      CHECK(env.mean_reward(ctx, a) == expected);
      CHECK(env.sample_reward(ctx, a, rng) == expected);
    }
    CHECK(env.optimal_action(ctx) == static_cast<std::size_t>(ctx.label));
  }
}

TEST_CASE("load_tabular_dataset normalization, header detection, errors") {
  const auto two = temp_file("two.csv", "0,5\n2,7\n");
  const TabularDataset ds = load_tabular_dataset(two);
  CHECK(ds.features(0, 0) == doctest::Approx(-1.0));
  CHECK(ds.features(1, 0) == doctest::Approx(1.0));
  CHECK(ds.targets(0) == doctest::Approx(-1.0));

  std::string wine = "fixed acidity,volatile acidity,citric acid,residual sugar,chlorides,free sulfur dioxide,"
                     "total sulfur dioxide,density,pH,sulphates,alcohol,quality\n";
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int r = 0; r < 20; ++r) {
    for (int c = 0; c < 12; ++c) wine += (c ? "," : "") + std::to_string(u(rng));
    wine += "\n";
  }
  const TabularDataset w = load_tabular_dataset(temp_file("wine.csv", wine));
  CHECK(w.features.cols() == 11);
  CHECK(w.rows() == 20);
  CHECK(w.column_names.size() == 12);
  for (Eigen::Index j = 0; j < 11; ++j) {
    CHECK(std::abs(w.features.col(j).mean()) < 1e-12);
    CHECK(std::sqrt(w.features.col(j).array().square().mean()) == doctest::Approx(1.0));
  }

  CHECK_THROWS_WITH_AS(load_tabular_dataset(temp_file("const.csv", "1,2\n1,3\n1,4\n")),
                       doctest::Contains("zero variance column"), DataError);
  CHECK_THROWS_WITH_AS(load_tabular_dataset(temp_file("ragged.csv", "1,2\n1,3,4\n")), doctest::Contains("row 2"),
                       DataError);
  CHECK_THROWS_WITH_AS(load_tabular_dataset(temp_file("text.csv", "1,2\n1,x\n")), doctest::Contains("column 2"),
                       DataError);
  CHECK_THROWS_AS(load_tabular_dataset("/nonexistent/e2tc.csv"), DataError);
}

TEST_CASE("regression bandit: one action, squared-error regret kind") {
  const RegressionBandit env(load_tabular_dataset(temp_file("reg.csv", "a,b,y\n0,1,3\n1,0,5\n2,2,4\n")));
  CHECK(env.num_actions() == 1);
  CHECK(env.input_dim() == 2);
  CHECK(env.regret_kind() == RegretKind::SquaredError);
  Rng rng(6);
  const Context ctx = env.sample_context(rng);
  CHECK(env.sample_reward(ctx, 0, rng) == ctx.target);
}

TEST_CASE("misspecification_eps0: exact cases") {
  const RealizableEnv env = pair_env({scalar(1.0), scalar(-2.0)}, 1.0, 0.1);
  CHECK(misspecification_eps0(env, env.theta_star()).value == 0.0);

  const RealizableEnv zero_w(kPair, pair_theta(), Vector::Zero(1), 0.0, 1,
                             FiniteSupport::uniform({scalar(1.0), scalar(2.0)}), 1.0, 10.0);
  CHECK(misspecification_eps0(zero_w, Vector::Zero(6)).value == 0.0);

  // theta* = 0 gives phi* = 0; theta0 = pair net gives Delta phi = GELU(x), set to 1 and 3.
  const RealizableEnv flat(kPair, Vector::Zero(6), Vector::Constant(1, 1.0), 0.0, 1,
                           FiniteSupport::uniform({scalar(gelu_inverse(1.0)), scalar(gelu_inverse(3.0))}), 2.0, 10.0);
  const Eps0Estimate e = misspecification_eps0(flat, pair_theta());
  CHECK(e.exact);
  CHECK(e.value == doctest::Approx(std::sqrt(5.0)).epsilon(1e-9));
}

TEST_CASE("misspecification_eps0 Monte-Carlo mode on a generator environment") {
  const Architecture a{3, 4, 2};
  const Vector theta_star = Vector::LinSpaced(24, -1.0, 1.0);
  Vector w(2);
  w << 0.5, -0.3;
  const RealizableEnv env(a, theta_star, w, 0.0, 2, gaussian_generator(3, 2, 1.0), 1.0, 10.0);
  const Eps0Estimate same = misspecification_eps0(env, theta_star, 1000, 1);
  CHECK(!same.exact);
  CHECK(same.value == 0.0);
  const Eps0Estimate diff = misspecification_eps0(env, 0.5 * theta_star, 4000, 2);
  CHECK(diff.value > 0.0);
  CHECK(diff.std_error > 0.0);
}

TEST_CASE("true_covariance: basis support, single point, naive double loop, PSD") {
  const Architecture a{2, 3, 2};
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  Vector theta(static_cast<Eigen::Index>(a.param_count()));
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = n(rng);

  const Vector e1 = Vector::Unit(2, 0), e2 = Vector::Unit(2, 1);
  const RealizableEnv basis(a, theta, Vector::Zero(2), 0.0, 1, FiniteSupport::uniform({e1, e2}), 1.0, 100.0);
  const Vector f1 = forward(a, theta, e1), f2 = forward(a, theta, e2);
  const Matrix expected = 0.5 * (f1 * f1.transpose() + f2 * f2.transpose());
  CHECK((true_covariance(basis, theta).dense() - expected).norm() < 1e-14);

  const RealizableEnv single(a, theta, Vector::Zero(2), 0.0, 1, FiniteSupport::uniform({e1}), 1.0, 100.0);
  CHECK((true_covariance(single, theta).dense() - f1 * f1.transpose()).norm() < 1e-14);

  std::vector<Vector> pts;
  std::vector<double> probs;
  double total = 0.0;
  for (int i = 0; i < 9; ++i) {
    Vector p(2);
    p << n(rng), n(rng);
    pts.push_back(p);
    probs.push_back(1.0 + i);
    total += 1.0 + i;
  }
  for (double& p : probs) p /= total;
  double check = 0.0;
  for (double p : probs) check += p;
  probs.back() += 1.0 - check;
  const RealizableEnv rnd(a, theta, Vector::Zero(2), 0.0, 1, FiniteSupport{pts, probs}, 1.0, 100.0);
  Matrix naive = Matrix::Zero(2, 2);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const Vector f = forward(a, theta, pts[k]);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) naive(i, j) += probs[k] * f(i) * f(j);
  }
  const SymMatrix cov = true_covariance(rnd, theta);
  CHECK((cov.dense() - naive).norm() < 1e-13);
  CHECK(sym_eig(cov).eigenvalues.minCoeff() >= -1e-9);
}

TEST_CASE("environment construction rejects invalid input") {
  CHECK_THROWS_AS(FiniteSupport({{scalar(1.0), scalar(2.0)}, {0.5, 0.4}}).validate(), EnvError);
  CHECK_THROWS_AS(RealizableEnv(kPair, pair_theta(), Vector::Constant(1, 5.0), 0.0, 1,
                                FiniteSupport::uniform({scalar(1.0)}), 1.0, 10.0),
                  EnvError);
  CHECK_THROWS_AS(RealizableEnv(kPair, pair_theta(), Vector::Constant(1, 0.5), 0.0, 1,
                                FiniteSupport::uniform({Vector::Ones(2)}), 1.0, 10.0),
                  EnvError);
}
