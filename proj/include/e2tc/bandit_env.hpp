#pragma once

// Context and reward generation: synthetic realizable environments, classification
// datasets posed as bandits (block-embedded contexts), and tabular regression data.

#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "e2tc/feature_net.hpp"

namespace e2tc {

using Rng = std::mt19937_64;

class EnvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Context {
  std::vector<Vector> actions;
  int label = -1;       // dataset classification only
  double target = 0.0;  // dataset regression only
};

enum class RegretKind { MeanGap, SquaredError };

class BanditEnvironment {
 public:
  virtual ~BanditEnvironment() = default;

  virtual std::size_t num_actions() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual Context sample_context(Rng& rng) const = 0;
  virtual double sample_reward(const Context& ctx, std::size_t action, Rng& rng) const = 0;
  virtual double mean_reward(const Context& ctx, std::size_t action) const = 0;
  virtual bool realizable() const { return false; }
  virtual RegretKind regret_kind() const { return RegretKind::MeanGap; }

  /// argmax of mean rewards, ties to the lowest index.
  std::size_t optimal_action(const Context& ctx) const;
  std::vector<double> mean_rewards(const Context& ctx) const;
};

struct FiniteSupport {
  std::vector<Vector> points;
  std::vector<double> probs;

  void validate() const;
  static FiniteSupport uniform(std::vector<Vector> points);
};

/// Draws the K action vectors of one context. When `permute` is set the
/// actions are shuffled afterwards so every action has the same marginal.
struct ContextGenerator {
  std::function<std::vector<Vector>(Rng&)> draw;
  bool permute = false;
};

ContextGenerator gaussian_generator(std::size_t input_dim, std::size_t num_actions, double scale);

/// r = w*^T phi_{theta*}(x) + eta, eta ~ U[-B_eta, B_eta].
class RealizableEnv final : public BanditEnvironment {
 public:
  using Source = std::variant<FiniteSupport, ContextGenerator>;

  RealizableEnv(Architecture arch, Vector theta_star, Vector w_star, double noise_bound,
                std::size_t num_actions, Source source, double B_w, double B_theta);

  std::size_t num_actions() const override { return num_actions_; }
  std::size_t input_dim() const override { return arch_.input_dim; }
  Context sample_context(Rng& rng) const override;
  double sample_reward(const Context& ctx, std::size_t action, Rng& rng) const override;
  double mean_reward(const Context& ctx, std::size_t action) const override;
  bool realizable() const override { return true; }

  double mean_reward(const Vector& x) const;
  double reward(const Vector& x, Rng& rng) const;
  Vector draw_input(Rng& rng) const;

  const Architecture& arch() const { return arch_; }
  const Vector& theta_star() const { return theta_star_; }
  const Vector& w_star() const { return w_star_; }
  double noise_bound() const { return noise_bound_; }
  double noise_second_moment() const { return noise_bound_ * noise_bound_ / 3.0; }
  double B_w() const { return B_w_; }
  double B_theta() const { return B_theta_; }
  const FiniteSupport* finite_support() const { return std::get_if<FiniteSupport>(&source_); }

 private:
  Architecture arch_;
  Vector theta_star_;
  Vector w_star_;
  double noise_bound_;
  std::size_t num_actions_;
  Source source_;
  double B_w_;
  double B_theta_;
};

/// K vectors of dim K*p; vector a holds `item` in block a and zeros elsewhere.
Context classification_context(const Vector& item, std::size_t num_actions);

struct ClassificationData {
  std::vector<Vector> items;
  std::vector<int> labels;
};

/// Reward 1 for the correct class, else 0. Items are drawn uniformly with replacement.
class ClassificationBandit final : public BanditEnvironment {
 public:
  ClassificationBandit(ClassificationData data, std::size_t num_actions);

  std::size_t num_actions() const override { return num_actions_; }
  std::size_t input_dim() const override { return item_dim_ * num_actions_; }
  Context sample_context(Rng& rng) const override;
  double sample_reward(const Context& ctx, std::size_t action, Rng& rng) const override;
  double mean_reward(const Context& ctx, std::size_t action) const override;

  const ClassificationData& data() const { return data_; }

 private:
  ClassificationData data_;
  std::size_t num_actions_;
  std::size_t item_dim_;
};

/// Class prototypes on the unit sphere plus isotropic noise.
ClassificationData make_synthetic_classification(std::size_t item_dim, std::size_t num_classes,
                                                 std::size_t count, double noise, std::uint64_t seed);

struct TabularDataset {
  Matrix features;  // rows = samples, normalized
  Vector targets;   // normalized
  std::vector<std::string> column_names;
  Vector feature_means, feature_stds;
  double target_mean = 0.0, target_std = 1.0;

  std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
};

/// Parses a numeric CSV (optional header, last column = target) and normalizes
/// every column to zero mean and unit population variance.
TabularDataset load_tabular_dataset(const std::filesystem::path& path);

/// Single-action regression bandit over the rows of a dataset; reward is the target.
class RegressionBandit final : public BanditEnvironment {
 public:
  explicit RegressionBandit(TabularDataset data);

  std::size_t num_actions() const override { return 1; }
  std::size_t input_dim() const override { return static_cast<std::size_t>(data_.features.cols()); }
  Context sample_context(Rng& rng) const override;
  double sample_reward(const Context& ctx, std::size_t action, Rng& rng) const override;
  double mean_reward(const Context& ctx, std::size_t action) const override;
  RegretKind regret_kind() const override { return RegretKind::SquaredError; }

 private:
  TabularDataset data_;
};

struct Eps0Estimate {
  double value = 0.0;
  double std_error = 0.0;
  bool exact = false;
};

/// sqrt(E_X[(w*^T (phi_{theta0}(X) - phi_{theta*}(X)))^2]); exact on finite support,
/// Monte-Carlo otherwise.
Eps0Estimate misspecification_eps0(const RealizableEnv& env, const Vector& theta0,
                                   std::size_t mc_samples = 10000, std::uint64_t seed = 0);

/// E_X[phi_theta(X) phi_theta(X)^T] on a finite-support environment.
SymMatrix true_covariance(const RealizableEnv& env, const Vector& theta);

/// E_X[phi_a(X) phi_b(X)^T] on a finite-support environment (not symmetric in general).
Matrix cross_moment(const RealizableEnv& env, const Vector& theta_a, const Vector& theta_b);

}  // namespace e2tc
