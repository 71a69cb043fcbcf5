#include "e2tc/bandit_env.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace e2tc {

std::size_t BanditEnvironment::optimal_action(const Context& ctx) const {
  std::size_t best = 0;
  double best_mean = mean_reward(ctx, 0);
  for (std::size_t a = 1; a < ctx.actions.size(); ++a) {
    const double m = mean_reward(ctx, a);
    if (m > best_mean) {
      best_mean = m;
      best = a;
    }
  }
  return best;
}

std::vector<double> BanditEnvironment::mean_rewards(const Context& ctx) const {
  std::vector<double> out(ctx.actions.size());
  for (std::size_t a = 0; a < out.size(); ++a) out[a] = mean_reward(ctx, a);
  return out;
}

void FiniteSupport::validate() const {
  if (points.empty()) throw EnvError("finite support must contain at least one point");
  if (points.size() != probs.size()) throw EnvError("finite support points and probabilities differ in length");
  double total = 0.0;
  for (double p : probs) {
    if (p < 0.0) throw EnvError("finite support probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw EnvError("finite support probabilities must sum to 1");
  for (const Vector& p : points)
    if (p.size() != points.front().size()) throw EnvError("finite support points differ in dimension");
}

FiniteSupport FiniteSupport::uniform(std::vector<Vector> points) {
  FiniteSupport s;
  const double p = 1.0 / static_cast<double>(points.size());
  s.probs.assign(points.size(), p);
  s.points = std::move(points);
  // Re-normalize the last entry so the sum is exactly representable near 1.
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < s.probs.size(); ++i) head += s.probs[i];
  if (!s.probs.empty()) s.probs.back() = 1.0 - head;
  return s;
}

ContextGenerator gaussian_generator(std::size_t input_dim, std::size_t num_actions, double scale) {
  ContextGenerator gen;
  gen.draw = [input_dim, num_actions, scale](Rng& rng) {
    std::normal_distribution<double> normal(0.0, scale);
    std::vector<Vector> actions(num_actions, Vector(static_cast<Eigen::Index>(input_dim)));
    for (Vector& v : actions)
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
    return actions;
  };
  gen.permute = false;
  return gen;
}

RealizableEnv::RealizableEnv(Architecture arch, Vector theta_star, Vector w_star, double noise_bound,
                             std::size_t num_actions, Source source, double B_w, double B_theta)
    : arch_(arch),
      theta_star_(std::move(theta_star)),
      w_star_(std::move(w_star)),
      noise_bound_(noise_bound),
      num_actions_(num_actions),
      source_(std::move(source)),
      B_w_(B_w),
      B_theta_(B_theta) {
  arch_.validate();
  if (num_actions_ < 1) throw EnvError("environment needs at least one action");
  if (noise_bound_ < 0.0) throw EnvError("noise bound must be nonnegative");
  if (static_cast<std::size_t>(theta_star_.size()) != arch_.param_count())
    throw EnvError("theta_star does not match architecture");
  if (static_cast<std::size_t>(w_star_.size()) != arch_.feature_dim)
    throw EnvError("w_star does not match feature dimension");
  if (w_star_.norm() > B_w_ + 1e-9) throw EnvError("||w_star|| exceeds B_w");
  if (theta_star_.norm() > B_theta_ + 1e-9) throw EnvError("||theta_star|| exceeds B_theta");
  if (const auto* fs = std::get_if<FiniteSupport>(&source_)) {
    fs->validate();
    if (static_cast<std::size_t>(fs->points.front().size()) != arch_.input_dim)
      throw EnvError("finite support points do not match input dimension");
  } else if (!std::get<ContextGenerator>(source_).draw) {
    throw EnvError("context generator is empty");
  }
}

Vector RealizableEnv::draw_input(Rng& rng) const {
  if (const auto* fs = finite_support()) {
    std::discrete_distribution<std::size_t> pick(fs->probs.begin(), fs->probs.end());
    return fs->points[pick(rng)];
  }
  const auto& gen = std::get<ContextGenerator>(source_);
  std::vector<Vector> actions = gen.draw(rng);
  std::uniform_int_distribution<std::size_t> pick(0, actions.size() - 1);
  return actions[pick(rng)];
}

Context RealizableEnv::sample_context(Rng& rng) const {
  Context ctx;
  if (const auto* fs = finite_support()) {
    std::discrete_distribution<std::size_t> pick(fs->probs.begin(), fs->probs.end());
    ctx.actions.reserve(num_actions_);
    for (std::size_t a = 0; a < num_actions_; ++a) ctx.actions.push_back(fs->points[pick(rng)]);
    return ctx;
  }
  const auto& gen = std::get<ContextGenerator>(source_);
  ctx.actions = gen.draw(rng);
  if (ctx.actions.size() != num_actions_) throw EnvError("context generator returned the wrong number of actions");
  if (gen.permute) std::shuffle(ctx.actions.begin(), ctx.actions.end(), rng);
  return ctx;
}

double RealizableEnv::mean_reward(const Vector& x) const { return w_star_.dot(forward(arch_, theta_star_, x)); }

double RealizableEnv::reward(const Vector& x, Rng& rng) const {
  const double mean = mean_reward(x);
  if (noise_bound_ == 0.0) return mean;
  std::uniform_real_distribution<double> noise(-noise_bound_, noise_bound_);
  return mean + noise(rng);
}

double RealizableEnv::sample_reward(const Context& ctx, std::size_t action, Rng& rng) const {
  return reward(ctx.actions.at(action), rng);
}

double RealizableEnv::mean_reward(const Context& ctx, std::size_t action) const {
  return mean_reward(ctx.actions.at(action));
}

Context classification_context(const Vector& item, std::size_t num_actions) {
  if (item.size() < 1 || num_actions < 1) throw EnvError("classification_context: empty item or zero actions");
  const Eigen::Index p = item.size();
  Context ctx;
  ctx.actions.reserve(num_actions);
  for (std::size_t a = 0; a < num_actions; ++a) {
    Vector v = Vector::Zero(p * static_cast<Eigen::Index>(num_actions));
    v.segment(static_cast<Eigen::Index>(a) * p, p) = item;
    ctx.actions.push_back(std::move(v));
  }
  return ctx;
}

ClassificationBandit::ClassificationBandit(ClassificationData data, std::size_t num_actions)
    : data_(std::move(data)), num_actions_(num_actions) {
  if (data_.items.empty()) throw EnvError("classification dataset is empty");
  if (data_.items.size() != data_.labels.size()) throw EnvError("items and labels differ in length");
  item_dim_ = static_cast<std::size_t>(data_.items.front().size());
  for (std::size_t i = 0; i < data_.items.size(); ++i) {
    if (static_cast<std::size_t>(data_.items[i].size()) != item_dim_) throw EnvError("items differ in dimension");
    if (data_.labels[i] < 0 || static_cast<std::size_t>(data_.labels[i]) >= num_actions_)
      throw EnvError("label out of range for the number of actions");
  }
}

Context ClassificationBandit::sample_context(Rng& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, data_.items.size() - 1);
  const std::size_t i = pick(rng);
  Context ctx = classification_context(data_.items[i], num_actions_);
  ctx.label = data_.labels[i];
  return ctx;
}

double ClassificationBandit::sample_reward(const Context& ctx, std::size_t action, Rng&) const {
  return mean_reward(ctx, action);
}

double ClassificationBandit::mean_reward(const Context& ctx, std::size_t action) const {
  return static_cast<int>(action) == ctx.label ? 1.0 : 0.0;
}

ClassificationData make_synthetic_classification(std::size_t item_dim, std::size_t num_classes,
                                                 std::size_t count, double noise, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Vector> prototypes(num_classes, Vector(static_cast<Eigen::Index>(item_dim)));
  for (Vector& p : prototypes) {
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = normal(rng);
    p.normalize();
  }
  ClassificationData data;
  std::uniform_int_distribution<int> label(0, static_cast<int>(num_classes) - 1);
  for (std::size_t k = 0; k < count; ++k) {
    const int c = label(rng);
    Vector x = prototypes[static_cast<std::size_t>(c)];
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += noise * normal(rng);
    data.items.push_back(std::move(x));
    data.labels.push_back(c);
  }
  return data;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

TabularDataset load_tabular_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path.string());

  std::vector<std::vector<double>> rows;
  std::vector<std::string> header;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      std::ostringstream msg;
      msg << path.string() << ": row " << line_no << " has " << cells.size() << " columns, expected " << width;
      throw DataError(msg.str());
    }
    std::vector<double> values;
    values.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto v = parse_number(cells[c]);
      if (!v) {
        if (rows.empty() && header.empty() && line_no == 1) {
          header = cells;
          values.clear();
          break;
        }
        std::ostringstream msg;
        msg << path.string() << ": non-numeric cell at row " << line_no << ", column " << (c + 1) << " ('"
            << cells[c] << "')";
        throw DataError(msg.str());
      }
      values.push_back(*v);
    }
    if (!values.empty()) rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError(path.string() + ": no data rows");
  if (width < 2) throw DataError(path.string() + ": need at least one feature column and a target column");

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(width);
  Matrix raw(n, cols);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) raw(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];

  Vector means = raw.colwise().mean().transpose();
  Vector stds(cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    const double var = (raw.col(j).array() - means(j)).square().mean();
    if (!(var > 0.0)) {
      std::ostringstream msg;
      msg << path.string() << ": zero variance column " << (j + 1);
      throw DataError(msg.str());
    }
    stds(j) = std::sqrt(var);
    raw.col(j) = (raw.col(j).array() - means(j)) / stds(j);
  }

  TabularDataset ds;
  ds.features = raw.leftCols(cols - 1);
  ds.targets = raw.col(cols - 1);
  ds.feature_means = means.head(cols - 1);
  ds.feature_stds = stds.head(cols - 1);
  ds.target_mean = means(cols - 1);
  ds.target_std = stds(cols - 1);
  ds.column_names = header;
  return ds;
}

RegressionBandit::RegressionBandit(TabularDataset data) : data_(std::move(data)) {
  if (data_.rows() == 0) throw EnvError("regression dataset is empty");
}

Context RegressionBandit::sample_context(Rng& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, data_.rows() - 1);
  const auto i = static_cast<Eigen::Index>(pick(rng));
  Context ctx;
  ctx.actions.push_back(data_.features.row(i).transpose());
  ctx.target = data_.targets(i);
  return ctx;
}

double RegressionBandit::sample_reward(const Context& ctx, std::size_t action, Rng&) const {
  return mean_reward(ctx, action);
}

double RegressionBandit::mean_reward(const Context& ctx, std::size_t) const { return ctx.target; }

Eps0Estimate misspecification_eps0(const RealizableEnv& env, const Vector& theta0, std::size_t mc_samples,
                                   std::uint64_t seed) {
  const auto gap = [&](const Vector& x) {
    return env.w_star().dot(forward(env.arch(), theta0, x) - forward(env.arch(), env.theta_star(), x));
  };
  Eps0Estimate out;
  if (const auto* fs = env.finite_support()) {
    double sq = 0.0;
    for (std::size_t i = 0; i < fs->points.size(); ++i) {
      const double g = gap(fs->points[i]);
      sq += fs->probs[i] * g * g;
    }
    out.value = std::sqrt(sq);
    out.exact = true;
    return out;
  }
  if (mc_samples < 2) throw EnvError("misspecification_eps0: Monte-Carlo mode needs at least 2 samples");
  Rng rng(seed);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < mc_samples; ++i) {
    const double g = gap(env.draw_input(rng));
    sum += g * g;
    sum_sq += g * g * g * g;
  }
  const double n = static_cast<double>(mc_samples);
  const double mean = sum / n;
  const double var = std::max(sum_sq / n - mean * mean, 0.0) * n / (n - 1.0);
  out.value = std::sqrt(mean);
  // Delta method on sqrt(mean).
  const double se_mean = std::sqrt(var / n);
  out.std_error = mean > 0.0 ? se_mean / (2.0 * out.value) : se_mean;
  return out;
}

Matrix cross_moment(const RealizableEnv& env, const Vector& theta_a, const Vector& theta_b) {
  const auto* fs = env.finite_support();
  if (!fs) throw EnvError("exact moments require a finite-support environment");
  const auto d = static_cast<Eigen::Index>(env.arch().feature_dim);
  Matrix m = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < fs->points.size(); ++i) {
    const Vector a = forward(env.arch(), theta_a, fs->points[i]);
    const Vector b = forward(env.arch(), theta_b, fs->points[i]);
    m += fs->probs[i] * a * b.transpose();
  }
  return m;
}

SymMatrix true_covariance(const RealizableEnv& env, const Vector& theta) {
  return SymMatrix(cross_moment(env, theta, theta));
}

}  // namespace e2tc
