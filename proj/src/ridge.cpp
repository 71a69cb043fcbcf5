#include "e2tc/ridge.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace e2tc {

namespace {

void check_delta(double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in (0, 1]");
}

void check_lambda(double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
}

Matrix pseudo_inverse(const SymMatrix& a) {
  const Spectrum s = sym_eig(a);
  const double cutoff = 1e-12 * std::max(s.eigenvalues(0), 0.0);
  Vector inv = Vector::Zero(s.eigenvalues.size());
  for (Eigen::Index i = 0; i < inv.size(); ++i)
    if (s.eigenvalues(i) > cutoff && s.eigenvalues(i) > 0.0) inv(i) = 1.0 / s.eigenvalues(i);
  return s.eigenvectors * inv.asDiagonal() * s.eigenvectors.transpose();
}

}  // namespace

RegularizedCovariance::RegularizedCovariance(SymMatrix sigma_hat, double lambda)
    : sigma_hat_(std::move(sigma_hat)), lambda_(lambda), chol_((check_lambda(lambda), sigma_hat_), lambda) {}

SymMatrix empirical_covariance(std::span<const Vector> features) {
  if (features.empty()) throw std::invalid_argument("empirical_covariance: empty feature list");
  const Eigen::Index d = features.front().size();
  Matrix m = Matrix::Zero(d, d);
  for (const Vector& f : features) {
    if (f.size() != d) throw std::invalid_argument("empirical_covariance: features differ in dimension");
    m.noalias() += f * f.transpose();
  }
  m /= static_cast<double>(features.size());
  return SymMatrix(m);
}

Vector ridge_fit(std::span<const Vector> features, std::span<const double> rewards, double lambda) {
  check_lambda(lambda);
  if (features.size() != rewards.size()) throw std::invalid_argument("ridge_fit: features and rewards differ in length");
  const SymMatrix cov = empirical_covariance(features);
  Vector rhs = Vector::Zero(features.front().size());
  for (std::size_t t = 0; t < features.size(); ++t) rhs += rewards[t] * features[t];
  rhs /= static_cast<double>(features.size());
  return spd_solve(cov, lambda, rhs);
}

EffectiveDims effective_dims(const Vector& eigenvalues, double lambda) {
  check_lambda(lambda);
  EffectiveDims out;
  out.d = static_cast<std::size_t>(eigenvalues.size());
  for (Eigen::Index j = 0; j < eigenvalues.size(); ++j) {
    if (eigenvalues(j) < -1e-9) throw std::invalid_argument("effective_dims: negative eigenvalue");
    const double ev = std::max(eigenvalues(j), 0.0);
    const double r = ev / (ev + lambda);
    const double c = lambda / (ev + lambda);
    out.d1 += r;
    out.d2 += r * r;
    out.d2_hat += c * c;
  }
  out.c_eff = std::max(out.d1, 1.0);
  return out;
}

RidgeErrorDecomposition oracle_excess_decomposition(const RealizableEnv& env, const Vector& theta0,
                                                    double lambda, std::span<const Vector> inputs,
                                                    std::span<const double> rewards) {
  if (!env.realizable()) throw EnvError("oracle decomposition requires a realizable environment");
  if (!env.finite_support()) throw EnvError("oracle decomposition requires a finite-support environment");
  check_lambda(lambda);
  if (inputs.size() != rewards.size() || inputs.empty())
    throw std::invalid_argument("oracle_excess_decomposition: inputs and rewards must be nonempty and equal length");

  const Architecture& arch = env.arch();
  const SymMatrix sigma0 = true_covariance(env, theta0);
  const Vector moment = cross_moment(env, theta0, env.theta_star()) * env.w_star();

  RidgeErrorDecomposition out;
  out.w_tilde = pseudo_inverse(sigma0) * moment;
  out.w_lambda = spd_solve(sigma0, lambda, moment);

  std::vector<Vector> features;
  std::vector<double> means;
  features.reserve(inputs.size());
  means.reserve(inputs.size());
  for (const Vector& x : inputs) {
    features.push_back(forward(arch, theta0, x));
    means.push_back(env.mean_reward(x));
  }
  out.w_cond = ridge_fit(features, means, lambda);
  out.w0 = ridge_fit(features, rewards, lambda);

  const auto sq = [&](const Vector& v) {
    const double n = weighted_norm(v, sigma0, 0.0);
    return n * n;
  };
  out.eps_rg = sq(out.w_tilde - out.w_lambda);
  out.eps_bs = sq(out.w_lambda - out.w_cond);
  out.eps_vr = sq(out.w_cond - out.w0);
  out.lhs = sq(out.w0 - out.w_tilde);
  out.dist_wstar_sq = sq(out.w0 - env.w_star());
  out.reg_wstar_sq = sq(env.w_star() - out.w_lambda);
  return out;
}

double misspec_eps_delta(double B_w, double B_phi, double T1, double delta) {
  check_delta(delta);
  if (!(T1 >= 1.0)) throw std::invalid_argument("T1 must be >= 1");
  return 4.0 * B_w * B_w * B_phi * B_phi * std::sqrt(std::log(1.0 / delta) / (2.0 * T1));
}

double bound_misspec(double d, double eps0, double B_w, double B_phi, double T1, double delta) {
  return std::sqrt(d * (eps0 * eps0 + misspec_eps_delta(B_w, B_phi, T1, delta)));
}

double bound_noise(double d, double T1, double delta) {
  check_delta(delta);
  if (!(T1 >= 1.0)) throw std::invalid_argument("T1 must be >= 1");
  return 2.0 * std::sqrt((d * std::log(6.0) + std::log(1.0 / delta)) / T1);
}

double bound_combined_hsigl(double d, double eps0, double eps_delta, double eps_eta, double lambda,
                            double norm_w_star) {
  return std::sqrt(d * (eps0 * eps0 + eps_delta)) + eps_eta + std::sqrt(lambda) * norm_w_star;
}

RegErrorBounds bound_reg_error(const Vector& eigenvalues, double lambda, double norm_w_star, double eps0) {
  const EffectiveDims dims = effective_dims(eigenvalues, lambda);
  const double base = 0.5 * lambda * norm_w_star * norm_w_star;
  return RegErrorBounds{base + 2.0 * eps0 * eps0 * dims.d2_hat, base + 2.0 * eps0 * eps0 * dims.d2};
}

double approx_sq_fallback(double B_w, double T1, double eps0) {
  return B_w * B_w / std::sqrt(T1) + eps0 * eps0;
}

RidgeBaseBounds ridge_base_bounds(const RidgeBaseInputs& in) {
  check_lambda(in.lambda);
  check_delta(in.delta);
  RidgeBaseBounds out;
  out.dims = effective_dims(in.eigenvalues, in.lambda);
  const double d1 = out.dims.d1;
  const double d2 = out.dims.d2;
  const double inf = std::numeric_limits<double>::infinity();
  const double l = std::log(1.0 / in.delta);

  if (!(d1 > 0.0)) {
    out.warnings.emplace_back("effective dimension d1 is zero; rho and b_lambda are unbounded");
    out.rho = out.b_lambda = out.delta_s = out.delta_f = out.eps_bs_bound = out.eps_vr_bound = inf;
    return out;
  }

  out.rho = in.B_phi / std::sqrt(d1 * in.lambda);
  out.b_lambda = (1.0 + 2.0 * std::numbers::sqrt2) * in.B_w * in.B_phi * in.B_phi / std::sqrt(d1 * in.lambda) +
                 in.eps0 / in.lambda * (2.0 + std::numbers::sqrt2) * in.B_phi * in.B_phi;

  const double rho_sq_d1 = out.rho * out.rho * d1;
  const double log_ceff = std::log(out.dims.c_eff / in.delta);
  out.delta_s = std::sqrt(4.0 * rho_sq_d1 * log_ceff / in.T1) + 2.0 * rho_sq_d1 * log_ceff / (3.0 * in.T1);
  out.delta_f = std::sqrt(std::max(rho_sq_d1 - d2 / d1, 0.0) / in.T1) * (1.0 + std::sqrt(8.0 * l)) +
                4.0 * std::sqrt(out.rho * out.rho * out.rho * out.rho * d1 + d2 / d1) / (3.0 * in.T1) * l;

  const double sample_floor = 6.0 * rho_sq_d1 * log_ceff;
  if (in.T1 < sample_floor) {
    std::ostringstream msg;
    msg << "T1 = " << in.T1 << " is below 6 rho^2 d1 log(c_eff/delta) = " << sample_floor;
    out.warnings.push_back(msg.str());
  }
  const double log_floor = std::max(0.0, 2.6 - std::log(out.dims.c_eff));
  if (!(l > log_floor)) {
    std::ostringstream msg;
    msg << "log(1/delta) = " << l << " does not exceed max(0, 2.6 - log c_eff) = " << log_floor;
    out.warnings.push_back(msg.str());
  }

  const double eps_rg = in.eps_rg >= 0.0
                            ? in.eps_rg
                            : bound_reg_error(in.eigenvalues, in.lambda, in.B_w, in.eps0).wrt_wtilde;
  if (out.delta_s >= 1.0) {
    out.warnings.emplace_back("delta_s >= 1; bias and variance bounds are vacuous");
    out.eps_bs_bound = out.eps_vr_bound = inf;
    return out;
  }
  const double one_minus = 1.0 - out.delta_s;
  const double growth = 1.0 + std::sqrt(8.0 * l);
  const double tail = out.b_lambda * std::sqrt(d1) + std::sqrt(eps_rg);
  out.eps_bs_bound = 2.0 / (one_minus * one_minus) *
                     ((rho_sq_d1 * in.approx_sq + eps_rg) / in.T1 * growth * growth +
                      16.0 * tail * tail / (in.T1 * in.T1) * l * l);

  const double noise_sq = in.B_eta * in.B_eta;
  const double spread = d2 + out.delta_f * std::sqrt(d1 * d2);
  out.eps_vr_bound = noise_sq * spread / (in.T1 * one_minus * one_minus) +
                     2.0 * noise_sq * std::sqrt(spread * l) / (in.T1 * std::pow(one_minus, 1.5)) +
                     2.0 * noise_sq / (in.T1 * one_minus) * l;
  return out;
}

double second_moment_bound(double B, double sigma_norm, double n, double d, double delta) {
  check_delta(delta);
  const double l = std::log(2.0 * d / delta);
  const double b2 = B * B;
  return (b2 * l + std::sqrt(b2 * b2 * l * l + 2.0 * b2 * sigma_norm * n * l)) / n;
}

Regime parse_regime(const std::string& tag) {
  if (tag == "data-poor" || tag == "poor") return Regime::DataPoor;
  if (tag == "data-rich" || tag == "rich") return Regime::DataRich;
  throw std::invalid_argument("unknown regime '" + tag + "' (expected data-poor or data-rich)");
}

double regime_lambda(Regime regime, double T1, double B_phi) {
  if (!(T1 >= 2.0)) throw std::invalid_argument("regime_lambda: T1 must be >= 2");
  switch (regime) {
    case Regime::DataPoor:
      return 1.0 / std::sqrt(T1);
    case Regime::DataRich:
      return 7.0 * B_phi * B_phi * std::log(T1) / T1;
  }
  throw std::invalid_argument("regime_lambda: unknown regime");
}

}  // namespace e2tc
