#pragma once

// Stage-1 estimation: empirical covariance, Ridge fit of the last layer, effective
// dimensions, the exact excess-risk decomposition on finite-support environments,
// and closed-form bound evaluators for the random-design Ridge analysis.

#include <span>
#include <string>
#include <vector>

#include "e2tc/bandit_env.hpp"
#include "e2tc/linalg.hpp"

namespace e2tc {

/// Sigma_hat_0 together with a Cholesky factor of Sigma_hat_0 + lambda * I.
class RegularizedCovariance {
 public:
  RegularizedCovariance(SymMatrix sigma_hat, double lambda);

  const SymMatrix& sigma_hat() const { return sigma_hat_; }
  double lambda() const { return lambda_; }
  std::size_t dim() const { return sigma_hat_.dim(); }

  /// (Sigma_hat_0 + lambda I)^{-1} v
  Vector solve(const Vector& v) const { return chol_.solve(v); }
  SymMatrix regularized() const { return sigma_hat_.shifted(lambda_); }
  SymMatrix inv_sqrt() const { return spd_inv_sqrt(sigma_hat_, lambda_); }
  SymMatrix sqrt() const { return spd_sqrt(sigma_hat_, lambda_); }
  Spectrum spectrum() const { return sym_eig(sigma_hat_); }

 private:
  SymMatrix sigma_hat_;
  double lambda_;
  Cholesky chol_;
};

SymMatrix empirical_covariance(std::span<const Vector> features);

/// w0 = (Sigma_hat_0 + lambda I)^{-1} (1/T1) sum_t r_t phi_t
Vector ridge_fit(std::span<const Vector> features, std::span<const double> rewards, double lambda);

struct EffectiveDims {
  double d1 = 0.0;
  double d2 = 0.0;
  double d2_hat = 0.0;
  double c_eff = 1.0;
  std::size_t d = 0;
};

EffectiveDims effective_dims(const Vector& eigenvalues, double lambda);

struct RidgeErrorDecomposition {
  double eps_rg = 0.0;
  double eps_bs = 0.0;
  double eps_vr = 0.0;
  double lhs = 0.0;                 // ||w0 - w_tilde||^2_{Sigma0}
  double dist_wstar_sq = 0.0;       // ||w0 - w*||^2_{Sigma0}
  double reg_wstar_sq = 0.0;        // ||w* - w_lambda||^2_{Sigma0}
  Vector w0, w_tilde, w_lambda, w_cond;
};

/// Exact decomposition on a realizable finite-support environment. `inputs` are the
/// raw contexts X_t of the Ridge sample and `rewards` the observed r_t.
RidgeErrorDecomposition oracle_excess_decomposition(const RealizableEnv& env, const Vector& theta0,
                                                    double lambda, std::span<const Vector> inputs,
                                                    std::span<const double> rewards);

/// sqrt(d (eps0^2 + eps_delta)), eps_delta = 4 B_w^2 B_phi^2 sqrt(log(1/delta) / (2 T1)).
double bound_misspec(double d, double eps0, double B_w, double B_phi, double T1, double delta);
double misspec_eps_delta(double B_w, double B_phi, double T1, double delta);

/// 2 sqrt((d log 6 + log(1/delta)) / T1).
double bound_noise(double d, double T1, double delta);

/// sqrt(d (eps0^2 + eps_delta)) + eps_eta + sqrt(lambda) ||w*||.
double bound_combined_hsigl(double d, double eps0, double eps_delta, double eps_eta, double lambda,
                            double norm_w_star);

struct RegErrorBounds {
  double wrt_wtilde = 0.0;
  double wrt_wstar = 0.0;
};

RegErrorBounds bound_reg_error(const Vector& eigenvalues, double lambda, double norm_w_star, double eps0);

struct RidgeBaseInputs {
  Vector eigenvalues;
  double lambda = 1.0;
  double T1 = 1.0;
  double delta = 0.1;
  double B_w = 1.0;
  double B_phi = 1.0;
  double B_eta = 0.0;
  double eps0 = 0.0;
  double approx_sq = 0.0;  // E_X[approx_lambda(X)^2]
  double eps_rg = -1.0;    // negative: use the regularization-error bound w.r.t. w_tilde
};

struct RidgeBaseBounds {
  double rho = 0.0;
  double b_lambda = 0.0;
  double delta_s = 0.0;
  double delta_f = 0.0;
  double eps_bs_bound = 0.0;
  double eps_vr_bound = 0.0;
  EffectiveDims dims;
  std::vector<std::string> warnings;
};

RidgeBaseBounds ridge_base_bounds(const RidgeBaseInputs& in);

/// B_w^2 / sqrt(T1) + eps0^2, the fallback for E[approx_lambda(X)^2].
double approx_sq_fallback(double B_w, double T1, double eps0);

/// High-probability bound on ||Sigma_hat - Sigma||_2 for n i.i.d. vectors of norm < B.
double second_moment_bound(double B, double sigma_norm, double n, double d, double delta);

enum class Regime { DataPoor, DataRich };

Regime parse_regime(const std::string& tag);
double regime_lambda(Regime regime, double T1, double B_phi);

}  // namespace e2tc
