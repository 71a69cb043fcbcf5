#pragma once

// Hyperparameter machinery: power-curve fit of commit-phase error against T2,
// choice of T2 under a fixed horizon, theory-driven hyperparameters and a grid sweep.

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace e2tc {

/// f(T2) = c (T2 + a)^alpha + b
struct PowerCurve {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double alpha = -0.5;
  double rmse = 0.0;

  double operator()(double t2) const;
};

PowerCurve fit_power_curve(std::span<const std::pair<double, double>> points);

/// Minimizer over integer T2 in [0, T - T1] of
///   explore_cost (T1 + T2) + (T - T1 - T2) f(T2), ties to the smallest T2.
std::size_t select_t2(const PowerCurve& curve, std::size_t T, std::size_t T1, double explore_cost = 0.9);

/// Exhaustive version of select_t2, usable at any T.
std::size_t select_t2_scan(const PowerCurve& curve, std::size_t T, std::size_t T1, double explore_cost = 0.9);

struct TheoryConstants {
  double B_w = 1.0;
  double D_w = 1.0;
  double B_theta = 1.0;
  double D_theta = 1.0;
  double B_phi = 1.0;
  double c_zeta = 0.1;
  double alpha = 0.0;  // powers of d and T_exp in the T1 formula
  double beta = 0.0;
};

struct TheoryHyperparams {
  double delta_eps = 0.0;
  double zeta = 0.0;
  double lambda = 0.0;
  double eps_w_sq = 0.0;
  std::size_t T1_floor = 0;
  double small_eps_lhs = 0.0;
  double small_eps_rhs = 0.0;
  bool small_eps_feasible = false;
  double small_zeta_lhs = 0.0;
  double small_zeta_rhs = 0.0;
  bool small_zeta_feasible = false;
};

/// Throws std::domain_error("pre-trained weights too poor ...") when eps_c^2 - 2 eps0^2 d - eps_theta^2 <= 0.
/// The zeta constraint is checked at `T1` when given (> 0), otherwise at T1_floor;
/// `T_exp` only matters when beta != 0 (defaults to T1 + T2).
TheoryHyperparams theory_hyperparams(double eps_c, double eps0, double eps_theta, std::size_t d, std::size_t T2,
                                     double delta, const TheoryConstants& consts, std::size_t T1 = 0,
                                     std::size_t T_exp = 0);

/// Left side of the learning-rate constraint on (zeta, lambda, T1, T2).
double small_zeta_lhs(double zeta, double lambda, double T1, double T2, double d, double delta,
                      const TheoryConstants& consts);

struct GridPoint {
  double zeta_w = 0.0;
  double zeta_theta = 0.0;
  double lambda = 0.0;
};

/// Final cumulative regret of one run at a grid point with the given seed.
using SweepProtocol = std::function<double(const GridPoint&, std::uint64_t seed)>;

struct SweepRow {
  std::size_t grid_index = 0;
  GridPoint point;
  std::vector<double> per_seed;
  double mean = 0.0;
  double std_dev = 0.0;
};

/// Rows ranked by mean (ascending), ties kept in grid order. Runs execute on
/// `workers` threads; results do not depend on the worker count.
std::vector<SweepRow> grid_sweep(std::span<const GridPoint> grid, const SweepProtocol& protocol,
                                 std::span<const std::uint64_t> seeds, std::size_t workers = 1);

/// Cartesian product in (zeta_w, zeta_theta, lambda) order, last index fastest.
std::vector<GridPoint> make_grid(std::span<const double> zeta_w, std::span<const double> zeta_theta,
                                 std::span<const double> lambda);

/// Runs job(i) for i in [0, n) over up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job);

}  // namespace e2tc
