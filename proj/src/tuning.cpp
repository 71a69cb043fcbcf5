#include "e2tc/tuning.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

namespace e2tc {

namespace {

constexpr std::size_t kScanLimit = 100000;
constexpr std::size_t kCoarsePoints = 4000;

double positive_log_log(double y) {
  if (!(y > std::exp(1.0))) return 0.0;
  return std::log(std::log(y));
}

double t2_cost(const PowerCurve& curve, std::size_t T, std::size_t T1, double explore_cost, std::size_t t2) {
  const double explore = explore_cost * static_cast<double>(T1 + t2);
  const std::size_t remaining = T - T1 - t2;
  if (remaining == 0) return explore;
  const double f = curve(static_cast<double>(t2));
  if (std::isnan(f)) return std::numeric_limits<double>::infinity();
  return explore + static_cast<double>(remaining) * f;
}

void check_t2_args(std::size_t T, std::size_t T1, double explore_cost) {
  if (T1 > T) throw std::invalid_argument("select_t2: empty feasible range (T1 > T)");
  if (!(explore_cost >= 0.0 && explore_cost <= 1.0))
    throw std::invalid_argument("select_t2: explore_cost must lie in [0, 1]");
}

}  // namespace

double PowerCurve::operator()(double t2) const {
  if (c == 0.0) return b;
  return c * std::pow(t2 + a, alpha) + b;
}

PowerCurve fit_power_curve(std::span<const std::pair<double, double>> points) {
  if (points.size() < 4) throw std::invalid_argument("fit_power_curve: need at least 4 points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].first >= 0.0)) throw std::invalid_argument("fit_power_curve: T2 values must be >= 0");
    for (std::size_t j = 0; j < i; ++j)
      if (points[i].first == points[j].first) throw std::invalid_argument("fit_power_curve: T2 values must be distinct");
  }

  const double n = static_cast<double>(points.size());
  std::vector<double> offsets{0.0};
  for (int k = 0; k <= 14; ++k) offsets.push_back(std::ldexp(1.0, k));

  PowerCurve best;
  best.rmse = std::numeric_limits<double>::infinity();
  std::vector<double> xs(points.size());
  for (int step = 0; step <= 76; ++step) {
    const double alpha = -1.0 + 0.0125 * step;
    for (double a : offsets) {
      bool finite = true;
      for (std::size_t k = 0; k < points.size(); ++k) {
        xs[k] = std::pow(points[k].first + a, alpha);
        finite = finite && std::isfinite(xs[k]);
      }
      if (!finite) continue;
      double mx = 0.0, my = 0.0;
      for (std::size_t k = 0; k < points.size(); ++k) {
        mx += xs[k];
        my += points[k].second;
      }
      mx /= n;
      my /= n;
      double sxx = 0.0, sxy = 0.0;
      for (std::size_t k = 0; k < points.size(); ++k) {
        sxx += (xs[k] - mx) * (xs[k] - mx);
        sxy += (xs[k] - mx) * (points[k].second - my);
      }
      const double c = sxx > 0.0 ? sxy / sxx : 0.0;
      const double b = my - c * mx;
      double sse = 0.0;
      for (std::size_t k = 0; k < points.size(); ++k) {
        const double r = c * xs[k] + b - points[k].second;
        sse += r * r;
      }
      const double rmse = std::sqrt(sse / n);
      if (rmse < best.rmse) best = PowerCurve{a, b, c, alpha, rmse};
    }
  }
  if (!std::isfinite(best.rmse)) throw std::invalid_argument("fit_power_curve: no finite candidate on the grid");
  return best;
}

std::size_t select_t2_scan(const PowerCurve& curve, std::size_t T, std::size_t T1, double explore_cost) {
  check_t2_args(T, T1, explore_cost);
  std::size_t best = 0;
  double best_cost = t2_cost(curve, T, T1, explore_cost, 0);
  for (std::size_t t2 = 1; t2 <= T - T1; ++t2) {
    const double c = t2_cost(curve, T, T1, explore_cost, t2);
    if (c < best_cost) {
      best_cost = c;
      best = t2;
    }
  }
  return best;
}

std::size_t select_t2(const PowerCurve& curve, std::size_t T, std::size_t T1, double explore_cost) {
  check_t2_args(T, T1, explore_cost);
  const std::size_t n = T - T1;
  if (n <= kScanLimit) return select_t2_scan(curve, T, T1, explore_cost);

  const auto cost = [&](std::size_t t2) { return t2_cost(curve, T, T1, explore_cost, t2); };

  // Coarse geometric grid, then golden-section inside the bracket around its best point.
  std::vector<std::size_t> grid{0};
  const double ratio = std::pow(static_cast<double>(n), 1.0 / static_cast<double>(kCoarsePoints));
  double g = 1.0;
  for (std::size_t k = 0; k < kCoarsePoints; ++k) {
    const auto v = static_cast<std::size_t>(std::llround(g));
    if (v > grid.back() && v <= n) grid.push_back(v);
    g *= ratio;
  }
  if (grid.back() != n) grid.push_back(n);

  std::size_t best_idx = 0;
  double best_cost = cost(grid[0]);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double c = cost(grid[k]);
    if (c < best_cost) {
      best_cost = c;
      best_idx = k;
    }
  }
  std::size_t lo = grid[best_idx == 0 ? 0 : best_idx - 1];
  std::size_t hi = grid[std::min(best_idx + 1, grid.size() - 1)];

  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  while (hi - lo > 8) {
    const std::size_t m1 = hi - static_cast<std::size_t>(std::llround(phi * static_cast<double>(hi - lo)));
    const std::size_t m2 = lo + static_cast<std::size_t>(std::llround(phi * static_cast<double>(hi - lo)));
    if (cost(m1) <= cost(m2))
      hi = m2;
    else
      lo = m1;
  }
  std::size_t best = grid[best_idx];
  const std::size_t from = lo > 8 ? lo - 8 : 0;
  const std::size_t to = std::min(n, hi + 8);
  for (std::size_t t2 = from; t2 <= to; ++t2) {
    const double c = cost(t2);
    if (c < best_cost || (c == best_cost && t2 < best)) {
      best_cost = c;
      best = t2;
    }
  }
  return best;
}

double small_zeta_lhs(double zeta, double lambda, double T1, double T2, double d, double delta,
                      const TheoryConstants& k) {
  const double e = std::exp(1.0);
  const double L = std::log(2.0 * d / delta);
  const double bphi2 = k.B_phi * k.B_phi;
  const double ridge = (16.0 * k.B_w * k.B_w + 4.0 * k.D_w * k.D_w * zeta * zeta / lambda) / T1 *
                       (bphi2 * L + std::sqrt(bphi2 * bphi2 * L * L + 2.0 * bphi2 * bphi2 * T1 * L));
  const double drift = zeta * zeta * T2 * (k.D_w * k.D_w / lambda + k.D_theta);
  const double mart_w =
      20.0 * k.B_w * k.D_w * zeta *
      std::sqrt(T2 * (positive_log_log(64.0 * e * k.B_w * k.D_w * T2 * zeta * zeta) + std::log(2.0 / delta)));
  const double mart_theta =
      20.0 * k.B_theta * k.D_theta * zeta *
      std::sqrt(T2 * (positive_log_log(64.0 * e * k.B_theta * k.D_theta * T2 * zeta * zeta) + std::log(2.0 / delta)));
  return 4.0 * k.B_w * k.B_w * lambda + ridge + drift + mart_w + mart_theta;
}

TheoryHyperparams theory_hyperparams(double eps_c, double eps0, double eps_theta, std::size_t d, std::size_t T2,
                                     double delta, const TheoryConstants& k, std::size_t T1, std::size_t T_exp) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("theory_hyperparams: delta must lie in (0, 1)");
  if (d < 1 || T2 < 1) throw std::invalid_argument("theory_hyperparams: need d >= 1 and T2 >= 1");
  const double dd = static_cast<double>(d);
  TheoryHyperparams out;
  out.delta_eps = eps_c * eps_c - 2.0 * eps0 * eps0 * dd - eps_theta * eps_theta;
  if (!(out.delta_eps > 0.0))
    throw std::domain_error("pre-trained weights too poor: eps_c^2 - 2 eps0^2 d - eps_theta^2 = " +
                            std::to_string(out.delta_eps) + " <= 0");

  const double log_inv_delta = std::log(1.0 / delta);
  out.zeta = k.c_zeta * out.delta_eps / std::sqrt(static_cast<double>(T2) * log_inv_delta);
  out.lambda = k.D_w * out.zeta * std::sqrt(static_cast<double>(T2)) / (std::sqrt(3.0) * k.B_w);
  out.eps_w_sq = 0.5 * (eps_c * eps_c - eps_theta * eps_theta + 2.0 * eps0 * eps0 * dd);

  const double t_exp = static_cast<double>(T_exp > 0 ? T_exp : T1 + T2);
  const double t1 = (1.0 + eps0 * eps0 * dd) * std::pow(dd, k.alpha) * std::pow(t_exp, k.beta) *
                    std::log(dd / delta) * log_inv_delta / std::pow(out.delta_eps, 3);
  out.T1_floor = static_cast<std::size_t>(std::ceil(std::max(t1, 1.0)));

  out.small_eps_lhs = 2.0 * eps0 * eps0 * dd + 0.5 * k.B_w * k.B_w * out.lambda;
  out.small_eps_rhs = out.eps_w_sq;
  out.small_eps_feasible = out.small_eps_lhs < out.small_eps_rhs;

  const double t1_check = static_cast<double>(T1 > 0 ? T1 : out.T1_floor);
  out.small_zeta_lhs = small_zeta_lhs(out.zeta, out.lambda, t1_check, static_cast<double>(T2), dd, delta, k);
  out.small_zeta_rhs = eps_c * eps_c - out.eps_w_sq - eps_theta * eps_theta;
  out.small_zeta_feasible = out.small_zeta_lhs < out.small_zeta_rhs;
  return out;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : threads) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<GridPoint> make_grid(std::span<const double> zeta_w, std::span<const double> zeta_theta,
                                 std::span<const double> lambda) {
  std::vector<GridPoint> grid;
  for (double zw : zeta_w)
    for (double zt : zeta_theta)
      for (double l : lambda) grid.push_back(GridPoint{zw, zt, l});
  return grid;
}

std::vector<SweepRow> grid_sweep(std::span<const GridPoint> grid, const SweepProtocol& protocol,
                                 std::span<const std::uint64_t> seeds, std::size_t workers) {
  if (grid.empty()) throw std::invalid_argument("grid_sweep: empty grid");
  if (seeds.empty()) throw std::invalid_argument("grid_sweep: no seeds");
  const std::size_t S = seeds.size();
  std::vector<double> results(grid.size() * S);
  parallel_for(results.size(), workers, [&](std::size_t job) {
    results[job] = protocol(grid[job / S], seeds[job % S]);
  });

  std::vector<SweepRow> rows(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    SweepRow& row = rows[g];
    row.grid_index = g;
    row.point = grid[g];
    row.per_seed.assign(results.begin() + static_cast<std::ptrdiff_t>(g * S),
                        results.begin() + static_cast<std::ptrdiff_t>((g + 1) * S));
    row.mean = std::accumulate(row.per_seed.begin(), row.per_seed.end(), 0.0) / static_cast<double>(S);
    if (S > 1) {
      double ss = 0.0;
      for (double v : row.per_seed) ss += (v - row.mean) * (v - row.mean);
      row.std_dev = std::sqrt(ss / static_cast<double>(S - 1));
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.mean < b.mean; });
  return rows;
}

}  // namespace e2tc
