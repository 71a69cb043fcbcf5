#pragma once

// Regret accounting, multi-seed aggregation, bound evaluation and artifact output
// (CSV tables, SVG line plots), plus the synthetic environment factory shared by
// the CLI and the experiments.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "e2tc/algorithm.hpp"
#include "e2tc/pretrain.hpp"
#include "e2tc/table.hpp"
#include "e2tc/tuning.hpp"

namespace e2tc {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seed of run i: master XOR splitmix64-finalizer(i * 0x9E3779B97F4A7C15).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// E2TC_WORKERS when set and positive, else `requested` (0 means hardware concurrency).
std::size_t worker_count(std::size_t requested);

struct RegretSeries {
  std::vector<double> instant;
  std::vector<double> cumulative;
};

RegretSeries track_regret(const RunTrace& trace);

struct AggregateSeries {
  std::vector<double> mean;
  std::vector<double> std_dev;  // sample std (n - 1)
  std::optional<PowerCurve> exponent_fit;
};

/// Pointwise mean and sample std of >= 2 equal-length series; when (T2, suboptimality)
/// pairs are supplied their power-curve fit is attached.
AggregateSeries aggregate_runs(std::span<const std::vector<double>> series,
                               std::span<const std::pair<double, double>> t2_points = {});

/// 2 B_w B_phi T delta + 2 B_w B_phi (T1 + T2) + K (T - T1 - T2) sqrt(eps)
double risk_to_regret_bound(double epsilon, std::size_t T, std::size_t T1, std::size_t T2, std::size_t K,
                            double delta, double B_w, double B_phi);

/// 17 significant digits, '.' decimal separator.
std::string format_double(double v);
std::string csv_string(const Table& table);
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);
void emit_csv(const Table& table, const std::filesystem::path& path);

struct CsvData {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

CsvData parse_csv(const std::string& text);
CsvData read_csv(const std::filesystem::path& path);

/// Columns t,stage,action,reward,instant_regret,cum_regret.
Table trace_table(const RunTrace& trace);
/// Columns rank,eigenvalue.
Table spectrum_table(const SpectrumReport& report);
/// Columns bin,log10_lo,log10_hi,count.
Table histogram_table(const SpectrumReport& report);

struct DiagRow {
  std::string quantity;
  double value = 0.0;
  std::optional<bool> feasible;
};

/// Columns quantity,value,feasible (feasible empty when not applicable).
Table diag_table(std::span<const DiagRow> rows);

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band;  // +- band around y; empty for none
};

struct SvgOptions {
  std::string title;
  std::string x_label = "t";
  std::string y_label = "cumulative regret";
  bool log_x = false;
  bool log_y = false;
  int width = 720;
  int height = 480;
};

std::string render_svg_lines(std::span<const SvgSeries> series, const SvgOptions& options);
void emit_svg_lines(std::span<const SvgSeries> series, const std::filesystem::path& path, const SvgOptions& options);

struct SyntheticSpec {
  Architecture arch{8, 16, 8};
  std::size_t num_actions = 3;
  double noise_bound = 0.1;
  std::size_t support_size = 0;  // 0: Gaussian contexts, else finite support of this many points
  double context_scale = 1.0;
  double radius_factor = 2.0;  // B_w, B_theta as multiples of ||w*||, ||theta*||
  std::uint64_t seed = 0;
};

/// theta*, w* from the network initializer at `seed`; contexts Gaussian with the given scale.
RealizableEnv make_synthetic_env(const SyntheticSpec& spec);

}  // namespace e2tc
