#include "e2tc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

namespace e2tc {

namespace {

std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string cell_text(const Cell& cell) {
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&cell)) return format_double(*d);
  const std::string& s = std::get<std::string>(cell);
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return master ^ splitmix_finalize(index * 0x9E3779B97F4A7C15ULL);
}

std::size_t worker_count(std::size_t requested) {
  if (const char* env = std::getenv("E2TC_WORKERS")) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

RegretSeries track_regret(const RunTrace& trace) {
  RegretSeries out;
  out.instant.reserve(trace.steps.size());
  out.cumulative.reserve(trace.steps.size());
  double total = 0.0;
  for (const StepRecord& s : trace.steps) {
    if (!(s.instant_regret >= 0.0)) throw EnvError("track_regret: negative or missing instant regret at t=" +
                                                   std::to_string(s.t));
    total += s.instant_regret;
    out.instant.push_back(s.instant_regret);
    out.cumulative.push_back(total);
  }
  return out;
}

AggregateSeries aggregate_runs(std::span<const std::vector<double>> series,
                               std::span<const std::pair<double, double>> t2_points) {
  if (series.size() < 2) throw std::invalid_argument("aggregate_runs: need at least 2 series");
  const std::size_t n = series[0].size();
  for (const auto& s : series)
    if (s.size() != n) throw std::invalid_argument("aggregate_runs: series lengths differ");
  const double m = static_cast<double>(series.size());
  AggregateSeries out;
  out.mean.assign(n, 0.0);
  out.std_dev.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double sum = 0.0;
    for (const auto& s : series) sum += s[t];
    const double mean = sum / m;
    double ss = 0.0;
    for (const auto& s : series) ss += (s[t] - mean) * (s[t] - mean);
    out.mean[t] = mean;
    out.std_dev[t] = std::sqrt(ss / (m - 1.0));
  }
  if (!t2_points.empty()) out.exponent_fit = fit_power_curve(t2_points);
  return out;
}

double risk_to_regret_bound(double epsilon, std::size_t T, std::size_t T1, std::size_t T2, std::size_t K,
                            double delta, double B_w, double B_phi) {
  if (T1 + T2 > T) throw std::invalid_argument("risk_to_regret_bound: T1 + T2 exceeds T");
  if (epsilon < 0.0) throw std::invalid_argument("risk_to_regret_bound: epsilon must be >= 0");
  const double scale = 2.0 * B_w * B_phi;
  return scale * static_cast<double>(T) * delta + scale * static_cast<double>(T1 + T2) +
         static_cast<double>(K) * static_cast<double>(T - T1 - T2) * std::sqrt(epsilon);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_string(const Table& table) {
  std::string out;
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    if (j) out += ',';
    out += cell_text(Cell{table.columns[j]});
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += cell_text(row[j]);
    }
    out += '\n';
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit_csv(const Table& table, const std::filesystem::path& path) { write_text_file(path, csv_string(table)); }

std::size_t CsvData::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("csv: missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvData parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      field.clear();
      record.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw DataError("csv: unterminated quoted field");
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  CsvData out;
  if (records.empty()) return out;
  out.header = std::move(records.front());
  out.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
  return out;
}

CsvData read_csv(const std::filesystem::path& path) { return parse_csv(read_text_file(path)); }

Table trace_table(const RunTrace& trace) {
  Table table;
  table.columns = {"t", "stage", "action", "reward", "instant_regret", "cum_regret"};
  double total = 0.0;
  for (const StepRecord& s : trace.steps) {
    total += s.instant_regret;
    table.rows.push_back({static_cast<std::int64_t>(s.t), stage_name(s.stage), static_cast<std::int64_t>(s.action),
                          s.reward, s.instant_regret, total});
  }
  return table;
}

Table spectrum_table(const SpectrumReport& report) {
  Table table;
  table.columns = {"rank", "eigenvalue"};
  for (Eigen::Index j = 0; j < report.eigenvalues.size(); ++j)
    table.rows.push_back({static_cast<std::int64_t>(j + 1), report.eigenvalues(j)});
  return table;
}

Table histogram_table(const SpectrumReport& report) {
  Table table;
  table.columns = {"bin", "log10_lo", "log10_hi", "count"};
  for (std::size_t b = 0; b < report.bin_counts.size(); ++b) {
    const double lo = report.bin_edges.empty() ? 0.0 : report.bin_edges[b];
    const double hi = report.bin_edges.empty() ? 0.0 : report.bin_edges[b + 1];
    table.rows.push_back({static_cast<std::int64_t>(b), lo, hi, static_cast<std::int64_t>(report.bin_counts[b])});
  }
  return table;
}

Table diag_table(std::span<const DiagRow> rows) {
  Table table;
  table.columns = {"quantity", "value", "feasible"};
  for (const DiagRow& r : rows)
    table.rows.push_back({r.quantity, r.value, r.feasible ? std::string(*r.feasible ? "true" : "false") : ""});
  return table;
}

std::string render_svg_lines(std::span<const SvgSeries> series, const SvgOptions& opt) {
  const auto tx = [&](double v) { return opt.log_x ? std::log10(v) : v; };
  const auto ty = [&](double v) { return opt.log_y ? std::log10(v) : v; };
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  const auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!opt.log_x || x > 0.0) && (!opt.log_y || y > 0.0);
  };
  for (const SvgSeries& s : series) {
    if (s.x.size() != s.y.size() || (!s.band.empty() && s.band.size() != s.y.size()))
      throw std::invalid_argument("render_svg_lines: series '" + s.label + "' has mismatched lengths");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double lo = s.band.empty() ? s.y[i] : s.y[i] - s.band[i];
      const double hi = s.band.empty() ? s.y[i] : s.y[i] + s.band[i];
      for (double y : {lo, hi}) {
        if (!usable(s.x[i], y)) continue;
        xmin = std::min(xmin, tx(s.x[i]));
        xmax = std::max(xmax, tx(s.x[i]));
        ymin = std::min(ymin, ty(y));
        ymax = std::max(ymax, ty(y));
      }
    }
  }
  if (!(xmin <= xmax)) xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;

  const double left = 70, right = 20, top = 40, bottom = 50;
  const double pw = opt.width - left - right, ph = opt.height - top - bottom;
  const auto px = [&](double x) { return left + (tx(x) - xmin) / (xmax - xmin) * pw; };
  const auto py = [&](double y) { return top + ph - (ty(y) - ymin) / (ymax - ymin) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
      << "\" viewBox=\"0 0 " << opt.width << ' ' << opt.height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opt.title.empty())
    svg << "<text x=\"" << fixed2(opt.width / 2.0) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << xml_escape(opt.title) << "</text>\n";
  svg << "<line x1=\"" << fixed2(left) << "\" y1=\"" << fixed2(top + ph) << "\" x2=\"" << fixed2(left + pw)
      << "\" y2=\"" << fixed2(top + ph) << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << fixed2(left) << "\" y1=\"" << fixed2(top) << "\" x2=\"" << fixed2(left) << "\" y2=\""
      << fixed2(top + ph) << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = xmin + (xmax - xmin) * k / 4.0;
    const double fy = ymin + (ymax - ymin) * k / 4.0;
    const double sx = left + pw * k / 4.0;
    const double sy = top + ph - ph * k / 4.0;
    svg << "<text x=\"" << fixed2(sx) << "\" y=\"" << fixed2(top + ph + 18) << "\" text-anchor=\"middle\" font-size=\"11\">"
        << tick_label(opt.log_x ? std::pow(10.0, fx) : fx) << "</text>\n";
    svg << "<text x=\"" << fixed2(left - 6) << "\" y=\"" << fixed2(sy + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
        << tick_label(opt.log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
  }
  svg << "<text x=\"" << fixed2(left + pw / 2) << "\" y=\"" << fixed2(opt.height - 10.0)
      << "\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(opt.x_label) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << fixed2(top + ph / 2) << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
      << fixed2(top + ph / 2) << ")\">" << xml_escape(opt.y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const SvgSeries& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    if (!s.band.empty()) {
      std::string upper, lower;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (usable(s.x[i], s.y[i] + s.band[i]))
          upper += fixed2(px(s.x[i])) + "," + fixed2(py(s.y[i] + s.band[i])) + " ";
      }
      for (std::size_t i = s.x.size(); i-- > 0;) {
        if (usable(s.x[i], s.y[i] - s.band[i]))
          lower += fixed2(px(s.x[i])) + "," + fixed2(py(s.y[i] - s.band[i])) + " ";
      }
      svg << "<polygon points=\"" << upper << lower << "\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    std::string points;
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (usable(s.x[i], s.y[i])) points += fixed2(px(s.x[i])) + "," + fixed2(py(s.y[i])) + " ";
    svg << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    const double ly = top + 14.0 + 16.0 * static_cast<double>(k);
    svg << "<line x1=\"" << fixed2(left + 10) << "\" y1=\"" << fixed2(ly - 4) << "\" x2=\"" << fixed2(left + 30)
        << "\" y2=\"" << fixed2(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << fixed2(left + 36) << "\" y=\"" << fixed2(ly) << "\" font-size=\"12\">" << xml_escape(s.label)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_svg_lines(std::span<const SvgSeries> series, const std::filesystem::path& path, const SvgOptions& options) {
  write_text_file(path, render_svg_lines(series, options));
}

RealizableEnv make_synthetic_env(const SyntheticSpec& spec) {
  spec.arch.validate();
  if (spec.num_actions < 1) throw std::invalid_argument("synthetic env: need at least one action");
  if (!(spec.radius_factor >= 1.0)) throw std::invalid_argument("synthetic env: radius factor must be >= 1");
  const InitialParams star = init_params(spec.arch, spec.seed);
  const double B_w = spec.radius_factor * std::max(star.w.norm(), 1e-12);
  const double B_theta = spec.radius_factor * std::max(star.theta.norm(), 1e-12);
  const double sd = spec.context_scale;
  if (spec.support_size == 0)
    return RealizableEnv(spec.arch, star.theta, star.w, spec.noise_bound, spec.num_actions,
                         gaussian_generator(spec.arch.input_dim, spec.num_actions, sd), B_w, B_theta);
  Rng rng(spec.seed ^ 0xC0FFEEULL);
  std::normal_distribution<double> normal(0.0, sd);
  std::vector<Vector> points(spec.support_size, Vector(static_cast<Eigen::Index>(spec.arch.input_dim)));
  for (Vector& p : points)
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = normal(rng);
  return RealizableEnv(spec.arch, star.theta, star.w, spec.noise_bound, spec.num_actions,
                       FiniteSupport::uniform(std::move(points)), B_w, B_theta);
}

}  // namespace e2tc
