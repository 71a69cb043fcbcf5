#include "e2tc/feature_net.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

namespace e2tc {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMajor>;
using MatMap = Eigen::Map<RowMajor>;
using ConstVecMap = Eigen::Map<const Vector>;
using VecMap = Eigen::Map<Vector>;

struct NetView {
  ConstMatMap w1;
  ConstVecMap b1;
  ConstMatMap w2;
};

struct NetGradView {
  MatMap w1;
  VecMap b1;
  MatMap w2;
};

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

void check_theta(const Architecture& arch, const Vector& theta) {
  if (static_cast<std::size_t>(theta.size()) != arch.param_count()) {
    std::ostringstream msg;
    msg << "theta has length " << theta.size() << ", architecture expects " << arch.param_count();
    throw DimensionError(msg.str());
  }
}

void check_input(const Architecture& arch, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != arch.input_dim) {
    std::ostringstream msg;
    msg << "input has dim " << x.size() << ", architecture expects " << arch.input_dim;
    throw DimensionError(msg.str());
  }
}

NetView view(const Architecture& arch, const Vector& theta) {
  const double* p = theta.data();
  const std::size_t n1 = arch.hidden_dim * arch.input_dim;
  return NetView{ConstMatMap(p, idx(arch.hidden_dim), idx(arch.input_dim)),
                 ConstVecMap(p + n1, idx(arch.hidden_dim)),
                 ConstMatMap(p + n1 + arch.hidden_dim, idx(arch.feature_dim), idx(arch.hidden_dim))};
}

NetGradView grad_view(const Architecture& arch, Vector& g) {
  double* p = g.data();
  const std::size_t n1 = arch.hidden_dim * arch.input_dim;
  return NetGradView{MatMap(p, idx(arch.hidden_dim), idx(arch.input_dim)),
                     VecMap(p + n1, idx(arch.hidden_dim)),
                     MatMap(p + n1 + arch.hidden_dim, idx(arch.feature_dim), idx(arch.hidden_dim))};
}

struct Activations {
  Vector z1, h, z2, phi;
};

Activations run_forward(const Architecture& arch, const Vector& theta, const Vector& x) {
  check_theta(arch, theta);
  check_input(arch, x);
  const NetView net = view(arch, theta);
  Activations a;
  a.z1 = net.w1 * x + net.b1;
  a.h = a.z1.unaryExpr([](double v) { return gelu(v); });
  a.z2 = net.w2 * a.h;
  a.phi = a.z2.unaryExpr([](double v) { return gelu(v); });
  return a;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(b.data(), 4);
}

std::uint32_t read_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

std::filesystem::path arch_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p += ".arch";
  return p;
}

}  // namespace

void Architecture::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || feature_dim < 1)
    throw DimensionError("architecture dims must all be >= 1");
}

void DecoderArchitecture::validate() const {
  if (feature_dim < 1 || hidden_dim < 1 || output_dim < 1)
    throw DimensionError("decoder dims must all be >= 1");
}

RegularityEstimate derive_regularity(double B_phi, double L_phi, double B_w, double B_eta) {
  RegularityEstimate r;
  r.B_phi = B_phi;
  r.L_phi = L_phi;
  r.B_w = B_w;
  r.B_eta = B_eta;
  const double scale = 4.0 * B_w * B_phi + 2.0 * B_eta;
  r.D_w = scale * B_phi;
  r.D_theta = scale * L_phi * B_w;
  r.B_r = B_w * B_phi + B_eta;
  return r;
}

double gelu(double x) { return 0.5 * x * std::erfc(-x / std::numbers::sqrt2); }

double gelu_prime(double x) {
  const double cdf = 0.5 * std::erfc(-x / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Vector forward(const Architecture& arch, const Vector& theta, const Vector& x) {
  return run_forward(arch, theta, x).phi;
}

Vector jacobian_t_apply(const Architecture& arch, const Vector& theta, const Vector& x, const Vector& u) {
  if (static_cast<std::size_t>(u.size()) != arch.feature_dim)
    throw DimensionError("jacobian_t_apply: upstream vector must have feature dim");
  const Activations a = run_forward(arch, theta, x);
  const NetView net = view(arch, theta);

  const Vector g2 = u.cwiseProduct(a.z2.unaryExpr([](double v) { return gelu_prime(v); }));
  const Vector g1 = (net.w2.transpose() * g2).cwiseProduct(a.z1.unaryExpr([](double v) { return gelu_prime(v); }));

  Vector grad(theta.size());
  NetGradView g = grad_view(arch, grad);
  g.w1 = g1 * x.transpose();
  g.b1 = g1;
  g.w2 = g2 * a.h.transpose();
  return grad;
}

Vector jacobian_apply(const Architecture& arch, const Vector& theta, const Vector& x, const Vector& v) {
  check_theta(arch, v);
  const Activations a = run_forward(arch, theta, x);
  const NetView net = view(arch, theta);
  const NetView dir = view(arch, v);

  const Vector dz1 = dir.w1 * x + dir.b1;
  const Vector dh = dz1.cwiseProduct(a.z1.unaryExpr([](double t) { return gelu_prime(t); }));
  const Vector dz2 = dir.w2 * a.h + net.w2 * dh;
  return dz2.cwiseProduct(a.z2.unaryExpr([](double t) { return gelu_prime(t); }));
}

Vector project_ball(const Vector& v, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("project_ball: radius must be positive");
  const double n = v.norm();
  if (n <= radius) return v;
  return (radius / n) * v;
}

InitialParams init_params(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  InitialParams out;
  out.theta = Vector::Zero(idx(arch.param_count()));
  NetGradView g = grad_view(arch, out.theta);

  std::normal_distribution<double> first(0.0, 1.0 / std::sqrt(static_cast<double>(arch.input_dim)));
  for (Eigen::Index i = 0; i < g.w1.rows(); ++i)
    for (Eigen::Index j = 0; j < g.w1.cols(); ++j) g.w1(i, j) = first(rng);
  std::normal_distribution<double> second(0.0, 1.0 / std::sqrt(static_cast<double>(arch.hidden_dim)));
  for (Eigen::Index i = 0; i < g.w2.rows(); ++i)
    for (Eigen::Index j = 0; j < g.w2.cols(); ++j) g.w2(i, j) = second(rng);

  std::normal_distribution<double> last(0.0, 1.0 / std::sqrt(static_cast<double>(arch.feature_dim)));
  out.w.resize(idx(arch.feature_dim));
  for (Eigen::Index i = 0; i < out.w.size(); ++i) out.w(i) = last(rng);
  return out;
}

RegularityEstimate estimate_regularity(const Architecture& arch, const Vector& theta,
                                       std::span<const Vector> sample_points, double B_w,
                                       double B_eta, std::uint64_t seed) {
  if (sample_points.empty()) throw std::invalid_argument("estimate_regularity: empty sample");
  constexpr double kHeadroom = 1.1;
  constexpr int kPowerIterations = 50;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector start(theta.size());
  for (Eigen::Index i = 0; i < start.size(); ++i) start(i) = normal(rng);
  start.normalize();

  double max_phi = 0.0;
  double max_jac = 0.0;
  for (const Vector& x : sample_points) {
    max_phi = std::max(max_phi, forward(arch, theta, x).norm());
    Vector v = start;
    double sigma = 0.0;
    for (int it = 0; it < kPowerIterations; ++it) {
      const Vector jv = jacobian_apply(arch, theta, x, v);
      Vector next = jacobian_t_apply(arch, theta, x, jv);
      const double n = next.norm();
      if (n == 0.0) {
        sigma = 0.0;
        break;
      }
      v = next / n;
      sigma = jacobian_apply(arch, theta, x, v).norm();
    }
    max_jac = std::max(max_jac, sigma);
  }
  return derive_regularity(kHeadroom * max_phi, kHeadroom * max_jac, B_w, B_eta);
}

DecoderArchitecture mirror_decoder(const Architecture& arch, std::size_t output_dim) {
  return DecoderArchitecture{arch.feature_dim, arch.hidden_dim, output_dim};
}

namespace {

struct DecoderView {
  ConstMatMap v1;
  ConstVecMap c1;
  ConstMatMap v2;
  ConstVecMap c2;
};

DecoderView decoder_view(const DecoderArchitecture& arch, const Vector& params) {
  if (static_cast<std::size_t>(params.size()) != arch.param_count())
    throw DimensionError("decoder params length does not match decoder architecture");
  const double* p = params.data();
  const std::size_t n1 = arch.hidden_dim * arch.feature_dim;
  const std::size_t n2 = n1 + arch.hidden_dim;
  const std::size_t n3 = n2 + arch.output_dim * arch.hidden_dim;
  return DecoderView{ConstMatMap(p, idx(arch.hidden_dim), idx(arch.feature_dim)),
                     ConstVecMap(p + n1, idx(arch.hidden_dim)),
                     ConstMatMap(p + n2, idx(arch.output_dim), idx(arch.hidden_dim)),
                     ConstVecMap(p + n3, idx(arch.output_dim))};
}

}  // namespace

Vector decoder_forward(const DecoderArchitecture& arch, const Vector& params, const Vector& phi) {
  if (static_cast<std::size_t>(phi.size()) != arch.feature_dim)
    throw DimensionError("decoder input must have feature dim");
  const DecoderView d = decoder_view(arch, params);
  const Vector hidden = (d.v1 * phi + d.c1).unaryExpr([](double v) { return gelu(v); });
  return d.v2 * hidden + d.c2;
}

DecoderGradient decoder_backward(const DecoderArchitecture& arch, const Vector& params,
                                 const Vector& phi, const Vector& u) {
  if (static_cast<std::size_t>(phi.size()) != arch.feature_dim ||
      static_cast<std::size_t>(u.size()) != arch.output_dim)
    throw DimensionError("decoder_backward: dimension mismatch");
  const DecoderView d = decoder_view(arch, params);
  const Vector pre = d.v1 * phi + d.c1;
  const Vector hidden = pre.unaryExpr([](double v) { return gelu(v); });
  const Vector gh = (d.v2.transpose() * u).cwiseProduct(pre.unaryExpr([](double v) { return gelu_prime(v); }));

  DecoderGradient out;
  out.params.resize(params.size());
  double* p = out.params.data();
  const std::size_t n1 = arch.hidden_dim * arch.feature_dim;
  const std::size_t n2 = n1 + arch.hidden_dim;
  const std::size_t n3 = n2 + arch.output_dim * arch.hidden_dim;
  MatMap(p, idx(arch.hidden_dim), idx(arch.feature_dim)) = gh * phi.transpose();
  VecMap(p + n1, idx(arch.hidden_dim)) = gh;
  MatMap(p + n2, idx(arch.output_dim), idx(arch.hidden_dim)) = u * hidden.transpose();
  VecMap(p + n3, idx(arch.output_dim)) = u;
  out.phi = d.v1.transpose() * gh;
  return out;
}

Vector init_decoder_params(const DecoderArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  Vector params = Vector::Zero(idx(arch.param_count()));
  double* p = params.data();
  const std::size_t n1 = arch.hidden_dim * arch.feature_dim;
  const std::size_t n2 = n1 + arch.hidden_dim;
  std::normal_distribution<double> first(0.0, 1.0 / std::sqrt(static_cast<double>(arch.feature_dim)));
  for (std::size_t i = 0; i < n1; ++i) p[i] = first(rng);
  std::normal_distribution<double> second(0.0, 1.0 / std::sqrt(static_cast<double>(arch.hidden_dim)));
  for (std::size_t i = 0; i < arch.output_dim * arch.hidden_dim; ++i) p[n2 + i] = second(rng);
  return params;
}

void save_params(const std::filesystem::path& path, const Vector& params, const Architecture& arch) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open parameter file for writing: " + path.string());
  out.write("E2TCPARM", 8);
  write_u32(out, kParamFileVersion);
  write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(params(i));
    std::array<char, 8> b{};
    for (int k = 0; k < 8; ++k) b[static_cast<std::size_t>(k)] = static_cast<char>((bits >> (8 * k)) & 0xFFu);
    out.write(b.data(), 8);
  }
  if (!out) throw std::runtime_error("failed writing parameter file: " + path.string());

  std::ofstream side(arch_path(path), std::ios::trunc);
  if (!side) throw std::runtime_error("cannot open architecture file: " + arch_path(path).string());
  side << "input_dim = " << arch.input_dim << "\n"
       << "hidden_dim = " << arch.hidden_dim << "\n"
       << "feature_dim = " << arch.feature_dim << "\n";
}

Vector load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open parameter file: " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), 8);
  if (!in || std::string(magic.data(), 8) != "E2TCPARM")
    throw std::runtime_error("bad parameter file magic: " + path.string());
  const std::uint32_t version = read_u32(in);
  if (version != kParamFileVersion)
    throw std::runtime_error("unsupported parameter file version " + std::to_string(version));
  const std::uint32_t length = read_u32(in);
  Vector params(static_cast<Eigen::Index>(length));
  for (std::uint32_t i = 0; i < length; ++i) {
    std::array<unsigned char, 8> b{};
    in.read(reinterpret_cast<char*>(b.data()), 8);
    if (!in) throw std::runtime_error("truncated parameter file: " + path.string());
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(k)]) << (8 * k);
    params(static_cast<Eigen::Index>(i)) = std::bit_cast<double>(bits);
  }
  return params;
}

Architecture load_architecture(const std::filesystem::path& path) {
  std::ifstream in(arch_path(path));
  if (!in) throw std::runtime_error("cannot open architecture file: " + arch_path(path).string());
  std::map<std::string, std::size_t> values;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    values[key] = std::stoul(line.substr(eq + 1));
  }
  Architecture arch;
  try {
    arch.input_dim = values.at("input_dim");
    arch.hidden_dim = values.at("hidden_dim");
    arch.feature_dim = values.at("feature_dim");
  } catch (const std::out_of_range&) {
    throw std::runtime_error("architecture file is missing a dimension: " + arch_path(path).string());
  }
  arch.validate();
  return arch;
}

}  // namespace e2tc
