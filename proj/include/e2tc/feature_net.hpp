#pragma once

// Representation network phi_theta: x -> GELU(W2 * GELU(W1 x + b1)).
// theta is the flat concatenation [W1 (row-major, d_h x d_in), b1 (d_h), W2 (row-major, d x d_h)].
// The feature layer carries no bias.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>

#include "e2tc/linalg.hpp"

namespace e2tc {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Architecture {
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 1;
  std::size_t feature_dim = 1;

  std::size_t param_count() const {
    return hidden_dim * input_dim + hidden_dim + feature_dim * hidden_dim;
  }
  void validate() const;
  bool operator==(const Architecture&) const = default;
};

/// Mirror decoder psi: phi -> V2 * GELU(V1 phi + c1) + c2.
/// Flat layout [V1 (h x d), c1 (h), V2 (p x h), c2 (p)].
struct DecoderArchitecture {
  std::size_t feature_dim = 1;
  std::size_t hidden_dim = 1;
  std::size_t output_dim = 1;

  std::size_t param_count() const {
    return hidden_dim * feature_dim + hidden_dim + output_dim * hidden_dim + output_dim;
  }
  void validate() const;
};

/// Joint weights (w, theta) with their norm-ball radii.
struct ParameterState {
  Vector w;
  Vector theta;
  double B_w = 1.0;
  double B_theta = 1.0;
};

struct RegularityEstimate {
  double B_phi = 0.0;
  double L_phi = 0.0;
  double B_eta = 0.0;
  double B_w = 0.0;
  double D_w = 0.0;
  double D_theta = 0.0;
  double B_r = 0.0;
};

/// Fills D_w, D_theta and B_r from B_phi, L_phi, B_w, B_eta.
RegularityEstimate derive_regularity(double B_phi, double L_phi, double B_w, double B_eta);

double gelu(double x);
double gelu_prime(double x);

Vector forward(const Architecture& arch, const Vector& theta, const Vector& x);

/// J_theta(x)^T u: gradient of u^T phi_theta(x) with respect to theta.
Vector jacobian_t_apply(const Architecture& arch, const Vector& theta, const Vector& x, const Vector& u);

/// J_theta(x) v: directional derivative of phi_theta(x) along v in parameter space.
Vector jacobian_apply(const Architecture& arch, const Vector& theta, const Vector& x, const Vector& v);

Vector project_ball(const Vector& v, double radius);

struct InitialParams {
  Vector theta;
  Vector w;
};

/// Kernel entries N(0, 1/fan_in), biases zero, w entries N(0, 1/d).
InitialParams init_params(const Architecture& arch, std::uint64_t seed);

RegularityEstimate estimate_regularity(const Architecture& arch, const Vector& theta,
                                       std::span<const Vector> sample_points, double B_w,
                                       double B_eta, std::uint64_t seed = 0);

Vector decoder_forward(const DecoderArchitecture& arch, const Vector& params, const Vector& phi);

struct DecoderGradient {
  Vector params;  // d(u^T psi)/d(params)
  Vector phi;     // d(u^T psi)/d(phi)
};

/// Reverse-mode product of the decoder Jacobians with an upstream vector u.
DecoderGradient decoder_backward(const DecoderArchitecture& arch, const Vector& params,
                                 const Vector& phi, const Vector& u);

DecoderArchitecture mirror_decoder(const Architecture& arch, std::size_t output_dim);
Vector init_decoder_params(const DecoderArchitecture& arch, std::uint64_t seed);

// Flat binary parameter files: "E2TCPARM", u32 version, u32 length, then
// `length` little-endian doubles. The architecture goes to `<path>.arch`.
inline constexpr std::uint32_t kParamFileVersion = 1;

void save_params(const std::filesystem::path& path, const Vector& params, const Architecture& arch);
Vector load_params(const std::filesystem::path& path);
Architecture load_architecture(const std::filesystem::path& path);

}  // namespace e2tc
