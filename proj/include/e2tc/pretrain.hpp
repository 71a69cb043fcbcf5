#pragma once

// Pre-training of theta0 on a regularized mini-batch loss:
//   MSE + (c1/B^2) sum_{i!=j} |cos(phi_i, phi_j)| + (c2/(p B)) sum ||psi(phi_k) - I_k||^2
//       + c3 (||w||^2 + ||theta||^2 + ||theta_tilde||^2)
// and spectrum analysis of the resulting feature covariance.

#include <span>
#include <string>
#include <vector>

#include "e2tc/bandit_env.hpp"
#include "e2tc/feature_net.hpp"

namespace e2tc {

struct PretrainConfig {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PretrainItem {
  Vector x;
  double r = 0.0;
  Vector recon_target;  // may be empty when c2 == 0
};

struct BatchLoss {
  double loss = 0.0;
  double mse = 0.0;
  double orthogonality = 0.0;
  double reconstruction = 0.0;
  double weight_decay = 0.0;
  Vector grad_w;
  Vector grad_theta;
  Vector grad_theta_tilde;
};

/// Loss and full analytic gradients. `theta_tilde` may be empty when c2 == 0.
BatchLoss batch_loss(const Architecture& arch, const DecoderArchitecture& decoder, const Vector& w,
                     const Vector& theta, const Vector& theta_tilde, std::span<const PretrainItem> batch,
                     const PretrainConfig& config);

struct PretrainResult {
  Vector theta;
  Vector w;
  Vector theta_tilde;
  std::vector<double> epoch_loss;
  double initial_mse = 0.0;
  double final_mse = 0.0;
};

/// Plain mini-batch gradient descent, reshuffled every epoch from the seed.
PretrainResult pretrain(std::span<const PretrainItem> dataset, const Architecture& arch,
                        const DecoderArchitecture& decoder, const PretrainConfig& config);

/// Mean squared error of w^T phi_theta(x) against r over a dataset.
double dataset_mse(const Architecture& arch, const Vector& w, const Vector& theta,
                   std::span<const PretrainItem> dataset);

/// Every (item, action) pair of a classification dataset as a reward-model example:
/// x = block embedding, r = 1 for the true class, recon target = the raw item.
std::vector<PretrainItem> classification_pretrain_items(const ClassificationData& data, std::size_t num_actions);

/// Rows of a tabular dataset; the reconstruction target is the feature row itself.
std::vector<PretrainItem> regression_pretrain_items(const TabularDataset& data);

struct SpectrumReport {
  Vector eigenvalues;              // descending
  std::vector<double> bin_edges;   // log10 scale, 21 edges
  std::vector<std::size_t> bin_counts;
  std::size_t positive_count = 0;
  std::size_t k90 = 0;
  std::vector<std::string> warnings;
};

/// Eigenvalues counted as positive exceed 1e-12 times the largest one.
SpectrumReport spectrum_report(const SymMatrix& cov);

}  // namespace e2tc
