#include "e2tc/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace e2tc {

namespace {

constexpr double kNormGuard = 1e-12;
constexpr std::size_t kHistogramBins = 20;

}  // namespace

void PretrainConfig::validate() const {
  if (c1 < 0.0 || c2 < 0.0 || c3 < 0.0) throw std::invalid_argument("pretrain: regularization weights must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("pretrain: batch size must be >= 1");
  if (learning_rate < 0.0) throw std::invalid_argument("pretrain: learning rate must be >= 0");
}

BatchLoss batch_loss(const Architecture& arch, const DecoderArchitecture& decoder, const Vector& w,
                     const Vector& theta, const Vector& theta_tilde, std::span<const PretrainItem> batch,
                     const PretrainConfig& config) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  if (static_cast<std::size_t>(w.size()) != arch.feature_dim) throw DimensionError("batch_loss: w has wrong dim");
  const bool reconstruct = config.c2 > 0.0;
  if (reconstruct && static_cast<std::size_t>(theta_tilde.size()) != decoder.param_count())
    throw DimensionError("batch_loss: decoder parameters do not match decoder architecture");

  const std::size_t n = batch.size();
  const double B = static_cast<double>(n);
  std::vector<Vector> phi(n);
  for (std::size_t k = 0; k < n; ++k) phi[k] = forward(arch, theta, batch[k].x);

  BatchLoss out;
  out.grad_w = Vector::Zero(w.size());
  out.grad_theta = Vector::Zero(theta.size());
  out.grad_theta_tilde = Vector::Zero(theta_tilde.size());
  std::vector<Vector> grad_phi(n, Vector::Zero(w.size()));

  for (std::size_t k = 0; k < n; ++k) {
    const double residual = w.dot(phi[k]) - batch[k].r;
    out.mse += residual * residual / B;
    out.grad_w += (2.0 / B) * residual * phi[k];
    grad_phi[k] += (2.0 / B) * residual * w;
  }

  if (config.c1 > 0.0 && n > 1) {
    std::vector<double> norms(n);
    for (std::size_t k = 0; k < n; ++k) norms[k] = phi[k].norm();
    const double scale = config.c1 / (B * B);
    for (std::size_t i = 0; i < n; ++i) {
      if (norms[i] <= kNormGuard) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (norms[j] <= kNormGuard) continue;
        const double cosine = phi[i].dot(phi[j]) / (norms[i] * norms[j]);
        // Each unordered pair appears twice in the sum over i != j.
        out.orthogonality += 2.0 * scale * std::abs(cosine);
        const double sign = cosine > 0.0 ? 1.0 : (cosine < 0.0 ? -1.0 : 0.0);
        if (sign == 0.0) continue;
        grad_phi[i] += 2.0 * scale * sign *
                       (phi[j] / (norms[i] * norms[j]) - cosine * phi[i] / (norms[i] * norms[i]));
        grad_phi[j] += 2.0 * scale * sign *
                       (phi[i] / (norms[i] * norms[j]) - cosine * phi[j] / (norms[j] * norms[j]));
      }
    }
  }

  if (reconstruct) {
    const double p = static_cast<double>(decoder.output_dim);
    const double scale = config.c2 / (p * B);
    for (std::size_t k = 0; k < n; ++k) {
      if (static_cast<std::size_t>(batch[k].recon_target.size()) != decoder.output_dim)
        throw DimensionError("batch_loss: reconstruction target has wrong dim");
      const Vector err = decoder_forward(decoder, theta_tilde, phi[k]) - batch[k].recon_target;
      out.reconstruction += scale * err.squaredNorm();
      const DecoderGradient g = decoder_backward(decoder, theta_tilde, phi[k], 2.0 * scale * err);
      out.grad_theta_tilde += g.params;
      grad_phi[k] += g.phi;
    }
  }

  for (std::size_t k = 0; k < n; ++k) out.grad_theta += jacobian_t_apply(arch, theta, batch[k].x, grad_phi[k]);

  if (config.c3 > 0.0) {
    out.weight_decay = config.c3 * (w.squaredNorm() + theta.squaredNorm() + theta_tilde.squaredNorm());
    out.grad_w += 2.0 * config.c3 * w;
    out.grad_theta += 2.0 * config.c3 * theta;
    out.grad_theta_tilde += 2.0 * config.c3 * theta_tilde;
  }

  out.loss = out.mse + out.orthogonality + out.reconstruction + out.weight_decay;
  return out;
}

double dataset_mse(const Architecture& arch, const Vector& w, const Vector& theta,
                   std::span<const PretrainItem> dataset) {
  if (dataset.empty()) return 0.0;
  double total = 0.0;
  for (const PretrainItem& item : dataset) {
    const double residual = w.dot(forward(arch, theta, item.x)) - item.r;
    total += residual * residual;
  }
  return total / static_cast<double>(dataset.size());
}

PretrainResult pretrain(std::span<const PretrainItem> dataset, const Architecture& arch,
                        const DecoderArchitecture& decoder, const PretrainConfig& config) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("pretrain: empty dataset");
  Rng rng(config.seed);
  const InitialParams init = init_params(arch, config.seed);
  PretrainResult out;
  out.theta = init.theta;
  out.w = init.w;
  if (config.c2 > 0.0 || config.c3 > 0.0) out.theta_tilde = init_decoder_params(decoder, config.seed + 1);
  out.initial_mse = dataset_mse(arch, out.w, out.theta, dataset);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<PretrainItem> batch;
  batch.reserve(config.batch_size);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(dataset[order[i]]);
      const BatchLoss l = batch_loss(arch, decoder, out.w, out.theta, out.theta_tilde, batch, config);
      out.w -= config.learning_rate * l.grad_w;
      out.theta -= config.learning_rate * l.grad_theta;
      if (out.theta_tilde.size() > 0) out.theta_tilde -= config.learning_rate * l.grad_theta_tilde;
      epoch_loss += l.loss;
      ++batches;
    }
    out.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  out.final_mse = dataset_mse(arch, out.w, out.theta, dataset);
  return out;
}

std::vector<PretrainItem> classification_pretrain_items(const ClassificationData& data, std::size_t num_actions) {
  std::vector<PretrainItem> items;
  items.reserve(data.items.size() * num_actions);
  for (std::size_t i = 0; i < data.items.size(); ++i) {
    const Context ctx = classification_context(data.items[i], num_actions);
    for (std::size_t a = 0; a < num_actions; ++a)
      items.push_back(PretrainItem{ctx.actions[a], static_cast<int>(a) == data.labels[i] ? 1.0 : 0.0, data.items[i]});
  }
  return items;
}

std::vector<PretrainItem> regression_pretrain_items(const TabularDataset& data) {
  std::vector<PretrainItem> items;
  items.reserve(data.rows());
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    Vector x = data.features.row(i).transpose();
    items.push_back(PretrainItem{x, data.targets(i), x});
  }
  return items;
}

SpectrumReport spectrum_report(const SymMatrix& cov) {
  SpectrumReport rep;
  rep.eigenvalues = sym_eig(cov).eigenvalues;
  const Eigen::Index d = rep.eigenvalues.size();
  const double top = std::max(rep.eigenvalues(0), 0.0);

  double trace = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) trace += std::max(rep.eigenvalues(j), 0.0);
  if (!(top > 0.0) || !(trace > 0.0)) {
    rep.k90 = 0;
    rep.warnings.emplace_back("covariance is zero; k90 set to 0");
    rep.bin_counts.assign(kHistogramBins, 0);
    return rep;
  }

  double cumulative = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    cumulative += std::max(rep.eigenvalues(j), 0.0);
    if (cumulative >= 0.9 * trace * (1.0 - 1e-12)) {
      rep.k90 = static_cast<std::size_t>(j + 1);
      break;
    }
  }

  std::vector<double> logs;
  for (Eigen::Index j = 0; j < d; ++j)
    if (rep.eigenvalues(j) > 1e-12 * top) logs.push_back(std::log10(rep.eigenvalues(j)));
  rep.positive_count = logs.size();
  const double lo = *std::min_element(logs.begin(), logs.end());
  const double hi = *std::max_element(logs.begin(), logs.end());
  const double width = (hi - lo) / static_cast<double>(kHistogramBins);
  rep.bin_edges.resize(kHistogramBins + 1);
  for (std::size_t b = 0; b <= kHistogramBins; ++b) rep.bin_edges[b] = lo + width * static_cast<double>(b);
  rep.bin_counts.assign(kHistogramBins, 0);
  for (double v : logs) {
    std::size_t b = 0;
    if (width > 0.0) b = std::min(kHistogramBins - 1, static_cast<std::size_t>((v - lo) / width));
    ++rep.bin_counts[b];
  }
  return rep;
}

}  // namespace e2tc
