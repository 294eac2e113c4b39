#pragma once
// Linear softmax probe over frozen embeddings. It supplies the per-sample
// losses that drive selection and is the model finetuned on each selected
// subset.

#include "vecaf/core.hpp"

#include <filesystem>
#include <functional>
#include <vector>

namespace vecaf::probe {

struct ProbeModel {
  Matrix weights;  // C x d
  Vector bias;     // C

  static ProbeModel zeros(std::uint32_t class_count, Index dim);
  std::uint32_t class_count() const { return static_cast<std::uint32_t>(weights.rows()); }
  Index dim() const { return static_cast<Index>(weights.cols()); }
};

struct TrainConfig {
  Index batch_size = 64;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
};

// -log softmax(W e + b)[y]
double forward_loss(const ProbeModel& model, const Eigen::Ref<const Vector>& e, std::uint32_t y);

// Per-sample losses over the pool; Z = 0 yields uniform p_L via LossProfile.
LossProfile pool_losses(const ProbeModel& model, const EmbeddingSet& pool);

struct Gradient {
  Matrix weights;
  Vector bias;
  double loss = 0.0;  // mean loss of the batch
};

// Mean cross-entropy gradient over the given rows of `data`.
Gradient batch_gradient(const ProbeModel& model, const EmbeddingSet& data,
                        std::span<const Index> rows);

// Momentum buffers carried across train() calls so finetuning continues
// smoothly from loop to loop.
struct OptimizerState {
  Matrix weight_velocity;
  Vector bias_velocity;
};

struct TrainResult {
  ProbeModel model;
  std::vector<double> batch_losses;
};

// Exactly `batches` SGD-with-momentum steps. Batches are consecutive slices
// of an epoch stream over the subset, reshuffled at each epoch boundary.
// `on_batch(step, batch_loss, model)` fires after every step (1-based).
TrainResult train(ProbeModel model, const EmbeddingSet& subset, Index batches,
                  const TrainConfig& config, Rng& rng, OptimizerState* state = nullptr,
                  const std::function<void(Index, double, const ProbeModel&)>& on_batch = {});

// Argmax accuracy, ties to the lowest class index.
double evaluate(const ProbeModel& model, const EmbeddingSet& eval);
std::uint32_t predict(const ProbeModel& model, const Eigen::Ref<const Vector>& e);

// "VCP1" | u32 C | u32 d | C*d float32 weights | C float32 bias
void write_checkpoint(const ProbeModel& model, const std::filesystem::path& path);
ProbeModel read_checkpoint(const std::filesystem::path& path);

}  // namespace vecaf::probe
