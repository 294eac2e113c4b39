#include "vecaf/probe.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

namespace vecaf::probe {
namespace {

void check_model(const ProbeModel& model, Index dim) {
  if (model.dim() != dim)
    throw ValidationError("probe: model dim " + std::to_string(model.dim()) + " != data dim " +
                          std::to_string(dim));
  if (model.bias.size() != model.weights.rows())
    throw ValidationError("probe: bias size does not match class count");
}

// Log-probabilities of every class for one embedding.
Vector log_softmax_logits(const ProbeModel& model, const Eigen::Ref<const Vector>& e) {
  Vector logits = model.weights * e + model.bias;
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  return logits.array() - lse;
}

}  // namespace

ProbeModel ProbeModel::zeros(std::uint32_t class_count, Index dim) {
  return ProbeModel{Matrix::Zero(class_count, dim), Vector::Zero(class_count)};
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0, 1)");
}

double forward_loss(const ProbeModel& model, const Eigen::Ref<const Vector>& e, std::uint32_t y) {
  check_model(model, static_cast<Index>(e.size()));
  if (y >= model.class_count()) throw ValidationError("probe: label out of range");
  return std::max(0.0, -log_softmax_logits(model, e)(y));
}

LossProfile pool_losses(const ProbeModel& model, const EmbeddingSet& pool) {
  check_model(model, pool.dim());
  std::vector<double> losses(pool.count());
  for (Index i = 0; i < pool.count(); ++i)
    losses[i] = forward_loss(model, pool.vectors().row(i).transpose(), pool.labels()[i]);
  return LossProfile(std::move(losses));
}

Gradient batch_gradient(const ProbeModel& model, const EmbeddingSet& data,
                        std::span<const Index> rows) {
  check_model(model, data.dim());
  Gradient g{Matrix::Zero(model.weights.rows(), model.weights.cols()),
             Vector::Zero(model.bias.size()), 0.0};
  if (rows.empty()) return g;
  for (Index r : rows) {
    const Vector e = data.vectors().row(r).transpose();
    const Vector logp = log_softmax_logits(model, e);
    Vector residual = logp.array().exp();  // p - onehot(y)
    const auto y = data.labels()[r];
    residual(y) -= 1.0;
    g.loss += -logp(y);
    g.weights.noalias() += residual * e.transpose();
    g.bias += residual;
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  g.weights *= inv;
  g.bias *= inv;
  g.loss *= inv;
  return g;
}

TrainResult train(ProbeModel model, const EmbeddingSet& subset, Index batches,
                  const TrainConfig& config, Rng& rng, OptimizerState* state,
                  const std::function<void(Index, double, const ProbeModel&)>& on_batch) {
  config.validate();
  check_model(model, subset.dim());
  if (subset.count() == 0) throw ValidationError("train: empty subset");

  OptimizerState local;
  OptimizerState& opt = state ? *state : local;
  if (opt.weight_velocity.rows() != model.weights.rows() ||
      opt.weight_velocity.cols() != model.weights.cols()) {
    opt.weight_velocity = Matrix::Zero(model.weights.rows(), model.weights.cols());
    opt.bias_velocity = Vector::Zero(model.bias.size());
  }

  std::vector<Index> epoch(subset.count());
  std::iota(epoch.begin(), epoch.end(), Index{0});
  std::size_t cursor = epoch.size();  // forces a shuffle before the first batch

  TrainResult result{std::move(model), {}};
  result.batch_losses.reserve(batches);
  std::vector<Index> batch;
  for (Index b = 0; b < batches; ++b) {
    batch.clear();
    while (batch.size() < config.batch_size) {
      if (cursor == epoch.size()) {
        rng.shuffle(epoch);
        cursor = 0;
      }
      batch.push_back(epoch[cursor++]);
    }
    const Gradient g = batch_gradient(result.model, subset, batch);
    opt.weight_velocity = config.momentum * opt.weight_velocity + g.weights;
    opt.bias_velocity = config.momentum * opt.bias_velocity + g.bias;
    result.model.weights -= config.learning_rate * opt.weight_velocity;
    result.model.bias -= config.learning_rate * opt.bias_velocity;
    result.batch_losses.push_back(g.loss);
    if (on_batch) on_batch(b + 1, g.loss, result.model);
  }
  return result;
}

std::uint32_t predict(const ProbeModel& model, const Eigen::Ref<const Vector>& e) {
  const Vector logits = model.weights * e + model.bias;
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < logits.size(); ++c)
    if (logits(c) > logits(best)) best = c;
  return static_cast<std::uint32_t>(best);
}

double evaluate(const ProbeModel& model, const EmbeddingSet& eval) {
  check_model(model, eval.dim());
  Index correct = 0;
  for (Index i = 0; i < eval.count(); ++i)
    if (predict(model, eval.vectors().row(i).transpose()) == eval.labels()[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(eval.count());
}

void write_checkpoint(const ProbeModel& model, const std::filesystem::path& path) {
  if (!model.weights.allFinite() || !model.bias.allFinite())
    throw ValidationError("probe: non-finite parameters");
  std::vector<unsigned char> out{'V', 'C', 'P', '1'};
  auto put = [&out](std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>((v >> (8 * b)) & 0xff));
  };
  put(model.class_count());
  put(static_cast<std::uint32_t>(model.dim()));
  for (Eigen::Index c = 0; c < model.weights.rows(); ++c)
    for (Eigen::Index j = 0; j < model.weights.cols(); ++j)
      put(std::bit_cast<std::uint32_t>(static_cast<float>(model.weights(c, j))));
  for (Eigen::Index c = 0; c < model.bias.size(); ++c)
    put(std::bit_cast<std::uint32_t>(static_cast<float>(model.bias(c))));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("write failure on " + path.string());
}

ProbeModel read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  const std::string ctx = path.string() + ": ";
  if (bytes.size() < 12) throw LengthError(ctx + "file shorter than VCP1 header");
  if (std::memcmp(bytes.data(), "VCP1", 4) != 0) throw FormatError(ctx + "bad magic, expected VCP1");
  auto get = [&bytes](std::size_t at) {
    return static_cast<std::uint32_t>(bytes[at]) | (static_cast<std::uint32_t>(bytes[at + 1]) << 8) |
           (static_cast<std::uint32_t>(bytes[at + 2]) << 16) |
           (static_cast<std::uint32_t>(bytes[at + 3]) << 24);
  };
  const std::uint64_t classes = get(4);
  const std::uint64_t dim = get(8);
  if (bytes.size() != 12 + 4 * (classes * dim + classes))
    throw LengthError(ctx + "payload size does not match header");
  ProbeModel model = ProbeModel::zeros(static_cast<std::uint32_t>(classes), dim);
  std::size_t at = 12;
  for (std::uint64_t c = 0; c < classes; ++c)
    for (std::uint64_t j = 0; j < dim; ++j, at += 4) model.weights(c, j) = std::bit_cast<float>(get(at));
  for (std::uint64_t c = 0; c < classes; ++c, at += 4) model.bias(c) = std::bit_cast<float>(get(at));
  if (!model.weights.allFinite() || !model.bias.allFinite())
    throw ValidationError(ctx + "non-finite parameters");
  return model;
}

}  // namespace vecaf::probe
