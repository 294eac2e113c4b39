#include "vecaf/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vecaf {

void check_matrix(const Matrix& m, const std::string& what, bool require_positive_norm) {
  if (!m.allFinite()) throw ValidationError(what + ": contains non-finite values");
  if (require_positive_norm) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (m.row(r).squaredNorm() <= 0.0)
        throw ValidationError(what + ": row " + std::to_string(r) + " has zero norm");
    }
  }
}

EmbeddingSet::EmbeddingSet(Matrix vectors, std::vector<std::uint32_t> labels,
                           std::uint32_t class_count)
    : vectors_(std::move(vectors)), labels_(std::move(labels)), class_count_(class_count) {
  if (vectors_.rows() == 0 || vectors_.cols() == 0)
    throw ValidationError("embedding set: empty matrix");
  if (class_count_ < 2) throw ValidationError("embedding set: class_count must be >= 2");
  if (labels_.size() != static_cast<std::size_t>(vectors_.rows()))
    throw ValidationError("embedding set: " + std::to_string(labels_.size()) + " labels for " +
                          std::to_string(vectors_.rows()) + " vectors");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] >= class_count_)
      throw ValidationError("embedding set: label " + std::to_string(labels_[i]) + " at row " +
                            std::to_string(i) + " outside [0, " + std::to_string(class_count_) +
                            ")");
  }
  check_matrix(vectors_, "embedding set");
}

EmbeddingSet EmbeddingSet::with_vectors(Matrix vectors) const {
  if (vectors.rows() != vectors_.rows())
    throw ValidationError("embedding set: replacement row count mismatch");
  return EmbeddingSet(std::move(vectors), labels_, class_count_);
}

EmbeddingSet EmbeddingSet::subset(std::span<const Index> rows) const {
  Matrix m(rows.size(), vectors_.cols());
  std::vector<std::uint32_t> labels(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= count())
      throw ValidationError("subset row " + std::to_string(rows[r]) + " out of range for " +
                            std::to_string(count()) + " samples");
    m.row(r) = vectors_.row(rows[r]);
    labels[r] = labels_[rows[r]];
  }
  return EmbeddingSet(std::move(m), std::move(labels), class_count_);
}

CaptionEmbeddings::CaptionEmbeddings(Matrix vectors, std::optional<Vector> prompt)
    : vectors_(std::move(vectors)), prompt_(std::move(prompt)) {
  if (vectors_.rows() == 0 || vectors_.cols() == 0)
    throw ValidationError("caption embeddings: empty matrix");
  check_matrix(vectors_, "caption embeddings");
  if (prompt_) {
    if (prompt_->size() != vectors_.cols())
      throw ValidationError("caption embeddings: prompt dim " + std::to_string(prompt_->size()) +
                            " != caption dim " + std::to_string(vectors_.cols()));
    if (!prompt_->allFinite() || prompt_->squaredNorm() <= 0.0)
      throw ValidationError("caption embeddings: prompt must be finite with positive norm");
  }
}

void CaptionEmbeddings::check_aligned(const EmbeddingSet& pool) const {
  if (dim() != pool.dim())
    throw ValidationError("caption dim " + std::to_string(dim()) + " != embedding dim " +
                          std::to_string(pool.dim()));
  if (count() != pool.count())
    throw ValidationError("caption count " + std::to_string(count()) + " != embedding count " +
                          std::to_string(pool.count()));
}

LossProfile::LossProfile(std::vector<double> losses) : losses_(std::move(losses)) {
  if (losses_.empty()) throw ValidationError("loss profile: empty");
  for (std::size_t i = 0; i < losses_.size(); ++i) {
    if (!std::isfinite(losses_[i]) || losses_[i] < 0.0)
      throw ValidationError("loss profile: loss " + std::to_string(i) +
                            " must be finite and nonnegative");
  }
  normalizer_ = std::accumulate(losses_.begin(), losses_.end(), 0.0);
}

LossProfile LossProfile::uniform(Index count, double value) {
  return LossProfile(std::vector<double>(count, value));
}

std::vector<double> LossProfile::probabilities() const {
  std::vector<double> p(losses_.size());
  if (normalizer_ <= 0.0) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(p.size()));
    return p;
  }
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = losses_[i] / normalizer_;
  return p;
}

void SelectionModel::validate() const {
  if (centroids.rows() == 0) throw ValidationError("selection model: budget must be >= 1");
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw ValidationError("selection model: lambda must be finite and >= 0");
  check_matrix(centroids, "selection model centroids");
}

void OdsConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("ods: learning_rate must be > 0");
  if (max_iterations <= 0) throw ConfigError("ods: max_iterations must be > 0");
  if (convergence_window <= 0) throw ConfigError("ods: convergence_window must be > 0");
  if (!(convergence_tol > 0.0)) throw ConfigError("ods: convergence_tol must be > 0");
  if (ensemble_size < 1) throw ConfigError("ods: ensemble_size must be >= 1");
  if (!(ridge > 0.0)) throw ConfigError("ods: ridge must be > 0");
  if (!std::isfinite(lambda) || lambda < 0.0) throw ConfigError("ods: lambda must be >= 0");
}

std::vector<Index> Rng::sample_without_replacement(Index n, Index k) {
  if (k > n) throw BudgetError("cannot draw " + std::to_string(k) + " of " + std::to_string(n));
  // Partial Fisher-Yates.
  std::vector<Index> pool(n);
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < k; ++i) {
    Index j = i + below(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

void Rng::shuffle(std::vector<Index>& values) {
  for (Index i = values.size(); i > 1; --i) std::swap(values[i - 1], values[below(i)]);
}

double cosine_similarity(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) throw DomainError("cosine_similarity: dimension mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw DomainError("cosine_similarity: zero-norm input");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

Matrix normalized_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double n = m.row(r).norm();
    if (!(n > 0.0)) throw DomainError("row " + std::to_string(r) + " has zero norm");
    out.row(r) = m.row(r) / n;
  }
  return out;
}

std::vector<double> softmax(std::span<const double> values) {
  std::vector<double> out(values.size());
  if (values.empty()) return out;
  const double top = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::exp(values[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace vecaf
