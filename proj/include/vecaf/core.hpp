#pragma once
// Shared domain types, errors, seeded randomness and the two vector kernels
// (cosine similarity, softmax) used by every other module.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vecaf {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = std::size_t;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct LengthError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct BudgetError : Error {
  using Error::Error;
};
struct OptimizationError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

// Candidate pool: N embeddings (rows) with integer class labels.
class EmbeddingSet {
 public:
  EmbeddingSet(Matrix vectors, std::vector<std::uint32_t> labels, std::uint32_t class_count);

  Index count() const { return static_cast<Index>(vectors_.rows()); }
  Index dim() const { return static_cast<Index>(vectors_.cols()); }
  std::uint32_t class_count() const { return class_count_; }
  const Matrix& vectors() const { return vectors_; }
  const std::vector<std::uint32_t>& labels() const { return labels_; }

  // Same labels, different (validated) vectors.
  EmbeddingSet with_vectors(Matrix vectors) const;
  EmbeddingSet subset(std::span<const Index> rows) const;

 private:
  Matrix vectors_;
  std::vector<std::uint32_t> labels_;
  std::uint32_t class_count_;
};

// Text embeddings aligned row-wise with an EmbeddingSet, plus an optional
// target-domain prompt vector.
class CaptionEmbeddings {
 public:
  explicit CaptionEmbeddings(Matrix vectors, std::optional<Vector> prompt = std::nullopt);

  Index count() const { return static_cast<Index>(vectors_.rows()); }
  Index dim() const { return static_cast<Index>(vectors_.cols()); }
  const Matrix& vectors() const { return vectors_; }
  const std::optional<Vector>& prompt() const { return prompt_; }

  // Throws ValidationError unless row count and dim match the pool.
  void check_aligned(const EmbeddingSet& pool) const;

 private:
  Matrix vectors_;
  std::optional<Vector> prompt_;
};

// Per-sample nonnegative losses and their normalizer Z = sum(L).
class LossProfile {
 public:
  explicit LossProfile(std::vector<double> losses);
  static LossProfile uniform(Index count, double value = 1.0);

  Index count() const { return losses_.size(); }
  const std::vector<double>& losses() const { return losses_; }
  double normalizer() const { return normalizer_; }
  // p_L(i) = L_i / Z; uniform when Z == 0.
  std::vector<double> probabilities() const;

 private:
  std::vector<double> losses_;
  double normalizer_ = 0.0;
};

// K centroids in embedding space plus the diversity tradeoff lambda.
struct SelectionModel {
  Matrix centroids;
  double lambda = 1.0;

  Index budget() const { return static_cast<Index>(centroids.rows()); }
  Index dim() const { return static_cast<Index>(centroids.cols()); }
  void validate() const;
};

enum class OdsOptimizer { Adam, GradientDescent };

struct OdsConfig {
  double learning_rate = 0.001;
  int max_iterations = 300;
  int convergence_window = 10;
  double convergence_tol = 1e-6;
  int ensemble_size = 5;
  double ridge = 1e-3;
  double lambda = 1.0;
  // GradientDescent is a fixed-step mode used to check monotone descent.
  OdsOptimizer optimizer = OdsOptimizer::Adam;
  std::uint64_t seed = 0;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

// Seeded stream; fork() derives independent child streams so parallel work
// never shares a generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const { return seed_; }
  Rng fork(std::uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream + 0x51ed27))); }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  Index below(Index n) { return std::uniform_int_distribution<Index>(0, n - 1)(engine_); }

  // k distinct indices from [0, n), in draw order.
  std::vector<Index> sample_without_replacement(Index n, Index k);
  void shuffle(std::vector<Index>& values);

  std::mt19937_64& engine() { return engine_; }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

// a.b / (|a| |b|). Throws DomainError on a zero-norm input.
double cosine_similarity(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

// Row-wise unit vectors; throws DomainError if any row has zero norm.
Matrix normalized_rows(const Matrix& m);

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> values);

// Throws ValidationError if any entry is NaN or infinite, or (when
// require_positive_norm) any row has zero norm.
void check_matrix(const Matrix& m, const std::string& what, bool require_positive_norm = true);

}  // namespace vecaf
