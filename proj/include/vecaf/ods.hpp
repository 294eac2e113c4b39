#pragma once
// Objective-aware data selection.
//
// K centroids are fitted to the pool by minimizing
//
//   f(theta) = - sum_i L_i cos(e_i, theta_{c_i})
//              + lambda * sum_k log sum_{j != k} exp(cos(theta_k, theta_j))
//
// where c_i is the centroid most cosine-similar to e_i. The first term pulls
// centroids toward high-loss regions, the second pushes centroids apart.
// Initial centroids are drawn from p_L (probability proportional to loss), so
// with uniform losses the draw is uniform. Assignments are held fixed inside
// each gradient step and recomputed every iteration. An ensemble of independently initialized fits is collapsed into
// one model by a clamped diagonal-covariance correction, and each centroid
// then nominates its most similar not-yet-taken sample.

#include "vecaf/core.hpp"

#include <vector>

namespace vecaf::ods {

struct Assignment {
  std::vector<Index> nearest_centroid;
  std::vector<double> similarity;
};

struct OdsTrace {
  std::vector<double> objective;
  int iterations = 0;
  bool converged = false;
};

struct EnsembleStats {
  Matrix mean;
  Matrix variance;
  std::vector<SelectionModel> members;  // member 1 first, others aligned to it
};

struct EnsembleResult {
  SelectionModel model;  // debiased
  EnsembleStats stats;
  std::vector<OdsTrace> traces;
};

// K distinct pool rows, drawn uniformly without replacement.
SelectionModel init_centroids(const EmbeddingSet& pool, Index budget, double lambda, Rng& rng);

// K distinct pool rows drawn sequentially with probability proportional to
// loss among the rows not yet drawn; zero-loss rows are only used once every
// positive-loss row is taken. Uniform when all losses are equal.
SelectionModel init_centroids_weighted(const EmbeddingSet& pool, const LossProfile& losses,
                                       Index budget, double lambda, Rng& rng);

// Ties go to the lowest centroid index.
Assignment assign(const EmbeddingSet& pool, const SelectionModel& model);

// The assignment fixes c_i only; cosines are taken against `model`.
double objective(const EmbeddingSet& pool, const LossProfile& losses, const SelectionModel& model,
                 const Assignment& assignment);

// Diversity term alone (0 when K == 1).
double diversity_term(const SelectionModel& model);

// Exact gradient of objective() with respect to the centroid entries,
// holding the assignment fixed.
Matrix gradient(const EmbeddingSet& pool, const LossProfile& losses, const SelectionModel& model,
                const Assignment& assignment);

struct OdsResult {
  SelectionModel model;
  OdsTrace trace;
};

// Adam (or fixed-step descent) from a seeded random init. Returns the
// lowest-objective iterate, so the result never scores worse than the init.
OdsResult optimize(const EmbeddingSet& pool, const LossProfile& losses, Index budget,
                   const OdsConfig& config, Rng& rng);

// Same, from a given starting model.
OdsResult optimize_from(const EmbeddingSet& pool, const LossProfile& losses,
                        SelectionModel start, const OdsConfig& config);

// Reorders the rows of `member` so row k best matches row k of `reference`
// (greedy, highest cosine pair first).
SelectionModel align_to(const SelectionModel& reference, const SelectionModel& member);

EnsembleStats ensemble_stats(const std::vector<SelectionModel>& members);

// theta* = theta_1 - gamma (theta_1 - mu) per coordinate, with
// gamma = min(1, 1 / (var + ridge)). A single member is returned unchanged.
SelectionModel debias(const std::vector<SelectionModel>& members, double ridge);

// config.ensemble_size independent fits (run concurrently), then debias.
EnsembleResult optimize_ensemble(const EmbeddingSet& pool, const LossProfile& losses,
                                 Index budget, const OdsConfig& config, Rng& rng);

// For each centroid in index order, the most similar untaken sample.
std::vector<Index> select(const EmbeddingSet& pool, const SelectionModel& model);

// p_S(i): softmax over the pool of each sample's own-centroid similarity.
std::vector<double> selection_probability(const EmbeddingSet& pool, const SelectionModel& model);

// Mean cosine over distinct centroid pairs (1 when K == 1).
double mean_pairwise_cosine(const SelectionModel& model);

}  // namespace vecaf::ods
