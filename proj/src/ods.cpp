#include "vecaf/ods.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

namespace vecaf::ods {
namespace {

void check_shapes(const EmbeddingSet& pool, const SelectionModel& model) {
  if (model.dim() != pool.dim())
    throw ValidationError("ods: centroid dim " + std::to_string(model.dim()) + " != pool dim " +
                          std::to_string(pool.dim()));
  if (model.budget() == 0) throw ValidationError("ods: empty selection model");
}

void check_losses(const EmbeddingSet& pool, const LossProfile& losses) {
  if (losses.count() != pool.count())
    throw ValidationError("ods: " + std::to_string(losses.count()) + " losses for " +
                          std::to_string(pool.count()) + " samples");
}

void check_assignment(const EmbeddingSet& pool, const SelectionModel& model,
                      const Assignment& a) {
  if (a.nearest_centroid.size() != pool.count() || a.similarity.size() != pool.count())
    throw ValidationError("ods: assignment size does not match pool");
  for (Index c : a.nearest_centroid)
    if (c >= model.budget()) throw ValidationError("ods: assignment index out of range");
}

Assignment assign_normalized(const Matrix& unit_pool, const SelectionModel& model) {
  const Matrix unit_centroids = normalized_rows(model.centroids);
  const Matrix sims = unit_pool * unit_centroids.transpose();  // N x K
  Assignment a;
  a.nearest_centroid.resize(unit_pool.rows());
  a.similarity.resize(unit_pool.rows());
  for (Eigen::Index i = 0; i < sims.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < sims.cols(); ++k)
      if (sims(i, k) > sims(i, best)) best = k;
    a.nearest_centroid[i] = static_cast<Index>(best);
    a.similarity[i] = std::clamp(sims(i, best), -1.0, 1.0);
  }
  return a;
}

// Keeps c_i but recomputes cos(e_i, theta_{c_i}) against `model`, so an
// assignment taken from another iterate still evaluates consistently.
Assignment with_current_similarity(const Matrix& unit_pool, const SelectionModel& model,
                                   Assignment a) {
  const Matrix unit_centroids = normalized_rows(model.centroids);
  for (Eigen::Index i = 0; i < unit_pool.rows(); ++i)
    a.similarity[i] = std::clamp(
        unit_pool.row(i).dot(unit_centroids.row(static_cast<Eigen::Index>(a.nearest_centroid[i]))),
        -1.0, 1.0);
  return a;
}

double loss_term(const LossProfile& losses, const Assignment& a) {
  double total = 0.0;
  for (Index i = 0; i < a.similarity.size(); ++i) total += losses.losses()[i] * a.similarity[i];
  return -total;
}

// Row-wise log-sum-exp over j != k of the centroid cosine matrix, plus the
// matching softmax weights.
struct DiversityParts {
  Matrix cosines;
  Matrix weights;
  double value = 0.0;
};

DiversityParts diversity_parts(const Matrix& unit_centroids) {
  const Eigen::Index k_count = unit_centroids.rows();
  DiversityParts parts;
  parts.cosines = unit_centroids * unit_centroids.transpose();
  parts.weights = Matrix::Zero(k_count, k_count);
  if (k_count < 2) return parts;
  for (Eigen::Index k = 0; k < k_count; ++k) {
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < k_count; ++j)
      if (j != k) top = std::max(top, parts.cosines(k, j));
    double sum = 0.0;
    for (Eigen::Index j = 0; j < k_count; ++j) {
      if (j == k) continue;
      parts.weights(k, j) = std::exp(parts.cosines(k, j) - top);
      sum += parts.weights(k, j);
    }
    parts.weights.row(k) /= sum;
    parts.value += top + std::log(sum);
  }
  return parts;
}

Matrix gradient_normalized(const Matrix& unit_pool, const LossProfile& losses,
                           const SelectionModel& model, const Assignment& a) {
  const Eigen::Index k_count = model.centroids.rows();
  const Eigen::Index dim = model.centroids.cols();
  Vector norms(k_count);
  Matrix unit(k_count, dim);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    norms(k) = model.centroids.row(k).norm();
    if (!(norms(k) > 0.0)) throw DomainError("ods: centroid " + std::to_string(k) + " has zero norm");
    unit.row(k) = model.centroids.row(k) / norms(k);
  }

  // d cos(e, theta) / d theta = (e_hat - cos * theta_hat) / |theta|
  Matrix weighted_sum = Matrix::Zero(k_count, dim);
  Vector weighted_cos = Vector::Zero(k_count);
  for (Eigen::Index i = 0; i < unit_pool.rows(); ++i) {
    const double l = losses.losses()[i];
    if (l == 0.0) continue;
    const auto k = static_cast<Eigen::Index>(a.nearest_centroid[i]);
    weighted_sum.row(k) += l * unit_pool.row(i);
    weighted_cos(k) += l * a.similarity[i];
  }
  Matrix grad(k_count, dim);
  for (Eigen::Index k = 0; k < k_count; ++k)
    grad.row(k) = -(weighted_sum.row(k) - weighted_cos(k) * unit.row(k)) / norms(k);

  if (model.lambda > 0.0 && k_count > 1) {
    const DiversityParts parts = diversity_parts(unit);
    for (Eigen::Index m = 0; m < k_count; ++m) {
      Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(dim);
      for (Eigen::Index j = 0; j < k_count; ++j) {
        if (j == m) continue;
        const double w = parts.weights(m, j) + parts.weights(j, m);
        g += w * (unit.row(j) - parts.cosines(m, j) * unit.row(m));
      }
      grad.row(m) += model.lambda * g / norms(m);
    }
  }
  return grad;
}

double objective_normalized(const LossProfile& losses, const SelectionModel& model,
                            const Assignment& a) {
  return loss_term(losses, a) + diversity_term(model);
}

}  // namespace

SelectionModel init_centroids(const EmbeddingSet& pool, Index budget, double lambda, Rng& rng) {
  if (budget == 0) throw BudgetError("ods: budget must be >= 1");
  if (budget > pool.count())
    throw BudgetError("ods: budget " + std::to_string(budget) + " exceeds pool size " +
                      std::to_string(pool.count()));
  const auto rows = rng.sample_without_replacement(pool.count(), budget);
  SelectionModel model;
  model.lambda = lambda;
  model.centroids.resize(budget, pool.dim());
  for (Index k = 0; k < budget; ++k) model.centroids.row(k) = pool.vectors().row(rows[k]);
  return model;
}

SelectionModel init_centroids_weighted(const EmbeddingSet& pool, const LossProfile& losses,
                                       Index budget, double lambda, Rng& rng) {
  check_losses(pool, losses);
  const auto& l = losses.losses();
  if (std::all_of(l.begin(), l.end(), [&l](double v) { return v == l.front(); }))
    return init_centroids(pool, budget, lambda, rng);
  if (budget == 0) throw BudgetError("ods: budget must be >= 1");
  if (budget > pool.count())
    throw BudgetError("ods: budget " + std::to_string(budget) + " exceeds pool size " +
                      std::to_string(pool.count()));

  std::vector<double> weight(l.begin(), l.end());
  std::vector<Index> rows;
  rows.reserve(budget);
  double remaining = losses.normalizer();
  while (rows.size() < budget && remaining > 0.0) {
    double target = rng.uniform() * remaining;
    Index pick = pool.count();
    for (Index i = 0; i < weight.size(); ++i) {
      if (weight[i] <= 0.0) continue;
      pick = i;
      target -= weight[i];
      if (target < 0.0) break;
    }
    rows.push_back(pick);
    remaining = 0.0;
    weight[pick] = 0.0;
    for (double w : weight) remaining += w;
  }
  if (rows.size() < budget) {
    std::vector<Index> rest;
    std::vector<bool> used(pool.count(), false);
    for (Index r : rows) used[r] = true;
    for (Index i = 0; i < pool.count(); ++i)
      if (!used[i]) rest.push_back(i);
    for (Index j : rng.sample_without_replacement(rest.size(), budget - rows.size()))
      rows.push_back(rest[j]);
  }

  SelectionModel model;
  model.lambda = lambda;
  model.centroids.resize(budget, pool.dim());
  for (Index k = 0; k < budget; ++k) model.centroids.row(k) = pool.vectors().row(rows[k]);
  return model;
}

Assignment assign(const EmbeddingSet& pool, const SelectionModel& model) {
  check_shapes(pool, model);
  return assign_normalized(normalized_rows(pool.vectors()), model);
}

double diversity_term(const SelectionModel& model) {
  if (model.budget() < 2 || model.lambda == 0.0) return 0.0;
  return model.lambda * diversity_parts(normalized_rows(model.centroids)).value;
}

double objective(const EmbeddingSet& pool, const LossProfile& losses, const SelectionModel& model,
                 const Assignment& assignment) {
  check_shapes(pool, model);
  check_losses(pool, losses);
  check_assignment(pool, model, assignment);
  const Matrix unit_pool = normalized_rows(pool.vectors());
  return objective_normalized(losses, model, with_current_similarity(unit_pool, model, assignment));
}

Matrix gradient(const EmbeddingSet& pool, const LossProfile& losses, const SelectionModel& model,
                const Assignment& assignment) {
  check_shapes(pool, model);
  check_losses(pool, losses);
  check_assignment(pool, model, assignment);
  const Matrix unit_pool = normalized_rows(pool.vectors());
  return gradient_normalized(unit_pool, losses, model,
                             with_current_similarity(unit_pool, model, assignment));
}

OdsResult optimize_from(const EmbeddingSet& pool, const LossProfile& losses,
                        SelectionModel start, const OdsConfig& config) {
  config.validate();
  check_shapes(pool, start);
  check_losses(pool, losses);
  start.validate();

  const Matrix unit_pool = normalized_rows(pool.vectors());
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEpsilon = 1e-8;

  SelectionModel current = std::move(start);
  Matrix first_moment = Matrix::Zero(current.centroids.rows(), current.centroids.cols());
  Matrix second_moment = first_moment;
  double beta1_power = 1.0;
  double beta2_power = 1.0;

  OdsResult result;
  result.model = current;
  double best = std::numeric_limits<double>::infinity();
  const auto window = static_cast<std::size_t>(config.convergence_window);

  for (int it = 0;; ++it) {
    const Assignment a = assign_normalized(unit_pool, current);
    const double f = objective_normalized(losses, current, a);
    if (!std::isfinite(f))
      throw OptimizationError("ods: non-finite objective at iteration " + std::to_string(it));
    result.trace.objective.push_back(f);
    if (f < best) {
      best = f;
      result.model = current;
    }
    const auto& trace = result.trace.objective;
    if (trace.size() > window) {
      const double prev = trace[trace.size() - 1 - window];
      const double rel = std::abs(f - prev) / std::max(std::abs(prev), 1e-12);
      if (rel < config.convergence_tol) {
        result.trace.converged = true;
        break;
      }
    }
    if (it == config.max_iterations) break;

    const Matrix g = gradient_normalized(unit_pool, losses, current, a);
    if (config.optimizer == OdsOptimizer::GradientDescent) {
      current.centroids -= config.learning_rate * g;
    } else {
      beta1_power *= kBeta1;
      beta2_power *= kBeta2;
      first_moment = kBeta1 * first_moment + (1.0 - kBeta1) * g;
      second_moment = kBeta2 * second_moment + (1.0 - kBeta2) * g.cwiseProduct(g);
      const Matrix m_hat = first_moment / (1.0 - beta1_power);
      const Matrix v_hat = second_moment / (1.0 - beta2_power);
      current.centroids.array() -=
          config.learning_rate * m_hat.array() / (v_hat.array().sqrt() + kEpsilon);
    }
    for (Eigen::Index k = 0; k < current.centroids.rows(); ++k)
      if (!(current.centroids.row(k).norm() > 0.0) || !current.centroids.row(k).allFinite())
        throw OptimizationError("ods: centroid " + std::to_string(k) +
                                " degenerated at iteration " + std::to_string(it));
    result.trace.iterations = it + 1;
  }
  return result;
}

OdsResult optimize(const EmbeddingSet& pool, const LossProfile& losses, Index budget,
                   const OdsConfig& config, Rng& rng) {
  config.validate();
  SelectionModel start = init_centroids_weighted(pool, losses, budget, config.lambda, rng);
  return optimize_from(pool, losses, std::move(start), config);
}

SelectionModel align_to(const SelectionModel& reference, const SelectionModel& member) {
  if (reference.budget() != member.budget() || reference.dim() != member.dim())
    throw ValidationError("ods: ensemble members differ in shape");
  const Eigen::Index k_count = reference.centroids.rows();
  const Matrix sims = normalized_rows(reference.centroids) *
                      normalized_rows(member.centroids).transpose();  // ref x member
  std::vector<bool> ref_used(k_count, false);
  std::vector<bool> mem_used(k_count, false);
  SelectionModel aligned = member;
  for (Eigen::Index step = 0; step < k_count; ++step) {
    Eigen::Index best_r = -1;
    Eigen::Index best_m = -1;
    for (Eigen::Index r = 0; r < k_count; ++r) {
      if (ref_used[r]) continue;
      for (Eigen::Index m = 0; m < k_count; ++m) {
        if (mem_used[m]) continue;
        if (best_r < 0 || sims(r, m) > sims(best_r, best_m)) {
          best_r = r;
          best_m = m;
        }
      }
    }
    ref_used[best_r] = true;
    mem_used[best_m] = true;
    aligned.centroids.row(best_r) = member.centroids.row(best_m);
  }
  return aligned;
}

EnsembleStats ensemble_stats(const std::vector<SelectionModel>& members) {
  if (members.empty()) throw ValidationError("ods: empty ensemble");
  const SelectionModel& first = members.front();
  EnsembleStats stats;
  stats.members.push_back(first);
  for (std::size_t e = 1; e < members.size(); ++e) stats.members.push_back(align_to(first, members[e]));

  // Deviations from member 1 keep mu == theta_1 exactly for identical members.
  const double count = static_cast<double>(stats.members.size());
  Matrix mean_dev = Matrix::Zero(first.centroids.rows(), first.centroids.cols());
  for (const auto& m : stats.members) mean_dev += m.centroids - first.centroids;
  mean_dev /= count;
  stats.variance = Matrix::Zero(mean_dev.rows(), mean_dev.cols());
  for (const auto& m : stats.members) {
    const Matrix centered = (m.centroids - first.centroids) - mean_dev;
    stats.variance += centered.cwiseProduct(centered);
  }
  stats.variance /= count;
  stats.mean = first.centroids + mean_dev;
  return stats;
}

SelectionModel debias(const std::vector<SelectionModel>& members, double ridge) {
  if (members.empty()) throw ValidationError("ods: empty ensemble");
  if (!(ridge > 0.0)) throw ConfigError("ods: ridge must be > 0");
  for (const auto& m : members)
    if (m.budget() != members.front().budget() || m.dim() != members.front().dim())
      throw ValidationError("ods: ensemble members differ in shape");
  if (members.size() == 1) return members.front();

  const EnsembleStats stats = ensemble_stats(members);
  SelectionModel out = members.front();
  const Matrix& theta = members.front().centroids;
  for (Eigen::Index k = 0; k < theta.rows(); ++k) {
    for (Eigen::Index j = 0; j < theta.cols(); ++j) {
      const double gamma = std::min(1.0, 1.0 / (stats.variance(k, j) + ridge));
      out.centroids(k, j) = theta(k, j) - gamma * (theta(k, j) - stats.mean(k, j));
    }
  }
  // A centroid whose correction collapsed it to zero falls back to member 1.
  for (Eigen::Index k = 0; k < theta.rows(); ++k)
    if (!(out.centroids.row(k).norm() > 0.0)) out.centroids.row(k) = theta.row(k);
  return out;
}

EnsembleResult optimize_ensemble(const EmbeddingSet& pool, const LossProfile& losses,
                                 Index budget, const OdsConfig& config, Rng& rng) {
  config.validate();
  if (budget > pool.count())
    throw BudgetError("ods: budget " + std::to_string(budget) + " exceeds pool size " +
                      std::to_string(pool.count()));
  std::vector<std::future<OdsResult>> jobs;
  for (int e = 0; e < config.ensemble_size; ++e) {
    Rng member_rng = rng.fork(static_cast<std::uint64_t>(e));
    jobs.push_back(std::async(std::launch::async, [&pool, &losses, budget, &config,
                                                   member_rng]() mutable {
      return optimize(pool, losses, budget, config, member_rng);
    }));
  }
  EnsembleResult result;
  std::vector<SelectionModel> members;
  for (auto& job : jobs) {
    OdsResult r = job.get();
    members.push_back(std::move(r.model));
    result.traces.push_back(std::move(r.trace));
  }
  result.stats = ensemble_stats(members);
  result.model = debias(members, config.ridge);
  return result;
}

std::vector<Index> select(const EmbeddingSet& pool, const SelectionModel& model) {
  check_shapes(pool, model);
  if (model.budget() > pool.count())
    throw BudgetError("ods: budget exceeds pool size");
  const Matrix sims =
      normalized_rows(model.centroids) * normalized_rows(pool.vectors()).transpose();  // K x N
  std::vector<bool> taken(pool.count(), false);
  std::vector<Index> chosen;
  chosen.reserve(model.budget());
  for (Eigen::Index k = 0; k < sims.rows(); ++k) {
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < sims.cols(); ++i) {
      if (taken[i]) continue;
      if (best < 0 || sims(k, i) > sims(k, best)) best = i;
    }
    taken[best] = true;
    chosen.push_back(static_cast<Index>(best));
  }
  return chosen;
}

std::vector<double> selection_probability(const EmbeddingSet& pool, const SelectionModel& model) {
  const Assignment a = assign(pool, model);
  return softmax(a.similarity);
}

double mean_pairwise_cosine(const SelectionModel& model) {
  const Eigen::Index k_count = model.centroids.rows();
  if (k_count < 2) return 1.0;
  const Matrix unit = normalized_rows(model.centroids);
  double total = 0.0;
  for (Eigen::Index a = 0; a < k_count; ++a)
    for (Eigen::Index b = a + 1; b < k_count; ++b) total += unit.row(a).dot(unit.row(b));
  return total / (static_cast<double>(k_count) * static_cast<double>(k_count - 1) / 2.0);
}

}  // namespace vecaf::ods
