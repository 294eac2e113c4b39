#include "vecaf/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vecaf::orchestrator {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Vecaf: return "vecaf";
    case Strategy::Random: return "random";
    case Strategy::TopkLoss: return "topk_loss";
    case Strategy::DiversityOnly: return "diversity_only";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "vecaf") return Strategy::Vecaf;
  if (name == "random") return Strategy::Random;
  if (name == "topk_loss") return Strategy::TopkLoss;
  if (name == "diversity_only") return Strategy::DiversityOnly;
  throw ConfigError("unknown strategy '" + name +
                    "' (expected vecaf, random, topk_loss or diversity_only)");
}

void RunConfig::validate() const {
  if (loops < 1) throw ConfigError("run: loops must be >= 1");
  if (!(selection_ratio > 0.0 && selection_ratio <= 1.0))
    throw ConfigError("run: selection_ratio must be in (0, 1]");
  if (eval_every < 1) throw ConfigError("run: eval_every must be >= 1");
  if (target_accuracy && !(*target_accuracy >= 0.0 && *target_accuracy <= 1.0))
    throw ConfigError("run: target accuracy must be in [0, 1]");
  ods.validate();
  train.validate();
}

Index RunConfig::budget(Index pool_size) const {
  const double raw = selection_ratio * static_cast<double>(pool_size);
  // Guard against ratio*N landing a hair above an integer.
  const double rounded = std::round(raw);
  const double k = std::abs(raw - rounded) < 1e-9 ? rounded : std::ceil(raw);
  if (k < 1.0 || raw < 1.0 - 1e-9) throw BudgetError("budget rounds to zero");
  return std::min<Index>(static_cast<Index>(k), pool_size);
}

std::optional<Index> b2a(const std::vector<EvalPoint>& points, double target) {
  for (const auto& p : points)
    if (p.eval_accuracy >= target) return p.batches;
  return std::nullopt;
}

std::vector<Index> baseline_topk(const LossProfile& losses, Index budget) {
  if (budget > losses.count()) throw BudgetError("topk: budget exceeds pool size");
  std::vector<Index> order(losses.count());
  std::iota(order.begin(), order.end(), Index{0});
  const auto& l = losses.losses();
  std::stable_sort(order.begin(), order.end(), [&l](Index a, Index b) { return l[a] > l[b]; });
  order.resize(budget);
  return order;
}

std::vector<Index> baseline_random(Index pool_size, Index budget, Rng& rng) {
  return rng.sample_without_replacement(pool_size, budget);
}

std::vector<Index> baseline_diversity_only(const EmbeddingSet& pool, Index budget,
                                           const OdsConfig& config, Rng& rng) {
  const auto result = ods::optimize_ensemble(pool, LossProfile::uniform(pool.count()), budget,
                                             config, rng);
  return ods::select(pool, result.model);
}

SelectionOutcome select_indices(const SelectionInputs& in, const RunConfig& config,
                                Index budget, Rng& rng) {
  if (!in.pool) throw ConfigError("select: pool required");
  const EmbeddingSet& pool = *in.pool;
  SelectionOutcome out;
  switch (config.strategy) {
    case Strategy::Random:
      out.indices = baseline_random(pool.count(), budget, rng);
      return out;
    case Strategy::TopkLoss:
      if (!in.losses) throw ConfigError("topk_loss requires a losses source");
      out.indices = baseline_topk(*in.losses, budget);
      return out;
    case Strategy::DiversityOnly:
    case Strategy::Vecaf: {
      const bool vecaf = config.strategy == Strategy::Vecaf;
      if (vecaf && !in.losses) throw ConfigError("vecaf requires a losses source");
      const LossProfile uniform = LossProfile::uniform(pool.count());
      const LossProfile& losses = vecaf ? *in.losses : uniform;

      std::optional<EmbeddingSet> steered;
      if (vecaf && config.prompt_steering) {
        if (!in.captions) throw ConfigError("prompt steering requires caption embeddings");
        in.captions->check_aligned(pool);
        auto cea_out = cea::apply(pool.vectors(), in.captions->vectors(), in.captions->prompt(),
                                  config.cea);
        steered = pool.with_vectors(std::move(cea_out.augmented));
        out.used_cea = true;
      }
      const EmbeddingSet& selection_pool = steered ? *steered : pool;
      auto ens = ods::optimize_ensemble(selection_pool, losses, budget, config.ods, rng);
      out.indices = ods::select(selection_pool, ens.model);
      out.traces = std::move(ens.traces);
      out.model = std::move(ens.model);
      out.used_ods = true;
      return out;
    }
  }
  throw ConfigError("select: unhandled strategy");
}

RunReport run(const EmbeddingSet& pool, const CaptionEmbeddings& captions,
              const EmbeddingSet& eval, const RunConfig& config, const LossProfile* prior_losses) {
  config.validate();
  captions.check_aligned(pool);
  if (eval.dim() != pool.dim()) throw ValidationError("run: eval dim does not match pool dim");
  if (eval.class_count() != pool.class_count())
    throw ValidationError("run: eval class count does not match pool");
  if (prior_losses && prior_losses->count() != pool.count())
    throw ValidationError("run: prior losses do not match pool size");
  if (config.strategy == Strategy::Vecaf) {
    const bool blends = config.cea.prompt_weight > 0.0;
    config.cea.validate(captions.prompt().has_value() || !blends);
  }
  const Index budget = config.budget(pool.count());
  const Index per_loop = config.batches_per_loop();

  RunReport report;
  report.strategy = config.strategy;
  report.seed = config.seed;
  report.target_accuracy = config.target_accuracy;
  report.probe = probe::ProbeModel::zeros(pool.class_count(), pool.dim());

  const Rng root(config.seed);
  Rng train_rng = root.fork(1);
  probe::OptimizerState opt_state;
  Index cumulative = 0;
  double loss_since_eval = 0.0;
  Index batches_since_eval = 0;

  auto record = [&](int loop, const probe::ProbeModel& model) {
    EvalPoint p;
    p.loop = loop;
    p.batches = cumulative;
    p.train_loss = batches_since_eval ? loss_since_eval / static_cast<double>(batches_since_eval)
                                      : 0.0;
    p.eval_accuracy = probe::evaluate(model, eval);
    report.eval_points.push_back(p);
    loss_since_eval = 0.0;
    batches_since_eval = 0;
  };

  for (int loop = 1; loop <= config.loops; ++loop) {
    LoopRecord rec;
    rec.loop = loop;

    std::optional<LossProfile> losses;
    if (config.strategy == Strategy::Vecaf || config.strategy == Strategy::TopkLoss) {
      losses = (loop == 1 && prior_losses) ? *prior_losses : probe::pool_losses(report.probe, pool);
    }
    Rng select_rng = root.fork(100 + static_cast<std::uint64_t>(loop));
    SelectionInputs in{&pool, &captions, losses ? &*losses : nullptr};
    SelectionOutcome sel = select_indices(in, config, budget, select_rng);
    if (sel.used_ods) ++report.ods_calls;
    if (sel.used_cea) ++report.cea_calls;
    rec.selected = sel.indices;
    rec.ods_traces = std::move(sel.traces);

    EmbeddingSet subset = pool.subset(rec.selected);
    if (config.strategy == Strategy::Vecaf && config.use_cea) {
      Matrix text(rec.selected.size(), pool.dim());
      for (std::size_t r = 0; r < rec.selected.size(); ++r)
        text.row(r) = captions.vectors().row(rec.selected[r]);
      auto cea_out = cea::apply(subset.vectors(), text, captions.prompt(), config.cea);
      rec.cea_summary = cea_out.summary;
      subset = subset.with_vectors(std::move(cea_out.augmented));
      ++report.cea_calls;
    }

    auto on_batch = [&](Index, double batch_loss, const probe::ProbeModel& model) {
      ++cumulative;
      ++batches_since_eval;
      loss_since_eval += batch_loss;
      if (cumulative % config.eval_every == 0) record(loop, model);
    };
    auto trained = probe::train(report.probe, subset, per_loop, config.train, train_rng,
                                &opt_state, on_batch);
    report.probe = trained.model;
    rec.batches_trained = per_loop;
    report.loops.push_back(std::move(rec));
  }
  if (batches_since_eval > 0) record(config.loops, report.probe);
  report.final_accuracy = report.eval_points.empty() ? probe::evaluate(report.probe, eval)
                                                     : report.eval_points.back().eval_accuracy;
  if (config.target_accuracy) report.b2a = b2a(report.eval_points, *config.target_accuracy);
  return report;
}

}  // namespace vecaf::orchestrator
