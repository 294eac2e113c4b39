#pragma once
// Multi-loop select -> augment -> finetune harness and its baselines.
//
// Each loop: compute pool losses with the current probe, pick K = ceil(ratio*N)
// samples with the configured strategy, (vecaf only) pull the picked
// embeddings toward their captions, then continue training the probe for
// floor(total_batches / loops) batches. Accuracy on the eval pool is recorded
// every eval_every cumulative batches.

#include "vecaf/cea.hpp"
#include "vecaf/core.hpp"
#include "vecaf/ods.hpp"
#include "vecaf/probe.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vecaf::orchestrator {

enum class Strategy { Vecaf, Random, TopkLoss, DiversityOnly };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& name);  // throws ConfigError

struct RunConfig {
  int loops = 3;
  double selection_ratio = 0.01;
  Strategy strategy = Strategy::Vecaf;
  OdsConfig ods;
  cea::CeaConfig cea;
  bool use_cea = true;         // vecaf only; false gives the ODS-only ablation
  bool prompt_steering = false;  // vecaf only; pool-wide CEA before selection
  probe::TrainConfig train;
  Index total_batches = 300;
  Index eval_every = 10;
  std::optional<double> target_accuracy;
  std::uint64_t seed = 0;

  void validate() const;
  Index budget(Index pool_size) const;  // ceil(ratio * N)
  Index batches_per_loop() const { return total_batches / static_cast<Index>(loops); }
};

struct EvalPoint {
  int loop = 0;  // 1-based
  Index batches = 0;  // cumulative
  double train_loss = 0.0;  // mean batch loss since the previous point
  double eval_accuracy = 0.0;
};

struct LoopRecord {
  int loop = 0;
  std::vector<Index> selected;
  std::vector<ods::OdsTrace> ods_traces;  // one per ensemble member (vecaf, diversity_only)
  std::optional<cea::CeaSummary> cea_summary;
  Index batches_trained = 0;
};

struct RunReport {
  Strategy strategy = Strategy::Vecaf;
  std::uint64_t seed = 0;
  std::vector<LoopRecord> loops;
  std::vector<EvalPoint> eval_points;
  std::optional<double> target_accuracy;
  std::optional<Index> b2a;
  double final_accuracy = 0.0;
  Index ods_calls = 0;
  Index cea_calls = 0;
  probe::ProbeModel probe;
};

// Smallest recorded batch count with accuracy >= target (first crossing).
std::optional<Index> b2a(const std::vector<EvalPoint>& points, double target);

// K largest losses, ties to the lowest index.
std::vector<Index> baseline_topk(const LossProfile& losses, Index budget);

std::vector<Index> baseline_random(Index pool_size, Index budget, Rng& rng);

// The ODS pipeline with every loss set equal.
std::vector<Index> baseline_diversity_only(const EmbeddingSet& pool, Index budget,
                                           const OdsConfig& config, Rng& rng);

// Everything a single selection step needs; used by run() and the CLI.
struct SelectionInputs {
  const EmbeddingSet* pool = nullptr;
  const CaptionEmbeddings* captions = nullptr;  // required for prompt steering
  const LossProfile* losses = nullptr;  // required for vecaf and topk_loss
};

struct SelectionOutcome {
  std::vector<Index> indices;
  std::vector<ods::OdsTrace> traces;
  std::optional<SelectionModel> model;
  bool used_ods = false;
  bool used_cea = false;  // pool-wide steering pass
};

SelectionOutcome select_indices(const SelectionInputs& in, const RunConfig& config,
                                Index budget, Rng& rng);

// `prior_losses`, when given, replaces the probe's losses in loop 1.
RunReport run(const EmbeddingSet& pool, const CaptionEmbeddings& captions,
              const EmbeddingSet& eval, const RunConfig& config,
              const LossProfile* prior_losses = nullptr);

}  // namespace vecaf::orchestrator
