#pragma once
// Synthetic pools for desk-scale experiments: Gaussian class clusters around
// unit-norm centers, caption embeddings near the class centers, optional
// loss-boosted classes and an optional shifted subpopulation.

#include "vecaf/core.hpp"

#include <optional>
#include <vector>

namespace vecaf::synth {

struct DomainShift {
  Vector direction;  // added as-is to each shifted sample
  double fraction = 0.0;
};

struct SynthSpec {
  std::uint32_t class_count = 5;
  Index samples_per_class = 1000;
  Index eval_per_class = 200;
  Index dim = 16;
  double cluster_spread = 0.25;    // per-coordinate std of sample noise
  double caption_noise = 0.05;     // per-coordinate std of caption noise
  double min_separation_deg = 60;  // minimum angle between class centers
  std::vector<std::uint32_t> loss_boost_classes;
  double loss_boost_factor = 10.0;
  std::optional<DomainShift> domain_shift;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthMetadata {
  Matrix class_centers;
  std::vector<bool> shifted;  // per train sample
  std::vector<bool> eval_shifted;
  // Present when loss_boost_classes is nonempty.
  std::optional<LossProfile> prior_losses;
};

struct SynthDataset {
  EmbeddingSet train;
  CaptionEmbeddings captions;
  EmbeddingSet eval;
  SynthMetadata meta;
};

// Pure function of the spec. Every value is rounded to float32 so the data
// survives a VCF1 round trip unchanged. Throws ConfigError when the center
// separation is infeasible for (class_count, dim).
SynthDataset synth_dataset(const SynthSpec& spec);

// Seeded random unit d-vector, used to build shift directions.
Vector random_direction(Index dim, std::uint64_t seed);

}  // namespace vecaf::synth
