#include "vecaf/synth.hpp"

#include <cmath>
#include <numbers>

namespace vecaf::synth {
namespace {

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

Vector unit_gaussian(Index dim, Rng& rng) {
  Vector v(dim);
  do {
    for (Index j = 0; j < dim; ++j) v(j) = rng.normal();
  } while (v.norm() == 0.0);
  return v / v.norm();
}

Matrix separated_centers(const SynthSpec& spec, Rng& rng) {
  const double max_cos = std::cos(spec.min_separation_deg * std::numbers::pi / 180.0);
  constexpr int kRestarts = 200;
  constexpr int kTriesPerCenter = 2000;
  for (int restart = 0; restart < kRestarts; ++restart) {
    Matrix centers(spec.class_count, spec.dim);
    bool ok = true;
    for (std::uint32_t c = 0; c < spec.class_count && ok; ++c) {
      ok = false;
      for (int t = 0; t < kTriesPerCenter; ++t) {
        Vector v = unit_gaussian(spec.dim, rng);
        bool far = true;
        for (std::uint32_t p = 0; p < c && far; ++p) far = centers.row(p).dot(v) <= max_cos;
        if (far) {
          centers.row(c) = v.transpose();
          ok = true;
          break;
        }
      }
    }
    if (ok) return centers;
  }
  throw ConfigError("synth: cannot place " + std::to_string(spec.class_count) +
                    " unit centers in dim " + std::to_string(spec.dim) + " at least " +
                    std::to_string(spec.min_separation_deg) + " degrees apart");
}

}  // namespace

void SynthSpec::validate() const {
  if (class_count < 2) throw ConfigError("synth: class_count must be >= 2");
  if (samples_per_class == 0) throw ConfigError("synth: samples_per_class must be >= 1");
  if (eval_per_class == 0) throw ConfigError("synth: eval_per_class must be >= 1");
  if (dim == 0) throw ConfigError("synth: dim must be >= 1");
  if (!(cluster_spread > 0.0)) throw ConfigError("synth: cluster_spread must be > 0");
  if (caption_noise < 0.0) throw ConfigError("synth: caption_noise must be >= 0");
  if (min_separation_deg < 0.0 || min_separation_deg > 180.0)
    throw ConfigError("synth: min_separation_deg must be in [0, 180]");
  for (auto c : loss_boost_classes)
    if (c >= class_count) throw ConfigError("synth: loss boost class out of range");
  if (!(loss_boost_factor > 0.0)) throw ConfigError("synth: loss_boost_factor must be > 0");
  if (domain_shift) {
    if (domain_shift->fraction < 0.0 || domain_shift->fraction > 1.0)
      throw ConfigError("synth: shift fraction must be in [0, 1]");
    if (static_cast<Index>(domain_shift->direction.size()) != dim)
      throw ConfigError("synth: shift vector dim mismatch");
    if (!domain_shift->direction.allFinite()) throw ConfigError("synth: shift must be finite");
  }
}

Vector random_direction(Index dim, std::uint64_t seed) {
  Rng rng(seed);
  return unit_gaussian(dim, rng);
}

SynthDataset synth_dataset(const SynthSpec& spec) {
  spec.validate();
  Rng root(spec.seed);
  Rng center_rng = root.fork(1);
  Rng train_rng = root.fork(2);
  Rng eval_rng = root.fork(3);
  Rng caption_rng = root.fork(4);
  Rng shift_rng = root.fork(5);
  Rng loss_rng = root.fork(6);

  const Matrix centers = separated_centers(spec, center_rng);

  // Draws per_class samples per class, emitted in a shuffled order.
  auto draw = [&](Index per_class, Rng& rng, std::vector<std::uint32_t>& labels) {
    const Index n = per_class * spec.class_count;
    std::vector<Index> order(n);
    for (Index i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    labels.assign(n, 0);
    Matrix m(n, spec.dim);
    for (Index r = 0; r < n; ++r) {
      const auto label = static_cast<std::uint32_t>(order[r] / per_class);
      labels[r] = label;
      for (Index j = 0; j < spec.dim; ++j)
        m(r, j) = to_f32(centers(label, j) + spec.cluster_spread * rng.normal());
    }
    return m;
  };

  std::vector<std::uint32_t> train_labels;
  std::vector<std::uint32_t> eval_labels;
  Matrix train = draw(spec.samples_per_class, train_rng, train_labels);
  Matrix eval = draw(spec.eval_per_class, eval_rng, eval_labels);

  const Index n = static_cast<Index>(train.rows());
  Matrix captions(n, spec.dim);
  for (Index r = 0; r < n; ++r)
    for (Index j = 0; j < spec.dim; ++j)
      captions(r, j) =
          to_f32(centers(train_labels[r], j) + spec.caption_noise * caption_rng.normal());

  SynthMetadata meta;
  meta.class_centers = centers;
  meta.shifted.assign(n, false);
  meta.eval_shifted.assign(static_cast<Index>(eval.rows()), false);
  if (spec.domain_shift) {
    auto apply = [&](Matrix& m, std::vector<bool>& flags) {
      const auto rows = static_cast<Index>(m.rows());
      const auto count = static_cast<Index>(std::floor(spec.domain_shift->fraction * rows));
      for (Index r : shift_rng.sample_without_replacement(rows, count)) {
        flags[r] = true;
        for (Index j = 0; j < spec.dim; ++j)
          m(r, j) = to_f32(m(r, j) + spec.domain_shift->direction(j));
      }
    };
    apply(train, meta.shifted);
    apply(eval, meta.eval_shifted);
  }

  if (!spec.loss_boost_classes.empty()) {
    std::vector<bool> boosted(spec.class_count, false);
    for (auto c : spec.loss_boost_classes) boosted[c] = true;
    std::vector<double> losses(n);
    for (Index r = 0; r < n; ++r) {
      const double base = 0.5 + loss_rng.uniform();
      losses[r] = to_f32(boosted[train_labels[r]] ? base * spec.loss_boost_factor : base);
    }
    meta.prior_losses = LossProfile(std::move(losses));
  }

  std::optional<Vector> prompt;
  if (spec.domain_shift && spec.domain_shift->direction.norm() > 0.0) {
    Vector p = spec.domain_shift->direction.normalized();
    for (Index j = 0; j < spec.dim; ++j) p(j) = to_f32(p(j));
    prompt = p;
  }

  return SynthDataset{
      EmbeddingSet(std::move(train), std::move(train_labels), spec.class_count),
      CaptionEmbeddings(std::move(captions), std::move(prompt)),
      EmbeddingSet(std::move(eval), std::move(eval_labels), spec.class_count),
      std::move(meta),
  };
}

}  // namespace vecaf::synth
