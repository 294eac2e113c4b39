#pragma once
// Cross-attentive embedding augmentation: each image embedding moves toward
// its caption embedding by a step proportional to a softmax attention score
// over the batch's image/caption cosine similarities.

#include "vecaf/core.hpp"

#include <optional>
#include <vector>

namespace vecaf::cea {

struct CeaConfig {
  // Step size at the batch-average attention score: the augmentation kernel
  // receives eta * K, so a sample with alpha_i = 1/K moves a fraction eta of
  // the way to its caption regardless of batch size.
  double eta = 0.5;
  // Blend of the prompt vector into every caption: t <- (1-w) t + w prompt.
  double prompt_weight = 0.0;

  void validate(bool has_prompt) const;
};

// alpha = softmax_i cos(image_i, text_i). Throws DomainError on zero rows.
std::vector<double> attention_scores(const Matrix& image, const Matrix& text);

// e_aug_i = e_i - step * alpha_i (e_i - t_i), row-wise; inputs untouched.
Matrix augment(const Matrix& image, const Matrix& text, std::span<const double> scores,
               double step);

// Captions with the prompt blended in (returns `text` when weight is 0).
Matrix blend_prompt(const Matrix& text, const std::optional<Vector>& prompt, double weight);

struct CeaSummary {
  double min_alpha = 0.0;
  double mean_alpha = 0.0;
  double max_alpha = 0.0;
  Index overshoot = 0;  // rows with step * alpha_i > 1 (moved past the caption)
};

struct CeaResult {
  Matrix augmented;
  std::vector<double> scores;
  CeaSummary summary;
};

// Full pass: prompt blend, attention, augmentation with kernel step eta * K.
CeaResult apply(const Matrix& image, const Matrix& text, const std::optional<Vector>& prompt,
                const CeaConfig& config);

}  // namespace vecaf::cea
