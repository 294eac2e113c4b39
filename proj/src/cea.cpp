#include "vecaf/cea.hpp"

#include <algorithm>
#include <cmath>

namespace vecaf::cea {

void CeaConfig::validate(bool has_prompt) const {
  if (!std::isfinite(eta) || eta < 0.0) throw ConfigError("cea: eta must be >= 0");
  if (!(prompt_weight >= 0.0 && prompt_weight <= 1.0))
    throw ConfigError("cea: prompt_weight must be in [0, 1]");
  if (prompt_weight > 0.0 && !has_prompt)
    throw ConfigError("cea: prompt_weight > 0 requires a prompt vector");
}

std::vector<double> attention_scores(const Matrix& image, const Matrix& text) {
  if (image.rows() != text.rows() || image.cols() != text.cols())
    throw DomainError("cea: image/text shape mismatch");
  std::vector<double> cosines(image.rows());
  for (Eigen::Index i = 0; i < image.rows(); ++i)
    cosines[i] = cosine_similarity(image.row(i).transpose(), text.row(i).transpose());
  return softmax(cosines);
}

Matrix augment(const Matrix& image, const Matrix& text, std::span<const double> scores,
               double step) {
  if (image.rows() != text.rows() || image.cols() != text.cols())
    throw DomainError("cea: image/text shape mismatch");
  if (scores.size() != static_cast<std::size_t>(image.rows()))
    throw DomainError("cea: one score per row required");
  Matrix out(image.rows(), image.cols());
  for (Eigen::Index i = 0; i < image.rows(); ++i)
    out.row(i) = image.row(i) - step * scores[i] * (image.row(i) - text.row(i));
  return out;
}

Matrix blend_prompt(const Matrix& text, const std::optional<Vector>& prompt, double weight) {
  if (weight == 0.0) return text;
  if (!prompt) throw ConfigError("cea: prompt_weight > 0 requires a prompt vector");
  if (prompt->size() != text.cols()) throw DomainError("cea: prompt dim mismatch");
  Matrix out = (1.0 - weight) * text;
  out.rowwise() += weight * prompt->transpose();
  return out;
}

CeaResult apply(const Matrix& image, const Matrix& text, const std::optional<Vector>& prompt,
                const CeaConfig& config) {
  config.validate(prompt.has_value());
  const Matrix targets = blend_prompt(text, prompt, config.prompt_weight);
  CeaResult result;
  result.scores = attention_scores(image, targets);
  const double step = config.eta * static_cast<double>(image.rows());
  result.augmented = augment(image, targets, result.scores, step);

  auto& s = result.summary;
  const auto [lo, hi] = std::minmax_element(result.scores.begin(), result.scores.end());
  s.min_alpha = *lo;
  s.max_alpha = *hi;
  double total = 0.0;
  for (double a : result.scores) {
    total += a;
    if (step * a > 1.0) ++s.overshoot;
  }
  s.mean_alpha = total / static_cast<double>(result.scores.size());
  return result;
}

}  // namespace vecaf::cea
