#pragma once
// Small fixtures shared by the unit tests.

#include "vecaf/core.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace testing {

inline vecaf::Matrix random_matrix(vecaf::Index rows, vecaf::Index cols, std::uint64_t seed) {
  vecaf::Rng rng(seed);
  vecaf::Matrix m(rows, cols);
  for (vecaf::Index r = 0; r < rows; ++r)
    for (vecaf::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

inline vecaf::EmbeddingSet random_pool(vecaf::Index n, vecaf::Index d, std::uint32_t classes,
                                       std::uint64_t seed) {
  std::vector<std::uint32_t> labels(n);
  for (vecaf::Index i = 0; i < n; ++i) labels[i] = static_cast<std::uint32_t>(i % classes);
  return vecaf::EmbeddingSet(random_matrix(n, d, seed), labels, classes);
}

inline std::vector<double> random_losses(vecaf::Index n, std::uint64_t seed) {
  vecaf::Rng rng(seed);
  std::vector<double> l(n);
  for (auto& v : l) v = 0.1 + rng.uniform();
  return l;
}

// Plain-loop cosine, independent of the library kernel.
inline double cosine(const double* a, const double* b, vecaf::Index d) {
  double dot = 0, na = 0, nb = 0;
  for (vecaf::Index j = 0; j < d; ++j) {
    dot += a[j] * b[j];
    na += a[j] * a[j];
    nb += b[j] * b[j];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spill(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("vecaf_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
