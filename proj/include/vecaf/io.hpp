#pragma once
// Binary file formats (little-endian, fixed width):
//
//   VCF1  "VCF1" | u32 n | u32 d | n*d float32, row-major     (matrices)
//   VCL1  "VCL1" | u32 n | n*u32                               (labels)
//   VCP1  "VCP1" | u32 C | u32 d | C*d float32 weights | C float32 bias
//
// plus a CSV import path for hand-written fixtures (header line holds the
// dimension, then one comma-separated vector per line).

#include "vecaf/core.hpp"

#include <filesystem>
#include <vector>

namespace vecaf::io {

// Throws ValidationError before touching the file if the matrix has
// non-finite entries; Error with the path on I/O failure.
void write_matrix(const Matrix& m, const std::filesystem::path& path);
Matrix read_matrix(const std::filesystem::path& path);

void write_labels(const std::vector<std::uint32_t>& labels, const std::filesystem::path& path);
std::vector<std::uint32_t> read_labels(const std::filesystem::path& path);

// Embeddings plus labels (two files) into a validated EmbeddingSet. When
// class_count is 0 it is inferred as max(label) + 1 (at least 2).
EmbeddingSet read_embedding_set(const std::filesystem::path& vectors,
                                const std::filesystem::path& labels,
                                std::uint32_t class_count = 0);

// Caption matrix plus an optional single-row prompt file.
CaptionEmbeddings read_captions(const std::filesystem::path& vectors,
                                const std::filesystem::path& prompt = {});

// Losses are stored as an n x 1 VCF1 matrix.
void write_losses(const LossProfile& losses, const std::filesystem::path& path);
LossProfile read_losses(const std::filesystem::path& path);

Matrix read_csv_matrix(const std::filesystem::path& path);

// Raw little-endian encoding, exposed for tests.
std::vector<unsigned char> encode_matrix(const Matrix& m);
Matrix decode_matrix(const std::vector<unsigned char>& bytes, const std::string& context = "");

}  // namespace vecaf::io
