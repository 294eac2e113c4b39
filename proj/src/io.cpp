#include "vecaf/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace vecaf::io {
namespace {

static_assert(std::numeric_limits<float>::is_iec559, "IEEE-754 float required");

constexpr char kMatrixMagic[4] = {'V', 'C', 'F', '1'};
constexpr char kLabelMagic[4] = {'V', 'C', 'L', '1'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>((v >> (8 * b)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32(std::vector<unsigned char>& out, float f) {
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw Error("read failure on " + path.string());
  return bytes;
}

void dump(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failure on " + path.string());
}

std::string where(const std::string& context) {
  return context.empty() ? std::string() : context + ": ";
}

}  // namespace

std::vector<unsigned char> encode_matrix(const Matrix& m) {
  check_matrix(m, "matrix", /*require_positive_norm=*/false);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (!std::isfinite(static_cast<float>(m(r, c))))
        throw ValidationError("matrix: value overflows float32 at (" + std::to_string(r) + ", " +
                              std::to_string(c) + ")");
  std::vector<unsigned char> out;
  out.reserve(12 + 4 * m.size());
  out.insert(out.end(), std::begin(kMatrixMagic), std::end(kMatrixMagic));
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f32(out, static_cast<float>(m(r, c)));
  return out;
}

Matrix decode_matrix(const std::vector<unsigned char>& bytes, const std::string& context) {
  if (bytes.size() < 12) throw LengthError(where(context) + "file shorter than VCF1 header");
  if (std::memcmp(bytes.data(), kMatrixMagic, 4) != 0)
    throw FormatError(where(context) + "bad magic, expected VCF1");
  const std::uint64_t n = get_u32(bytes.data() + 4);
  const std::uint64_t d = get_u32(bytes.data() + 8);
  const std::uint64_t expected = 12 + 4 * n * d;
  if (bytes.size() != expected)
    throw LengthError(where(context) + "payload holds " + std::to_string(bytes.size() - 12) +
                      " bytes, header declares " + std::to_string(expected - 12));
  Matrix m(n, d);
  const unsigned char* p = bytes.data() + 12;
  for (std::uint64_t r = 0; r < n; ++r) {
    for (std::uint64_t c = 0; c < d; ++c, p += 4) {
      const float v = get_f32(p);
      if (!std::isfinite(v))
        throw ValidationError(where(context) + "non-finite value at (" + std::to_string(r) + ", " +
                              std::to_string(c) + ")");
      m(r, c) = v;
    }
  }
  return m;
}

void write_matrix(const Matrix& m, const std::filesystem::path& path) {
  dump(encode_matrix(m), path);
}

Matrix read_matrix(const std::filesystem::path& path) {
  return decode_matrix(slurp(path), path.string());
}

void write_labels(const std::vector<std::uint32_t>& labels, const std::filesystem::path& path) {
  std::vector<unsigned char> out;
  out.reserve(8 + 4 * labels.size());
  out.insert(out.end(), std::begin(kLabelMagic), std::end(kLabelMagic));
  put_u32(out, static_cast<std::uint32_t>(labels.size()));
  for (auto v : labels) put_u32(out, v);
  dump(out, path);
}

std::vector<std::uint32_t> read_labels(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const std::string ctx = path.string() + ": ";
  if (bytes.size() < 8) throw LengthError(ctx + "file shorter than VCL1 header");
  if (std::memcmp(bytes.data(), kLabelMagic, 4) != 0)
    throw FormatError(ctx + "bad magic, expected VCL1");
  const std::uint64_t n = get_u32(bytes.data() + 4);
  if (bytes.size() != 8 + 4 * n)
    throw LengthError(ctx + "payload holds " + std::to_string(bytes.size() - 8) +
                      " bytes, header declares " + std::to_string(4 * n));
  std::vector<std::uint32_t> labels(n);
  for (std::uint64_t i = 0; i < n; ++i) labels[i] = get_u32(bytes.data() + 8 + 4 * i);
  return labels;
}

EmbeddingSet read_embedding_set(const std::filesystem::path& vectors,
                                const std::filesystem::path& labels,
                                std::uint32_t class_count) {
  Matrix m = read_matrix(vectors);
  auto y = read_labels(labels);
  if (class_count == 0) {
    std::uint32_t top = 0;
    for (auto v : y) top = std::max(top, v);
    class_count = std::max<std::uint32_t>(2, top + 1);
  }
  return EmbeddingSet(std::move(m), std::move(y), class_count);
}

CaptionEmbeddings read_captions(const std::filesystem::path& vectors,
                                const std::filesystem::path& prompt) {
  Matrix m = read_matrix(vectors);
  std::optional<Vector> p;
  if (!prompt.empty()) {
    Matrix pm = read_matrix(prompt);
    if (pm.rows() != 1)
      throw FormatError(prompt.string() + ": prompt file must hold exactly one row");
    p = pm.row(0).transpose();
  }
  return CaptionEmbeddings(std::move(m), std::move(p));
}

void write_losses(const LossProfile& losses, const std::filesystem::path& path) {
  Matrix m(losses.count(), 1);
  for (Index i = 0; i < losses.count(); ++i) m(i, 0) = losses.losses()[i];
  write_matrix(m, path);
}

LossProfile read_losses(const std::filesystem::path& path) {
  Matrix m = read_matrix(path);
  if (m.cols() != 1)
    throw FormatError(path.string() + ": loss file must have d = 1, got " +
                      std::to_string(m.cols()));
  return LossProfile(std::vector<double>(m.data(), m.data() + m.rows()));
}

Matrix read_csv_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  const std::string ctx = path.string() + ": ";
  std::string line;
  if (!std::getline(in, line)) throw FormatError(ctx + "missing dim header");
  long dim = 0;
  try {
    dim = std::stol(line);
  } catch (const std::exception&) {
    throw FormatError(ctx + "header must be the dimension, got '" + line + "'");
  }
  if (dim <= 0) throw FormatError(ctx + "dimension must be positive");

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    long cols = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError(ctx + "row " + std::to_string(rows) + ": bad number '" + cell + "'");
      }
      ++cols;
    }
    if (cols != dim)
      throw LengthError(ctx + "row " + std::to_string(rows) + " has " + std::to_string(cols) +
                        " values, expected " + std::to_string(dim));
    ++rows;
  }
  Matrix m(rows, dim);
  for (std::size_t i = 0; i < values.size(); ++i) m.data()[i] = values[i];
  check_matrix(m, ctx + "csv matrix", false);
  return m;
}

}  // namespace vecaf::io
