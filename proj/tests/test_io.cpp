#include "helpers.hpp"

#include "vecaf/io.hpp"

#include <doctest.h>

#include <cstring>
#include <limits>

using namespace vecaf;
namespace fs = std::filesystem;

namespace {

// Values that survive float32 storage unchanged.
Matrix float_matrix(Index rows, Index cols, std::uint64_t seed) {
  Matrix m = testing::random_matrix(rows, cols, seed);
  for (Index i = 0; i < static_cast<Index>(m.size()); ++i)
    m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  return m;
}

std::string header(const char* magic, std::uint32_t a, std::uint32_t b) {
  std::string s(magic, 4);
  for (std::uint32_t v : {a, b})
    for (int k = 0; k < 4; ++k) s.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
  return s;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("1x1 matrix encodes to the documented 16 bytes") {
  Matrix m(1, 1);
  m(0, 0) = 0.5;
  const auto bytes = io::encode_matrix(m);
  const std::vector<unsigned char> expected{'V', 'C', 'F', '1', 1, 0, 0, 0,
                                            1,   0,   0,   0,   0, 0, 0, 0x3F};
  CHECK(bytes == expected);
  const auto dir = testing::scratch_dir("io_16");
  io::write_matrix(m, dir / "m.vcf");
  CHECK(fs::file_size(dir / "m.vcf") == 16);
}

TEST_CASE("matrix round trip is bit exact") {
  const auto dir = testing::scratch_dir("io_round");
  const Matrix m = float_matrix(100, 8, 5);
  io::write_matrix(m, dir / "a.vcf");
  const Matrix back = io::read_matrix(dir / "a.vcf");
  REQUIRE(back.rows() == 100);
  REQUIRE(back.cols() == 8);
  CHECK(std::memcmp(back.data(), m.data(), sizeof(double) * m.size()) == 0);
  io::write_matrix(back, dir / "b.vcf");
  CHECK(testing::slurp(dir / "a.vcf") == testing::slurp(dir / "b.vcf"));
}

TEST_CASE("non-finite matrix is rejected before writing") {
  const auto dir = testing::scratch_dir("io_nan");
  Matrix m = float_matrix(3, 2, 1);
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(io::write_matrix(m, dir / "nan.vcf"), ValidationError);
  CHECK_FALSE(fs::exists(dir / "nan.vcf"));
}

TEST_CASE("malformed matrix files") {
  const auto dir = testing::scratch_dir("io_bad");
  std::string payload(3 * 2 * 4, '\0');

  testing::spill(dir / "magic.vcf", header("XXXX", 3, 2) + payload);
  CHECK_THROWS_AS(io::read_matrix(dir / "magic.vcf"), FormatError);

  testing::spill(dir / "short.vcf", header("VCF1", 10, 2) + std::string(9 * 2 * 4, '\0'));
  CHECK_THROWS_AS(io::read_matrix(dir / "short.vcf"), LengthError);

  testing::spill(dir / "stub.vcf", std::string("VCF"));
  CHECK_THROWS_AS(io::read_matrix(dir / "stub.vcf"), LengthError);

  // float32 +inf = 00 00 80 7F
  std::string inf_payload(4, '\0');
  inf_payload[2] = static_cast<char>(0x80);
  inf_payload[3] = static_cast<char>(0x7F);
  testing::spill(dir / "inf.vcf", header("VCF1", 1, 1) + inf_payload);
  CHECK_THROWS_AS(io::read_matrix(dir / "inf.vcf"), ValidationError);

  CHECK_THROWS_AS(io::read_matrix(dir / "missing.vcf"), Error);
}

TEST_CASE("error messages carry the path") {
  const auto dir = testing::scratch_dir("io_ctx");
  testing::spill(dir / "named_file.vcf", header("XXXX", 1, 1) + std::string(4, '\0'));
  try {
    io::read_matrix(dir / "named_file.vcf");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("named_file.vcf") != std::string::npos);
  }
}

TEST_CASE("labels round trip and reject bad headers") {
  const auto dir = testing::scratch_dir("io_labels");
  const std::vector<std::uint32_t> labels{0, 3, 1, 4, 4, 2};
  io::write_labels(labels, dir / "l.vcl");
  CHECK(io::read_labels(dir / "l.vcl") == labels);
  CHECK(testing::slurp(dir / "l.vcl").size() == 8 + 4 * labels.size());

  std::string bytes = testing::slurp(dir / "l.vcl");
  bytes[0] = 'X';
  testing::spill(dir / "bad.vcl", bytes);
  CHECK_THROWS_AS(io::read_labels(dir / "bad.vcl"), FormatError);
  testing::spill(dir / "short.vcl", testing::slurp(dir / "l.vcl").substr(0, 12));
  CHECK_THROWS_AS(io::read_labels(dir / "short.vcl"), LengthError);
}

TEST_CASE("embedding set from files") {
  const auto dir = testing::scratch_dir("io_set");
  io::write_matrix(float_matrix(6, 3, 2), dir / "v.vcf");
  io::write_labels({0, 1, 2, 0, 1, 2}, dir / "l.vcl");
  const auto set = io::read_embedding_set(dir / "v.vcf", dir / "l.vcl");
  CHECK(set.class_count() == 3);
  CHECK(io::read_embedding_set(dir / "v.vcf", dir / "l.vcl", 5).class_count() == 5);
  io::write_labels({0, 1, 2}, dir / "short.vcl");
  CHECK_THROWS_AS(io::read_embedding_set(dir / "v.vcf", dir / "short.vcl"), ValidationError);
}

TEST_CASE("captions with a prompt") {
  const auto dir = testing::scratch_dir("io_captions");
  io::write_matrix(float_matrix(4, 3, 1), dir / "c.vcf");
  io::write_matrix(float_matrix(1, 3, 2), dir / "p.vcf");
  io::write_matrix(float_matrix(2, 3, 2), dir / "p2.vcf");
  const auto caps = io::read_captions(dir / "c.vcf", dir / "p.vcf");
  REQUIRE(caps.prompt().has_value());
  CHECK(caps.prompt()->size() == 3);
  CHECK_FALSE(io::read_captions(dir / "c.vcf").prompt().has_value());
  CHECK_THROWS_AS(io::read_captions(dir / "c.vcf", dir / "p2.vcf"), FormatError);
}

TEST_CASE("losses round trip") {
  const auto dir = testing::scratch_dir("io_losses");
  const LossProfile l({0.5, 2.0, 0.0, 1.25});
  io::write_losses(l, dir / "l.vcf");
  CHECK(io::read_losses(dir / "l.vcf").losses() == l.losses());
  io::write_matrix(float_matrix(4, 2, 1), dir / "wide.vcf");
  CHECK_THROWS_AS(io::read_losses(dir / "wide.vcf"), FormatError);
}

TEST_CASE("csv import") {
  const auto dir = testing::scratch_dir("io_csv");
  testing::spill(dir / "ok.csv", "3\n1,2,3\n4.5,-1,0\n");
  const Matrix m = io::read_csv_matrix(dir / "ok.csv");
  REQUIRE(m.rows() == 2);
  CHECK(m(1, 0) == 4.5);
  CHECK(m(1, 1) == -1.0);
  testing::spill(dir / "ragged.csv", "3\n1,2\n");
  CHECK_THROWS_AS(io::read_csv_matrix(dir / "ragged.csv"), LengthError);
  testing::spill(dir / "word.csv", "2\n1,abc\n");
  CHECK_THROWS_AS(io::read_csv_matrix(dir / "word.csv"), FormatError);
  testing::spill(dir / "nohead.csv", "x\n1\n");
  CHECK_THROWS_AS(io::read_csv_matrix(dir / "nohead.csv"), FormatError);
}

}
