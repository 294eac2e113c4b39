#include "helpers.hpp"

#include <doctest.h>

#include <cstdlib>
#include <set>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string(VECAF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<long> read_indices(const fs::path& p) {
  std::istringstream in(testing::slurp(p));
  std::vector<long> out;
  for (long v; in >> v;) out.push_back(v);
  return out;
}

const fs::path& dataset() {
  static const fs::path dir = [] {
    const auto d = testing::scratch_dir("cli_data");
    REQUIRE(cli("synth --classes 3 --per-class 100 --eval-per-class 20 --dim 8 "
                  "--boost-classes 0 --seed 4 --out " + (d / "data").string()) == 0);
    return d / "data";
  }();
  return dir;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth writes a deterministic dataset") {
  const auto& data = dataset();
  for (const char* f : {"train.vcf", "train.vcl", "eval.vcf", "eval.vcl", "captions.vcf",
                        "metadata.csv", "prior_losses.vcf"})
    CHECK(fs::exists(data / f));
  CHECK_FALSE(fs::exists(data / "prompt.vcf"));
  const auto again = testing::scratch_dir("cli_again") / "data";
  REQUIRE(cli("synth --classes 3 --per-class 100 --eval-per-class 20 --dim 8 "
                "--boost-classes 0 --seed 4 --out " + again.string()) == 0);
  CHECK(testing::slurp(data / "train.vcf") == testing::slurp(again / "train.vcf"));
  CHECK(testing::slurp(data / "metadata.csv") == testing::slurp(again / "metadata.csv"));
  CHECK(testing::slurp(data / "metadata.csv").rfind("split,index,label,shifted\n", 0) == 0);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(cli("synth") == 2);
  CHECK(cli("report") == 2);
  CHECK(cli("--help") == 0);
  CHECK(cli("select --pool a --labels b --out-indices c --losses x --checkpoint y") == 2);
}

TEST_CASE("select") {
  const auto& data = dataset();
  const auto dir = testing::scratch_dir("cli_select");
  const std::string pool = "select --pool " + (data / "train.vcf").string() + " --labels " +
                           (data / "train.vcl").string() + " --ods-iterations 50 ";
  const std::string base = pool + "--ratio 0.1 ";
  REQUIRE(cli(base + "--losses " + (data / "prior_losses.vcf").string() + " --out-indices " +
                (dir / "idx.txt").string() + " --out-diagnostics " +
                (dir / "diag.csv").string()) == 0);
  const auto idx = read_indices(dir / "idx.txt");
  CHECK(idx.size() == 30);
  CHECK(std::set<long>(idx.begin(), idx.end()).size() == 30);
  for (long i : idx) CHECK((i >= 0 && i < 300));
  const auto diag = testing::slurp(dir / "diag.csv");
  CHECK(diag.rfind("kind,member,iteration,value\n", 0) == 0);
  CHECK(diag.find("p_s_selected_mass") != std::string::npos);

  CHECK(cli(base + "--strategy topk_loss --out-indices " + (dir / "t.txt").string()) == 1);
  CHECK(cli(pool + "--strategy random --ratio 0.001 --out-indices " +
              (dir / "r.txt").string()) == 1);
  CHECK(cli(base + "--strategy random --out-indices " + (dir / "r.txt").string()) == 0);
  CHECK(read_indices(dir / "r.txt").size() == 30);
  CHECK(cli("select --pool " + (dir / "missing.vcf").string() + " --labels x --out-indices " +
              (dir / "m.txt").string()) == 1);
}

TEST_CASE("run and report") {
  const auto& data = dataset();
  const auto dir = testing::scratch_dir("cli_run");
  const std::string common = "run --data " + data.string() +
                             " --strategy random --strategy vecaf --seed 0 --seed 1"
                             " --ratio 0.05 --total-batches 12 --eval-every 3"
                             " --ods-iterations 30 --ensemble 2 ";
  REQUIRE(cli(common + "--out " + (dir / "a").string()) == 0);
  for (const char* f : {"eval.csv", "summary.csv", "resolved.ini", "probe_vecaf_s1.vcp"})
    CHECK(fs::exists(dir / "a" / f));
  const auto summary = testing::slurp(dir / "a" / "summary.csv");
  CHECK(summary.find("# target_acc=n/a") != std::string::npos);
  CHECK(summary.find("0,random,n/a,") != std::string::npos);

  REQUIRE(cli(common + "--target-acc 0.5 --out " + (dir / "b").string()) == 0);
  const auto with_target = testing::slurp(dir / "b" / "summary.csv");
  CHECK(with_target.find("0,random,n/a,") == std::string::npos);

  // Re-running from the resolved config reproduces the outputs byte for byte.
  REQUIRE(cli("--config " + (dir / "a" / "resolved.ini").string() + " run --out " +
                (dir / "c").string()) == 0);
  CHECK(testing::slurp(dir / "a" / "eval.csv") == testing::slurp(dir / "c" / "eval.csv"));
  CHECK(testing::slurp(dir / "a" / "summary.csv") == testing::slurp(dir / "c" / "summary.csv"));

  REQUIRE(cli("report " + (dir / "a" / "summary.csv").string() + " " +
                (dir / "c" / "summary.csv").string() + " --out " +
                (dir / "agg.csv").string()) == 0);
  CHECK(testing::slurp(dir / "agg.csv").find("vecaf,4,") != std::string::npos);
  CHECK(cli("report " + (dir / "a" / "summary.csv").string() + " " +
              (dir / "b" / "summary.csv").string() + " --out " + (dir / "x.csv").string()) == 1);
}

}
