#include "helpers.hpp"

#include "vecaf/probe.hpp"
#include "vecaf/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace vecaf;

namespace {

probe::ProbeModel random_model(std::uint32_t c, Index d, std::uint64_t seed) {
  probe::ProbeModel m;
  m.weights = testing::random_matrix(c, d, seed);
  m.bias = testing::random_matrix(c, 1, seed + 1).col(0);
  return m;
}

// Mean cross-entropy by plain loops.
double oracle_loss(const probe::ProbeModel& m, const EmbeddingSet& data,
                   const std::vector<Index>& rows) {
  double total = 0;
  for (Index r : rows) {
    std::vector<double> z(m.class_count());
    double top = -1e300;
    for (Index c = 0; c < z.size(); ++c) {
      z[c] = m.bias(c);
      for (Index j = 0; j < m.dim(); ++j) z[c] += m.weights(c, j) * data.vectors()(r, j);
      top = std::max(top, z[c]);
    }
    double s = 0;
    for (double v : z) s += std::exp(v - top);
    total += -(z[data.labels()[r]] - top - std::log(s));
  }
  return total / static_cast<double>(rows.size());
}

}  // namespace

TEST_SUITE("probe") {

TEST_CASE("forward loss") {
  const auto zero = probe::ProbeModel::zeros(4, 3);
  CHECK(probe::forward_loss(zero, Vector::Ones(3), 2) == doctest::Approx(std::log(4.0)));
  auto m = probe::ProbeModel::zeros(4, 3);
  m.bias(1) = 20.0;
  const double l = probe::forward_loss(m, Vector::Ones(3), 1);
  CHECK(l < 1e-3);
  CHECK(l == doctest::Approx(-std::log(std::exp(20.0) / (std::exp(20.0) + 3))).epsilon(1e-9));
  CHECK_THROWS(probe::forward_loss(m, Vector::Ones(3), 4));
}

TEST_CASE("pool losses") {
  const auto pool = testing::random_pool(25, 4, 5, 1);
  const auto l = probe::pool_losses(probe::ProbeModel::zeros(5, 4), pool);
  for (double v : l.losses()) CHECK(v == doctest::Approx(std::log(5.0)));
  CHECK(l.normalizer() == doctest::Approx(25 * std::log(5.0)));

  const auto m = random_model(5, 4, 3);
  const auto lm = probe::pool_losses(m, pool);
  for (Index i = 0; i < 25; ++i) {
    CHECK(lm.losses()[i] >= 0.0);
    CHECK(lm.losses()[i] ==
          doctest::Approx(probe::forward_loss(m, pool.vectors().row(i).transpose(),
                                              pool.labels()[i])));
  }
}

TEST_CASE("batch gradient matches central differences") {
  constexpr double h = 1e-5;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto pool = testing::random_pool(15, 4, 3, seed);
    const auto m = random_model(3, 4, seed + 20);
    std::vector<Index> rows{0, 3, 3, 7, 14};
    const auto g = probe::batch_gradient(m, pool, rows);
    CHECK(g.loss == doctest::Approx(oracle_loss(m, pool, rows)).epsilon(1e-12));
    Matrix fd_w(3, 4);
    Vector fd_b(3);
    for (Index c = 0; c < 3; ++c) {
      for (Index j = 0; j < 4; ++j) {
        auto p = m, q = m;
        p.weights(c, j) += h;
        q.weights(c, j) -= h;
        fd_w(c, j) = (oracle_loss(p, pool, rows) - oracle_loss(q, pool, rows)) / (2 * h);
      }
      auto p = m, q = m;
      p.bias(c) += h;
      q.bias(c) -= h;
      fd_b(c) = (oracle_loss(p, pool, rows) - oracle_loss(q, pool, rows)) / (2 * h);
    }
    CHECK((g.weights - fd_w).norm() <= 1e-4 * fd_w.norm());
    CHECK((g.bias - fd_b).norm() <= 1e-4 * fd_b.norm());
  }
}

TEST_CASE("train with zero batches is a no-op") {
  const auto pool = testing::random_pool(10, 3, 2, 1);
  Rng rng(1);
  const auto m = random_model(2, 3, 5);
  const auto r = probe::train(m, pool, 0, probe::TrainConfig{}, rng);
  CHECK(r.model.weights == m.weights);
  CHECK(r.batch_losses.empty());
}

TEST_CASE("separable two-class data is fit") {
  synth::SynthSpec s;
  s.class_count = 2;
  s.samples_per_class = 100;
  s.dim = 8;
  s.cluster_spread = 0.1;
  s.min_separation_deg = 90;
  const auto ds = synth::synth_dataset(s);
  Rng rng(2);
  const auto r = probe::train(probe::ProbeModel::zeros(2, 8), ds.train, 500, {}, rng);
  CHECK(probe::evaluate(r.model, ds.train) >= 0.99);
  CHECK(r.batch_losses.size() == 500);
  CHECK(r.batch_losses.back() < r.batch_losses.front());
}

TEST_CASE("training is deterministic and calls back once per batch") {
  const auto pool = testing::random_pool(50, 4, 3, 2);
  Rng a(7), b(7);
  Index calls = 0;
  const auto ra = probe::train(probe::ProbeModel::zeros(3, 4), pool, 20, {}, a, nullptr,
                               [&calls](Index step, double, const probe::ProbeModel&) {
                                 CHECK(step == calls + 1);
                                 ++calls;
                               });
  const auto rb = probe::train(probe::ProbeModel::zeros(3, 4), pool, 20, {}, b);
  CHECK(calls == 20);
  CHECK(ra.model.weights == rb.model.weights);
  CHECK(ra.model.bias == rb.model.bias);
}

TEST_CASE("momentum state carries across calls") {
  const auto pool = testing::random_pool(40, 3, 2, 4);
  Rng a(1), b(1);
  probe::OptimizerState state;
  auto first = probe::train(probe::ProbeModel::zeros(2, 3), pool, 5, {}, a, &state);
  CHECK(state.weight_velocity.norm() > 0);
  auto cont = probe::train(first.model, pool, 5, {}, a, &state);
  auto fresh = probe::train(first.model, pool, 5, {}, b);
  CHECK(cont.model.weights != fresh.model.weights);
}

TEST_CASE("evaluation and tie-break") {
  const auto pool = testing::random_pool(35, 3, 5, 6);
  const auto zero = probe::ProbeModel::zeros(5, 3);
  Index zeros = 0;
  for (auto l : pool.labels()) zeros += l == 0;
  CHECK(probe::evaluate(zero, pool) == doctest::Approx(zeros / 35.0));

  // Logits equal to a one-hot of the label.
  Matrix e = Matrix::Zero(6, 3);
  std::vector<std::uint32_t> labels{0, 1, 2, 2, 1, 0};
  for (Index i = 0; i < 6; ++i) e(i, labels[i]) = 1.0;
  const EmbeddingSet onehot(e, labels, 3);
  probe::ProbeModel id;
  id.weights = Matrix::Identity(3, 3);
  id.bias = Vector::Zero(3);
  CHECK(probe::evaluate(id, onehot) == 1.0);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = testing::scratch_dir("probe_ckpt");
  auto m = random_model(3, 5, 9);
  m.weights = m.weights.cast<float>().cast<double>();
  m.bias = m.bias.cast<float>().cast<double>();
  probe::write_checkpoint(m, dir / "p.vcp");
  CHECK(std::filesystem::file_size(dir / "p.vcp") == 12 + 4 * (15 + 3));
  const auto back = probe::read_checkpoint(dir / "p.vcp");
  CHECK(back.weights == m.weights);
  CHECK(back.bias == m.bias);
  std::string bytes = testing::slurp(dir / "p.vcp");
  bytes[3] = '2';
  testing::spill(dir / "bad.vcp", bytes);
  CHECK_THROWS_AS(probe::read_checkpoint(dir / "bad.vcp"), FormatError);
  testing::spill(dir / "short.vcp", testing::slurp(dir / "p.vcp").substr(0, 20));
  CHECK_THROWS_AS(probe::read_checkpoint(dir / "short.vcp"), LengthError);
}

}
