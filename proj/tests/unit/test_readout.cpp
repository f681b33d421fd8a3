#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tmac/error.hpp"
#include "tmac/metrics.hpp"
#include "tmac/readout.hpp"

using namespace tmac;

TEST_CASE("one-hot pooling selects a node, uniform pooling averages") {
  std::mt19937_64 rng(1);
  const Tensor za = oracle::random_tensor(rng, 4, 3);
  const Tensor zv = oracle::random_tensor(rng, 5, 3);
  Tensor pa(4, 1), pv(5, 1);
  pa[2] = 1.0;
  pv[4] = 1.0;
  const Tensor picked = readout(za, zv, pa, pv);
  REQUIRE(picked.rows() == 1);
  REQUIRE(picked.cols() == 6);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(picked[k] == za(2, k));
    CHECK(picked[3 + k] == zv(4, k));
  }

  const Tensor mean = readout(za, zv, Tensor(4, 1, 0.25), Tensor(5, 1, 0.2));
  for (std::size_t k = 0; k < 3; ++k) {
    double a = 0.0, v = 0.0;
    for (std::size_t r = 0; r < 4; ++r) a += za(r, k) / 4.0;
    for (std::size_t r = 0; r < 5; ++r) v += zv(r, k) / 5.0;
    CHECK(mean[k] == doctest::Approx(a).epsilon(1e-14));
    CHECK(mean[3 + k] == doctest::Approx(v).epsilon(1e-14));
  }
}

TEST_CASE("readout is linear in the node embeddings") {
  std::mt19937_64 rng(2);
  const Tensor za = oracle::random_tensor(rng, 4, 3), zv = oracle::random_tensor(rng, 2, 3);
  const Tensor pa = oracle::random_tensor(rng, 4, 1), pv = oracle::random_tensor(rng, 2, 1);
  Tensor za2 = za, zv2 = zv;
  for (double& x : za2.data()) x *= 2.5;
  for (double& x : zv2.data()) x *= 2.5;
  const Tensor base = readout(za, zv, pa, pv), scaled = readout(za2, zv2, pa, pv);
  for (std::size_t k = 0; k < base.size(); ++k) CHECK(scaled[k] == doctest::Approx(2.5 * base[k]).epsilon(1e-14));
}

TEST_CASE("focal loss worked example and cross-entropy limit") {
  const std::vector<std::uint8_t> pos{1};
  CHECK(std::abs(focal_loss(std::vector<double>{0.9}, pos, 2.0) - 0.0010536) <= 1e-7);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> p(1 + trial % 7);
    std::vector<std::uint8_t> y(p.size());
    for (std::size_t c = 0; c < p.size(); ++c) {
      p[c] = u(rng);
      y[c] = rng() % 2;
    }
    CHECK(std::abs(focal_loss(p, y, 0.0) - oracle::cross_entropy(p, y)) <= 1e-12);
  }
}

TEST_CASE("focal loss clamps and validates") {
  const std::vector<std::uint8_t> pos{1}, neg{0};
  const double worst = focal_loss(std::vector<double>{0.0}, pos, 2.0);
  CHECK(std::isfinite(worst));
  CHECK(worst == doctest::Approx(-std::pow(1.0 - kProbEps, 2.0) * std::log(kProbEps)));
  CHECK(focal_loss(std::vector<double>{1.0}, pos, 2.0) < 1e-20);
  CHECK(focal_loss(std::vector<double>{0.0}, neg, 2.0) < 1e-20);
  CHECK_THROWS_AS(focal_loss(std::vector<double>{0.5}, pos, -1.0), ConfigError);
  CHECK_THROWS_AS(focal_loss(std::vector<double>{0.5, 0.5}, pos, 2.0), DimensionError);
}

TEST_CASE("focal loss never exceeds cross-entropy and shrinks with gamma") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::vector<double> p{u(rng), u(rng)};
    const std::vector<std::uint8_t> y{1, 0};
    const double ce = focal_loss(p, y, 0.0), f1 = focal_loss(p, y, 1.0), f2 = focal_loss(p, y, 2.0);
    CHECK(f1 <= ce);
    CHECK(f2 <= f1);
  }
}

TEST_CASE("prediction probabilities are clamped sigmoids") {
  const auto pred = Prediction::from_logits(std::vector<double>{0.0, 40.0, -40.0, 1.5});
  CHECK(pred.probabilities[0] == 0.5);
  CHECK(pred.probabilities[1] == 1.0 - kProbEps);
  CHECK(pred.probabilities[2] == kProbEps);
  CHECK(pred.probabilities[3] == doctest::Approx(1.0 / (1.0 + std::exp(-1.5))).epsilon(1e-15));
  CHECK(focal_loss(pred, std::vector<std::uint8_t>{1, 1, 0, 1}, 2.0) ==
        doctest::Approx(focal_loss(pred.probabilities, std::vector<std::uint8_t>{1, 1, 0, 1}, 2.0)));
}

TEST_CASE("differentiable head matches finite differences") {
  std::mt19937_64 rng(4);
  const Tensor emb = oracle::random_tensor(rng, 1, 6);
  const std::vector<std::uint8_t> y{1, 0, 1};
  const auto run = [&](const std::vector<Tensor>& p, Tape& tape, std::vector<Var>* leaves) {
    const Var w = tape.parameter(p[0]), b = tape.parameter(p[1]);
    if (leaves) *leaves = {w, b};
    return focal_loss(probabilities(classify(tape.constant_ref(emb), w, b)), y, 2.0);
  };
  const std::vector<Tensor> params{oracle::random_tensor(rng, 6, 3), oracle::random_tensor(rng, 1, 3)};
  Tape tape;
  std::vector<Var> leaves;
  tape.backward(run(params, tape, &leaves));
  const auto fd = oracle::finite_difference(
      [&](const std::vector<Tensor>& p) {
        Tape t;
        return run(p, t, nullptr).value().item();
      },
      params, 1e-5);
  for (std::size_t k = 0; k < 2; ++k) {
    const Tensor g = tape.grad(leaves[k]);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(fd[k][i]).epsilon(1e-6));
  }
}

TEST_CASE("ranking metrics agree with the pairwise oracles") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> level(0, 6);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 40);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = level(rng) / 6.0;
      y[i] = rng() % 3 == 0;
    }
    y[0] = 1;
    y[1] = 0;
    CHECK(average_precision(s, y) == doctest::Approx(oracle::average_precision(s, y)).epsilon(1e-12));
    CHECK(roc_auc(s, y) == doctest::Approx(oracle::roc_auc(s, y)).epsilon(1e-12));
  }
}

TEST_CASE("metric edge cases") {
  const std::vector<std::uint8_t> y{1, 1, 0, 0};
  CHECK(average_precision(std::vector<double>{0.9, 0.8, 0.2, 0.1}, y) == 1.0);
  CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, y) == 1.0);
  CHECK(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y) == 0.0);
  CHECK(roc_auc(std::vector<double>(4, 0.3), y) == 0.5);

  std::vector<double> s{0.3, -1.0, 2.0, 0.7, 0.1};
  const std::vector<std::uint8_t> y2{1, 0, 1, 0, 0};
  std::vector<double> t;
  for (double x : s) t.push_back(std::exp(3.0 * x) + 1.0);
  CHECK(average_precision(s, y2) == average_precision(t, y2));
  CHECK(roc_auc(s, y2) == roc_auc(t, y2));
}

TEST_CASE("report averages over classes with both outcomes") {
  const Tensor scores = Tensor::from_rows({{0.9, 0.1, 0.5}, {0.2, 0.8, 0.5}, {0.6, 0.3, 0.5}});
  const std::vector<std::vector<std::uint8_t>> labels{{1, 0, 0}, {0, 1, 0}, {0, 1, 0}};
  const auto r = compute_metrics(scores, labels);
  CHECK(r.excluded_classes == std::vector<std::size_t>{2});
  REQUIRE(r.per_class.size() == 2);
  CHECK(r.per_class[0].average_precision == 1.0);
  CHECK(r.per_class[1].average_precision == doctest::Approx(oracle::average_precision({0.1, 0.8, 0.3}, {0, 1, 1})));
  CHECK(r.mean_average_precision ==
        doctest::Approx((r.per_class[0].average_precision + r.per_class[1].average_precision) / 2));
}
