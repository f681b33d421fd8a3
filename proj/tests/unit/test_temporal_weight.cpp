#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tmac/error.hpp"
#include "tmac/temporal_weight.hpp"

using namespace tmac;

namespace {

NeighborhoodView view(const std::vector<std::uint32_t>& ts) {
  NeighborhoodView v;
  for (std::size_t i = 0; i < ts.size(); ++i) v.neighbors.push_back({{Modality::audio, i + 1}, ts[i]});
  return v;
}

ModalityBlock block(std::vector<std::uint32_t> ts, std::size_t dim) {
  ModalityBlock b;
  b.features = Tensor(ts.size(), dim, 1.0);
  b.timestamps_ms = std::move(ts);
  return b;
}

EventGraph sample_graph() {
  GraphConfig c;
  c.m_audio = 3;
  c.m_video = 2;
  c.m_cross = 3;
  c.audio_dim = 2;
  c.video_dim = 2;
  return build_event_graph(block({0, 196, 392, 588, 784}, 2), block({125, 375, 625}, 2), {1}, c);
}

}  // namespace

TEST_CASE("worked examples") {
  const auto w = weight_neighborhood(view({1, 2, 3}));
  CHECK(w[0] == doctest::Approx(0.36788).epsilon(1e-5));
  CHECK(w[1] == doctest::Approx(0.51342).epsilon(1e-5));
  CHECK(w[2] == doctest::Approx(0.71653).epsilon(1e-5));

  for (double x : weight_neighborhood(view({7, 7, 7}))) CHECK(x == std::exp(-1.0));

  const auto far = weight_neighborhood(view({0, 1000}));
  CHECK(far[0] == std::exp(-1.0));
  CHECK(far[1] == doctest::Approx(0.99900).epsilon(1e-5));
}

TEST_CASE("weights match the scalar definition, stay in range and grow with recency") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> count(1, 10);
  std::uniform_int_distribution<std::uint32_t> stamp(0, 20000);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::uint32_t> ts(count(rng));
    for (auto& t : ts) t = stamp(rng);
    const auto w = weight_neighborhood(view(ts));
    const auto [lo, hi] = std::minmax_element(ts.begin(), ts.end());
    for (std::size_t j = 0; j < ts.size(); ++j) {
      CHECK(w[j] == doctest::Approx(oracle::decay_weight(*hi, *lo, ts[j])).epsilon(1e-14));
      CHECK(w[j] >= std::exp(-1.0));
      CHECK(w[j] < 1.0);
      if (ts[j] == *lo) CHECK(w[j] == std::exp(-1.0));
      for (std::size_t k = 0; k < ts.size(); ++k) {
        if (ts[j] < ts[k]) CHECK(w[j] < w[k]);
        if (ts[j] == ts[k]) CHECK(w[j] == w[k]);
      }
    }
  }
}

TEST_CASE("translation invariance is exact") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const auto ts = oracle::random_timestamps(rng, 8, 900);
    auto shifted = ts;
    const std::uint32_t c = static_cast<std::uint32_t>(rng() % 1'000'000);
    for (auto& t : shifted) t += c;
    CHECK(weight_neighborhood(view(ts)) == weight_neighborhood(view(shifted)));
  }
}

TEST_CASE("empty neighborhood is rejected") {
  CHECK_THROWS_AS(weight_neighborhood(NeighborhoodView{}), std::invalid_argument);
}

TEST_CASE("variant tags") {
  CHECK(parse_variant("full") == Variant::full);
  CHECK(parse_variant("non_tmg") == Variant::non_tmg);
  CHECK(parse_variant("non_intraT") == Variant::non_intra_t);
  CHECK(parse_variant("non_interT") == Variant::non_inter_t);
  for (Variant v : kAllVariants) CHECK(parse_variant(to_string(v)) == v);
  CHECK_THROWS_AS(parse_variant("TMac"), ConfigError);
}

TEST_CASE("variants switch weighting per structure") {
  const auto g = sample_graph();
  const auto all_unit = [](const WeightedAdjacency& a) {
    for (const auto& r : a.rows)
      for (const auto& n : r.neighbors)
        if (n.weight != 1.0) return false;
    return true;
  };
  const auto same = [](const WeightedAdjacency& a, const WeightedAdjacency& b) {
    for (std::size_t r = 0; r < a.rows.size(); ++r)
      for (std::size_t k = 0; k < a.rows[r].neighbors.size(); ++k)
        if (a.rows[r].neighbors[k].weight != b.rows[r].neighbors[k].weight) return false;
    return true;
  };
  const auto full = weight_graph(g, Variant::full);
  const auto none = weight_graph(g, Variant::non_tmg);
  const auto intra = weight_graph(g, Variant::non_intra_t);
  const auto inter = weight_graph(g, Variant::non_inter_t);

  CHECK(all_unit(none.audio));
  CHECK(all_unit(none.video));
  CHECK(all_unit(none.cross));
  CHECK(!all_unit(full.audio));
  CHECK(!all_unit(full.cross));

  CHECK(same(intra.cross, full.cross));
  CHECK(all_unit(intra.audio));
  CHECK(all_unit(intra.video));
  CHECK(!same(intra.audio, full.audio));

  CHECK(same(inter.audio, full.audio));
  CHECK(same(inter.video, full.video));
  CHECK(all_unit(inter.cross));
}

TEST_CASE("single-timestamp neighborhoods give e^-1 and the same in-row ratios as non_tmg") {
  auto g = sample_graph();
  for (auto* adj : {&g.audio_adj, &g.video_adj, &g.cross_adj})
    for (auto& row : adj->rows)
      for (auto& n : row.neighbors) n.edge_timestamp_ms = 500;
  const auto full = weight_graph(g, Variant::full);
  const auto none = weight_graph(g, Variant::non_tmg);
  for (auto pair : {&WeightedGraph::audio, &WeightedGraph::video, &WeightedGraph::cross}) {
    const auto& a = full.*pair;
    const auto& b = none.*pair;
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
      for (std::size_t k = 0; k < a.rows[r].neighbors.size(); ++k) {
        CHECK(a.rows[r].neighbors[k].weight == std::exp(-1.0));
        CHECK(a.rows[r].neighbors[k].weight / a.rows[r].neighbors[0].weight ==
              b.rows[r].neighbors[k].weight / b.rows[r].neighbors[0].weight);
      }
    }
  }
}
