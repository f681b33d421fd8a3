#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tmac/layers.hpp"
#include "tmac/model.hpp"

using namespace tmac;

namespace {

WeightedRow row(std::size_t src, Modality target, std::vector<std::pair<std::size_t, double>> nbs) {
  WeightedRow r;
  r.source = {Modality::audio, src};
  for (auto [j, w] : nbs) r.neighbors.push_back({{target, j}, 0, w});
  return r;
}

ModalityBlock block(std::vector<std::uint32_t> ts, std::size_t dim, std::mt19937_64& rng) {
  ModalityBlock b;
  b.features = oracle::random_tensor(rng, ts.size(), dim);
  b.timestamps_ms = std::move(ts);
  return b;
}

EventGraph small_graph(std::mt19937_64& rng, std::size_t dim_a, std::size_t dim_v) {
  GraphConfig c;
  c.m_audio = 3;
  c.m_video = 3;
  c.m_cross = 2;
  c.audio_dim = dim_a;
  c.video_dim = dim_v;
  return build_event_graph(block({0, 196, 392, 588, 784, 980}, dim_a, rng),
                           block({125, 375, 625, 875}, dim_v, rng), {1}, c);
}

/// Plain GAT written out per destination, without any temporal bias.
Tensor plain_gat(const GatLayerParams& p, const WeightedAdjacency& cross, const Tensor& z_src,
                 const Tensor& z_dst) {
  const Tensor ws = matmul(z_src, p.weight);
  const Tensor wd = matmul(z_dst, p.dst_weight.empty() ? p.weight : p.dst_weight);
  const std::size_t d = ws.cols();
  Tensor out(z_dst.rows(), d);
  for (const auto& r : cross.rows) {
    const std::size_t i = r.source.index;
    if (r.neighbors.empty()) continue;
    std::vector<double> e;
    for (const auto& n : r.neighbors) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += p.attention[k] * wd(i, k) + p.attention[d + k] * ws(n.node.index, k);
      e.push_back(s > 0 ? s : p.leaky_slope * s);
    }
    const double top = *std::max_element(e.begin(), e.end());
    double z = 0.0;
    for (double& x : e) z += (x = std::exp(x - top));
    for (std::size_t q = 0; q < e.size(); ++q)
      for (std::size_t k = 0; k < d; ++k) out(i, k) += e[q] / z * ws(r.neighbors[q].node.index, k);
    for (std::size_t k = 0; k < d; ++k) out(i, k) = std::max(0.0, out(i, k));
  }
  return out;
}

std::vector<Tensor*> tensors(LayerStack& s) {
  std::vector<Tensor*> out;
  for (auto& l : s.audio_gcn) out.push_back(&l.weight);
  for (auto& l : s.video_gcn) out.push_back(&l.weight);
  for (auto& l : s.cross_gat) {
    out.push_back(&l.weight);
    if (!l.dst_weight.empty()) out.push_back(&l.dst_weight);
    out.push_back(&l.attention);
  }
  return out;
}

void randomize(LayerStack& s, std::mt19937_64& rng, double scale) {
  for (Tensor* t : tensors(s)) *t = oracle::random_tensor(rng, t->rows(), t->cols(), scale);
}

}  // namespace

TEST_CASE("isolated node with identity weights passes its input through") {
  WeightedAdjacency adj;
  adj.rows.push_back(row(0, Modality::audio, {}));
  GcnLayerParams p{Tensor::identity(3)};
  const Tensor z = Tensor::from_rows({{0.5, 2.0, 0.0}});
  CHECK(gcn_forward(p, adj, z) == z);
}

TEST_CASE("two nodes with unit weights average with the self-loop") {
  WeightedAdjacency adj;
  adj.rows.push_back(row(0, Modality::audio, {{1, 1.0}}));
  adj.rows.push_back(row(1, Modality::audio, {{0, 1.0}}));
  GcnLayerParams p{Tensor::identity(2)};
  const Tensor z = Tensor::from_rows({{1.0, 3.0}, {5.0, 2.0}});
  const Tensor out = gcn_forward(p, adj, z);
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(out(r, 0) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(out(r, 1) == doctest::Approx(2.5).epsilon(1e-15));
  }
}

TEST_CASE("normalized adjacency rows sum to one with the row maximum on the diagonal") {
  WeightedAdjacency adj;
  adj.rows.push_back(row(0, Modality::audio, {{1, 0.5}, {2, 0.8}}));
  adj.rows.push_back(row(1, Modality::audio, {}));
  adj.rows.push_back(row(2, Modality::audio, {{0, 0.4}}));
  const Tensor a = normalized_adjacency(adj, 3);
  CHECK(a(0, 0) == doctest::Approx(0.8 / 2.1));
  CHECK(a(0, 1) == doctest::Approx(0.5 / 2.1));
  CHECK(a(1, 1) == 1.0);
  CHECK(a(2, 0) == doctest::Approx(0.5));
  for (std::size_t r = 0; r < 3; ++r) CHECK(a(r, 0) + a(r, 1) + a(r, 2) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("temporal weights change GCN outputs") {
  std::mt19937_64 rng(8);
  const auto g = small_graph(rng, 3, 3);
  GcnLayerParams p{oracle::random_tensor(rng, 3, 4)};
  const auto full = weight_graph(g, Variant::full);
  const auto none = weight_graph(g, Variant::non_tmg);
  CHECK(!(gcn_forward(p, full.audio, g.audio_features) == gcn_forward(p, none.audio, g.audio_features)));
}

TEST_CASE("attention coefficients") {
  GatLayerParams p;
  p.weight = Tensor::identity(2);
  p.attention = Tensor(4, 1, 0.0);
  const Tensor src = Tensor::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  const Tensor dst(1, 2, 0.3);

  SUBCASE("single neighbor takes all attention") {
    WeightedAdjacency cross;
    cross.rows.push_back(row(0, Modality::video, {{1, 0.4}}));
    p.attention = Tensor::from_rows({{2.0}, {-1.0}, {0.5}, {3.0}});
    const Tensor out = gat_forward(p, cross, src, dst);
    CHECK(out(0, 0) == 0.0);
    CHECK(out(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("equal weights split evenly") {
    WeightedAdjacency cross;
    cross.rows.push_back(row(0, Modality::video, {{0, 0.6}, {1, 0.6}}));
    const Tensor out = gat_forward(p, cross, src, dst);
    CHECK(out(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(out(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("temporal weights bias the softmax") {
    WeightedAdjacency cross;
    cross.rows.push_back(row(0, Modality::video, {{0, std::exp(-1.0)}, {1, std::exp(-0.5)}}));
    const Tensor out = gat_forward(p, cross, src, dst);
    CHECK(out(0, 0) == doctest::Approx(0.3775).epsilon(1e-4));
    CHECK(out(0, 1) == doctest::Approx(0.6225).epsilon(1e-4));
  }
  SUBCASE("destination without neighbors gets zeros") {
    WeightedAdjacency cross;
    cross.rows.push_back(row(0, Modality::video, {}));
    CHECK(gat_forward(p, cross, src, dst) == Tensor(1, 2));
  }
}

TEST_CASE("attention rows sum to one") {
  std::mt19937_64 rng(2);
  const std::size_t n_src = 6;
  GatLayerParams p;
  p.weight = Tensor::identity(n_src);
  p.dst_weight = oracle::random_tensor(rng, 3, n_src);
  p.attention = oracle::random_tensor(rng, 2 * n_src, 1);
  WeightedAdjacency cross;
  std::uniform_real_distribution<double> w(std::exp(-1.0), 1.0);
  for (std::size_t i = 0; i < 5; ++i) {
    std::vector<std::pair<std::size_t, double>> nbs;
    for (std::size_t j = 0; j <= i; ++j) nbs.push_back({(i + j) % n_src, w(rng)});
    cross.rows.push_back(row(i, Modality::video, nbs));
  }
  const Tensor out = gat_forward(p, cross, Tensor::identity(n_src), oracle::random_tensor(rng, 5, 3));
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (double x : out.row(i)) s += x;
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("unit weights reduce to plain GAT") {
  std::mt19937_64 rng(13);
  const auto g = small_graph(rng, 5, 7);
  GatLayerParams p;
  p.weight = oracle::random_tensor(rng, 7, 4);
  p.dst_weight = oracle::random_tensor(rng, 5, 4);
  p.attention = oracle::random_tensor(rng, 8, 1);
  const auto none = weight_graph(g, Variant::non_tmg);
  const Tensor got = gat_forward(p, none.cross, g.video_features, g.audio_features);
  const Tensor want = plain_gat(p, none.cross, g.video_features, g.audio_features);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  const auto full = weight_graph(g, Variant::full);
  CHECK(!(gat_forward(p, full.cross, g.video_features, g.audio_features) == got));
}

TEST_CASE("stack output shapes at the full-size configuration") {
  std::vector<std::uint32_t> ta, tv;
  for (std::uint32_t k = 0; k < 40; ++k) ta.push_back(125 + 250 * k);
  for (std::uint32_t k = 0; k < 100; ++k) tv.push_back(50 + 100 * k);
  std::mt19937_64 rng(1);
  GraphConfig c;
  const auto g = build_event_graph(block(ta, 128, rng), block(tv, 1024, rng), {1}, c);
  const auto pg = prepare_graph(g, Variant::full);
  const LayerStack stack = make_layer_stack(128, 1024, 512, 4);
  Tape tape;
  const auto out = stack_forward(bind(tape, stack), pg.audio_adj, pg.video_adj, pg.cross,
                                 tape.constant_ref(pg.audio_features), tape.constant_ref(pg.video_features));
  CHECK(out.audio.value().shape_string() == Tensor(40, 512).shape_string());
  CHECK(out.video.value().shape_string() == Tensor(100, 512).shape_string());
}

TEST_CASE("one layer of zero weights outputs zeros") {
  std::mt19937_64 rng(3);
  const auto g = small_graph(rng, 3, 5);
  const auto pg = prepare_graph(g, Variant::full);
  const LayerStack stack = make_layer_stack(3, 5, 4, 1);
  Tape tape;
  const auto out = stack_forward(bind(tape, stack), pg.audio_adj, pg.video_adj, pg.cross,
                                 tape.constant_ref(pg.audio_features), tape.constant_ref(pg.video_features));
  CHECK(out.audio.value() == Tensor(6, 4));
  CHECK(out.video.value() == Tensor(4, 4));
}

TEST_CASE("two-layer stack gradients match finite differences") {
  std::mt19937_64 rng(17);
  const auto g = small_graph(rng, 3, 4);
  const auto pg = prepare_graph(g, Variant::full);
  LayerStack stack = make_layer_stack(3, 4, 5, 2);
  randomize(stack, rng, 0.7);

  const auto loss_of = [&](const LayerStack& s, Tape& tape, LayerStackVars* keep) {
    auto vars = bind(tape, s);
    const auto out = stack_forward(vars, pg.audio_adj, pg.video_adj, pg.cross,
                                   tape.constant_ref(pg.audio_features), tape.constant_ref(pg.video_features));
    if (keep) *keep = vars;
    return add(sum(mul(out.audio, out.audio)), scale(sum(out.video), 0.5));
  };

  Tape tape;
  LayerStackVars vars;
  tape.backward(loss_of(stack, tape, &vars));
  std::vector<Tensor> analytic;
  for (auto& l : vars.audio_gcn) analytic.push_back(tape.grad(l.weight));
  for (auto& l : vars.video_gcn) analytic.push_back(tape.grad(l.weight));
  for (auto& l : vars.cross_gat) {
    analytic.push_back(tape.grad(l.weight));
    if (l.dst_weight) analytic.push_back(tape.grad(*l.dst_weight));
    analytic.push_back(tape.grad(l.attention));
  }

  std::vector<Tensor> flat;
  for (Tensor* t : tensors(stack)) flat.push_back(*t);
  const auto numeric = oracle::finite_difference(
      [&](const std::vector<Tensor>& values) {
        LayerStack s = stack;
        auto slots = tensors(s);
        for (std::size_t k = 0; k < slots.size(); ++k) *slots[k] = values[k];
        Tape t;
        return loss_of(s, t, nullptr).value().item();
      },
      flat, 1e-5);

  REQUIRE(analytic.size() == numeric.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k)
    for (std::size_t i = 0; i < analytic[k].size(); ++i) {
      const double a = analytic[k][i], n = numeric[k][i];
      worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}));
    }
  CHECK(worst <= 1e-4);
}
