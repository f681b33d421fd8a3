#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace oracle {

std::vector<std::size_t> nearest(const std::vector<std::uint32_t>& candidates, std::uint32_t t,
                                 std::size_t m, std::optional<std::size_t> exclude) {
  std::vector<std::tuple<std::int64_t, std::uint32_t, std::size_t>> keyed;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (exclude && *exclude == i) continue;
    const std::int64_t d = std::llabs(static_cast<std::int64_t>(candidates[i]) - static_cast<std::int64_t>(t));
    keyed.emplace_back(d, candidates[i], i);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < keyed.size() && k < m; ++k) out.push_back(std::get<2>(keyed[k]));
  return out;
}

double decay_weight(std::uint32_t t_max, std::uint32_t t_min, std::uint32_t t_j) {
  const double num = static_cast<double>(t_max) - static_cast<double>(t_j) + 1.0;
  const double den = static_cast<double>(t_max) - static_cast<double>(t_min) + 1.0;
  return std::exp(-num / den);
}

std::vector<tmac::Tensor> finite_difference(const std::function<double(const std::vector<tmac::Tensor>&)>& f,
                                            std::vector<tmac::Tensor> params, double h) {
  std::vector<tmac::Tensor> grads;
  for (auto& p : params) grads.emplace_back(p.rows(), p.cols());
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double saved = params[k][i];
      params[k][i] = saved + h;
      const double up = f(params);
      params[k][i] = saved - h;
      const double down = f(params);
      params[k][i] = saved;
      grads[k][i] = (up - down) / (2.0 * h);
    }
  }
  return grads;
}

double average_precision(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  const std::size_t n = scores.size();
  double total = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!labels[i]) continue;
    ++positives;
    // Rank of i: everything strictly above it, plus ties at a lower index, plus itself.
    std::size_t rank = 0, hits = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const bool ahead = scores[j] > scores[i] || (scores[j] == scores[i] && j <= i);
      if (!ahead) continue;
      ++rank;
      hits += labels[j] ? 1 : 0;
    }
    total += static_cast<double>(hits) / static_cast<double>(rank);
  }
  return total / static_cast<double>(positives);
}

double roc_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  double good = 0.0;
  std::size_t pairs = 0;
  for (std::size_t p = 0; p < scores.size(); ++p) {
    if (!labels[p]) continue;
    for (std::size_t q = 0; q < scores.size(); ++q) {
      if (labels[q]) continue;
      ++pairs;
      if (scores[p] > scores[q]) good += 1.0;
      else if (scores[p] == scores[q]) good += 0.5;
    }
  }
  return good / static_cast<double>(pairs);
}

double cross_entropy(const std::vector<double>& probs, const std::vector<std::uint8_t>& labels) {
  double loss = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    const double p = std::clamp(probs[c], 1e-7, 1.0 - 1e-7);
    loss -= labels[c] ? std::log(p) : std::log(1.0 - p);
  }
  return loss;
}

namespace {

std::vector<double> pooled(const tmac::EventRecord& r) {
  std::vector<double> out(r.audio.dim + r.video.dim, 0.0);
  for (std::size_t s = 0; s < r.audio.count(); ++s)
    for (std::size_t d = 0; d < r.audio.dim; ++d) out[d] += r.audio.features[s * r.audio.dim + d];
  for (std::size_t d = 0; d < r.audio.dim; ++d) out[d] /= static_cast<double>(r.audio.count());
  for (std::size_t s = 0; s < r.video.count(); ++s)
    for (std::size_t d = 0; d < r.video.dim; ++d) out[r.audio.dim + d] += r.video.features[s * r.video.dim + d];
  for (std::size_t d = 0; d < r.video.dim; ++d) out[r.audio.dim + d] /= static_cast<double>(r.video.count());
  return out;
}

std::size_t first_class(const tmac::EventRecord& r) {
  return static_cast<std::size_t>(std::find(r.label.begin(), r.label.end(), 1) - r.label.begin());
}

}  // namespace

double centroid_accuracy(const std::vector<tmac::EventRecord>& train,
                         const std::vector<tmac::EventRecord>& test) {
  std::map<std::size_t, std::pair<std::vector<double>, std::size_t>> sums;
  for (const auto& r : train) {
    auto v = pooled(r);
    auto& [acc, count] = sums[first_class(r)];
    if (acc.empty()) acc.assign(v.size(), 0.0);
    for (std::size_t d = 0; d < v.size(); ++d) acc[d] += v[d];
    ++count;
  }
  std::size_t correct = 0;
  for (const auto& r : test) {
    const auto v = pooled(r);
    double best = INFINITY;
    std::size_t guess = 0;
    for (const auto& [cls, entry] : sums) {
      double dist = 0.0;
      for (std::size_t d = 0; d < v.size(); ++d) {
        const double diff = v[d] - entry.first[d] / static_cast<double>(entry.second);
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        guess = cls;
      }
    }
    correct += guess == first_class(r) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

tmac::Tensor random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  tmac::Tensor t(rows, cols);
  for (double& x : t.data()) x = normal(rng);
  return t;
}

std::vector<std::uint32_t> random_timestamps(std::mt19937_64& rng, std::size_t n, std::uint32_t max_gap) {
  std::uniform_int_distribution<std::uint32_t> gap(1, max_gap);
  std::vector<std::uint32_t> out;
  std::uint32_t t = gap(rng) - 1;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(t);
    t += gap(rng);
  }
  return out;
}

tmac::EventRecord random_record(std::mt19937_64& rng, std::size_t index) {
  std::uniform_int_distribution<std::size_t> count(1, 12);
  std::uniform_int_distribution<std::uint32_t> dim(1, 9);
  std::uniform_int_distribution<std::size_t> classes(1, 20);
  std::normal_distribution<float> normal(0.0f, 3.0f);
  tmac::EventRecord r;
  r.event_id = "ev_" + std::to_string(index) + (index % 3 == 0 ? "_\xc3\xa9t\xc3\xa9" : "");
  r.label.assign(classes(rng), 0);
  std::uniform_int_distribution<std::size_t> pick(0, r.label.size() - 1);
  r.label[pick(rng)] = 1;
  for (auto& l : r.label) l = l || (rng() % 4 == 0);
  for (tmac::RecordBlock* b : {&r.audio, &r.video}) {
    b->dim = dim(rng);
    b->timestamps_ms = random_timestamps(rng, count(rng), 5000);
    for (std::size_t i = 0; i < b->timestamps_ms.size() * b->dim; ++i) b->features.push_back(normal(rng));
  }
  return r;
}

}  // namespace oracle
