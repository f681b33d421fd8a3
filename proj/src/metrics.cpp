#include "tmac/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "tmac/error.hpp"

namespace tmac {

namespace {

std::vector<std::size_t> ranking(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

void check_lengths(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("metric: " + std::to_string(scores.size()) + " scores for " +
                         std::to_string(labels.size()) + " labels");
  }
}

}  // namespace

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_lengths(scores, labels);
  const auto order = ranking(scores);
  std::size_t hits = 0;
  double total = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!labels[order[rank]]) continue;
    ++hits;
    total += static_cast<double>(hits) / static_cast<double>(rank + 1);
  }
  if (hits == 0) throw DataError("average precision needs at least one positive");
  return total / static_cast<double>(hits);
}

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_lengths(scores, labels);
  const auto order = ranking(scores);
  const auto positives = static_cast<double>(std::count_if(
      labels.begin(), labels.end(), [](std::uint8_t v) { return v != 0; }));
  const double negatives = static_cast<double>(labels.size()) - positives;
  if (positives == 0 || negatives == 0) {
    throw DataError("ROC AUC needs at least one positive and one negative");
  }
  double area = 0.0, tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    double dtp = 0.0, dfp = 0.0;
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] ? dtp : dfp) += 1.0;
      ++i;
    }
    area += dfp * (tp + dtp / 2.0);
    tp += dtp;
    fp += dfp;
  }
  return area / (positives * negatives);
}

MetricReport compute_metrics(const Tensor& scores,
                             const std::vector<std::vector<std::uint8_t>>& labels) {
  if (scores.rows() != labels.size()) {
    throw DimensionError("compute_metrics: " + std::to_string(scores.rows()) +
                         " score rows for " + std::to_string(labels.size()) + " samples");
  }
  MetricReport report;
  const std::size_t n = scores.rows();
  std::vector<double> col(n);
  std::vector<std::uint8_t> lab(n);
  for (std::size_t c = 0; c < scores.cols(); ++c) {
    std::size_t pos = 0;
    for (std::size_t s = 0; s < n; ++s) {
      if (labels[s].size() != scores.cols()) {
        throw DimensionError("compute_metrics: label row " + std::to_string(s) + " has " +
                             std::to_string(labels[s].size()) + " classes");
      }
      col[s] = scores(s, c);
      lab[s] = labels[s][c] ? 1 : 0;
      pos += lab[s];
    }
    if (pos == 0 || pos == n) {
      report.excluded_classes.push_back(c);
      continue;
    }
    report.per_class.push_back({c, average_precision(col, lab), roc_auc(col, lab)});
  }
  if (!report.per_class.empty()) {
    for (const auto& m : report.per_class) {
      report.mean_average_precision += m.average_precision;
      report.mean_roc_auc += m.roc_auc;
    }
    report.mean_average_precision /= static_cast<double>(report.per_class.size());
    report.mean_roc_auc /= static_cast<double>(report.per_class.size());
  }
  return report;
}

}  // namespace tmac
