#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tmac/tensor.hpp"

namespace tmac {

struct ClassMetric {
  std::size_t class_index = 0;
  double average_precision = 0.0;
  double roc_auc = 0.0;
};

struct MetricReport {
  double mean_average_precision = 0.0;  ///< macro average over included classes
  double mean_roc_auc = 0.0;
  std::vector<ClassMetric> per_class;
  /// Classes without at least one positive and one negative sample.
  std::vector<std::size_t> excluded_classes;
};

/// Precision averaged over the positives of a descending-score ranking; ties
/// rank the lower sample index first. Requires at least one positive.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Area under the ROC curve by the trapezoid rule, tied scores forming one
/// step. Requires at least one positive and one negative.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// `scores` is (n_samples x n_classes); `labels[s]` is the multi-hot row of sample s.
MetricReport compute_metrics(const Tensor& scores,
                             const std::vector<std::vector<std::uint8_t>>& labels);

}  // namespace tmac
