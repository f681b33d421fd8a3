#pragma once

// Reference implementations used only by tests. They are deliberately
// written the slow, obvious way and share no code with the library.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "tmac/data_io.hpp"
#include "tmac/tensor.hpp"

namespace oracle {

/// Sorts every candidate by (|dt|, timestamp, index) and takes the first m.
std::vector<std::size_t> nearest(const std::vector<std::uint32_t>& candidates, std::uint32_t t,
                                 std::size_t m, std::optional<std::size_t> exclude);

/// exp(-(t_max - t_j + 1) / (t_max - t_min + 1)) straight from the definition.
double decay_weight(std::uint32_t t_max, std::uint32_t t_min, std::uint32_t t_j);

/// Central differences of f at every entry of every tensor in `params`.
std::vector<tmac::Tensor> finite_difference(const std::function<double(const std::vector<tmac::Tensor>&)>& f,
                                            std::vector<tmac::Tensor> params, double h);

/// Precision at each positive from pairwise rank counting (no sorting).
double average_precision(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);
/// Fraction of positive/negative pairs ranked correctly, ties counting half.
double roc_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

/// Binary cross-entropy summed over classes, with the library's clamping.
double cross_entropy(const std::vector<double>& probs, const std::vector<std::uint8_t>& labels);

/// Nearest class-mean classifier on time-pooled features (per-event mean of
/// audio rows, concatenated with the mean of video rows). Returns test accuracy.
double centroid_accuracy(const std::vector<tmac::EventRecord>& train,
                         const std::vector<tmac::EventRecord>& test);

tmac::Tensor random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0);

/// Strictly increasing random timestamps.
std::vector<std::uint32_t> random_timestamps(std::mt19937_64& rng, std::size_t n, std::uint32_t max_gap);

tmac::EventRecord random_record(std::mt19937_64& rng, std::size_t index);

}  // namespace oracle
