// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace jqg::metrics {

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

struct MetricReport {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0, roc_auc = 0;
  Confusion confusion;
  double inference_ms = 0;
  // Set when a precision / recall / F1 denominator was zero.
  bool degenerate = false;
};

// Predicts class 1 iff score >= threshold. Labels must be 0 or 1.
MetricReport confusion_and_prf(std::span<const double> scores, std::span<const std::uint8_t> labels,
                               double threshold = 0.5);

// Mann-Whitney statistic with average ranks for ties. Throws DegenerateError
// unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// confusion_and_prf plus roc_auc.
MetricReport evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels,
                      double threshold = 0.5);

struct MeanStd {
  double mean = 0, std = 0;
};

// Arithmetic mean and sample (n - 1) standard deviation; std is 0 for n = 1.
MeanStd mean_std(std::span<const double> values);

struct AggregateReport {
  MeanStd accuracy, precision, recall, f1, roc_auc, inference_ms;
  std::size_t runs = 0;
};

AggregateReport aggregate_seeds(std::span<const MetricReport> reports);

}  // namespace jqg::metrics
