// SPDX-License-Identifier: Apache-2.0
#include "jqg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jqg/errors.hpp"

namespace jqg::metrics {

namespace {

void check_inputs(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
  for (std::uint8_t l : labels)
    if (l > 1) throw DomainError("labels must be 0 or 1");
}

}  // namespace

MetricReport confusion_and_prf(std::span<const double> scores, std::span<const std::uint8_t> labels,
                               double threshold) {
  check_inputs(scores, labels);
  MetricReport r;
  Confusion& c = r.confusion;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i])
      pred ? ++c.tp : ++c.fn;
    else
      pred ? ++c.fp : ++c.tn;
  }
  const auto ratio = [&r](std::size_t num, std::size_t den) {
    if (den == 0) {
      r.degenerate = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  r.accuracy = ratio(c.tp + c.tn, c.total());
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.recall = ratio(c.tp, c.tp + c.fn);
  if (r.precision + r.recall > 0)
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  else
    r.degenerate = true;
  return r;
}

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_inputs(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Ranks are 1-based; a tie group spanning positions [i, j) shares (i + j + 1) / 2.
  // Twice the rank keeps everything integral.
  std::uint64_t twice_rank_sum = 0, n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t twice_rank = i + j + 1;
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) {
        twice_rank_sum += twice_rank;
        ++n_pos;
      }
    i = j;
  }
  const std::uint64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DegenerateError("roc_auc needs both classes");
  // (sum ranks - n+(n+ + 1)/2) counts wins plus half ties; doubled it is an integer.
  const std::uint64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(twice_u) / 2.0 / static_cast<double>(n_pos * n_neg);
}

MetricReport evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels,
                      double threshold) {
  MetricReport r = confusion_and_prf(scores, labels, threshold);
  r.roc_auc = roc_auc(scores, labels);
  return r;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw DomainError("mean_std of an empty set");
  MeanStd out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

AggregateReport aggregate_seeds(std::span<const MetricReport> reports) {
  const auto pick = [&](double MetricReport::*field) {
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(r.*field);
    return mean_std(v);
  };
  AggregateReport a;
  a.accuracy = pick(&MetricReport::accuracy);
  a.precision = pick(&MetricReport::precision);
  a.recall = pick(&MetricReport::recall);
  a.f1 = pick(&MetricReport::f1);
  a.roc_auc = pick(&MetricReport::roc_auc);
  a.inference_ms = pick(&MetricReport::inference_ms);
  a.runs = reports.size();
  return a;
}

}  // namespace jqg::metrics
