// SPDX-License-Identifier: Apache-2.0
#pragma once

// One-factor-at-a-time sweeps: one training run per axis value, everything
// else fixed, a single fixed seed.

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jqg/config.hpp"
#include "jqg/datastore.hpp"
#include "jqg/training.hpp"

namespace jqg::sweep {

enum class Axis { DatasetSize, ModelSize, BatchSize, LearningRate, Optimizer, WeightDecay, Epochs, Dropout };
Axis parse_axis(std::string_view name);
std::string_view to_string(Axis axis);

// `base` with the single setting behind `axis` replaced. model_size sets the
// ViT embedding width; dataset_size the training fraction.
config::ExperimentConfig with_value(const config::ExperimentConfig& base, Axis axis, std::string_view value);

struct SweepRow {
  std::string value;
  training::FitResult fit;
  std::size_t params = 0;
};

std::vector<SweepRow> run_sweep(const config::ExperimentConfig& base, Axis axis,
                                std::span<const std::string> values, const training::SampleSet& train,
                                const training::SampleSet& val, const training::EpochCallback& on_epoch = {});

// CSV rows labelled "<axis>=<value>" with single-run (std 0) cells.
std::vector<datastore::CsvRow> to_csv_rows(Axis axis, std::span<const SweepRow> rows);

}  // namespace jqg::sweep
