// SPDX-License-Identifier: Apache-2.0
#include "jqg/sweep.hpp"

#include "jqg/errors.hpp"

namespace jqg::sweep {

namespace {

struct AxisName {
  Axis axis;
  std::string_view name, key;
};

constexpr AxisName kAxes[] = {
    {Axis::DatasetSize, "dataset_size", "dataset_fraction"},
    {Axis::ModelSize, "model_size", "embed_dim"},
    {Axis::BatchSize, "batch_size", "batch_size"},
    {Axis::LearningRate, "learning_rate", "head_lr"},
    {Axis::Optimizer, "optimizer", "optimizer"},
    {Axis::WeightDecay, "weight_decay", "weight_decay"},
    {Axis::Epochs, "epochs", "epochs"},
    {Axis::Dropout, "dropout", "dropout"},
};

}  // namespace

Axis parse_axis(std::string_view name) {
  for (const auto& a : kAxes)
    if (a.name == name) return a.axis;
  throw DomainError("unknown sweep axis '" + std::string(name) + "'");
}

std::string_view to_string(Axis axis) {
  for (const auto& a : kAxes)
    if (a.axis == axis) return a.name;
  return "?";
}

config::ExperimentConfig with_value(const config::ExperimentConfig& base, Axis axis, std::string_view value) {
  config::ExperimentConfig c = base;
  for (const auto& a : kAxes)
    if (a.axis == axis) c.set(a.key, value);
  c.validate();
  return c;
}

std::vector<SweepRow> run_sweep(const config::ExperimentConfig& base, Axis axis,
                                std::span<const std::string> values, const training::SampleSet& train,
                                const training::SampleSet& val, const training::EpochCallback& on_epoch) {
  if (values.empty()) throw DomainError("sweep needs at least one value");
  std::vector<config::ExperimentConfig> configs;
  for (const auto& v : values) configs.push_back(with_value(base, axis, v));
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& c = configs[i];
    const training::SampleSet subset = training::take_fraction(train, c.dataset_fraction);
    SweepRow row;
    row.value = values[i];
    row.fit = training::fit(subset, val, c.model, c.train, c.augment, c.train.seeds.front(), on_epoch);
    row.params = row.fit.model->registry().count();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<datastore::CsvRow> to_csv_rows(Axis axis, std::span<const SweepRow> rows) {
  std::vector<datastore::CsvRow> out;
  for (const auto& r : rows) {
    datastore::CsvRow c;
    c.model = std::string(to_string(axis)) + "=" + r.value;
    c.report = metrics::aggregate_seeds(std::span(&r.fit.best, 1));
    c.params = r.params;
    c.train_seconds = r.fit.record.train_seconds;
    c.inference_ms = r.fit.best.inference_ms;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace jqg::sweep
