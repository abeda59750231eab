// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary dataset and checkpoint files, the stats text file and the metrics
// CSV. All binary fields are little-endian regardless of host.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "jqg/detector_image.hpp"
#include "jqg/metrics.hpp"
#include "jqg/models.hpp"
#include "jqg/preprocess.hpp"

namespace jqg::datastore {

namespace fs = std::filesystem;

inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::uint16_t kCheckpointVersion = 1;
// magic(4) version(2) n(4) height(2) width(2) channels(1)
inline constexpr std::size_t kDatasetHeaderBytes = 15;

struct Dataset {
  std::size_t channels = 0, height = 0, width = 0;
  std::vector<std::uint8_t> labels;
  std::vector<float> data;  // [n][C][H][W]

  std::size_t size() const { return labels.size(); }
  std::size_t sample_size() const { return channels * height * width; }
  std::span<const float> sample(std::size_t i) const {
    return std::span<const float>(data).subspan(i * sample_size(), sample_size());
  }
};

Dataset from_windows(std::span<const detector::JetWindow> windows);
// Requires 3 x 125 x 125 samples.
std::vector<detector::JetWindow> to_windows(const Dataset& dataset);

std::vector<std::uint8_t> encode_dataset(const Dataset& dataset);
// Validates magic, version and the exact size before parsing.
Dataset decode_dataset(std::span<const std::uint8_t> bytes);
void write_dataset(const fs::path& path, const Dataset& dataset);
Dataset read_dataset(const fs::path& path);

// "mu: m0 m1 m2\nsigma: s0 s1 s2\n" with shortest round-trip formatting.
std::string format_stats(const preprocess::ChannelStats& stats);
preprocess::ChannelStats parse_stats(const std::string& text);
void write_stats(const fs::path& path, const preprocess::ChannelStats& stats);
preprocess::ChannelStats read_stats(const fs::path& path);

struct CheckpointEntry {
  std::string name;
  ad::Shape shape;
  std::vector<float> values;
};
using Checkpoint = std::vector<CheckpointEntry>;

Checkpoint to_checkpoint(const models::ParameterRegistry<float>& registry);
// Copies values by name; every registry parameter must be present with the
// same shape.
void load_checkpoint(models::ParameterRegistry<float>& registry, const Checkpoint& checkpoint);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void write_checkpoint(const fs::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const fs::path& path);

struct CsvRow {
  std::string model;
  metrics::AggregateReport report;
  std::size_t params = 0;
  double train_seconds = 0;
  double inference_ms = 0;
};

inline constexpr const char* kCsvHeader =
    "Model,Accuracy,Precision,Recall,F1,ROC-AUC,Params,TrainTime,InferenceMs";

std::string format_metrics_csv(std::span<const CsvRow> rows);
std::vector<CsvRow> parse_metrics_csv(const std::string& text);
void write_metrics_csv(std::span<const CsvRow> rows, const fs::path& path);

std::vector<std::uint8_t> read_file(const fs::path& path);
void write_file(const fs::path& path, std::span<const std::uint8_t> bytes);
std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace jqg::datastore
