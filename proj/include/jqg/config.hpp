// SPDX-License-Identifier: Apache-2.0
#pragma once

// `key = value` run configuration with `#` comments. Later assignments win,
// so command-line overrides are applied after the file.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "jqg/augment.hpp"
#include "jqg/models.hpp"
#include "jqg/preprocess.hpp"
#include "jqg/synthgen.hpp"
#include "jqg/training.hpp"

namespace jqg::config {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Throws FormatError on a line without '=' or with an empty key.
KeyValues parse_key_values(std::string_view text);

struct ExperimentConfig {
  models::ModelSpec model;
  training::TrainConfig train;
  augment::AugmentConfig augment;
  preprocess::PreprocConfig preproc;
  double dataset_fraction = 1.0;  // share of the training split used
  double val_fraction = 0.2;      // held out when a single data file is given

  // Desk-scale defaults: 64-pixel inputs.
  ExperimentConfig();

  // Throws DomainError for an unknown key or a malformed value.
  void set(std::string_view key, std::string_view value);
  void apply(const KeyValues& values);
  void validate() const;
  // Fully resolved configuration, parseable by parse_key_values.
  std::string to_text() const;
};

ExperimentConfig load_experiment(const std::string& path);

}  // namespace jqg::config
