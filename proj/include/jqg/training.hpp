// SPDX-License-Identifier: Apache-2.0
#pragma once

// Training protocol: cosine-annealed head learning rate, optional staged
// unfreezing, patience-based early stopping, multi-seed repetition.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "jqg/augment.hpp"
#include "jqg/datastore.hpp"
#include "jqg/metrics.hpp"
#include "jqg/models.hpp"
#include "jqg/optim.hpp"

namespace jqg::training {

enum class FitMode { Scratch, Staged };
FitMode parse_fit_mode(std::string_view name);
std::string_view to_string(FitMode mode);

struct UnfreezeStep {
  std::size_t epoch;   // 1-based, applied before the epoch trains
  std::size_t blocks;  // last `blocks` blocks of every backbone
};

struct TrainConfig {
  double head_lr = 1e-4;
  double unfrozen_lr = 1e-6;
  double weight_decay = 1e-4;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 20;
  std::size_t cosine_t_max = 50;
  std::size_t patience = 5;
  std::vector<UnfreezeStep> unfreeze_schedule{{5, 1}, {8, 2}};
  optim::Kind optimizer = optim::Kind::AdamW;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  FitMode mode = FitMode::Scratch;
  // -1 follows the model path (transformer inputs get mixup), 0 off, 1 on.
  int mixup = -1;
  bool augment = true;
  bool cosine_per_step = false;   // index the schedule by optimizer step
  bool anneal_unfrozen = false;   // also scale the unfrozen group
  // Stop after this many seconds of training (0 = unlimited).
  double time_budget_s = 0;
  void validate() const;
};

// eta_max/2 * (1 + cos(pi * min(t, t_max) / t_max)); eta_min = 0.
double cosine_lr(double t, double eta_max, std::size_t t_max);

// Applies every scheduled step with epoch <= `epoch`. Idempotent; returns
// the number of scalars that became trainable.
std::size_t apply_unfreeze_schedule(std::size_t epoch, models::Classifier<float>& model,
                                    const TrainConfig& config);

enum class StopDecision { Continue, Stop };
// STOP iff the (first) minimum of `val_losses` is more than `patience`
// entries before the last one.
StopDecision early_stop_check(std::span<const double> val_losses, std::size_t patience);

// Preprocessed [0,1) images with labels.
struct SampleSet {
  std::vector<augment::PlanarImage> images;
  std::vector<std::uint8_t> labels;
  std::size_t size() const { return labels.size(); }
};

SampleSet make_sample_set(std::span<const detector::JetWindow> windows, const preprocess::ChannelStats& stats,
                          const preprocess::PreprocConfig& preproc = {});
SampleSet take_fraction(const SampleSet& set, double fraction);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0, val_loss = 0;
  metrics::MetricReport val;
  double head_lr = 0, unfrozen_lr = 0;
  double seconds = 0;
  std::size_t trainable_params = 0;
  std::size_t steps = 0;
};

struct RunRecord {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based
  bool stopped_early = false;
  bool budget_exhausted = false;
  std::size_t optimizer_steps = 0;
  double train_seconds = 0;
};

struct FitResult {
  RunRecord record;
  metrics::MetricReport best;  // validation metrics of the best epoch
  datastore::Checkpoint checkpoint;
  std::unique_ptr<models::Classifier<float>> model;  // holds the best weights
};

using EpochCallback = std::function<void(const EpochRecord&)>;

augment::AugmentConfig path_augment(const augment::AugmentConfig& base, const models::ModelSpec& spec);

FitResult fit(const SampleSet& train, const SampleSet& val, const models::ModelSpec& spec,
              const TrainConfig& config, const augment::AugmentConfig& augment, std::uint64_t seed,
              const EpochCallback& on_epoch = {});

struct Evaluation {
  std::vector<double> scores;  // P(class 1)
  double loss = 0;
  metrics::MetricReport report;
};

// Deterministic validation transform, EVAL mode, batched.
Evaluation evaluate(models::Classifier<float>& model, const SampleSet& set, const augment::AugmentConfig& augment,
                    std::size_t batch_size = 32);

// Mean wall-clock of `runs` single-image forwards after `warmup` passes.
double measure_inference_ms(models::Classifier<float>& model, std::size_t warmup = 5, std::size_t runs = 30);

struct ExperimentResult {
  std::vector<FitResult> runs;
  metrics::AggregateReport aggregate;
  std::size_t params = 0;
  double mean_train_seconds = 0;
  double inference_ms = 0;
};

// One fit per configured seed.
ExperimentResult run_experiment(const SampleSet& train, const SampleSet& val, const models::ModelSpec& spec,
                                const TrainConfig& config, const augment::AugmentConfig& augment,
                                const EpochCallback& on_epoch = {});

}  // namespace jqg::training
