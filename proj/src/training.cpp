// SPDX-License-Identifier: Apache-2.0
#include "jqg/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "jqg/errors.hpp"

namespace jqg::training {

using ad::Tensor;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr std::uint64_t kShuffleStream = 0x5f1;
constexpr std::uint64_t kAugmentStream = 0xa06;
constexpr std::uint64_t kDropoutStream = 0xd0d;

// Gathers transformed samples into an image tensor [B,3,S,S].
Tensor<float> stack(const std::vector<augment::PlanarImage>& images) {
  const std::size_t s = images.front().height;
  Tensor<float> t({images.size(), augment::kChannels, s, images.front().width});
  float* out = t.data();
  for (const auto& img : images) out = std::copy(img.data.begin(), img.data.end(), out);
  return t;
}

}  // namespace

FitMode parse_fit_mode(std::string_view name) {
  if (name == "scratch") return FitMode::Scratch;
  if (name == "staged") return FitMode::Staged;
  throw DomainError("unknown training mode '" + std::string(name) + "' (scratch|staged)");
}

std::string_view to_string(FitMode mode) { return mode == FitMode::Scratch ? "scratch" : "staged"; }

void TrainConfig::validate() const {
  if (!(head_lr > 0) || !(unfrozen_lr > 0)) throw DomainError("learning rates must be positive");
  if (!(weight_decay >= 0)) throw DomainError("weight decay must be non-negative");
  if (batch_size == 0) throw DomainError("batch size must be at least 1");
  if (patience == 0) throw DomainError("patience must be at least 1");
  if (cosine_t_max == 0) throw DomainError("cosine T_max must be positive");
  if (max_epochs == 0) throw DomainError("max_epochs must be at least 1");
  if (seeds.empty()) throw DomainError("at least one seed is required");
  if (mixup < -1 || mixup > 1) throw DomainError("mixup must be -1, 0 or 1");
}

double cosine_lr(double t, double eta_max, std::size_t t_max) {
  if (t < 0) throw DomainError("cosine_lr: negative step");
  const double tm = static_cast<double>(t_max);
  return 0.5 * eta_max * (1.0 + std::cos(std::numbers::pi * std::min(t, tm) / tm));
}

std::size_t apply_unfreeze_schedule(std::size_t epoch, models::Classifier<float>& model,
                                    const TrainConfig& config) {
  std::size_t changed = 0;
  for (const auto& step : config.unfreeze_schedule)
    if (step.epoch <= epoch) changed += model.unfreeze_last_blocks(step.blocks);
  return changed;
}

StopDecision early_stop_check(std::span<const double> val_losses, std::size_t patience) {
  if (val_losses.empty()) throw DomainError("early_stop_check needs at least one epoch");
  const auto best = std::min_element(val_losses.begin(), val_losses.end());
  const auto age = static_cast<std::size_t>(val_losses.end() - 1 - best);
  return age > patience ? StopDecision::Stop : StopDecision::Continue;
}

SampleSet make_sample_set(std::span<const detector::JetWindow> windows, const preprocess::ChannelStats& stats,
                          const preprocess::PreprocConfig& preproc) {
  SampleSet set;
  auto processed = preprocess::preprocess_all(windows, stats, preproc);
  set.images.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (!windows[i].label) throw DomainError("training windows must be labelled");
    set.images.push_back(augment::make_planar(processed[i], detector::kWindowSize, detector::kWindowSize));
    set.labels.push_back(static_cast<std::uint8_t>(*windows[i].label));
  }
  return set;
}

SampleSet take_fraction(const SampleSet& set, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw DomainError("dataset fraction must lie in (0, 1]");
  const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(set.size())));
  SampleSet out;
  out.images.assign(set.images.begin(), set.images.begin() + static_cast<std::ptrdiff_t>(n));
  out.labels.assign(set.labels.begin(), set.labels.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

augment::AugmentConfig path_augment(const augment::AugmentConfig& base, const models::ModelSpec& spec) {
  augment::AugmentConfig a = base;
  a.out_size = spec.image_size();
  a.imagenet_normalize = !models::transformer_path(spec.kind);
  return a;
}

Evaluation evaluate(models::Classifier<float>& model, const SampleSet& set, const augment::AugmentConfig& augment,
                    std::size_t batch_size) {
  if (set.size() == 0) throw DomainError("cannot evaluate an empty set");
  ad::NoGradScope<float> off;
  Evaluation ev;
  ev.scores.reserve(set.size());
  double loss = 0;
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    const std::size_t end = std::min(set.size(), start + batch_size);
    std::vector<augment::PlanarImage> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(augment::validation_transform(set.images[i], augment));
    const Tensor<float> logits = model.forward(stack(batch), ad::Mode::Eval);
    for (std::size_t b = 0; b < end - start; ++b) {
      const double z0 = logits.data()[2 * b], z1 = logits.data()[2 * b + 1];
      const double m = std::max(z0, z1);
      const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
      ev.scores.push_back(std::exp(z1 - lse));
      loss -= (set.labels[start + b] ? z1 : z0) - lse;
    }
  }
  ev.loss = loss / static_cast<double>(set.size());
  ev.report = metrics::evaluate(ev.scores, set.labels);
  return ev;
}

double measure_inference_ms(models::Classifier<float>& model, std::size_t warmup, std::size_t runs) {
  if (runs == 0) throw DomainError("measure_inference_ms needs at least one run");
  const std::size_t s = model.spec().image_size();
  Philox rng(0x1f, 0);
  std::vector<float> v(augment::kChannels * s * s);
  for (float& x : v) x = static_cast<float>(rng.uniform());
  const Tensor<float> image({1, augment::kChannels, s, s}, std::move(v));
  ad::NoGradScope<float> off;
  for (std::size_t i = 0; i < warmup; ++i) model.forward(image, ad::Mode::Eval);
  const auto t0 = Clock::now();
  for (std::size_t i = 0; i < runs; ++i) model.forward(image, ad::Mode::Eval);
  return seconds_since(t0) * 1e3 / static_cast<double>(runs);
}

FitResult fit(const SampleSet& train, const SampleSet& val, const models::ModelSpec& spec,
              const TrainConfig& config, const augment::AugmentConfig& base_augment, std::uint64_t seed,
              const EpochCallback& on_epoch) {
  config.validate();
  if (train.size() == 0 || val.size() == 0) throw DomainError("fit needs non-empty train and validation sets");
  const augment::AugmentConfig aug = path_augment(base_augment, spec);
  aug.validate();
  const bool use_mixup = config.mixup < 0 ? models::transformer_path(spec.kind) : config.mixup == 1;

  FitResult result;
  result.model = std::make_unique<models::Classifier<float>>(spec, seed);
  auto& model = *result.model;
  auto& registry = model.registry();
  if (config.mode == FitMode::Staged) model.freeze_backbones();
  optim::Optimizer optimizer(config.optimizer);
  Philox dropout_rng(seed, kDropoutStream);

  RunRecord& rec = result.record;
  std::vector<double> val_losses;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<std::vector<float>> best_weights;
  const auto t_start = Clock::now();
  std::size_t global_step = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t_epoch = Clock::now();
    if (config.mode == FitMode::Staged) apply_unfreeze_schedule(epoch, model, config);

    EpochRecord er;
    er.epoch = epoch;
    const auto lr_at = [&](double t) {
      return std::pair{cosine_lr(t, config.head_lr, config.cosine_t_max),
                       config.anneal_unfrozen ? cosine_lr(t, config.unfrozen_lr, config.cosine_t_max)
                                              : config.unfrozen_lr};
    };
    std::tie(er.head_lr, er.unfrozen_lr) =
        lr_at(static_cast<double>(config.cosine_per_step ? global_step : epoch - 1));
    er.trainable_params = registry.trainable_count();

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Philox shuffle_rng(seed, mix_stream(kShuffleStream, epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(0, i - 1)]);
    Philox aug_rng(seed, mix_stream(kAugmentStream, epoch));

    double loss_sum = 0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::size_t bsz = end - start;
      augment::Batch batch;
      batch.size = bsz;
      batch.num_classes = models::kNumClasses;
      std::vector<augment::PlanarImage> imgs;
      imgs.reserve(bsz);
      for (std::size_t i = start; i < end; ++i) {
        const auto& src = train.images[order[i]];
        imgs.push_back(config.augment ? augment::train_transform(src, aug, aug_rng)
                                      : augment::validation_transform(src, aug));
        const std::uint8_t y = train.labels[order[i]];
        batch.labels.push_back(y == 0 ? 1.0 : 0.0);
        batch.labels.push_back(y == 1 ? 1.0 : 0.0);
      }
      Tensor<float> images = stack(imgs);
      batch.sample_size = images.numel() / bsz;
      if (use_mixup && bsz > 1) {
        batch.images.assign(images.data(), images.data() + images.numel());
        const double lambda = augment::sample_mixup_lambda(aug.mixup_alpha, aug_rng);
        std::vector<std::size_t> perm(bsz);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = bsz; i > 1; --i) std::swap(perm[i - 1], perm[aug_rng.uniform_int(0, i - 1)]);
        augment::Batch partner = batch;
        for (std::size_t i = 0; i < bsz; ++i) {
          std::copy_n(batch.images.begin() + static_cast<std::ptrdiff_t>(perm[i] * batch.sample_size),
                      batch.sample_size,
                      partner.images.begin() + static_cast<std::ptrdiff_t>(i * batch.sample_size));
          std::copy_n(batch.labels.begin() + static_cast<std::ptrdiff_t>(perm[i] * 2), 2,
                      partner.labels.begin() + static_cast<std::ptrdiff_t>(i * 2));
        }
        batch = augment::mixup(batch, partner, lambda);
        std::copy(batch.images.begin(), batch.images.end(), images.data());
      }
      Tensor<float> targets({bsz, models::kNumClasses},
                            std::vector<float>(batch.labels.begin(), batch.labels.end()));

      double head_lr = er.head_lr, unfrozen_lr = er.unfrozen_lr;
      if (config.cosine_per_step) std::tie(head_lr, unfrozen_lr) = lr_at(static_cast<double>(global_step));

      registry.zero_grad();
      ad::Tape<float> tape;
      {
        ad::TapeScope<float> scope(tape);
        Tensor<float> loss = ad::cross_entropy_soft(model.forward(images, ad::Mode::Train, &dropout_rng), targets);
        tape.backward(loss);
        loss_sum += static_cast<double>(loss.item()) * static_cast<double>(bsz);
      }
      optimizer.step(registry, head_lr, unfrozen_lr, config.weight_decay);
      seen += bsz;
      ++global_step;
      ++er.steps;
      if (config.time_budget_s > 0 && seconds_since(t_start) > config.time_budget_s) {
        rec.budget_exhausted = true;
        break;
      }
    }
    er.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(seen, 1));

    const Evaluation ev = evaluate(model, val, aug, config.batch_size);
    er.val_loss = ev.loss;
    er.val = ev.report;
    er.seconds = seconds_since(t_epoch);
    rec.epochs.push_back(er);
    val_losses.push_back(ev.loss);
    if (ev.loss < best_loss) {
      best_loss = ev.loss;
      rec.best_epoch = epoch;
      best_weights = registry.snapshot();
      result.best = ev.report;
    }
    if (on_epoch) on_epoch(er);
    if (rec.budget_exhausted) break;
    if (early_stop_check(val_losses, config.patience) == StopDecision::Stop) {
      rec.stopped_early = true;
      break;
    }
  }
  rec.optimizer_steps = global_step;
  rec.train_seconds = seconds_since(t_start);
  if (!best_weights.empty()) registry.restore(best_weights);
  result.checkpoint = datastore::to_checkpoint(registry);
  result.best.inference_ms = measure_inference_ms(model);
  return result;
}

ExperimentResult run_experiment(const SampleSet& train, const SampleSet& val, const models::ModelSpec& spec,
                                const TrainConfig& config, const augment::AugmentConfig& augment,
                                const EpochCallback& on_epoch) {
  config.validate();
  ExperimentResult out;
  std::vector<metrics::MetricReport> reports;
  for (std::uint64_t seed : config.seeds) {
    out.runs.push_back(fit(train, val, spec, config, augment, seed, on_epoch));
    reports.push_back(out.runs.back().best);
    out.mean_train_seconds += out.runs.back().record.train_seconds;
  }
  out.mean_train_seconds /= static_cast<double>(out.runs.size());
  out.aggregate = metrics::aggregate_seeds(reports);
  out.inference_ms = out.aggregate.inference_ms.mean;
  out.params = out.runs.front().model->registry().count();
  return out;
}

}  // namespace jqg::training
