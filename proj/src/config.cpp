// SPDX-License-Identifier: Apache-2.0
#include "jqg/config.hpp"

#include <charconv>
#include <sstream>

#include "jqg/datastore.hpp"
#include "jqg/errors.hpp"

namespace jqg::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

double to_double(std::string_view key, std::string_view v) {
  double x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw DomainError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  return x;
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw DomainError(std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
  return x;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw DomainError(std::string(key) + ": expected a boolean, got '" + std::string(v) + "'");
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto comma = v.find(',');
    out.push_back(trim(v.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw FormatError("config line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

ExperimentConfig::ExperimentConfig() {
  model.vit.image_size = 64;
  augment.out_size = 64;
}

void ExperimentConfig::set(std::string_view key, std::string_view v) {
  auto& m = model;
  auto& t = train;
  auto& a = augment;
  if (key == "model") m.kind = models::parse_model_kind(v);
  else if (key == "image_size") m.vit.image_size = to_uint(key, v);
  else if (key == "patch_size") m.vit.patch_size = to_uint(key, v);
  else if (key == "embed_dim") m.vit.embed_dim = to_uint(key, v);
  else if (key == "depth") m.vit.depth = to_uint(key, v);
  else if (key == "heads") m.vit.heads = to_uint(key, v);
  else if (key == "mlp_ratio") m.vit.mlp_ratio = to_uint(key, v);
  else if (key == "vit2_patch") m.vit2_patch = to_uint(key, v);
  else if (key == "conv_widths") {
    m.conv.widths.clear();
    for (auto s : split_list(v)) m.conv.widths.push_back(to_uint(key, s));
  } else if (key == "conv_kernel") m.conv.kernel = to_uint(key, v);
  else if (key == "hidden") m.hybrid.hidden = to_uint(key, v);
  else if (key == "dropout") m.hybrid.dropout = to_double(key, v);
  else if (key == "head_lr") t.head_lr = to_double(key, v);
  else if (key == "unfrozen_lr") t.unfrozen_lr = to_double(key, v);
  else if (key == "weight_decay") t.weight_decay = to_double(key, v);
  else if (key == "batch_size") t.batch_size = to_uint(key, v);
  else if (key == "epochs") t.max_epochs = to_uint(key, v);
  else if (key == "cosine_t_max") t.cosine_t_max = to_uint(key, v);
  else if (key == "patience") t.patience = to_uint(key, v);
  else if (key == "optimizer") t.optimizer = optim::parse_kind(v);
  else if (key == "seeds") {
    t.seeds.clear();
    for (auto s : split_list(v)) t.seeds.push_back(to_uint(key, s));
  } else if (key == "mode") t.mode = training::parse_fit_mode(v);
  else if (key == "mixup") {
    if (v == "auto") t.mixup = -1;
    else t.mixup = to_bool(key, v) ? 1 : 0;
  } else if (key == "augment") t.augment = to_bool(key, v);
  else if (key == "cosine_per_step") t.cosine_per_step = to_bool(key, v);
  else if (key == "anneal_unfrozen") t.anneal_unfrozen = to_bool(key, v);
  else if (key == "time_budget_s") t.time_budget_s = to_double(key, v);
  else if (key == "mixup_alpha") a.mixup_alpha = to_double(key, v);
  else if (key == "crop_scale_lo") a.crop_scale_lo = to_double(key, v);
  else if (key == "crop_scale_hi") a.crop_scale_hi = to_double(key, v);
  else if (key == "flip_prob") a.flip_prob = to_double(key, v);
  else if (key == "max_rotation_deg") a.max_rotation_deg = to_double(key, v);
  else if (key == "color_jitter") a.color_jitter = to_bool(key, v);
  else if (key == "zero_threshold") preproc.zero_threshold = to_double(key, v);
  else if (key == "clip_factor") preproc.clip_factor = to_double(key, v);
  else if (key == "dataset_fraction") dataset_fraction = to_double(key, v);
  else if (key == "val_fraction") val_fraction = to_double(key, v);
  else throw DomainError("unknown config key '" + std::string(key) + "'");
}

void ExperimentConfig::apply(const KeyValues& values) {
  for (const auto& [k, v] : values) set(k, v);
}

void ExperimentConfig::validate() const {
  model.validate();
  train.validate();
  augment.validate();
  preproc.validate();
  if (!(dataset_fraction > 0 && dataset_fraction <= 1)) throw DomainError("dataset_fraction must lie in (0, 1]");
  if (!(val_fraction > 0 && val_fraction < 1)) throw DomainError("val_fraction must lie in (0, 1)");
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream o;
  const auto list = [](const auto& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
    return s;
  };
  const auto b = [](bool x) { return x ? "true" : "false"; };
  o << "model = " << models::to_string(model.kind) << "\n"
    << "image_size = " << model.vit.image_size << "\n"
    << "patch_size = " << model.vit.patch_size << "\n"
    << "embed_dim = " << model.vit.embed_dim << "\n"
    << "depth = " << model.vit.depth << "\n"
    << "heads = " << model.vit.heads << "\n"
    << "mlp_ratio = " << model.vit.mlp_ratio << "\n"
    << "vit2_patch = " << model.vit2_patch << "\n"
    << "conv_widths = " << list(model.conv.widths) << "\n"
    << "conv_kernel = " << model.conv.kernel << "\n"
    << "hidden = " << model.hybrid.hidden << "\n"
    << "dropout = " << num(model.hybrid.dropout) << "\n"
    << "head_lr = " << num(train.head_lr) << "\n"
    << "unfrozen_lr = " << num(train.unfrozen_lr) << "\n"
    << "weight_decay = " << num(train.weight_decay) << "\n"
    << "batch_size = " << train.batch_size << "\n"
    << "epochs = " << train.max_epochs << "\n"
    << "cosine_t_max = " << train.cosine_t_max << "\n"
    << "patience = " << train.patience << "\n"
    << "optimizer = " << optim::to_string(train.optimizer) << "\n"
    << "seeds = " << list(train.seeds) << "\n"
    << "mode = " << training::to_string(train.mode) << "\n"
    << "mixup = " << (train.mixup < 0 ? "auto" : b(train.mixup == 1)) << "\n"
    << "augment = " << b(train.augment) << "\n"
    << "cosine_per_step = " << b(train.cosine_per_step) << "\n"
    << "anneal_unfrozen = " << b(train.anneal_unfrozen) << "\n"
    << "time_budget_s = " << num(train.time_budget_s) << "\n"
    << "mixup_alpha = " << num(augment.mixup_alpha) << "\n"
    << "crop_scale_lo = " << num(augment.crop_scale_lo) << "\n"
    << "crop_scale_hi = " << num(augment.crop_scale_hi) << "\n"
    << "flip_prob = " << num(augment.flip_prob) << "\n"
    << "max_rotation_deg = " << num(augment.max_rotation_deg) << "\n"
    << "color_jitter = " << b(augment.color_jitter) << "\n"
    << "zero_threshold = " << num(preproc.zero_threshold) << "\n"
    << "clip_factor = " << num(preproc.clip_factor) << "\n"
    << "dataset_fraction = " << num(dataset_fraction) << "\n"
    << "val_fraction = " << num(val_fraction) << "\n";
  return o.str();
}

ExperimentConfig load_experiment(const std::string& path) {
  ExperimentConfig c;
  c.apply(parse_key_values(datastore::read_text(path)));
  return c;
}

}  // namespace jqg::config
