// SPDX-License-Identifier: Apache-2.0
#include "jqg/models.hpp"

#include <cmath>
#include <random>

#include "jqg/errors.hpp"

namespace jqg::models {

using ad::Shape;

template <class T>
Tensor<T> ParameterRegistry<T>::add(std::string name, Tensor<T> tensor, bool trainable, LrGroup group) {
  if (find(name) != nullptr) throw DomainError("duplicate parameter name: " + name);
  tensor.set_requires_grad(trainable);
  entries_.push_back({std::move(name), tensor, trainable, group});
  return tensor;
}

template <class T>
const typename ParameterRegistry<T>::Entry* ParameterRegistry<T>::find(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

template <class T>
std::size_t ParameterRegistry<T>::set_trainable(std::string_view prefix, bool trainable, LrGroup group) {
  std::size_t changed = 0;
  for (auto& e : entries_) {
    if (!e.name.starts_with(prefix)) continue;
    if (e.trainable != trainable) changed += e.tensor.numel();
    e.trainable = trainable;
    e.group = group;
    e.tensor.set_requires_grad(trainable);
    if (!trainable) e.tensor.zero_grad();
  }
  return changed;
}

template <class T>
void ParameterRegistry<T>::freeze_all() {
  set_trainable("", false, LrGroup::Head);
}

template <class T>
std::size_t ParameterRegistry<T>::count(std::string_view prefix) const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.name.starts_with(prefix)) n += e.tensor.numel();
  return n;
}

template <class T>
std::size_t ParameterRegistry<T>::trainable_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.trainable) n += e.tensor.numel();
  return n;
}

template <class T>
void ParameterRegistry<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <class T>
std::vector<std::vector<T>> ParameterRegistry<T>::snapshot() const {
  std::vector<std::vector<T>> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.emplace_back(e.tensor.values().begin(), e.tensor.values().end());
  return out;
}

template <class T>
void ParameterRegistry<T>::restore(const std::vector<std::vector<T>>& values) {
  if (values.size() != entries_.size()) throw ShapeError("snapshot has a different parameter count");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& t = entries_[i].tensor;
    if (values[i].size() != t.numel()) throw ShapeError("snapshot size differs for " + entries_[i].name);
    std::copy(values[i].begin(), values[i].end(), t.data());
  }
}

void ViTConfig::validate() const {
  if (patch_size == 0 || image_size == 0 || image_size % patch_size != 0)
    throw DomainError("vit: image_size must be a positive multiple of patch_size");
  if (embed_dim == 0 || heads == 0 || embed_dim % heads != 0)
    throw DomainError("vit: embed_dim must be a positive multiple of heads");
  if (mlp_ratio == 0 || channels == 0) throw DomainError("vit: mlp_ratio and channels must be positive");
}

std::size_t ViTConfig::num_patches() const {
  const std::size_t g = image_size / patch_size;
  return g * g;
}

void ConvConfig::validate() const {
  if (widths.empty()) throw DomainError("conv: at least one stage is required");
  for (std::size_t w : widths)
    if (w == 0) throw DomainError("conv: stage widths must be positive");
  if (kernel == 0 || kernel % 2 == 0) throw DomainError("conv: kernel size must be odd");
  if (channels == 0) throw DomainError("conv: channels must be positive");
}

template <class T>
Tensor<T> trunc_normal(const Shape& shape, double stddev, Philox& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<T> v(ad::numel(shape));
  for (T& x : v) {
    double z;
    do z = normal(rng);
    while (std::abs(z) > 2.0);
    x = static_cast<T>(z * stddev);
  }
  return Tensor<T>(shape, std::move(v));
}

namespace {

template <class T>
Tensor<T> zeros(const Shape& shape) {
  return Tensor<T>(shape);
}

template <class T>
Tensor<T> ones(const Shape& shape) {
  return Tensor<T>(shape, std::vector<T>(ad::numel(shape), T(1)));
}

constexpr double kInitStd = 0.02;

}  // namespace

template <class T>
Tensor<T> linear(const Tensor<T>& f, const Tensor<T>& w, const Tensor<T>& b) {
  return ad::add_bias(ad::matmul(f, w), b);
}

template <class T>
Tensor<T> mhsa(const Tensor<T>& x, const EncoderWeights<T>& w, std::size_t seq_len, std::size_t heads) {
  const std::size_t d = x.dim(1);
  if (seq_len == 0 || x.dim(0) % seq_len != 0) throw ShapeError("mhsa: rows are not a multiple of seq_len");
  if (heads == 0 || d % heads != 0) throw ShapeError("mhsa: width not divisible by heads");
  const std::size_t batch = x.dim(0) / seq_len, dh = d / heads;
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  const Tensor<T> q = linear(x, w.wq, w.bq);
  const Tensor<T> k = ad::matmul(x, w.wk);
  const Tensor<T> v = linear(x, w.wv, w.bv);
  std::vector<Tensor<T>> samples;
  samples.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto qb = ad::slice_rows(q, b * seq_len, (b + 1) * seq_len);
    const auto kb = ad::slice_rows(k, b * seq_len, (b + 1) * seq_len);
    const auto vb = ad::slice_rows(v, b * seq_len, (b + 1) * seq_len);
    std::vector<Tensor<T>> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      const auto qh = ad::slice_cols(qb, h * dh, (h + 1) * dh);
      const auto kh = ad::slice_cols(kb, h * dh, (h + 1) * dh);
      const auto vh = ad::slice_cols(vb, h * dh, (h + 1) * dh);
      const auto att = ad::softmax(ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt));
      outs.push_back(ad::matmul(att, vh));
    }
    samples.push_back(heads == 1 ? outs.front() : ad::concat_cols(outs));
  }
  const Tensor<T> merged = batch == 1 ? samples.front() : ad::concat_rows(samples);
  return linear(merged, w.wo, w.bo);
}

template <class T>
Tensor<T> attention_weights(const Tensor<T>& x, const EncoderWeights<T>& w, std::size_t heads,
                            std::size_t head) {
  const std::size_t d = x.dim(1), dh = d / heads;
  const auto qh = ad::slice_cols(linear(x, w.wq, w.bq), head * dh, (head + 1) * dh);
  const auto kh = ad::slice_cols(ad::matmul(x, w.wk), head * dh, (head + 1) * dh);
  return ad::softmax(ad::scale(ad::matmul(qh, ad::transpose(kh)),
                               static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)))));
}

template <class T>
Tensor<T> encoder_block(const Tensor<T>& x, const EncoderWeights<T>& w, std::size_t seq_len,
                        std::size_t heads) {
  const Tensor<T> y1 = ad::add(mhsa(ad::layer_norm(x, w.ln1_gamma, w.ln1_beta), w, seq_len, heads), x);
  const Tensor<T> h = ad::gelu(linear(ad::layer_norm(y1, w.ln2_gamma, w.ln2_beta), w.fc1_w, w.fc1_b));
  return ad::add(linear(h, w.fc2_w, w.fc2_b), y1);
}

template <class T>
ViT<T>::ViT(const ViTConfig& config, ParameterRegistry<T>& reg, const std::string& prefix, Philox& rng)
    : config_(config) {
  config_.validate();
  const std::size_t d = config_.embed_dim, p = config_.patch_size;
  const std::size_t in = config_.channels * p * p, hidden = config_.mlp_ratio * d;
  patch_w_ = reg.add(prefix + "patch.weight", trunc_normal<T>({in, d}, kInitStd, rng));
  patch_b_ = reg.add(prefix + "patch.bias", zeros<T>({d}));
  cls_ = reg.add(prefix + "cls_token", zeros<T>({1, d}));
  pos_ = reg.add(prefix + "pos_embed", trunc_normal<T>({config_.seq_len(), d}, kInitStd, rng));
  for (std::size_t i = 0; i < config_.depth; ++i) {
    const std::string b = prefix + "blocks." + std::to_string(i) + ".";
    block_prefixes_.push_back(b);
    EncoderWeights<T> w;
    w.ln1_gamma = reg.add(b + "ln1.gamma", ones<T>({d}));
    w.ln1_beta = reg.add(b + "ln1.beta", zeros<T>({d}));
    w.wq = reg.add(b + "attn.wq", trunc_normal<T>({d, d}, kInitStd, rng));
    w.bq = reg.add(b + "attn.bq", zeros<T>({d}));
    w.wk = reg.add(b + "attn.wk", trunc_normal<T>({d, d}, kInitStd, rng));
    w.wv = reg.add(b + "attn.wv", trunc_normal<T>({d, d}, kInitStd, rng));
    w.bv = reg.add(b + "attn.bv", zeros<T>({d}));
    w.wo = reg.add(b + "attn.wo", trunc_normal<T>({d, d}, kInitStd, rng));
    w.bo = reg.add(b + "attn.bo", zeros<T>({d}));
    w.ln2_gamma = reg.add(b + "ln2.gamma", ones<T>({d}));
    w.ln2_beta = reg.add(b + "ln2.beta", zeros<T>({d}));
    w.fc1_w = reg.add(b + "mlp.fc1.weight", trunc_normal<T>({d, hidden}, kInitStd, rng));
    w.fc1_b = reg.add(b + "mlp.fc1.bias", zeros<T>({hidden}));
    w.fc2_w = reg.add(b + "mlp.fc2.weight", trunc_normal<T>({hidden, d}, kInitStd, rng));
    w.fc2_b = reg.add(b + "mlp.fc2.bias", zeros<T>({d}));
    blocks_.push_back(std::move(w));
  }
  norm_gamma_ = reg.add(prefix + "norm.gamma", ones<T>({d}));
  norm_beta_ = reg.add(prefix + "norm.beta", zeros<T>({d}));
}

template <class T>
Tensor<T> ViT<T>::embed(const Tensor<T>& images) const {
  if (images.rank() != 4 || images.dim(1) != config_.channels || images.dim(2) != config_.image_size ||
      images.dim(3) != config_.image_size)
    throw ShapeError("vit: expected images [B," + std::to_string(config_.channels) + "," +
                     std::to_string(config_.image_size) + "," + std::to_string(config_.image_size) +
                     "], got " + ad::to_string(images.shape()));
  const std::size_t batch = images.dim(0), n = config_.num_patches();
  const Tensor<T> tokens = linear(ad::patchify(images, config_.patch_size), patch_w_, patch_b_);
  std::vector<Tensor<T>> parts;
  parts.reserve(2 * batch);
  for (std::size_t b = 0; b < batch; ++b) {
    parts.push_back(cls_);
    parts.push_back(ad::slice_rows(tokens, b * n, (b + 1) * n));
  }
  return ad::add_tiled(ad::concat_rows(parts), pos_);
}

template <class T>
Tensor<T> ViT<T>::encode(const Tensor<T>& images) const {
  Tensor<T> y = embed(images);
  for (const auto& w : blocks_) y = encoder_block(y, w, config_.seq_len(), config_.heads);
  return ad::layer_norm(y, norm_gamma_, norm_beta_);
}

template <class T>
Tensor<T> ViT<T>::forward(const Tensor<T>& images, Mode, Philox*) {
  const Tensor<T> y = encode(images);
  const std::size_t s = config_.seq_len();
  std::vector<std::size_t> rows(images.dim(0));
  for (std::size_t b = 0; b < rows.size(); ++b) rows[b] = b * s;
  return ad::gather_rows(y, rows);
}

template <class T>
ConvNet<T>::ConvNet(const ConvConfig& config, std::size_t image_size, ParameterRegistry<T>& reg,
                    const std::string& prefix, Philox& rng)
    : config_(config), image_size_(image_size) {
  config_.validate();
  const std::size_t stages = config_.widths.size();
  if (stages >= 64 || image_size % (std::size_t{1} << stages) != 0)
    throw DomainError("conv: image size must be divisible by 2^stages");
  std::size_t in = config_.channels;
  const std::size_t k = config_.kernel;
  for (std::size_t i = 0; i < stages; ++i) {
    const std::string b = prefix + "stages." + std::to_string(i) + ".";
    block_prefixes_.push_back(b);
    const std::size_t out = config_.widths[i];
    const double he = std::sqrt(2.0 / static_cast<double>(in * k * k));
    kernels_.push_back(reg.add(b + "weight", trunc_normal<T>({out, in, k, k}, he, rng)));
    biases_.push_back(reg.add(b + "bias", zeros<T>({out})));
    in = out;
  }
}

template <class T>
Tensor<T> ConvNet<T>::forward(const Tensor<T>& images, Mode, Philox*) {
  if (images.rank() != 4 || images.dim(1) != config_.channels || images.dim(2) != image_size_ ||
      images.dim(3) != image_size_)
    throw ShapeError("conv: unexpected image shape " + ad::to_string(images.shape()));
  Tensor<T> x = images;
  for (std::size_t i = 0; i < kernels_.size(); ++i) {
    x = ad::conv2d(x, kernels_[i], 1, config_.kernel / 2);
    x = ad::avg_pool2(ad::relu(ad::add_channel_bias(x, biases_[i])));
  }
  return ad::global_avg_pool(x);
}

template <class T>
Tensor<T> hybrid_head(const std::vector<Tensor<T>>& features, const Tensor<T>& w1, const Tensor<T>& b1,
                      const Tensor<T>& w2, const Tensor<T>& b2, double dropout, Mode mode, Philox* rng) {
  const Tensor<T> f = features.size() == 1 ? features.front() : ad::concat_cols(features);
  if (f.dim(1) != w1.dim(0))
    throw ShapeError("hybrid head: concatenated width " + std::to_string(f.dim(1)) +
                     " does not match W1 input " + std::to_string(w1.dim(0)));
  const Tensor<T> h = ad::relu(linear(f, w1, b1));
  return linear(ad::dropout(h, dropout, mode, rng), w2, b2);
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "vit") return ModelKind::ViT;
  if (name == "conv") return ModelKind::Conv;
  if (name == "hybrid2") return ModelKind::Hybrid2;
  if (name == "hybrid3") return ModelKind::Hybrid3;
  throw DomainError("unknown model '" + std::string(name) + "' (vit|conv|hybrid2|hybrid3)");
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::ViT: return "vit";
    case ModelKind::Conv: return "conv";
    case ModelKind::Hybrid2: return "hybrid2";
    case ModelKind::Hybrid3: return "hybrid3";
  }
  return "?";
}

bool transformer_path(ModelKind kind) { return kind != ModelKind::Conv; }

void ModelSpec::validate() const {
  vit.validate();
  if (kind != ModelKind::ViT) conv.validate();
  if (kind == ModelKind::Hybrid3) {
    ViTConfig second = vit;
    second.patch_size = vit2_patch;
    second.validate();
  }
  if (hybrid.hidden == 0) throw DomainError("hybrid hidden width must be positive");
  if (!(hybrid.dropout >= 0.0 && hybrid.dropout < 1.0)) throw DomainError("dropout must lie in [0, 1)");
}

template <class T>
Classifier<T>::Classifier(const ModelSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  Philox rng(seed, mix_stream(0x1217, 0));
  auto add_vit = [&](const ViTConfig& c) {
    const std::string p = "backbone" + std::to_string(backbones_.size()) + ".";
    backbones_.push_back(std::make_unique<ViT<T>>(c, registry_, p, rng));
  };
  auto add_conv = [&] {
    const std::string p = "backbone" + std::to_string(backbones_.size()) + ".";
    backbones_.push_back(std::make_unique<ConvNet<T>>(spec_.conv, spec_.vit.image_size, registry_, p, rng));
  };
  switch (spec_.kind) {
    case ModelKind::ViT: add_vit(spec_.vit); break;
    case ModelKind::Conv: add_conv(); break;
    case ModelKind::Hybrid2:
      add_vit(spec_.vit);
      add_conv();
      break;
    case ModelKind::Hybrid3: {
      add_vit(spec_.vit);
      add_conv();
      ViTConfig second = spec_.vit;
      second.patch_size = spec_.vit2_patch;
      add_vit(second);
      break;
    }
  }
  std::size_t concat = 0;
  for (const auto& b : backbones_) concat += b->feature_dim();
  if (backbones_.size() == 1) {
    w2_ = registry_.add("head.weight", trunc_normal<T>({concat, kNumClasses}, kInitStd, rng));
    b2_ = registry_.add("head.bias", zeros<T>({kNumClasses}));
  } else {
    const std::size_t h = spec_.hybrid.hidden;
    w1_ = registry_.add("head.fc1.weight", trunc_normal<T>({concat, h}, kInitStd, rng));
    b1_ = registry_.add("head.fc1.bias", zeros<T>({h}));
    w2_ = registry_.add("head.fc2.weight", trunc_normal<T>({h, kNumClasses}, kInitStd, rng));
    b2_ = registry_.add("head.fc2.bias", zeros<T>({kNumClasses}));
  }
}

template <class T>
Tensor<T> Classifier<T>::features(const Tensor<T>& images, Mode mode, Philox* rng) {
  std::vector<Tensor<T>> f;
  for (auto& b : backbones_) f.push_back(b->forward(images, mode, rng));
  return f.size() == 1 ? f.front() : ad::concat_cols(f);
}

template <class T>
Tensor<T> Classifier<T>::forward(const Tensor<T>& images, Mode mode, Philox* rng) {
  std::vector<Tensor<T>> f;
  for (auto& b : backbones_) f.push_back(b->forward(images, mode, rng));
  if (backbones_.size() == 1) return linear(f.front(), w2_, b2_);
  return hybrid_head(f, w1_, b1_, w2_, b2_, spec_.hybrid.dropout, mode, rng);
}

template <class T>
void Classifier<T>::freeze_backbones() {
  registry_.set_trainable("backbone", false, LrGroup::Head);
}

template <class T>
std::size_t Classifier<T>::unfreeze_last_blocks(std::size_t count) {
  std::size_t changed = 0;
  for (const auto& b : backbones_) {
    const auto prefixes = b->block_prefixes();
    const std::size_t n = std::min(count, prefixes.size());
    for (std::size_t i = prefixes.size() - n; i < prefixes.size(); ++i)
      changed += registry_.set_trainable(prefixes[i], true, LrGroup::Unfrozen);
  }
  return changed;
}

template <class T>
std::size_t Classifier<T>::last_blocks_size(std::size_t count) const {
  std::size_t n = 0;
  for (const auto& b : backbones_) {
    const auto prefixes = b->block_prefixes();
    const std::size_t k = std::min(count, prefixes.size());
    for (std::size_t i = prefixes.size() - k; i < prefixes.size(); ++i) n += registry_.count(prefixes[i]);
  }
  return n;
}

#define JQG_INSTANTIATE(T)                                                                           \
  template class ParameterRegistry<T>;                                                               \
  template class ViT<T>;                                                                             \
  template class ConvNet<T>;                                                                         \
  template class Classifier<T>;                                                                      \
  template Tensor<T> trunc_normal<T>(const Shape&, double, Philox&);                                 \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> mhsa(const Tensor<T>&, const EncoderWeights<T>&, std::size_t, std::size_t);     \
  template Tensor<T> encoder_block(const Tensor<T>&, const EncoderWeights<T>&, std::size_t,          \
                                   std::size_t);                                                     \
  template Tensor<T> attention_weights(const Tensor<T>&, const EncoderWeights<T>&, std::size_t,      \
                                       std::size_t);                                                 \
  template Tensor<T> hybrid_head(const std::vector<Tensor<T>>&, const Tensor<T>&, const Tensor<T>&, \
                                 const Tensor<T>&, const Tensor<T>&, double, Mode, Philox*);

JQG_INSTANTIATE(float)
JQG_INSTANTIATE(double)

#undef JQG_INSTANTIATE

}  // namespace jqg::models
