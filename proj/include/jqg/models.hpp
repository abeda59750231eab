// SPDX-License-Identifier: Apache-2.0
#pragma once

// Tiny vision transformer, tiny conv backbone, and the linear / concat-MLP
// classification heads, all registered in a named ParameterRegistry.

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "jqg/ops.hpp"
#include "jqg/rng.hpp"
#include "jqg/tensor.hpp"

namespace jqg::models {

using ad::Mode;
using ad::Tensor;

enum class LrGroup { Head, Unfrozen };

template <class T>
class ParameterRegistry {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    bool trainable = true;
    LrGroup group = LrGroup::Head;
  };

  // Throws DomainError on a duplicate name.
  Tensor<T> add(std::string name, Tensor<T> tensor, bool trainable = true,
                LrGroup group = LrGroup::Head);

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  const Entry* find(std::string_view name) const;

  // Flags every parameter whose name starts with `prefix`. Returns the
  // number of scalars whose state changed.
  std::size_t set_trainable(std::string_view prefix, bool trainable, LrGroup group);
  void freeze_all();

  std::size_t count(std::string_view prefix = {}) const;
  std::size_t trainable_count() const;

  void zero_grad();

  std::vector<std::vector<T>> snapshot() const;
  void restore(const std::vector<std::vector<T>>& values);

 private:
  std::vector<Entry> entries_;
};

struct ViTConfig {
  std::size_t image_size = 224;
  std::size_t patch_size = 16;
  std::size_t embed_dim = 64;
  std::size_t depth = 4;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  std::size_t channels = 3;
  void validate() const;
  std::size_t num_patches() const;
  std::size_t seq_len() const { return num_patches() + 1; }
};

struct ConvConfig {
  std::vector<std::size_t> widths{16, 32, 64};
  std::size_t kernel = 3;
  std::size_t channels = 3;
  void validate() const;
  std::size_t feature_dim() const { return widths.back(); }
};

struct HybridConfig {
  std::size_t hidden = 512;
  double dropout = 0.1;
};

inline constexpr std::size_t kNumClasses = 2;

// Weights of one pre-norm encoder block. Keys carry no bias: it would shift
// every score of a query row equally and never receive a gradient.
template <class T>
struct EncoderWeights {
  Tensor<T> ln1_gamma, ln1_beta;
  Tensor<T> wq, bq, wk, wv, bv, wo, bo;
  Tensor<T> ln2_gamma, ln2_beta;
  Tensor<T> fc1_w, fc1_b, fc2_w, fc2_b;
};

// x: [B*S, D] holding B sequences of length S.
template <class T>
Tensor<T> mhsa(const Tensor<T>& x, const EncoderWeights<T>& w, std::size_t seq_len, std::size_t heads);
// y' = MHSA(LN(y)) + y;  out = MLP(LN(y')) + y'.
template <class T>
Tensor<T> encoder_block(const Tensor<T>& x, const EncoderWeights<T>& w, std::size_t seq_len,
                        std::size_t heads);

// Attention probabilities of one sequence [S, D] and one head, for tests.
template <class T>
Tensor<T> attention_weights(const Tensor<T>& x, const EncoderWeights<T>& w, std::size_t heads,
                            std::size_t head);

template <class T>
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual std::size_t feature_dim() const = 0;
  virtual std::size_t image_size() const = 0;
  // images [B,3,H,W] -> features [B, feature_dim]
  virtual Tensor<T> forward(const Tensor<T>& images, Mode mode, Philox* rng) = 0;
  // Registry prefixes of unfreezable blocks, shallowest first.
  virtual std::vector<std::string> block_prefixes() const = 0;
};

template <class T>
class ViT final : public Backbone<T> {
 public:
  ViT(const ViTConfig& config, ParameterRegistry<T>& registry, const std::string& prefix, Philox& rng);

  std::size_t feature_dim() const override { return config_.embed_dim; }
  std::size_t image_size() const override { return config_.image_size; }
  Tensor<T> forward(const Tensor<T>& images, Mode mode, Philox* rng) override;
  std::vector<std::string> block_prefixes() const override { return block_prefixes_; }

  // Patch embedding with class token and positions: [B*(N+1), D].
  Tensor<T> embed(const Tensor<T>& images) const;
  // Runs the encoder and returns every token after the final norm.
  Tensor<T> encode(const Tensor<T>& images) const;

  const ViTConfig& config() const { return config_; }
  std::vector<EncoderWeights<T>>& blocks() { return blocks_; }
  Tensor<T>& class_token() { return cls_; }
  Tensor<T>& positions() { return pos_; }
  Tensor<T>& patch_weight() { return patch_w_; }
  Tensor<T>& patch_bias() { return patch_b_; }

 private:
  ViTConfig config_;
  Tensor<T> patch_w_, patch_b_, cls_, pos_, norm_gamma_, norm_beta_;
  std::vector<EncoderWeights<T>> blocks_;
  std::vector<std::string> block_prefixes_;
};

// Stages of conv (stride 1, same padding) -> bias -> relu -> 2x2 mean pool,
// then global average pooling.
template <class T>
class ConvNet final : public Backbone<T> {
 public:
  ConvNet(const ConvConfig& config, std::size_t image_size, ParameterRegistry<T>& registry,
          const std::string& prefix, Philox& rng);

  std::size_t feature_dim() const override { return config_.feature_dim(); }
  std::size_t image_size() const override { return image_size_; }
  Tensor<T> forward(const Tensor<T>& images, Mode mode, Philox* rng) override;
  std::vector<std::string> block_prefixes() const override { return block_prefixes_; }

  std::vector<Tensor<T>>& kernels() { return kernels_; }
  std::vector<Tensor<T>>& biases() { return biases_; }

 private:
  ConvConfig config_;
  std::size_t image_size_;
  std::vector<Tensor<T>> kernels_, biases_;
  std::vector<std::string> block_prefixes_;
};

enum class ModelKind { ViT, Conv, Hybrid2, Hybrid3 };
ModelKind parse_model_kind(std::string_view name);
std::string_view to_string(ModelKind kind);
// Hybrids and the ViT take the transformer input path (mixup, no ImageNet
// normalization); the conv model takes the CNN path.
bool transformer_path(ModelKind kind);

struct ModelSpec {
  ModelKind kind = ModelKind::ViT;
  ViTConfig vit;
  ConvConfig conv;
  HybridConfig hybrid;
  // Patch size of the second transformer in hybrid3.
  std::size_t vit2_patch = 8;
  void validate() const;
  std::size_t image_size() const { return vit.image_size; }
};

// Backbone(s) plus head, with every parameter in one registry. Backbones are
// registered under "backbone<i>." and the head under "head.".
template <class T>
class Classifier {
 public:
  Classifier(const ModelSpec& spec, std::uint64_t seed);

  // images [B,3,H,W] -> logits [B,2]
  Tensor<T> forward(const Tensor<T>& images, Mode mode, Philox* rng = nullptr);
  // Concatenated backbone features [B, sum D_i].
  Tensor<T> features(const Tensor<T>& images, Mode mode, Philox* rng = nullptr);

  ParameterRegistry<T>& registry() { return registry_; }
  const ParameterRegistry<T>& registry() const { return registry_; }
  const ModelSpec& spec() const { return spec_; }
  std::vector<std::unique_ptr<Backbone<T>>>& backbones() { return backbones_; }

  // Freezes every backbone parameter, leaving the head trainable.
  void freeze_backbones();
  // Unfreezes the last `count` blocks of every backbone into the low-lr group.
  std::size_t unfreeze_last_blocks(std::size_t count);
  // Scalars in the last `count` blocks over all backbones.
  std::size_t last_blocks_size(std::size_t count) const;

 private:
  ModelSpec spec_;
  ParameterRegistry<T> registry_;
  std::vector<std::unique_ptr<Backbone<T>>> backbones_;
  Tensor<T> w1_, b1_, w2_, b2_;  // w1_/b1_ only for hybrids
};

// Linear head z = W^T f + b for f [B, D], W [D, K].
template <class T>
Tensor<T> linear(const Tensor<T>& f, const Tensor<T>& w, const Tensor<T>& b);

// h = relu(W1^T f + b1); z = W2^T dropout(h) + b2 on concatenated features.
template <class T>
Tensor<T> hybrid_head(const std::vector<Tensor<T>>& features, const Tensor<T>& w1, const Tensor<T>& b1,
                      const Tensor<T>& w2, const Tensor<T>& b2, double dropout, Mode mode, Philox* rng);

// Truncated normal (cut at two standard deviations).
template <class T>
Tensor<T> trunc_normal(const ad::Shape& shape, double stddev, Philox& rng);

}  // namespace jqg::models
