#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agtm/checkpoint.hpp"
#include "agtm/graph.hpp"
#include "agtm/matrix.hpp"

namespace agtm {

enum class ModelKind { agtm, mf_bpr, lightgcn };

struct Ablations {
  bool no_tcm = false;   // random item table instead of condensed text
  bool no_aaum = false;  // trainable user ID table instead of attention
  bool no_ipm = false;   // no attention, no propagation: plain ID tables
  bool no_ae = false;    // item layer 0 = W x_i with x_i and W trainable

  bool operator==(const Ablations&) const = default;
};

enum class ItemSource { condensed, random, projected };

/// Which model is trained. mf_bpr and lightgcn are the ID-embedding baselines;
/// ablations apply to agtm only.
struct VariantSpec {
  ModelKind model = ModelKind::agtm;
  Ablations ablations;
  std::size_t layers = 3;
  std::size_t heads = 4;
  CombineMode combine = CombineMode::mean;

  ItemSource item_source() const;
  bool attention_users() const;
  bool propagates() const;
  std::size_t effective_layers() const { return propagates() ? layers : 0; }

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;

  /// Stable text form, e.g. "model=agtm;ablations=;layers=3;heads=4;combine_mode=mean_Lplus1".
  std::string descriptor() const;
  static VariantSpec from_descriptor(std::string_view text);

  bool operator==(const VariantSpec&) const = default;
};

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
std::string ablations_to_string(const Ablations& a);
Ablations parse_ablations(std::string_view text);
std::string_view to_string(CombineMode mode);
CombineMode parse_combine_mode(std::string_view name);

/// Trainable state. Blocks not used by the variant are empty.
struct ModelParams {
  Matrix item_emb;  // n_items x d, item layer 0
  Matrix attn;      // K x d, one attention vector per head
  Matrix user_emb;  // n_users x d
  Matrix proj_w;    // d x d_o
  Matrix raw_x;     // n_items x d_o

  template <typename F>
  void for_each_block(F&& fn) {
    if (!item_emb.empty()) fn("item_emb", item_emb);
    if (!attn.empty()) fn("attn", attn);
    if (!user_emb.empty()) fn("user_emb", user_emb);
    if (!proj_w.empty()) fn("proj_w", proj_w);
    if (!raw_x.empty()) fn("raw_x", raw_x);
  }
  template <typename F>
  void for_each_block(F&& fn) const {
    const_cast<ModelParams*>(this)->for_each_block(
        [&](const char* name, Matrix& m) { fn(name, static_cast<const Matrix&>(m)); });
  }

  std::size_t embedding_dim() const;
  std::size_t parameter_count() const;

  /// Zero-filled copy with the same block shapes.
  ModelParams zeros_like() const;

  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  bool operator==(const ModelParams&) const = default;
};

struct ModelInputs {
  std::size_t dim = 64;
  /// Condensed text vectors, n_items x d; required for ItemSource::condensed.
  const Matrix* condensed = nullptr;
  /// Raw text vectors, n_items x d_o; required for ItemSource::projected.
  const Matrix* raw = nullptr;
};

/// Allocates and initializes exactly the blocks the variant trains. Random
/// blocks use seeded Glorot-uniform draws.
ModelParams init_params(const VariantSpec& variant, const InteractionGraph& graph,
                        const ModelInputs& inputs, std::uint64_t seed);

/// Throws if the blocks present do not match the variant and graph.
void check_params(const VariantSpec& variant, const InteractionGraph& graph,
                  const ModelParams& params);

struct ForwardCache {
  Matrix item0;
  Matrix user0;
  /// Attention weights per head, aligned with the graph's user-side edges:
  /// alpha[k][user_edge_offset(u) + n] belongs to the n-th neighbor of u.
  std::vector<std::vector<double>> alpha;
  Matrix pooled;  // before layer norm
  LayerStack stack;
  Matrix final_user;
  Matrix final_item;
};

/// Attention pooling over each user's neighbors followed by layer norm.
/// Throws if a user has no neighbors.
Matrix user_init_attention(const InteractionGraph& graph, const Matrix& item_emb,
                           const Matrix& attn, ForwardCache* cache = nullptr);

/// Full forward pass: layer-0 embeddings, propagation, combination.
ForwardCache forward(const InteractionGraph& graph, const ModelParams& params,
                     const VariantSpec& variant);

/// Score: inner product of final user and item embeddings.
double predict(const Matrix& final_user, const Matrix& final_item, std::size_t u, std::size_t i);

/// Gradients on every trainable block given gradients on the final embeddings.
ModelParams backward(const Matrix& grad_final_user, const Matrix& grad_final_item,
                     const ForwardCache& cache, const InteractionGraph& graph,
                     const ModelParams& params, const VariantSpec& variant);

Checkpoint to_checkpoint(const VariantSpec& variant, const ModelParams& params);
std::pair<VariantSpec, ModelParams> from_checkpoint(const Checkpoint& checkpoint);

}  // namespace agtm
