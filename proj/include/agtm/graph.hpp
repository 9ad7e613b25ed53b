#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "agtm/dataset.hpp"
#include "agtm/matrix.hpp"

namespace agtm {

/// Bipartite training graph in CSR form on both sides, with the symmetric
/// normalization 1/sqrt(|N_u| |N_i|) stored per edge.
class InteractionGraph {
 public:
  InteractionGraph() = default;
  explicit InteractionGraph(const InteractionSet& train);

  std::size_t n_users() const { return user_offsets_.empty() ? 0 : user_offsets_.size() - 1; }
  std::size_t n_items() const { return item_offsets_.empty() ? 0 : item_offsets_.size() - 1; }
  std::size_t n_edges() const { return user_items_.size(); }

  std::span<const std::uint32_t> user_neighbors(std::size_t u) const {
    return {user_items_.data() + user_offsets_[u], user_offsets_[u + 1] - user_offsets_[u]};
  }
  std::span<const double> user_norms(std::size_t u) const {
    return {user_norms_.data() + user_offsets_[u], user_offsets_[u + 1] - user_offsets_[u]};
  }
  std::span<const std::uint32_t> item_neighbors(std::size_t i) const {
    return {item_users_.data() + item_offsets_[i], item_offsets_[i + 1] - item_offsets_[i]};
  }
  std::span<const double> item_norms(std::size_t i) const {
    return {item_norms_.data() + item_offsets_[i], item_offsets_[i + 1] - item_offsets_[i]};
  }

  /// Offset of u's first edge in the user-side edge arrays.
  std::size_t user_edge_offset(std::size_t u) const { return user_offsets_[u]; }

  std::size_t user_degree(std::size_t u) const { return user_offsets_[u + 1] - user_offsets_[u]; }
  std::size_t item_degree(std::size_t i) const { return item_offsets_[i + 1] - item_offsets_[i]; }

  bool has_edge(std::size_t u, std::size_t i) const;

  /// Normalization coefficient of edge (u, i); 0 when absent.
  double norm(std::size_t u, std::size_t i) const;

 private:
  std::vector<std::size_t> user_offsets_;
  std::vector<std::uint32_t> user_items_;
  std::vector<double> user_norms_;
  std::vector<std::size_t> item_offsets_;
  std::vector<std::uint32_t> item_users_;
  std::vector<double> item_norms_;
};

/// Per-layer embeddings e^(0..L) for both sides.
struct LayerStack {
  std::vector<Matrix> user_layers;
  std::vector<Matrix> item_layers;

  std::size_t layers() const { return user_layers.empty() ? 0 : user_layers.size() - 1; }
};

/// One synchronous propagation round; both outputs read only the inputs.
std::pair<Matrix, Matrix> propagate(const Matrix& layer_u, const Matrix& layer_i,
                                    const InteractionGraph& graph);

/// Adjoint of propagate. The normalized adjacency is symmetric, so this is the
/// same operator applied to the upstream gradients.
std::pair<Matrix, Matrix> propagate_backward(const Matrix& grad_next_u, const Matrix& grad_next_i,
                                             const InteractionGraph& graph);

/// Builds e^(0..layers) from the layer-0 embeddings.
LayerStack propagate_layers(Matrix user0, Matrix item0, const InteractionGraph& graph,
                            std::size_t layers);

enum class CombineMode {
  mean,           // divide the sum of L+1 layers by L+1
  paper_literal,  // divide by L
};

/// Weight applied to every layer when combining.
double combine_weight(std::size_t layers, CombineMode mode);

std::pair<Matrix, Matrix> combine_layers(const LayerStack& stack, CombineMode mode);

}  // namespace agtm
