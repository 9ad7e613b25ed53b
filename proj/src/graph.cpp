#include "agtm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "agtm/parallel.hpp"

namespace agtm {
namespace {

void build_csr(std::size_t n_rows, const std::vector<Interaction>& pairs, bool by_user,
               std::vector<std::size_t>& offsets, std::vector<std::uint32_t>& neighbors) {
  offsets.assign(n_rows + 1, 0);
  for (const auto& p : pairs) ++offsets[(by_user ? p.user : p.item) + 1];
  for (std::size_t r = 0; r < n_rows; ++r) offsets[r + 1] += offsets[r];
  neighbors.assign(pairs.size(), 0);
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (const auto& p : pairs) {
    const auto row = by_user ? p.user : p.item;
    neighbors[cursor[row]++] = by_user ? p.item : p.user;
  }
  for (std::size_t r = 0; r < n_rows; ++r) {
    std::sort(neighbors.begin() + static_cast<std::ptrdiff_t>(offsets[r]),
              neighbors.begin() + static_cast<std::ptrdiff_t>(offsets[r + 1]));
  }
}

void check_layer(const Matrix& m, std::size_t rows, const char* what) {
  if (m.rows() != rows) {
    throw std::invalid_argument(std::string(what) + " has " + std::to_string(m.rows()) +
                                " rows, graph expects " + std::to_string(rows));
  }
}

}  // namespace

InteractionGraph::InteractionGraph(const InteractionSet& train) {
  build_csr(train.n_users(), train.pairs(), true, user_offsets_, user_items_);
  build_csr(train.n_items(), train.pairs(), false, item_offsets_, item_users_);

  user_norms_.resize(user_items_.size());
  for (std::size_t u = 0; u < n_users(); ++u) {
    for (std::size_t e = user_offsets_[u]; e < user_offsets_[u + 1]; ++e) {
      user_norms_[e] = 1.0 / std::sqrt(static_cast<double>(user_degree(u)) *
                                       static_cast<double>(item_degree(user_items_[e])));
    }
  }
  item_norms_.resize(item_users_.size());
  for (std::size_t i = 0; i < n_items(); ++i) {
    for (std::size_t e = item_offsets_[i]; e < item_offsets_[i + 1]; ++e) {
      item_norms_[e] = 1.0 / std::sqrt(static_cast<double>(user_degree(item_users_[e])) *
                                       static_cast<double>(item_degree(i)));
    }
  }
}

bool InteractionGraph::has_edge(std::size_t u, std::size_t i) const {
  const auto items = user_neighbors(u);
  return std::binary_search(items.begin(), items.end(), static_cast<std::uint32_t>(i));
}

double InteractionGraph::norm(std::size_t u, std::size_t i) const {
  const auto items = user_neighbors(u);
  const auto it = std::lower_bound(items.begin(), items.end(), static_cast<std::uint32_t>(i));
  if (it == items.end() || *it != i) return 0.0;
  return user_norms(u)[static_cast<std::size_t>(it - items.begin())];
}

std::pair<Matrix, Matrix> propagate(const Matrix& layer_u, const Matrix& layer_i,
                                    const InteractionGraph& graph) {
  check_layer(layer_u, graph.n_users(), "user layer");
  check_layer(layer_i, graph.n_items(), "item layer");
  if (layer_u.cols() != layer_i.cols()) {
    throw std::invalid_argument("user and item layers differ in dimension");
  }
  const std::size_t d = layer_u.cols();
  Matrix next_u(graph.n_users(), d);
  Matrix next_i(graph.n_items(), d);
  parallel_for(graph.n_users(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t u = begin; u < end; ++u) {
      const auto items = graph.user_neighbors(u);
      const auto norms = graph.user_norms(u);
      auto out = next_u.row(u);
      for (std::size_t n = 0; n < items.size(); ++n) axpy(norms[n], layer_i.row(items[n]), out);
    }
  });
  parallel_for(graph.n_items(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto users = graph.item_neighbors(i);
      const auto norms = graph.item_norms(i);
      auto out = next_i.row(i);
      for (std::size_t n = 0; n < users.size(); ++n) axpy(norms[n], layer_u.row(users[n]), out);
    }
  });
  return {std::move(next_u), std::move(next_i)};
}

std::pair<Matrix, Matrix> propagate_backward(const Matrix& grad_next_u, const Matrix& grad_next_i,
                                             const InteractionGraph& graph) {
  // d next_u / d layer_i = A_ui and d next_i / d layer_u = A_iu = A_ui^T, so the
  // gradient w.r.t. layer_u gathers grad_next_i over the user's items, and vice versa.
  return propagate(grad_next_u, grad_next_i, graph);
}

LayerStack propagate_layers(Matrix user0, Matrix item0, const InteractionGraph& graph,
                            std::size_t layers) {
  LayerStack stack;
  stack.user_layers.reserve(layers + 1);
  stack.item_layers.reserve(layers + 1);
  stack.user_layers.push_back(std::move(user0));
  stack.item_layers.push_back(std::move(item0));
  for (std::size_t l = 0; l < layers; ++l) {
    auto [u, i] = propagate(stack.user_layers.back(), stack.item_layers.back(), graph);
    stack.user_layers.push_back(std::move(u));
    stack.item_layers.push_back(std::move(i));
  }
  return stack;
}

double combine_weight(std::size_t layers, CombineMode mode) {
  if (mode == CombineMode::paper_literal) {
    if (layers == 0) {
      throw std::domain_error("paper_literal layer combination divides by L = 0");
    }
    return 1.0 / static_cast<double>(layers);
  }
  return 1.0 / static_cast<double>(layers + 1);
}

std::pair<Matrix, Matrix> combine_layers(const LayerStack& stack, CombineMode mode) {
  if (stack.user_layers.empty() || stack.user_layers.size() != stack.item_layers.size()) {
    throw std::invalid_argument("incomplete layer stack");
  }
  const double w = combine_weight(stack.layers(), mode);
  Matrix eu(stack.user_layers[0].rows(), stack.user_layers[0].cols());
  Matrix ei(stack.item_layers[0].rows(), stack.item_layers[0].cols());
  for (std::size_t l = 0; l <= stack.layers(); ++l) {
    if (!stack.user_layers[l].same_shape(eu) || !stack.item_layers[l].same_shape(ei)) {
      throw std::invalid_argument("layer stack shapes are inconsistent");
    }
    axpy(w, stack.user_layers[l].data(), eu.data());
    axpy(w, stack.item_layers[l].data(), ei.data());
  }
  return {std::move(eu), std::move(ei)};
}

}  // namespace agtm
