#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "agtm/dataset.hpp"
#include "agtm/matrix.hpp"
#include "agtm/random.hpp"

namespace agtm::test {

// Fresh scratch directory under the system temp dir.
// Overwrites every parameter block with uniform(-1, 1) values.
template <class Params>
void randomize_blocks(Params& p, std::uint64_t seed) {
  Rng rng(seed);
  p.for_each_block([&](const char*, std::span<double> b) {
    for (double& v : b) v = rng.uniform(-1.0, 1.0);
  });
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  static std::mt19937_64 gen(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() /
             ("agtm_" + name + "_" + std::to_string(gen() % 1000000007ULL));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix m(rows, cols);
  Rng rng(seed);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

// Random bipartite edge set where every user and item index in range has at
// least one edge: a spanning pass first, then extra random edges.
inline InteractionSet random_interactions(std::size_t users, std::size_t items,
                                          std::size_t extra_edges, std::uint64_t seed) {
  Rng rng(seed);
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t u = 0; u < users; ++u) edges.insert({u, rng.below(items)});
  for (std::size_t i = 0; i < items; ++i) edges.insert({rng.below(users), i});
  for (std::size_t e = 0; e < extra_edges; ++e) edges.insert({rng.below(users), rng.below(items)});
  std::vector<std::string> uids, iids;
  for (std::size_t u = 0; u < users; ++u) uids.push_back("u" + std::to_string(u));
  for (std::size_t i = 0; i < items; ++i) iids.push_back("i" + std::to_string(i));
  std::vector<Interaction> pairs;
  for (const auto& [u, i] : edges) {
    pairs.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(i)});
  }
  // Scramble pair order so the graph builder has to sort.
  rng.shuffle(std::span(pairs));
  return InteractionSet(std::move(uids), std::move(iids), std::move(pairs));
}

// Dense (U+I)x(U+I) symmetric normalized adjacency built from degree counts.
inline std::vector<std::vector<double>> dense_norm_adjacency(const InteractionSet& data) {
  const std::size_t nu = data.n_users(), n = nu + data.n_items();
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  std::vector<double> deg(n, 0.0);
  for (const auto& p : data.pairs()) {
    deg[p.user] += 1;
    deg[nu + p.item] += 1;
  }
  for (const auto& p : data.pairs()) {
    const double w = 1.0 / std::sqrt(deg[p.user] * deg[nu + p.item]);
    a[p.user][nu + p.item] = w;
    a[nu + p.item][p.user] = w;
  }
  return a;
}

// One dense propagation: [next_u; next_i] = A [eu; ei].
inline std::pair<Matrix, Matrix> dense_propagate(const std::vector<std::vector<double>>& a,
                                                 const Matrix& eu, const Matrix& ei) {
  const std::size_t nu = eu.rows(), d = eu.cols();
  Matrix nu_out(eu.rows(), d), ni_out(ei.rows(), d);
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t c = 0; c < a.size(); ++c) {
      if (a[r][c] == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) {
        const double src = c < nu ? eu(c, k) : ei(c - nu, k);
        if (r < nu) nu_out(r, k) += a[r][c] * src;
        else ni_out(r - nu, k) += a[r][c] * src;
      }
    }
  }
  return {nu_out, ni_out};
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a.data()[j] - b.data()[j]));
  return m;
}

}  // namespace agtm::test
