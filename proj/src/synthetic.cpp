#include "agtm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "agtm/random.hpp"

namespace agtm {
namespace {

void normalize(std::span<double> v) {
  const double norm = std::sqrt(squared_norm(v));
  if (norm > 0) {
    for (double& x : v) x /= norm;
  }
}

// k distinct draws from `pool` (partial Fisher-Yates).
std::vector<std::size_t> sample_distinct(std::vector<std::size_t> pool, std::size_t k, Rng& rng) {
  k = std::min(k, pool.size());
  for (std::size_t n = 0; n < k; ++n) {
    const auto j = n + static_cast<std::size_t>(rng.below(pool.size() - n));
    std::swap(pool[n], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

PlantedDataset make_planted(const PlantedConfig& config) {
  if (config.blocks == 0 || config.users < config.blocks || config.items < config.blocks ||
      config.per_user == 0 || config.text_dim == 0) {
    throw std::invalid_argument("planted dataset: invalid configuration");
  }
  Rng rng(config.seed);
  const auto block_of = [&](std::size_t idx, std::size_t n) { return idx * config.blocks / n; };

  std::vector<std::vector<std::size_t>> block_items(config.blocks);
  for (std::size_t i = 0; i < config.items; ++i) block_items[block_of(i, config.items)].push_back(i);

  const auto n_in = static_cast<std::size_t>(
      std::llround(static_cast<double>(config.per_user) * config.in_block));
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t u = 0; u < config.users; ++u) {
    const std::size_t b = block_of(u, config.users);
    std::vector<std::size_t> outside;
    for (std::size_t i = 0; i < config.items; ++i) {
      if (block_of(i, config.items) != b) outside.push_back(i);
    }
    auto chosen = sample_distinct(block_items[b], n_in, rng);
    const auto extra = sample_distinct(outside, config.per_user - std::min(n_in, config.per_user), rng);
    chosen.insert(chosen.end(), extra.begin(), extra.end());
    for (std::size_t i : chosen) {
      pairs.emplace_back("u" + std::to_string(u), "i" + std::to_string(i));
    }
  }

  PlantedDataset out;
  out.data = from_id_pairs(pairs);

  std::vector<std::vector<double>> directions(config.blocks,
                                              std::vector<double>(config.text_dim));
  for (auto& dir : directions) {
    for (double& x : dir) x = rng.normal();
    normalize(dir);
  }
  out.text.values = Matrix(config.items, config.text_dim);
  const double noise = config.text_noise / std::sqrt(static_cast<double>(config.text_dim));
  for (std::size_t i = 0; i < config.items; ++i) {
    out.text.ids.push_back("i" + std::to_string(i));
    auto row = out.text.values.row(i);
    const auto& dir = directions[block_of(i, config.items)];
    for (std::size_t j = 0; j < config.text_dim; ++j) row[j] = dir[j] + noise * rng.normal();
    normalize(row);
  }

  for (std::size_t u = 0; u < out.data.n_users(); ++u) {
    out.user_block.push_back(block_of(std::stoul(out.data.user_ids()[u].substr(1)), config.users));
  }
  for (std::size_t i = 0; i < out.data.n_items(); ++i) {
    out.item_block.push_back(block_of(std::stoul(out.data.item_ids()[i].substr(1)), config.items));
  }
  return out;
}

EmbeddingTable synth_embeddings(const std::vector<std::string>& ids, std::size_t dim,
                                std::uint64_t seed) {
  if (ids.empty() || dim == 0) throw std::invalid_argument("synth_embeddings: no input");
  EmbeddingTable table;
  table.ids = ids;
  table.values = Matrix(ids.size(), dim);
  Rng rng(seed);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto row = table.values.row(r);
    for (double& x : row) x = rng.normal();
    normalize(row);
  }
  return table;
}

}  // namespace agtm
