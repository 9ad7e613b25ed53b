#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agtm/dataset.hpp"
#include "agtm/embedding_io.hpp"

namespace agtm {

/// Users and items split into equal blocks; each user interacts mostly inside
/// its own block. Item "text" vectors are unit-norm noisy copies of a per-block
/// direction.
struct PlantedConfig {
  std::size_t users = 200;
  std::size_t items = 100;
  std::size_t blocks = 4;
  std::size_t per_user = 12;
  double in_block = 0.9;
  std::size_t text_dim = 32;
  double text_noise = 0.5;
  std::uint64_t seed = 1;
};

struct PlantedDataset {
  InteractionSet data;
  EmbeddingTable text;
  std::vector<std::size_t> user_block;
  std::vector<std::size_t> item_block;
};

PlantedDataset make_planted(const PlantedConfig& config);

/// Seeded Gaussian rows scaled to unit norm.
EmbeddingTable synth_embeddings(const std::vector<std::string>& ids, std::size_t dim,
                                std::uint64_t seed);

}  // namespace agtm
