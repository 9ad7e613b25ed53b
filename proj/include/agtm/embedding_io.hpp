#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "agtm/matrix.hpp"

namespace agtm {

/// Per-item vectors with their external ids, row-aligned.
struct EmbeddingTable {
  std::vector<std::string> ids;
  Matrix values;
};

/// Binary layout: "AGTM", u32 version (1), u32 n_items, u32 dim, then
/// n_items * dim float32 row-major, all little-endian. Ids go to a sidecar
/// `items.txt` in the same directory, one per line.
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

void write_embedding_matrix(const std::filesystem::path& file, const Matrix& values);
Matrix read_embedding_matrix(const std::filesystem::path& file);

std::filesystem::path sidecar_ids_path(const std::filesystem::path& file);

void write_embeddings(const std::filesystem::path& file, const EmbeddingTable& table);

/// Reads the matrix and its sidecar; the sidecar line count must equal n_items.
EmbeddingTable read_embeddings(const std::filesystem::path& file);

/// Rows of `table` reordered to follow `item_ids`. Items without a row are
/// reported in `missing` and left as zero rows.
Matrix align_rows(const EmbeddingTable& table, const std::vector<std::string>& item_ids,
                  std::vector<std::size_t>* missing);

}  // namespace agtm
