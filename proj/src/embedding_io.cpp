#include "agtm/embedding_io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "binary_io.hpp"

namespace agtm {

using detail::checked_u32;
using detail::get_f32;
using detail::get_u32;
using detail::put_f32;
using detail::put_u32;

void write_embedding_matrix(const std::filesystem::path& file, const Matrix& values) {
  if (!all_finite(values.data())) {
    throw std::invalid_argument("refusing to write non-finite embeddings to " + file.string());
  }
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.write("AGTM", 4);
  put_u32(out, kEmbeddingFormatVersion);
  put_u32(out, checked_u32(values.rows(), "n_items"));
  put_u32(out, checked_u32(values.cols(), "dim"));
  for (double v : values.data()) put_f32(out, v);
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

Matrix read_embedding_matrix(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "AGTM") {
    throw std::runtime_error(file.string() + ": bad magic, not an AGTM embedding file");
  }
  const auto version = get_u32(in, "version");
  if (version != kEmbeddingFormatVersion) {
    throw std::runtime_error(file.string() + ": unsupported version " + std::to_string(version));
  }
  const auto rows = get_u32(in, "n_items");
  const auto cols = get_u32(in, "dim");
  Matrix m(rows, cols);
  for (double& v : m.data()) {
    v = get_f32(in, "embedding data");
    if (!std::isfinite(v)) throw std::runtime_error(file.string() + ": non-finite value");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error(file.string() + ": trailing bytes after embedding data");
  }
  return m;
}

std::filesystem::path sidecar_ids_path(const std::filesystem::path& file) {
  return file.parent_path() / "items.txt";
}

void write_embeddings(const std::filesystem::path& file, const EmbeddingTable& table) {
  if (table.ids.size() != table.values.rows()) {
    throw std::invalid_argument("embedding ids and rows differ in count");
  }
  write_embedding_matrix(file, table.values);
  std::ofstream ids(sidecar_ids_path(file), std::ios::binary);
  if (!ids) throw std::runtime_error("cannot write " + sidecar_ids_path(file).string());
  for (const auto& id : table.ids) {
    if (id.empty() || id.find_first_of("\n\r") != std::string::npos) {
      throw std::invalid_argument("item id cannot be written to items.txt: '" + id + "'");
    }
    ids << id << '\n';
  }
}

EmbeddingTable read_embeddings(const std::filesystem::path& file) {
  EmbeddingTable table;
  table.values = read_embedding_matrix(file);
  const auto ids_path = sidecar_ids_path(file);
  std::ifstream ids(ids_path);
  if (!ids) throw std::runtime_error("missing sidecar " + ids_path.string());
  std::string line;
  while (std::getline(ids, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw std::runtime_error(ids_path.string() + ": empty item id");
    table.ids.push_back(line);
  }
  if (table.ids.size() != table.values.rows()) {
    throw std::runtime_error(ids_path.string() + " lists " + std::to_string(table.ids.size()) +
                             " ids but the header declares " +
                             std::to_string(table.values.rows()) + " items");
  }
  return table;
}

Matrix align_rows(const EmbeddingTable& table, const std::vector<std::string>& item_ids,
                  std::vector<std::size_t>* missing) {
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t r = 0; r < table.ids.size(); ++r) row_of.emplace(table.ids[r], r);
  Matrix out(item_ids.size(), table.values.cols());
  for (std::size_t i = 0; i < item_ids.size(); ++i) {
    const auto it = row_of.find(item_ids[i]);
    if (it == row_of.end()) {
      if (missing != nullptr) missing->push_back(i);
      continue;
    }
    const auto src = table.values.row(it->second);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace agtm
