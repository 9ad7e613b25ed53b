#include "agtm/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace agtm {

using detail::checked_u32;
using detail::get_f32;
using detail::get_u32;
using detail::put_f32;
using detail::put_u32;

const Matrix* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, m] : blocks) {
    if (n == name) return &m;
  }
  return nullptr;
}

void write_checkpoint(const std::filesystem::path& file, const Checkpoint& checkpoint) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.write("AGTC", 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, checked_u32(checkpoint.descriptor.size(), "descriptor"));
  out.write(checkpoint.descriptor.data(), static_cast<std::streamsize>(checkpoint.descriptor.size()));
  for (const auto& [name, m] : checkpoint.blocks) {
    put_u32(out, checked_u32(name.size(), "block name"));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, checked_u32(m.rows(), "rows"));
    put_u32(out, checked_u32(m.cols(), "cols"));
    for (double v : m.data()) put_f32(out, v);
  }
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "AGTC") {
    throw std::runtime_error(file.string() + ": bad magic, not an AGTC checkpoint");
  }
  const auto version = get_u32(in, "version");
  if (version != kCheckpointVersion) {
    throw std::runtime_error(file.string() + ": unsupported checkpoint version " +
                             std::to_string(version));
  }
  const auto read_string = [&](std::uint32_t n) {
    std::string s(n, '\0');
    if (!in.read(s.data(), n)) throw std::runtime_error(file.string() + ": truncated string");
    return s;
  };
  Checkpoint cp;
  cp.descriptor = read_string(get_u32(in, "descriptor length"));
  std::uint32_t name_len = 0;
  while (detail::try_get_u32(in, name_len)) {
    std::string name = read_string(name_len);
    const auto rows = get_u32(in, "rows");
    const auto cols = get_u32(in, "cols");
    Matrix m(rows, cols);
    for (double& v : m.data()) v = get_f32(in, "block data");
    cp.blocks.emplace_back(std::move(name), std::move(m));
  }
  if (in.gcount() != 0) throw std::runtime_error(file.string() + ": trailing bytes");
  return cp;
}

Matrix round_to_float(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

}  // namespace agtm
