#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace agtm {

// FNV-1a, 64-bit.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n);
  void update(std::string_view s) { update(s.data(), s.size()); }
  template <typename T>
  void update_value(const T& v) {
    update(&v, sizeof(T));
  }
  std::uint64_t value() const { return hash_; }
  std::string hex() const;

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

std::string file_digest(const std::filesystem::path& path);

}  // namespace agtm
