#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace gahcda {

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

std::string sha1_hex(std::span<const std::uint8_t> bytes);

/// SHA-1 of `blob <size>\0<bytes>`, i.e. the hash git assigns the file.
std::string git_blob_hash(std::span<const std::uint8_t> bytes);

std::string git_blob_hash_file(const std::string& path);

/// Incremental SHA-1 for hashing structured content without copying it.
class Sha1 {
 public:
  Sha1();
  ~Sha1();
  Sha1(const Sha1&) = delete;
  Sha1& operator=(const Sha1&) = delete;

  void update(const void* data, std::size_t size);
  template <class T>
  void update_values(std::span<const T> values) {
    update(values.data(), values.size_bytes());
  }
  std::string hex_digest();

 private:
  void* ctx_;
};

}  // namespace gahcda
