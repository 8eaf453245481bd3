#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace dafa {

// FNV-1a 64-bit, used for content identity checks (dataset hash, config
// hash). Not cryptographic.
class Fnv1a {
public:
  Fnv1a& update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  std::uint64_t digest() const { return state_; }

private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t hash_bytes(std::string_view bytes);
std::string hash_hex(std::uint64_t h);

// splitmix64 finalizer; decorrelates derived seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);
// Named substream: mix_seed(seed, fnv1a(label)).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::string_view bytes);

}  // namespace dafa
