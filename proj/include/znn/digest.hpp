#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>

#include "znn/bytes.hpp"

namespace znn {

using Sha256Digest = std::array<std::uint8_t, 32>;

// Incremental SHA-256 (OpenSSL EVP underneath).
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(Sha256&&) noexcept;
  Sha256& operator=(Sha256&&) noexcept;

  void update(ByteView data);
  Sha256Digest finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Sha256Digest sha256(ByteView data);
std::string to_hex(ByteView data);

}  // namespace znn
