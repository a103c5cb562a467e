#include <zstd.h>

#include <algorithm>
#include <memory>
#include <string>

#include "znn/entropy.hpp"
#include "znn/error.hpp"

namespace znn {
namespace {

struct CCtxDeleter {
  void operator()(ZSTD_CCtx* c) const { ZSTD_freeCCtx(c); }
};
struct DCtxDeleter {
  void operator()(ZSTD_DCtx* d) const { ZSTD_freeDCtx(d); }
};

ZSTD_CCtx* thread_cctx() {
  thread_local std::unique_ptr<ZSTD_CCtx, CCtxDeleter> ctx = [] {
    std::unique_ptr<ZSTD_CCtx, CCtxDeleter> c(ZSTD_createCCtx());
    if (!c) throw std::bad_alloc();
    ZSTD_CCtx_setParameter(c.get(), ZSTD_c_compressionLevel, kLzLevel);
    // Sizes live in the chunk table; keep frames minimal.
    ZSTD_CCtx_setParameter(c.get(), ZSTD_c_contentSizeFlag, 0);
    ZSTD_CCtx_setParameter(c.get(), ZSTD_c_checksumFlag, 0);
    ZSTD_CCtx_setParameter(c.get(), ZSTD_c_dictIDFlag, 0);
    return c;
  }();
  return ctx.get();
}

ZSTD_DCtx* thread_dctx() {
  thread_local std::unique_ptr<ZSTD_DCtx, DCtxDeleter> ctx(ZSTD_createDCtx());
  if (!ctx) throw std::bad_alloc();
  return ctx.get();
}

}  // namespace

GroupEncoding lz_entropy_compress(ByteView input) {
  if (input.empty()) fail(ErrorCode::EmptyInput, "lz_entropy_compress on empty input");
  GroupEncoding enc;
  enc.raw_len = input.size();
  if (std::all_of(input.begin(), input.end(), [](std::uint8_t b) { return b == 0; })) {
    enc.method = Method::ZeroTruncated;
    return enc;
  }
  enc.payload.resize(ZSTD_compressBound(input.size()));
  const std::size_t n = ZSTD_compress2(thread_cctx(), enc.payload.data(), enc.payload.size(), input.data(), input.size());
  if (ZSTD_isError(n)) throw std::runtime_error(std::string("zstd: ") + ZSTD_getErrorName(n));
  if (n >= input.size()) {
    enc.method = Method::Stored;
    enc.payload.assign(input.begin(), input.end());
    return enc;
  }
  enc.payload.resize(n);
  enc.method = Method::LzEntropy;
  return enc;
}

Bytes lz_entropy_decompress(ByteView payload, std::size_t raw_len) {
  Bytes out(raw_len);
  lz_entropy_decompress_into(payload, out);
  return out;
}

void lz_entropy_decompress_into(ByteView payload, MutableByteView out) {
  const std::size_t n = ZSTD_decompressDCtx(thread_dctx(), out.data(), out.size(), payload.data(), payload.size());
  if (ZSTD_isError(n)) fail(ErrorCode::CorruptPayload, std::string("zstd: ") + ZSTD_getErrorName(n));
  if (n != out.size())
    fail(ErrorCode::CorruptPayload, "zstd frame decoded to " + std::to_string(n) + " bytes, expected " +
                                        std::to_string(out.size()));
}

}  // namespace znn
