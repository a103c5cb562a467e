#include <doctest.h>

#include <sstream>

#include "cli.hpp"
#include "fixtures.hpp"
#include "json.hpp"

using namespace znn;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("cli compress, inspect and decompress") {
  const Bytes file = testing::make_safetensors(
      {{"a", "BF16", {4096}, testing::gaussian_weights(4096, DType::bf16(), 0.02, 1)},
       {"b", "F32", {1024}, testing::clean_fp32_weights(1024, 0.02, 2)}});
  const std::string in = testing::temp_path("cli.safetensors");
  const std::string packed = testing::temp_path("cli.znn");
  const std::string out = testing::temp_path("cli.out");
  testing::write_file(in, file);

  auto r = run({"compress", in, "-o", packed, "--mode", "auto"});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("compressed size:") != std::string::npos);

  r = run({"inspect", packed, "--json"});
  CHECK(r.code == cli::kOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.contains("total_pct"));

  r = run({"decompress", packed, "-o", out});
  CHECK(r.code == cli::kOk);
  CHECK(testing::read_file(out) == file);

  r = run({"hist", in});
  CHECK(r.code == cli::kOk);
  r = run({"report", in, "--json"});
  CHECK(r.code == cli::kOk);
  CHECK(nlohmann::json::parse(r.out)["tensors"].size() == 2);
}

TEST_CASE("cli delta and patch") {
  const Bytes w = testing::gaussian_weights(8192, DType::bf16(), 0.02, 3);
  const std::string p1 = testing::temp_path("cli-ep1.safetensors"), p2 = testing::temp_path("cli-ep2.safetensors");
  const std::string d = testing::temp_path("cli-d.znn"), r2 = testing::temp_path("cli-ep2r.safetensors");
  testing::write_file(p1, testing::make_safetensors({{"w", "BF16", {8192}, w}}));
  const Bytes f2 = testing::make_safetensors({{"w", "BF16", {8192}, testing::perturb(w, DType::bf16(), 0.2, 1, 4)}});
  testing::write_file(p2, f2);

  CHECK(run({"delta", "--base", p1, p2, "-o", d}).code == cli::kOk);
  CHECK(run({"patch", "--base", p1, d, "-o", r2}).code == cli::kOk);
  CHECK(testing::read_file(r2) == f2);
  CHECK(run({"patch", "--base", p2, d, "-o", r2}).code == cli::kData);
}

TEST_CASE("cli plan") {
  auto r = run({"plan", "--checkpoints", "20", "--period", "10", "--mode", "chain"});
  CHECK(r.code == cli::kOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["entries"].size() == 20);
  CHECK(run({"plan", "--checkpoints", "20", "--period", "0"}).code == cli::kUsage);
}

TEST_CASE("cli exit codes") {
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"bogus"}).code == cli::kUsage);
  CHECK(run({"compress", "/nonexistent/file", "-o", testing::temp_path("x.znn")}).code == cli::kIo);
  CHECK(run({"compress", testing::temp_path("cli.safetensors"), "-o", testing::temp_path("y.znn"), "--dtype", "fp8"})
            .code == cli::kUsage);
  const std::string junk = testing::temp_path("junk.znn");
  testing::write_file(junk, testing::random_bytes(100, 5));
  CHECK(run({"decompress", junk, "-o", testing::temp_path("junk.out")}).code == cli::kData);
}
