#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "claimcheck/error.hpp"
#include "claimcheck/tensor.hpp"
#include "synthetic.hpp"

using namespace claimcheck;

namespace {

const std::filesystem::path kFixtures = CLAIMCHECK_FIXTURES;

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("2 x 4 sentence tensor") {
  const EmbeddingTensor t = load_embeddings(kFixtures / "sentence_2x4.ckem");
  CHECK(t.kind() == TensorKind::sentence);
  CHECK(t.unit_count() == 2);
  CHECK(t.dim() == 4);
  CHECK(t.values().size() * sizeof(float) == 32);
  CHECK(t.row(1)[2] == 0.5f);
  CHECK(t.find("u2") == 1);
  CHECK(t.find("nope") == EmbeddingTensor::npos);
}

TEST_CASE("decode errors have distinct codes") {
  try {
    load_embeddings(kFixtures / "sentence_truncated.ckem");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kShapeMismatch);
  }
  try {
    load_embeddings(kFixtures / "bad_magic.ckem");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMagicMismatch);
  }
  try {
    load_embeddings(kFixtures / "sentence_nan.ckem");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFinite);
    CHECK(std::string(e.what()).find("unit 1") != std::string::npos);
  }
}

TEST_CASE("token_layers fixture") {
  const EmbeddingTensor t = load_embeddings(kFixtures / "token_layers_en.ckem");
  CHECK(t.kind() == TensorKind::token_layers);
  CHECK(t.layers() == 4);
  CHECK(t.dim() == 8);
  CHECK(t.tokens(0) == 8);
  CHECK(t.tokens(1) == 6);
  const auto block = t.unit_block(1);
  CHECK(block.size() == 4 * 6 * 8);
  // value = unit + 0.5 layer + 0.01 token + 0.001 dim
  CHECK(block[(2 * 6 + 3) * 8 + 5] == doctest::Approx(1 + 1.0 + 0.03 + 0.005).epsilon(1e-6));
}

TEST_CASE("encode is the inverse of decode") {
  for (const char* name : {"sentence_2x4.ckem", "token_layers_en.ckem"}) {
    const auto bytes = read_bytes(kFixtures / name);
    const EmbeddingTensor t = decode_embeddings(bytes);
    CHECK(encode_embeddings(t) == bytes);
  }
}

TEST_CASE("constructor validation") {
  CHECK_THROWS_AS(EmbeddingTensor::sentence({"a", "a"}, 1, {1.f, 2.f}), Error);
  CHECK_THROWS_AS(EmbeddingTensor::sentence({"a"}, 2, {1.f}), Error);
  CHECK_THROWS_AS(EmbeddingTensor::sentence({"a"}, 1, {INFINITY}), Error);
  CHECK_THROWS_AS(EmbeddingTensor::token_layers({"a"}, 2, 1, {2}, {1.f, 2.f, 3.f}), Error);
  const auto ok = EmbeddingTensor::token_layers({"a"}, 2, 1, {2}, {1.f, 2.f, 3.f, 4.f});
  CHECK(ok.unit_block(0).size() == 4);
}

TEST_CASE("write/load round trip") {
  const auto dir = synth::scratch_dir("tensor-roundtrip");
  const auto t = EmbeddingTensor::sentence({"x", "y", "z"}, 2, {1, 2, 3, 4, 5, 6});
  write_embeddings(dir / "t.ckem", t);
  CHECK(load_embeddings(dir / "t.ckem") == t);
  std::filesystem::remove_all(dir);
}
