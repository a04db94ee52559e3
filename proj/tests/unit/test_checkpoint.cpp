#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dialoglow/checkpoint.hpp"

using namespace dialoglow;
namespace fs = std::filesystem;

namespace {

Checkpoint sample(std::size_t vocab = 9) {
  Checkpoint c;
  c.config.embedding_dim = 4;
  c.config.hidden = 3;
  c.config.fc_dims = {5, 2};
  c.params = ModelParams::initialize(c.config, vocab, 17);
  c.params.at(param::kOutBias)[3] = -0.0;
  c.params.at(param::kOutBias)[4] = 1e-310;  // subnormal
  c.vocab_hash = "0123456789abcdef";
  c.metadata = {{"epoch", 4}, {"note", "x"}};
  return c;
}

std::vector<std::uint8_t> read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("round trip is bit exact") {
  const auto c = sample();
  const auto p = fs::temp_directory_path() / "dialoglow_test.ckpt";
  save_checkpoint(c, p);
  const auto back = load_checkpoint(p);
  CHECK(back.config == c.config);
  CHECK(back.vocab_hash == c.vocab_hash);
  CHECK(back.metadata == c.metadata);
  REQUIRE(back.params.tensors().size() == c.params.tensors().size());
  for (const auto& [name, t] : c.params.tensors()) {
    CHECK(ad::bit_equal(back.params.at(name), t));
  }
  CHECK(std::signbit(back.params.at(param::kOutBias)[3]));
  CHECK(encode_checkpoint(back) == encode_checkpoint(c));
}

TEST_CASE("layout starts with magic and version") {
  const auto bytes = encode_checkpoint(sample());
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "DLGWCKPT");
  CHECK(bytes[8] == kCheckpointVersion);
  CHECK(bytes[9] == 0);
}

TEST_CASE("every truncation is rejected") {
  const auto bytes = encode_checkpoint(sample());
  for (std::size_t n = 0; n < bytes.size(); n += 1 + n / 8) {
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
    CHECK_THROWS_AS(decode_checkpoint(cut), CheckpointError);
  }
}

TEST_CASE("corruption anywhere fails the checksum") {
  const auto bytes = encode_checkpoint(sample());
  for (std::size_t i = 8; i < bytes.size(); i += 37) {
    auto bad = bytes;
    bad[i] ^= 0x10;
    try {
      decode_checkpoint(bad);
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(std::string(e.what()).find("checksum") != std::string::npos);
    }
  }
}

TEST_CASE("unsupported version is refused") {
  // Re-seal with a valid CRC so only the version differs.
  auto bytes = encode_checkpoint(sample());
  bytes[8] = 2;
  bytes.resize(bytes.size() - 4);
  std::uint32_t crc = 0xFFFFFFFFu;
  for (auto b : bytes) {
    crc ^= b;
    for (int k = 0; k < 8; ++k) {
      crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
    }
  }
  crc ^= 0xFFFFFFFFu;
  for (int k = 0; k < 4; ++k) {
    bytes.push_back(static_cast<std::uint8_t>(crc >> (8 * k)));
  }
  try {
    decode_checkpoint(bytes);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("version 2") != std::string::npos);
  }
}

TEST_CASE("trailing CRC matches an independent CRC-32") {
  const auto bytes = encode_checkpoint(sample());
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i + 4 < bytes.size(); ++i) {
    crc ^= bytes[i];
    for (int k = 0; k < 8; ++k) {
      crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
    }
  }
  crc ^= 0xFFFFFFFFu;
  const std::size_t n = bytes.size();
  const std::uint32_t stored = bytes[n - 4] | bytes[n - 3] << 8 | bytes[n - 2] << 16 |
                               static_cast<std::uint32_t>(bytes[n - 1]) << 24;
  CHECK(stored == crc);
}

TEST_CASE("compatibility guard") {
  auto c = sample(7);
  const Vocab v;
  CHECK_THROWS_AS(check_compatible(c, v), CheckpointError);
  c.vocab_hash = v.hash();
  CHECK_NOTHROW(check_compatible(c, v));
  auto wrong = sample(9);
  wrong.vocab_hash = v.hash();
  CHECK_THROWS_AS(check_compatible(wrong, v), CheckpointError);
}

TEST_CASE("missing file and garbage") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.ckpt"), CheckpointError);
  const auto p = fs::temp_directory_path() / "dialoglow_garbage.ckpt";
  std::ofstream(p) << "not a checkpoint at all, clearly";
  CHECK_THROWS_AS(load_checkpoint(p), CheckpointError);
  CHECK(read_all(p).size() > 8);
}
