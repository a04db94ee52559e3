#include "dialoglow/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

namespace dialoglow {

namespace {

constexpr char kMagic[8] = {'D', 'L', 'G', 'W', 'C', 'K', 'P', 'T'};
constexpr std::size_t kPrefix = sizeof kMagic + 4 + 8;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(p[i]) << (8 * i);
  }
  return v;
}

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::ordered_json dir = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.params.tensors()) {
    dir.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}, {"count", t.size()}});
    offset += t.size() * 8;
  }
  const nlohmann::ordered_json header{{"config", ckpt.config.to_json()},
                                      {"vocab_hash", ckpt.vocab_hash},
                                      {"metadata", ckpt.metadata},
                                      {"tensors", std::move(dir)}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(kPrefix + text.size() + offset + 4);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& [_, t] : ckpt.params.tensors()) {
    for (double x : t.values()) {
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
    }
  }
  put_le<std::uint32_t>(out, crc_of(out.data(), out.size()));
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kPrefix + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    if (bytes.size() >= sizeof kMagic && std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
      throw CheckpointError("not a checkpoint file (bad magic)");
    }
    throw CheckpointError("checkpoint checksum error: file truncated to " + std::to_string(bytes.size()) + " bytes");
  }
  const auto stored = get_le<std::uint32_t>(bytes.data() + bytes.size() - 4);
  if (crc_of(bytes.data(), bytes.size() - 4) != stored) {
    throw CheckpointError("checkpoint checksum error: CRC-32 mismatch (file corrupt or truncated)");
  }
  const auto version = get_le<std::uint32_t>(bytes.data() + sizeof kMagic);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = get_le<std::uint64_t>(bytes.data() + sizeof kMagic + 4);
  const std::size_t body_end = bytes.size() - 4;
  if (header_len > body_end - kPrefix) {
    throw CheckpointError("checkpoint header length exceeds file size");
  }
  Checkpoint ckpt;
  const std::size_t payload = kPrefix + header_len;
  try {
    const auto header =
        nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(kPrefix),
                              bytes.begin() + static_cast<std::ptrdiff_t>(payload));
    ckpt.config = ModelConfig::from_json(header.at("config"));
    ckpt.vocab_hash = header.at("vocab_hash").get<std::string>();
    ckpt.metadata = nlohmann::ordered_json::parse(header.at("metadata").dump());
    for (const auto& entry : header.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<ad::Shape>();
      const auto off = entry.at("offset").get<std::uint64_t>();
      const auto count = entry.at("count").get<std::uint64_t>();
      if (count != ad::element_count(shape)) {
        throw CheckpointError("tensor " + name + ": element count does not match its shape");
      }
      if (off > body_end - payload || count * 8 > body_end - payload - off) {
        throw CheckpointError("tensor " + name + ": payload out of range");
      }
      std::vector<double> values(count);
      const std::uint8_t* p = bytes.data() + payload + off;
      for (std::size_t i = 0; i < count; ++i) {
        values[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
      }
      ckpt.params.tensors().emplace(name, ad::Tensor(shape, std::move(values)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid checkpoint: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CheckpointError("cannot open " + path.string() + " for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw CheckpointError("write failed: " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError("cannot open checkpoint " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

void check_compatible(const Checkpoint& ckpt, const Vocab& vocab) {
  if (ckpt.vocab_hash != vocab.hash()) {
    throw CheckpointError("vocabulary hash " + vocab.hash() + " does not match checkpoint (" + ckpt.vocab_hash + ")");
  }
  try {
    ckpt.params.check_shapes(ckpt.config, vocab.size());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint does not fit the vocabulary: ") + e.what());
  }
}

}  // namespace dialoglow
