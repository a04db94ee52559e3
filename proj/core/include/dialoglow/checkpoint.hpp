#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dialoglow/model.hpp"

namespace dialoglow {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  std::string vocab_hash;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
};

// Layout: "DLGWCKPT" | u32 version | u64 header length | UTF-8 JSON header
// (config, vocab hash, metadata, tensor directory) | little-endian f64
// payloads | u32 CRC-32 of everything before it.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws CheckpointError unless the vocabulary hash and size match the checkpoint.
void check_compatible(const Checkpoint& ckpt, const Vocab& vocab);

}  // namespace dialoglow
