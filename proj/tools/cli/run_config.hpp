#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "dialoglow/model.hpp"
#include "dialoglow/train.hpp"

namespace dialoglow::cli {

/// Bad config file or flag value; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "section.key" -> raw value. Lines are `[section]`, `key = value`, blank,
/// or comments starting with '#' or ';'. Values may be double-quoted.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(std::string_view text, const std::string& origin = "<config>");

struct RunConfig {
  ModelConfig model;
  TrainConfig train = TrainConfig::defaults_for(Variant::SaBiLstm);
  ClassWeighting weighting = ClassWeighting::Uniform;
  std::filesystem::path embeddings;  // empty: random init
  std::filesystem::path valid;       // empty: hold out valid_fraction of train
  double valid_fraction = 0.0;
  std::size_t min_count = 1;

  /// Applies every key, throwing UsageError on unknown keys or bad values.
  /// Variant-dependent defaults (epochs, batch size) follow model.variant
  /// unless set explicitly.
  void apply(const KeyValues& kv);
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

/// Resolves a relative input path against DIALOGLOW_DATA_DIR when it does
/// not exist relative to the working directory.
std::filesystem::path resolve_input(const std::filesystem::path& path);

}  // namespace dialoglow::cli
