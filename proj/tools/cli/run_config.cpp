#include "cli/run_config.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace dialoglow::cli {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw UsageError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw UsageError(key + ": expected a nonnegative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") {
    return true;
  }
  if (v == "false" || v == "0" || v == "no") {
    return false;
  }
  throw UsageError(key + ": expected true or false, got '" + v + "'");
}

}  // namespace

KeyValues parse_key_values(std::string_view text, const std::string& origin) {
  KeyValues kv;
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (line.empty() || line.front() == '#' || line.front() == ';') {
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw UsageError(where + ": unterminated section header");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError(where + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    } else if (const auto hash = value.find(" #"); hash != std::string_view::npos) {
      value = trim(value.substr(0, hash));
    }
    if (key.empty()) {
      throw UsageError(where + ": empty key");
    }
    kv[section.empty() ? std::string(key) : section + "." + std::string(key)] = std::string(value);
  }
  return kv;
}

void RunConfig::apply(const KeyValues& kv) {
  if (auto it = kv.find("model.variant"); it != kv.end()) {
    try {
      model.variant = parse_variant(it->second);
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("model.variant: ") + e.what());
    }
    const auto d = TrainConfig::defaults_for(model.variant);
    train.epochs = d.epochs;
    train.batch_size = d.batch_size;
  }
  for (const auto& [key, v] : kv) {
    if (key == "model.variant") {
      continue;
    } else if (key == "model.embedding_dim") {
      model.embedding_dim = to_uint(key, v);
    } else if (key == "model.hidden") {
      model.hidden = to_uint(key, v);
    } else if (key == "model.n_max") {
      model.n_max = to_uint(key, v);
    } else if (key == "model.fc_dims") {
      model.fc_dims.clear();
      std::stringstream ss(v);
      for (std::string item; std::getline(ss, item, ',');) {
        model.fc_dims.push_back(to_uint(key, std::string(trim(item))));
      }
    } else if (key == "model.dropout") {
      model.dropout = to_double(key, v);
    } else if (key == "train.lr0" || key == "train.lr") {
      train.lr0 = to_double(key, v);
    } else if (key == "train.decay") {
      train.decay = to_double(key, v);
    } else if (key == "train.epochs") {
      train.epochs = to_uint(key, v);
    } else if (key == "train.batch_size") {
      train.batch_size = to_uint(key, v);
    } else if (key == "train.seed") {
      train.seed = to_uint(key, v);
    } else if (key == "train.clip_norm") {
      train.clip_norm = to_double(key, v);
    } else if (key == "train.train_embeddings") {
      train.train_embeddings = to_bool(key, v);
    } else if (key == "train.class_weighting") {
      if (v == "uniform") {
        weighting = ClassWeighting::Uniform;
      } else if (v == "inverse-frequency") {
        weighting = ClassWeighting::InverseFrequency;
      } else {
        throw UsageError(key + ": expected uniform or inverse-frequency, got '" + v + "'");
      }
    } else if (key.starts_with("train.weight.")) {
      const auto label = parse_label(key.substr(13));
      if (!label) {
        throw UsageError(key + ": unknown emotion label");
      }
      train.class_weights[index_of(*label)] = to_double(key, v);
    } else if (key == "data.embeddings") {
      embeddings = v;
    } else if (key == "data.valid") {
      valid = v;
    } else if (key == "data.valid_fraction") {
      valid_fraction = to_double(key, v);
    } else if (key == "data.min_count") {
      min_count = to_uint(key, v);
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
}

void RunConfig::validate() const {
  try {
    model.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!(valid_fraction >= 0.0 && valid_fraction < 1.0)) {
    throw UsageError("data.valid_fraction must lie in [0, 1)");
  }
}

nlohmann::ordered_json RunConfig::to_json() const {
  return {{"model", model.to_json()},
          {"train", train.to_json()},
          {"class_weighting", weighting == ClassWeighting::Uniform ? "uniform" : "inverse-frequency"},
          {"embeddings", embeddings.string()},
          {"valid", valid.string()},
          {"valid_fraction", valid_fraction},
          {"min_count", min_count}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw UsageError("cannot open config file " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig cfg;
  cfg.apply(parse_key_values(buf.str(), path.string()));
  return cfg;
}

std::filesystem::path resolve_input(const std::filesystem::path& path) {
  if (path.empty() || path.is_absolute() || std::filesystem::exists(path)) {
    return path;
  }
  if (const char* root = std::getenv("DIALOGLOW_DATA_DIR"); root != nullptr && *root != '\0') {
    auto candidate = std::filesystem::path(root) / path;
    if (std::filesystem::exists(candidate)) {
      return candidate;
    }
  }
  return path;
}

}  // namespace dialoglow::cli
