#include "dialoglow/metrics.hpp"

#include <cstdio>
#include <string>

namespace dialoglow {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (const auto& row : counts) {
    for (auto c : row) {
      t += c;
    }
  }
  return t;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t k = 0; k < kNumConsidered; ++k) {
    t += counts[k][k];
  }
  return t;
}

std::uint64_t ConfusionMatrix::gold_count(std::size_t cls) const {
  std::uint64_t t = 0;
  for (auto c : counts.at(cls)) {
    t += c;
  }
  return t;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (std::size_t i = 0; i < kNumConsidered; ++i) {
    for (std::size_t j = 0; j < kNumConsidered; ++j) {
      counts[i][j] += other.counts[i][j];
    }
  }
  ignored += other.ignored;
  return *this;
}

ConfusionMatrix confusion(std::span<const EmotionLabel> preds, std::span<const EmotionLabel> golds) {
  if (preds.size() != golds.size()) {
    throw MetricsError("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                       std::to_string(golds.size()) + " gold labels");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!is_considered(preds[i])) {
      throw MetricsError("confusion: prediction '" + std::string(to_string(preds[i])) +
                         "' is not a considered label");
    }
    if (!is_considered(golds[i])) {
      ++cm.ignored;
      continue;
    }
    ++cm.counts[index_of(golds[i])][index_of(preds[i])];
  }
  return cm;
}

double wa(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) {
    throw MetricsError("wa: no scored utterances");
  }
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

std::array<std::optional<double>, kNumConsidered> per_class_accuracy(const ConfusionMatrix& cm) {
  std::array<std::optional<double>, kNumConsidered> acc;
  for (std::size_t k = 0; k < kNumConsidered; ++k) {
    if (const auto n = cm.gold_count(k); n > 0) {
      acc[k] = static_cast<double>(cm.counts[k][k]) / static_cast<double>(n);
    }
  }
  return acc;
}

double uwa(const ConfusionMatrix& cm) {
  double sum = 0.0;
  std::size_t present = 0;
  for (const auto& a : per_class_accuracy(cm)) {
    if (a) {
      sum += *a;
      ++present;
    }
  }
  if (present == 0) {
    throw MetricsError("uwa: no scored utterances");
  }
  return sum / static_cast<double>(present);
}

EvalReport make_report(const ConfusionMatrix& cm) {
  EvalReport r;
  r.wa = wa(cm);
  r.uwa = uwa(cm);
  r.per_class = per_class_accuracy(cm);
  r.counts = cm;
  return r;
}

EvalReport report(std::span<const EmotionLabel> preds, std::span<const EmotionLabel> golds) {
  return make_report(confusion(preds, golds));
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  nlohmann::ordered_json conf = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < kNumConsidered; ++k) {
    const std::string name(to_string(kConsideredLabels[k]));
    per[name] = per_class[k] ? nlohmann::ordered_json(*per_class[k]) : nlohmann::ordered_json(nullptr);
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    for (std::size_t j = 0; j < kNumConsidered; ++j) {
      row[std::string(to_string(kConsideredLabels[j]))] = counts.counts[k][j];
    }
    conf[name] = std::move(row);
  }
  return {{"wa", wa}, {"uwa", uwa}, {"per_class", std::move(per)}, {"confusion", std::move(conf)},
          {"ignored", counts.ignored}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  r.wa = j.at("wa").get<double>();
  r.uwa = j.at("uwa").get<double>();
  for (std::size_t k = 0; k < kNumConsidered; ++k) {
    const std::string name(to_string(kConsideredLabels[k]));
    const auto& v = j.at("per_class").at(name);
    if (!v.is_null()) {
      r.per_class[k] = v.get<double>();
    }
    for (std::size_t c = 0; c < kNumConsidered; ++c) {
      r.counts.counts[k][c] = j.at("confusion").at(name).at(std::string(to_string(kConsideredLabels[c])));
    }
  }
  r.counts.ignored = j.at("ignored").get<std::uint64_t>();
  return r;
}

namespace {

std::string percent_cell(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%8.1f", 100.0 * v);
  return buf;
}

}  // namespace

std::string table_header() {
  std::string h;
  for (const char* col : {"WA", "UWA", "Neutral", "Joy", "Sadness", "Anger"}) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%8s", col);
    h += buf;
  }
  return h;
}

std::string table_row(const EvalReport& r) {
  std::string row = percent_cell(r.wa) + percent_cell(r.uwa);
  for (const auto& a : r.per_class) {
    row += a ? percent_cell(*a) : std::string("       -");
  }
  return row;
}

}  // namespace dialoglow
