#include "ceval/response_court.hpp"

#include "ceval/common.hpp"

#include <algorithm>
#include <cctype>

namespace ceval::court {

namespace {

bool is_ascii_alnum(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_lead_decoration(char c) {
  return c == '"' || c == '\'' || c == '(' || c == '[' || c == '*' || c == '`';
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

ParsedPrediction extract_answer(std::string_view raw, const prompt::EvalTask& task, std::string sample_ref) {
  const auto& alphabet = prompt::label_alphabet(task);
  ParsedPrediction p;
  p.sample_ref = std::move(sample_ref);

  const auto marker = raw.rfind(prompt::kAnswerMarker);
  if (marker != std::string_view::npos) {
    auto tail = raw.substr(marker + prompt::kAnswerMarker.size());
    p.extracted = std::string(trim(tail));

    std::string_view rest = p.extracted;
    while (!rest.empty() && (std::isspace(static_cast<unsigned char>(rest.front())) ||
                             is_lead_decoration(rest.front()))) {
      rest.remove_prefix(1);
    }
    std::size_t len = 0;
    while (len < rest.size() && is_ascii_alnum(rest[len])) ++len;
    const auto token = rest.substr(0, len);
    if (!token.empty()) {
      for (const auto& entry : alphabet) {
        if (iequals(token, entry.token)) {
          p.label = entry.label;
          return p;
        }
      }
    }
  }

  p.invalid = true;
  p.default_applied = true;
  p.label = alphabet.front().label;
  return p;
}

std::string canonicalize_gold(std::string_view raw_label, const LabelMap& map, const prompt::EvalTask& task) {
  const auto labels = prompt::label_set(task);
  std::string mapped;
  if (map.entries.empty()) {
    mapped = std::string(raw_label);
  } else {
    auto it = map.entries.find(raw_label);
    if (it == map.entries.end()) {
      throw ConfigError("dataset '" + map.dataset_id + "': label '" + std::string(raw_label) +
                        "' has no entry in the label map");
    }
    mapped = it->second;
  }
  if (std::find(labels.begin(), labels.end(), mapped) == labels.end()) {
    throw ConfigError("dataset '" + map.dataset_id + "': label '" + std::string(raw_label) + "' maps to '" +
                      mapped + "', which is not a label of task " + task.name);
  }
  return mapped;
}

double InvalidStats::reported_ratio() const { return round_to(ratio, 2); }

InvalidStats invalid_stats(std::size_t invalid_count, std::size_t total) {
  if (total == 0) throw ValidationError("invalid-response statistics need at least one prediction");
  if (invalid_count > total) throw ValidationError("invalid count exceeds total");
  return {invalid_count, total, 100.0 * static_cast<double>(invalid_count) / static_cast<double>(total)};
}

InvalidStats invalid_stats(std::span<const ParsedPrediction> predictions) {
  const auto invalid = static_cast<std::size_t>(
      std::count_if(predictions.begin(), predictions.end(), [](const auto& p) { return p.invalid; }));
  return invalid_stats(invalid, predictions.size());
}

InvalidStats combine(std::span<const InvalidStats> groups) {
  std::size_t invalid = 0, total = 0;
  for (const auto& g : groups) {
    invalid += g.invalid_count;
    total += g.total;
  }
  return invalid_stats(invalid, total);
}

std::string_view to_string(ScoringMode mode) {
  return mode == ScoringMode::ScoredDefaults ? "scored-defaults" : "exclude-invalid";
}

ScoringMode parse_scoring_mode(std::string_view name) {
  if (name == "scored-defaults") return ScoringMode::ScoredDefaults;
  if (name == "exclude-invalid") return ScoringMode::ExcludeInvalid;
  throw ValidationError("unknown scoring mode '" + std::string(name) + "'");
}

nlohmann::json to_json(const PredictionRecord& r) {
  return {{"sample_ref", r.sample_ref},
          {"dataset", r.dataset},
          {"task", r.task},
          {"culture", r.culture},
          {"adapter", r.adapter},
          {"input", r.input},
          {"output", r.output},
          {"extracted_output", r.extracted_output},
          {"prediction", r.prediction},
          {"label", r.label},
          {"gold", r.gold},
          {"invalid_response", r.invalid_response},
          {"default_applied", r.default_applied}};
}

PredictionRecord prediction_from_json(const nlohmann::json& j) {
  PredictionRecord r;
  r.sample_ref = j.at("sample_ref").get<std::string>();
  r.dataset = j.at("dataset").get<std::string>();
  r.task = j.at("task").get<std::string>();
  r.culture = j.at("culture").get<std::string>();
  r.adapter = j.at("adapter").get<std::string>();
  r.input = j.value("input", "");
  r.output = j.value("output", "");
  r.extracted_output = j.value("extracted_output", "");
  r.prediction = j.at("prediction").get<std::string>();
  r.label = j.value("label", "");
  r.gold = j.at("gold").get<std::string>();
  r.invalid_response = j.at("invalid_response").get<bool>();
  r.default_applied = j.value("default_applied", r.invalid_response);
  return r;
}

}  // namespace ceval::court
