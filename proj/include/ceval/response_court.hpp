#pragma once

#include "ceval/prompt_kit.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

/// Answer extraction, gold-label canonicalization and invalid-response accounting.
namespace ceval::court {

struct ParsedPrediction {
  std::string sample_ref;
  std::string extracted;             // text after the last answer marker, trimmed
  std::optional<std::string> label;  // canonical label, set when matched or defaulted
  bool invalid = false;
  bool default_applied = false;
};

/// Finds the last "### Answer:" marker and matches the first token after it
/// (case-insensitive, optional leading quote or emphasis characters) against the
/// task's option tokens. On failure the prediction is invalid and carries the
/// first alphabet entry's label as the default. Never throws for any raw text.
ParsedPrediction extract_answer(std::string_view raw, const prompt::EvalTask& task,
                                std::string sample_ref = {});

struct LabelMap {
  std::string dataset_id;
  // raw dataset label -> canonical label. Empty means identity on canonical labels.
  std::map<std::string, std::string, std::less<>> entries;
};

/// Throws ConfigError naming the dataset and label when the raw label is
/// unmapped or maps outside the task's label set.
std::string canonicalize_gold(std::string_view raw_label, const LabelMap& map, const prompt::EvalTask& task);

struct InvalidStats {
  std::size_t invalid_count = 0;
  std::size_t total = 0;
  double ratio = 0.0;  // percent, unrounded

  double reported_ratio() const;  // rounded to 2 decimals
};

/// Throws ValidationError on empty input.
InvalidStats invalid_stats(std::span<const ParsedPrediction> predictions);
InvalidStats invalid_stats(std::size_t invalid_count, std::size_t total);
/// Pools counts across groups.
InvalidStats combine(std::span<const InvalidStats> groups);

enum class ScoringMode {
  ScoredDefaults,  // invalid responses keep the default label and are scored
  ExcludeInvalid,  // invalid responses are dropped before scoring
};

std::string_view to_string(ScoringMode mode);
ScoringMode parse_scoring_mode(std::string_view name);

/// One line of a predictions file.
struct PredictionRecord {
  std::string sample_ref;
  std::string dataset;
  std::string task;
  std::string culture;  // test culture
  std::string adapter;
  std::string input;
  std::string output;
  std::string extracted_output;
  std::string prediction;  // canonical label, including an applied default
  std::string label;       // raw gold label as it appears in the dataset
  std::string gold;        // canonical gold label
  bool invalid_response = false;
  bool default_applied = false;
};

nlohmann::json to_json(const PredictionRecord& r);
PredictionRecord prediction_from_json(const nlohmann::json& j);

}  // namespace ceval::court
