#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <vector>

/// Evaluation prompt rendering and per-task answer alphabets.
namespace ceval::prompt {

struct AlphabetEntry {
  std::string token;  // what the model is asked to answer with: "1", "0", "A"
  std::string text;   // option phrase shown next to the token, may be empty
  std::string label;  // harness-canonical label: "OFF", "NOT", "A"
};

using Alphabet = std::vector<AlphabetEntry>;

struct EvalTask {
  std::string name;    // dataset-facing name, e.g. "misogyny_detect"
  std::string family;  // catalog template id, e.g. "entity_detect"
  std::string entity;  // entity_detect only

  friend bool operator==(const EvalTask&, const EvalTask&) = default;
};

/// Resolves a task name to its template family. Names registered in the
/// catalog map to themselves; any other "<x>_detect" is an entity detector.
EvalTask parse_task(std::string_view name);

/// "bias_on_gender_detect" -> "gender bias", "negative_stance_detect" -> "negative stance".
std::string derive_entity(std::string_view task_name);

const Alphabet& label_alphabet(const EvalTask& task);
const Alphabet& label_alphabet(std::string_view task_name);
/// Distinct canonical labels in alphabet order.
std::vector<std::string> label_set(const EvalTask& task);

std::string zero_shot_preamble(std::string_view country);

/// Fixed greedy decoding: temperature 0, 25 new tokens.
struct DecodeParams {
  double temperature = 0.0;
  int max_new_tokens = 25;
  bool greedy = true;

  friend bool operator==(const DecodeParams&, const DecodeParams&) = default;
};

nlohmann::json to_json(const DecodeParams& d);
DecodeParams decode_from_json(const nlohmann::json& j);

struct EvalSample {
  std::string sample_id;
  std::string culture;  // culture code
  EvalTask task;
  std::string input_txt;
  std::string gold_raw;
  std::string gold;
};

struct PromptInstance {
  std::string text;
  EvalTask task;
  std::string sample_ref;
  DecodeParams decode;
};

inline constexpr std::string_view kAnswerMarker = "### Answer:";

/// Renders the task's template around the sample input. With `with_preamble`
/// the zero-shot cultural preamble for `country` goes first, on its own line.
/// Throws ValidationError for unknown tasks, a missing entity, empty input, or
/// an input that itself contains the answer marker.
PromptInstance build_prompt(const EvalSample& sample, bool with_preamble, std::string_view country);

std::string_view catalog_version();
/// Every task id with its own template or a shared one (offensive_detect, abusive_detect, ...).
std::vector<std::string> registered_task_ids();

}  // namespace ceval::prompt
