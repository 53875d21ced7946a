#include "ceval/prompt_kit.hpp"

#include "ceval/common.hpp"
#include "ceval/prompt_catalog_data.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace ceval::prompt {

namespace {

struct TemplateEntry {
  std::string template_text;
  Alphabet alphabet;
};

struct Catalog {
  std::string version;
  std::string preamble;
  std::map<std::string, TemplateEntry, std::less<>> families;
  std::map<std::string, std::string, std::less<>> alias_to_family;
};

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

Catalog load_catalog() {
  auto j = nlohmann::json::parse(detail::kPromptCatalogJson);
  Catalog c;
  c.version = j.at("catalog_version").get<std::string>();
  c.preamble = j.at("preamble").get<std::string>();
  for (const auto& t : j.at("tasks")) {
    TemplateEntry e;
    e.template_text = t.at("template").get<std::string>();
    std::set<std::string> tokens;
    for (const auto& o : t.at("options")) {
      AlphabetEntry a{o.at("token").get<std::string>(), o.at("text").get<std::string>(),
                      o.at("label").get<std::string>()};
      if (!tokens.insert(to_lower(a.token)).second) {
        throw Error("prompt catalog: duplicate option token '" + a.token + "'");
      }
      e.alphabet.push_back(std::move(a));
    }
    auto id = t.at("id").get<std::string>();
    c.alias_to_family[id] = id;
    if (auto it = t.find("shares_template_with"); it != t.end()) {
      for (const auto& alias : *it) c.alias_to_family[alias.get<std::string>()] = id;
    }
    c.families.emplace(std::move(id), std::move(e));
  }
  return c;
}

const Catalog& catalog() {
  static const Catalog c = load_catalog();
  return c;
}

const TemplateEntry& entry_for(const EvalTask& task) {
  auto it = catalog().families.find(task.family);
  if (it == catalog().families.end()) throw ValidationError("unknown task '" + task.name + "'");
  return it->second;
}

constexpr std::string_view kDetectSuffix = "_detect";
constexpr std::string_view kEntityFamily = "entity_detect";

}  // namespace

std::string derive_entity(std::string_view task_name) {
  if (task_name.size() <= kDetectSuffix.size() || !task_name.ends_with(kDetectSuffix)) {
    throw ValidationError("task name '" + std::string(task_name) + "' does not end with _detect");
  }
  std::string stem(task_name.substr(0, task_name.size() - kDetectSuffix.size()));
  constexpr std::string_view kBiasOn = "bias_on_";
  if (stem.starts_with(kBiasOn) && stem.size() > kBiasOn.size()) {
    stem = stem.substr(kBiasOn.size()) + "_bias";
  }
  for (char& ch : stem) {
    if (ch == '_') ch = ' ';
  }
  if (is_blank(stem)) throw ValidationError("task name '" + std::string(task_name) + "' has no entity");
  return stem;
}

EvalTask parse_task(std::string_view name) {
  const auto& aliases = catalog().alias_to_family;
  if (auto it = aliases.find(name); it != aliases.end()) {
    return {std::string(name), it->second, {}};
  }
  if (name.ends_with(kDetectSuffix)) {
    return {std::string(name), std::string(kEntityFamily), derive_entity(name)};
  }
  throw ValidationError("unknown task '" + std::string(name) + "'");
}

const Alphabet& label_alphabet(const EvalTask& task) { return entry_for(task).alphabet; }

const Alphabet& label_alphabet(std::string_view task_name) { return label_alphabet(parse_task(task_name)); }

std::vector<std::string> label_set(const EvalTask& task) {
  std::vector<std::string> labels;
  for (const auto& e : label_alphabet(task)) {
    if (std::find(labels.begin(), labels.end(), e.label) == labels.end()) labels.push_back(e.label);
  }
  return labels;
}

std::string zero_shot_preamble(std::string_view country) {
  if (is_blank(country)) throw ValidationError("zero-shot preamble needs a country");
  std::string text = catalog().preamble;
  replace_all(text, "{country}", country);
  return text;
}

nlohmann::json to_json(const DecodeParams& d) {
  return {{"temperature", d.temperature}, {"max_new_tokens", d.max_new_tokens}, {"greedy", d.greedy}};
}

DecodeParams decode_from_json(const nlohmann::json& j) {
  DecodeParams d;
  d.temperature = j.value("temperature", d.temperature);
  d.max_new_tokens = j.value("max_new_tokens", d.max_new_tokens);
  d.greedy = j.value("greedy", d.greedy);
  return d;
}

PromptInstance build_prompt(const EvalSample& sample, bool with_preamble, std::string_view country) {
  const auto& entry = entry_for(sample.task);
  if (sample.task.family == kEntityFamily && is_blank(sample.task.entity)) {
    throw ValidationError("task '" + sample.task.name + "' needs an entity");
  }
  if (is_blank(sample.input_txt)) throw ValidationError("sample " + sample.sample_id + " has empty input");
  if (sample.input_txt.find(kAnswerMarker) != std::string::npos) {
    throw ValidationError("sample " + sample.sample_id + " input contains the answer marker");
  }

  // Entity first: input text may legitimately contain "{entity}".
  std::string body = entry.template_text;
  replace_all(body, "{entity}", sample.task.entity);
  const auto slot = body.find("{input_txt}");
  body.replace(slot, std::string_view("{input_txt}").size(), sample.input_txt);

  PromptInstance p;
  p.text = with_preamble ? zero_shot_preamble(country) + "\n" + body : std::move(body);
  p.task = sample.task;
  p.sample_ref = sample.sample_id;
  return p;
}

std::string_view catalog_version() { return catalog().version; }

std::vector<std::string> registered_task_ids() {
  std::vector<std::string> ids;
  for (const auto& [alias, family] : catalog().alias_to_family) ids.push_back(alias);
  return ids;
}

}  // namespace ceval::prompt
