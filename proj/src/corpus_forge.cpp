#include "ceval/corpus_forge.hpp"

#include "ceval/common.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <utility>

namespace ceval::forge {

namespace {

using nlohmann::json;

// Folds CR/LF runs to one space and trims.
std::string clean_field(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool in_break = false;
  for (char c : raw) {
    if (c == '\n' || c == '\r') {
      if (!in_break) out.push_back(' ');
      in_break = true;
    } else {
      out.push_back(c);
      in_break = false;
    }
  }
  return std::string(trim(out));
}

bool is_clean(std::string_view s) {
  return !s.empty() && s.find_first_of("\r\n") == std::string_view::npos && trim(s).size() == s.size();
}

void require_clean(std::string_view field, std::string_view value) {
  if (value.empty()) throw ValidationError("field '" + std::string(field) + "' is empty");
  if (!is_clean(value)) {
    throw ValidationError("field '" + std::string(field) +
                          "' contains line breaks or surrounding whitespace");
  }
}

// Returns the cleaned string field, or an empty string if absent. Throws
// std::invalid_argument (caught by the line parser) for non-string values.
std::string string_field(const json& obj, std::initializer_list<const char*> keys) {
  for (const char* key : keys) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) continue;
    if (it->is_string()) return clean_field(it->get<std::string>());
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    throw std::invalid_argument(std::string("field '") + key + "' is not a string");
  }
  return {};
}

std::string required(const json& obj, const char* key, std::initializer_list<const char*> keys) {
  auto v = string_field(obj, keys);
  if (v.empty()) throw std::invalid_argument(std::string("missing or empty field '") + key + "'");
  return v;
}

TrainingRecord parse_line(const json& obj, SourceKind kind, const CultureRegistry& registry,
                          std::size_t line_no) {
  if (!obj.is_object()) throw std::invalid_argument("line is not a JSON object");
  TrainingRecord rec;
  rec.kind = kind;
  auto code = required(obj, "culture", {"culture"});
  const auto* culture = registry.find(code);
  if (!culture) throw std::invalid_argument("unknown culture '" + code + "'");
  rec.culture = *culture;

  auto variant = to_lower(string_field(obj, {"language_variant"}));
  if (variant.empty() || variant == "standard") {
    rec.variant = LanguageVariant::Standard;
  } else if (variant == "translated") {
    rec.variant = LanguageVariant::Translated;
  } else {
    throw std::invalid_argument("unknown language_variant '" + variant + "'");
  }

  switch (kind) {
    case SourceKind::WVS: {
      WvsPayload p;
      p.topic = required(obj, "topic", {"topic"});
      p.q_id = required(obj, "q_id", {"q_id"});
      p.q_content = required(obj, "q_content", {"q_content"});
      p.options = string_field(obj, {"options", "option"});
      p.answer = string_field(obj, {"answer"});
      rec.id = p.q_id;
      rec.payload = std::move(p);
      break;
    }
    case SourceKind::Wikipedia: {
      WikiPayload p;
      p.description = required(obj, "description", {"description"});
      rec.payload = std::move(p);
      break;
    }
    case SourceKind::NormAd: {
      NormAdPayload p;
      p.country = required(obj, "country", {"country"});
      p.background = required(obj, "background", {"background"});
      p.rule_of_thumb = required(obj, "rule_of_thumb", {"rule_of_thumb", "rule-of-thumb"});
      p.story = required(obj, "story", {"story"});
      p.explanation = required(obj, "explanation", {"explanation"});
      rec.payload = std::move(p);
      break;
    }
  }
  if (rec.id.empty()) {
    rec.id = string_field(obj, {"id"});
    if (rec.id.empty()) rec.id = std::to_string(line_no);
  }
  return rec;
}

void require_kind(const TrainingRecord& record, SourceKind expected) {
  if (record.kind != expected) {
    throw ValidationError("expected a " + std::string(to_string(expected)) + " record, got " +
                          std::string(to_string(record.kind)));
  }
}

// Digit runs compare by value, everything else bytewise.
bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0, j = 0;
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  while (i < a.size() && j < b.size()) {
    if (digit(a[i]) && digit(b[j])) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && digit(a[ie])) ++ie;
      while (je < b.size() && digit(b[je])) ++je;
      auto da = a.substr(i, ie - i), db = b.substr(j, je - j);
      while (da.size() > 1 && da.front() == '0') da.remove_prefix(1);
      while (db.size() > 1 && db.front() == '0') db.remove_prefix(1);
      if (da.size() != db.size()) return da.size() < db.size();
      if (da != db) return da < db;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return static_cast<unsigned char>(a[i]) < static_cast<unsigned char>(b[j]);
      ++i;
      ++j;
    }
  }
  if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
  return a < b;
}

}  // namespace

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::WVS: return "WVS";
    case SourceKind::Wikipedia: return "Wikipedia";
    case SourceKind::NormAd: return "NormAd";
  }
  return "?";
}

SourceKind parse_source_kind(std::string_view name) {
  auto n = to_lower(trim(name));
  if (n == "wvs") return SourceKind::WVS;
  if (n == "wikipedia" || n == "wiki") return SourceKind::Wikipedia;
  if (n == "normad") return SourceKind::NormAd;
  throw ValidationError("unknown source kind '" + std::string(name) + "'");
}

ParseResult parse_records_text(std::string_view text, SourceKind kind, const CultureRegistry& registry) {
  ParseResult out;
  std::set<std::pair<std::string, std::string>> seen_qids;
  auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line_no = i + 1;
    if (is_blank(lines[i])) continue;
    try {
      auto obj = json::parse(lines[i]);
      auto rec = parse_line(obj, kind, registry, line_no);
      if (kind == SourceKind::WVS) {
        if (!seen_qids.emplace(rec.culture.code, rec.id).second) {
          throw std::invalid_argument("duplicate q_id '" + rec.id + "' for culture " + rec.culture.code);
        }
      }
      out.records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      out.rejections.push_back({line_no, std::string("malformed JSON: ") + e.what()});
    } catch (const std::invalid_argument& e) {
      out.rejections.push_back({line_no, e.what()});
    }
  }
  return out;
}

ParseResult parse_records(const std::filesystem::path& path, SourceKind kind, const CultureRegistry& registry) {
  return parse_records_text(read_file(path), kind, registry);
}

TrainingSample render_wvs(const TrainingRecord& record, std::string_view answer) {
  require_kind(record, SourceKind::WVS);
  const auto& p = std::get<WvsPayload>(record.payload);
  require_clean("q_content", p.q_content);
  require_clean("answer", answer);
  std::string text;
  text.reserve(p.q_content.size() + answer.size() + 64);
  text += "### Task: Survey Question-Answer\n";
  text += "### Question: ";
  text += p.q_content;
  text += "\n### Answer: ";
  text += answer;
  return {record.culture, record.kind, std::move(text), record.id};
}

TrainingSample render_wiki(const TrainingRecord& record) {
  require_kind(record, SourceKind::Wikipedia);
  const auto& p = std::get<WikiPayload>(record.payload);
  require_clean("culture display name", record.culture.display_name);
  require_clean("description", p.description);
  std::string text = "### Task: Cultural Context\n### Culture: " + record.culture.display_name +
                     "\n### Description: " + p.description;
  return {record.culture, record.kind, std::move(text), record.id};
}

TrainingSample render_normad(const TrainingRecord& record) {
  require_kind(record, SourceKind::NormAd);
  const auto& p = std::get<NormAdPayload>(record.payload);
  require_clean("culture display name", record.culture.display_name);
  require_clean("country", p.country);
  require_clean("background", p.background);
  require_clean("rule_of_thumb", p.rule_of_thumb);
  require_clean("story", p.story);
  require_clean("explanation", p.explanation);
  std::string text = "### Task: NormAd Cultural Context\n";
  text += "### Culture: " + record.culture.display_name + "\n";
  text += "### Country: " + p.country + "\n";
  text += "### Background: " + p.background + "\n";
  text += "### Rule-of-Thumb: " + p.rule_of_thumb + "\n";
  text += "### Story: " + p.story + "\n";
  text += "### Explanation: " + p.explanation;
  return {record.culture, record.kind, std::move(text), record.id};
}

TrainingSample render(const TrainingRecord& record) {
  switch (record.kind) {
    case SourceKind::WVS: {
      const auto& p = std::get<WvsPayload>(record.payload);
      if (p.answer.empty()) {
        throw ValidationError("WVS record " + record.culture.code + "/" + record.id + " has no answer");
      }
      return render_wvs(record, p.answer);
    }
    case SourceKind::Wikipedia: return render_wiki(record);
    case SourceKind::NormAd: return render_normad(record);
  }
  throw ValidationError("unknown record kind");
}

TextCounts count_text(std::string_view text) {
  TextCounts c;
  bool in_token = false;
  for (char ch : text) {
    const bool space = std::isspace(static_cast<unsigned char>(ch)) != 0;
    if (!space && !in_token) ++c.tokens;
    in_token = !space;
  }

  bool segment_has_content = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    std::size_t terminator_len = 0;
    if (ch == '.' || ch == '!' || ch == '?') {
      terminator_len = 1;
    } else if (text.compare(i, 3, "\xE3\x80\x82") == 0) {  // U+3002 ideographic full stop
      terminator_len = 3;
    }
    if (terminator_len > 0) {
      if (segment_has_content) ++c.sentences;
      segment_has_content = false;
      i += terminator_len - 1;
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      segment_has_content = true;
    }
  }
  if (segment_has_content) ++c.sentences;
  return c;
}

const CultureCounts* CorpusStats::find(std::string_view code) const {
  for (const auto& [c, counts] : per_culture) {
    if (c == code) return &counts;
  }
  return nullptr;
}

CorpusStats corpus_stats(std::span<const TrainingSample> samples, const CultureRegistry& registry) {
  std::map<std::size_t, std::pair<std::string, CultureCounts>> by_index;
  for (const auto& s : samples) {
    auto& slot = by_index[registry.index_of(s.culture.code)];
    slot.first = s.culture.code;
    auto tc = count_text(s.text);
    slot.second.sample_count += 1;
    slot.second.token_count += tc.tokens;
    slot.second.sentence_count += tc.sentences;
  }
  CorpusStats stats;
  for (auto& [idx, entry] : by_index) {
    stats.total.sample_count += entry.second.sample_count;
    stats.total.token_count += entry.second.token_count;
    stats.total.sentence_count += entry.second.sentence_count;
    stats.per_culture.push_back(std::move(entry));
  }
  return stats;
}

CorpusStats corpus_stats_file(const std::filesystem::path& path, std::string_view culture_code,
                              const CultureRegistry& registry) {
  const auto& culture = registry.at(culture_code);
  std::vector<TrainingSample> samples;
  for (auto& block : split_corpus(read_file(path))) {
    samples.push_back({culture, SourceKind::WVS, std::move(block), {}});
  }
  return corpus_stats(samples, registry);
}

nlohmann::json to_json(const CorpusStats& stats) {
  auto counts = [](const CultureCounts& c) {
    return json{{"samples", c.sample_count}, {"tokens", c.token_count}, {"sentences", c.sentence_count}};
  };
  json per = json::array();
  for (const auto& [code, c] : stats.per_culture) {
    auto row = counts(c);
    row["culture"] = code;
    per.push_back(std::move(row));
  }
  return json{{"per_culture", std::move(per)},
              {"total", counts(stats.total)},
              {"tokenizer", "whitespace"}};
}

Corpus build_corpus(std::span<const TrainingRecord> records, const CorpusMode& mode,
                    const CultureRegistry& registry) {
  if (records.empty()) throw ValidationError("cannot build a corpus from zero records");
  if (mode.kind == CorpusMode::Kind::Single && !registry.contains(mode.culture)) {
    throw ValidationError("unknown culture '" + mode.culture + "' for single-culture corpus");
  }

  std::vector<const TrainingRecord*> selected;
  for (const auto& r : records) {
    if (mode.kind == CorpusMode::Kind::Single && r.culture.code != mode.culture) continue;
    selected.push_back(&r);
  }
  if (selected.empty()) {
    throw ValidationError("no records for culture '" + mode.culture + "'");
  }

  std::stable_sort(selected.begin(), selected.end(), [&](const TrainingRecord* a, const TrainingRecord* b) {
    auto ia = registry.index_of(a->culture.code), ib = registry.index_of(b->culture.code);
    if (ia != ib) return ia < ib;
    if (a->kind != b->kind) return a->kind < b->kind;
    return natural_less(a->id, b->id);
  });

  Corpus corpus;
  corpus.samples.reserve(selected.size());
  for (const auto* r : selected) corpus.samples.push_back(render(*r));
  corpus.stats = corpus_stats(corpus.samples, registry);
  return corpus;
}

std::string serialize_corpus(std::span<const TrainingSample> samples) {
  std::string out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i > 0) out += "\n";
    out += samples[i].text;
    out += "\n";
  }
  return out;
}

std::vector<std::string> split_corpus(std::string_view corpus_text) {
  std::vector<std::string> blocks;
  std::string current;
  for (const auto& line : split_lines(corpus_text)) {
    if (line.empty()) {
      if (!current.empty()) blocks.push_back(std::move(current));
      current.clear();
      continue;
    }
    if (!current.empty()) current += "\n";
    current += line;
  }
  if (!current.empty()) blocks.push_back(std::move(current));
  return blocks;
}

}  // namespace ceval::forge
