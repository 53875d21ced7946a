#pragma once

#include "ceval/culture.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

/// Training-corpus reformulation: source records in, "### Task:" samples out.
namespace ceval::forge {

// Enum order is the corpus sort order within a culture.
enum class SourceKind { WVS, Wikipedia, NormAd };

std::string_view to_string(SourceKind kind);
/// Accepts "wvs", "wikipedia"/"wiki", "normad" in any case.
SourceKind parse_source_kind(std::string_view name);

enum class LanguageVariant { Standard, Translated };

struct WvsPayload {
  std::string topic;
  std::string q_id;
  std::string q_content;
  std::string options;
  std::string answer;  // the culture's recorded response; may be empty until rendering
};

struct WikiPayload {
  std::string description;
};

struct NormAdPayload {
  std::string country;
  std::string background;
  std::string rule_of_thumb;
  std::string story;
  std::string explanation;
};

struct TrainingRecord {
  SourceKind kind = SourceKind::WVS;
  CultureId culture;
  LanguageVariant variant = LanguageVariant::Standard;
  std::string id;  // q_id for WVS; the line's "id" field or a positional id otherwise
  std::variant<WvsPayload, WikiPayload, NormAdPayload> payload;
};

struct TrainingSample {
  CultureId culture;
  SourceKind kind = SourceKind::WVS;
  std::string text;
  std::string record_ref;
};

struct Rejection {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct ParseResult {
  std::vector<TrainingRecord> records;
  std::vector<Rejection> rejections;
};

/// Parses line-delimited JSON records of one kind. Malformed lines land in
/// `rejections`; nothing is dropped silently. Payload fields are trimmed and
/// embedded line breaks folded to single spaces so every rendered block keeps
/// its fixed line count. Throws IoError if the file is unreadable.
ParseResult parse_records(const std::filesystem::path& path, SourceKind kind,
                          const CultureRegistry& registry);
ParseResult parse_records_text(std::string_view text, SourceKind kind,
                               const CultureRegistry& registry);

// Renderers throw ValidationError on a kind mismatch, an empty field, or a field
// that is not already clean (line breaks, surrounding whitespace).
TrainingSample render_wvs(const TrainingRecord& record, std::string_view answer);
TrainingSample render_wiki(const TrainingRecord& record);
TrainingSample render_normad(const TrainingRecord& record);
/// Dispatches on kind; WVS records render with their own answer field.
TrainingSample render(const TrainingRecord& record);

struct TextCounts {
  std::size_t tokens = 0;
  std::size_t sentences = 0;
};

/// Whitespace tokens; sentences are non-blank segments between . ! ? and U+3002.
TextCounts count_text(std::string_view text);

struct CultureCounts {
  std::size_t sample_count = 0;
  std::size_t token_count = 0;
  std::size_t sentence_count = 0;

  friend bool operator==(const CultureCounts&, const CultureCounts&) = default;
};

struct CorpusStats {
  // Cultures present in the corpus, in registry order.
  std::vector<std::pair<std::string, CultureCounts>> per_culture;
  CultureCounts total;

  const CultureCounts* find(std::string_view code) const;
};

CorpusStats corpus_stats(std::span<const TrainingSample> samples, const CultureRegistry& registry);
/// Stats for a corpus file whose samples all belong to `culture_code`.
CorpusStats corpus_stats_file(const std::filesystem::path& path, std::string_view culture_code,
                              const CultureRegistry& registry);

nlohmann::json to_json(const CorpusStats& stats);

struct CorpusMode {
  enum class Kind { Single, Combined } kind = Kind::Combined;
  std::string culture;  // Single only

  static CorpusMode single(std::string culture_code) { return {Kind::Single, std::move(culture_code)}; }
  static CorpusMode combined() { return {}; }
};

struct Corpus {
  std::vector<TrainingSample> samples;
  CorpusStats stats;
};

/// Filters (single) or merges (combined) and renders, ordered by
/// (registry position of culture, kind, record id). Record ids compare
/// naturally, so "9" sorts before "10".
Corpus build_corpus(std::span<const TrainingRecord> records, const CorpusMode& mode,
                    const CultureRegistry& registry);

/// Samples separated by one blank line, LF endings, trailing newline.
std::string serialize_corpus(std::span<const TrainingSample> samples);
/// Inverse of serialize_corpus: the sample texts in file order.
std::vector<std::string> split_corpus(std::string_view corpus_text);

}  // namespace ceval::forge
