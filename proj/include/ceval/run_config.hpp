#pragma once

#include "ceval/corpus_forge.hpp"
#include "ceval/culture.hpp"
#include "ceval/llm_gateway.hpp"
#include "ceval/prompt_kit.hpp"
#include "ceval/response_court.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

/// Declarative run configuration (one JSON document) and its up-front validation.
namespace ceval::config {

struct DatasetManifest {
  std::string id;
  std::string culture;
  std::string task;
  std::filesystem::path path;  // resolved against the config file's directory
  court::LabelMap label_map;
  std::optional<std::size_t> samples;  // expected sample count
};

struct AdapterConfig {
  std::string tag;
  std::optional<std::string> culture;  // absent for a baseline model
  bool zero_shot = false;              // prepend the cultural preamble of the test culture
  gateway::EndpointConfig endpoint;
};

struct TrainingSource {
  forge::SourceKind kind = forge::SourceKind::WVS;
  std::filesystem::path path;
};

// Texts to embed through an embeddings endpoint, as an alternative to a
// precomputed embedding file.
struct EmbeddingSource {
  std::filesystem::path texts;  // {"culture", "source", "text"} per line
  gateway::EndpointConfig endpoint;
  std::size_t batch_size = 32;
};

struct RunConfig {
  CultureRegistry registry;
  std::vector<DatasetManifest> datasets;
  std::vector<AdapterConfig> adapters;
  bool strict = false;
  court::ScoringMode scoring = court::ScoringMode::ScoredDefaults;
  prompt::DecodeParams decode;
  bool decode_overridden = false;
  std::vector<TrainingSource> training;
  forge::CorpusMode training_mode;
  std::optional<std::filesystem::path> embeddings;
  std::optional<EmbeddingSource> embedding_source;
  std::size_t kde_resolution = 64;
  std::filesystem::path output_dir = "out";
  std::filesystem::path cache_path;
  std::string report_model = "model";
  std::string report_data = "";
  std::string raw_text;  // the config bytes, for digests

  const DatasetManifest* find_dataset(std::string_view id) const;
  const AdapterConfig* find_adapter(std::string_view tag) const;
};

struct Violation {
  std::string location;  // e.g. "datasets[2].culture"
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

struct LoadResult {
  RunConfig config;
  ValidationReport report;
};

/// Parses and checks every invariant, collecting all violations instead of
/// stopping at the first: unknown cultures, unregistered tasks, raw gold
/// labels missing from a dataset's map, sample-count mismatches, malformed
/// endpoints. Throws IoError only if the config itself is unreadable.
LoadResult load_config(const std::filesystem::path& path);
LoadResult load_config_text(std::string_view text, const std::filesystem::path& base_dir);

ValidationReport validate_config(const std::filesystem::path& path);

/// One line per sample: {"id": "...", "text": "...", "label": "..."}.
struct DatasetSample {
  std::string id;
  std::string text;
  std::string label;
};

/// Throws ValidationError naming the file and line on a malformed record.
std::vector<DatasetSample> read_dataset(const std::filesystem::path& path);

/// Tasks whose scores feed the knowledge (MMLU) column instead of culture scores.
bool is_knowledge_task(std::string_view task);

}  // namespace ceval::config
