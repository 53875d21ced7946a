#pragma once

#include "ceval/common.hpp"
#include "ceval/prompt_kit.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

/// Generation collection from chat-completions endpoints with a
/// content-addressed cache and an offline replay path.
namespace ceval::gateway {

struct EndpointConfig {
  std::string base_url;     // e.g. "http://127.0.0.1:8000/v1"
  std::string model_id;
  std::string adapter_tag;  // which cultural adapter is mounted
  double timeout_seconds = 60.0;
  int max_parallel = 1;
  int max_retries = 2;
  int retry_backoff_ms = 250;  // doubled after each failed attempt
  std::string api_key_env = "CEVAL_API_KEY";
  // The request's "model" field carries the adapter tag unless this is false
  // or the tag is empty.
  bool adapter_in_model_field = true;
  prompt::DecodeParams decode;

  /// Throws ValidationError for max_parallel < 1, timeout <= 0, max_retries < 0.
  void validate() const;
};

class TransportError : public Error {
 public:
  TransportError(std::string sample_ref, const std::string& what)
      : Error(sample_ref + ": " + what), sample_ref_(std::move(sample_ref)) {}
  const std::string& sample_ref() const { return sample_ref_; }

 private:
  std::string sample_ref_;
};

class SchemaError : public Error {
 public:
  SchemaError(std::string sample_ref, const std::string& what)
      : Error(sample_ref + ": " + what), sample_ref_(std::move(sample_ref)) {}
  const std::string& sample_ref() const { return sample_ref_; }

 private:
  std::string sample_ref_;
};

struct GenerationRecord {
  std::string prompt_hash;
  std::string sample_ref;
  std::string model_id;
  std::string adapter_tag;
  std::string raw_output;
  prompt::DecodeParams decode;
  std::string created_at;

  friend bool operator==(const GenerationRecord&, const GenerationRecord&) = default;
};

std::string prompt_hash(std::string_view prompt_text);
/// Changes whenever any of prompt text, model, adapter or decode params change.
std::string cache_key(std::string_view prompt_hash, std::string_view model_id, std::string_view adapter_tag,
                      const prompt::DecodeParams& decode);
std::string cache_key(const GenerationRecord& r);

nlohmann::json to_json(const GenerationRecord& r);
GenerationRecord record_from_json(const nlohmann::json& j);

/// Append-only line-delimited cache. A corrupt line invalidates only itself.
/// Safe for concurrent use; appends are serialized through one writer.
class GenerationCache {
 public:
  /// Loads `path` if it exists. An empty path gives a memory-only cache.
  explicit GenerationCache(std::filesystem::path path = {});

  std::optional<GenerationRecord> lookup(const std::string& key) const;
  /// Persists the record unless its key is already present.
  void append(const GenerationRecord& record);

  std::size_t size() const;
  std::size_t corrupt_lines() const { return corrupt_lines_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<std::string, GenerationRecord> entries_;
  std::ofstream out_;
  std::size_t corrupt_lines_ = 0;
};

struct Failure {
  std::size_t index = 0;
  std::string sample_ref;
  std::string kind;  // "transport" | "schema"
  std::string message;
};

struct BatchResult {
  std::vector<std::optional<GenerationRecord>> slots;  // aligned with the input prompts
  std::vector<Failure> failures;                       // ascending by index

  std::vector<GenerationRecord> records() const;
};

class Gateway {
 public:
  Gateway(EndpointConfig cfg, GenerationCache& cache);

  /// Returns the cached record when present, otherwise issues the request and
  /// persists the result before returning. Throws TransportError / SchemaError.
  GenerationRecord generate(const prompt::PromptInstance& prompt);

  /// At most cfg.max_parallel requests in flight. Lenient mode records
  /// failures and carries on; strict mode stops dispatching at the first
  /// failure and rethrows it once in-flight requests finish.
  BatchResult batch_generate(std::span<const prompt::PromptInstance> prompts, bool strict = false);

  std::size_t requests_issued() const { return requests_.load(); }
  const EndpointConfig& config() const { return cfg_; }

 private:
  std::string request_once(const prompt::PromptInstance& prompt);

  EndpointConfig cfg_;
  GenerationCache& cache_;
  std::atomic<std::size_t> requests_{0};
};

struct Gap {
  std::size_t index = 0;
  std::string sample_ref;
  std::string prompt_hash;
};

struct ReplayResult {
  std::vector<std::optional<GenerationRecord>> slots;  // aligned with the input prompts
  std::vector<Gap> gaps;
  std::size_t corrupt_lines = 0;

  std::vector<GenerationRecord> records() const;
};

/// Fully offline lookup. Missing entries become gaps. Throws IoError if the
/// file is unreadable and ValidationError if it is non-empty but holds no
/// valid record at all.
ReplayResult replay(const std::filesystem::path& cache_path, std::span<const prompt::PromptInstance> prompts,
                    std::string_view model_id, std::string_view adapter_tag,
                    const prompt::DecodeParams& decode = {});

struct EmbeddingInput {
  std::string culture;
  std::string source;
  std::string text;
};

/// One JSON object per line: {"culture": "kor", "source": "normad", "text": ".."}.
std::vector<EmbeddingInput> parse_embedding_inputs(std::string_view text);

/// Client for an embeddings endpoint (POST <base_url>/embeddings with
/// {"model", "input": [..]}). Same retry and timeout rules as Gateway.
class EmbeddingClient {
 public:
  explicit EmbeddingClient(EndpointConfig cfg, std::size_t batch_size = 32);

  /// One vector per text, in input order. Throws TransportError / SchemaError.
  std::vector<std::vector<double>> embed(std::span<const std::string> texts);

  std::size_t requests_issued() const { return requests_.load(); }

 private:
  EndpointConfig cfg_;
  std::size_t batch_size_;
  std::atomic<std::size_t> requests_{0};
};

}  // namespace ceval::gateway
