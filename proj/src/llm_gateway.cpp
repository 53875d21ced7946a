#include "ceval/llm_gateway.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <thread>

namespace ceval::gateway {

namespace {

using nlohmann::json;

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("base_url '" + url + "' has no scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl p;
  p.scheme_host_port = url.substr(0, path_start);
  p.path_prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!p.path_prefix.empty() && p.path_prefix.back() == '/') p.path_prefix.pop_back();
  return p;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

// POSTs `payload` to base_url + suffix, retrying connection failures, 429 and
// 5xx with doubling backoff. Returns the parsed JSON body.
json post_json(const EndpointConfig& cfg, const std::string& suffix, const std::string& payload,
               const std::string& ref, std::atomic<std::size_t>& requests) {
  const auto url = parse_base_url(cfg.base_url);
  const auto path = (url.path_prefix.empty() ? std::string("/v1") : url.path_prefix) + suffix;

  httplib::Headers headers;
  if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const auto secs = static_cast<time_t>(cfg.timeout_seconds);
  const auto usecs = static_cast<time_t>((cfg.timeout_seconds - static_cast<double>(secs)) * 1e6);
  std::string last_error;
  int backoff = cfg.retry_backoff_ms;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
    httplib::Client client(url.scheme_host_port);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    ++requests;
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP " + std::to_string(res->status);
      if (retryable_status(res->status)) continue;
      throw TransportError(ref, last_error);
    }
    auto j = json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw SchemaError(ref, "response body is not JSON");
    return j;
  }
  throw TransportError(ref, last_error + " after " + std::to_string(cfg.max_retries + 1) + " attempt(s)");
}

}  // namespace

void EndpointConfig::validate() const {
  if (max_parallel < 1) throw ValidationError("max_parallel must be >= 1");
  if (!(timeout_seconds > 0.0)) throw ValidationError("timeout must be > 0");
  if (max_retries < 0) throw ValidationError("max_retries must be >= 0");
  if (model_id.empty()) throw ValidationError("model_id is empty");
}

std::string prompt_hash(std::string_view prompt_text) { return sha256_hex(prompt_text); }

std::string cache_key(std::string_view hash, std::string_view model_id, std::string_view adapter_tag,
                      const prompt::DecodeParams& decode) {
  // Length-prefixed fields so no two distinct tuples share a preimage.
  std::string material;
  for (std::string_view field : {hash, model_id, adapter_tag}) {
    material += std::to_string(field.size());
    material += ':';
    material += field;
    material += '|';
  }
  material += prompt::to_json(decode).dump();
  return sha256_hex(material);
}

std::string cache_key(const GenerationRecord& r) {
  return cache_key(r.prompt_hash, r.model_id, r.adapter_tag, r.decode);
}

json to_json(const GenerationRecord& r) {
  return {{"prompt_hash", r.prompt_hash}, {"sample_ref", r.sample_ref}, {"model_id", r.model_id},
          {"adapter_tag", r.adapter_tag}, {"raw_output", r.raw_output}, {"decode", prompt::to_json(r.decode)},
          {"created_at", r.created_at}};
}

GenerationRecord record_from_json(const json& j) {
  GenerationRecord r;
  r.prompt_hash = j.at("prompt_hash").get<std::string>();
  r.sample_ref = j.at("sample_ref").get<std::string>();
  r.model_id = j.at("model_id").get<std::string>();
  r.adapter_tag = j.at("adapter_tag").get<std::string>();
  r.raw_output = j.at("raw_output").get<std::string>();
  r.decode = prompt::decode_from_json(j.at("decode"));
  r.created_at = j.at("created_at").get<std::string>();
  if (r.prompt_hash.size() != 64) throw ValidationError("prompt_hash is not a SHA-256 digest");
  return r;
}

GenerationCache::GenerationCache(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  for (const auto& line : split_lines(read_file(path_))) {
    if (is_blank(line)) continue;
    try {
      auto rec = record_from_json(json::parse(line));
      entries_.try_emplace(cache_key(rec), std::move(rec));
    } catch (const std::exception&) {
      ++corrupt_lines_;
    }
  }
}

std::optional<GenerationRecord> GenerationCache::lookup(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void GenerationCache::append(const GenerationRecord& record) {
  std::lock_guard lock(mu_);
  auto [it, inserted] = entries_.try_emplace(cache_key(record), record);
  if (!inserted || path_.empty()) return;
  if (!out_.is_open()) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw IoError("cannot open cache " + path_.string());
  }
  out_ << to_json(record).dump() << '\n';
  out_.flush();
  if (!out_) throw IoError("cannot append to cache " + path_.string());
}

std::size_t GenerationCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::vector<GenerationRecord> BatchResult::records() const {
  std::vector<GenerationRecord> out;
  for (const auto& s : slots) {
    if (s) out.push_back(*s);
  }
  return out;
}

std::vector<GenerationRecord> ReplayResult::records() const {
  std::vector<GenerationRecord> out;
  for (const auto& s : slots) {
    if (s) out.push_back(*s);
  }
  return out;
}

Gateway::Gateway(EndpointConfig cfg, GenerationCache& cache) : cfg_(std::move(cfg)), cache_(cache) {
  cfg_.validate();
}

std::string Gateway::request_once(const prompt::PromptInstance& prompt) {
  json body;
  body["model"] = (cfg_.adapter_in_model_field && !cfg_.adapter_tag.empty()) ? cfg_.adapter_tag : cfg_.model_id;
  body["messages"] = json::array({{{"role", "user"}, {"content", prompt.text}}});
  body["temperature"] = cfg_.decode.temperature;
  body["max_tokens"] = cfg_.decode.max_new_tokens;
  body["n"] = 1;
  body["stream"] = false;
  const auto j = post_json(cfg_, "/chat/completions", body.dump(), prompt.sample_ref, requests_);
  try {
    const auto& choice = j.at("choices").at(0);
    if (auto m = choice.find("message"); m != choice.end()) return m->at("content").get<std::string>();
    return choice.at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw SchemaError(prompt.sample_ref, std::string("unexpected response shape: ") + e.what());
  }
}

GenerationRecord Gateway::generate(const prompt::PromptInstance& prompt) {
  const auto hash = prompt_hash(prompt.text);
  const auto key = cache_key(hash, cfg_.model_id, cfg_.adapter_tag, cfg_.decode);
  if (auto hit = cache_.lookup(key)) return *hit;

  GenerationRecord rec;
  rec.prompt_hash = hash;
  rec.sample_ref = prompt.sample_ref;
  rec.model_id = cfg_.model_id;
  rec.adapter_tag = cfg_.adapter_tag;
  rec.decode = cfg_.decode;
  rec.raw_output = request_once(prompt);
  rec.created_at = format_utc(now_unix_seconds());
  cache_.append(rec);
  return rec;
}

BatchResult Gateway::batch_generate(std::span<const prompt::PromptInstance> prompts, bool strict) {
  if (prompts.empty()) throw ValidationError("batch_generate needs at least one prompt");
  BatchResult result;
  result.slots.resize(prompts.size());
  std::vector<std::optional<Failure>> failures(prompts.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto worker = [&] {
    while (!abort.load()) {
      const auto i = next.fetch_add(1);
      if (i >= prompts.size()) return;
      try {
        result.slots[i] = generate(prompts[i]);
      } catch (const TransportError& e) {
        failures[i] = Failure{i, prompts[i].sample_ref, "transport", e.what()};
      } catch (const SchemaError& e) {
        failures[i] = Failure{i, prompts[i].sample_ref, "schema", e.what()};
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        abort = true;
        return;
      }
      if (failures[i] && strict) abort = true;
    }
  };

  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(cfg_.max_parallel), prompts.size());
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (auto& f : failures) {
    if (f) result.failures.push_back(std::move(*f));
  }
  if (first_error) std::rethrow_exception(first_error);
  if (strict && !result.failures.empty()) {
    const auto& f = result.failures.front();
    if (f.kind == "schema") throw SchemaError(f.sample_ref, f.message);
    throw TransportError(f.sample_ref, f.message);
  }
  return result;
}

ReplayResult replay(const std::filesystem::path& cache_path, std::span<const prompt::PromptInstance> prompts,
                    std::string_view model_id, std::string_view adapter_tag, const prompt::DecodeParams& decode) {
  if (!std::filesystem::exists(cache_path)) throw IoError("cannot read cache " + cache_path.string());
  GenerationCache cache(cache_path);
  if (cache.size() == 0 && cache.corrupt_lines() > 0) {
    throw ValidationError("cache " + cache_path.string() + " is corrupt: no valid records");
  }
  ReplayResult out;
  out.corrupt_lines = cache.corrupt_lines();
  out.slots.resize(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto hash = prompt_hash(prompts[i].text);
    if (auto hit = cache.lookup(cache_key(hash, model_id, adapter_tag, decode))) {
      out.slots[i] = std::move(*hit);
    } else {
      out.gaps.push_back({i, prompts[i].sample_ref, hash});
    }
  }
  return out;
}

std::vector<EmbeddingInput> parse_embedding_inputs(std::string_view text) {
  std::vector<EmbeddingInput> out;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const auto where = "line " + std::to_string(i + 1);
    const auto j = json::parse(lines[i], nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ValidationError(where + ": not a JSON object");
    try {
      out.push_back({j.at("culture").get<std::string>(), j.value("source", std::string()),
                     j.at("text").get<std::string>()});
    } catch (const json::exception& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (out.back().text.empty()) throw ValidationError(where + ": empty text");
  }
  if (out.empty()) throw ValidationError("no embedding inputs");
  return out;
}

EmbeddingClient::EmbeddingClient(EndpointConfig cfg, std::size_t batch_size)
    : cfg_(std::move(cfg)), batch_size_(batch_size) {
  cfg_.validate();
  if (batch_size_ == 0) throw ValidationError("embedding batch size must be >= 1");
}

std::vector<std::vector<double>> EmbeddingClient::embed(std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
    const auto n = std::min(batch_size_, texts.size() - start);
    const auto ref = "embeddings[" + std::to_string(start) + ".." + std::to_string(start + n) + ")";
    json body{{"model", cfg_.model_id}, {"input", json::array()}};
    for (std::size_t i = 0; i < n; ++i) body["input"].push_back(texts[start + i]);
    const auto j = post_json(cfg_, "/embeddings", body.dump(), ref, requests_);

    std::vector<std::optional<std::vector<double>>> batch(n);
    try {
      const auto& data = j.at("data");
      if (data.size() != n) {
        throw SchemaError(ref, "expected " + std::to_string(n) + " embeddings, got " + std::to_string(data.size()));
      }
      for (std::size_t k = 0; k < n; ++k) {
        const auto idx = data[k].value("index", k);
        if (idx >= n || batch[idx]) throw SchemaError(ref, "bad or repeated index " + std::to_string(idx));
        batch[idx] = data[k].at("embedding").get<std::vector<double>>();
      }
    } catch (const json::exception& e) {
      throw SchemaError(ref, std::string("unexpected response shape: ") + e.what());
    }
    for (auto& v : batch) out.push_back(std::move(*v));
  }
  return out;
}

}  // namespace ceval::gateway
