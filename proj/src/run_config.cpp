#include "ceval/run_config.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>

namespace ceval::config {

namespace {

using nlohmann::json;

class Checker {
 public:
  explicit Checker(ValidationReport& report) : report_(report) {}

  void fail(std::string location, std::string message) {
    report_.violations.push_back({std::move(location), std::move(message)});
  }

  std::optional<std::string> string(const json& obj, const char* key, const std::string& loc, bool required) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
      if (required) fail(loc + "." + key, "missing required string");
      return std::nullopt;
    }
    if (!it->is_string()) {
      fail(loc + "." + key, "expected a string");
      return std::nullopt;
    }
    return it->get<std::string>();
  }

  template <typename T>
  std::optional<T> number(const json& obj, const char* key, const std::string& loc) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) {
      fail(loc + "." + key, "expected a number");
      return std::nullopt;
    }
    return it->get<T>();
  }

  std::optional<bool> boolean(const json& obj, const char* key, const std::string& loc) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_boolean()) {
      fail(loc + "." + key, "expected true or false");
      return std::nullopt;
    }
    return it->get<bool>();
  }

 private:
  ValidationReport& report_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void parse_registry(const json& root, RunConfig& cfg, Checker& check) {
  auto it = root.find("cultures");
  if (it == root.end()) {
    cfg.registry = CultureRegistry::defaults();
    return;
  }
  if (!it->is_array()) {
    check.fail("cultures", "expected an array");
    cfg.registry = CultureRegistry::defaults();
    return;
  }
  for (std::size_t i = 0; i < it->size(); ++i) {
    const auto& c = (*it)[i];
    const auto loc = "cultures[" + std::to_string(i) + "]";
    if (!c.is_object()) {
      check.fail(loc, "expected an object");
      continue;
    }
    CultureId id;
    id.code = check.string(c, "code", loc, true).value_or("");
    id.display_name = check.string(c, "name", loc, false).value_or(id.code);
    if (auto cs = c.find("countries"); cs != c.end() && cs->is_array()) {
      for (const auto& country : *cs) {
        if (country.is_string()) id.countries.push_back(country.get<std::string>());
      }
    }
    if (id.countries.empty()) check.fail(loc + ".countries", "at least one country is required");
    try {
      cfg.registry.add(std::move(id));
    } catch (const ValidationError& e) {
      check.fail(loc + ".code", e.what());
    }
  }
}

void check_culture(const RunConfig& cfg, Checker& check, const std::string& loc, const std::string& code) {
  if (!cfg.registry.contains(code)) check.fail(loc, "unknown culture '" + code + "'");
}

void parse_datasets(const json& root, RunConfig& cfg, Checker& check, const std::filesystem::path& base) {
  auto it = root.find("datasets");
  if (it == root.end()) return;
  if (!it->is_array()) {
    check.fail("datasets", "expected an array");
    return;
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < it->size(); ++i) {
    const auto& d = (*it)[i];
    const auto loc = "datasets[" + std::to_string(i) + "]";
    if (!d.is_object()) {
      check.fail(loc, "expected an object");
      continue;
    }
    DatasetManifest m;
    m.id = check.string(d, "id", loc, true).value_or("");
    m.culture = check.string(d, "culture", loc, true).value_or("");
    m.task = check.string(d, "task", loc, true).value_or("");
    if (auto p = check.string(d, "path", loc, true)) m.path = resolve(base, *p);
    if (!m.id.empty() && !seen.insert(m.id).second) check.fail(loc + ".id", "duplicate dataset id '" + m.id + "'");
    if (!m.culture.empty()) check_culture(cfg, check, loc + ".culture", m.culture);
    if (!m.task.empty()) {
      try {
        prompt::label_alphabet(m.task);
      } catch (const ValidationError&) {
        check.fail(loc + ".task", "unregistered task '" + m.task + "'");
      }
    }
    m.label_map.dataset_id = m.id;
    if (auto lm = d.find("label_map"); lm != d.end() && !lm->is_null()) {
      if (!lm->is_object()) {
        check.fail(loc + ".label_map", "expected an object of raw label -> canonical label");
      } else {
        for (const auto& [raw, canon] : lm->items()) {
          if (!canon.is_string()) {
            check.fail(loc + ".label_map." + raw, "expected a string");
            continue;
          }
          m.label_map.entries.emplace(raw, canon.get<std::string>());
        }
      }
    }
    if (auto n = check.number<long long>(d, "samples", loc)) {
      if (*n < 0) {
        check.fail(loc + ".samples", "must be >= 0");
      } else {
        m.samples = static_cast<std::size_t>(*n);
      }
    }
    cfg.datasets.push_back(std::move(m));
  }
}

gateway::EndpointConfig parse_endpoint(const json& a, const std::string& loc, Checker& check) {
  gateway::EndpointConfig ep;
  ep.base_url = check.string(a, "base_url", loc, true).value_or("");
  ep.model_id = check.string(a, "model_id", loc, true).value_or("");
  if (!ep.base_url.empty() && ep.base_url.find("://") == std::string::npos) {
    check.fail(loc + ".base_url", "'" + ep.base_url + "' has no scheme");
  }
  if (auto v = check.number<double>(a, "timeout", loc)) ep.timeout_seconds = *v;
  if (auto v = check.number<int>(a, "max_parallel", loc)) ep.max_parallel = *v;
  if (auto v = check.number<int>(a, "max_retries", loc)) ep.max_retries = *v;
  if (auto v = check.number<int>(a, "retry_backoff_ms", loc)) ep.retry_backoff_ms = *v;
  if (auto v = check.string(a, "api_key_env", loc, false)) ep.api_key_env = *v;
  if (auto v = check.boolean(a, "adapter_in_model_field", loc)) ep.adapter_in_model_field = *v;
  if (ep.max_parallel < 1) check.fail(loc + ".max_parallel", "must be >= 1");
  if (!(ep.timeout_seconds > 0.0)) check.fail(loc + ".timeout", "must be > 0");
  if (ep.max_retries < 0) check.fail(loc + ".max_retries", "must be >= 0");
  return ep;
}

void parse_embedding_source(const json& root, RunConfig& cfg, Checker& check, const std::filesystem::path& base) {
  auto it = root.find("embedding_source");
  if (it == root.end()) return;
  if (!it->is_object()) {
    check.fail("embedding_source", "expected an object");
    return;
  }
  EmbeddingSource src;
  src.texts = resolve(base, check.string(*it, "texts", "embedding_source", true).value_or(""));
  src.endpoint = parse_endpoint(*it, "embedding_source", check);
  if (auto n = check.number<long long>(*it, "batch_size", "embedding_source")) {
    if (*n < 1) {
      check.fail("embedding_source.batch_size", "must be >= 1");
    } else {
      src.batch_size = static_cast<std::size_t>(*n);
    }
  }
  cfg.embedding_source = std::move(src);
}

void parse_adapters(const json& root, RunConfig& cfg, Checker& check) {
  auto it = root.find("adapters");
  if (it == root.end()) return;
  if (!it->is_array()) {
    check.fail("adapters", "expected an array");
    return;
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < it->size(); ++i) {
    const auto& a = (*it)[i];
    const auto loc = "adapters[" + std::to_string(i) + "]";
    if (!a.is_object()) {
      check.fail(loc, "expected an object");
      continue;
    }
    AdapterConfig ad;
    ad.tag = check.string(a, "tag", loc, true).value_or("");
    if (!ad.tag.empty() && !seen.insert(ad.tag).second) check.fail(loc + ".tag", "duplicate adapter tag '" + ad.tag + "'");
    if (!ad.tag.empty() && ad.tag.find_first_of("/\\") != std::string::npos) {
      check.fail(loc + ".tag", "must not contain path separators");
    }
    ad.culture = check.string(a, "culture", loc, false);
    if (ad.culture) check_culture(cfg, check, loc + ".culture", *ad.culture);
    ad.zero_shot = check.boolean(a, "zero_shot", loc).value_or(false);
    ad.endpoint = parse_endpoint(a, loc, check);
    ad.endpoint.adapter_tag = ad.tag;
    cfg.adapters.push_back(std::move(ad));
  }
}

void parse_mode_and_decode(const json& root, RunConfig& cfg, Checker& check) {
  if (auto m = root.find("mode"); m != root.end()) {
    if (!m->is_object()) {
      check.fail("mode", "expected an object");
    } else {
      cfg.strict = check.boolean(*m, "strict", "mode").value_or(false);
      if (auto s = check.string(*m, "scoring", "mode", false)) {
        try {
          cfg.scoring = court::parse_scoring_mode(*s);
        } catch (const ValidationError& e) {
          check.fail("mode.scoring", e.what());
        }
      }
    }
  }
  if (auto d = root.find("decode"); d != root.end()) {
    try {
      auto decode = prompt::decode_from_json(*d);
      if (!(decode == prompt::DecodeParams{})) {
        if (!root.value("allow_decode_override", false)) {
          check.fail("decode", "differs from the fixed greedy decoding; set allow_decode_override to use it");
        }
        cfg.decode_overridden = true;
      }
      cfg.decode = decode;
    } catch (const std::exception& e) {
      check.fail("decode", e.what());
    }
  }
  for (auto& a : cfg.adapters) a.endpoint.decode = cfg.decode;
}

void parse_training(const json& root, RunConfig& cfg, Checker& check, const std::filesystem::path& base) {
  auto t = root.find("training");
  if (t == root.end()) return;
  if (!t->is_object()) {
    check.fail("training", "expected an object");
    return;
  }
  if (auto srcs = t->find("sources"); srcs != t->end() && srcs->is_array()) {
    for (std::size_t i = 0; i < srcs->size(); ++i) {
      const auto& s = (*srcs)[i];
      const auto loc = "training.sources[" + std::to_string(i) + "]";
      if (!s.is_object()) {
        check.fail(loc, "expected an object");
        continue;
      }
      TrainingSource src;
      try {
        src.kind = forge::parse_source_kind(check.string(s, "kind", loc, true).value_or(""));
      } catch (const ValidationError& e) {
        check.fail(loc + ".kind", e.what());
      }
      src.path = resolve(base, check.string(s, "path", loc, true).value_or(""));
      cfg.training.push_back(std::move(src));
    }
  }
  const auto mode = check.string(*t, "mode", "training", false).value_or("combined");
  if (mode == "combined") {
    cfg.training_mode = forge::CorpusMode::combined();
  } else if (mode == "single") {
    auto culture = check.string(*t, "culture", "training", true).value_or("");
    if (!culture.empty()) check_culture(cfg, check, "training.culture", culture);
    cfg.training_mode = forge::CorpusMode::single(culture);
  } else {
    check.fail("training.mode", "expected 'single' or 'combined', got '" + mode + "'");
  }
}

void check_dataset_files(RunConfig& cfg, Checker& check) {
  for (std::size_t i = 0; i < cfg.datasets.size(); ++i) {
    const auto& d = cfg.datasets[i];
    const auto loc = "datasets[" + std::to_string(i) + "]";
    if (d.path.empty() || d.task.empty()) continue;
    std::vector<DatasetSample> samples;
    try {
      samples = read_dataset(d.path);
    } catch (const Error& e) {
      check.fail(loc + ".path", e.what());
      continue;
    }
    if (d.samples && *d.samples != samples.size()) {
      check.fail(loc + ".samples", "manifest says " + std::to_string(*d.samples) + " samples, file has " +
                                       std::to_string(samples.size()));
    }
    prompt::EvalTask task;
    try {
      task = prompt::parse_task(d.task);
    } catch (const ValidationError&) {
      continue;  // already reported
    }
    const auto labels = prompt::label_set(task);
    for (const auto& [raw, canon] : d.label_map.entries) {
      if (std::find(labels.begin(), labels.end(), canon) == labels.end()) {
        check.fail(loc + ".label_map." + raw,
                   "dataset '" + d.id + "' maps '" + raw + "' to '" + canon + "', not a label of task " + d.task);
      }
    }
    std::set<std::string> reported;
    for (const auto& s : samples) {
      if (reported.count(s.label)) continue;
      try {
        court::canonicalize_gold(s.label, d.label_map, task);
      } catch (const ConfigError& e) {
        if (d.label_map.entries.empty() || !d.label_map.entries.count(s.label)) {
          check.fail(loc + ".label_map",
                     "dataset '" + d.id + "' has gold label '" + s.label + "' missing from its label map");
        }
        reported.insert(s.label);
      }
    }
  }
}

}  // namespace

const DatasetManifest* RunConfig::find_dataset(std::string_view id) const {
  for (const auto& d : datasets) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

const AdapterConfig* RunConfig::find_adapter(std::string_view tag) const {
  for (const auto& a : adapters) {
    if (a.tag == tag) return &a;
  }
  return nullptr;
}

std::string ValidationReport::to_string() const {
  std::string out;
  for (const auto& v : violations) out += v.location + ": " + v.message + "\n";
  return out;
}

LoadResult load_config_text(std::string_view text, const std::filesystem::path& base_dir) {
  LoadResult out;
  Checker check(out.report);
  auto& cfg = out.config;
  cfg.raw_text = std::string(text);

  const auto root = json::parse(text, nullptr, false);
  if (root.is_discarded()) {
    check.fail("<config>", "not valid JSON");
    return out;
  }
  if (!root.is_object()) {
    check.fail("<config>", "top level must be an object");
    return out;
  }
  static const std::set<std::string> known = {"cultures",   "datasets", "adapters", "mode",   "decode",
                                              "allow_decode_override", "training", "embeddings", "output_dir",
                                              "cache",      "report",   "kde_resolution", "embedding_source"};
  for (const auto& [key, value] : root.items()) {
    if (!known.count(key)) check.fail(key, "unknown key");
  }

  parse_registry(root, cfg, check);
  parse_datasets(root, cfg, check, base_dir);
  parse_adapters(root, cfg, check);
  parse_mode_and_decode(root, cfg, check);
  parse_training(root, cfg, check, base_dir);
  parse_embedding_source(root, cfg, check, base_dir);

  if (auto e = check.string(root, "embeddings", "", false)) cfg.embeddings = resolve(base_dir, *e);
  if (auto o = check.string(root, "output_dir", "", false)) cfg.output_dir = resolve(base_dir, *o);
  if (auto c = check.string(root, "cache", "", false)) cfg.cache_path = resolve(base_dir, *c);
  if (auto r = check.number<long long>(root, "kde_resolution", "")) {
    if (*r < 16) {
      check.fail("kde_resolution", "must be >= 16");
    } else {
      cfg.kde_resolution = static_cast<std::size_t>(*r);
    }
  }
  if (auto r = root.find("report"); r != root.end() && r->is_object()) {
    cfg.report_model = check.string(*r, "model", "report", false).value_or(cfg.report_model);
    cfg.report_data = check.string(*r, "data_config", "report", false).value_or(cfg.report_data);
  }

  check_dataset_files(cfg, check);
  return out;
}

LoadResult load_config(const std::filesystem::path& path) {
  return load_config_text(read_file(path), path.parent_path());
}

ValidationReport validate_config(const std::filesystem::path& path) { return load_config(path).report; }

std::vector<DatasetSample> read_dataset(const std::filesystem::path& path) {
  const auto lines = split_lines(read_file(path));
  std::vector<DatasetSample> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const auto where = path.string() + ":" + std::to_string(i + 1);
    const auto j = json::parse(lines[i], nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ValidationError(where + ": not a JSON object");
    DatasetSample s;
    try {
      s.text = j.at("text").get<std::string>();
      const auto& label = j.at("label");
      s.label = label.is_string() ? label.get<std::string>() : label.dump();
      if (auto id = j.find("id"); id != j.end()) {
        s.id = id->is_string() ? id->get<std::string>() : id->dump();
      } else {
        s.id = std::to_string(i + 1);
      }
    } catch (const json::exception& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (!ids.insert(s.id).second) throw ValidationError(where + ": duplicate sample id '" + s.id + "'");
    out.push_back(std::move(s));
  }
  return out;
}

bool is_knowledge_task(std::string_view task) { return task == "mmlu_qa"; }

}  // namespace ceval::config
