#include "ceval/cli.hpp"

#include "ceval/common.hpp"
#include "ceval/corpus_forge.hpp"
#include "ceval/homogenize_lens.hpp"
#include "ceval/llm_gateway.hpp"
#include "ceval/matrix_metrics.hpp"
#include "ceval/prompt_kit.hpp"
#include "ceval/report_studio.hpp"
#include "ceval/response_court.hpp"
#include "ceval/run_config.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <map>
#include <optional>
#include <ostream>

namespace ceval::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::string replay;
  bool strict = false;
  std::string out;
  std::string adapter;
  std::string culture;
  std::string matrix;
  std::string embeddings;
};

struct Context {
  std::string subcommand;
  Flags flags;
  std::optional<config::RunConfig> cfg;
  std::string run_id;
  fs::path run_dir;
  bool strict = false;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> artifacts;
  std::ostream* out = nullptr;
};

std::string timestamp() {
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    try {
      return format_utc(std::stoll(epoch));
    } catch (const std::exception&) {
      throw ValidationError(std::string("SOURCE_DATE_EPOCH is not an integer: ") + epoch);
    }
  }
  return format_utc(now_unix_seconds());
}

std::string input_key(const Context& ctx, const fs::path& path) {
  const auto rel = path.lexically_relative(ctx.run_dir);
  if (!rel.empty() && *rel.begin() != "..") return "run:" + rel.generic_string();
  return path.generic_string();
}

std::string read_input(Context& ctx, const fs::path& path) {
  auto bytes = read_file(path);
  ctx.inputs[input_key(ctx, path)] = sha256_hex(bytes);
  return bytes;
}

void emit(Context& ctx, const std::string& rel, std::string_view content) {
  write_file(ctx.run_dir / rel, content);
  ctx.artifacts[rel] = sha256_hex(content);
}

void emit_json(Context& ctx, const std::string& rel, json j) {
  j["run_id"] = ctx.run_id;
  emit(ctx, rel, j.dump(2) + "\n");
}

// Resolves "--matrix X", also accepting X.json.
fs::path resolve_with_json(const std::string& p) {
  fs::path path(p);
  if (fs::exists(path)) return path;
  fs::path with_ext = p + ".json";
  if (fs::exists(with_ext)) return with_ext;
  throw IoError("cannot read " + p);
}

void write_manifest(Context& ctx) {
  report::RunManifest m;
  m.run_id = ctx.run_id;
  m.timestamp = timestamp();
  m.subcommand = ctx.subcommand;
  std::string material = "ceval-config\n";
  if (ctx.cfg) material += ctx.cfg->raw_text;
  material += "\nflags";
  for (const auto& [k, v] : std::map<std::string, std::string>{{"replay", ctx.flags.replay},
                                                                 {"strict", ctx.strict ? "1" : "0"},
                                                                 {"adapter", ctx.flags.adapter},
                                                                 {"culture", ctx.flags.culture},
                                                                 {"matrix", ctx.flags.matrix},
                                                                 {"embeddings", ctx.flags.embeddings},
                                                                 {"subcommand", ctx.subcommand}}) {
    material += "\n" + k + "=" + v;
  }
  for (const auto& [path, digest] : ctx.inputs) material += "\n" + path + "=" + digest;
  m.config_digest = sha256_hex(material);
  m.module_versions = {{"harness", std::string(report::kHarnessVersion)},
                       {"prompt_catalog", std::string(prompt::catalog_version())}};
  m.input_digests = ctx.inputs;
  if (ctx.cfg) {
    m.decode = ctx.cfg->decode;
    m.decode_overridden = ctx.cfg->decode_overridden;
    m.scoring_mode = std::string(court::to_string(ctx.cfg->scoring));
  } else {
    m.scoring_mode = std::string(court::to_string(court::ScoringMode::ScoredDefaults));
  }
  m.strict = ctx.strict;
  m.artifacts = ctx.artifacts;
  write_file(ctx.run_dir / "manifests" / (ctx.subcommand + ".json"), report::to_json(m).dump(2) + "\n");
}

// The run id depends on the config and the dataset contents only, so every
// stage of one pipeline lands in the same directory.
std::string derive_run_id(const Context& ctx) {
  std::string material;
  if (ctx.cfg) {
    material = "config\n" + ctx.cfg->raw_text;
    for (const auto& d : ctx.cfg->datasets) {
      if (fs::exists(d.path)) material += "\n" + d.id + "=" + sha256_hex(read_file(d.path));
    }
  } else if (!ctx.flags.matrix.empty()) {
    material = "matrix\n" + read_file(resolve_with_json(ctx.flags.matrix));
  } else if (!ctx.flags.embeddings.empty()) {
    material = "embeddings\n" + read_file(ctx.flags.embeddings);
  } else {
    throw ValidationError(ctx.subcommand + " needs --config");
  }
  return sha256_hex(material).substr(0, 12);
}

const config::RunConfig& need_config(const Context& ctx) {
  if (!ctx.cfg) throw ValidationError(ctx.subcommand + " needs --config");
  return *ctx.cfg;
}

std::vector<const config::AdapterConfig*> selected_adapters(const Context& ctx) {
  const auto& cfg = need_config(ctx);
  std::vector<const config::AdapterConfig*> out;
  for (const auto& a : cfg.adapters) {
    if (ctx.flags.adapter.empty() || a.tag == ctx.flags.adapter) out.push_back(&a);
  }
  if (out.empty()) {
    throw ValidationError(ctx.flags.adapter.empty() ? "config has no adapters"
                                                    : "no adapter tagged '" + ctx.flags.adapter + "'");
  }
  return out;
}

std::vector<const config::DatasetManifest*> selected_datasets(const Context& ctx) {
  const auto& cfg = need_config(ctx);
  std::vector<const config::DatasetManifest*> out;
  for (const auto& d : cfg.datasets) {
    if (ctx.flags.culture.empty() || d.culture == ctx.flags.culture) out.push_back(&d);
  }
  if (out.empty()) {
    throw ValidationError(ctx.flags.culture.empty() ? "config has no datasets"
                                                    : "no dataset for culture '" + ctx.flags.culture + "'");
  }
  return out;
}

fs::path predictions_path(const Context& ctx, const std::string& adapter, const std::string& dataset) {
  return ctx.run_dir / "predictions" / adapter / (dataset + ".jsonl");
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(); }

std::optional<double> opt_number(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number()) return std::nullopt;
  return it->get<double>();
}

// ---------------------------------------------------------------- forge

int cmd_forge(Context& ctx) {
  const auto& cfg = need_config(ctx);
  if (cfg.training.empty()) throw ValidationError("config has no training sources");
  auto mode = cfg.training_mode;
  if (!ctx.flags.culture.empty()) {
    cfg.registry.index_of(ctx.flags.culture);
    mode = forge::CorpusMode::single(ctx.flags.culture);
  }
  std::vector<forge::TrainingRecord> records;
  json rejections = json::array();
  for (const auto& src : cfg.training) {
    auto parsed = forge::parse_records_text(read_input(ctx, src.path), src.kind, cfg.registry);
    for (const auto& r : parsed.rejections) {
      rejections.push_back({{"file", src.path.generic_string()}, {"line", r.line}, {"reason", r.reason}});
    }
    for (auto& r : parsed.records) records.push_back(std::move(r));
  }
  if (ctx.strict && !rejections.empty()) {
    std::string msg = "strict mode: " + std::to_string(rejections.size()) + " malformed training record(s)";
    for (const auto& r : rejections) {
      msg += "\n  " + r["file"].get<std::string>() + ":" + std::to_string(r["line"].get<std::size_t>()) + ": " +
             r["reason"].get<std::string>();
    }
    throw ValidationError(msg);
  }
  const auto corpus = forge::build_corpus(records, mode, cfg.registry);
  const auto name = mode.kind == forge::CorpusMode::Kind::Single ? mode.culture : std::string("combined");
  emit(ctx, "corpus/" + name + ".txt", forge::serialize_corpus(corpus.samples));
  emit_json(ctx, "corpus/" + name + ".stats.json",
            {{"stats", forge::to_json(corpus.stats)}, {"rejections", rejections}, {"mode", name}});
  *ctx.out << "forged " << corpus.samples.size() << " samples into corpus/" << name << ".txt";
  if (!rejections.empty()) *ctx.out << " (" << rejections.size() << " rejected)";
  *ctx.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(Context& ctx) {
  const auto& cfg = need_config(ctx);
  const auto adapters = selected_adapters(ctx);
  const auto datasets = selected_datasets(ctx);
  const bool replaying = !ctx.flags.replay.empty();
  if (replaying) read_input(ctx, ctx.flags.replay);

  std::optional<gateway::GenerationCache> cache;
  if (!replaying) cache.emplace(cfg.cache_path.empty() ? cfg.output_dir / "cache" / "generations.jsonl" : cfg.cache_path);

  json summary = json::array();
  std::size_t missing_total = 0;
  std::size_t requests = 0;
  for (const auto* adapter : adapters) {
    std::optional<gateway::Gateway> gw;
    if (!replaying) gw.emplace(adapter->endpoint, *cache);
    json per_dataset = json::array();
    for (const auto* d : datasets) {
      const auto task = prompt::parse_task(d->task);
      const auto samples = config::read_dataset(d->path);
      read_input(ctx, d->path);
      const auto& country = cfg.registry.at(d->culture).countries.front();

      std::vector<prompt::PromptInstance> prompts;
      std::vector<prompt::EvalSample> kept;
      json skipped = json::array();
      for (const auto& s : samples) {
        prompt::EvalSample es{s.id, d->culture, task, s.text, s.label, ""};
        try {
          es.gold = court::canonicalize_gold(s.label, d->label_map, task);
          auto p = prompt::build_prompt(es, adapter->zero_shot, country);
          p.sample_ref = d->id + "/" + s.id;
          p.decode = cfg.decode;
          prompts.push_back(std::move(p));
          kept.push_back(std::move(es));
        } catch (const ValidationError& e) {
          if (ctx.strict) throw;
          skipped.push_back({{"sample", s.id}, {"reason", e.what()}});
        }
      }
      if (prompts.empty()) throw ValidationError("dataset '" + d->id + "' has no usable samples");

      std::vector<std::optional<gateway::GenerationRecord>> slots;
      json missing = json::array();
      if (replaying) {
        auto rr = gateway::replay(ctx.flags.replay, prompts, adapter->endpoint.model_id, adapter->tag, cfg.decode);
        if (ctx.strict && !rr.gaps.empty()) {
          throw Error("strict mode: cache has no generation for " + std::to_string(rr.gaps.size()) +
                      " prompt(s) of adapter '" + adapter->tag + "', first " + rr.gaps.front().sample_ref);
        }
        for (const auto& g : rr.gaps) missing.push_back({{"sample_ref", g.sample_ref}, {"reason", "not in cache"}});
        slots = std::move(rr.slots);
      } else {
        auto br = gw->batch_generate(prompts, ctx.strict);
        for (const auto& f : br.failures) {
          missing.push_back({{"sample_ref", f.sample_ref}, {"reason", f.kind + ": " + f.message}});
        }
        slots = std::move(br.slots);
      }
      missing_total += missing.size();

      std::string lines;
      std::size_t written = 0, invalid = 0;
      for (std::size_t i = 0; i < prompts.size(); ++i) {
        if (!slots[i]) continue;
        const auto parsed = court::extract_answer(slots[i]->raw_output, task, prompts[i].sample_ref);
        court::PredictionRecord rec;
        rec.sample_ref = prompts[i].sample_ref;
        rec.dataset = d->id;
        rec.task = d->task;
        rec.culture = d->culture;
        rec.adapter = adapter->tag;
        rec.input = kept[i].input_txt;
        rec.output = slots[i]->raw_output;
        rec.extracted_output = parsed.extracted;
        rec.prediction = parsed.label.value_or("");
        rec.label = kept[i].gold_raw;
        rec.gold = kept[i].gold;
        rec.invalid_response = parsed.invalid;
        rec.default_applied = parsed.default_applied;
        auto j = court::to_json(rec);
        j["run_id"] = ctx.run_id;
        lines += j.dump() + "\n";
        ++written;
        if (parsed.invalid) ++invalid;
      }
      emit(ctx, "predictions/" + adapter->tag + "/" + d->id + ".jsonl", lines);
      per_dataset.push_back({{"dataset", d->id},
                             {"samples", samples.size()},
                             {"predictions", written},
                             {"invalid", invalid},
                             {"missing", missing},
                             {"skipped", skipped}});
      *ctx.out << adapter->tag << " / " << d->id << ": " << written << " predictions, " << invalid << " invalid";
      if (!missing.empty()) *ctx.out << ", " << missing.size() << " missing";
      *ctx.out << "\n";
    }
    if (gw) requests += gw->requests_issued();
    summary.push_back({{"adapter", adapter->tag}, {"datasets", per_dataset}});
  }
  emit_json(ctx, "evaluation.json",
            {{"adapters", summary}, {"mode", replaying ? "replay" : "live"}, {"requests_issued", requests}});
  if (missing_total > 0) *ctx.out << missing_total << " prompt(s) without a generation, see evaluation.json\n";
  return kExitOk;
}

// ---------------------------------------------------------------- score

int cmd_score(Context& ctx) {
  const auto& cfg = need_config(ctx);
  const auto adapters = selected_adapters(ctx);
  const auto datasets = selected_datasets(ctx);

  json rows = json::array();
  json per_adapter = json::array();
  std::vector<court::InvalidStats> all_stats;
  for (const auto* adapter : adapters) {
    std::map<std::string, std::vector<metrics::DatasetScore>> by_culture;
    std::vector<metrics::DatasetScore> knowledge;
    std::vector<court::InvalidStats> adapter_stats;
    for (const auto* d : datasets) {
      const auto path = predictions_path(ctx, adapter->tag, d->id);
      if (!fs::exists(path)) throw IoError("predictions file " + path.string() + " does not exist; run evaluate first");
      std::vector<court::PredictionRecord> records;
      const auto lines = split_lines(read_input(ctx, path));
      for (std::size_t i = 0; i < lines.size(); ++i) {
        if (is_blank(lines[i])) continue;
        try {
          records.push_back(court::prediction_from_json(json::parse(lines[i])));
        } catch (const json::exception& e) {
          throw ValidationError("predictions file " + path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
      }
      if (records.empty()) throw ValidationError("predictions file " + path.string() + " is empty");

      const auto task = prompt::parse_task(d->task);
      std::vector<std::string> preds, golds;
      std::size_t invalid = 0;
      for (const auto& r : records) {
        if (r.invalid_response) ++invalid;
        if (r.invalid_response && cfg.scoring == court::ScoringMode::ExcludeInvalid) continue;
        preds.push_back(r.prediction);
        golds.push_back(r.gold);
      }
      const auto stats = court::invalid_stats(invalid, records.size());
      adapter_stats.push_back(stats);
      std::optional<double> f1;
      if (!preds.empty()) f1 = metrics::macro_f1(preds, golds, prompt::label_set(task));
      if (f1) {
        if (config::is_knowledge_task(d->task)) {
          knowledge.push_back({d->id, *f1});
        } else {
          by_culture[d->culture].push_back({d->id, *f1});
        }
      }
      rows.push_back({{"adapter", adapter->tag},
                      {"adapter_culture", adapter->culture ? json(*adapter->culture) : json()},
                      {"dataset", d->id},
                      {"culture", d->culture},
                      {"task", d->task},
                      {"f1", nullable(f1)},
                      {"scored", preds.size()},
                      {"invalid_count", stats.invalid_count},
                      {"total", stats.total},
                      {"invalid_ratio", stats.ratio}});
    }
    json culture_scores = json::object();
    std::vector<double> cult;
    for (const auto& c : cfg.registry.cultures()) {
      auto it = by_culture.find(c.code);
      if (it == by_culture.end()) continue;
      const double s = metrics::culture_score(it->second);
      culture_scores[c.code] = s;
      cult.push_back(s);
    }
    std::optional<double> f1_cult, f1_mmlu;
    if (!cult.empty()) {
      double sum = 0.0;
      for (double v : cult) sum += v;
      f1_cult = sum / static_cast<double>(cult.size());
    }
    if (!knowledge.empty()) f1_mmlu = metrics::culture_score(knowledge);
    const auto pooled = court::combine(adapter_stats);
    for (const auto& s : adapter_stats) all_stats.push_back(s);
    per_adapter.push_back({{"adapter", adapter->tag},
                           {"culture", adapter->culture ? json(*adapter->culture) : json()},
                           {"culture_scores", culture_scores},
                           {"f1_cult", nullable(f1_cult)},
                           {"f1_mmlu", nullable(f1_mmlu)},
                           {"invalid", {{"count", pooled.invalid_count}, {"total", pooled.total}, {"ratio", pooled.ratio}}}});
    *ctx.out << adapter->tag << ": F1 cult. " << (f1_cult ? format_fixed(*f1_cult, 2) : "-") << ", invalid "
             << format_fixed(pooled.reported_ratio(), 2) << "%\n";
  }
  const auto overall = court::combine(all_stats);
  emit_json(ctx, "scores.json",
            {{"scoring_mode", court::to_string(cfg.scoring)},
             {"datasets", rows},
             {"adapters", per_adapter},
             {"invalid",
              {{"count", overall.invalid_count},
               {"total", overall.total},
               {"ratio", overall.ratio},
               {"reported", overall.reported_ratio()}}}});
  return kExitOk;
}

// ---------------------------------------------------------------- cdist

metrics::PerfMatrix matrix_from_scores(Context& ctx) {
  const auto& cfg = need_config(ctx);
  const auto path = ctx.run_dir / "scores.json";
  if (!fs::exists(path)) throw IoError(path.string() + " does not exist; run score first");
  const auto scores = json::parse(read_input(ctx, path));
  std::vector<metrics::ScoreCell> cells;
  for (const auto& a : scores.at("adapters")) {
    if (!a.at("culture").is_string()) continue;
    for (const auto& [test, f1] : a.at("culture_scores").items()) {
      cells.push_back({a["culture"].get<std::string>(), test, f1.get<double>()});
    }
  }
  if (cells.empty()) throw ValidationError("scores.json has no culture-tagged adapter scores");
  return metrics::build_matrix(cells, cfg.registry);
}

int cmd_cdist(Context& ctx) {
  metrics::PerfMatrix m;
  if (!ctx.flags.matrix.empty()) {
    const auto path = resolve_with_json(ctx.flags.matrix);
    try {
      m = metrics::matrix_from_json(json::parse(read_input(ctx, path)));
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
  } else {
    m = matrix_from_scores(ctx);
  }
  metrics::validate(m);
  const auto report = metrics::cdist(m);
  emit_json(ctx, "matrix.json", metrics::to_json(m));
  emit_json(ctx, "cdist.json", metrics::to_json(report));
  emit_json(ctx, "ranks.json", metrics::to_json(metrics::rank_matrix(m)));
  *ctx.out << "C-Dist " << format_fixed(round_to(report.score, 2), 2) << " (" << format_fixed(report.score, 4)
           << ")";
  if (!report.excluded.empty()) *ctx.out << ", " << report.excluded.size() << " column(s) excluded";
  *ctx.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- analyze-embeddings

// Embeds the configured texts and keeps the vectors as a run artifact, so a
// later run can pass them back with --embeddings.
std::string fetch_embeddings(Context& ctx, const config::EmbeddingSource& src) {
  const auto inputs = gateway::parse_embedding_inputs(read_input(ctx, src.texts));
  std::vector<std::string> texts;
  for (const auto& in : inputs) texts.push_back(in.text);
  gateway::EmbeddingClient client(src.endpoint, src.batch_size);
  const auto vectors = client.embed(texts);
  std::string lines;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    lines += json{{"culture", inputs[i].culture}, {"source", inputs[i].source}, {"vector", vectors[i]}, {"run_id", ctx.run_id}}
                 .dump() +
             "\n";
  }
  emit(ctx, "embeddings.jsonl", lines);
  *ctx.out << "embedded " << inputs.size() << " texts in " << client.requests_issued() << " request(s)\n";
  return lines;
}

int cmd_analyze(Context& ctx) {
  std::string text;
  if (!ctx.flags.embeddings.empty()) {
    text = read_input(ctx, ctx.flags.embeddings);
  } else if (ctx.cfg && ctx.cfg->embeddings) {
    text = read_input(ctx, *ctx.cfg->embeddings);
  } else if (ctx.cfg && ctx.cfg->embedding_source) {
    text = fetch_embeddings(ctx, *ctx.cfg->embedding_source);
  } else {
    throw ValidationError("analyze-embeddings needs --embeddings, an 'embeddings' file or an 'embedding_source'");
  }
  const auto set = lens::parse_embeddings(text);
  const auto report = lens::analyze(set, ctx.cfg ? ctx.cfg->kde_resolution : 64);
  emit_json(ctx, "homogenization.json", lens::to_json(report));
  *ctx.out << "silhouette " << format_fixed(report.silhouette.overall, 4) << " over " << set.items.size()
           << " items\n";
  for (const auto& w : report.warnings) *ctx.out << "warning: " << w << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- report

std::optional<json> optional_input(Context& ctx, const std::string& name) {
  const auto path = ctx.run_dir / name;
  if (!fs::exists(path)) return std::nullopt;
  return json::parse(read_input(ctx, path));
}

int cmd_report(Context& ctx) {
  const auto scores = optional_input(ctx, "scores.json");
  const auto cdist_report = optional_input(ctx, "cdist.json");
  const auto matrix = optional_input(ctx, "matrix.json");
  const auto ranks = optional_input(ctx, "ranks.json");
  const auto homog = optional_input(ctx, "homogenization.json");
  if (!scores && !cdist_report && !matrix && !homog) {
    throw ValidationError("nothing to report in " + ctx.run_dir.string() + "; run score, cdist or analyze-embeddings");
  }

  report::TableRow row;
  row.model = ctx.cfg ? ctx.cfg->report_model : "model";
  row.data_config = ctx.cfg ? ctx.cfg->report_data : "";
  if (cdist_report) row.cdist = opt_number(*cdist_report, "score");
  if (scores) {
    std::vector<double> cult, mmlu;
    for (const auto& a : scores->at("adapters")) {
      if (!a.at("culture").is_string()) continue;
      if (auto v = opt_number(a, "f1_cult")) cult.push_back(*v);
      if (auto v = opt_number(a, "f1_mmlu")) mmlu.push_back(*v);
    }
    auto mean = [](const std::vector<double>& v) -> std::optional<double> {
      if (v.empty()) return std::nullopt;
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    row.f1_cult = mean(cult);
    row.f1_mmlu = mean(mmlu);
    if (auto inv = scores->find("invalid"); inv != scores->end() && inv->at("total").get<std::size_t>() > 0) {
      row.invalid_ratio = inv->at("ratio").get<double>();
    }
  }
  const std::vector<report::TableRow> rows{row};
  const auto summary = report::emit_tables(rows, ctx.run_id);
  emit(ctx, "tables/summary.csv", summary.csv);
  emit(ctx, "tables/summary.md", summary.markdown);

  if (matrix) {
    const auto m = metrics::matrix_from_json(*matrix);
    const auto normalized = report::labeled(metrics::column_normalize(m).matrix);
    const auto tables = report::matrix_tables(normalized, 4, ctx.run_id);
    emit(ctx, "tables/normalized.csv", tables.csv);
    emit(ctx, "tables/normalized.md", tables.markdown);
    emit(ctx, "figures/normalized_heatmap.svg",
         report::heatmap_svg(normalized, {"Column-normalized scores", ctx.run_id, 4, true, 52.0}));
  }
  if (ranks) {
    report::LabeledMatrix lm;
    lm.labels = ranks->at("cultures").get<std::vector<std::string>>();
    for (const auto& r : ranks->at("ranks")) {
      std::vector<double> values;
      for (const auto& v : r) values.push_back(v.get<double>());
      lm.values.push_back(std::move(values));
    }
    emit(ctx, "figures/rank_heatmap.svg",
         report::heatmap_svg(lm, {"Rank per test culture (1 = best)", ctx.run_id, 0, false, 52.0}));
  }
  if (homog) {
    std::vector<lens::CultureDensity> grids;
    for (const auto& g : homog->at("kde")) grids.push_back({g.at("culture").get<std::string>(), lens::kde_from_json(g)});
    if (!grids.empty()) {
      emit(ctx, "figures/kde_contours.svg",
           report::kde_contour_svg(grids, {"Embedding density by culture", ctx.run_id, 6, 480.0}));
    }
  }
  *ctx.out << summary.markdown;
  return kExitOk;
}

// ---------------------------------------------------------------- dispatch

int dispatch(Context& ctx) {
  if (ctx.subcommand == "forge") return cmd_forge(ctx);
  if (ctx.subcommand == "evaluate") return cmd_evaluate(ctx);
  if (ctx.subcommand == "score") return cmd_score(ctx);
  if (ctx.subcommand == "cdist") return cmd_cdist(ctx);
  if (ctx.subcommand == "analyze-embeddings") return cmd_analyze(ctx);
  if (ctx.subcommand == "report") return cmd_report(ctx);
  throw ValidationError("unknown subcommand " + ctx.subcommand);
}

int execute(const std::string& sub, const Flags& flags, std::ostream& out, std::ostream& err) {
  Context ctx;
  ctx.subcommand = sub;
  ctx.flags = flags;
  ctx.out = &out;

  if (sub == "validate-config") {
    if (flags.config.empty()) throw ValidationError("validate-config needs --config");
    const auto report = config::validate_config(flags.config);
    if (report.ok()) {
      out << "config OK\n";
      return kExitOk;
    }
    err << report.to_string();
    return kExitValidation;
  }

  if (!flags.config.empty()) {
    auto loaded = config::load_config(flags.config);
    if (!loaded.report.ok()) {
      err << "config " << flags.config << " has " << loaded.report.violations.size() << " problem(s):\n"
          << loaded.report.to_string();
      return kExitValidation;
    }
    ctx.cfg = std::move(loaded.config);
    ctx.inputs[fs::path(flags.config).generic_string()] = sha256_hex(ctx.cfg->raw_text);
  }
  ctx.strict = flags.strict || (ctx.cfg && ctx.cfg->strict);
  ctx.run_id = derive_run_id(ctx);
  const fs::path out_root = !flags.out.empty() ? fs::path(flags.out) : ctx.cfg ? ctx.cfg->output_dir : fs::path("out");
  ctx.run_dir = out_root / ctx.run_id;
  fs::create_directories(ctx.run_dir);

  int code = kExitRuntime;
  try {
    code = dispatch(ctx);
  } catch (...) {
    write_manifest(ctx);
    throw;
  }
  write_manifest(ctx);
  out << "run " << ctx.run_id << " -> " << ctx.run_dir.generic_string() << "\n";
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cultural-value adaptation evaluation harness", "ceval"};
  app.fallthrough();
  app.require_subcommand(1, 1);
  Flags flags;
  app.add_option("--config", flags.config, "Run configuration (JSON)");
  app.add_option("--replay", flags.replay, "Answer every prompt from this generation cache, offline");
  app.add_flag("--strict", flags.strict, "Fail on the first malformed record or transport failure");
  app.add_option("--out", flags.out, "Output root; the run directory is <out>/<run_id>");
  app.add_option("--adapter", flags.adapter, "Only this adapter tag");
  app.add_option("--culture", flags.culture, "Only datasets of this culture (forge: single-culture corpus)");
  app.add_option("--matrix", flags.matrix, "Performance matrix JSON for cdist");
  app.add_option("--embeddings", flags.embeddings, "Embedding JSONL for analyze-embeddings");
  for (const char* name : {"forge", "evaluate", "score", "cdist", "analyze-embeddings", "report", "validate-config"}) {
    app.add_subcommand(name);
  }

  std::vector<const char*> argv{"ceval"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  const auto sub = app.get_subcommands().front()->get_name();
  try {
    return execute(sub, flags, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace ceval::cli
