#pragma once

// Writes a small end-to-end workspace: one offensive-language dataset per
// culture, one culture-tagged adapter per culture, and a generation cache
// that answers every prompt so the pipeline can run offline.

#include "ceval/cli.hpp"
#include "ceval/common.hpp"
#include "ceval/culture.hpp"
#include "ceval/llm_gateway.hpp"
#include "ceval/prompt_kit.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fixture {

namespace fs = std::filesystem;

struct Workspace {
  fs::path config;
  fs::path cache;
  nlohmann::json config_json;
  std::size_t samples = 0;
};

inline std::string dataset_id(const std::string& culture) { return culture + "_off"; }
inline std::string adapter_tag(const std::string& culture) { return culture + "-wvs"; }

inline void write_config(const Workspace& ws) { ceval::write_file(ws.config, ws.config_json.dump(2) + "\n"); }

// Own-culture adapters answer correctly more often than foreign ones, and a
// few answers are unusable.
inline Workspace write_workspace(const fs::path& dir, const std::vector<std::string>& cultures, int per_dataset,
                                 const std::string& base_url, unsigned seed = 7) {
  Workspace ws;
  ws.config = dir / "run.json";
  ws.cache = dir / "cache.jsonl";
  const auto reg = ceval::CultureRegistry::defaults();
  const auto task = ceval::prompt::parse_task("offensive_detect");

  nlohmann::json datasets = nlohmann::json::array();
  nlohmann::json adapters = nlohmann::json::array();
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> rows;  // culture -> (text, raw label)
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  for (const auto& c : cultures) {
    std::string lines;
    for (int i = 0; i < per_dataset; ++i) {
      const std::string text = "message " + std::to_string(i) + " posted in " + c;
      const std::string raw = coin(rng) ? "1" : "0";
      rows[c].push_back({text, raw});
      lines += nlohmann::json{{"id", "s" + std::to_string(i)}, {"text", text}, {"label", raw}}.dump() + "\n";
      ++ws.samples;
    }
    ceval::write_file(dir / (c + ".jsonl"), lines);
    datasets.push_back({{"id", dataset_id(c)},
                        {"culture", c},
                        {"task", "offensive_detect"},
                        {"path", c + ".jsonl"},
                        {"samples", per_dataset},
                        {"label_map", {{"1", "OFF"}, {"0", "NOT"}}}});
    adapters.push_back({{"tag", adapter_tag(c)},
                        {"culture", c},
                        {"base_url", base_url},
                        {"model_id", "llama-3.1-8b"},
                        {"timeout", 2},
                        {"max_retries", 0}});
  }
  ws.config_json = {{"datasets", datasets},
                    {"adapters", adapters},
                    {"cache", "cache.jsonl"},
                    {"report", {{"model", "Llama-3.1-8B"}, {"data_config", "WVS"}}}};
  write_config(ws);

  std::string cache;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& a : cultures) {
    for (const auto& c : cultures) {
      const auto& country = reg.at(c).countries.front();
      for (std::size_t i = 0; i < rows[c].size(); ++i) {
        const auto& [text, raw] = rows[c][i];
        const std::string gold = raw == "1" ? "OFF" : "NOT";
        ceval::prompt::EvalSample s{"s" + std::to_string(i), c, task, text, raw, gold};
        const auto p = ceval::prompt::build_prompt(s, false, country);
        const double r = u(rng);
        std::string answer;
        if (r < 0.05) {
          answer = "I cannot decide about: " + text;
        } else {
          const bool correct = r < (a == c ? 0.85 : 0.55);
          answer = "### Answer: " + std::string((gold == "OFF") == correct ? "1" : "2");
        }
        ceval::gateway::GenerationRecord rec{ceval::gateway::prompt_hash(p.text),
                                             dataset_id(c) + "/s" + std::to_string(i),
                                             "llama-3.1-8b",
                                             adapter_tag(a),
                                             answer,
                                             {},
                                             "2024-01-01T00:00:00Z"};
        cache += ceval::gateway::to_json(rec).dump() + "\n";
      }
    }
  }
  ceval::write_file(ws.cache, cache);
  return ws;
}

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

inline Result ceval_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Result r;
  r.code = ceval::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Runs evaluate --replay, score, cdist and report into `out_root`.
inline std::vector<Result> run_pipeline(const Workspace& ws, const fs::path& out_root) {
  const auto cfg = ws.config.string();
  const auto out = out_root.string();
  return {ceval_run({"evaluate", "--config", cfg, "--replay", ws.cache.string(), "--out", out}),
          ceval_run({"score", "--config", cfg, "--out", out}), ceval_run({"cdist", "--config", cfg, "--out", out}),
          ceval_run({"report", "--config", cfg, "--out", out})};
}

inline std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = ceval::read_file(e.path());
  }
  return files;
}

}  // namespace fixture
