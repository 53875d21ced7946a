// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "ceval/common.hpp"
#include "ceval/corpus_forge.hpp"
#include "ceval/homogenize_lens.hpp"
#include "ceval/matrix_metrics.hpp"
#include "ceval/prompt_kit.hpp"
#include "ceval/response_court.hpp"

#include "../oracles.hpp"
#include "../pipeline_fixture.hpp"
#include "../stub_server.hpp"
#include "../temp_dir.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>

using namespace ceval;
namespace fs = std::filesystem;

namespace {

const fs::path kTestDir = CEVAL_TEST_DIR;

// Collects failed checks for one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  bool ok() const { return failed_ == 0; }
  std::string summary() const {
    std::string s = std::to_string(failed_) + " failed check(s)";
    for (const auto& f : failures_) s += "; " + f;
    return s;
  }

 private:
  std::vector<std::string> failures_;
  std::size_t failed_ = 0;
};

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

metrics::PerfMatrix fixture_matrix(const char* name) {
  return metrics::matrix_from_json(nlohmann::json::parse(read_file(kTestDir / "fixtures" / name)));
}

double diagonal_mean(const metrics::PerfMatrix& m) {
  double sum = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) sum += m.values[i][i];
  return sum / static_cast<double>(m.size());
}

void c1_cdist_fixtures(Checks& c) {
  const auto wvs_m = fixture_matrix("wvs_normalized.json");
  const auto wiki_m = fixture_matrix("wvs_wiki_normalized.json");
  const auto normad_m = fixture_matrix("wvs_normad_normalized.json");
  c.expect(near(diagonal_mean(wvs_m), 0.7597, 5e-5), "WVS diagonal mean");
  c.expect(near(diagonal_mean(wiki_m), 0.7818, 5e-5), "WVS+Wiki diagonal mean");
  c.expect(near(diagonal_mean(normad_m), 0.8752, 5e-5), "WVS+NormAd diagonal mean");
  const auto wvs = metrics::cdist(wvs_m).score;
  const auto wiki = metrics::cdist(wiki_m).score;
  const auto normad = metrics::cdist(normad_m).score;
  c.expect(near(round_to(wvs, 2), 0.76, 0.005), "WVS reported " + format_fixed(wvs, 4));
  c.expect(near(round_to(wiki, 2), 0.78, 0.005), "WVS+Wiki reported " + format_fixed(wiki, 4));
  c.expect(near(normad, 0.89, 0.02), "WVS+NormAd " + format_fixed(normad, 4) + " vs 0.89");
}

void c2_invalid_ratio(Checks& c) {
  const auto s = court::invalid_stats(11797, 58638);
  c.expect(format_fixed(s.reported_ratio(), 2) == "20.12", "ratio " + format_fixed(s.ratio, 4));
}

void c3_cdist_properties(Checks& c) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::size_t> size(2, 12);
  std::uniform_real_distribution<double> value(0.0, 100.0), scale(0.01, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const auto n = size(rng);
    metrics::PerfMatrix m;
    for (std::size_t i = 0; i < n; ++i) m.cultures.push_back(std::string(1, char('a' + i)) + "aa");
    m.values.assign(n, std::vector<double>(n));
    for (auto& row : m.values) {
      for (auto& x : row) x = value(rng);
    }
    const double d = metrics::cdist(m).score;
    c.expect(d >= 0.0 && d <= 1.0, "bounds");
    c.expect(near(d, oracle::cdist(m.values), 1e-12), "oracle");

    auto scaled = m;
    for (std::size_t j = 0; j < n; ++j) {
      const double k = scale(rng);
      for (std::size_t i = 0; i < n; ++i) scaled.values[i][j] *= k;
    }
    c.expect(near(metrics::cdist(scaled).score, d, 1e-12), "column scaling");

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto permuted = m;
    for (std::size_t i = 0; i < n; ++i) {
      permuted.cultures[i] = m.cultures[perm[i]];
      for (std::size_t j = 0; j < n; ++j) permuted.values[i][j] = m.values[perm[i]][perm[j]];
    }
    c.expect(near(metrics::cdist(permuted).score, d, 1e-12), "permutation");

    auto dominant = m;
    for (std::size_t j = 0; j < n; ++j) {
      double mx = 0.0;
      for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, dominant.values[i][j]);
      dominant.values[j][j] = mx;
    }
    c.expect(metrics::cdist(dominant).score == 1.0, "dominant diagonal");

    auto zeroed = m;
    const std::size_t z = static_cast<std::size_t>(t) % n;
    for (std::size_t i = 0; i < n; ++i) zeroed.values[i][z] = 0.0;
    const auto zr = metrics::cdist(zeroed);
    c.expect(zr.excluded.size() == 1 && zr.excluded[0].column == z, "zero column excluded");
    c.expect(near(zr.score, oracle::cdist(zeroed.values), 1e-12), "zero column oracle");
  }
}

void c4_rendering(Checks& c) {
  const auto reg = CultureRegistry::defaults();
  const auto golden = kTestDir / "golden";
  std::vector<forge::TrainingRecord> records;
  for (auto [file, kind] : {std::pair{"wvs.jsonl", forge::SourceKind::WVS},
                            std::pair{"wiki.jsonl", forge::SourceKind::Wikipedia},
                            std::pair{"normad.jsonl", forge::SourceKind::NormAd}}) {
    auto parsed = forge::parse_records(golden / "corpus" / file, kind, reg);
    c.expect(parsed.rejections.empty(), std::string(file) + " rejected lines");
    for (auto& r : parsed.records) records.push_back(std::move(r));
  }
  const auto combined = forge::build_corpus(records, forge::CorpusMode::combined(), reg);
  c.expect(forge::serialize_corpus(combined.samples) == read_file(golden / "corpus" / "combined.txt"),
           "combined corpus golden");
  const auto single = forge::build_corpus(records, forge::CorpusMode::single("kor"), reg);
  c.expect(forge::serialize_corpus(single.samples) == read_file(golden / "corpus" / "single_kor.txt"),
           "single corpus golden");
  auto one = [&](forge::SourceKind kind, const std::string& id) {
    for (const auto& r : records) {
      if (r.kind == kind && r.id == id) {
        const auto s = forge::render(r);
        return forge::serialize_corpus(std::span(&s, 1));
      }
    }
    return std::string();
  };
  c.expect(one(forge::SourceKind::WVS, "Q164") == read_file(golden / "corpus" / "wvs_one.txt"), "WVS format");
  c.expect(one(forge::SourceKind::Wikipedia, "w1") == read_file(golden / "corpus" / "wiki_one.txt"), "wiki format");
  c.expect(one(forge::SourceKind::NormAd, "n1") == read_file(golden / "corpus" / "normad_one.txt"), "NormAd format");

  const std::string input = "You people never learn anything";
  for (const std::string t :
       {"offensive_detect", "abusive_detect", "hate_detect", "vulgar_detect_mp", "spam_detect",
        "hate_detect_fine-grained", "offensive_detect_finegrained", "hate_off_detect", "hate_offens_detect",
        "misogyny_detect", "bias_on_gender_detect", "negative_stance_detect"}) {
    const auto p = prompt::build_prompt({"s", "kor", prompt::parse_task(t), input, "", ""}, false, "");
    c.expect(p.text + "\n" == read_file(golden / "prompts" / (t + ".txt")), t + " template");
  }
  const auto mmlu = prompt::build_prompt(
      {"s", "kor", prompt::parse_task("mmlu_qa"),
       "Which city is the capital of Greece? A. Athens B. Sparta C. Corinth D. Thebes", "", ""},
      false, "");
  c.expect(mmlu.text + "\n" == read_file(golden / "prompts" / "mmlu_qa.txt"), "mmlu_qa template");
  const auto zs =
      prompt::build_prompt({"s", "kor", prompt::parse_task("offensive_detect"), input, "", ""}, true, "South Korea");
  c.expect(zs.text + "\n" == read_file(golden / "prompts" / "zero_shot_kor_offensive_detect.txt"), "preamble");

  // Round trip: render randomized payloads, split the corpus back into blocks
  // and read each field back by its line prefix.
  std::mt19937_64 rng(20240611);
  static const std::vector<std::string> pieces = {"a", "Z", "7", " ", ",", ".", "?", "'", "\"", ":",
                                                  "#", "###", "ü", "한", "中", "(", ")", "\\", "/"};
  std::uniform_int_distribution<std::size_t> len(1, 40), pick(0, pieces.size() - 1), culture(0, reg.size() - 1);
  auto field = [&] {
    std::string s;
    for (auto n = len(rng); n > 0; --n) s += pieces[pick(rng)];
    auto t = std::string(trim(s));
    return t.empty() ? std::string("x") : t;
  };
  std::vector<forge::TrainingSample> samples;
  std::vector<std::map<std::string, std::string>> expected;
  for (int i = 0; i < 500; ++i) {
    forge::TrainingRecord r;
    r.culture = reg.cultures()[culture(rng)];
    r.id = std::to_string(i);
    r.kind = static_cast<forge::SourceKind>(i % 3);
    std::map<std::string, std::string> expect;
    if (r.kind == forge::SourceKind::WVS) {
      forge::WvsPayload p{"topic", "Q" + r.id, field(), "", field()};
      expect = {{"Task", "Survey Question-Answer"}, {"Question", p.q_content}, {"Answer", p.answer}};
      r.payload = p;
    } else if (r.kind == forge::SourceKind::Wikipedia) {
      forge::WikiPayload p{field()};
      expect = {{"Task", "Cultural Context"}, {"Culture", r.culture.display_name}, {"Description", p.description}};
      r.payload = p;
    } else {
      forge::NormAdPayload p{field(), field(), field(), field(), field()};
      expect = {{"Task", "NormAd Cultural Context"}, {"Culture", r.culture.display_name}, {"Country", p.country},
                {"Background", p.background}, {"Rule-of-Thumb", p.rule_of_thumb}, {"Story", p.story},
                {"Explanation", p.explanation}};
      r.payload = p;
    }
    samples.push_back(forge::render(r));
    expected.push_back(expect);
  }
  const auto blocks = forge::split_corpus(forge::serialize_corpus(samples));
  c.expect(blocks.size() == samples.size(), "block count");
  for (std::size_t i = 0; i < std::min(blocks.size(), samples.size()); ++i) {
    std::map<std::string, std::string> fields;
    for (const auto& line : split_lines(blocks[i])) {
      const auto colon = line.find(": ");
      if (line.rfind("### ", 0) != 0 || colon == std::string::npos) {
        fields.clear();
        break;
      }
      fields[line.substr(4, colon - 4)] = line.substr(colon + 2);
    }
    c.expect(fields == expected[i], "round trip of payload " + std::to_string(i));
  }
}

void c5_parsing(Checks& c) {
  auto task = [](const char* n) { return prompt::parse_task(n); };
  const auto en = court::extract_answer("@user @user legit nilas retarded idk what to do @user @user @user",
                                        task("offensive_detect"));
  const auto de = court::extract_answer(
      "### Question: Is the following sentence offensive: @FobiMania @ManuelaSchwesig @MartinSchulz Ich scheisse "
      "auf die SPD. |LBR| SCHEINHEILGSTE PARTEI DEUTSCHLANDS!!! \"1. Offensive\", \"2. Not offensive\" without "
      "explanation. ### Answer: @FobiMania @ManuelaSchw",
      task("offensive_detect"));
  const auto es = court::extract_answer(
      "### Question: Does the following sentence contain hate speech: A ver si le dan un Goya al youtuber que se "
      "llevó la hostia por subnormal. \"1. Hatespeech\", \"2. Not Hatespeech\" without explanation. ### Answer: A "
      "ver si le dan un Goya al y",
      task("hate_detect"));
  c.expect(en.invalid && de.invalid && es.invalid, "known invalid examples");

  for (const auto& id : prompt::registered_task_ids()) {
    const auto t = id == "entity_detect" ? task("threat_detect") : prompt::parse_task(id);
    for (const auto& entry : prompt::label_alphabet(t)) {
      const auto p = court::extract_answer("### Question: q ### Answer: " + entry.token, t);
      c.expect(!p.invalid && p.label && *p.label == entry.label, id + " token " + entry.token);
    }
    const auto bad = court::extract_answer("### Answer: maybe", t);
    c.expect(bad.invalid && bad.default_applied && bad.label == prompt::label_alphabet(t).front().label,
             id + " default label");
  }
  const auto mc = court::extract_answer("### Answer: none of these", task("mmlu_qa"));
  c.expect(mc.invalid && mc.label == std::optional<std::string>("A"), "multiple-choice default A");
}

void c6_macro_f1(Checks& c) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> classes(2, 7), items(1, 20);
  for (int t = 0; t < 200; ++t) {
    const int k = classes(rng);
    std::vector<std::string> labels;
    for (int i = 0; i < k; ++i) labels.push_back("L" + std::to_string(i));
    std::uniform_int_distribution<int> pick(0, k - 1);
    std::vector<std::string> preds, golds;
    for (int n = items(rng); n > 0; --n) {
      golds.push_back(labels[pick(rng)]);
      preds.push_back(labels[pick(rng)]);
    }
    const double got = metrics::macro_f1(preds, golds, labels);
    c.expect(near(got, oracle::macro_f1(preds, golds, labels), 1e-9), "set " + std::to_string(t));
  }
}

lens::EmbeddingSet clusters(std::mt19937_64& rng, std::size_t n, std::size_t dim,
                            const std::vector<std::pair<std::string, double>>& centers) {
  std::normal_distribution<double> noise(0.0, 1.0);
  lens::EmbeddingSet set;
  set.dim = dim;
  for (const auto& [culture, offset] : centers) {
    for (std::size_t i = 0; i < n; ++i) {
      lens::EmbeddingItem it{culture, "synthetic", {}};
      for (std::size_t d = 0; d < dim; ++d) it.vector.push_back(noise(rng) + (d == 0 ? offset : 0.0));
      set.items.push_back(std::move(it));
    }
  }
  return set;
}

void c7_homogenization(Checks& c) {
  std::mt19937_64 rng(5);
  const auto far = clusters(rng, 100, 16, {{"kor", 0.0}, {"eng", 100.0}});
  const double s_far = lens::silhouette(far).overall;
  c.expect(s_far > 0.9, "separated silhouette " + format_fixed(s_far, 4));

  auto mixed = clusters(rng, 200, 16, {{"kor", 0.0}});
  for (std::size_t i = 0; i < mixed.items.size(); ++i) mixed.items[i].culture = i % 2 ? "kor" : "eng";
  const double s_mixed = lens::silhouette(mixed).overall;
  c.expect(std::abs(s_mixed) < 0.1, "single distribution silhouette " + format_fixed(s_mixed, 4));

  const auto report = lens::analyze(clusters(rng, 150, 16, {{"ara", 0.0}, {"ben", 3.0}, {"zho", 6.0}}), 64);
  for (const auto& d : report.kde) {
    c.expect(std::abs(d.grid.integral() - 1.0) <= 0.02, d.culture + " integral " + format_fixed(d.grid.integral(), 4));
  }
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<lens::Point2> pts(2000);
  for (auto& p : pts) p = {noise(rng), noise(rng)};
  const auto g = lens::kde_grid(pts, 64);
  c.expect(std::abs(g.integral() - 1.0) <= 0.02, "standard normal integral");
  const double peak = *std::max_element(g.values.begin(), g.values.end());
  c.expect(std::abs(peak - 0.1592) / 0.1592 <= 0.2, "standard normal peak " + format_fixed(peak, 4));
}

void c8_offline_determinism(Checks& c) {
  StubServer network;  // every adapter points here; a single request fails the criterion
  TempDir dir;
  const auto ws = fixture::write_workspace(dir.path(), {"ara", "eng", "kor", "spa"}, 25, network.base_url());
  c.expect(ws.samples == 100, "sample count " + std::to_string(ws.samples));
  ::setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  const auto first = fixture::run_pipeline(ws, dir / "first");
  const auto second = fixture::run_pipeline(ws, dir / "second");
  ::unsetenv("SOURCE_DATE_EPOCH");
  for (const auto* runs : {&first, &second}) {
    for (const auto& r : *runs) c.expect(r.code == 0, "exit " + std::to_string(r.code) + ": " + r.err);
  }
  const auto a = fixture::tree(dir / "first");
  const auto b = fixture::tree(dir / "second");
  c.expect(!a.empty(), "artifacts written");
  c.expect(a.size() == b.size(), "artifact count");
  for (const auto& [path, bytes] : a) {
    auto it = b.find(path);
    c.expect(it != b.end() && it->second == bytes, path + " differs");
  }
  c.expect(network.calls() == 0, std::to_string(network.calls()) + " network request(s)");
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    std::function<void(Checks&)> run;
    double limit_ms;  // 0 means no runtime bound
  };
  const std::vector<Criterion> criteria = {
      {"C-Dist fixture reproduction", c1_cdist_fixtures, 1000},
      {"Invalid-ratio fixture", c2_invalid_ratio, 1000},
      {"C-Dist property suite", c3_cdist_properties, 10000},
      {"Rendering goldens and round trip", c4_rendering, 0},
      {"Parsing fixtures", c5_parsing, 0},
      {"Macro-F1 oracle equivalence", c6_macro_f1, 0},
      {"Homogenization suite", c7_homogenization, 30000},
      {"Offline pipeline determinism", c8_offline_determinism, 0},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Checks checks;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].run(checks);
    } catch (const std::exception& e) {
      checks.expect(false, std::string("threw: ") + e.what());
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (criteria[i].limit_ms > 0 && ms > criteria[i].limit_ms) {
      checks.expect(false, "took longer than " + format_fixed(criteria[i].limit_ms, 0) + " ms");
    }
    std::cout << (checks.ok() ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].name << " ("
              << format_fixed(ms, 1) << " ms)";
    if (!checks.ok()) std::cout << ": " << checks.summary();
    std::cout << "\n";
    if (!checks.ok()) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
