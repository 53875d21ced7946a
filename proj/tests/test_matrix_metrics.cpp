#include "ceval/common.hpp"
#include "ceval/matrix_metrics.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace ceval;
using namespace ceval::metrics;

namespace {

PerfMatrix fixture(const char* name) {
  const auto path = std::filesystem::path(CEVAL_TEST_DIR) / "fixtures" / name;
  return matrix_from_json(nlohmann::json::parse(read_file(path)));
}

PerfMatrix random_matrix(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> v(0.0, 100.0);
  PerfMatrix m;
  for (std::size_t i = 0; i < n; ++i) m.cultures.push_back(std::string(1, char('a' + i)) + "aa");
  m.values.assign(n, std::vector<double>(n));
  for (auto& row : m.values) {
    for (auto& x : row) x = v(rng);
  }
  return m;
}

}  // namespace

TEST_SUITE("matrix_metrics") {

TEST_CASE("reference normalized tables reproduce the expected scores") {
  const auto wvs = cdist(fixture("wvs_normalized.json"));
  CHECK(wvs.score == doctest::Approx(0.75972).epsilon(1e-9));
  CHECK(round_to(wvs.score, 2) == doctest::Approx(0.76));
  const auto wiki = cdist(fixture("wvs_wiki_normalized.json"));
  CHECK(wiki.score == doctest::Approx(0.78179).epsilon(1e-9));
  CHECK(round_to(wiki.score, 2) == doctest::Approx(0.78));
  // Two columns of this table (ben, kor) peak below 1, so dividing by the
  // column maxima lifts the plain diagonal mean of 0.8752 to 0.8859.
  const auto nm = fixture("wvs_normad_normalized.json");
  double diag = 0.0;
  for (std::size_t i = 0; i < nm.size(); ++i) diag += nm.values[i][i];
  CHECK(diag / static_cast<double>(nm.size()) == doctest::Approx(0.87517).epsilon(1e-9));
  const auto normad = cdist(nm);
  CHECK(normad.score == doctest::Approx(oracle::cdist(nm.values)).epsilon(1e-12));
  CHECK(normad.score == doctest::Approx(0.88592).epsilon(1e-4));
  CHECK(std::abs(normad.score - 0.89) <= 0.02);
}

TEST_CASE("cdist agrees with the brute-force oracle and reports column maxima") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto m = random_matrix(rng, 2 + t % 11);
    const auto r = cdist(m);
    CHECK(r.score == doctest::Approx(oracle::cdist(m.values)).epsilon(1e-12));
    for (std::size_t j = 0; j < m.size(); ++j) {
      double mx = 0.0;
      for (std::size_t i = 0; i < m.size(); ++i) mx = std::max(mx, m.values[i][j]);
      CHECK(r.column_max[j].value == mx);
      CHECK(m.values[r.column_max[j].row][j] == mx);
    }
  }
}

TEST_CASE("cdist properties over 1000 random matrices") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::size_t> size(2, 12);
  std::uniform_real_distribution<double> scale(0.01, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const auto n = size(rng);
    auto m = random_matrix(rng, n);
    const double d = cdist(m).score;
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);

    // Scaling a column leaves its ratio unchanged.
    auto scaled = m;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = scale(rng);
      for (std::size_t i = 0; i < n; ++i) scaled.values[i][j] *= c;
    }
    CHECK(cdist(scaled).score == doctest::Approx(d).epsilon(1e-12));

    // Relabelling cultures consistently on both axes does not change the score.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto permuted = m;
    for (std::size_t i = 0; i < n; ++i) {
      permuted.cultures[i] = m.cultures[perm[i]];
      for (std::size_t j = 0; j < n; ++j) permuted.values[i][j] = m.values[perm[i]][perm[j]];
    }
    const auto pr = cdist(permuted);
    CHECK(pr.score == doctest::Approx(d).epsilon(1e-12));
    const auto orig = cdist(m);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(*pr.normalized[i] == doctest::Approx(*orig.normalized[perm[i]]).epsilon(1e-12));
    }

    // A dominant diagonal scores exactly 1.
    auto dominant = m;
    for (std::size_t j = 0; j < n; ++j) {
      double mx = 0.0;
      for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, dominant.values[i][j]);
      dominant.values[j][j] = mx;
    }
    CHECK(cdist(dominant).score == 1.0);

    // An all-zero column is excluded and the rest are averaged.
    auto zeroed = m;
    const std::size_t z = t % n;
    for (std::size_t i = 0; i < n; ++i) zeroed.values[i][z] = 0.0;
    const auto zr = cdist(zeroed);
    REQUIRE(zr.excluded.size() == 1);
    CHECK(zr.excluded[0].column == z);
    CHECK_FALSE(zr.normalized[z].has_value());
    CHECK(zr.score == doctest::Approx(oracle::cdist(zeroed.values)).epsilon(1e-12));
  }
}

TEST_CASE("every column excluded is an error") {
  PerfMatrix m{{"aaa", "bbb"}, {{0, 0}, {0, 0}}};
  CHECK_THROWS_AS(cdist(m), ValidationError);
}

TEST_CASE("macro-F1 matches a brute-force confusion matrix on 200 random sets") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> classes(2, 7), items(1, 20);
  for (int t = 0; t < 200; ++t) {
    const int k = classes(rng);
    std::vector<std::string> labels;
    for (int c = 0; c < k; ++c) labels.push_back("L" + std::to_string(c));
    std::uniform_int_distribution<int> pick(0, k - 1);
    const int n = items(rng);
    std::vector<std::string> preds, golds;
    for (int i = 0; i < n; ++i) {
      golds.push_back(labels[pick(rng)]);
      preds.push_back(labels[pick(rng)]);
    }
    CHECK(std::abs(macro_f1(preds, golds, labels) - oracle::macro_f1(preds, golds, labels)) < 1e-9);
  }
}

TEST_CASE("macro-F1 edge cases") {
  const std::vector<std::string> labels = {"OFF", "NOT"};
  const std::vector<std::string> golds = {"OFF", "NOT", "NOT", "OFF"};
  CHECK(macro_f1(golds, golds, labels) == doctest::Approx(100.0));
  const std::vector<std::string> flipped = {"NOT", "OFF", "OFF", "NOT"};
  CHECK(macro_f1(flipped, golds, labels) == doctest::Approx(0.0));
  const std::vector<std::string> short_preds = {"OFF"};
  CHECK_THROWS_AS(macro_f1(short_preds, golds, labels), ValidationError);
  const std::vector<std::string> alien = {"OFF", "NOT", "NOT", "HATE"};
  CHECK_THROWS_AS(macro_f1(golds, alien, labels), ValidationError);
  CHECK_THROWS_AS(macro_f1({}, {}, labels), ValidationError);
}

TEST_CASE("culture score is the unweighted mean of dataset scores") {
  const std::vector<DatasetScore> s = {{"a", 40.0}, {"b", 60.0}, {"c", 20.0}};
  CHECK(culture_score(s) == doctest::Approx(40.0));
  CHECK_THROWS_AS(culture_score({}), ValidationError);
}

TEST_CASE("matrix assembly follows registry order and names missing cells") {
  const auto reg = CultureRegistry::defaults();
  std::vector<ScoreCell> cells = {{"kor", "kor", 50}, {"kor", "ara", 40}, {"ara", "kor", 30}, {"ara", "ara", 60}};
  const auto m = build_matrix(cells, reg);
  CHECK(m.cultures == std::vector<std::string>{"ara", "kor"});
  CHECK(m.at(0, 1) == 30);
  CHECK(m.at(1, 0) == 40);
  cells.pop_back();
  try {
    build_matrix(cells, reg);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("ara") != std::string::npos);
  }
  cells.push_back({"ara", "ara", 60});
  cells.push_back({"ara", "ara", 61});
  CHECK_THROWS_AS(build_matrix(cells, reg), ValidationError);
  cells.pop_back();
  cells.back().f1 = 101;
  CHECK_THROWS_AS(build_matrix(cells, reg), ValidationError);
}

TEST_CASE("column normalization flags non-positive columns") {
  PerfMatrix m{{"aaa", "bbb"}, {{20, 0}, {40, 0}}};
  const auto n = column_normalize(m);
  CHECK(n.matrix.values[0][0] == doctest::Approx(0.5));
  CHECK(n.matrix.values[1][0] == doctest::Approx(1.0));
  CHECK(n.flagged_columns == std::vector<std::size_t>{1});
}

TEST_CASE("ranks per column with shared minimum ranks on ties") {
  PerfMatrix m{{"aaa", "bbb", "ccc"}, {{10, 5, 1}, {30, 5, 2}, {20, 1, 3}}};
  const auto r = rank_matrix(m);
  CHECK(r.ranks[0][0] == 3);
  CHECK(r.ranks[1][0] == 1);
  CHECK(r.ranks[2][0] == 2);
  CHECK(r.ranks[0][1] == 1);
  CHECK(r.ranks[1][1] == 1);
  CHECK(r.ranks[2][1] == 3);
  CHECK(r.ranks[2][2] == 1);
}

TEST_CASE("matrix JSON round-trip and shape validation") {
  const auto m = fixture("wvs_normalized.json");
  const auto back = matrix_from_json(to_json(m));
  CHECK(back.cultures == m.cultures);
  CHECK(back.values == m.values);
  PerfMatrix ragged{{"aaa", "bbb"}, {{1, 2}, {3}}};
  CHECK_THROWS_AS(validate(ragged), ValidationError);
  CHECK(to_json(cdist(m))["score_reported"].get<double>() == doctest::Approx(0.76));
}

}
