#include "ceval/matrix_metrics.hpp"

#include "ceval/common.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace ceval::metrics {

double macro_f1(std::span<const std::string> preds, std::span<const std::string> golds,
                std::span<const std::string> labels) {
  if (preds.empty()) throw ValidationError("macro-F1 of an empty prediction set");
  if (preds.size() != golds.size()) {
    throw ValidationError("macro-F1: " + std::to_string(preds.size()) + " predictions vs " +
                          std::to_string(golds.size()) + " gold labels");
  }
  const std::set<std::string, std::less<>> label_set(labels.begin(), labels.end());
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
    bool in_gold = false;
  };
  std::map<std::string, Counts, std::less<>> per_class;
  for (const auto& l : labels) per_class[l];

  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (!label_set.contains(golds[i])) {
      throw ValidationError("macro-F1: gold label '" + golds[i] + "' is outside the label set");
    }
    auto& g = per_class[golds[i]];
    g.in_gold = true;
    if (preds[i] == golds[i]) {
      ++g.tp;
    } else {
      ++g.fn;
      // A prediction outside the label set is a miss for the gold class only.
      if (auto it = per_class.find(preds[i]); it != per_class.end()) ++it->second.fp;
    }
  }

  double sum = 0.0;
  std::size_t classes = 0;
  for (const auto& [label, c] : per_class) {
    if (!c.in_gold) continue;
    sum += 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
    ++classes;
  }
  return 100.0 * sum / static_cast<double>(classes);
}

double culture_score(std::span<const DatasetScore> dataset_f1s) {
  if (dataset_f1s.empty()) throw ValidationError("culture score over zero datasets");
  double sum = 0.0;
  for (const auto& d : dataset_f1s) sum += d.f1;
  return sum / static_cast<double>(dataset_f1s.size());
}

void validate(const PerfMatrix& m) {
  const auto n = m.cultures.size();
  if (n == 0) throw ValidationError("performance matrix is empty");
  if (m.values.size() != n) throw ValidationError("performance matrix is not square");
  for (std::size_t i = 0; i < n; ++i) {
    if (m.values[i].size() != n) throw ValidationError("performance matrix is not square");
    for (std::size_t j = 0; j < n; ++j) {
      const double v = m.values[i][j];
      if (!(v >= 0.0 && v <= 100.0)) {
        throw ValidationError("matrix entry (" + m.cultures[i] + ", " + m.cultures[j] + ") = " +
                              std::to_string(v) + " is outside [0, 100]");
      }
    }
  }
}

PerfMatrix build_matrix(std::span<const ScoreCell> cells, const CultureRegistry& registry) {
  std::set<std::size_t> indices;
  for (const auto& c : cells) {
    indices.insert(registry.index_of(c.adapter_culture));
    indices.insert(registry.index_of(c.test_culture));
  }
  PerfMatrix m;
  for (auto idx : indices) m.cultures.push_back(registry.cultures()[idx].code);
  const auto n = m.cultures.size();
  auto pos = [&](const std::string& code) {
    return static_cast<std::size_t>(std::find(m.cultures.begin(), m.cultures.end(), code) - m.cultures.begin());
  };

  std::vector<std::vector<std::optional<double>>> grid(n, std::vector<std::optional<double>>(n));
  for (const auto& c : cells) {
    auto& slot = grid[pos(c.adapter_culture)][pos(c.test_culture)];
    if (slot) {
      throw ValidationError("duplicate matrix cell (" + c.adapter_culture + ", " + c.test_culture + ")");
    }
    slot = c.f1;
  }
  m.values.assign(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!grid[i][j]) {
        throw ValidationError("missing matrix cell (" + m.cultures[i] + ", " + m.cultures[j] + ")");
      }
      m.values[i][j] = *grid[i][j];
    }
  }
  validate(m);
  return m;
}

namespace {

ColumnMax column_max(const PerfMatrix& m, std::size_t col) {
  ColumnMax best{m.values[0][col], 0};
  for (std::size_t r = 1; r < m.size(); ++r) {
    if (m.values[r][col] > best.value) best = {m.values[r][col], r};
  }
  return best;
}

}  // namespace

NormalizedMatrix column_normalize(const PerfMatrix& m) {
  validate(m);
  NormalizedMatrix out{m, {}};
  for (std::size_t j = 0; j < m.size(); ++j) {
    const double mx = column_max(m, j).value;
    if (mx <= 0.0) {
      out.flagged_columns.push_back(j);
      continue;
    }
    for (std::size_t i = 0; i < m.size(); ++i) out.matrix.values[i][j] = m.values[i][j] / mx;
  }
  return out;
}

CDistReport cdist(const PerfMatrix& m) {
  validate(m);
  const auto n = m.size();
  CDistReport r;
  r.cultures = m.cultures;
  double sum = 0.0;
  std::size_t included = 0;
  for (std::size_t i = 0; i < n; ++i) {
    r.diagonal.push_back(m.values[i][i]);
    auto mx = column_max(m, i);
    r.column_max.push_back(mx);
    if (mx.value <= 0.0) {
      r.normalized.emplace_back(std::nullopt);
      r.excluded.push_back({i, m.cultures[i], "column maximum is zero"});
      continue;
    }
    const double ni = m.values[i][i] / mx.value;
    r.normalized.emplace_back(ni);
    sum += ni;
    ++included;
  }
  if (included == 0) throw ValidationError("C-Dist undefined: every column has a zero maximum");
  r.score = sum / static_cast<double>(included);
  return r;
}

RankMatrix rank_matrix(const PerfMatrix& m) {
  validate(m);
  const auto n = m.size();
  RankMatrix r{m.cultures, std::vector<std::vector<int>>(n, std::vector<int>(n))};
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      int better = 0;
      for (std::size_t k = 0; k < n; ++k) {
        if (m.values[k][j] > m.values[i][j]) ++better;
      }
      r.ranks[i][j] = better + 1;
    }
  }
  return r;
}

nlohmann::json to_json(const PerfMatrix& m) { return {{"cultures", m.cultures}, {"values", m.values}}; }

PerfMatrix matrix_from_json(const nlohmann::json& j) {
  PerfMatrix m;
  try {
    m.cultures = j.at("cultures").get<std::vector<std::string>>();
    m.values = j.at("values").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed matrix: ") + e.what());
  }
  validate(m);
  return m;
}

nlohmann::json to_json(const CDistReport& r) {
  nlohmann::json normalized = nlohmann::json::array();
  for (const auto& v : r.normalized) normalized.push_back(v ? nlohmann::json(*v) : nlohmann::json());
  nlohmann::json maxes = nlohmann::json::array();
  for (std::size_t i = 0; i < r.column_max.size(); ++i) {
    maxes.push_back({{"culture", r.cultures[i]},
                     {"value", r.column_max[i].value},
                     {"row", r.cultures[r.column_max[i].row]}});
  }
  nlohmann::json excluded = nlohmann::json::array();
  for (const auto& e : r.excluded) excluded.push_back({{"culture", e.culture}, {"reason", e.reason}});
  return {{"cultures", r.cultures},
          {"diagonal", r.diagonal},
          {"normalized_diagonal", std::move(normalized)},
          {"column_max", std::move(maxes)},
          {"excluded_columns", std::move(excluded)},
          {"score", r.score},
          {"score_reported", round_to(r.score, 2)}};
}

nlohmann::json to_json(const RankMatrix& r) { return {{"cultures", r.cultures}, {"ranks", r.ranks}}; }

}  // namespace ceval::metrics
