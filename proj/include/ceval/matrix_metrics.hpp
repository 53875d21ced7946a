#pragma once

#include "ceval/culture.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

/// F1 scoring, adapter x test-culture matrices and the cultural distinctiveness score.
namespace ceval::metrics {

/// Macro-F1 in percent. Averages per-class F1 over the classes of `labels`
/// that occur in `golds`; a class never predicted correctly contributes 0.
/// Throws ValidationError on empty or mismatched input, or a gold label outside `labels`.
double macro_f1(std::span<const std::string> preds, std::span<const std::string> golds,
                std::span<const std::string> labels);

struct DatasetScore {
  std::string dataset_id;
  double f1 = 0.0;
};

/// Unweighted mean over datasets. Throws ValidationError on empty input.
double culture_score(std::span<const DatasetScore> dataset_f1s);

/// Rows are adapter cultures, columns test cultures, same order on both axes.
struct PerfMatrix {
  std::vector<std::string> cultures;
  std::vector<std::vector<double>> values;

  std::size_t size() const { return cultures.size(); }
  double at(std::size_t row, std::size_t col) const { return values[row][col]; }
};

struct ScoreCell {
  std::string adapter_culture;
  std::string test_culture;
  double f1 = 0.0;
};

/// Assembles an n x n matrix in registry order over the cultures named by the
/// cells. Throws ValidationError naming the pair for a missing or duplicate
/// cell, and for entries outside [0, 100].
PerfMatrix build_matrix(std::span<const ScoreCell> cells, const CultureRegistry& registry);

/// Throws ValidationError if not square or entries are out of range.
void validate(const PerfMatrix& m);

struct NormalizedMatrix {
  PerfMatrix matrix;
  std::vector<std::size_t> flagged_columns;  // max <= 0; passed through unnormalized
};

NormalizedMatrix column_normalize(const PerfMatrix& m);

struct ColumnMax {
  double value = 0.0;
  std::size_t row = 0;  // first row attaining the maximum
};

struct ExcludedColumn {
  std::size_t column = 0;
  std::string culture;
  std::string reason;
};

struct CDistReport {
  std::vector<std::string> cultures;
  std::vector<double> diagonal;
  std::vector<std::optional<double>> normalized;  // empty for excluded columns
  std::vector<ColumnMax> column_max;
  std::vector<ExcludedColumn> excluded;
  double score = 0.0;
};

/// D = mean over included columns of M[i][i] / max_j M[j][i]. Columns whose
/// maximum is not positive are excluded and reported. Throws ValidationError
/// when every column is excluded.
CDistReport cdist(const PerfMatrix& m);

struct RankMatrix {
  std::vector<std::string> cultures;
  std::vector<std::vector<int>> ranks;  // per column, 1 = best; ties share the minimum rank
};

RankMatrix rank_matrix(const PerfMatrix& m);

nlohmann::json to_json(const PerfMatrix& m);
PerfMatrix matrix_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CDistReport& r);
nlohmann::json to_json(const RankMatrix& r);

}  // namespace ceval::metrics
