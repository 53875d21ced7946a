#pragma once

#include "ceval/homogenize_lens.hpp"
#include "ceval/matrix_metrics.hpp"
#include "ceval/prompt_kit.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

/// Deterministic SVG figures, result tables and run manifests.
namespace ceval::report {

struct LabeledMatrix {
  std::vector<std::string> labels;  // shared by rows and columns
  std::vector<std::vector<double>> values;
};

LabeledMatrix labeled(const metrics::PerfMatrix& m);
LabeledMatrix labeled(const metrics::RankMatrix& r);

struct HeatmapOptions {
  std::string title;
  std::string run_id;
  int decimals = 4;
  bool higher_is_darker = true;  // false for rank matrices, where 1 is best
  double cell_size = 52.0;
};

/// One cell per entry on a single-hue luminance ramp, diagonal outlined,
/// culture codes on both axes and the value printed in every cell.
/// Throws ValidationError for a non-square matrix.
std::string heatmap_svg(const LabeledMatrix& m, const HeatmapOptions& options);

struct TableRow {
  std::string model;
  std::string data_config;
  std::optional<double> cdist;
  std::optional<double> f1_cult;
  std::optional<double> f1_mmlu;
  std::optional<double> invalid_ratio;  // percent
};

struct Tables {
  std::string csv;
  std::string markdown;
};

/// Summary table, one row per (model, data configuration). Missing values
/// are left blank in both renderings; numbers print with 2 decimals.
Tables emit_tables(std::span<const TableRow> rows, std::string_view run_id);

/// Normalized-score style table: adapter rows, test-culture columns.
Tables matrix_tables(const LabeledMatrix& m, int decimals, std::string_view run_id);

/// Density thresholds at l / (levels + 1) of the grid maximum, l = 1..levels.
std::vector<double> contour_levels(const lens::KdeGrid& grid, int levels);
/// For each level, which cells (row-major, y outer) reach the threshold.
std::vector<std::vector<bool>> level_masks(const lens::KdeGrid& grid, int levels);

struct ContourOptions {
  std::string title;
  std::string run_id;
  int levels = 6;
  double size = 480.0;
};

/// Overlaid filled contours and isolines, one color per culture, with a
/// legend. Throws ValidationError if grids differ in bounds or resolution.
std::string kde_contour_svg(std::span<const lens::CultureDensity> grids, const ContourOptions& options);

struct RunManifest {
  std::string run_id;
  std::string timestamp;
  std::string subcommand;
  std::string config_digest;
  std::map<std::string, std::string> module_versions;
  std::map<std::string, std::string> input_digests;  // path -> sha256
  prompt::DecodeParams decode;
  bool decode_overridden = false;
  bool strict = false;
  std::string scoring_mode;
  std::map<std::string, std::string> artifacts;  // relative path -> sha256
};

nlohmann::json to_json(const RunManifest& m);

inline constexpr std::string_view kHarnessVersion = "0.3.0";

}  // namespace ceval::report
