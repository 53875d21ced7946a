#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

/// Embedding-space homogenization analysis: separation statistics, a
/// deterministic 2-D projection and per-culture density grids.
namespace ceval::lens {

struct EmbeddingItem {
  std::string culture;
  std::string source;  // e.g. "wikipedia", "normad"
  std::vector<double> vector;
};

struct EmbeddingSet {
  std::size_t dim = 0;
  std::vector<EmbeddingItem> items;

  /// Distinct culture codes in first-appearance order.
  std::vector<std::string> cultures() const;
};

/// One JSON object per line: {"culture": "kor", "source": "normad", "vector": [..]}.
/// Throws ValidationError naming the line on malformed input or a dim mismatch.
EmbeddingSet parse_embeddings(std::string_view text);
EmbeddingSet read_embeddings(const std::filesystem::path& path);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline constexpr std::string_view kProjectionMethod = "pca";

struct Projection {
  std::vector<Point2> coords;
  std::array<std::vector<double>, 2> axes;  // unit principal axes, zero-filled when absent
  std::vector<double> mean;
  std::array<double, 2> singular_values{};
  std::vector<std::string> warnings;
};

/// Mean-centers and projects onto the top two principal axes. Each axis is
/// signed so its largest-magnitude loading is positive (first index on ties).
/// Needs at least 3 items and dim >= 2; a rank-deficient second (or first) axis
/// is zero-filled with a warning.
Projection pca_project(const EmbeddingSet& set);

struct GridBounds {
  double x_min = 0.0, x_max = 0.0;
  double y_min = 0.0, y_max = 0.0;
};

struct KdeGrid {
  std::size_t resolution = 0;
  GridBounds bounds;
  double bandwidth_x = 0.0;
  double bandwidth_y = 0.0;
  std::vector<double> values;  // row-major, y outer: values[iy * resolution + ix]
  std::vector<std::string> warnings;

  double cell_width() const { return (bounds.x_max - bounds.x_min) / static_cast<double>(resolution); }
  double cell_height() const { return (bounds.y_max - bounds.y_min) / static_cast<double>(resolution); }
  Point2 cell_center(std::size_t ix, std::size_t iy) const;
  double at(std::size_t ix, std::size_t iy) const { return values[iy * resolution + ix]; }
  /// Sum of cell values times cell area.
  double integral() const;
};

inline constexpr double kBandwidthFloor = 1e-6;

/// Per-axis Scott's rule, sigma * n^(-1/6), floored at kBandwidthFloor.
std::array<double, 2> scott_bandwidth(std::span<const Point2> points, std::vector<std::string>* warnings = nullptr);

/// Data bounds padded by three bandwidths on each side.
GridBounds padded_bounds(std::span<const Point2> points, const std::array<double, 2>& bandwidth);
GridBounds merge(const GridBounds& a, const GridBounds& b);

/// Gaussian product-kernel density on a resolution x resolution grid of cell
/// centers, normalized so the discrete integral is 1. Needs >= 2 points and
/// resolution >= 16.
KdeGrid kde_grid(std::span<const Point2> points, std::size_t resolution);
KdeGrid kde_grid(std::span<const Point2> points, std::size_t resolution, const GridBounds& bounds);

struct SilhouetteReport {
  std::vector<std::pair<std::string, double>> per_culture;  // mean s(i) per culture
  double overall = 0.0;                                      // mean s(i) over all included items
  std::vector<std::string> excluded_cultures;                // fewer than 2 items
  std::vector<std::string> warnings;
};

/// Euclidean silhouette. Cultures with one item are excluded with a warning;
/// throws ValidationError if fewer than two cultures remain.
SilhouetteReport silhouette(const EmbeddingSet& set);

struct CentroidDistances {
  std::vector<std::string> cultures;
  std::vector<std::vector<double>> distances;
};

CentroidDistances centroid_distances(const EmbeddingSet& set);

struct CultureDensity {
  std::string culture;
  KdeGrid grid;
};

struct HomogenizationReport {
  SilhouetteReport silhouette;
  CentroidDistances centroids;
  Projection projection;
  std::vector<std::string> item_cultures;  // aligned with projection.coords
  std::vector<CultureDensity> kde;         // shared bounds and resolution
  std::vector<std::string> warnings;
};

/// Runs every statistic. KDE grids for all cultures share one bounding box,
/// the union of each culture's padded bounds.
HomogenizationReport analyze(const EmbeddingSet& set, std::size_t kde_resolution = 64);

nlohmann::json to_json(const KdeGrid& g);
KdeGrid kde_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HomogenizationReport& r);

}  // namespace ceval::lens
