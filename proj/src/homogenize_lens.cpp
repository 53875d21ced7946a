#define EIGEN_DONT_PARALLELIZE
#include "ceval/homogenize_lens.hpp"

#include "ceval/common.hpp"
#include "ceval/lens_kernels.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace ceval::lens {

std::vector<std::string> EmbeddingSet::cultures() const {
  std::vector<std::string> out;
  for (const auto& it : items) {
    if (std::find(out.begin(), out.end(), it.culture) == out.end()) out.push_back(it.culture);
  }
  return out;
}

EmbeddingSet parse_embeddings(std::string_view text) {
  EmbeddingSet set;
  auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const auto where = "embeddings line " + std::to_string(i + 1);
    EmbeddingItem item;
    try {
      auto j = nlohmann::json::parse(lines[i]);
      item.culture = j.at("culture").get<std::string>();
      item.source = j.value("source", "");
      item.vector = j.at("vector").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (item.culture.empty()) throw ValidationError(where + ": empty culture");
    if (item.vector.empty()) throw ValidationError(where + ": empty vector");
    if (set.dim == 0) set.dim = item.vector.size();
    if (item.vector.size() != set.dim) {
      throw ValidationError(where + ": vector has " + std::to_string(item.vector.size()) +
                            " components, expected " + std::to_string(set.dim));
    }
    set.items.push_back(std::move(item));
  }
  return set;
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) { return parse_embeddings(read_file(path)); }

Projection pca_project(const EmbeddingSet& set) {
  const auto n = set.items.size();
  const auto dim = set.dim;
  if (n < 3) throw ValidationError("PCA needs at least 3 items, got " + std::to_string(n));
  if (dim < 2) throw ValidationError("PCA needs dim >= 2");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = set.items[i].vector[d];
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;

  Projection p;
  p.mean.assign(mean.data(), mean.data() + dim);
  p.coords.assign(n, Point2{});

  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double tol = sv.size() > 0 ? sv(0) * static_cast<double>(std::max(n, dim)) *
                                         std::numeric_limits<double>::epsilon()
                                   : 0.0;
  for (int k = 0; k < 2; ++k) {
    p.axes[k].assign(dim, 0.0);
    const bool present = k < sv.size() && sv(k) > tol && sv(k) > 0.0;
    if (!present) {
      p.warnings.push_back("principal axis " + std::to_string(k + 1) +
                           " has zero variance; coordinates zero-filled");
      continue;
    }
    p.singular_values[k] = sv(k);
    Eigen::VectorXd axis = svd.matrixV().col(k);
    Eigen::Index arg = 0;
    for (Eigen::Index d = 1; d < axis.size(); ++d) {
      if (std::abs(axis(d)) > std::abs(axis(arg))) arg = d;
    }
    if (axis(arg) < 0) axis = -axis;
    const Eigen::VectorXd proj = x * axis;
    for (std::size_t i = 0; i < n; ++i) {
      (k == 0 ? p.coords[i].x : p.coords[i].y) = proj(static_cast<Eigen::Index>(i));
    }
    p.axes[k].assign(axis.data(), axis.data() + dim);
  }
  return p;
}

Point2 KdeGrid::cell_center(std::size_t ix, std::size_t iy) const {
  return {bounds.x_min + (static_cast<double>(ix) + 0.5) * cell_width(),
          bounds.y_min + (static_cast<double>(iy) + 0.5) * cell_height()};
}

double KdeGrid::integral() const {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum * cell_width() * cell_height();
}

namespace {

double sample_std(std::span<const Point2> pts, bool x_axis) {
  double mean = 0.0;
  for (const auto& p : pts) mean += x_axis ? p.x : p.y;
  mean /= static_cast<double>(pts.size());
  double ss = 0.0;
  for (const auto& p : pts) {
    const double d = (x_axis ? p.x : p.y) - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(pts.size() - 1));
}

std::vector<double> cell_centers(double lo, double hi, std::size_t res) {
  std::vector<double> c(res);
  const double w = (hi - lo) / static_cast<double>(res);
  for (std::size_t i = 0; i < res; ++i) c[i] = lo + (static_cast<double>(i) + 0.5) * w;
  return c;
}

}  // namespace

std::array<double, 2> scott_bandwidth(std::span<const Point2> points, std::vector<std::string>* warnings) {
  if (points.size() < 2) throw ValidationError("bandwidth needs at least 2 points");
  const double factor = std::pow(static_cast<double>(points.size()), -1.0 / 6.0);
  std::array<double, 2> h{sample_std(points, true) * factor, sample_std(points, false) * factor};
  for (int k = 0; k < 2; ++k) {
    if (!(h[k] >= kBandwidthFloor)) {
      h[k] = kBandwidthFloor;
      if (warnings) {
        warnings->push_back(std::string(k == 0 ? "x" : "y") + " axis has zero variance; bandwidth floored at 1e-6");
      }
    }
  }
  return h;
}

GridBounds padded_bounds(std::span<const Point2> points, const std::array<double, 2>& bandwidth) {
  GridBounds b{points[0].x, points[0].x, points[0].y, points[0].y};
  for (const auto& p : points) {
    b.x_min = std::min(b.x_min, p.x);
    b.x_max = std::max(b.x_max, p.x);
    b.y_min = std::min(b.y_min, p.y);
    b.y_max = std::max(b.y_max, p.y);
  }
  b.x_min -= 3 * bandwidth[0];
  b.x_max += 3 * bandwidth[0];
  b.y_min -= 3 * bandwidth[1];
  b.y_max += 3 * bandwidth[1];
  return b;
}

GridBounds merge(const GridBounds& a, const GridBounds& b) {
  return {std::min(a.x_min, b.x_min), std::max(a.x_max, b.x_max), std::min(a.y_min, b.y_min),
          std::max(a.y_max, b.y_max)};
}

KdeGrid kde_grid(std::span<const Point2> points, std::size_t resolution) {
  // Bandwidth warnings are recorded by the bounded overload.
  return kde_grid(points, resolution, padded_bounds(points, scott_bandwidth(points)));
}

KdeGrid kde_grid(std::span<const Point2> points, std::size_t resolution, const GridBounds& bounds) {
  if (points.size() < 2) throw ValidationError("KDE needs at least 2 points");
  if (resolution < 16) throw ValidationError("KDE resolution must be at least 16");
  if (!(bounds.x_max > bounds.x_min) || !(bounds.y_max > bounds.y_min)) {
    throw ValidationError("KDE grid bounds are empty");
  }
  KdeGrid g;
  g.resolution = resolution;
  g.bounds = bounds;
  const auto h = scott_bandwidth(points, &g.warnings);
  g.bandwidth_x = h[0];
  g.bandwidth_y = h[1];

  std::vector<double> xs, ys;
  xs.reserve(points.size());
  ys.reserve(points.size());
  for (const auto& p : points) {
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  const auto gx = cell_centers(bounds.x_min, bounds.x_max, resolution);
  const auto gy = cell_centers(bounds.y_min, bounds.y_max, resolution);
  g.values.assign(resolution * resolution, 0.0);
  kernels::kde_omp({xs, ys, h[0], h[1], gx, gy}, g.values);

  const double mass = g.integral();
  if (!(mass > 0.0)) throw ValidationError("KDE grid captured no density mass");
  for (double& v : g.values) v /= mass;
  return g;
}

SilhouetteReport silhouette(const EmbeddingSet& set) {
  SilhouetteReport r;
  std::map<std::string, std::size_t> counts;
  for (const auto& it : set.items) ++counts[it.culture];

  std::vector<std::string> included;
  for (const auto& c : set.cultures()) {
    if (counts[c] < 2) {
      r.excluded_cultures.push_back(c);
      r.warnings.push_back("culture " + c + " has a single item; excluded from silhouette");
    } else {
      included.push_back(c);
    }
  }
  if (included.size() < 2) throw ValidationError("silhouette needs at least two cultures with two items each");

  std::vector<double> data;
  std::vector<int> cluster;
  std::vector<std::size_t> sizes(included.size(), 0);
  for (const auto& it : set.items) {
    auto pos = std::find(included.begin(), included.end(), it.culture);
    if (pos == included.end()) continue;
    const auto c = static_cast<int>(pos - included.begin());
    cluster.push_back(c);
    ++sizes[static_cast<std::size_t>(c)];
    data.insert(data.end(), it.vector.begin(), it.vector.end());
  }
  const auto n = cluster.size();
  std::vector<double> s(n);
  std::vector<unsigned char> degenerate(n);
  kernels::silhouette_omp({data, n, set.dim, cluster, sizes}, s, degenerate);

  std::vector<double> per(included.size(), 0.0);
  double total = 0.0;
  std::size_t degenerate_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    per[static_cast<std::size_t>(cluster[i])] += s[i];
    total += s[i];
    degenerate_count += degenerate[i];
  }
  for (std::size_t c = 0; c < included.size(); ++c) {
    r.per_culture.emplace_back(included[c], per[c] / static_cast<double>(sizes[c]));
  }
  r.overall = total / static_cast<double>(n);
  if (degenerate_count > 0) {
    r.warnings.push_back(std::to_string(degenerate_count) +
                         " items have zero intra- and inter-cluster distance; silhouette defined as 0");
  }
  return r;
}

CentroidDistances centroid_distances(const EmbeddingSet& set) {
  CentroidDistances out;
  out.cultures = set.cultures();
  const auto k = out.cultures.size();
  std::vector<std::vector<double>> centroid(k, std::vector<double>(set.dim, 0.0));
  std::vector<std::size_t> counts(k, 0);
  for (const auto& it : set.items) {
    const auto c = static_cast<std::size_t>(std::find(out.cultures.begin(), out.cultures.end(), it.culture) -
                                            out.cultures.begin());
    ++counts[c];
    for (std::size_t d = 0; d < set.dim; ++d) centroid[c][d] += it.vector[d];
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (double& v : centroid[c]) v /= static_cast<double>(counts[c]);
  }
  out.distances.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      double ss = 0.0;
      for (std::size_t d = 0; d < set.dim; ++d) {
        const double diff = centroid[a][d] - centroid[b][d];
        ss += diff * diff;
      }
      out.distances[a][b] = out.distances[b][a] = std::sqrt(ss);
    }
  }
  return out;
}

HomogenizationReport analyze(const EmbeddingSet& set, std::size_t kde_resolution) {
  HomogenizationReport r;
  r.silhouette = silhouette(set);
  r.centroids = centroid_distances(set);
  r.projection = pca_project(set);
  for (const auto& it : set.items) r.item_cultures.push_back(it.culture);

  std::vector<std::pair<std::string, std::vector<Point2>>> groups;
  for (const auto& c : set.cultures()) {
    std::vector<Point2> pts;
    for (std::size_t i = 0; i < set.items.size(); ++i) {
      if (set.items[i].culture == c) pts.push_back(r.projection.coords[i]);
    }
    if (pts.size() < 2) {
      r.warnings.push_back("culture " + c + " has fewer than 2 items; no density grid");
      continue;
    }
    groups.emplace_back(c, std::move(pts));
  }
  if (!groups.empty()) {
    std::vector<std::string> ignored;
    GridBounds bounds = padded_bounds(groups[0].second, scott_bandwidth(groups[0].second, &ignored));
    for (std::size_t g = 1; g < groups.size(); ++g) {
      bounds = merge(bounds, padded_bounds(groups[g].second, scott_bandwidth(groups[g].second, &ignored)));
    }
    for (auto& [culture, pts] : groups) {
      r.kde.push_back({culture, kde_grid(pts, kde_resolution, bounds)});
    }
  }
  for (const auto& w : r.projection.warnings) r.warnings.push_back(w);
  for (const auto& w : r.silhouette.warnings) r.warnings.push_back(w);
  return r;
}

nlohmann::json to_json(const KdeGrid& g) {
  return {{"resolution", g.resolution},
          {"bounds", {g.bounds.x_min, g.bounds.x_max, g.bounds.y_min, g.bounds.y_max}},
          {"bandwidth", {g.bandwidth_x, g.bandwidth_y}},
          {"values", g.values},
          {"warnings", g.warnings}};
}

KdeGrid kde_from_json(const nlohmann::json& j) {
  KdeGrid g;
  try {
    g.resolution = j.at("resolution").get<std::size_t>();
    auto b = j.at("bounds").get<std::vector<double>>();
    auto h = j.at("bandwidth").get<std::vector<double>>();
    if (b.size() != 4 || h.size() != 2) throw ValidationError("malformed KDE grid bounds or bandwidth");
    g.bounds = {b[0], b[1], b[2], b[3]};
    g.bandwidth_x = h[0];
    g.bandwidth_y = h[1];
    g.values = j.at("values").get<std::vector<double>>();
    g.warnings = j.value("warnings", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed KDE grid: ") + e.what());
  }
  if (g.values.size() != g.resolution * g.resolution) throw ValidationError("KDE grid has the wrong number of values");
  return g;
}

nlohmann::json to_json(const HomogenizationReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& [c, s] : r.silhouette.per_culture) per.push_back({{"culture", c}, {"silhouette", s}});
  nlohmann::json coords = nlohmann::json::array();
  for (std::size_t i = 0; i < r.projection.coords.size(); ++i) {
    coords.push_back({{"culture", r.item_cultures[i]}, {"x", r.projection.coords[i].x}, {"y", r.projection.coords[i].y}});
  }
  nlohmann::json kde = nlohmann::json::array();
  for (const auto& d : r.kde) {
    auto g = to_json(d.grid);
    g["culture"] = d.culture;
    kde.push_back(std::move(g));
  }
  return {{"silhouette",
           {{"per_culture", std::move(per)},
            {"overall", r.silhouette.overall},
            {"excluded_cultures", r.silhouette.excluded_cultures}}},
          {"centroid_distances", {{"cultures", r.centroids.cultures}, {"distances", r.centroids.distances}}},
          {"projection",
           {{"method", kProjectionMethod},
            {"note", "PCA projection substituted for UMAP; separation statistics do not depend on it"},
            {"singular_values", r.projection.singular_values},
            {"points", std::move(coords)}}},
          {"kde", std::move(kde)},
          {"warnings", r.warnings}};
}

}  // namespace ceval::lens
