#include "ceval/report_studio.hpp"

#include "ceval/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace ceval::report {

namespace {

std::string num(double v) { return format_fixed(v, 2); }

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out.push_back(c);
  }
  return out + "\"";
}

std::string md_cell(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\";
    out.push_back(c);
  }
  return out;
}

std::string opt2(const std::optional<double>& v) { return v ? format_fixed(*v, 2) : std::string(); }

struct Rgb {
  int r, g, b;
};

// Single-hue ramp, light to dark blue. Luminance decreases monotonically in t.
Rgb ramp(double t) {
  constexpr Rgb lo{247, 251, 255};
  constexpr Rgb hi{8, 48, 107};
  t = std::clamp(t, 0.0, 1.0);
  auto mix = [t](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * t)); };
  return {mix(lo.r, hi.r), mix(lo.g, hi.g), mix(lo.b, hi.b)};
}

std::string hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

LabeledMatrix labeled(const metrics::PerfMatrix& m) { return {m.cultures, m.values}; }

LabeledMatrix labeled(const metrics::RankMatrix& r) {
  LabeledMatrix out{r.cultures, {}};
  for (const auto& row : r.ranks) out.values.emplace_back(row.begin(), row.end());
  return out;
}

std::string heatmap_svg(const LabeledMatrix& m, const HeatmapOptions& options) {
  const auto n = m.labels.size();
  if (n == 0 || m.values.size() != n ||
      std::any_of(m.values.begin(), m.values.end(), [n](const auto& row) { return row.size() != n; })) {
    throw ValidationError("heatmap needs a square labeled matrix");
  }
  double lo = m.values[0][0], hi = m.values[0][0];
  for (const auto& row : m.values) {
    for (double v : row) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double cell = options.cell_size;
  const double left = 90.0, top = 80.0;
  const double width = left + cell * static_cast<double>(n) + 20.0;
  const double height = top + cell * static_cast<double>(n) + 20.0;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\" data-run-id=\""
      << xml_escape(options.run_id) << "\">\n";
  svg << "<desc>run_id: " << xml_escape(options.run_id) << "</desc>\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  svg << "<text x=\"" << num(left) << "\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\">"
      << xml_escape(options.title) << "</text>\n";
  svg << "<text x=\"" << num(left + cell * static_cast<double>(n) / 2) << "\" y=\"44\" font-family=\"sans-serif\""
      << " font-size=\"11\" text-anchor=\"middle\">test culture</text>\n";
  svg << "<text x=\"14\" y=\"" << num(top + cell * static_cast<double>(n) / 2) << "\" font-family=\"sans-serif\""
      << " font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << num(top + cell * static_cast<double>(n) / 2) << ")\">adapter culture</text>\n";

  for (std::size_t j = 0; j < n; ++j) {
    svg << "<text class=\"col-label\" x=\"" << num(left + cell * (static_cast<double>(j) + 0.5)) << "\" y=\""
        << num(top - 8) << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
        << xml_escape(m.labels[j]) << "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    svg << "<text class=\"row-label\" x=\"" << num(left - 8) << "\" y=\""
        << num(top + cell * (static_cast<double>(i) + 0.5) + 4) << "\" font-family=\"sans-serif\" font-size=\"12\""
        << " text-anchor=\"end\">" << xml_escape(m.labels[i]) << "</text>\n";
  }

  std::ostringstream outlines;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = m.values[i][j];
      double t = hi > lo ? (v - lo) / (hi - lo) : 1.0;
      if (!options.higher_is_darker) t = 1.0 - t;
      const double x = left + cell * static_cast<double>(j);
      const double y = top + cell * static_cast<double>(i);
      const bool diag = i == j;
      svg << "<rect class=\"cell" << (diag ? " diag" : "") << "\" data-row=\"" << xml_escape(m.labels[i])
          << "\" data-col=\"" << xml_escape(m.labels[j]) << "\" x=\"" << num(x) << "\" y=\"" << num(y)
          << "\" width=\"" << num(cell) << "\" height=\"" << num(cell) << "\" fill=\"" << hex(ramp(t))
          << "\" stroke=\"#ffffff\" stroke-width=\"1\"/>\n";
      svg << "<text class=\"value\" x=\"" << num(x + cell / 2) << "\" y=\"" << num(y + cell / 2 + 4)
          << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\" fill=\""
          << (t > 0.5 ? "#ffffff" : "#000000") << "\">" << format_fixed(v, options.decimals) << "</text>\n";
      if (diag) {
        outlines << "<rect class=\"diag-outline\" x=\"" << num(x + 1.5) << "\" y=\"" << num(y + 1.5)
                 << "\" width=\"" << num(cell - 3) << "\" height=\"" << num(cell - 3)
                 << "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"3\"/>\n";
      }
    }
  }
  // Outlines go last so neighbouring cells never paint over them.
  svg << outlines.str();
  svg << "</svg>\n";
  return svg.str();
}

Tables emit_tables(std::span<const TableRow> rows, std::string_view run_id) {
  Tables t;
  t.csv = "model,data,c_dist,f1_cult,f1_mmlu,invalid_ratio,run_id\n";
  t.markdown =
      "| Model | Data | C-Dist | F1 Cult. (%) | F1 MMLU (%) | Invalid (%) |\n"
      "|---|---|---:|---:|---:|---:|\n";
  for (const auto& r : rows) {
    t.csv += csv_field(r.model) + "," + csv_field(r.data_config) + "," + opt2(r.cdist) + "," + opt2(r.f1_cult) +
             "," + opt2(r.f1_mmlu) + "," + opt2(r.invalid_ratio) + "," + csv_field(run_id) + "\n";
    t.markdown += "| " + md_cell(r.model) + " | " + md_cell(r.data_config) + " | " + opt2(r.cdist) + " | " +
                  opt2(r.f1_cult) + " | " + opt2(r.f1_mmlu) + " | " + opt2(r.invalid_ratio) + " |\n";
  }
  t.markdown += "\nRun `" + std::string(run_id) + "`\n";
  return t;
}

Tables matrix_tables(const LabeledMatrix& m, int decimals, std::string_view run_id) {
  Tables t;
  t.csv = "adapter";
  t.markdown = "| Adapter Cult. |";
  std::string rule = "|---|";
  for (const auto& l : m.labels) {
    t.csv += "," + csv_field(l);
    t.markdown += " " + md_cell(l) + " |";
    rule += "---:|";
  }
  t.csv += ",run_id\n";
  t.markdown += "\n" + rule + "\n";
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    t.csv += csv_field(m.labels[i]);
    t.markdown += "| " + md_cell(m.labels[i]) + " |";
    for (double v : m.values[i]) {
      t.csv += "," + format_fixed(v, decimals);
      t.markdown += " " + format_fixed(v, decimals) + " |";
    }
    t.csv += "," + csv_field(run_id) + "\n";
    t.markdown += "\n";
  }
  t.markdown += "\nRun `" + std::string(run_id) + "`\n";
  return t;
}

std::vector<double> contour_levels(const lens::KdeGrid& grid, int levels) {
  const double mx = grid.values.empty() ? 0.0 : *std::max_element(grid.values.begin(), grid.values.end());
  std::vector<double> out;
  for (int l = 1; l <= levels; ++l) out.push_back(mx * l / (levels + 1));
  return out;
}

std::vector<std::vector<bool>> level_masks(const lens::KdeGrid& grid, int levels) {
  std::vector<std::vector<bool>> masks;
  for (double level : contour_levels(grid, levels)) {
    std::vector<bool> mask(grid.values.size());
    for (std::size_t k = 0; k < grid.values.size(); ++k) mask[k] = grid.values[k] >= level;
    masks.push_back(std::move(mask));
  }
  return masks;
}

namespace {

struct Frame {
  lens::GridBounds b;
  double margin;
  double size;
  double px(double x) const { return margin + (x - b.x_min) / (b.x_max - b.x_min) * size; }
  double py(double y) const { return margin + size - (y - b.y_min) / (b.y_max - b.y_min) * size; }
};

// Marching-squares isoline through the cell-center lattice.
std::string isoline_path(const lens::KdeGrid& g, double level, const Frame& f) {
  const auto res = g.resolution;
  std::string d;
  auto point = [&](std::size_t ix0, std::size_t iy0, std::size_t ix1, std::size_t iy1) {
    const double v0 = g.at(ix0, iy0), v1 = g.at(ix1, iy1);
    const double t = v1 != v0 ? (level - v0) / (v1 - v0) : 0.5;
    const auto c0 = g.cell_center(ix0, iy0), c1 = g.cell_center(ix1, iy1);
    return std::pair{f.px(c0.x + t * (c1.x - c0.x)), f.py(c0.y + t * (c1.y - c0.y))};
  };
  auto segment = [&](std::pair<double, double> a, std::pair<double, double> b) {
    d += "M" + num(a.first) + " " + num(a.second) + "L" + num(b.first) + " " + num(b.second);
  };
  for (std::size_t iy = 0; iy + 1 < res; ++iy) {
    for (std::size_t ix = 0; ix + 1 < res; ++ix) {
      const double va = g.at(ix, iy), vb = g.at(ix + 1, iy), vc = g.at(ix + 1, iy + 1), vd = g.at(ix, iy + 1);
      const int code = (va >= level ? 1 : 0) | (vb >= level ? 2 : 0) | (vc >= level ? 4 : 0) | (vd >= level ? 8 : 0);
      if (code == 0 || code == 15) continue;
      auto bottom = [&] { return point(ix, iy, ix + 1, iy); };
      auto right = [&] { return point(ix + 1, iy, ix + 1, iy + 1); };
      auto top = [&] { return point(ix, iy + 1, ix + 1, iy + 1); };
      auto leftp = [&] { return point(ix, iy, ix, iy + 1); };
      const bool center_in = (va + vb + vc + vd) / 4.0 >= level;
      switch (code) {
        case 1: case 14: segment(leftp(), bottom()); break;
        case 2: case 13: segment(bottom(), right()); break;
        case 3: case 12: segment(leftp(), right()); break;
        case 4: case 11: segment(right(), top()); break;
        case 6: case 9: segment(bottom(), top()); break;
        case 7: case 8: segment(leftp(), top()); break;
        case 5:
          if (center_in) {
            segment(leftp(), top());
            segment(bottom(), right());
          } else {
            segment(leftp(), bottom());
            segment(right(), top());
          }
          break;
        case 10:
          if (center_in) {
            segment(leftp(), bottom());
            segment(right(), top());
          } else {
            segment(leftp(), top());
            segment(bottom(), right());
          }
          break;
        default: break;
      }
    }
  }
  return d;
}

}  // namespace

std::string kde_contour_svg(std::span<const lens::CultureDensity> grids, const ContourOptions& options) {
  if (grids.empty()) throw ValidationError("contour plot needs at least one density grid");
  const auto& ref = grids.front().grid;
  for (const auto& g : grids) {
    const auto& b = g.grid.bounds;
    if (g.grid.resolution != ref.resolution || b.x_min != ref.bounds.x_min || b.x_max != ref.bounds.x_max ||
        b.y_min != ref.bounds.y_min || b.y_max != ref.bounds.y_max) {
      throw ValidationError("density grid for " + g.culture + " does not share bounds and resolution");
    }
    if (g.grid.values.size() != g.grid.resolution * g.grid.resolution) {
      throw ValidationError("density grid for " + g.culture + " has the wrong number of values");
    }
  }
  const Frame frame{ref.bounds, 40.0, options.size};
  const double legend_x = frame.margin * 2 + options.size;
  const double width = legend_x + 120.0;
  const double height = frame.margin * 2 + options.size;
  const double cw = options.size / static_cast<double>(ref.resolution);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\" data-run-id=\""
      << xml_escape(options.run_id) << "\">\n";
  svg << "<desc>run_id: " << xml_escape(options.run_id) << "; projection: " << lens::kProjectionMethod
      << "</desc>\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  svg << "<text x=\"" << num(frame.margin) << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">"
      << xml_escape(options.title) << "</text>\n";
  svg << "<rect x=\"" << num(frame.margin) << "\" y=\"" << num(frame.margin) << "\" width=\"" << num(options.size)
      << "\" height=\"" << num(options.size) << "\" fill=\"none\" stroke=\"#999999\"/>\n";

  for (std::size_t c = 0; c < grids.size(); ++c) {
    const auto& g = grids[c].grid;
    const char* color = kPalette[c % kPalette.size()];
    svg << "<g class=\"culture\" data-culture=\"" << xml_escape(grids[c].culture) << "\">\n";
    const auto levels = contour_levels(g, options.levels);
    const auto masks = level_masks(g, options.levels);
    for (std::size_t l = 0; l < levels.size(); ++l) {
      svg << "<g class=\"level\" data-level=\"" << (l + 1) << "\" fill=\"" << color
          << "\" fill-opacity=\"0.12\" stroke=\"none\">\n";
      for (std::size_t iy = 0; iy < g.resolution; ++iy) {
        std::size_t ix = 0;
        while (ix < g.resolution) {
          if (!masks[l][iy * g.resolution + ix]) {
            ++ix;
            continue;
          }
          const auto start = ix;
          while (ix < g.resolution && masks[l][iy * g.resolution + ix]) ++ix;
          const double x = frame.margin + cw * static_cast<double>(start);
          const double y = frame.margin + options.size - cw * static_cast<double>(iy + 1);
          svg << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\""
              << num(cw * static_cast<double>(ix - start)) << "\" height=\"" << num(cw) << "\"/>\n";
        }
      }
      svg << "</g>\n";
      const auto path = isoline_path(g, levels[l], frame);
      if (!path.empty()) {
        svg << "<path class=\"isoline\" data-level=\"" << (l + 1) << "\" d=\"" << path << "\" fill=\"none\" stroke=\""
            << color << "\" stroke-width=\"1\"/>\n";
      }
    }
    svg << "</g>\n";
    const double ly = frame.margin + 18.0 * static_cast<double>(c);
    svg << "<rect class=\"legend\" x=\"" << num(legend_x) << "\" y=\"" << num(ly) << "\" width=\"12\" height=\"12\""
        << " fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << num(legend_x + 18) << "\" y=\"" << num(ly + 10)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(grids[c].culture) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

nlohmann::json to_json(const RunManifest& m) {
  return {{"run_id", m.run_id},
          {"timestamp", m.timestamp},
          {"subcommand", m.subcommand},
          {"config_digest", m.config_digest},
          {"module_versions", m.module_versions},
          {"input_digests", m.input_digests},
          {"decode", prompt::to_json(m.decode)},
          {"decode_overridden", m.decode_overridden},
          {"mode", {{"strict", m.strict}, {"scoring", m.scoring_mode}}},
          {"artifacts", m.artifacts}};
}

}  // namespace ceval::report
