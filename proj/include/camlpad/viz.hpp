#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "camlpad/detectors/pca.hpp"
#include "camlpad/error.hpp"
#include "camlpad/gauge.hpp"
#include "camlpad/matrix.hpp"

namespace camlpad {

struct HeatmapPoint {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;  // [0, 1], lighter when higher
  bool is_current = false;

  friend bool operator==(const HeatmapPoint&, const HeatmapPoint&) = default;
};

struct PlotSpec {
  int width = 600;
  int height = 600;
  int margin = 40;
  double history_radius = 3.0;
  double current_radius = 8.0;
  std::string background = "#111111";
  std::string title;
};

inline std::vector<HeatmapPoint> build_heatmap_points(const PcaModel& pca, const Matrix& history,
                                                      const Matrix& current,
                                                      std::span<const double> history_scores,
                                                      std::span<const double> current_scores) {
  if (history_scores.size() != history.rows() || current_scores.size() != current.rows()) {
    throw Error(ErrorCode::MisalignedScores, "score vectors do not match matrix rows");
  }
  std::vector<HeatmapPoint> points;
  points.reserve(history.rows() + current.rows());
  auto add = [&](const Matrix& m, std::span<const double> scores, bool is_current) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto [x, y] = project_pca(pca, m.row(r));
      points.push_back({x, y, std::clamp(scores[r], 0.0, 1.0), is_current});
    }
  };
  add(history, history_scores, false);
  add(current, current_scores, true);
  return points;
}

// Grayscale luminance 25% + 70% * score.
inline std::string heat_fill(double score) {
  const double level = 0.25 + 0.70 * std::clamp(score, 0.0, 1.0);
  const int v = static_cast<int>(std::lround(level * 255.0));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", v, v, v);
  return buf;
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string render_svg(std::span<const HeatmapPoint> points, const PlotSpec& spec = {}) {
  if (spec.history_radius <= 0 || spec.current_radius <= spec.history_radius) {
    throw Error(ErrorCode::InvalidArgument, "need 0 < history_radius < current_radius");
  }
  char buf[256];
  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"%d\" height=\"%d\" "
                "viewBox=\"0 0 %d %d\">\n",
                spec.width, spec.height, spec.width, spec.height);
  svg += buf;
  std::snprintf(buf, sizeof buf, "<rect x=\"0\" y=\"0\" width=\"%d\" height=\"%d\" fill=\"%s\"/>\n", spec.width,
                spec.height, spec.background.c_str());
  svg += buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"%d\" y=\"%d\" fill=\"#dddddd\" font-family=\"sans-serif\" font-size=\"14\" "
                "text-anchor=\"middle\">",
                spec.width / 2, std::max(14, spec.margin / 2 + 5));
  svg += buf;
  svg += xml_escape(spec.title);
  svg += "</text>\n";

  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  if (!points.empty()) {
    xmin = xmax = points[0].x;
    ymin = ymax = points[0].y;
    for (const auto& p : points) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
  }
  const double inner_w = spec.width - 2.0 * spec.margin;
  const double inner_h = spec.height - 2.0 * spec.margin;
  auto map_x = [&](double x) {
    return xmax > xmin ? spec.margin + (x - xmin) / (xmax - xmin) * inner_w : spec.width / 2.0;
  };
  // SVG y grows downward; flip so larger PCA y sits higher.
  auto map_y = [&](double y) {
    return ymax > ymin ? spec.height - spec.margin - (y - ymin) / (ymax - ymin) * inner_h : spec.height / 2.0;
  };

  for (bool current : {false, true}) {
    svg += current ? "<g id=\"current\">\n" : "<g id=\"history\">\n";
    for (const auto& p : points) {
      if (p.is_current != current) continue;
      std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%g\" fill=\"%s\"/>\n", map_x(p.x),
                    map_y(p.y), current ? spec.current_radius : spec.history_radius, heat_fill(p.score).c_str());
      svg += buf;
    }
    svg += "</g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

inline std::string heatmap_file_name(std::string_view source, std::string_view model, std::string_view window_id) {
  return std::string(source) + "_" + std::string(model) + "_" + safe_file_stem(window_id) + ".svg";
}

inline std::string export_gauge_json(const GaugeReading& reading, double threshold = kDefaultAlertPercentile,
                                     TimestampMs fired_at = 0) {
  return gauge_to_json(reading, threshold, fired_at).dump() + "\n";
}

}  // namespace camlpad
