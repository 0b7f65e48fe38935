#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "railvo/error.hpp"
#include "railvo/railcli.hpp"

namespace railvo::railcli {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 80, kRight = 180, kTop = 30, kBottom = 60;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                   "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (hi - lo < 1e-12) {
      const double d = std::max(1.0, std::abs(lo) * 0.1);
      lo -= d;
      hi += d;
    }
  }
};

}  // namespace

PlotKind parse_plot_kind(const std::string& s) {
  if (s == "velocity") return PlotKind::Velocity;
  if (s == "trajectory") return PlotKind::Trajectory;
  if (s == "drift") return PlotKind::Drift;
  throw Error(ErrorCode::InvalidArgument, "unknown plot kind '" + s + "'");
}

std::string emit_plot(const std::vector<Series>& series, PlotKind kind) {
  if (series.empty()) throw Error(ErrorCode::EmptySeries, "nothing to plot");
  Range rx, ry;
  for (const auto& s : series) {
    if (s.x.empty() || s.x.size() != s.y.size())
      throw Error(ErrorCode::EmptySeries, "series '" + s.label + "' is empty or ragged");
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k]))
        throw Error(ErrorCode::InvalidArgument, "series '" + s.label + "' has non-finite values");
      rx.add(s.x[k]);
      ry.add(s.y[k]);
    }
  }
  rx.pad();
  ry.pad();

  const char* title = "";
  const char* xlabel = "";
  const char* ylabel = "";
  switch (kind) {
    case PlotKind::Velocity:
      title = "Velocity";
      xlabel = "time [s]";
      ylabel = "velocity [m/s]";
      break;
    case PlotKind::Trajectory:
      title = "Trajectory";
      xlabel = "x [m]";
      ylabel = "y [m]";
      break;
    case PlotKind::Drift:
      title = "Position drift";
      xlabel = "distance travelled [m]";
      ylabel = "position error [m]";
      break;
  }

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto X = [&](double v) { return kLeft + (v - rx.lo) / (rx.hi - rx.lo) * pw; };
  auto Y = [&](double v) { return kTop + ph - (v - ry.lo) / (ry.hi - ry.lo) * ph; };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
         num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
         title + "</text>\n";

  svg += "<g stroke=\"black\" stroke-width=\"1\">\n";
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(kLeft + pw) +
         "\" y2=\"" + num(kTop + ph) + "\"/>\n";
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
         num(kTop + ph) + "\"/>\n";
  svg += "</g>\n";
  svg += "<g font-size=\"11\">\n";
  constexpr int kTicks = 5;
  for (int k = 0; k <= kTicks; ++k) {
    const double vx = rx.lo + (rx.hi - rx.lo) * k / kTicks;
    const double vy = ry.lo + (ry.hi - ry.lo) * k / kTicks;
    svg += "<line x1=\"" + num(X(vx)) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(X(vx)) +
           "\" y2=\"" + num(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + num(X(vx)) + "\" y=\"" + num(kTop + ph + 18) +
           "\" text-anchor=\"middle\">" + tick(vx) + "</text>\n";
    svg += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(Y(vy)) + "\" x2=\"" + num(kLeft) +
           "\" y2=\"" + num(Y(vy)) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(Y(vy) + 4) + "\" text-anchor=\"end\">" +
           tick(vy) + "</text>\n";
  }
  svg += "</g>\n";
  svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 15) +
         "\" text-anchor=\"middle\" font-size=\"12\">" + escape(xlabel) + "</text>\n";
  svg += "<text x=\"18\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" font-size=\"12\" " +
         "transform=\"rotate(-90 18 " + num(kTop + ph / 2) + ")\">" + escape(ylabel) + "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kColors[i % std::size(kColors)];
    if (s.x.size() == 1) {
      svg += "<circle cx=\"" + num(X(s.x[0])) + "\" cy=\"" + num(Y(s.y[0])) + "\" r=\"3\" fill=\"" +
             color + "\"/>\n";
      continue;
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (k) svg += " ";
      svg += num(X(s.x[k])) + "," + num(Y(s.y[k]));
    }
    svg += "\"/>\n";
  }

  svg += "<g font-size=\"11\">\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double ly = kTop + 10 + 18.0 * static_cast<double>(i);
    const double lx = kLeft + pw + 15;
    svg += "<rect x=\"" + num(lx) + "\" y=\"" + num(ly - 5) + "\" width=\"16\" height=\"4\" fill=\"" +
           kColors[i % std::size(kColors)] + "\"/>\n";
    svg += "<text x=\"" + num(lx + 22) + "\" y=\"" + num(ly) + "\">" + escape(series[i].label) +
           "</text>\n";
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

std::vector<Series> series_from_csv(const CsvTable& table, PlotKind kind) {
  std::vector<Series> out;
  auto add = [&](const std::string& xcol, const std::string& ycol, const std::string& label) {
    if (table.has_column(xcol) && table.has_column(ycol))
      out.push_back({label, table.values(xcol), table.values(ycol)});
  };
  switch (kind) {
    case PlotKind::Velocity: {
      const std::string xcol = table.has_column("t") ? "t" : "frame_idx";
      for (const char* y : {"v", "v_l", "v_pixel", "v_subpixel"}) add(xcol, y, y);
      break;
    }
    case PlotKind::Trajectory:
      add("x_g", "y_g", "estimate");
      add("x", "y", "ground truth");
      break;
    case PlotKind::Drift:
      add("distance_m", "error_m", "position error");
      break;
  }
  if (out.empty()) throw Error(ErrorCode::EmptySeries, "CSV has no columns for this plot kind");
  return out;
}

}  // namespace railvo::railcli
