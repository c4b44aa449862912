#include "mixres/cli/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <stdexcept>

namespace mixres::cli {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  // Shortest form that parses back exactly.
  for (int precision : {15, 16, 17}) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     const std::string& manifest_name,
                     const std::vector<std::string>& columns)
    : out_(path, std::ios::trunc), columns_(columns.size()) {
  if (!out_) throw std::runtime_error("cannot open for writing: " + path.string());
  out_ << "# manifest: " << manifest_name << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out_ << columns[i] << (i + 1 < columns.size() ? "," : "\n");
  }
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) {
    throw std::logic_error("csv row width mismatch");
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out_ << cells[i] << (i + 1 < cells.size() ? "," : "\n");
  }
}

std::string iso_timestamp_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void write_manifest(const RunManifest& m, const std::filesystem::path& dir) {
  nlohmann::json j;
  j["command"] = m.command;
  j["config"] = m.config;
  j["version"] = m.version;
  j["seeds"] = m.seeds;
  j["dataset_hashes"] = m.dataset_hashes;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  j["outputs"] = m.outputs;

  std::filesystem::path tmp = dir / "manifest.json.tmp";
  std::filesystem::path final_path = dir / "manifest.json";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest: " + tmp.string());
    out << j.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, final_path);
}

// ---------------------------------------------------------------------------
// SVG helpers
// ---------------------------------------------------------------------------

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 50.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Range {
  double lo = 0.0, hi = 1.0;

  double map(double v, double pixel_lo, double pixel_hi) const {
    double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
    return pixel_lo + t * (pixel_hi - pixel_lo);
  }
};

Range expand(Range r) {
  if (r.hi <= r.lo) {
    r.lo -= 0.5;
    r.hi += 0.5;
  }
  double pad = 0.06 * (r.hi - r.lo);
  return {r.lo - pad, r.hi + pad};
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf"};

}  // namespace

void write_line_chart(const std::filesystem::path& path,
                      const std::string& title, const std::string& xlabel,
                      const std::string& ylabel,
                      const std::vector<Series>& series,
                      std::optional<double> hline) {
  Range xr{1e300, -1e300}, yr{1e300, -1e300};
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xr.lo = std::min(xr.lo, s.x[i]);
      xr.hi = std::max(xr.hi, s.x[i]);
      double err = i < s.yerr.size() ? s.yerr[i] : 0.0;
      yr.lo = std::min(yr.lo, s.y[i] - err);
      yr.hi = std::max(yr.hi, s.y[i] + err);
    }
  }
  if (hline) {
    yr.lo = std::min(yr.lo, *hline);
    yr.hi = std::max(yr.hi, *hline);
  }
  xr = expand(xr);
  yr = expand(yr);

  auto px = [&](double v) { return xr.map(v, kMarginLeft, kWidth - kMarginRight); };
  auto py = [&](double v) { return yr.map(v, kHeight - kMarginBottom, kMarginTop); };

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-size=\"14\">" << title << "</text>\n";

  // Axes.
  out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kHeight - kMarginBottom
      << "\" x2=\"" << kWidth - kMarginRight << "\" y2=\""
      << kHeight - kMarginBottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\""
      << kMarginLeft << "\" y2=\"" << kHeight - kMarginBottom
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double xv = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    double yv = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    out << "<text x=\"" << px(xv) << "\" y=\"" << kHeight - kMarginBottom + 16
        << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(xv) << "</text>\n";
    out << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << py(yv) + 3
        << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(yv) << "</text>\n";
  }
  out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << "</text>\n";
  out << "<text x=\"16\" y=\"" << kHeight / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << kHeight / 2 << ")\">" << ylabel << "</text>\n";

  if (hline) {
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << py(*hline) << "\" x2=\""
        << kWidth - kMarginRight << "\" y2=\"" << py(*hline)
        << "\" stroke=\"black\" stroke-dasharray=\"5,4\"/>\n";
  }

  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    std::string color = s.color.empty() ? kPalette[si % 7] : s.color;
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out << fmt(px(s.x[i])) << "," << fmt(py(s.y[i])) << " ";
    }
    out << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i]))
          << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
      if (i < s.yerr.size() && s.yerr[i] > 0.0) {
        out << "<line x1=\"" << fmt(px(s.x[i])) << "\" y1=\""
            << fmt(py(s.y[i] - s.yerr[i])) << "\" x2=\"" << fmt(px(s.x[i]))
            << "\" y2=\"" << fmt(py(s.y[i] + s.yerr[i])) << "\" stroke=\""
            << color << "\"/>\n";
      }
    }
    double ly = kMarginTop + 14.0 * static_cast<double>(si);
    out << "<rect x=\"" << kWidth - kMarginRight - 150 << "\" y=\"" << ly - 8
        << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << kWidth - kMarginRight - 136 << "\" y=\"" << ly
        << "\" font-size=\"10\">" << s.label << "</text>\n";
  }
  out << "</svg>\n";
}

void write_scatter_chart(const std::filesystem::path& path,
                         const std::string& title,
                         const std::vector<ScatterPoint>& points,
                         std::optional<std::pair<double, double>> line_wb) {
  Range xr{1e300, -1e300}, yr{1e300, -1e300};
  for (const auto& p : points) {
    xr.lo = std::min(xr.lo, p.x);
    xr.hi = std::max(xr.hi, p.x);
    yr.lo = std::min(yr.lo, p.y);
    yr.hi = std::max(yr.hi, p.y);
  }
  xr = expand(xr);
  yr = expand(yr);
  auto px = [&](double v) { return xr.map(v, kMarginLeft, kWidth - kMarginRight); };
  auto py = [&](double v) { return yr.map(v, kHeight - kMarginBottom, kMarginTop); };

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-size=\"14\">" << title << "</text>\n";
  for (const auto& p : points) {
    out << "<circle cx=\"" << fmt(px(p.x)) << "\" cy=\"" << fmt(py(p.y))
        << "\" r=\"" << fmt(p.radius) << "\" fill=\"" << p.color
        << "\" fill-opacity=\"0.6\"/>\n";
  }
  if (line_wb) {
    // Decision line w . x + b = 0 in data coordinates (w_x, w_y encoded as
    // slope/intercept by the caller: y = first * x + second).
    double x0 = xr.lo, x1 = xr.hi;
    double y0 = line_wb->first * x0 + line_wb->second;
    double y1 = line_wb->first * x1 + line_wb->second;
    out << "<line x1=\"" << fmt(px(x0)) << "\" y1=\"" << fmt(py(y0)) << "\" x2=\""
        << fmt(px(x1)) << "\" y2=\"" << fmt(py(y1)) << "\" stroke=\"black\"/>\n";
  }
  out << "</svg>\n";
}

void write_grid_chart(const std::filesystem::path& path,
                      const std::string& title, int red_cells,
                      int yellow_cells) {
  const double cell = 28.0;
  const double pad = 3.0;
  const double origin_x = 40.0;
  const double origin_y = 60.0;
  const double size = 10 * cell + 80.0;

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size
      << "\" height=\"" << size << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << size / 2 << "\" y=\"30\" text-anchor=\"middle\" "
      << "font-size=\"14\">" << title << "</text>\n";
  for (int i = 0; i < 100; ++i) {
    // Fill bottom-left upward, row by row.
    int row = i / 10;
    int col = i % 10;
    double x = origin_x + col * cell;
    double y = origin_y + (9 - row) * cell;
    const char* color = i < red_cells               ? "#d62728"
                        : i < red_cells + yellow_cells ? "#ffcc00"
                                                       : "#d9d9d9";
    out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell - pad
        << "\" height=\"" << cell - pad << "\" fill=\"" << color << "\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace mixres::cli
