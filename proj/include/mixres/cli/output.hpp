#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mixres::cli {

/// Shortest representation that round-trips a double (up to 17 significant
/// digits); stable across reruns, so CSV outputs are byte-reproducible.
std::string format_double(double v);

class CsvWriter {
public:
  /// First line references the run manifest; second line is the header.
  CsvWriter(const std::filesystem::path& path,
            const std::string& manifest_name,
            const std::vector<std::string>& columns);

  void row(const std::vector<std::string>& cells);

  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::uint64_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }

private:
  std::ofstream out_;
  std::size_t columns_ = 0;
};

struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::string version;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> dataset_hashes;
  std::string started_at;
  std::string finished_at;
  std::vector<std::string> outputs;
};

std::string iso_timestamp_now();

/// Writes manifest.json atomically (temp file + rename).
void write_manifest(const RunManifest& m, const std::filesystem::path& dir);

// --- Minimal SVG plotting; CSVs are the contract, these are diagnostics. ---

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> yerr;  // optional, half-width of error bars
};

void write_line_chart(const std::filesystem::path& path,
                      const std::string& title, const std::string& xlabel,
                      const std::string& ylabel,
                      const std::vector<Series>& series,
                      std::optional<double> hline = {});

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  double radius = 2.0;
  std::string color;
};

void write_scatter_chart(const std::filesystem::path& path,
                         const std::string& title,
                         const std::vector<ScatterPoint>& points,
                         std::optional<std::pair<double, double>> line_wb = {});

/// 10 x 10 storage grid: red cells, then yellow, remainder grey.
void write_grid_chart(const std::filesystem::path& path,
                      const std::string& title, int red_cells,
                      int yellow_cells);

}  // namespace mixres::cli
