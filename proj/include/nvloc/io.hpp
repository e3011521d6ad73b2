#ifndef NVLOC_IO_HPP
#define NVLOC_IO_HPP

// CSV tables, config hashing and a minimal SVG writer.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nvloc/errors.hpp"

namespace nvloc::io {

/// Shortest round-trippable decimal for a double; fixed across runs.
inline std::string fmt(double v) {
  if (!std::isfinite(v)) return v != v ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[40];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) fail(ErrorKind::io, "write to '" + path.string() + "' failed");
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    fail(ErrorKind::io, "cannot create output directory '" + dir.string() + "'" + (ec ? ": " + ec.message() : ""));
}

/// Numeric CSV with a header row.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  bool has(const std::string& name) const {
    return std::find(columns.begin(), columns.end(), name) != columns.end();
  }
  std::vector<double> column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) fail(ErrorKind::parse, "missing column '" + name + "'");
    const auto k = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[k]);
    return out;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace detail

/// Parses a CSV whose header must start with `required` (extra columns
/// allowed). Errors name the file and the 1-based line.
inline Table parse_csv(const std::string& text, const std::string& source, const std::vector<std::string>& required) {
  Table t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto where = [&] { return source + ":" + std::to_string(lineno) + ": "; };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line[line.find_first_not_of(" \t")] == '#') continue;
    auto cells = detail::split_csv_line(line);
    if (t.columns.empty()) {
      t.columns = cells;
      for (const auto& r : required)
        if (!t.has(r)) {
          std::string want;
          for (const auto& w : required) want += (want.empty() ? "" : ",") + w;
          fail(ErrorKind::parse, where() + "bad header '" + line + "', expected columns " + want);
        }
      continue;
    }
    if (cells.size() != t.columns.size())
      fail(ErrorKind::parse, where() + "expected " + std::to_string(t.columns.size()) + " fields, found " +
                                 std::to_string(cells.size()));
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size() || !std::isfinite(v))
        fail(ErrorKind::parse, where() + "not a finite number: '" + c + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) fail(ErrorKind::parse, source + ":1: empty file, expected a header");
  return t;
}

inline Table read_csv(const std::filesystem::path& path, const std::vector<std::string>& required) {
  return parse_csv(read_text(path), path.string(), required);
}

inline std::string to_csv(const Table& t) {
  std::ostringstream out;
  for (std::size_t k = 0; k < t.columns.size(); ++k) out << (k ? "," : "") << t.columns[k];
  out << "\n";
  for (const auto& r : t.rows) {
    for (std::size_t k = 0; k < r.size(); ++k) out << (k ? "," : "") << fmt(r[k]);
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

/// Plot-space to pixel mapping for a rectangular panel.
struct Frame {
  double x0, x1, y0, y1;          // data ranges
  double left, top, width, height;  // pixels
  double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
  // Larger y is drawn higher.
  double py(double y) const { return top + (y1 - y) / (y1 - y0) * height; }
};

/// Perceptually ordered dark-blue to yellow ramp, t in [0, 1].
inline std::string ramp_color(double t) {
  static const std::array<std::array<double, 3>, 5> stops{{
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * 4;
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(t), 3);
  const double f = t - static_cast<double>(k);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(stops[k][0] + f * (stops[k + 1][0] - stops[k][0]))),
                static_cast<int>(std::lround(stops[k][1] + f * (stops[k + 1][1] - stops[k][1]))),
                static_cast<int>(std::lround(stops[k][2] + f * (stops[k + 1][2] - stops[k][2]))));
  return buf;
}

class Svg {
 public:
  Svg(double width, double height) : width_(width), height_(height) {}

  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& extra = "") {
    body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
          << "\" fill=\"" << fill << "\"" << (extra.empty() ? "" : " " + extra) << "/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1,
            const std::string& extra = "") {
    body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
          << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\""
          << (extra.empty() ? "" : " " + extra) << "/>\n";
  }
  void polyline(const std::vector<std::array<double, 2>>& pts, const std::string& stroke, double width = 1,
                const std::string& extra = "") {
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\""
          << (extra.empty() ? "" : " " + extra) << " points=\"";
    for (std::size_t k = 0; k < pts.size(); ++k) body_ << (k ? " " : "") << num(pts[k][0]) << "," << num(pts[k][1]);
    body_ << "\"/>\n";
  }
  void circle(double x, double y, double r, const std::string& fill, const std::string& extra = "") {
    body_ << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"" << num(r) << "\" fill=\"" << fill << "\""
          << (extra.empty() ? "" : " " + extra) << "/>\n";
  }
  void text(double x, double y, const std::string& s, const std::string& extra = "") {
    body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-family=\"sans-serif\" font-size=\"12\""
          << (extra.empty() ? "" : " " + extra) << ">" << escape(s) << "</text>\n";
  }
  void comment(const std::string& s) { body_ << "<!-- " << escape(s) << " -->\n"; }

  std::string str() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_) << "\" height=\"" << num(height_)
        << "\" viewBox=\"0 0 " << num(width_) << " " << num(height_) << "\">\n"
        << body_.str() << "</svg>\n";
    return out.str();
  }

  /// Axes box with min/max tick labels.
  void axes(const Frame& f, const std::string& xlabel, const std::string& ylabel) {
    rect(f.left, f.top, f.width, f.height, "none", "stroke=\"black\"");
    text(f.left, f.top + f.height + 16, fmt_short(f.x0), "text-anchor=\"middle\"");
    text(f.left + f.width, f.top + f.height + 16, fmt_short(f.x1), "text-anchor=\"middle\"");
    text(f.left - 4, f.top + f.height, fmt_short(f.y0), "text-anchor=\"end\"");
    text(f.left - 4, f.top + 10, fmt_short(f.y1), "text-anchor=\"end\"");
    text(f.left + f.width / 2, f.top + f.height + 32, xlabel, "text-anchor=\"middle\"");
    text(f.left - 40, f.top + f.height / 2, ylabel, "text-anchor=\"middle\"");
  }

 private:
  static std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
  }
  static std::string fmt_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
  }
  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '<') out += "&lt;";
      else if (c == '>') out += "&gt;";
      else if (c == '&') out += "&amp;";
      else if (c == '"') out += "&quot;";
      else out += c;
    }
    return out;
  }

  double width_, height_;
  std::ostringstream body_;
};

}  // namespace nvloc::io

#endif  // NVLOC_IO_HPP
