#include "crorl/plot.hpp"

#include "crorl/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace crorl {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 420;
constexpr double kLeft = 70;
constexpr double kRight = 150;
constexpr double kTop = 30;
constexpr double kBottom = 50;
constexpr double kFloor = 1e-6;  // zero suboptimality on a log axis

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct Stat {
  double sum = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  int count = 0;
  void add(double v) {
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    ++count;
  }
  double mean() const { return sum / count; }
};

using Series = std::map<std::string, std::map<double, Stat>>;

double to_double(const std::string& s, const std::string& col, std::size_t row) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(fmt::format("row {}: column {} is not numeric: \"{}\"", row + 2, col, s));
  }
}

std::string svg_plot(const Series& series, const std::string& title, const std::string& xlabel) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  std::set<double> xs;
  for (const auto& [alg, pts] : series)
    for (const auto& [x, st] : pts) {
      xs.insert(x);
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, std::max(st.lo, kFloor));
      ymax = std::max(ymax, std::max(st.hi, kFloor));
    }
  double lx0 = std::log10(xmin), lx1 = std::log10(xmax);
  if (lx1 - lx0 < 1e-9) {
    lx0 -= 0.5;
    lx1 += 0.5;
  }
  double ly0 = std::floor(std::log10(ymin)), ly1 = std::ceil(std::log10(ymax));
  if (ly1 - ly0 < 1) ly1 = ly0 + 1;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (std::log10(x) - lx0) / (lx1 - lx0) * pw; };
  auto py = [&](double y) { return kTop + ph - (std::log10(std::max(y, kFloor)) - ly0) / (ly1 - ly0) * ph; };

  std::string out;
  auto w = std::back_inserter(out);
  fmt::format_to(w,
                 "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
                 "font-size=\"11\">\n",
                 kWidth, kHeight);
  fmt::format_to(w, "<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", kWidth, kHeight);
  fmt::format_to(w, "<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n", kLeft + pw / 2,
                 title);
  fmt::format_to(w, "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", kLeft,
                 kTop, pw, ph);
  for (double x : xs) {
    const double X = px(x);
    fmt::format_to(w, "<line x1=\"{0:.2f}\" y1=\"{1}\" x2=\"{0:.2f}\" y2=\"{2}\" stroke=\"black\"/>\n", X, kTop + ph,
                   kTop + ph + 4);
    fmt::format_to(w, "<text class=\"xtick\" x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{:g}</text>\n", X,
                   kTop + ph + 16, x);
  }
  for (int e = static_cast<int>(ly0); e <= static_cast<int>(ly1); ++e) {
    const double Y = py(std::pow(10.0, e));
    fmt::format_to(w, "<line x1=\"{0}\" y1=\"{1:.2f}\" x2=\"{2}\" y2=\"{1:.2f}\" stroke=\"#ddd\"/>\n", kLeft, Y,
                   kLeft + pw);
    fmt::format_to(w, "<text class=\"ytick\" x=\"{}\" y=\"{:.2f}\" text-anchor=\"end\">1e{}</text>\n", kLeft - 6,
                   Y + 4, e);
  }
  fmt::format_to(w, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2, kHeight - 12,
                 xlabel);
  fmt::format_to(w,
                 "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">"
                 "suboptimality</text>\n",
                 kTop + ph / 2);

  int k = 0;
  for (const auto& [alg, pts] : series) {
    const char* color = kColors[k % std::size(kColors)];
    std::string band, line;
    for (const auto& [x, st] : pts) band += fmt::format("{:.2f},{:.2f} ", px(x), py(st.hi));
    for (auto it = pts.rbegin(); it != pts.rend(); ++it)
      band += fmt::format("{:.2f},{:.2f} ", px(it->first), py(it->second.lo));
    for (const auto& [x, st] : pts) line += fmt::format("{:.2f},{:.2f} ", px(x), py(st.mean()));
    band.pop_back();
    line.pop_back();
    fmt::format_to(w, "<polygon class=\"band\" points=\"{}\" fill=\"{}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n",
                   band, color);
    fmt::format_to(w,
                   "<polyline class=\"series\" data-algorithm=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{}\" "
                   "stroke-width=\"2\"/>\n",
                   alg, line, color);
    const double ly = kTop + 12 + 18 * k;
    fmt::format_to(w,
                   "<g class=\"legend-entry\"><line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" "
                   "stroke-width=\"2\"/><text x=\"{4}\" y=\"{5}\">{6}</text></g>\n",
                   kLeft + pw + 12, ly, kLeft + pw + 32, color, kLeft + pw + 38, ly + 4, alg);
    ++k;
  }
  out += "</svg>\n";
  return out;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw std::runtime_error(fmt::format("CSV is missing column \"{}\"", name));
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::stringstream ss(text);
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> out;
    std::stringstream ls(l);
    std::string cell;
    while (std::getline(ls, cell, ',')) out.push_back(cell);
    if (!l.empty() && l.back() == ',') out.emplace_back();
    return out;
  };
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (t.header.empty()) {
      t.header = split(line);
      continue;
    }
    auto row = split(line);
    if (row.size() != t.header.size())
      throw std::runtime_error(
          fmt::format("CSV row {}: expected {} fields, got {}", t.rows.size() + 2, t.header.size(), row.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<std::string> emit_plots(const std::string& csv_path, const std::string& out_dir) {
  const CsvTable t = parse_csv(read_file(csv_path));
  if (t.rows.empty()) throw std::runtime_error(fmt::format("{}: no data rows", csv_path));
  const auto c_alg = t.column("algorithm");
  const auto c_n = t.column("n");
  const auto c_sub = t.column("suboptimality");
  const auto c_zeta = t.column("zeta_approx");

  Series by_n, by_zeta;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const double n = to_double(r[c_n], "n", i);
    const double sub = to_double(r[c_sub], "suboptimality", i);
    const double zeta = to_double(r[c_zeta], "zeta_approx", i);
    if (n > 0) by_n[r[c_alg]][n].add(sub);
    if (zeta > 0) by_zeta[r[c_alg]][zeta].add(sub);
  }
  std::vector<std::string> written;
  const auto dir = std::filesystem::path(out_dir);
  if (!by_n.empty()) {
    const auto p = (dir / "subopt_vs_n.svg").string();
    write_file(p, svg_plot(by_n, "suboptimality vs n", "n (episodes)"));
    written.push_back(p);
  }
  if (!by_zeta.empty()) {
    const auto p = (dir / "subopt_vs_zeta.svg").string();
    write_file(p, svg_plot(by_zeta, "suboptimality vs corruption level", "zeta (approx)"));
    written.push_back(p);
  }
  return written;
}

}  // namespace crorl
