// Copyright 2026 The NASCTY Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "nascty/util.hpp"

namespace nascty::cli {

namespace {

struct Csv {
  fs::path path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw DataError(path.string() + ": missing column '" + name + "'");
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Csv read_csv(const fs::path& path, const std::vector<std::string>& required) {
  Csv csv;
  csv.path = path;
  std::istringstream is(read_file(path));
  std::string line;
  if (!std::getline(is, line) || line.empty()) throw DataError(path.string() + ": empty file");
  csv.header = split(line);
  for (const auto& name : required) csv.column(name);
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != csv.header.size())
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(csv.header.size()) + " fields, found " +
                      std::to_string(cells.size()));
    csv.rows.push_back(std::move(cells));
  }
  return csv;
}

double parse_number(const Csv& csv, std::size_t row, std::size_t col) {
  const std::string& s = csv.rows[row][col];
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0')
    throw DataError(csv.path.string() + ":" + std::to_string(row + 2) + ": '" + s +
                    "' in column " + csv.header[col] + " is not a number");
  return v;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string tick(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Series {
  std::string name;
  std::string color;
  std::size_t x_col, y_col;
};

// Line plot whose points carry the CSV text of their row in data-x/data-y.
// Rows with a non-finite y value are left out.
std::string render_svg(const Csv& csv, const std::vector<Series>& series, const std::string& title,
                       const std::string& x_label, const std::string& y_label) {
  constexpr double W = 720, H = 420, L = 70, R = 20, T = 40, B = 60;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
      const double x = parse_number(csv, i, s.x_col), y = parse_number(csv, i, s.y_col);
      if (!std::isfinite(y) || !std::isfinite(x)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 1, x1 += 1;
  if (y1 == y0) y0 -= 1, y1 += 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << " " << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<title>" << title << "</title>\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title
     << "</text>\n";
  os << "<g class=\"axes\" stroke=\"black\">\n"
     << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\"/>\n"
     << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\"/>\n"
     << "</g>\n";
  os << "<g class=\"ticks\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    os << "<text x=\"" << fixed(px(xv)) << "\" y=\"" << H - B + 18
       << "\" text-anchor=\"middle\">" << tick(xv) << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << fixed(py(yv) + 4)
       << "\" text-anchor=\"end\">" << tick(yv) << "</text>\n";
  }
  os << "</g>\n";
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">"
     << x_label << "</text>\n";
  os << "<text transform=\"translate(18," << (T + H - B) / 2
     << ") rotate(-90)\" text-anchor=\"middle\">" << y_label << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    std::ostringstream line, points;
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
      const double x = parse_number(csv, i, s.x_col), y = parse_number(csv, i, s.y_col);
      if (!std::isfinite(y) || !std::isfinite(x)) continue;
      line << (line.tellp() > 0 ? " " : "") << fixed(px(x)) << "," << fixed(py(y));
      points << "<circle cx=\"" << fixed(px(x)) << "\" cy=\"" << fixed(py(y))
             << "\" r=\"2.5\" data-x=\"" << csv.rows[i][s.x_col] << "\" data-y=\""
             << csv.rows[i][s.y_col] << "\"/>\n";
    }
    os << "<g class=\"series\" data-series=\"" << s.name << "\" stroke=\"" << s.color
       << "\" fill=\"" << s.color << "\">\n";
    os << "<polyline fill=\"none\" stroke-width=\"1.5\" points=\"" << line.str() << "\"/>\n";
    os << points.str();
    os << "</g>\n";
    const double ly = T + 8 + 16.0 * static_cast<double>(k);
    os << "<g class=\"legend\"><rect x=\"" << W - R - 150 << "\" y=\"" << fixed(ly - 8)
       << "\" width=\"10\" height=\"10\" fill=\"" << s.color << "\"/><text x=\"" << W - R - 134
       << "\" y=\"" << fixed(ly + 1) << "\">" << s.name << "</text></g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string markdown_table(const Csv& csv) {
  std::ostringstream os;
  os << "|";
  for (const auto& h : csv.header) os << " " << h << " |";
  os << "\n|";
  for (std::size_t i = 0; i < csv.header.size(); ++i) os << "---|";
  os << "\n";
  for (const auto& row : csv.rows) {
    os << "|";
    for (const auto& c : row) os << " " << c << " |";
    os << "\n";
  }
  return os.str();
}

struct ReportOptions {
  std::string run_dir;
  std::string out_dir;
};

void report(const ReportOptions& o) {
  const fs::path dir = o.run_dir;
  const fs::path out = o.out_dir.empty() ? dir : fs::path(o.out_dir);
  const fs::path gen_path = dir / "generations.csv";
  const fs::path ge_path = dir / "ge_curve.csv";
  const fs::path grid_path = dir / "grid_summary.csv";
  const bool has_gen = fs::exists(gen_path), has_ge = fs::exists(ge_path),
             has_grid = fs::exists(grid_path);
  if (!has_gen && !has_ge && !has_grid)
    throw DataError("no logs found in " + dir.string() +
                    ": expected generations.csv (from evolve), ge_curve.csv (from eval-genome "
                    "or attack) or grid_summary.csv (from grid-search)");
  fs::create_directories(out);
  std::ostringstream md;
  md << "# Run report\n\nSource: `" << dir.string() << "`\n";

  if (has_gen) {
    const Csv csv = read_csv(gen_path, {"generation", "best_fitness", "best_so_far", "mean_fitness",
                                        "diversity", "n_invalid"});
    const std::size_t g = csv.column("generation");
    const std::vector<Series> series{{"best_fitness", "#1f77b4", g, csv.column("best_fitness")},
                                     {"best_so_far", "#d62728", g, csv.column("best_so_far")},
                                     {"mean_fitness", "#2ca02c", g, csv.column("mean_fitness")}};
    write_file(out / "fitness.svg",
               render_svg(csv, series, "Validation loss per generation", "generation",
                          "categorical cross-entropy"));
    md << "\n## Evolution\n\n";
    if (!csv.rows.empty()) {
      const auto& last = csv.rows.back();
      md << "- generations: " << csv.rows.size() << "\n"
         << "- best fitness so far: " << last[csv.column("best_so_far")] << "\n"
         << "- invalid genomes in the last generation: " << last[csv.column("n_invalid")] << "\n";
    }
    md << "\n![fitness](fitness.svg)\n\n" << markdown_table(csv);
  }

  if (has_ge) {
    const Csv csv = read_csv(ge_path, {"n_traces", "mean_key_rank"});
    const std::size_t n = csv.column("n_traces"), k = csv.column("mean_key_rank");
    write_file(out / "key_rank.svg",
               render_svg(csv, {{"mean_key_rank", "#1f77b4", n, k}},
                          "Mean key rank against attack traces", "attack traces",
                          "mean key rank"));
    double sum = 0;
    std::optional<std::size_t> first_zero_tail;
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
      const double v = parse_number(csv, i, k);
      sum += v;
      if (v != 0.0)
        first_zero_tail.reset();
      else if (!first_zero_tail)
        first_zero_tail = i;
    }
    md << "\n## Attack\n\n";
    if (!csv.rows.empty()) {
      md << "- attack traces: " << csv.rows.back()[n] << "\n"
         << "- final mean key rank: " << csv.rows.back()[k] << "\n"
         << "- traces to rank 0: "
         << (first_zero_tail ? csv.rows[*first_zero_tail][n] : std::string("not reached")) << "\n"
         << "- mean incremental key rank: "
         << fixed(sum / static_cast<double>(csv.rows.size()), 4) << "\n";
    }
    md << "\n![key rank](key_rank.svg)\n";
  }

  if (has_grid) {
    const Csv csv = read_csv(grid_path, {"eta", "crossover", "truncation"});
    md << "\n## Grid search\n\n" << markdown_table(csv);
    const fs::path effects = dir / "grid_effects.csv";
    if (fs::exists(effects)) md << "\n" << markdown_table(read_csv(effects, {"parameter", "value"}));
  }
  write_file(out / "report.md", md.str());
  std::cout << (out / "report.md").string() << "\n";
}

}  // namespace

Command add_report(CLI::App& root) {
  auto o = std::make_shared<ReportOptions>();
  CLI::App* app = root.add_subcommand("report", "Render SVG plots and a markdown summary from run logs");
  app->add_option("run_dir", o->run_dir, "Directory holding CSV logs")->required();
  app->add_option("--out", o->out_dir, "Output directory (default: the run directory)");
  return {app, [o] { report(*o); }};
}

}  // namespace nascty::cli
