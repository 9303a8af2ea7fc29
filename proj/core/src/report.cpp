#include "looplab/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "looplab/util.hpp"

namespace looplab {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvariantError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  for (std::string part; std::getline(ss, part, ',');) f.push_back(part);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  return f;
}

std::string svg_number(double v) { return format_fixed(v, 2); }

}  // namespace

std::vector<AggregateRow> aggregate_curves(std::span<const std::vector<CurveRow>> curves) {
  std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> by_step;
  for (const auto& curve : curves) {
    for (const CurveRow& r : curve) {
      by_step[r.step].first.push_back(r.train_metric);
      by_step[r.step].second.push_back(r.val_metric);
    }
  }
  std::vector<AggregateRow> out;
  for (const auto& [step, v] : by_step) {
    AggregateRow row;
    row.step = step;
    row.trials = v.first.size();
    row.train_mean = mean(v.first);
    row.train_se = standard_error(v.first);
    row.val_mean = mean(v.second);
    row.val_se = standard_error(v.second);
    out.push_back(row);
  }
  return out;
}

std::string aggregate_csv(std::span<const AggregateRow> rows) {
  std::string out = "step,trials,train_mean,train_se,val_mean,val_se\n";
  for (const AggregateRow& r : rows) {
    out += std::to_string(r.step) + "," + std::to_string(r.trials) + "," +
           format_real(r.train_mean) + "," + format_real(r.train_se) + "," +
           format_real(r.val_mean) + "," + format_real(r.val_se) + "\n";
  }
  return out;
}

std::string curve_svg(std::span<const AggregateRow> rows, std::string_view title) {
  constexpr double kW = 640, kH = 360, kLeft = 60, kRight = 20, kTop = 40, kBottom = 40;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::string escaped;
  for (char ch : title) {
    if (ch == '<') escaped += "&lt;";
    else if (ch == '>') escaped += "&gt;";
    else if (ch == '&') escaped += "&amp;";
    else escaped += ch;
  }
  o << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"14\">"
    << escaped << "</text>\n";
  if (rows.empty()) {
    o << "</svg>\n";
    return o.str();
  }
  double lo = rows.front().val_mean, hi = lo;
  for (const AggregateRow& r : rows) {
    lo = std::min({lo, r.val_mean - r.val_se, r.train_mean});
    hi = std::max({hi, r.val_mean + r.val_se, r.train_mean});
  }
  if (hi - lo < 1e-9) {
    hi += 0.5;
    lo -= 0.5;
  }
  const double first = static_cast<double>(rows.front().step);
  const double last = std::max(first + 1.0, static_cast<double>(rows.back().step));
  auto px = [&](double step) { return kLeft + (step - first) / (last - first) * (kW - kLeft - kRight); };
  auto py = [&](double v) { return kTop + (hi - v) / (hi - lo) * (kH - kTop - kBottom); };

  o << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight
    << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
    << kH - kBottom << "\" stroke=\"black\"/>\n";
  for (double v : {lo, (lo + hi) / 2, hi}) {
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << svg_number(py(v) + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
      << format_fixed(v, 2) << "</text>\n";
  }
  o << "<text x=\"" << (kW + kLeft) / 2 << "\" y=\"" << kH - 8
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">step</text>\n";

  o << "<polygon fill=\"#4a7bd0\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
  for (const AggregateRow& r : rows) {
    o << svg_number(px(static_cast<double>(r.step))) << "," << svg_number(py(r.val_mean + r.val_se))
      << " ";
  }
  for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
    o << svg_number(px(static_cast<double>(it->step))) << ","
      << svg_number(py(it->val_mean - it->val_se)) << " ";
  }
  o << "\"/>\n";
  auto polyline = [&](bool val, const char* style) {
    o << "<polyline fill=\"none\" " << style << " points=\"";
    for (const AggregateRow& r : rows) {
      o << svg_number(px(static_cast<double>(r.step))) << ","
        << svg_number(py(val ? r.val_mean : r.train_mean)) << " ";
    }
    o << "\"/>\n";
  };
  polyline(true, "stroke=\"#1f4fa0\" stroke-width=\"2\"");
  polyline(false, "stroke=\"#c05020\" stroke-width=\"1.5\" stroke-dasharray=\"5,4\"");
  o << "<text x=\"" << kW - kRight - 4 << "\" y=\"" << kTop + 12
    << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" "
       "fill=\"#1f4fa0\">validation (mean, 1 SE band)</text>\n";
  o << "<text x=\"" << kW - kRight - 4 << "\" y=\"" << kTop + 26
    << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" "
       "fill=\"#c05020\">training (mean)</text>\n";
  o << "</svg>\n";
  return o.str();
}

std::string markdown_table(const ResultTable& table) {
  std::vector<std::size_t> best(table.columns.size(), 0);
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    std::vector<double> col;
    for (const auto& row : table.rows) col.push_back(row.second[c]);
    if (!col.empty()) best[c] = select_best_index(col, table.directions[c]);
  }
  std::string out = "| |";
  for (const std::string& c : table.columns) out += " " + c + " |";
  out += "\n|---|";
  for (std::size_t c = 0; c < table.columns.size(); ++c) out += "---|";
  out += "\n";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    out += "| " + table.rows[r].first + " |";
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      const std::string v = format_fixed(table.rows[r].second[c], 4);
      out += best[c] == r ? " **" + v + "** |" : " " + v + " |";
    }
    out += "\n";
  }
  return out;
}

ResultTable sweep_table(std::string_view text) {
  const std::vector<std::string> lines = split_lines(text);
  if (lines.empty() || csv_fields(lines[0]).size() != 8) {
    throw InvariantError("sweep file has an unexpected header");
  }
  ResultTable t;
  t.columns = {"final", "best validation"};
  bool have_direction = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = csv_fields(lines[i]);
    if (f.size() != 8) throw InvariantError("sweep line " + std::to_string(i + 1) + " is malformed");
    if (f[1].empty()) continue;  // failed cell
    const MetricDirection dir =
        f[1] == "minimize" ? MetricDirection::minimize : MetricDirection::maximize;
    if (!have_direction) {
      t.directions = {dir, dir};
      have_direction = true;
    }
    try {
      t.rows.push_back({f[0], {std::stod(f[4]), std::stod(f[6])}});
    } catch (const std::exception&) {
      throw InvariantError("sweep line " + std::to_string(i + 1) + " has a malformed number");
    }
  }
  if (!have_direction) t.directions = {MetricDirection::maximize, MetricDirection::maximize};
  return t;
}

ReportOutput build_report(std::span<const std::filesystem::path> dirs) {
  namespace fs = std::filesystem;
  ReportOutput out;
  std::vector<std::vector<CurveRow>> curves;
  std::string sweeps;
  auto take_curve = [&](const fs::path& file) {
    try {
      curves.push_back(parse_curve_csv(read_file(file)));
    } catch (const Error& e) {
      out.warnings.push_back("skipped " + file.string() + ": " + e.what());
    }
  };
  for (const fs::path& dir : dirs) {
    if (!fs::is_directory(dir)) {
      out.warnings.push_back("skipped " + dir.string() + ": not a directory");
      continue;
    }
    if (fs::exists(dir / "curve.csv")) take_curve(dir / "curve.csv");
    std::vector<fs::path> trials;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_directory() && entry.path().filename().string().starts_with("trial_") &&
          fs::exists(entry.path() / "curve.csv")) {
        trials.push_back(entry.path() / "curve.csv");
      }
    }
    std::sort(trials.begin(), trials.end());
    for (const fs::path& f : trials) take_curve(f);
    if (fs::exists(dir / "sweep.csv")) {
      try {
        sweeps += "Sweep " + dir.string() + "\n\n" +
                  markdown_table(sweep_table(read_file(dir / "sweep.csv"))) + "\n";
      } catch (const Error& e) {
        out.warnings.push_back("skipped " + (dir / "sweep.csv").string() + ": " + e.what());
      }
    }
  }
  out.curves = curves.size();
  out.rows = aggregate_curves(curves);
  out.aggregate_csv = aggregate_csv(out.rows);
  out.svg = curve_svg(out.rows, "validation metric across updates");
  std::ostringstream s;
  s << "Curves aggregated: " << curves.size() << "\n";
  if (!out.rows.empty()) {
    const AggregateRow& first = out.rows.front();
    const AggregateRow& last = out.rows.back();
    s << "Step " << first.step << " validation " << format_fixed(first.val_mean, 4) << " +/- "
      << format_fixed(first.val_se, 4) << "\n";
    s << "Step " << last.step << " validation " << format_fixed(last.val_mean, 4) << " +/- "
      << format_fixed(last.val_se, 4) << "\n";
  }
  if (!sweeps.empty()) s << "\n" << sweeps;
  out.summary = s.str();
  return out;
}

std::string replay_context(const std::filesystem::path& dir, std::size_t step,
                           std::optional<std::size_t> trial) {
  std::filesystem::path base = dir;
  if (trial) base /= "trial_" + std::to_string(*trial);
  std::ostringstream name;
  name << "step_" << std::setw(4) << std::setfill('0') << step << ".txt";
  const std::filesystem::path file = base / "contexts" / name.str();
  if (!std::filesystem::exists(file)) {
    throw InvariantError("no context was recorded for step " + std::to_string(step) + " in " +
                         base.string());
  }
  return read_file(file);
}

}  // namespace looplab
