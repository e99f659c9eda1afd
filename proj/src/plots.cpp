#include "stlplan/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace stlplan {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const char* const kAgentColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};
const char* const kMethodColors[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
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

struct Bounds {
  double x0 = std::numeric_limits<double>::infinity();
  double y0 = std::numeric_limits<double>::infinity();
  double x1 = -std::numeric_limits<double>::infinity();
  double y1 = -std::numeric_limits<double>::infinity();

  void add(double x, double y) {
    x0 = std::min(x0, x);
    y0 = std::min(y0, y);
    x1 = std::max(x1, x);
    y1 = std::max(y1, y);
  }
  void add_box(const Eigen::Vector2d& c, const Eigen::Vector2d& h) {
    add(c.x() - h.x(), c.y() - h.y());
    add(c.x() + h.x(), c.y() + h.y());
  }
};

// World to pixel mapping with y pointing up.
struct View {
  Bounds b;
  double scale = 1.0;
  double pad = 40.0;
  double width = 0.0;
  double height = 0.0;

  double px(double x) const { return pad + (x - b.x0) * scale; }
  double py(double y) const { return pad + (b.y1 - y) * scale; }
};

std::string marker(double x, double y, double r, bool start, const char* color) {
  std::string pts;
  if (start) {
    pts = num(x) + "," + num(y - r) + " " + num(x + r) + "," + num(y) + " " + num(x) + "," + num(y + r) + " " +
          num(x - r) + "," + num(y);
  } else {
    pts = num(x) + "," + num(y - r) + " " + num(x + r) + "," + num(y + r) + " " + num(x - r) + "," + num(y + r);
  }
  return "  <polygon class=\"" + std::string(start ? "start" : "end") + "\" points=\"" + pts + "\" fill=\"" + color +
         "\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return json::parse(in);
}

}  // namespace

std::string trajectory_svg(const Scenario& scenario, const Trace& trace, const std::string& title) {
  const int agents = std::max(1, trace.dim() / kStateDimPerAgent);
  View v;
  for (const auto& o : scenario.geometry.obstacles) v.b.add_box(o.center, Eigen::Vector2d(o.radius, o.radius));
  for (const auto& z : scenario.geometry.zones) {
    v.b.add_box(z.center, z.shape == ZoneShape::Box ? z.half_extents : Eigen::Vector2d(z.radius, z.radius));
  }
  for (const auto& w : scenario.geometry.walls) v.b.add_box(w.center, w.half_extents);
  for (int t = 0; t < trace.length(); ++t) {
    for (int i = 0; i < agents; ++i) v.b.add(trace.states(t, position_offset(i)), trace.states(t, position_offset(i) + 1));
  }
  const double margin = 0.05 * std::max(v.b.x1 - v.b.x0, v.b.y1 - v.b.y0) + 1e-3;
  v.b.x0 -= margin;
  v.b.y0 -= margin;
  v.b.x1 += margin;
  v.b.y1 += margin;
  v.scale = 600.0 / std::max(v.b.x1 - v.b.x0, v.b.y1 - v.b.y0);
  v.width = 2 * v.pad + (v.b.x1 - v.b.x0) * v.scale;
  v.height = 2 * v.pad + (v.b.y1 - v.b.y0) * v.scale;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(v.width) << "\" height=\"" << num(v.height)
      << "\" viewBox=\"0 0 " << num(v.width) << " " << num(v.height) << "\">\n";
  svg << "  <title>" << escape(title) << "</title>\n";
  svg << "  <text x=\"" << num(v.pad) << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << escape(title)
      << "</text>\n";
  svg << "  <path class=\"frame\" d=\"M" << num(v.px(v.b.x0)) << "," << num(v.py(v.b.y0)) << " H"
      << num(v.px(v.b.x1)) << " V" << num(v.py(v.b.y1)) << " H" << num(v.px(v.b.x0)) << " Z\" fill=\"none\" "
      << "stroke=\"#888\" stroke-width=\"1\"/>\n";

  for (const auto& w : scenario.geometry.walls) {
    svg << "  <rect class=\"wall\" x=\"" << num(v.px(w.center.x() - w.half_extents.x())) << "\" y=\""
        << num(v.py(w.center.y() + w.half_extents.y())) << "\" width=\"" << num(2 * w.half_extents.x() * v.scale)
        << "\" height=\"" << num(2 * w.half_extents.y() * v.scale) << "\" fill=\"#555\"/>\n";
  }
  for (const auto& z : scenario.geometry.zones) {
    const char* fill = z.role == "button" ? "#f5c542" : z.role == "corridor" ? "#9ecae1" : "#a1d99b";
    if (z.shape == ZoneShape::Box) {
      svg << "  <rect class=\"zone\" x=\"" << num(v.px(z.center.x() - z.half_extents.x())) << "\" y=\""
          << num(v.py(z.center.y() + z.half_extents.y())) << "\" width=\"" << num(2 * z.half_extents.x() * v.scale)
          << "\" height=\"" << num(2 * z.half_extents.y() * v.scale) << "\" fill=\"" << fill
          << "\" fill-opacity=\"0.6\"/>\n";
    } else {
      svg << "  <circle class=\"zone\" cx=\"" << num(v.px(z.center.x())) << "\" cy=\"" << num(v.py(z.center.y()))
          << "\" r=\"" << num(z.radius * v.scale) << "\" fill=\"" << fill << "\" fill-opacity=\"0.6\"/>\n";
    }
    svg << "  <text x=\"" << num(v.px(z.center.x())) << "\" y=\"" << num(v.py(z.center.y()) + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << escape(z.name) << "</text>\n";
  }
  for (const auto& o : scenario.geometry.obstacles) {
    svg << "  <circle class=\"obstacle\" cx=\"" << num(v.px(o.center.x())) << "\" cy=\"" << num(v.py(o.center.y()))
        << "\" r=\"" << num(o.radius * v.scale) << "\" fill=\"#444\" fill-opacity=\"0.8\"/>\n";
  }
  for (int i = 0; i < agents; ++i) {
    const char* color = kAgentColors[i % std::size(kAgentColors)];
    const int ox = position_offset(i);
    svg << "  <polyline class=\"agent" << i << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (int t = 0; t < trace.length(); ++t) {
      if (t) svg << ' ';
      svg << num(v.px(trace.states(t, ox))) << ',' << num(v.py(trace.states(t, ox + 1)));
    }
    svg << "\"/>\n";
    svg << marker(v.px(trace.states(0, ox)), v.py(trace.states(0, ox + 1)), 6, true, "#006400");
    const int last = trace.length() - 1;
    svg << marker(v.px(trace.states(last, ox)), v.py(trace.states(last, ox + 1)), 6, false, "#b22222");
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string bar_chart_svg(const std::vector<AggregateRow>& rows, const std::string& title) {
  std::vector<std::string> scenarios;
  std::vector<Method> methods;
  for (const auto& r : rows) {
    if (std::find(scenarios.begin(), scenarios.end(), r.scenario) == scenarios.end()) scenarios.push_back(r.scenario);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  const double bar_w = 18.0;
  const double group_gap = 30.0;
  const double group_w = bar_w * static_cast<double>(std::max<std::size_t>(methods.size(), 1)) + group_gap;
  const double left = 60.0;
  const double panel_h = 180.0;
  const double width = left + group_w * static_cast<double>(std::max<std::size_t>(scenarios.size(), 1)) + 140.0;
  const double height = 2 * panel_h + 140.0;

  double lo = 0.0;
  double hi = 0.0;
  for (const auto& r : rows) {
    lo = std::min(lo, r.mean_robustness);
    hi = std::max(hi, r.mean_robustness);
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\">\n";
  svg << "  <title>" << escape(title) << "</title>\n";
  svg << "  <text x=\"" << num(left) << "\" y=\"22\" font-family=\"sans-serif\" font-size=\"14\">" << escape(title)
      << "</text>\n";

  struct Panel {
    const char* label;
    double top;
    double lo;
    double hi;
    bool robustness;
  };
  const Panel panels[] = {{"mean robustness", 40.0, lo, hi, true}, {"satisfaction rate", 80.0 + panel_h, 0.0, 1.0, false}};
  for (const Panel& p : panels) {
    auto y_of = [&](double value) { return p.top + (p.hi - value) / (p.hi - p.lo) * panel_h; };
    const double base = y_of(std::clamp(0.0, p.lo, p.hi));
    svg << "  <text x=\"8\" y=\"" << num(p.top - 6) << "\" font-family=\"sans-serif\" font-size=\"12\">" << p.label
        << "</text>\n";
    svg << "  <line x1=\"" << num(left - 4) << "\" y1=\"" << num(base) << "\" x2=\""
        << num(left + group_w * static_cast<double>(scenarios.size())) << "\" y2=\"" << num(base)
        << "\" stroke=\"black\"/>\n";
    svg << "  <text x=\"" << num(left - 6) << "\" y=\"" << num(p.top + 4)
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << num(p.hi) << "</text>\n";
    svg << "  <text x=\"" << num(left - 6) << "\" y=\"" << num(p.top + panel_h + 4)
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << num(p.lo) << "</text>\n";
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
      const double gx = left + group_w * static_cast<double>(s) + group_gap / 2;
      for (std::size_t m = 0; m < methods.size(); ++m) {
        auto it = std::find_if(rows.begin(), rows.end(),
                               [&](const AggregateRow& r) { return r.scenario == scenarios[s] && r.method == methods[m]; });
        if (it == rows.end()) continue;
        const double value = p.robustness ? it->mean_robustness : it->satisfaction_rate;
        const double y = y_of(value);
        svg << "  <rect class=\"bar " << (p.robustness ? "robustness" : "satisfaction") << "\" x=\""
            << num(gx + bar_w * static_cast<double>(m)) << "\" y=\"" << num(std::min(y, base)) << "\" width=\""
            << num(bar_w - 2) << "\" height=\"" << num(std::abs(base - y)) << "\" fill=\""
            << kMethodColors[static_cast<std::size_t>(methods[m]) % std::size(kMethodColors)] << "\"><title>"
            << escape(scenarios[s] + " / " + std::string(to_string(methods[m])) + ": " + num(value))
            << "</title></rect>\n";
      }
      if (!p.robustness) {
        svg << "  <text x=\"" << num(gx) << "\" y=\"" << num(p.top + panel_h + 18)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(scenarios[s]) << "</text>\n";
      }
    }
  }
  const double lx = left + group_w * static_cast<double>(scenarios.size()) + 20;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const double ly = 50.0 + 18.0 * static_cast<double>(m);
    svg << "  <polygon class=\"legend\" points=\"" << num(lx) << "," << num(ly) << " " << num(lx + 12) << ","
        << num(ly) << " " << num(lx + 12) << "," << num(ly + 12) << " " << num(lx) << "," << num(ly + 12)
        << "\" fill=\"" << kMethodColors[static_cast<std::size_t>(methods[m]) % std::size(kMethodColors)] << "\"/>\n";
    svg << "  <text x=\"" << num(lx + 18) << "\" y=\"" << num(ly + 10) << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << to_string(methods[m]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::string> export_plots(const std::string& in_dir, const std::string& out_dir) {
  const fs::path in(in_dir);
  const fs::path out(out_dir);
  std::vector<std::string> written;
  auto plot_run = [&](const std::string& source, const std::string& method, const fs::path& trace_path,
                      const std::string& label) {
    Scenario sc = resolve_scenario(source);
    Trace trace = read_trace_csv(trace_path.string(), sc.dynamics.dt);
    const fs::path file = out / (sc.name + "_" + method + ".svg");
    write_text(file, trajectory_svg(sc, trace, label));
    written.push_back(file.string());
  };

  if (fs::exists(in / "report.json")) {
    const json report = read_json(in / "report.json");
    std::vector<AggregateRow> rows;
    for (const auto& r : report.at("rows")) {
      AggregateRow row;
      row.scenario = r.at("scenario").get<std::string>();
      row.scenario_source = r.value("scenario_source", row.scenario);
      row.method = method_from_string(r.at("method").get<std::string>()).value_or(Method::Svpio);
      row.mean_robustness = r.at("mean_robustness").get<double>();
      row.satisfaction_rate = r.at("satisfaction_rate").get<double>();
      row.best_seed = r.at("best_seed").get<std::uint64_t>();
      rows.push_back(row);
      const fs::path trace = in / r.at("best_trace").get<std::string>();
      if (r.at("runs").get<int>() > r.at("errors").get<int>() && fs::exists(trace)) {
        plot_run(row.scenario_source, r.at("method").get<std::string>(), trace,
                 row.scenario + " / " + r.at("method").get<std::string>() + " / seed " +
                     std::to_string(row.best_seed));
      }
    }
    const fs::path bars = out / "summary_bars.svg";
    write_text(bars, bar_chart_svg(rows, "mean robustness and satisfaction rate"));
    written.push_back(bars.string());
    return written;
  }

  if (!fs::exists(in)) throw std::runtime_error("'" + in_dir + "' does not exist");
  std::vector<fs::path> results;
  for (const auto& entry : fs::recursive_directory_iterator(in)) {
    if (entry.path().filename() == "result.json" && fs::exists(entry.path().parent_path() / "trace.csv")) {
      results.push_back(entry.path());
    }
  }
  std::sort(results.begin(), results.end());
  for (const auto& path : results) {
    const json r = read_json(path);
    const std::string method = r.at("method").get<std::string>();
    const std::string label =
        r.at("scenario").get<std::string>() + " / " + method + " / seed " + std::to_string(r.at("seed").get<std::uint64_t>());
    plot_run(r.value("scenario_source", r.at("scenario").get<std::string>()), method + "_" + std::to_string(r.at("seed").get<std::uint64_t>()),
             path.parent_path() / "trace.csv", label);
  }
  return written;
}

}  // namespace stlplan
