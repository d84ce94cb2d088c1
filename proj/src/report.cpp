#include "ecodrive/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <fmt/core.h>

#include "ecodrive/common.hpp"

namespace ecodrive::report {

namespace {

constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

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

std::string header(const std::string& title) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{3}</text>\n",
      kW, kH, kW / 2, escape(title));
}

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  y0 = std::min(y0, 0.0);
  if (x1 - x0 < 1e-12) x1 = x0 + 1;
  if (y1 - y0 < 1e-12) y1 = y0 + 1;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - y0) / (y1 - y0) * ph; };

  std::string svg = header(title);
  svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n", kLeft, kTop,
                     pw, ph);
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.3g}</text>\n", px(fx), kTop + ph + 16,
                       fx);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", kLeft - 6, py(fy) + 4, fy);
  }
  svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2, kH - 18,
                     escape(x_label));
  svg += fmt::format("<text x=\"16\" y=\"{:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1f})\">{}</text>\n",
                     kTop + ph / 2, kTop + ph / 2, escape(y_label));
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto* color = kPalette[s % std::size(kPalette)];
    std::string pts;
    for (std::size_t i = 0; i < series[s].x.size() && i < series[s].y.size(); ++i)
      pts += fmt::format("{:.2f},{:.2f} ", px(series[s].x[i]), py(series[s].y[i]));
    svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", color, pts);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" fill=\"{}\">{}</text>\n", kLeft + 10, kTop + 16 + 16.0 * s, color,
                       escape(series[s].label));
  }
  svg += "</svg>\n";
  return svg;
}

std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<std::optional<double>>& values) {
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  double lim = 1.0;
  for (const auto& v : values)
    if (v) lim = std::max(lim, std::abs(*v));
  auto py = [&](double y) { return kTop + ph / 2 - y / lim * ph / 2; };
  std::string svg = header(title);
  svg += fmt::format("<line x1=\"{}\" y1=\"{:.1f}\" x2=\"{}\" y2=\"{:.1f}\" stroke=\"#444\"/>\n", kLeft, py(0),
                     kLeft + pw, py(0));
  for (double t : {-lim, -lim / 2, lim / 2, lim})
    svg += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.2g}</text>\n", kLeft - 6, py(t) + 4, t);
  const double slot = labels.empty() ? pw : pw / static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double cx = kLeft + slot * (static_cast<double>(i) + 0.5);
    if (i < values.size() && values[i]) {
      const double v = *values[i];
      const double top = std::min(py(v), py(0)), h = std::abs(py(v) - py(0));
      svg += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"/>\n",
                         cx - slot * 0.35, top, slot * 0.7, h, v >= 0 ? kPalette[0] : kPalette[1]);
    }
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\" transform=\"rotate(-35 {:.1f} {:.1f})\">{}</text>\n",
                       cx, kTop + ph + 14, cx, kTop + ph + 14, escape(labels[i]));
  }
  svg += "</svg>\n";
  return svg;
}

ReportFiles write_report(const std::vector<assess::AssessmentRecord>& records, const std::filesystem::path& out) {
  if (records.empty()) throw DataError("no records");
  std::filesystem::create_directories(out);
  ReportFiles files;
  auto put = [&](const std::string& name, const std::string& text) {
    write_file_atomic(out / name, text);
    files.written.push_back(out / name);
  };

  const auto overall = assess::regional_effectiveness(records);
  std::string eff = "scope,scenarios,mean_baseline_g,mean_eco_g,effectiveness\n";
  eff += fmt::format("all,{},{:.4f},{:.4f},{:.6f}\n", overall.scenarios, overall.mean_baseline_g, overall.mean_eco_g,
                     overall.effectiveness);
  for (const auto& [slice, r] : assess::effectiveness_by_slice(records))
    eff += fmt::format("{},{},{:.4f},{:.4f},{:.6f}\n", slice, r.scenarios, r.mean_baseline_g, r.mean_eco_g,
                       r.effectiveness);
  put("effectiveness.csv", eff);

  const auto by_adoption = assess::effectiveness_by_adoption(records);
  std::string adopt = "penetration,scenarios,effectiveness\n";
  Series curve{"effectiveness", {}, {}};
  for (const auto& [p, r] : by_adoption) {
    adopt += fmt::format("{:.3f},{},{:.6f}\n", p, r.scenarios, r.effectiveness);
    curve.x.push_back(p * 100);
    curve.y.push_back(r.effectiveness * 100);
  }
  put("adoption.csv", adopt);
  put("adoption.svg", line_chart("Emission reduction by adoption", "adoption (%)", "reduction (%)", {curve}));

  const auto corr = assess::factor_correlations(records);
  std::string cc = "factor,pearson_r\n";
  std::vector<std::string> names;
  std::vector<std::optional<double>> vals;
  for (std::size_t f = 0; f < corr.size(); ++f) {
    cc += fmt::format("{},{}\n", assess::kFactorNames[f], corr[f] ? fmt::format("{:.6f}", *corr[f]) : "undefined");
    names.emplace_back(assess::kFactorNames[f]);
    vals.push_back(corr[f]);
  }
  put("correlations.csv", cc);
  put("correlations.svg", bar_chart("Factor correlation with benefit", names, vals));

  const auto benefits = assess::intersection_benefits(records);
  std::vector<double> b;
  for (const auto& [k, v] : benefits) b.push_back(v);
  const auto pareto = assess::pareto_curve(b);
  std::string pc = "intersection_fraction,benefit_share\n";
  Series ps{"cumulative benefit", {0.0}, {0.0}};
  for (std::size_t i = 0; i < pareto.size(); ++i) {
    const double frac = static_cast<double>(i + 1) / static_cast<double>(pareto.size());
    pc += fmt::format("{:.6f},{:.6f}\n", frac, pareto[i]);
    ps.x.push_back(frac * 100);
    ps.y.push_back(pareto[i] * 100);
  }
  put("pareto.csv", pc);
  put("pareto.svg", line_chart("Cumulative benefit by intersection", "intersections (%)", "benefit share (%)", {ps}));

  // Top-20% overlap across adoption levels, over intersections seen at every level.
  if (by_adoption.size() >= 2) {
    std::vector<double> levels;
    std::vector<std::map<std::string, double>> per_level;
    for (const auto& [p, r] : by_adoption) {
      levels.push_back(p);
      std::vector<assess::AssessmentRecord> sub;
      for (const auto& rec : records)
        if (rec.penetration == p) sub.push_back(rec);
      std::map<std::string, double> m;
      for (const auto& [k, v] : assess::intersection_benefits(sub)) m[k] = v;
      per_level.push_back(std::move(m));
    }
    std::vector<std::string> common;
    for (const auto& [k, v] : per_level.front())
      if (std::all_of(per_level.begin(), per_level.end(), [&](const auto& m) { return m.count(k) > 0; }))
        common.push_back(k);
    if (!common.empty() && levels.size() <= 16) {
      std::vector<std::vector<double>> mat(levels.size());
      for (std::size_t l = 0; l < levels.size(); ++l)
        for (const auto& k : common) mat[l].push_back(per_level[l].at(k));
      const auto venn = assess::top_set_overlap(mat, 0.2);
      std::string vc = "region,count\n";
      for (const auto& [mask, n] : venn.regions) {
        std::string name;
        for (std::size_t l = 0; l < levels.size(); ++l)
          if (mask >> l & 1u) name += fmt::format("{}p{:.0f}", name.empty() ? "" : "&", levels[l] * 100);
        vc += fmt::format("{},{}\n", name, n);
      }
      vc += fmt::format("all,{}\n", venn.all);
      put("overlap.csv", vc);
    }
  }

  std::string sc = "effectiveness,intersection_share,us_reduction,global_reduction\n";
  for (double e : {overall.effectiveness, 0.11, 0.22}) {
    const auto s = assess::national_scaling(e);
    sc += fmt::format("{:.6f},{:.6f},{:.6f},{:.6f}\n", e, s.intersection_share, s.us_reduction, s.global_reduction);
  }
  put("scaling.csv", sc);
  return files;
}

}  // namespace ecodrive::report
