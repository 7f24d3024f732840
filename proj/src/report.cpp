#include "cliquemining/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <fmt/core.h>

namespace cliquemining {

namespace {

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

std::string px(double v) { return fmt::format("{:.2f}", v); }

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

struct Frame2d {
  double x0, x1, y0, y1;
  static constexpr double kW = 640, kH = 400, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;
  [[nodiscard]] double sx(double x) const {
    return kLeft + (x1 == x0 ? 0.5 : (x - x0) / (x1 - x0)) * (kW - kLeft - kRight);
  }
  [[nodiscard]] double sy(double y) const {
    return kH - kBottom - (y1 == y0 ? 0.5 : (y - y0) / (y1 - y0)) * (kH - kTop - kBottom);
  }
};

std::string svg_open(const Frame2d& f, const std::string& title, const std::string& xlabel,
                     const std::string& ylabel) {
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
      "<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{3}</text>\n",
      Frame2d::kW, Frame2d::kH, Frame2d::kW / 2, title);
  const double bx0 = Frame2d::kLeft, bx1 = Frame2d::kW - Frame2d::kRight;
  const double by0 = Frame2d::kTop, by1 = Frame2d::kH - Frame2d::kBottom;
  s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n", px(bx0),
                   px(by0), px(bx1 - bx0), px(by1 - by0));
  for (int t = 0; t <= 4; ++t) {
    const double xv = f.x0 + (f.x1 - f.x0) * t / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * t / 4.0;
    s += fmt::format(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{:.4g}</text>\n",
        px(f.sx(xv)), px(by1 + 16), xv);
    s += fmt::format(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{:.3g}</text>\n",
        px(bx0 - 6), px(f.sy(yv) + 4), yv);
  }
  s += fmt::format(
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
      px((bx0 + bx1) / 2), px(Frame2d::kH - 10), xlabel);
  s += fmt::format(
      "<text x=\"14\" y=\"{0}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
      "transform=\"rotate(-90 14 {0})\">{1}</text>\n",
      px((by0 + by1) / 2), ylabel);
  return s;
}

std::string points(const std::vector<std::pair<double, double>>& pts, const Frame2d& f) {
  std::string s;
  for (const auto& [x, y] : pts) {
    if (!s.empty()) s += ' ';
    s += px(f.sx(x)) + "," + px(f.sy(y));
  }
  return s;
}

std::string legend(std::size_t i, const std::string& name) {
  const double y = Frame2d::kTop + 14 + 16.0 * static_cast<double>(i);
  return fmt::format(
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>"
      "<text x=\"{4}\" y=\"{5}\" font-family=\"sans-serif\" font-size=\"11\">{6}</text>\n",
      px(Frame2d::kLeft + 10), px(y), px(Frame2d::kLeft + 30), kPalette[i % 8], px(Frame2d::kLeft + 35), px(y + 4),
      name);
}

}  // namespace

std::string recall_csv(const RecallReport& report) {
  std::string s = "mode,threshold,k,recall,num_queries\n";
  for (const RecallRow& r : report.rows) {
    s += fmt::format("{},{},{},{},{}\n", to_string(report.mode), num(r.threshold), r.k, num(r.recall), r.num_queries);
  }
  return s;
}

std::string gds_csv(const GdsProfile& profile) {
  std::string s = "bin_lo,bin_hi,count,mean,std\n";
  for (const GdsBin& b : profile.bins) {
    s += fmt::format("{},{},{},{},{}\n", num(b.lo), num(b.hi), b.count, num(b.mean), num(b.std));
  }
  return s;
}

std::string ordering_csv(const OrderingEstimate& est) {
  return fmt::format("estimate,stderr,trials\n{},{},{}\n", num(est.estimate), num(est.std_error), est.trials);
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string s = "step,loss,selected_pos,selected_neg\n";
  for (const TraceRow& r : trace) s += fmt::format("{},{},{},{}\n", r.step, num(r.loss), r.selected_pos, r.selected_neg);
  return s;
}

std::string recall_curve_svg(const RecallReport& report, const std::string& title) {
  std::vector<std::size_t> ks;
  double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
  for (const RecallRow& r : report.rows) {
    if (std::find(ks.begin(), ks.end(), r.k) == ks.end()) ks.push_back(r.k);
    tmin = std::min(tmin, r.threshold);
    tmax = std::max(tmax, r.threshold);
  }
  if (report.rows.empty()) tmin = tmax = 0.0;
  const Frame2d f{tmin, tmax, 0.0, 1.0};
  std::string s = svg_open(f, title, fmt::format("threshold ({})", to_string(report.mode)), "recall");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    std::vector<std::pair<double, double>> pts;
    for (const RecallRow& r : report.rows) {
      if (r.k == ks[i]) pts.emplace_back(r.threshold, r.recall);
    }
    s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", kPalette[i % 8],
                     points(pts, f));
    s += legend(i, fmt::format("R@{}", ks[i]));
  }
  return s + "</svg>\n";
}

std::string gds_svg(const std::vector<GdsSeries>& series, const std::string& title) {
  double x0 = 0.0, x1 = 0.0, y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
  for (const GdsSeries& g : series) {
    for (const GdsBin& b : g.profile.bins) {
      if (!std::isfinite(b.hi) || b.count == 0) continue;
      x1 = std::max(x1, b.hi);
      y0 = std::min(y0, b.mean - b.std);
      y1 = std::max(y1, b.mean + b.std);
    }
  }
  if (!std::isfinite(y0)) y0 = y1 = 0.0;
  const Frame2d f{x0, x1, std::min(0.0, y0), y1};
  std::string s = svg_open(f, title, "geographic distance (m)", "descriptor distance");
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::vector<std::pair<double, double>> mean, upper, lower;
    for (const GdsBin& b : series[i].profile.bins) {
      if (!std::isfinite(b.hi) || b.count == 0) continue;
      const double mid = 0.5 * (b.lo + b.hi);
      mean.emplace_back(mid, b.mean);
      upper.emplace_back(mid, b.mean + b.std);
      lower.emplace_back(mid, b.mean - b.std);
    }
    std::reverse(lower.begin(), lower.end());
    upper.insert(upper.end(), lower.begin(), lower.end());
    s += fmt::format("<polygon class=\"band\" fill=\"{}\" fill-opacity=\"0.25\" stroke=\"none\" points=\"{}\"/>\n",
                     kPalette[i % 8], points(upper, f));
    s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", kPalette[i % 8],
                     points(mean, f));
    s += legend(i, series[i].name);
  }
  return s + "</svg>\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<std::filesystem::path> emit_reports(const ReportSet& reports, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& file, const std::string& text) {
    const auto path = out_dir / file;
    write_text(path, text);
    written.push_back(path);
  };
  for (const NamedRecall& r : reports.recalls) {
    put(r.name + ".csv", recall_csv(r.report));
    std::set<double> thresholds;
    for (const RecallRow& row : r.report.rows) thresholds.insert(row.threshold);
    if (thresholds.size() > 1) put(r.name + ".svg", recall_curve_svg(r.report, r.name));
  }
  for (const GdsSeries& g : reports.gds) put(g.name + ".csv", gds_csv(g.profile));
  if (!reports.gds.empty()) put("gds.svg", gds_svg(reports.gds, "descriptor vs geographic distance"));
  for (const NamedOrdering& o : reports.orderings) put(o.name + ".csv", ordering_csv(o.estimate));
  return written;
}

}  // namespace cliquemining
