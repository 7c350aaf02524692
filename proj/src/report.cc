#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include "segfp/error.h"
#include "segfp/eval_harness.h"
#include "segfp/util.h"

namespace segfp {
namespace {

constexpr const char* kCsvHeader = "W,L,top1_exact,top3_exact,top10_exact,top1_near,n_queries";
constexpr HitMetric kMetrics[] = {HitMetric::kTop1Exact, HitMetric::kTop3Exact, HitMetric::kTop10Exact,
                                  HitMetric::kTop1Near};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Green, blue, orange, then extras for additional segment lengths.
const char* series_colour(std::size_t i) {
  static const char* kColours[] = {"#2ca02c", "#1f77b4", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};
  return kColours[i % 6];
}

}  // namespace

std::string format_report_csv(const HitReport& report) {
  report.check_invariants();
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& c : report.cells) {
    out << format_seconds(c.window_w) << ',' << format_seconds(c.query_len_l) << ',' << fixed(c.top1_exact, 6) << ','
        << fixed(c.top3_exact, 6) << ',' << fixed(c.top10_exact, 6) << ',' << fixed(c.top1_near, 6) << ','
        << c.n_queries << '\n';
  }
  return out.str();
}

HitReport parse_report_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw Error(ErrorCode::kInvalidInput, "report CSV must start with '" + std::string(kCsvHeader) + "'");
  }
  HitReport report;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    HitCell c;
    unsigned long long n = 0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%llu", &c.window_w, &c.query_len_l, &c.top1_exact,
                    &c.top3_exact, &c.top10_exact, &c.top1_near, &n) != 7) {
      throw Error(ErrorCode::kInvalidInput, "malformed report CSV line " + std::to_string(line_no));
    }
    c.n_queries = n;
    HitReport one;
    one.cells.push_back(c);
    report.merge(one);
  }
  report.check_invariants();
  return report;
}

std::string format_report_markdown(const HitReport& report) {
  report.check_invariants();
  const auto windows = report.window_values();
  const auto lengths = report.query_lengths();
  const std::size_t contested = contested_lengths(report);

  std::ostringstream out;
  out << "| Metric | W |";
  for (double l : lengths) out << ' ' << format_seconds(l) << " |";
  out << " Win |\n|---|---|";
  for (std::size_t i = 0; i < lengths.size(); ++i) out << "---:|";
  out << "---:|\n";

  for (HitMetric metric : kMetrics) {
    const auto wins = win_counts(report, metric);
    for (double w : windows) {
      out << "| " << metric_label(metric) << " | " << format_seconds(w) << " |";
      for (double l : lengths) {
        const HitCell* c = report.find(w, l);
        out << ' ' << (c ? fixed(100.0 * metric_value(*c, metric), 2) : std::string("-")) << " |";
      }
      out << ' ' << format_seconds(wins.at(w)) << " / " << contested << " |\n";
    }
  }
  return out.str();
}

std::string format_report_svg(const HitReport& report) {
  report.check_invariants();
  const auto windows = report.window_values();
  const auto lengths = report.query_lengths();
  const double l_min = lengths.empty() ? 0.0 : lengths.front();
  const double l_max = lengths.empty() ? 1.0 : lengths.back();
  const double l_span = l_max > l_min ? l_max - l_min : 1.0;

  constexpr int kPanelW = 360, kPanelH = 260, kMargin = 48, kCols = 2;
  constexpr int kWidth = kCols * kPanelW, kHeight = 2 * kPanelH + 40;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t p = 0; p < 4; ++p) {
    const HitMetric metric = kMetrics[p];
    const int ox = static_cast<int>(p % kCols) * kPanelW;
    const int oy = static_cast<int>(p / kCols) * kPanelH;
    const int x0 = ox + kMargin, x1 = ox + kPanelW - 16;
    const int y0 = oy + kPanelH - 36, y1 = oy + 24;
    auto px = [&](double l) { return x0 + (l - l_min) / l_span * (x1 - x0); };
    auto py = [&](double rate) { return y0 - rate * (y0 - y1); };

    out << "<g>\n<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << oy + 16 << "\" text-anchor=\"middle\">"
        << metric_label(metric) << " hit rate (%)</text>\n";
    out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
        << "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 100; tick += 25) {
      out << "<text x=\"" << x0 - 4 << "\" y=\"" << fixed(py(tick / 100.0) + 4, 1) << "\" text-anchor=\"end\">"
          << tick << "</text>\n";
    }
    for (double l : lengths) {
      out << "<text x=\"" << fixed(px(l), 1) << "\" y=\"" << y0 + 14 << "\" text-anchor=\"middle\">"
          << format_seconds(l) << "</text>\n";
    }
    out << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << y0 + 28 << "\" text-anchor=\"middle\">L (s)</text>\n";
    for (std::size_t s = 0; s < windows.size(); ++s) {
      out << "<polyline fill=\"none\" stroke=\"" << series_colour(s) << "\" stroke-width=\"2\" points=\"";
      bool first = true;
      for (double l : lengths) {
        const HitCell* c = report.find(windows[s], l);
        if (!c) continue;
        out << (first ? "" : " ") << fixed(px(l), 1) << ',' << fixed(py(metric_value(*c, metric)), 1);
        first = false;
      }
      out << "\"/>\n";
    }
    out << "</g>\n";
  }

  int lx = kMargin;
  const int ly = kHeight - 14;
  for (std::size_t s = 0; s < windows.size(); ++s) {
    out << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 20 << "\" y2=\"" << ly - 4
        << "\" stroke=\"" << series_colour(s) << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << lx + 24 << "\" y=\"" << ly << "\">W=" << format_seconds(windows[s]) << "</text>\n";
    lx += 90;
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace segfp
