#include "eval/plots.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "core/tensor.h"

namespace dgad {

namespace {

constexpr double kW = 480.0, kH = 480.0;
constexpr double kLeft = 56.0, kRight = 16.0, kTop = 36.0, kBottom = 44.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::ofstream open_svg(const std::string& path, double w, double h) {
  std::ofstream out(path);
  if (!out) fail("cannot write plot file: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
      << " " << h << "\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  return out;
}

}  // namespace

void write_roc_svg(const std::string& path, const std::vector<RocPoint>& points, double auc, const std::string& title) {
  if (points.size() < 2) fail("roc plot needs at least 2 points");
  double plot_w = kW - kLeft - kRight, plot_h = kH - kTop - kBottom;
  auto px = [&](double fpr) { return kLeft + fpr * plot_w; };
  auto py = [&](double tpr) { return kTop + (1.0 - tpr) * plot_h; };

  std::ofstream out = open_svg(path, kW, kH);
  out << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
      << title << "</text>\n";
  // Grid and axes.
  for (int i = 0; i <= 4; ++i) {
    double t = i / 4.0;
    out << "<line x1=\"" << px(t) << "\" y1=\"" << py(0) << "\" x2=\"" << px(t) << "\" y2=\"" << py(1)
        << "\" stroke=\"#ddd\"/>\n";
    out << "<line x1=\"" << px(0) << "\" y1=\"" << py(t) << "\" x2=\"" << px(1) << "\" y2=\"" << py(t)
        << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << px(t) << "\" y=\"" << py(0) + 18 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(t) << "</text>\n";
    out << "<text x=\"" << px(0) - 8 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(t) << "</text>\n";
  }
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"#333\"/>\n";
  out << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\"" << py(1)
      << "\" stroke=\"#999\" stroke-dasharray=\"5,4\"/>\n";
  // Curve.
  out << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\" points=\"";
  for (const RocPoint& p : points) out << px(p.fpr) << "," << py(p.tpr) << " ";
  out << "\"/>\n";
  out << "<text x=\"" << px(0.62) << "\" y=\"" << py(0.08) << "\" font-family=\"sans-serif\" font-size=\"13\">AUC = "
      << fmt(auc) << "</text>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 8
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">false positive rate</text>\n";
  out << "<text x=\"14\" y=\"" << kH / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 " << kH / 2
      << ")\">true positive rate</text>\n";
  out << "</svg>\n";
}

void write_histogram_svg(const std::string& path, const std::vector<double>& normal_scores,
                         const std::vector<double>& anomalous_scores, int64_t bins, const std::string& title) {
  if (bins < 1) fail("histogram needs at least 1 bin");
  if (normal_scores.empty() && anomalous_scores.empty()) fail("histogram needs scores");
  double lo = 1e300, hi = -1e300;
  for (double s : normal_scores) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  for (double s : anomalous_scores) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  if (hi <= lo) hi = lo + 1.0;
  double width = (hi - lo) / static_cast<double>(bins);

  auto count = [&](const std::vector<double>& v) {
    std::vector<int64_t> c(static_cast<size_t>(bins), 0);
    for (double s : v) {
      int64_t b = std::min<int64_t>(bins - 1, static_cast<int64_t>((s - lo) / width));
      c[static_cast<size_t>(std::max<int64_t>(0, b))]++;
    }
    return c;
  };
  std::vector<int64_t> cn = count(normal_scores), ca = count(anomalous_scores);
  int64_t peak = 1;
  for (int64_t i = 0; i < bins; ++i) peak = std::max({peak, cn[static_cast<size_t>(i)], ca[static_cast<size_t>(i)]});

  double plot_w = kW - kLeft - kRight, plot_h = kH - kTop - kBottom;
  auto bx = [&](int64_t b) { return kLeft + static_cast<double>(b) / static_cast<double>(bins) * plot_w; };
  auto by = [&](int64_t c) { return kTop + (1.0 - static_cast<double>(c) / static_cast<double>(peak)) * plot_h; };
  double bw = plot_w / static_cast<double>(bins);

  std::ofstream out = open_svg(path, kW, kH);
  out << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
      << title << "</text>\n";
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"#333\"/>\n";
  auto bars = [&](const std::vector<int64_t>& c, const char* color) {
    for (int64_t b = 0; b < bins; ++b) {
      int64_t n = c[static_cast<size_t>(b)];
      if (n == 0) continue;
      out << "<rect x=\"" << bx(b) << "\" y=\"" << by(n) << "\" width=\"" << bw << "\" height=\""
          << (kTop + plot_h - by(n)) << "\" fill=\"" << color << "\" fill-opacity=\"0.55\"/>\n";
    }
  };
  bars(cn, "#2b8a3e");
  bars(ca, "#c0392b");
  out << "<rect x=\"" << kLeft + 10 << "\" y=\"" << kTop + 10 << "\" width=\"12\" height=\"12\" fill=\"#2b8a3e\" fill-opacity=\"0.55\"/>\n";
  out << "<text x=\"" << kLeft + 27 << "\" y=\"" << kTop + 20 << "\" font-family=\"sans-serif\" font-size=\"12\">normal</text>\n";
  out << "<rect x=\"" << kLeft + 10 << "\" y=\"" << kTop + 28 << "\" width=\"12\" height=\"12\" fill=\"#c0392b\" fill-opacity=\"0.55\"/>\n";
  out << "<text x=\"" << kLeft + 27 << "\" y=\"" << kTop + 38 << "\" font-family=\"sans-serif\" font-size=\"12\">anomalous</text>\n";
  out << "<text x=\"" << kLeft << "\" y=\"" << kTop - 6 << "\" font-family=\"sans-serif\" font-size=\"11\">max bin = " << peak
      << "</text>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 8
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">anomaly score</text>\n";
  // Axis endpoint labels.
  out << "<text x=\"" << kLeft << "\" y=\"" << kTop + plot_h + 18 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
      << fmt(lo) << "</text>\n";
  out << "<text x=\"" << kLeft + plot_w << "\" y=\"" << kTop + plot_h + 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(hi) << "</text>\n";
  out << "</svg>\n";
}

}  // namespace dgad
