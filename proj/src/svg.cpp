#include "sarsfe/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "sarsfe/error.hpp"

namespace sarsfe {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 150;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 55;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
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

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  }
};

// Maps data coordinates into the plot rectangle and draws the frame, ticks and labels.
class Canvas {
 public:
  Canvas(const ChartOptions& o, Range x, Range y) : o_(o), x_(x), y_(y) {
    w_ = o.width - kMarginLeft - kMarginRight;
    h_ = o.height - kMarginTop - kMarginBottom;
    if (w_ < 10 || h_ < 10) throw Error(ErrorKind::Parameter, "chart too small");
  }

  double tx(double v) const {
    const double a = o_.log_x ? std::log10(v) : v;
    const double lo = o_.log_x ? std::log10(x_.lo) : x_.lo;
    const double hi = o_.log_x ? std::log10(x_.hi) : x_.hi;
    return kMarginLeft + (a - lo) / (hi - lo) * w_;
  }
  double ty(double v) const { return kMarginTop + h_ - (v - y_.lo) / (y_.hi - y_.lo) * h_; }

  std::string frame() const {
    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(o_.width) + "\" height=\"" +
         std::to_string(o_.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(kMarginLeft + w_ / 2.0) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
         escape(o_.title) + "</text>\n";
    s += "<rect x=\"" + num(kMarginLeft) + "\" y=\"" + num(kMarginTop) + "\" width=\"" + num(w_) + "\" height=\"" +
         num(h_) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double v : x_ticks()) {
      const double px = tx(v);
      s += "<line x1=\"" + num(px) + "\" y1=\"" + num(kMarginTop + h_) + "\" x2=\"" + num(px) + "\" y2=\"" +
           num(kMarginTop + h_ + 5) + "\" stroke=\"black\"/>\n";
      s += "<text x=\"" + num(px) + "\" y=\"" + num(kMarginTop + h_ + 18) + "\" text-anchor=\"middle\">" + num(v) +
           "</text>\n";
    }
    for (int i = 0; i <= 5; ++i) {
      const double v = y_.lo + (y_.hi - y_.lo) * i / 5.0;
      const double py = ty(v);
      s += "<line x1=\"" + num(kMarginLeft - 5) + "\" y1=\"" + num(py) + "\" x2=\"" + num(kMarginLeft) + "\" y2=\"" +
           num(py) + "\" stroke=\"black\"/>\n";
      s += "<text x=\"" + num(kMarginLeft - 8) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"end\">" + num(v) +
           "</text>\n";
    }
    s += "<text x=\"" + num(kMarginLeft + w_ / 2.0) + "\" y=\"" + num(o_.height - 12) + "\" text-anchor=\"middle\">" +
         escape(o_.x_label) + "</text>\n";
    s += "<text transform=\"translate(18," + num(kMarginTop + h_ / 2.0) + ") rotate(-90)\" text-anchor=\"middle\">" +
         escape(o_.y_label) + "</text>\n";
    return s;
  }

  std::string legend_entry(int index, const std::string& name, const char* colour) const {
    const double x = kMarginLeft + w_ + 15;
    const double y = kMarginTop + 10 + 20.0 * index;
    return "<rect x=\"" + num(x) + "\" y=\"" + num(y - 9) + "\" width=\"12\" height=\"12\" fill=\"" + colour +
           "\"/>\n<text x=\"" + num(x + 18) + "\" y=\"" + num(y + 2) + "\">" + escape(name) + "</text>\n";
  }

 private:
  std::vector<double> x_ticks() const {
    std::vector<double> t;
    if (o_.log_x) {
      for (double d = std::pow(10.0, std::floor(std::log10(x_.lo))); d <= x_.hi * 1.0001; d *= 10) {
        for (double m : {1.0, 2.0, 5.0}) {
          if (d * m >= x_.lo * 0.9999 && d * m <= x_.hi * 1.0001) t.push_back(d * m);
        }
      }
    } else {
      for (int i = 0; i <= 5; ++i) t.push_back(x_.lo + (x_.hi - x_.lo) * i / 5.0);
    }
    return t;
  }

  const ChartOptions& o_;
  Range x_;
  Range y_;
  double w_;
  double h_;
};

}  // namespace

std::string svg_line_chart(const std::vector<LineSeries>& series, const ChartOptions& opts) {
  Range xr;
  Range yr;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size() || (!s.err.empty() && s.err.size() != s.y.size())) {
      throw Error(ErrorKind::Parameter, "series '" + s.name + "' has mismatched lengths");
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (opts.log_x && !(s.x[i] > 0)) throw Error(ErrorKind::Parameter, "log axis needs positive x values");
      xr.add(s.x[i]);
      const double e = s.err.empty() ? 0.0 : s.err[i];
      yr.add(s.y[i] - e);
      yr.add(s.y[i] + e);
    }
  }
  xr.finish();
  yr.finish();
  if (opts.log_x && xr.lo <= 0) xr.lo = xr.hi / 10;
  const Canvas c(opts, xr, yr);
  std::string out = c.frame();
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* colour = kPalette[k % std::size(kPalette)];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) pts += (i ? " " : "") + num(c.tx(s.x[i])) + "," + num(c.ty(s.y[i]));
    out += "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out += "<circle cx=\"" + num(c.tx(s.x[i])) + "\" cy=\"" + num(c.ty(s.y[i])) + "\" r=\"3\" fill=\"" + colour +
             "\"/>\n";
      if (!s.err.empty() && s.err[i] > 0) {
        out += "<line x1=\"" + num(c.tx(s.x[i])) + "\" y1=\"" + num(c.ty(s.y[i] - s.err[i])) + "\" x2=\"" +
               num(c.tx(s.x[i])) + "\" y2=\"" + num(c.ty(s.y[i] + s.err[i])) + "\" stroke=\"" + colour + "\"/>\n";
      }
    }
    out += c.legend_entry(static_cast<int>(k), s.name, colour);
  }
  return out + "</svg>\n";
}

std::string svg_scatter(const std::vector<ScatterPoint>& points, const ChartOptions& opts) {
  Range xr;
  Range yr;
  std::map<std::string, int> groups;
  for (const auto& p : points) {
    xr.add(p.x);
    yr.add(p.y);
    groups.emplace(p.group, 0);
  }
  xr.finish();
  yr.finish();
  int next = 0;
  for (auto& [name, idx] : groups) idx = next++;
  ChartOptions o = opts;
  o.log_x = false;
  const Canvas c(o, xr, yr);
  std::string out = c.frame();
  for (const auto& p : points) {
    const char* colour = kPalette[groups[p.group] % std::size(kPalette)];
    out += "<circle cx=\"" + num(c.tx(p.x)) + "\" cy=\"" + num(c.ty(p.y)) + "\" r=\"2.5\" fill=\"" + colour +
           "\" fill-opacity=\"0.8\"/>\n";
  }
  for (const auto& [name, idx] : groups) {
    out += c.legend_entry(idx, name.empty() ? "(unlabeled)" : name, kPalette[idx % std::size(kPalette)]);
  }
  return out + "</svg>\n";
}

}  // namespace sarsfe
