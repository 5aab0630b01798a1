#include "homlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace homlab {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Axis {
  bool log = false;
  double lo = 0.0;
  double hi = 1.0;

  double t(double v) const { return log ? std::log10(v) : v; }
  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }

  void fit(const std::vector<double>& values) {
    double a = std::numeric_limits<double>::infinity(), b = -a;
    for (double v : values) {
      if (!usable(v)) continue;
      a = std::min(a, t(v));
      b = std::max(b, t(v));
    }
    if (!std::isfinite(a)) {
      a = 0.0;
      b = 1.0;
    }
    if (b - a < 1e-12) {
      const double pad = log ? 0.5 : std::max(0.5 * std::abs(a), 0.5);
      a -= pad;
      b += pad;
    }
    const double pad = 0.05 * (b - a);
    lo = a - pad;
    hi = b + pad;
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      const int first = static_cast<int>(std::floor(lo)), last = static_cast<int>(std::ceil(hi));
      if (last - first > 4) {
        const int step = (last - first) / 8 + 1;
        for (int e = static_cast<int>(std::ceil(lo)); e <= hi; e += step) out.push_back(std::pow(10.0, e));
        return out;
      }
      for (int e = first; e <= last; ++e) {
        for (double m : {1.0, 2.0, 5.0}) {
          const double v = m * std::pow(10.0, e);
          if (std::log10(v) >= lo && std::log10(v) <= hi) out.push_back(v);
        }
      }
      if (out.size() >= 2) return out;
      out = {std::pow(10.0, lo + 0.1 * (hi - lo)), std::pow(10.0, hi - 0.1 * (hi - lo))};
      return out;
    }
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-12 * step; v += step) {
      out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    }
    return out;
  }
};

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void Table::add(std::vector<std::string> row) {
  if (row.size() != columns.size()) {
    throw std::logic_error("table " + name + ": row has " + std::to_string(row.size()) + " fields, header has " +
                           std::to_string(columns.size()));
  }
  rows.push_back(std::move(row));
}

std::string csv_text(const Table& t) {
  std::string out = "# homlab " HOMLAB_VERSION "\n";
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (k) out += ',';
      out += csv_field(fields[k]);
    }
    out += '\n';
  };
  line(t.columns);
  for (const auto& r : t.rows) line(r);
  return out;
}

Check Check::at_most(std::string name, double value, double threshold) {
  return {std::move(name), value, "<=", threshold, value <= threshold};
}

Check Check::at_least(std::string name, double value, double threshold) {
  return {std::move(name), value, ">=", threshold, value >= threshold};
}

Check Check::equals(std::string name, double value, double expected) {
  return {std::move(name), value, "==", expected, value == expected};
}

Check Check::holds(std::string name, bool ok) { return {std::move(name), ok ? 1.0 : 0.0, "holds", 1.0, ok}; }

bool PipelineReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check* PipelineReport::find(const std::string& check) const {
  for (const auto& c : checks) {
    if (c.name == check) return &c;
  }
  return nullptr;
}

std::string render_svg(const Plot& p) {
  const double W = 760, H = 440, left = 78, right = 250, top = 40, bottom = 56;
  const double pw = W - left - right, ph = H - top - bottom;
  Axis ax{p.logx}, ay{p.logy};
  std::vector<double> xs, ys;
  for (const auto& s : p.series) {
    for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
      if (ax.usable(s.x[k]) && ay.usable(s.y[k])) {
        xs.push_back(s.x[k]);
        ys.push_back(s.y[k]);
      }
    }
  }
  ax.fit(xs);
  ay.fit(ys);
  auto px = [&](double v) { return left + (ax.t(v) - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double v) { return top + ph - (ay.t(v) - ay.lo) / (ay.hi - ay.lo) * ph; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + coord(W) + "\" height=\"" + coord(H) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + coord(left + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
       xml_escape(p.title) + "</text>\n";
  s += "<rect x=\"" + coord(left) + "\" y=\"" + coord(top) + "\" width=\"" + coord(pw) + "\" height=\"" + coord(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double v : ax.ticks()) {
    const double x = px(v);
    s += "<line x1=\"" + coord(x) + "\" y1=\"" + coord(top + ph) + "\" x2=\"" + coord(x) + "\" y2=\"" +
         coord(top + ph + 5) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + coord(x) + "\" y=\"" + coord(top + ph + 18) + "\" text-anchor=\"middle\">" + tick_label(v) +
         "</text>\n";
  }
  for (double v : ay.ticks()) {
    const double y = py(v);
    s += "<line x1=\"" + coord(left - 5) + "\" y1=\"" + coord(y) + "\" x2=\"" + coord(left) + "\" y2=\"" + coord(y) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + coord(left - 8) + "\" y=\"" + coord(y + 4) + "\" text-anchor=\"end\">" + tick_label(v) +
         "</text>\n";
  }
  s += "<text x=\"" + coord(left + pw / 2) + "\" y=\"" + coord(H - 14) + "\" text-anchor=\"middle\">" +
       xml_escape(p.xlabel) + (p.logx ? " (log)" : "") + "</text>\n";
  s += "<text transform=\"translate(18," + coord(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       xml_escape(p.ylabel) + (p.logy ? " (log)" : "") + "</text>\n";

  for (std::size_t k = 0; k < p.series.size(); ++k) {
    const auto& ser = p.series[k];
    const std::string color = kPalette[k % (sizeof kPalette / sizeof *kPalette)];
    std::string pts, marks;
    for (std::size_t q = 0; q < ser.x.size() && q < ser.y.size(); ++q) {
      if (!ax.usable(ser.x[q]) || !ay.usable(ser.y[q])) continue;
      const std::string cx = coord(px(ser.x[q])), cy = coord(py(ser.y[q]));
      pts += (pts.empty() ? "" : " ") + cx + "," + cy;
      marks += "<circle cx=\"" + cx + "\" cy=\"" + cy + "\" r=\"3\" fill=\"" + color + "\"/>\n";
    }
    if (!pts.empty()) {
      s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n" + marks;
    }
    const double ly = top + 12 + 18.0 * static_cast<double>(k);
    s += "<line x1=\"" + coord(left + pw + 12) + "\" y1=\"" + coord(ly) + "\" x2=\"" + coord(left + pw + 32) +
         "\" y2=\"" + coord(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + coord(left + pw + 38) + "\" y=\"" + coord(ly + 4) + "\">" + xml_escape(ser.label) +
         "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace homlab
