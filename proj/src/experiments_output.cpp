#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "frlab/errors.hpp"
#include "frlab/experiments.hpp"

namespace frlab {

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

double parse_real(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw IoError("bad real '" + s + "' in CSV");
  return v;
}

long long parse_int(const std::string& s) {
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw IoError("bad integer '" + s + "' in CSV");
  return v;
}

}  // namespace

void emit_csv(const SweepResult& result, const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  out << kSweepCsvHeader << '\n';
  for (const auto& r : result.rows) {
    out << csv_quote(r.design) << ',' << format_real(r.gamma) << ',' << r.k << ',' << r.n << ',' << r.p << ','
        << r.replicate << ',' << csv_quote(r.estimator) << ',' << format_real(r.risk) << ','
        << format_real(r.excess_vs_oracle) << ',' << format_real(r.excess_vs_star) << ',' << format_real(r.null_risk)
        << ',' << format_real(r.interp_residual) << ',' << format_real(r.coef_norm_sq) << ','
        << (r.converged ? "true" : "false") << '\n';
  }
  finish(out, path);
}

void emit_bounds_csv(const std::vector<BoundRow>& rows, const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  out << kBoundsCsvHeader << '\n';
  for (const auto& r : rows) {
    out << format_real(r.gamma) << ',' << r.k << ',' << r.n << ',' << r.p << ',' << csv_quote(r.bound_name) << ','
        << format_real(r.value) << ',' << csv_quote(r.conditions_json) << '\n';
  }
  finish(out, path);
}

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kSweepCsvHeader) throw IoError("unexpected header in " + path.string());
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 14) throw IoError("wrong field count in " + path.string());
    SweepRow r;
    r.design = f[0];
    r.gamma = parse_real(f[1]);
    r.k = static_cast<Eigen::Index>(parse_int(f[2]));
    r.n = static_cast<Eigen::Index>(parse_int(f[3]));
    r.p = static_cast<Eigen::Index>(parse_int(f[4]));
    r.replicate = static_cast<int>(parse_int(f[5]));
    r.estimator = f[6];
    r.risk = parse_real(f[7]);
    r.excess_vs_oracle = parse_real(f[8]);
    r.excess_vs_star = parse_real(f[9]);
    r.null_risk = parse_real(f[10]);
    r.interp_residual = parse_real(f[11]);
    r.coef_norm_sq = parse_real(f[12]);
    if (f[13] != "true" && f[13] != "false") throw IoError("bad converged flag in " + path.string());
    r.converged = f[13] == "true";
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Aggregation

std::vector<std::string> estimator_labels(const SweepResult& result) {
  std::vector<std::string> labels;
  for (const auto& r : result.rows) {
    if (std::find(labels.begin(), labels.end(), r.estimator) == labels.end()) labels.push_back(r.estimator);
  }
  std::sort(labels.begin(), labels.end());
  return labels;
}

std::vector<SeriesPoint> aggregate_excess(const SweepResult& result, const std::string& estimator) {
  struct Acc {
    SeriesPoint pt;
    double sum = 0.0;
    double sum_sq = 0.0;
  };
  std::map<std::tuple<double, Eigen::Index, Eigen::Index, Eigen::Index>, Acc> groups;
  for (const auto& r : result.rows) {
    if (r.estimator != estimator || !std::isfinite(r.excess_vs_oracle)) continue;
    Acc& a = groups[{r.gamma, r.k, r.n, r.p}];
    a.pt.gamma = r.gamma;
    a.pt.k = r.k;
    a.pt.n = r.n;
    a.pt.p = r.p;
    a.sum += r.excess_vs_oracle;
    a.sum_sq += r.excess_vs_oracle * r.excess_vs_oracle;
    ++a.pt.count;
  }
  std::vector<SeriesPoint> out;
  for (auto& [key, a] : groups) {
    const double c = a.pt.count;
    a.pt.mean = a.sum / c;
    if (a.pt.count > 1) {
      const double var = std::max(0.0, (a.sum_sq - c * a.pt.mean * a.pt.mean) / (c - 1.0));
      a.pt.se = std::sqrt(var / c);
    }
    out.push_back(a.pt);
  }
  return out;
}

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr double kClampFloor = 1e-12;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
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

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  bool log = false;
  double pix_lo = 0.0;
  double pix_hi = 1.0;

  double map(double v) const {
    const double a = log ? std::log10(lo) : lo;
    const double b = log ? std::log10(hi) : hi;
    const double t = b > a ? ((log ? std::log10(v) : v) - a) / (b - a) : 0.5;
    return pix_lo + t * (pix_hi - pix_lo);
  }
};

void widen(Axis& ax) {
  if (ax.log) {
    if (ax.hi <= ax.lo) {
      ax.lo /= 2.0;
      ax.hi *= 2.0;
    }
  } else if (ax.hi <= ax.lo) {
    ax.lo -= 0.5;
    ax.hi += 0.5;
  }
}

}  // namespace

std::string render_svg(const SweepResult& result, const PlotOptions& options) {
  if (result.rows.empty()) throw ContractViolation("render_svg: result is empty");
  std::vector<std::string> labels = estimator_labels(result);
  std::vector<std::vector<SeriesPoint>> series;
  if (options.per_estimator_series) {
    for (const auto& l : labels) series.push_back(aggregate_excess(result, l));
  } else {
    // Pool every estimator into one series.
    SweepResult pooled = result;
    for (auto& r : pooled.rows) r.estimator = "all";
    labels = {"all"};
    series.push_back(aggregate_excess(pooled, "all"));
  }

  const double width = 800, height = 520, left = 80, right = 190, top = 50, bottom = 60;
  Axis ax{0, 0, options.log_gamma_axis, left, width - right};
  Axis ay{0, 0, options.log_y, height - bottom, top};
  bool first = true;
  bool clamped = false;
  for (const auto& s : series) {
    for (const auto& pt : s) {
      double lo = pt.mean - pt.se;
      double hi = pt.mean + pt.se;
      if (options.log_y) {
        if (pt.mean <= kClampFloor) clamped = true;
        lo = std::max(lo, kClampFloor);
        hi = std::max(hi, kClampFloor);
      }
      const double gx = options.log_gamma_axis ? std::max(pt.gamma, 1e-300) : pt.gamma;
      if (first) {
        ax.lo = ax.hi = gx;
        ay.lo = lo;
        ay.hi = hi;
        first = false;
      }
      ax.lo = std::min(ax.lo, gx);
      ax.hi = std::max(ax.hi, gx);
      ay.lo = std::min(ay.lo, lo);
      ay.hi = std::max(ay.hi, hi);
    }
  }
  if (first) {
    ax.lo = options.log_gamma_axis ? 0.1 : 0.0;
    ax.hi = 1.0;
    ay.lo = options.log_y ? kClampFloor : 0.0;
    ay.hi = 1.0;
  }
  widen(ax);
  widen(ay);

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  if (!options.title.empty()) {
    svg << "<text x=\"" << fmt(width / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
        << xml_escape(options.title) << "</text>\n";
  }
  // Frame and axis labels.
  svg << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(width - left - right)
      << "\" height=\"" << fmt(height - top - bottom) << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << fmt((left + width - right) / 2) << "\" y=\"" << fmt(height - 15)
      << "\" text-anchor=\"middle\">gamma = p/n</text>\n";
  svg << "<text x=\"18\" y=\"" << fmt((top + height - bottom) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << fmt((top + height - bottom) / 2) << ")\">mean excess risk</text>\n";
  for (const Axis* a : {&ax, &ay}) {
    const bool horizontal = a == &ax;
    for (int i = 0; i <= 4; ++i) {
      const double t = i / 4.0;
      const double v = a->log ? std::pow(10.0, std::log10(a->lo) + t * (std::log10(a->hi) - std::log10(a->lo)))
                              : a->lo + t * (a->hi - a->lo);
      const double pix = a->map(v);
      if (horizontal) {
        svg << "<line x1=\"" << fmt(pix) << "\" y1=\"" << fmt(height - bottom) << "\" x2=\"" << fmt(pix) << "\" y2=\""
            << fmt(height - bottom + 5) << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << fmt(pix) << "\" y=\"" << fmt(height - bottom + 18) << "\" text-anchor=\"middle\">"
            << tick_label(v) << "</text>\n";
      } else {
        svg << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(pix) << "\" x2=\"" << fmt(left) << "\" y2=\""
            << fmt(pix) << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(pix + 4) << "\" text-anchor=\"end\">"
            << tick_label(v) << "</text>\n";
      }
    }
  }

  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof kPalette / sizeof kPalette[0])];
    const auto& pts = series[s];
    auto yval = [&](double v) { return options.log_y ? std::max(v, kClampFloor) : v; };
    if (pts.size() > 1) {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (size_t i = 0; i < pts.size(); ++i) {
        svg << (i ? " " : "") << fmt(ax.map(pts[i].gamma)) << ',' << fmt(ay.map(yval(pts[i].mean)));
      }
      svg << "\"/>\n";
    }
    for (const auto& pt : pts) {
      const double x = ax.map(pt.gamma);
      if (pt.se > 0.0) {
        svg << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(ay.map(yval(pt.mean - pt.se))) << "\" x2=\"" << fmt(x)
            << "\" y2=\"" << fmt(ay.map(yval(pt.mean + pt.se))) << "\" stroke=\"" << color << "\"/>\n";
      }
      svg << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(ay.map(yval(pt.mean))) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
    const double ly = top + 10 + 18.0 * static_cast<double>(s);
    svg << "<line x1=\"" << fmt(width - right + 15) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(width - right + 35)
        << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << fmt(width - right + 40) << "\" y=\"" << fmt(ly + 4) << "\">" << xml_escape(labels[s])
        << "</text>\n";
  }
  if (clamped) {
    svg << "<text x=\"" << fmt(left + 6) << "\" y=\"" << fmt(height - bottom - 6)
        << "\" font-size=\"10\" fill=\"gray\">values at or below 1e-12 clamped to 1e-12</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_svg_plot(const SweepResult& result, const std::filesystem::path& path, const PlotOptions& options) {
  const std::string text = render_svg(result, options);
  std::ofstream out = open_for_write(path);
  out << text;
  finish(out, path);
}

}  // namespace frlab
