#include "aidtwin/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "aidtwin/error.hpp"
#include "aidtwin/records.hpp"

namespace aidtwin {

namespace {

using records::format_number;

constexpr std::string_view kTraceHeader = "t_min,glucose_mgdl,insulin_U";

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string escape(std::string_view s) {
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

// Round tick step (1, 2 or 5 times a power of ten) giving about `target` ticks.
double tick_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

std::string write_trace_csv(const GlucoseTrace& trace) {
  std::ostringstream os;
  os << kTraceHeader << '\n';
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double u = i < trace.insulin_delivered.size() ? trace.insulin_delivered[i] : 0.0;
    os << format_number(trace.time(i)) << ',' << format_number(trace.samples[i]) << ','
       << format_number(u) << '\n';
  }
  return os.str();
}

GlucoseTrace parse_trace_csv(std::string_view text) {
  GlucoseTrace trace;
  std::vector<double> times;
  std::vector<int> lines;  // source line of each row
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    const auto t = records::trim(line);
    if (t.empty()) continue;
    if (!header) {
      if (t != kTraceHeader) {
        throw Error(errc::parse_error, "line " + std::to_string(number) + ": expected header '" +
                                           std::string(kTraceHeader) + "'");
      }
      header = true;
      continue;
    }
    std::vector<double> cols;
    std::size_t start = 0;
    while (start <= t.size()) {
      const auto comma = t.find(',', start);
      const auto end = comma == std::string_view::npos ? t.size() : comma;
      auto v = records::parse_number(records::trim(t.substr(start, end - start)));
      if (!v) throw Error(errc::parse_error, "line " + std::to_string(number) + ": malformed number");
      cols.push_back(*v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (cols.size() != 3) {
      throw Error(errc::parse_error, "line " + std::to_string(number) + ": expected 3 columns");
    }
    times.push_back(cols[0]);
    lines.push_back(number);
    trace.samples.push_back(cols[1]);
    trace.insulin_delivered.push_back(cols[2]);
  }
  if (!header) throw Error(errc::parse_error, "trace CSV is empty");
  if (times.empty()) throw Error(errc::parse_error, "trace CSV has no rows");
  trace.t0 = times.front();
  trace.dt = times.size() > 1 ? times[1] - times[0] : 5.0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (std::abs(times[i] - trace.time(i)) > 1e-6 * std::max(1.0, std::abs(times[i]))) {
      throw Error(errc::parse_error,
                  "line " + std::to_string(lines[i]) + ": rows are not uniformly spaced in time");
    }
  }
  require_valid(trace);
  return trace;
}

std::string render_svg(const GlucoseTrace& trace, const ChartOptions& o) {
  require_valid(trace);
  const double left = 56, right = 16, top = 32, bottom = 40;
  const double w = o.width - left - right;
  const double h = o.height - top - bottom;

  const auto [mn, mx] = std::minmax_element(trace.samples.begin(), trace.samples.end());
  const double gstep = 50.0;
  const double gmin = std::min(40.0, std::floor(*mn / gstep) * gstep);
  const double gmax = std::max(250.0, std::ceil(*mx / gstep) * gstep);
  const double t0 = trace.t0;
  const double t1 = trace.size() > 1 ? trace.end_time() : trace.t0 + trace.dt;

  auto x = [&](double t) { return left + (t - t0) / (t1 - t0) * w; };
  auto y = [&](double g) { return top + (gmax - g) / (gmax - gmin) * h; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\"" << o.height
     << "\" viewBox=\"0 0 " << o.width << ' ' << o.height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << px(left) << "\" y=\"20\" font-size=\"14\">" << escape(o.title) << "</text>\n";
  os << "<rect class=\"target-band\" x=\"" << px(left) << "\" y=\"" << px(y(o.band_high)) << "\" width=\""
     << px(w) << "\" height=\"" << px(y(o.band_low) - y(o.band_high))
     << "\" fill=\"#c8e6c9\" fill-opacity=\"0.6\"/>\n";

  for (double g = gmin; g <= gmax + 1e-9; g += gstep) {
    os << "<line x1=\"" << px(left) << "\" x2=\"" << px(left + w) << "\" y1=\"" << px(y(g)) << "\" y2=\""
       << px(y(g)) << "\" stroke=\"#e0e0e0\"/>\n";
    os << "<text x=\"" << px(left - 6) << "\" y=\"" << px(y(g) + 4) << "\" text-anchor=\"end\">"
       << format_number(g) << "</text>\n";
  }
  const double ts = tick_step(t1 - t0, 8);
  for (double t = std::ceil(t0 / ts) * ts; t <= t1 + 1e-9; t += ts) {
    os << "<text x=\"" << px(x(t)) << "\" y=\"" << px(top + h + 16) << "\" text-anchor=\"middle\">"
       << format_number(t) << "</text>\n";
  }
  os << "<text x=\"" << px(left + w / 2) << "\" y=\"" << px(o.height - 6)
     << "\" text-anchor=\"middle\">time (min)</text>\n";
  os << "<text transform=\"translate(14 " << px(top + h / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << "glucose (mg/dL)</text>\n";

  os << "<polyline class=\"glucose\" fill=\"none\" stroke=\"#1565c0\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (i) os << ' ';
    os << px(x(trace.time(i))) << ',' << px(y(trace.samples[i]));
  }
  os << "\"/>\n";
  os << "<rect x=\"" << px(left) << "\" y=\"" << px(top) << "\" width=\"" << px(w) << "\" height=\""
     << px(h) << "\" fill=\"none\" stroke=\"#616161\"/>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace aidtwin
