#include "aidtwin/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "aidtwin/error.hpp"
#include "aidtwin/records.hpp"

namespace aidtwin {

namespace {

using records::format_number;
using records::trim;

constexpr std::int64_t kSecondsPerMinute = 60;

[[noreturn]] void parse_fail(int line, const std::string& msg) {
  throw Error(errc::parse_error, "line " + std::to_string(line) + ": " + msg);
}

template <typename Int>
bool read_int(std::string_view s, std::size_t pos, std::size_t len, Int& out) {
  if (pos + len > s.size()) return false;
  auto first = s.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, out);
  return ec == std::errc{} && ptr == first + len;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

struct CsvLine {
  int line = 0;
  std::vector<std::string_view> fields;
};

// Data rows after a mandatory header; blank lines are skipped.
std::vector<CsvLine> csv_rows(std::string_view text, std::string_view header) {
  std::vector<CsvLine> rows;
  int line_no = 0;
  bool seen_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    auto line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    if (!seen_header) {
      if (line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
      if (line != header) {
        parse_fail(line_no, "expected header '" + std::string(header) + "'");
      }
      seen_header = true;
      continue;
    }
    rows.push_back({line_no, split_csv(line)});
  }
  if (!seen_header) throw Error(errc::parse_error, "empty file: missing header");
  return rows;
}

double parse_value(const CsvLine& row, std::string_view field) {
  auto v = records::parse_number(field);
  if (!v) parse_fail(row.line, "value '" + std::string(field) + "' is not a finite number");
  if (*v < 0) parse_fail(row.line, "negative value " + std::string(field));
  return *v;
}

std::int64_t parse_row_timestamp(const CsvLine& row) {
  try {
    return parse_timestamp(row.fields[0]);
  } catch (const Error& e) {
    parse_fail(row.line, e.what());
  }
}

}  // namespace

std::int64_t parse_timestamp(std::string_view s) {
  s = trim(s);
  // YYYY-MM-DDTHH:MM:SS
  int year = 0;
  unsigned month = 0, day = 0, hour = 0, minute = 0, second = 0;
  const bool ok = s.size() >= 19 && read_int(s, 0, 4, year) && s[4] == '-' &&
                  read_int(s, 5, 2, month) && s[7] == '-' && read_int(s, 8, 2, day) &&
                  (s[10] == 'T' || s[10] == ' ') && read_int(s, 11, 2, hour) && s[13] == ':' &&
                  read_int(s, 14, 2, minute) && s[16] == ':' && read_int(s, 17, 2, second);
  if (!ok) throw Error(errc::parse_error, "malformed timestamp '" + std::string(s) + "'");

  std::string_view rest = s.substr(19);
  if (!rest.empty() && rest.front() == '.') {
    rest.remove_prefix(1);
    auto digits = rest.find_first_not_of("0123456789");
    if (digits == 0) throw Error(errc::parse_error, "malformed fraction in '" + std::string(s) + "'");
    rest = digits == std::string_view::npos ? std::string_view{} : rest.substr(digits);
  }
  if (!(rest.empty() || rest == "Z" || rest == "+00:00" || rest == "+0000")) {
    throw Error(errc::parse_error, "timestamp '" + std::string(s) + "' is not UTC");
  }

  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) {
    throw Error(errc::parse_error, "invalid date/time in '" + std::string(s) + "'");
  }
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + hour * 3600 + minute * 60 + second;
}

std::string format_timestamp(std::int64_t epoch) {
  using namespace std::chrono;
  const auto days = static_cast<int>(epoch >= 0 ? epoch / 86400 : (epoch - 86399) / 86400);
  const std::int64_t secs = epoch - static_cast<std::int64_t>(days) * 86400;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(secs / 3600), static_cast<int>((secs % 3600) / 60),
                static_cast<int>(secs % 60));
  return buf;
}

CgmSeries parse_cgm_csv(std::string_view text, const CgmLoadOptions& options) {
  if (!(options.grid_minutes > 0) || options.max_gap_minutes < options.grid_minutes) {
    throw Error(errc::invalid_argument, "CGM grid must be > 0 and no larger than the gap limit");
  }
  struct Sample {
    std::int64_t epoch;
    double value;
    std::size_t order;
  };
  std::vector<Sample> samples;
  for (const auto& row : csv_rows(text, "timestamp,glucose_mgdl")) {
    if (row.fields.size() != 2) parse_fail(row.line, "expected 2 fields");
    samples.push_back({parse_row_timestamp(row), parse_value(row, row.fields[1]), samples.size()});
  }
  if (samples.empty()) throw Error(errc::parse_error, "CGM file has no data rows");

  std::stable_sort(samples.begin(), samples.end(),
                   [](const auto& a, const auto& b) { return a.epoch < b.epoch; });
  // Last row in file order wins on equal timestamps.
  std::vector<Sample> unique;
  for (const auto& s : samples) {
    if (!unique.empty() && unique.back().epoch == s.epoch) {
      if (s.order > unique.back().order) unique.back() = s;
    } else {
      unique.push_back(s);
    }
  }

  CgmSeries out;
  const double grid_seconds = options.grid_minutes * kSecondsPerMinute;
  const std::int64_t origin = unique.front().epoch;
  std::map<long, double> slots;
  for (const auto& s : unique) {
    const long slot = std::lround(static_cast<double>(s.epoch - origin) / grid_seconds);
    if (slots.count(slot)) {
      out.warnings.push_back("sample at " + format_timestamp(s.epoch) +
                             " shares a grid slot with an earlier sample; keeping the later one");
    }
    slots[slot] = s.value;
  }

  // Split into contiguous runs where consecutive slots are within the gap limit.
  const long max_gap_slots =
      static_cast<long>(std::floor(options.max_gap_minutes / options.grid_minutes + 1e-9));
  struct Run {
    long first;
    long last;
  };
  std::vector<Run> runs;
  long prev = slots.begin()->first;
  runs.push_back({prev, prev});
  for (auto it = std::next(slots.begin()); it != slots.end(); ++it) {
    if (it->first - prev > max_gap_slots) {
      runs.push_back({it->first, it->first});
    } else {
      runs.back().last = it->first;
    }
    prev = it->first;
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].last - runs[i].first > runs[best].last - runs[best].first) best = i;
  }
  auto slot_epoch = [&](long slot) {
    return origin + static_cast<std::int64_t>(std::llround(static_cast<double>(slot) * grid_seconds));
  };
  if (runs.size() > 1) {
    for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
      out.warnings.push_back("gap from " + format_timestamp(slot_epoch(runs[i].last)) + " to " +
                             format_timestamp(slot_epoch(runs[i + 1].first)) +
                             " exceeds " + format_number(options.max_gap_minutes) +
                             " min; record split");
    }
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (i == best) continue;
      out.warnings.push_back("discarded span " + format_timestamp(slot_epoch(runs[i].first)) +
                             " .. " + format_timestamp(slot_epoch(runs[i].last)));
    }
  }

  const Run run = runs[best];
  out.origin_epoch = slot_epoch(run.first);
  out.trace.t0 = 0.0;
  out.trace.dt = options.grid_minutes;
  auto it = slots.find(run.first);
  out.trace.samples.push_back(it->second);
  for (auto next = std::next(it); next != slots.end() && next->first <= run.last; it = next++) {
    const long span = next->first - it->first;
    for (long k = 1; k < span; ++k) {
      const double w = static_cast<double>(k) / static_cast<double>(span);
      out.trace.samples.push_back(it->second + w * (next->second - it->second));
    }
    out.trace.samples.push_back(next->second);
  }
  out.trace.insulin_delivered.assign(out.trace.samples.size(), 0.0);
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(errc::io_error, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

CgmSeries load_cgm(const std::filesystem::path& path, const CgmLoadOptions& options) {
  return parse_cgm_csv(read_text_file(path), options);
}

PumpLog parse_pump_csv(std::string_view text) {
  PumpLog log;
  for (const auto& row : csv_rows(text, "timestamp,kind,value")) {
    if (row.fields.size() != 3) parse_fail(row.line, "expected 3 fields");
    const auto epoch = parse_row_timestamp(row);
    const auto kind = row.fields[1];
    const double value = parse_value(row, row.fields[2]);
    if (kind == "basal") {
      log.basal.push_back({epoch, value});
    } else if (kind == "bolus") {
      log.bolus.push_back({epoch, value});
    } else if (kind == "meal") {
      log.meal.push_back({epoch, value});
    } else {
      parse_fail(row.line, "unknown kind '" + std::string(kind) + "' (expected basal, bolus or meal)");
    }
  }
  auto by_time = [](const PumpEvent& a, const PumpEvent& b) { return a.epoch < b.epoch; };
  std::stable_sort(log.basal.begin(), log.basal.end(), by_time);
  std::stable_sort(log.bolus.begin(), log.bolus.end(), by_time);
  std::stable_sort(log.meal.begin(), log.meal.end(), by_time);
  return log;
}

PumpLog load_pump(const std::filesystem::path& path) { return parse_pump_csv(read_text_file(path)); }

UsageRecord make_usage_record(const CgmSeries& cgm, const PumpLog& pump) {
  UsageRecord rec;
  rec.cgm = cgm.trace;
  rec.origin_epoch = cgm.origin_epoch;
  const double end = rec.cgm.end_time();
  auto minutes = [&](std::int64_t epoch) {
    return static_cast<double>(epoch - cgm.origin_epoch) / static_cast<double>(kSecondsPerMinute);
  };

  std::optional<double> rate_before;
  for (const auto& e : pump.basal) {
    const double t = minutes(e.epoch);
    if (t <= 0.0) {
      rate_before = e.value;
    } else if (t <= end) {
      if (rec.basal.empty() && rate_before) rec.basal.push_back({0.0, *rate_before});
      rec.basal.push_back({t, e.value});
    }
  }
  if (rec.basal.empty() && rate_before) rec.basal.push_back({0.0, *rate_before});

  auto within = [&](const std::vector<PumpEvent>& events, std::vector<TimedValue>& out) {
    for (const auto& e : events) {
      const double t = minutes(e.epoch);
      if (t >= 0.0 && t <= end) out.push_back({t, e.value});
    }
  };
  within(pump.bolus, rec.boluses);
  within(pump.meal, rec.meals);
  return rec;
}

std::string write_cgm_csv(const GlucoseTrace& trace, std::int64_t origin_epoch) {
  std::ostringstream os;
  os << "timestamp,glucose_mgdl\n";
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const auto epoch = origin_epoch + std::llround((trace.time(i) - trace.t0) * kSecondsPerMinute);
    os << format_timestamp(epoch) << ',' << format_number(trace.samples[i]) << '\n';
  }
  return os.str();
}

std::string write_pump_csv(const UsageRecord& record) {
  std::ostringstream os;
  os << "timestamp,kind,value\n";
  auto emit = [&](const std::vector<TimedValue>& events, const char* kind) {
    for (const auto& e : events) {
      os << format_timestamp(record.origin_epoch + std::llround(e.time * kSecondsPerMinute)) << ','
         << kind << ',' << format_number(e.value) << '\n';
    }
  };
  emit(record.basal, "basal");
  emit(record.boluses, "bolus");
  emit(record.meals, "meal");
  return os.str();
}

}  // namespace aidtwin
