#include "aidtwin/stl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <limits>

#include "aidtwin/error.hpp"
#include "aidtwin/records.hpp"

namespace aidtwin::stl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGridEps = 1e-9;

FormulaPtr make(Formula f) { return std::make_shared<const Formula>(std::move(f)); }

long window_first(double lo, double dt) { return static_cast<long>(std::ceil(lo / dt - kGridEps)); }
long window_last(double hi, double dt) { return static_cast<long>(std::floor(hi / dt + kGridEps)); }

// out[i] = min (or max) of in[i+first .. i+last] for i in [0, in.size() - last).
std::vector<double> sliding_extreme(const std::vector<double>& in, long first, long last,
                                    bool take_min) {
  const long n = static_cast<long>(in.size());
  const long len = std::max(0L, n - last);
  std::vector<double> out(static_cast<std::size_t>(len), take_min ? kInf : -kInf);
  if (first > last) return out;

  auto better = [&](double a, double b) { return take_min ? a <= b : a >= b; };
  std::deque<long> window;  // indices with monotone values
  long next = 0;
  for (long i = 0; i < len; ++i) {
    for (; next <= i + last; ++next) {
      while (!window.empty() && better(in[next], in[window.back()])) window.pop_back();
      window.push_back(next);
    }
    while (window.front() < i + first) window.pop_front();
    out[i] = in[window.front()];
  }
  return out;
}

std::vector<double> signal(const Formula& f, const GlucoseTrace& tr) {
  switch (f.op) {
    case Op::ge:
    case Op::le: {
      std::vector<double> out(tr.samples.size());
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = f.op == Op::ge ? tr.samples[i] - f.threshold : f.threshold - tr.samples[i];
      }
      return out;
    }
    case Op::negation: {
      auto out = signal(*f.lhs, tr);
      for (auto& v : out) v = -v;
      return out;
    }
    case Op::conjunction:
    case Op::disjunction: {
      auto a = signal(*f.lhs, tr);
      const auto b = signal(*f.rhs, tr);
      a.resize(std::min(a.size(), b.size()));
      for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = f.op == Op::conjunction ? std::min(a[i], b[i]) : std::max(a[i], b[i]);
      }
      return a;
    }
    case Op::always:
    case Op::eventually: {
      const long first = window_first(f.lo, tr.dt);
      const long last = window_last(f.hi, tr.dt);
      if (first > last) {
        // No sample falls in the window, so the operand is never inspected.
        const long len = std::max(0L, static_cast<long>(tr.samples.size()) - last);
        return std::vector<double>(static_cast<std::size_t>(len), f.op == Op::always ? kInf : -kInf);
      }
      return sliding_extreme(signal(*f.lhs, tr), first, last, f.op == Op::always);
    }
  }
  return {};
}

// --- parser ---------------------------------------------------------------

class Parser {
 public:
  explicit Parser(std::string_view text) {
    std::string cur;
    auto flush = [&] {
      if (!cur.empty()) tokens_.push_back(std::move(cur));
      cur.clear();
    };
    for (char c : text) {
      if (c == '(' || c == ')') {
        flush();
        tokens_.emplace_back(1, c);
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        flush();
      } else {
        cur.push_back(c);
      }
    }
    flush();
  }

  FormulaPtr parse_all() {
    auto f = formula();
    if (pos_ != tokens_.size()) fail("unexpected trailing token '" + tokens_[pos_] + "'");
    return f;
  }

 private:
  FormulaPtr formula() {
    const auto tok = next("formula");
    if (tok == "(") {
      auto f = formula();
      expect(")");
      return f;
    }
    if (tok == "ge") return ge(number());
    if (tok == "le") return le(number());
    if (tok == "not") return negate(formula());
    if (tok == "and" || tok == "or") {
      auto a = formula();
      auto b = formula();
      return tok == "and" ? conj(std::move(a), std::move(b)) : disj(std::move(a), std::move(b));
    }
    if (tok == "always" || tok == "G" || tok == "ev" || tok == "eventually" || tok == "F") {
      const double lo = number();
      const double hi = number();
      auto child = formula();
      const bool is_always = tok == "always" || tok == "G";
      return is_always ? always(lo, hi, std::move(child)) : eventually(lo, hi, std::move(child));
    }
    fail("unknown operator '" + tok + "'");
  }

  double number() {
    const auto tok = next("number");
    auto v = records::parse_number(tok);
    if (!v) fail("expected a number, got '" + tok + "'");
    return *v;
  }

  std::string next(const char* what) {
    if (pos_ >= tokens_.size()) fail(std::string("unexpected end of formula, expected ") + what);
    return tokens_[pos_++];
  }

  void expect(const char* tok) {
    if (next(tok) != tok) fail(std::string("expected '") + tok + "'");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(errc::parse_error, "STL formula: " + msg);
  }

  std::vector<std::string> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

FormulaPtr ge(double threshold) { return make({Op::ge, threshold, 0, 0, nullptr, nullptr}); }
FormulaPtr le(double threshold) { return make({Op::le, threshold, 0, 0, nullptr, nullptr}); }
FormulaPtr negate(FormulaPtr f) { return make({Op::negation, 0, 0, 0, std::move(f), nullptr}); }
FormulaPtr conj(FormulaPtr a, FormulaPtr b) {
  return make({Op::conjunction, 0, 0, 0, std::move(a), std::move(b)});
}
FormulaPtr disj(FormulaPtr a, FormulaPtr b) {
  return make({Op::disjunction, 0, 0, 0, std::move(a), std::move(b)});
}

namespace {
void check_interval(double lo, double hi) {
  if (!(lo >= 0.0 && lo <= hi) || !std::isfinite(hi)) {
    throw Error(errc::invalid_argument, "temporal interval must satisfy 0 <= a <= b");
  }
}
}  // namespace

FormulaPtr always(double lo, double hi, FormulaPtr f) {
  check_interval(lo, hi);
  return make({Op::always, 0, lo, hi, std::move(f), nullptr});
}

FormulaPtr eventually(double lo, double hi, FormulaPtr f) {
  check_interval(lo, hi);
  return make({Op::eventually, 0, lo, hi, std::move(f), nullptr});
}

FormulaPtr parse_formula(std::string_view text) { return Parser(text).parse_all(); }

std::string to_string(const Formula& f) {
  using records::format_number;
  auto wrap = [](const Formula& g) { return "(" + to_string(g) + ")"; };
  switch (f.op) {
    case Op::ge: return "ge " + format_number(f.threshold);
    case Op::le: return "le " + format_number(f.threshold);
    case Op::negation: return "not " + wrap(*f.lhs);
    case Op::conjunction: return "and " + wrap(*f.lhs) + " " + wrap(*f.rhs);
    case Op::disjunction: return "or " + wrap(*f.lhs) + " " + wrap(*f.rhs);
    case Op::always:
      return "always " + format_number(f.lo) + " " + format_number(f.hi) + " " + wrap(*f.lhs);
    case Op::eventually:
      return "ev " + format_number(f.lo) + " " + format_number(f.hi) + " " + wrap(*f.lhs);
  }
  return {};
}

int depth(const Formula& f) {
  switch (f.op) {
    case Op::ge:
    case Op::le: return 1;
    case Op::conjunction:
    case Op::disjunction: return 1 + std::max(depth(*f.lhs), depth(*f.rhs));
    default: return 1 + depth(*f.lhs);
  }
}

double time_horizon(const Formula& f) {
  switch (f.op) {
    case Op::ge:
    case Op::le: return 0.0;
    case Op::negation: return time_horizon(*f.lhs);
    case Op::conjunction:
    case Op::disjunction: return std::max(time_horizon(*f.lhs), time_horizon(*f.rhs));
    case Op::always:
    case Op::eventually: return f.hi + time_horizon(*f.lhs);
  }
  return 0.0;
}

std::vector<double> robustness_signal(const Formula& f, const GlucoseTrace& trace) {
  require_valid(trace);
  return signal(f, trace);
}

double robustness(const Formula& f, const GlucoseTrace& trace, double t) {
  require_valid(trace);
  const double pos = (t - trace.t0) / trace.dt;
  const long index = std::lround(pos);
  if (std::abs(pos - static_cast<double>(index)) > kGridEps * std::max(1.0, std::abs(pos)) ||
      index < 0 || index >= static_cast<long>(trace.size())) {
    throw Error(errc::invalid_argument,
                "evaluation time " + records::format_number(t) + " is not a trace sample time");
  }
  const auto sig = signal(f, trace);
  if (index >= static_cast<long>(sig.size())) {
    throw Error(errc::insufficient_horizon,
                "formula needs " + records::format_number(time_horizon(f)) +
                    " min after t=" + records::format_number(t) + " but the trace ends at " +
                    records::format_number(trace.end_time()) + " min");
  }
  return sig[static_cast<std::size_t>(index)];
}

}  // namespace aidtwin::stl
