#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "aidtwin/trace.hpp"

// Signal temporal logic over a single glucose signal with quantitative
// (robustness) semantics, discretized at the trace sample interval.
namespace aidtwin::stl {

enum class Op { ge, le, negation, conjunction, disjunction, always, eventually };

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  Op op = Op::ge;
  double threshold = 0.0;  // predicates: mg/dL
  double lo = 0.0;         // temporal operators: window [lo, hi] in minutes
  double hi = 0.0;
  FormulaPtr lhs;  // unary operand, or left operand
  FormulaPtr rhs;  // right operand of and/or
};

[[nodiscard]] FormulaPtr ge(double threshold);
[[nodiscard]] FormulaPtr le(double threshold);
[[nodiscard]] FormulaPtr negate(FormulaPtr f);
[[nodiscard]] FormulaPtr conj(FormulaPtr a, FormulaPtr b);
[[nodiscard]] FormulaPtr disj(FormulaPtr a, FormulaPtr b);
/// Throws Error(invalid-argument) unless 0 <= lo <= hi.
[[nodiscard]] FormulaPtr always(double lo, double hi, FormulaPtr f);
[[nodiscard]] FormulaPtr eventually(double lo, double hi, FormulaPtr f);

/// Prefix syntax, e.g. `and (always 0 1440 (ge 70)) (ev 0 60 (le 180))`.
/// Keywords: ge, le, not, and, or, always (alias G), ev (aliases eventually, F).
/// Parentheses around any subformula are optional.
[[nodiscard]] FormulaPtr parse_formula(std::string_view text);
[[nodiscard]] std::string to_string(const Formula& f);

[[nodiscard]] int depth(const Formula& f);

/// Maximum future time (min) the formula inspects beyond its evaluation time.
[[nodiscard]] double time_horizon(const Formula& f);

/// Robustness at every sample index where the formula is fully defined:
/// entry i is the robustness at trace.time(i). Window [lo, hi] covers sample
/// offsets ceil(lo/dt) .. floor(hi/dt); an empty window gives +inf (always)
/// or -inf (eventually).
[[nodiscard]] std::vector<double> robustness_signal(const Formula& f, const GlucoseTrace& trace);

/// Robustness at time t, which must fall on a sample. Throws
/// Error(insufficient-horizon) when some window reaches past the trace end.
[[nodiscard]] double robustness(const Formula& f, const GlucoseTrace& trace, double t);

}  // namespace aidtwin::stl
