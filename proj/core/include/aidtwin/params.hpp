#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aidtwin {

/// Patient-specific parameters of the extended Bergman minimal model.
///
/// Units: rates in 1/min, p3 in 1/min per uU/mL, glucose in mg/dL, insulin in
/// uU/mL, Vi in L, Vg in dL. Insulin input to the model is in mU/min, so that
/// u / Vi has units of uU/mL/min and the basal equilibrium input is n*Ib*Vi.
struct PatientParams {
  double p1 = 0.0;        // glucose effectiveness
  double p2 = 0.0;        // remote insulin action decay
  double p3 = 0.0;        // insulin action gain
  double n = 0.0;         // plasma insulin clearance
  double Gb = 0.0;        // basal glucose
  double Ib = 0.0;        // basal plasma insulin
  double Vi = 0.0;        // insulin distribution volume
  double Vg = 0.0;        // glucose distribution volume
  double k_emp = 0.0;     // gastric emptying rate
  double k_abs = 0.0;     // gut absorption rate
  double f_bio = 0.0;     // carbohydrate bioavailability, (0, 1]
  double alpha_ex = 0.0;  // exercise uptake gain, >= 0

  friend bool operator==(const PatientParams&, const PatientParams&) = default;
};

enum class Param : std::size_t {
  p1,
  p2,
  p3,
  n,
  Gb,
  Ib,
  Vi,
  Vg,
  k_emp,
  k_abs,
  f_bio,
  alpha_ex,
};

inline constexpr std::size_t kParamCount = 12;

inline constexpr std::array<Param, kParamCount> kAllParams = {
    Param::p1, Param::p2,    Param::p3,    Param::n,     Param::Gb,    Param::Ib,
    Param::Vi, Param::Vg,    Param::k_emp, Param::k_abs, Param::f_bio, Param::alpha_ex};

[[nodiscard]] double get(const PatientParams& params, Param which);
void set(PatientParams& params, Param which, double value);

/// Short name used in files and on the wire ("p1", "k_emp", ...).
[[nodiscard]] std::string_view param_name(Param which);
[[nodiscard]] std::optional<Param> parse_param_name(std::string_view name);

/// Every violated invariant, as human-readable lines. Empty when valid.
[[nodiscard]] std::vector<std::string> validate(const PatientParams& params);

/// Throws Error(invalid-params) listing every violation.
void require_valid(const PatientParams& params);

/// Literature-style adult profile used as the default twin and fit seed.
[[nodiscard]] PatientParams nominal_adult();

/// Basal insulin delivery that holds the model at its equilibrium, in mU/min.
[[nodiscard]] double equilibrium_insulin_input(const PatientParams& params);

/// Same equilibrium delivery expressed as a pump basal rate in U/h.
[[nodiscard]] double equilibrium_basal_rate(const PatientParams& params);

}  // namespace aidtwin
