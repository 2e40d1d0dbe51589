#include "aidtwin/params.hpp"

#include <cmath>
#include <sstream>

#include "aidtwin/error.hpp"
#include "aidtwin/units.hpp"

namespace aidtwin {

namespace {

double* field(PatientParams& p, Param which) {
  switch (which) {
    case Param::p1: return &p.p1;
    case Param::p2: return &p.p2;
    case Param::p3: return &p.p3;
    case Param::n: return &p.n;
    case Param::Gb: return &p.Gb;
    case Param::Ib: return &p.Ib;
    case Param::Vi: return &p.Vi;
    case Param::Vg: return &p.Vg;
    case Param::k_emp: return &p.k_emp;
    case Param::k_abs: return &p.k_abs;
    case Param::f_bio: return &p.f_bio;
    case Param::alpha_ex: return &p.alpha_ex;
  }
  return nullptr;
}

}  // namespace

double get(const PatientParams& params, Param which) {
  return *field(const_cast<PatientParams&>(params), which);
}

void set(PatientParams& params, Param which, double value) { *field(params, which) = value; }

std::string_view param_name(Param which) {
  switch (which) {
    case Param::p1: return "p1";
    case Param::p2: return "p2";
    case Param::p3: return "p3";
    case Param::n: return "n";
    case Param::Gb: return "Gb";
    case Param::Ib: return "Ib";
    case Param::Vi: return "Vi";
    case Param::Vg: return "Vg";
    case Param::k_emp: return "k_emp";
    case Param::k_abs: return "k_abs";
    case Param::f_bio: return "f_bio";
    case Param::alpha_ex: return "alpha_ex";
  }
  return "?";
}

std::optional<Param> parse_param_name(std::string_view name) {
  for (Param p : kAllParams) {
    if (param_name(p) == name) return p;
  }
  return std::nullopt;
}

std::vector<std::string> validate(const PatientParams& params) {
  std::vector<std::string> issues;
  for (Param p : kAllParams) {
    if (!std::isfinite(get(params, p))) {
      issues.push_back(std::string(param_name(p)) + " is not finite");
    }
  }
  if (!issues.empty()) return issues;

  auto positive = [&](Param p) {
    if (!(get(params, p) > 0.0)) {
      std::ostringstream os;
      os << param_name(p) << " must be > 0 (got " << get(params, p) << ")";
      issues.push_back(os.str());
    }
  };
  for (Param p : {Param::p1, Param::p2, Param::p3, Param::n, Param::Vi, Param::Vg,
                  Param::k_emp, Param::k_abs}) {
    positive(p);
  }
  if (!(params.f_bio > 0.0 && params.f_bio <= 1.0)) {
    issues.push_back("f_bio must lie in (0, 1]");
  }
  if (params.alpha_ex < 0.0) issues.push_back("alpha_ex must be >= 0");
  if (params.Gb < 50.0 || params.Gb > 300.0) issues.push_back("Gb must lie in [50, 300] mg/dL");
  if (!(params.Ib > 0.0 && params.Ib <= 100.0)) {
    issues.push_back("Ib must lie in (0, 100] uU/mL");
  }
  return issues;
}

void require_valid(const PatientParams& params) {
  auto issues = validate(params);
  if (!issues.empty()) {
    throw Error(errc::invalid_params, "invalid patient parameters: " + issues.front(),
                issues);
  }
}

PatientParams nominal_adult() {
  PatientParams p;
  p.p1 = 0.03;
  p.p2 = 0.025;
  p.p3 = 1.3e-5;
  p.n = 0.09;
  p.Gb = 100.0;
  p.Ib = 15.0;
  p.Vi = 12.0;
  p.Vg = 120.0;
  p.k_emp = 0.05;
  p.k_abs = 0.04;
  p.f_bio = 0.9;
  p.alpha_ex = 1.0;
  return p;
}

double equilibrium_insulin_input(const PatientParams& params) {
  return params.n * params.Ib * params.Vi;
}

double equilibrium_basal_rate(const PatientParams& params) {
  return units::milliunits_per_min_to_units_per_hour(equilibrium_insulin_input(params));
}

}  // namespace aidtwin
