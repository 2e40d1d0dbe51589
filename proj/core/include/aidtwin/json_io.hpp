#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

#include "aidtwin/error.hpp"
#include "aidtwin/ident.hpp"
#include "aidtwin/metrics.hpp"
#include "aidtwin/params.hpp"
#include "aidtwin/planner.hpp"
#include "aidtwin/trace.hpp"

// JSON views of the engine's value types, shared by the CLI and the service.
// Non-finite numbers are written as null.
namespace aidtwin::json_io {

using nlohmann::json;

[[nodiscard]] json to_json(const PatientParams& params);
/// Keys absent from `j` keep their value in `base`; unknown keys and invalid
/// results throw Error(invalid-params).
[[nodiscard]] PatientParams params_from_json(const json& j, const PatientParams& base = nominal_adult());

[[nodiscard]] json to_json(const GlucoseTrace& trace);
[[nodiscard]] json to_json(const GlycemicMetrics& metrics);
[[nodiscard]] json to_json(const PlanQuality& quality);
[[nodiscard]] json to_json(const IdentifiabilityReport& report);
[[nodiscard]] json to_json(const FitResult& fit);
[[nodiscard]] json to_json(const IterationRecord& record);
[[nodiscard]] json to_json(const RefinementLog& log);
[[nodiscard]] json to_json(const HallucinationCounter& counter);
[[nodiscard]] json to_json(const RefinementResult& result);

/// {"code", "message", "details"}
[[nodiscard]] json error_body(std::string_view code, std::string_view message,
                              const std::vector<std::string>& details = {});
[[nodiscard]] json error_body(const Error& error);

/// Twin file: {"params": {...}, ...}. A bare params object is also accepted.
[[nodiscard]] PatientParams load_twin(const std::filesystem::path& path);

/// Parses JSON text, mapping syntax errors to Error(parse-error).
[[nodiscard]] json parse(std::string_view text);

}  // namespace aidtwin::json_io
