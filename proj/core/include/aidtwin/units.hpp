#pragma once

// Conversions between pump-facing units (U, U/h, g) and model units
// (mU, mU/min, mg).
namespace aidtwin::units {

inline constexpr double kMilliunitsPerUnit = 1000.0;
inline constexpr double kMinutesPerHour = 60.0;
inline constexpr double kMilligramsPerGram = 1000.0;

constexpr double units_per_hour_to_milliunits_per_min(double units_per_hour) {
  return units_per_hour * kMilliunitsPerUnit / kMinutesPerHour;
}

constexpr double milliunits_per_min_to_units_per_hour(double milliunits_per_min) {
  return milliunits_per_min * kMinutesPerHour / kMilliunitsPerUnit;
}

constexpr double units_to_milliunits(double units) { return units * kMilliunitsPerUnit; }

constexpr double grams_to_milligrams(double grams) { return grams * kMilligramsPerGram; }

}  // namespace aidtwin::units
