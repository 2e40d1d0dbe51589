// Writes a synthetic two-day usage record (CGM and pump CSVs) together with
// the twin parameters that generated it.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "aidtwin/ident.hpp"
#include "aidtwin/ingest.hpp"
#include "aidtwin/json_io.hpp"

using namespace aidtwin;

namespace {

void write(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(errc::io_error, "cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic usage record"};
  std::string dir = ".";
  double sigma = 3.0;
  std::uint64_t seed = 42;
  std::string start = "2024-03-01T06:00:00Z";
  app.add_option("-o,--output-dir", dir, "Directory for cgm.csv, pump.csv and truth.json");
  app.add_option("--sigma", sigma, "CGM noise standard deviation, mg/dL")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed);
  app.add_option("--start", start, "UTC timestamp of the first CGM sample");
  CLI11_PARSE(app, argc, argv);

  try {
    auto truth = nominal_adult();
    truth.p1 = 0.026;
    truth.p2 = 0.028;
    truth.p3 = 1.5e-5;
    truth.n = 0.1;

    UsageRecord rec;
    rec.origin_epoch = parse_timestamp(start);
    for (int day = 0; day < 2; ++day) {
      const double d = 1440.0 * day;
      rec.basal.push_back({d, 0.9});
      rec.basal.push_back({d + 180, 1.2});
      rec.basal.push_back({d + 600, 0.85});
      rec.basal.push_back({d + 1020, 1.05});
      rec.meals.push_back({d + 90, 50});
      rec.boluses.push_back({d + 90, 4.5});
      rec.meals.push_back({d + 390, 75});
      rec.boluses.push_back({d + 385, 7});
      rec.meals.push_back({d + 720, 65});
      rec.boluses.push_back({d + 720, 5.5});
      rec.meals.push_back({d + 900, 15});  // untreated snack
    }
    rec.cgm.dt = 5;
    rec.cgm.samples.assign(2 * 1440 / 5 + 1, truth.Gb);
    rec.cgm.insulin_delivered.assign(rec.cgm.samples.size(), 0.0);
    rec.cgm.samples = predict_cgm(truth, rec);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& g : rec.cgm.samples) g = std::round((g + noise(rng)) * 10.0) / 10.0;

    // Drop two readings to leave a 15-minute hole for the loader to fill.
    auto csv = write_cgm_csv(rec.cgm, rec.origin_epoch);
    std::istringstream in(csv);
    std::string line;
    std::string kept;
    int row = 0;
    while (std::getline(in, line)) {
      if (row != 200 && row != 201) kept += line + '\n';
      ++row;
    }

    const std::filesystem::path out(dir);
    std::filesystem::create_directories(out);
    write(out / "cgm.csv", kept);
    write(out / "pump.csv", write_pump_csv(rec));
    json_io::json twin = {{"provenance", "synthetic"}, {"params", json_io::to_json(truth)}};
    write(out / "truth.json", twin.dump(2) + "\n");
  } catch (const Error& e) {
    std::cerr << json_io::error_body(e).dump() << '\n';
    return 2;
  }
  return 0;
}
