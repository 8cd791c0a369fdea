#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "echem/drive_cycle.hpp"
#include "echem/espm.hpp"
#include "echem/observer.hpp"

namespace echem {

struct CorruptionSpec {
  double noise_std_I = 0, noise_std_V = 0;  // A, V
  double bias_I = 0, bias_V = 0;            // A, V
  std::uint64_t seed = 1;

  void validate() const;
  bool is_identity() const {
    return noise_std_I == 0 && noise_std_V == 0 && bias_I == 0 && bias_V == 0;
  }
};

/// I' = I + bias_I + N(0, sd_I^2), V' likewise; t and T untouched. Draws come
/// from a 64-bit Mersenne Twister seeded with spec.seed, current before
/// voltage for each sample.
std::vector<Measurement> corrupt(const std::vector<Measurement>& m, const CorruptionSpec& spec);

/// Flat key/value summary, numbers printed with 12 significant digits.
class Summary {
 public:
  void add(const std::string& key, double value);
  void add(const std::string& key, const std::string& value);
  void write(std::ostream& out) const;
  std::optional<double> number(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

std::string format_number(double v);

struct PlantConfig {
  std::optional<double> aged_capacity;  // Ah; fresh when empty
  double soc0 = 0.6;
  bool reduced_spm = false;  // freeze the electrolyte (model-matched twin)
  DiscretizationConfig disc;
};

/// Parses "fresh" or "aged:<Q>".
PlantConfig parse_plant(const std::string& text);

struct ObserverSetup {
  ObserverConfig config;
  double soc_error = 0.45;      // absolute SOC offset of the initial estimate
  double q_init = 2.1;          // Ah
  double theta1_factor = 0.1;   // initial D_s_n estimate as a multiple of truth
  std::optional<double> theta2_init;  // default: nominal theta_2
};

struct TwinResult {
  bool ok = false;
  std::string failed_stage;
  std::string error;
  Trajectory plant;
  double plant_Q = 0;
  std::vector<Measurement> clean, measured;
  EstimateTrajectory estimates;
  ObserverState observer_init;
  Summary summary;
};

/// Plant (ESPM, optionally aged) -> corruption -> observer. Stage failures
/// are reported in the result, never thrown, and earlier stages are kept.
TwinResult twin_experiment(const DriveCycle& cycle, const CellModel& model,
                           const PlantConfig& plant, const ObserverSetup& obs,
                           const CorruptionSpec& corruption, bool keep_observer_states = false);

/// First time after which |q_filtered - Q| / Q stays below tol.
std::optional<double> settling_time(const EstimateTrajectory& e, double Q, double tol);

/// Writes plant.csv, measurements.csv, estimates.csv, summary.txt and
/// config.txt (the resolved configuration) into dir.
void write_twin_artifacts(const std::filesystem::path& dir, const TwinResult& r,
                          const std::string& config_echo);
std::string describe_twin_config(const DriveCycle& cycle, const PlantConfig& plant,
                                 const ObserverSetup& obs, const CorruptionSpec& c);

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& tr);

}  // namespace echem
