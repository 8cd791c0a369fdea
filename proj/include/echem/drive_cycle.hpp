#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace echem {

/// One input sample. Current is positive on discharge. V is NaN unless the
/// source carried a measured voltage channel.
struct CycleSample {
  double t = 0;
  double I = 0;
  double T = 298.15;
  double V = std::numeric_limits<double>::quiet_NaN();
};

struct DriveCycle {
  std::string name;
  std::string source;
  double c_rate_scale = 1.0;
  std::vector<CycleSample> samples;

  bool has_voltage() const { return !samples.empty() && std::isfinite(samples.front().V); }
  std::size_t size() const { return samples.size(); }
  double duration() const { return samples.empty() ? 0.0 : samples.back().t - samples.front().t; }
  /// Length of the interval that starts at sample k. The last sample reuses
  /// the previous interval so that every sample carries a weight.
  double interval(std::size_t k) const;
};

inline constexpr double kDefaultMaxCurrent = 50.0;  // A, hardware plausibility bound

/// CSV with header `t_s,current_A,temperature_K[,voltage_V]` (any column
/// order). Lines starting with '#' are comments; the first one becomes the
/// cycle's source note. Errors carry 1-based line numbers: ParseError for
/// malformed rows, NonMonotoneTimeError, NonFiniteValueError.
DriveCycle load_drive_cycle(const std::filesystem::path& path,
                            double max_abs_current = kDefaultMaxCurrent);
void write_drive_cycle(const std::filesystem::path& path, const DriveCycle& cycle);

DriveCycle constant_current_cycle(double I, double duration, double dt, double T,
                                  const std::string& name = "constant_current");
/// Concatenates b after a, shifting b's time axis to follow a's last interval.
DriveCycle append_cycle(const DriveCycle& a, const DriveCycle& b);

}  // namespace echem
