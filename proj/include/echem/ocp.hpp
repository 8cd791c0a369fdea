#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "echem/cell.hpp"

namespace echem {

/// Tabulated open-circuit potential of one electrode with its entropic
/// coefficient. Interpolation is monotone piecewise-cubic (PCHIP), so a
/// monotone table stays monotone between knots.
class OcpCurve {
 public:
  OcpCurve(std::vector<double> theta, std::vector<double> u, std::vector<double> dudt,
           std::string name);

  /// U(theta, T) = U(theta, T_ref) + dU/dT(theta) (T - T_ref).
  double potential(double theta, double T, double T_ref) const;
  /// dU/dtheta at the reference temperature.
  double slope(double theta) const;
  double entropic(double theta) const;

  double theta_min() const { return theta_.front(); }
  double theta_max() const { return theta_.back(); }
  bool in_range(double theta) const { return theta >= theta_min() && theta <= theta_max(); }
  const std::string& name() const { return name_; }
  const std::vector<double>& grid() const { return theta_; }

 private:
  void require_in_range(double theta) const;

  struct Interp;
  std::vector<double> theta_;
  std::string name_;
  std::shared_ptr<const Interp> interp_;
};

struct OcpTable {
  OcpCurve anode;
  OcpCurve cathode;
  const OcpCurve& of(Electrode e) const { return e == Electrode::Anode ? anode : cathode; }
};

/// Three whitespace separated columns per row: theta, U (V), dU/dT (V/K).
/// Lines starting with '#' are comments. Theta must increase strictly and U
/// must decrease strictly.
OcpCurve load_ocp_curve(const std::filesystem::path& path);
OcpTable load_ocp_table(const std::filesystem::path& anode, const std::filesystem::path& cathode);

/// Range of |dU/dtheta| over [lo, hi], sampled densely.
struct SlopeBand {
  double min_abs = 0;
  double max_abs = 0;
  bool decreasing = true;
};
SlopeBand ocp_slope_band(const OcpCurve& curve, double lo, double hi, int samples = 400);

}  // namespace echem
