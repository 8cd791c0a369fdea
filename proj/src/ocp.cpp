#include "echem/ocp.hpp"

// Boost 1.74's pchip header calls isnan unqualified; <math.h> declares ::isnan.
#include <math.h>

#include <algorithm>
#include <boost/math/interpolators/pchip.hpp>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "echem/errors.hpp"

namespace echem {

using Pchip = boost::math::interpolators::pchip<std::vector<double>>;

struct OcpCurve::Interp {
  Pchip u;
  Pchip dudt;
};

OcpCurve::OcpCurve(std::vector<double> theta, std::vector<double> u, std::vector<double> dudt,
                   std::string name)
    : theta_(theta), name_(std::move(name)) {
  if (theta.size() < 4 || u.size() != theta.size() || dudt.size() != theta.size())
    throw ConfigError(name_ + ": OCP table needs at least 4 rows with three columns");
  for (std::size_t i = 1; i < theta.size(); ++i) {
    if (!(theta[i] > theta[i - 1]))
      throw ConfigError(name_ + ": stoichiometry grid must increase strictly");
    if (!(u[i] < u[i - 1]))
      throw ConfigError(name_ + ": potential must decrease strictly with stoichiometry");
  }
  if (theta.front() < 0.0 || theta.back() > 1.0)
    throw ConfigError(name_ + ": stoichiometry grid must lie in [0, 1]");
  auto theta2 = theta;
  interp_ = std::make_shared<const Interp>(
      Interp{Pchip(std::move(theta), std::move(u)), Pchip(std::move(theta2), std::move(dudt))});
}

void OcpCurve::require_in_range(double theta) const {
  if (!in_range(theta)) {
    std::ostringstream s;
    s << name_ << ": stoichiometry " << theta << " outside table range [" << theta_min() << ", "
      << theta_max() << "]";
    throw ExtrapolationError(s.str());
  }
}

double OcpCurve::potential(double theta, double T, double T_ref) const {
  require_in_range(theta);
  return interp_->u(theta) + interp_->dudt(theta) * (T - T_ref);
}

double OcpCurve::slope(double theta) const {
  require_in_range(theta);
  return interp_->u.prime(theta);
}

double OcpCurve::entropic(double theta) const {
  require_in_range(theta);
  return interp_->dudt(theta);
}

OcpCurve load_ocp_curve(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open OCP table " + path.string());
  std::vector<double> th, u, d;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream row(line);
    double a, b, c;
    if (!(row >> a >> b >> c)) throw ParseError(path.string() + ": expected three columns", n);
    std::string extra;
    if (row >> extra) throw ParseError(path.string() + ": unexpected fourth column", n);
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c))
      throw NonFiniteValueError(path.string() + ": non-finite value", n);
    th.push_back(a);
    u.push_back(b);
    d.push_back(c);
  }
  return OcpCurve(std::move(th), std::move(u), std::move(d), path.filename().string());
}

OcpTable load_ocp_table(const std::filesystem::path& anode, const std::filesystem::path& cathode) {
  return OcpTable{load_ocp_curve(anode), load_ocp_curve(cathode)};
}

SlopeBand ocp_slope_band(const OcpCurve& curve, double lo, double hi, int samples) {
  SlopeBand band{std::numeric_limits<double>::infinity(), 0.0, true};
  for (int i = 0; i <= samples; ++i) {
    const double th = lo + (hi - lo) * i / samples;
    const double s = curve.slope(th);
    if (!(s < 0.0)) band.decreasing = false;
    band.min_abs = std::min(band.min_abs, std::abs(s));
    band.max_abs = std::max(band.max_abs, std::abs(s));
  }
  return band;
}

}  // namespace echem
