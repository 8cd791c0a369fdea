#include "echem/sei.hpp"

#include <cmath>

#include "echem/errors.hpp"
#include "echem/keyvalue.hpp"

namespace echem {

void SeiParameters::validate() const {
  std::string msg;
  auto positive = [&](const char* name, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) msg += std::string("\n  - ") + name + " must be positive";
  };
  positive("M_sei", M_sei);
  positive("rho_sei", rho_sei);
  positive("kappa_sei", kappa_sei);
  positive("L_sei_0", L_sei_0);
  positive("Q_0", Q_0);
  if (!msg.empty()) throw ConfigError("invalid SEI parameters:" + msg);
}

double theta_2(const SeiParameters& sei, const CellParameters& p) {
  const double a = p.a_s(Electrode::Anode);
  return 3600.0 * sei.M_sei /
         (2.0 * p.F * p.A * p.A * sei.rho_sei * a * a * p.L_n * p.L_n * sei.kappa_sei);
}

SeiParameters sei_parameters_from(const KeyValueFile& kv) {
  SeiParameters s;
  s.M_sei = kv.number("M_sei");
  s.rho_sei = kv.number("rho_sei");
  s.kappa_sei = kv.number("kappa_sei");
  s.L_sei_0 = kv.number("L_sei_0");
  s.Q_0 = kv.number("Q_0");
  s.validate();
  return s;
}

SeiParameters load_sei_parameters(const std::filesystem::path& path) {
  return sei_parameters_from(KeyValueFile::load(path));
}

}  // namespace echem
