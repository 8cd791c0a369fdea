#pragma once

#include <filesystem>

#include "echem/cell.hpp"

namespace echem {

class KeyValueFile;

/// SEI film constants. The lumped coefficient theta_2 is not stored: it is
/// always recomputed from its constituents, so it cannot go stale.
struct SeiParameters {
  double M_sei = 0;      // kg/mol
  double rho_sei = 0;    // kg/m^3
  double kappa_sei = 0;  // S/m
  double L_sei_0 = 0;    // m
  double Q_0 = 0;        // Ah

  void validate() const;
};

/// 3600 M / (2 F A^2 rho a_n^2 L_n^2 kappa_sei), in ohm/Ah.
double theta_2(const SeiParameters& sei, const CellParameters& p);

SeiParameters sei_parameters_from(const KeyValueFile& kv);
SeiParameters load_sei_parameters(const std::filesystem::path& path);

}  // namespace echem
