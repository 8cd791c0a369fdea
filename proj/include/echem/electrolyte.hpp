#pragma once

#include <Eigen/Dense>
#include <vector>

#include "echem/cell.hpp"

namespace echem {

inline constexpr double kBruggeman = 1.5;

/// The empirical electrolyte correlations take c_e in kmol/m^3 (= mol/L);
/// every public function here takes mol/m^3 and converts once.
constexpr double to_kmol_per_m3(double c) { return 1e-3 * c; }

/// D_e(c_e, T) in m^2/s. The correlation itself returns cm^2/s.
double electrolyte_diffusivity(double c_e, double T);
/// kappa(c_e, T) in S/m. The correlation itself returns mS/cm.
double electrolyte_conductivity(double c_e, double T);
/// Diffusional conductivity nu(c_e, T), dimensionless.
double diffusional_conductivity(double c_e, double T);

enum class Region { Anode = 0, Separator = 1, Cathode = 2 };

/// Finite-volume cells over [0, L]: anode, separator, cathode, in that order.
struct ElectrolyteLayout {
  int M_n = 0, M_s = 0, M_p = 0;
  std::vector<double> dx;       // cell widths (m)
  std::vector<double> porosity; // eps_e of each cell
  std::vector<Region> region;

  int size() const { return M_n + M_s + M_p; }
  /// Splits M cells proportionally to the region lengths, at least 2 each.
  static ElectrolyteLayout make(const CellParameters& p, int M);
};

struct ElectrolyteAverages {
  double anode = 0, separator = 0, cathode = 0;
};

ElectrolyteAverages region_averages(const ElectrolyteLayout& layout, const Eigen::VectorXd& c_e);
ElectrolyteAverages uniform_averages(double c_e);

/// Lithium in the electrolyte per unit area, sum eps dx c (mol/m^2).
double electrolyte_inventory(const ElectrolyteLayout& layout, const Eigen::VectorXd& c_e);

/// One implicit step of eps dc/dt = d/dx(D_eff dc/dx) + (1 - t+) j(I). The
/// effective diffusivity is taken from the start-of-step profile, which keeps
/// the step a single tridiagonal solve and conserves the inventory exactly.
/// Throws IntegrationError on non-positive or non-finite results.
Eigen::VectorXd step_electrolyte_profile(const Eigen::VectorXd& c_e, double I, double T, double dt,
                                         const CellParameters& p,
                                         const ElectrolyteLayout& layout);

/// Eq-(2)-style ohmic resistance of the electrolyte across the sandwich, with
/// kappa evaluated at the region averages. `eps_e_n` overrides the anode
/// porosity (aging). Throws DomainError for non-positive porosity.
double electrolyte_resistance(const CellParameters& p, const ElectrolyteAverages& c_e, double T,
                              double eps_e_n);
double electrolyte_resistance(const CellParameters& p, const Eigen::VectorXd& c_e, double T,
                              double eps_e_n);

/// Thomas algorithm. `lower[0]` and `upper[n-1]` are ignored.
Eigen::VectorXd solve_tridiagonal(const Eigen::VectorXd& lower, const Eigen::VectorXd& diag,
                                  const Eigen::VectorXd& upper, const Eigen::VectorXd& rhs);

}  // namespace echem
