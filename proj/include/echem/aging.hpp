#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "echem/cell.hpp"
#include "echem/electrolyte.hpp"
#include "echem/espm.hpp"
#include "echem/sei.hpp"

namespace echem {

// Sign convention: the side-reaction current density i_s is <= 0 (a
// reduction that consumes cyclable lithium). Positive values are rejected.

/// dL_sei/dt = -i_s M / (2 F rho), m/s.
double sei_growth_rate(double i_s, const SeiParameters& sei, double F = kFaraday);
/// dQ/dt = i_s a_n A L_n / 3600, Ah/s.
double capacity_fade_rate(double i_s, const CellParameters& p, const SeiParameters& sei);

/// Anode porosity once the film has grown to L_sei:
/// 1 - eps_n (1 + 3 L_sei / R_n) - eps_n_f. Throws PoreCloggingError at <= 0.
double modified_porosity(double L_sei, const CellParameters& p);

/// Film thickness implied by capacity Q through the fade identity.
double sei_thickness_at_capacity(double Q, const CellParameters& p, const SeiParameters& sei);

struct PowerFadeBranches {
  double sei = 0;          // theta_2 (Q_0 - Q)
  double electrolyte = 0;  // R_e(aged porosity) - R_e(porosity at L_sei_0)
  double total() const { return sei + electrolyte; }
};

/// Both branches of R_pf(Q). Throws DomainError for Q > Q_0.
PowerFadeBranches power_fade_branches(double Q, const CellParameters& p, const SeiParameters& sei,
                                      const ElectrolyteAverages& c_e, double T);
double power_fade_resistance(double Q, const CellParameters& p, const SeiParameters& sei,
                             const ElectrolyteAverages& c_e, double T);
double power_fade_resistance(double Q, const CellParameters& p, const SeiParameters& sei,
                             const Eigen::VectorXd& c_e, double T);

/// R_e evaluated with the porosity implied by capacity Q. Unlike
/// power_fade_resistance this accepts Q > Q_0 (film thinner than at BOL),
/// which the observer needs while its capacity estimate starts high.
double capacity_electrolyte_resistance(double Q, const CellParameters& p,
                                       const SeiParameters& sei, const ElectrolyteAverages& c_e,
                                       double T);

struct AgingState {
  double L_sei = 0;
  double Q = 0;
  double R_sei_delta = 0;
  double eps_e_n_current = 0;
  double R_pf = 0;
};

AgingState aging_state(const EspmState& s, const CellParameters& p, const SeiParameters& sei,
                       const ElectrolyteAverages& c_e, double T);

/// Piecewise-constant i_s(t): value i_s[k] holds on [t[k], t[k+1]).
class SideReactionProfile {
 public:
  SideReactionProfile(std::vector<double> t, std::vector<double> i_s);
  static SideReactionProfile constant(double i_s);
  double at(double t) const;
  /// Times in (a, b) where the value changes.
  std::vector<double> breakpoints(double a, double b) const;

 private:
  std::vector<double> t_, i_s_;
};

/// Two numeric columns (time s, i_s A/m^2), '#' comments allowed.
SideReactionProfile load_side_reaction_profile(const std::filesystem::path& path);

/// Constant i_s that removes `capacity_loss` Ah over `horizon` seconds.
double side_reaction_for_fade(double capacity_loss, double horizon, const CellParameters& p);

/// Integrates film growth and capacity fade over [t0, t0 + duration] with
/// step dt, splitting steps at profile breakpoints so the result is exact.
EspmState age_cell(const EspmState& s, const SideReactionProfile& i_s, double t0,
                   double duration, double dt, const CellParameters& p,
                   const SeiParameters& sei);

/// Shortcut used to build aged plants: constant i_s chosen so that the
/// capacity reaches Q_target over `horizon`.
EspmState age_to_capacity(const EspmState& s, double Q_target, const CellParameters& p,
                          const SeiParameters& sei, double horizon = 3.15576e7,
                          double dt = 3600.0);

}  // namespace echem
