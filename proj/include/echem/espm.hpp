#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "echem/cell.hpp"
#include "echem/drive_cycle.hpp"
#include "echem/electrolyte.hpp"
#include "echem/ocp.hpp"
#include "echem/sei.hpp"

namespace echem {

enum class Integrator { ExplicitEuler, ImplicitEuler };

/// Explicit Euler is accepted only for dt <= kExplicitStability * dr^2 / D_s.
inline constexpr double kExplicitStability = 0.4;

struct DiscretizationConfig {
  int N = 10;    // radial nodes per particle
  int M = 30;    // electrolyte cells
  double dt = 1.0;
  Integrator integrator = Integrator::ImplicitEuler;

  void validate() const;
};

/// Radial finite-difference system dc/dt = D A c + B I for one particle.
/// A carries the 1/dr^2 factor but not the diffusivity. Nodes sit at
/// r_i = i dr, i = 1..N; node N is the surface.
struct SolidSystem {
  Eigen::MatrixXd A;
  Eigen::VectorXd B;
  double dr = 0;
};

SolidSystem build_solid_system(const CellParameters& p, const DiscretizationConfig& cfg,
                               Electrode e);

/// Quadrature weights (summing to 1) under which the stencil conserves
/// lithium exactly: w_i ~ i^2 for interior nodes, N(N-1)/2 at the surface.
Eigen::VectorXd solid_volume_weights(int N);
double volume_average(const Eigen::VectorXd& c);

struct EspmState {
  Eigen::VectorXd c_s_p;  // cathode particle, mol/m^3
  Eigen::VectorXd c_s_n;  // anode particle, mol/m^3
  Eigen::VectorXd c_e;    // electrolyte cells over [0, L], mol/m^3
  double Q = 0;           // capacity, Ah
  double L_sei = 0;       // SEI thickness, m

  const Eigen::VectorXd& particle(Electrode e) const { return e == Electrode::Anode ? c_s_n : c_s_p; }
  double surface(Electrode e) const { const auto& c = particle(e); return c[c.size() - 1]; }
};

/// Uniform particles at the stoichiometry of the given state of charge and a
/// uniform electrolyte at c_e_0.
EspmState initial_state(const CellParameters& p, const DiscretizationConfig& cfg, double soc,
                        double Q, double L_sei);

/// Advances one particle profile. D multiplies the bare stencil.
Eigen::VectorXd step_particle(const Eigen::VectorXd& c, double I, double D, double dt,
                              const SolidSystem& sys, Integrator integrator);

/// Advances both particles. Throws SaturationError if a node leaves
/// [0, c_max] and IntegrationError on NaN.
EspmState step_solid(const EspmState& s, double I, double T, double dt, const CellParameters& p,
                     const DiscretizationConfig& cfg);
EspmState step_electrolyte(const EspmState& s, double I, double T, double dt,
                           const CellParameters& p, const DiscretizationConfig& cfg);

/// F k(T) sqrt(c_e c_surf (c_max - c_surf)), A/m^2.
double exchange_current_density(double c_surf, double c_e, double T, Electrode e,
                                const CellParameters& p);

/// Butler-Volmer inversion with symmetric transfer coefficients. The cathode
/// overpotential is negative on discharge and the anode one positive.
double overpotential(double c_surf, double c_e_local, double I, double T, Electrode e,
                     const CellParameters& p);

struct VoltageTerms {
  double U_p = 0, U_n = 0;
  double eta_p = 0, eta_n = 0;
  double polarization = 0;       // electrolyte concentration term
  double ohmic_electrolyte = 0;  // I R_e
  double ohmic_lumped = 0;       // I R_l
  double power_fade = 0;         // I R_pf(Q), aged cells only

  double total() const {
    return U_p + eta_p - U_n - eta_n + polarization - ohmic_electrolyte - ohmic_lumped -
           power_fade;
  }
};

/// Terminal voltage decomposition. Passing SEI parameters selects the aged
/// model, which adds the power-fade drop I R_pf(Q).
VoltageTerms voltage_terms(const EspmState& s, double I, double T, const CellParameters& p,
                           const OcpTable& ocp,
                           const std::optional<SeiParameters>& aging = std::nullopt);
double terminal_voltage(const EspmState& s, double I, double T, const CellParameters& p,
                        const OcpTable& ocp,
                        const std::optional<SeiParameters>& aging = std::nullopt);

struct BulkSoc {
  double soc_n = 0;
  double soc_p = 0;
  bool in_window = true;  // false when either value is outside [0, 1]
};
BulkSoc bulk_soc(const EspmState& s, const CellParameters& p);

struct SimulationOptions {
  std::optional<SeiParameters> aging;  // aged voltage model when set
  double v_min = -1e300;               // stop when V falls below (discharge cutoff)
  double v_max = 1e300;
  bool keep_states = true;
  /// Hold c_e at its initial profile: the reduced SPM the observer is built on.
  bool frozen_electrolyte = false;
};

struct Trajectory {
  std::vector<double> t, I, T, V, soc_n, soc_p, theta_n_surf, theta_p_surf;
  std::vector<double> charge_ah;  // Coulomb-counted charge delivered since t_0
  std::vector<EspmState> states;
  bool cutoff_reached = false;

  std::size_t size() const { return t.size(); }
};

/// Piecewise-constant current: sample k's current drives [t_k, t_k+1). Row k
/// holds the state at t_k and the voltage under I_k. Failures are rethrown as
/// SimulationError tagged with the sample time.
Trajectory simulate(const DriveCycle& cycle, const CellParameters& p, const OcpTable& ocp,
                    const DiscretizationConfig& cfg, const EspmState& init,
                    const SimulationOptions& opt = {});

}  // namespace echem
