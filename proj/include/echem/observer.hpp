#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "echem/cell.hpp"
#include "echem/espm.hpp"
#include "echem/ocp.hpp"
#include "echem/sei.hpp"

namespace echem {

/// Everything the observer knows about the cell.
struct CellModel {
  CellParameters params;
  OcpTable ocp;
  SeiParameters sei;
};

/// Loads reference_cell.params, sei.params and the two OCP tables from a
/// data directory laid out like the shipped one.
CellModel load_cell_model(const std::filesystem::path& data_dir);
/// The data/ directory of the source tree, fixed at build time.
std::filesystem::path default_data_dir();

struct ObserverGains {
  Eigen::VectorXd G1;  // cathode output injection, every entry < 0
  Eigen::VectorXd G2;  // anode output injection, every entry > 0
  double G3 = 0;       // capacity adaptation
  double beta1 = 0, beta2 = 0;  // sliding gains, G_v = -beta G
  double k1 = 0, k2 = 0;        // adaptation constants for theta_1, theta_2
  double gamma_p2 = 0, gamma_n2 = 0;  // lower slope bounds of h1, h2 (V per mol/m^3)
  double alpha_Q2 = 0;                // lower slope bound of h3 (ohm/Ah)
  double h_tol_1 = 0, h_tol_2 = 0;    // tolerable |h1~ - h2~| and |h2~| (V)
  double psi = 0;                     // output-uncertainty bound (ohm/Ah)
  double phi = 5e-3;  // boundary-layer width for the sliding term; 0 = pure sign
};

struct GatingConfig {
  bool enabled = true;       // false: adaptation runs from the first sample
  double threshold = 0.020;  // V, moving RMS of the prefiltered e_y1
  double window = 60.0;      // s, moving-RMS window
  double dwell = 120.0;      // s the RMS must stay below threshold
  double prefilter_tau = 30.0;  // s, low-pass ahead of the RMS; 0 disables
  double q_filter_tau = 200.0;  // s, low-pass on the capacity estimate
};

struct ProjectionBounds {
  double theta1_min = 0.01, theta1_max = 100.0;  // multiples of D_s_n_ref
  double theta2_min = 1e-6, theta2_max = 100.0;  // multiples of nominal theta_2
};

struct ObserverConfig {
  ObserverGains gains;
  GatingConfig gating;
  ProjectionBounds bounds;
};

/// Reads the `key = value` observer configuration. G1 may be a scalar
/// (uniform) or an N-list; `G2 = auto` derives G2 from the ratio condition,
/// `gamma_* = auto` and `h_tol_* = auto` from the OCP tables, `alpha_Q2 =
/// auto` from the aging model.
ObserverConfig load_observer_config(const std::filesystem::path& path, const CellModel& model,
                                    int N);
void write_observer_config(std::ostream& out, const ObserverConfig& cfg);

/// Lower bounds of |dh1/dc| and |dh2/dc| over the stoichiometry windows.
struct SlopeBounds {
  double cathode = 0, anode = 0;
};
SlopeBounds ocp_slope_bounds(const CellModel& model);
/// gamma_n2 / gamma_p2 that makes the G1/G2 ratio conserve lithium.
double lithium_conserving_ratio(const CellParameters& p);
/// |h~| magnitudes for a 45% error centred at mid-SOC (h_tol_1, h_tol_2).
std::pair<double, double> default_h_tol(const CellModel& model, double soc_error = 0.45);
/// min |dh3/dQ| over [0.8 Q_0, 1.1 Q_0] at c_e_0 and T_ref.
double default_alpha_Q2(const CellModel& model);

struct Measurement {
  double t = 0, I = 0, V = 0, T = 298.15;
};

/// Measurement stream CSV: t_s,current_A,voltage_V,temperature_K.
std::vector<Measurement> load_measurements(const std::filesystem::path& path);
void write_measurements(const std::filesystem::path& path, const std::vector<Measurement>& m);

struct ObserverState {
  Eigen::VectorXd x1_hat, x2_hat;  // closed-loop cathode / anode concentrations
  Eigen::VectorXd x1_ol, x2_ol;    // open-loop copies fed to the other observer
  double x3_hat = 0;               // capacity (Ah)
  double theta1_hat = 0;           // anode diffusivity at T_ref (m^2/s)
  double theta2_hat = 0;           // SEI lump (ohm/Ah)
  bool gate_open = false;
  double q_filtered = 0;           // low-passed x3_hat
  int theta1_projections = 0, theta2_projections = 0;
};

/// Observer state with uniform particles at the given states of charge.
ObserverState initial_observer_state(const CellModel& model, int N, double soc, double Q_hat,
                                     double theta1_ref, double theta2);

/// y^ = h1(x1_N, u) - h2(x2_N, u) - R_l u - h3(x3) u + (x3 - Q_0) theta2 u.
/// `which` selects the closed-loop electrode; the other one is the open-loop
/// copy. Throws ExtrapolationError outside the OCP tables.
double observer_output(const ObserverState& obs, const Measurement& m, const CellModel& model,
                       Electrode which);

struct StepOutcome {
  ObserverState state;
  bool fault = false;
  std::string diagnostic;
};

/// Cathode observer over one interval dt: x1_hat with output injection,
/// x2_ol open-loop from x2_hat, and x3_hat when the gate is open.
StepOutcome cathode_observer_step(const ObserverState& obs, const Measurement& m, double y_hat_1,
                                  const ObserverGains& g, const CellModel& model, double dt);
/// Anode observer: x2_hat with injection and x1_ol open-loop from x1_hat.
StepOutcome anode_observer_step(const ObserverState& obs, const Measurement& m, double y_hat_2,
                                const ObserverGains& g, const CellModel& model, double dt);

/// theta_1 law with |h2~| replaced by h_tol_2, projected into the bounds.
ObserverState adapt_theta1(const ObserverState& obs, const Measurement& m,
                           const ObserverGains& g, const CellModel& model, double dt,
                           const ProjectionBounds& bounds = {});
/// theta_2 law with |h1~ - h2~| replaced by h_tol_1. Refused (fault set,
/// state unchanged) when the G1/G2 ratio condition does not hold.
StepOutcome adapt_theta2(const ObserverState& obs, const Measurement& m, const ObserverGains& g,
                         const CellModel& model, double dt, const ProjectionBounds& bounds = {});

/// Sliding injection term s(e) used in both observers: sign(e) when phi = 0,
/// otherwise the saturated ramp e/phi.
double sliding_switch(double e, double phi);

/// kappa_sei implied by an estimate of theta_2.
double unpack_kappa_sei(double theta2_hat, const CellParameters& p, const SeiParameters& sei);

struct EstimateRow {
  double t = 0, I = 0, V = 0, T = 0;
  double y_hat_1 = 0, y_hat_2 = 0, e_y1 = 0, e_y2 = 0;
  double theta_p_surf = 0, theta_p_bulk = 0, theta_n_surf = 0, theta_n_bulk = 0;
  double soc_p = 0, soc_n = 0;
  double q_raw = 0, q_filtered = 0;
  double theta1 = 0;  // at the sample temperature
  double theta2 = 0, kappa_sei = 0;
  double gate_statistic = 0;
  bool gate_open = false;
  bool clamped = false;  // a surface stoichiometry was clamped into the OCP table
};

struct EstimateTrajectory {
  std::vector<EstimateRow> rows;
  std::vector<ObserverState> states;  // state at each row, when requested
  ObserverState final_state;
  std::optional<double> gate_time;
  int faults = 0;
  int clamped_samples = 0;
  std::vector<std::string> warnings;
};

inline constexpr int kEstimateCsvVersion = 1;
void write_estimates_csv(const std::filesystem::path& path, const EstimateTrajectory& traj);

struct ObserverRunOptions {
  bool keep_states = false;
};

/// Runs the interconnected observer over a measurement stream. Each sample's
/// current drives the interval to the next sample.
EstimateTrajectory run_observer(const std::vector<Measurement>& stream, const ObserverConfig& cfg,
                                const CellModel& model, const ObserverState& init,
                                const ObserverRunOptions& opt = {});

/// Assumed error point used by validate_gains.
struct AssumedErrors {
  double soc_error = 0.45;  // concentration error as a fraction of each window
  double soc_center = 0.5;
  double state_uncertainty = 0.0;  // |Delta_x| per node, mol/m^3/s
};

struct GainCheck {
  std::string name;
  bool passed = false;
  double value = 0;
  double bound = 0;
  std::string detail;
};

struct ValidationReport {
  std::vector<GainCheck> checks;
  bool all_passed() const;
  const GainCheck* find(const std::string& name) const;
};

ValidationReport validate_gains(const ObserverGains& g, const CellModel& model,
                                const DiscretizationConfig& cfg, const AssumedErrors& at = {},
                                const ProjectionBounds& bounds = {});

struct ExcitationReport {
  double min_integral = 0, max_integral = 0;
  double window = 0;
  bool passed = false;
};

/// Defaults for drive-cycle inputs: 300 s windows must carry at least
/// 100 A^2 s; the upper bound is the 50 A hardware limit held for a window.
inline constexpr double kExcitationWindow = 300.0;  // s
inline constexpr double kExcitationDelta1 = 100.0;  // A^2 s
inline constexpr double kExcitationDelta2 = 50.0 * 50.0 * kExcitationWindow;

/// Integral of u^2 over every sliding window of the given length (samples
/// spaced dt apart, rectangle rule) against delta1 <= . <= delta2.
ExcitationReport persistence_of_excitation_check(const std::vector<double>& u, double dt,
                                                 double window, double delta1, double delta2);

/// Composite Lyapunov function of the interconnected observer:
/// 1/2|e1|^2 + 1/2 e3^2 + k2/2 e_theta2^2 (cathode) plus 1/2|e2|^2 +
/// k1/2 e_theta1^2 (anode), in model units (mol/m^3, Ah, m^2/s, ohm/Ah).
/// theta1_true is the anode diffusivity at T_ref, like theta1_hat.
double composite_lyapunov(const ObserverState& obs, const EspmState& plant, double theta1_true,
                          double theta2_true, double k1, double k2);

}  // namespace echem
