#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "echem/cell.hpp"
#include "echem/drive_cycle.hpp"
#include "echem/espm.hpp"
#include "echem/ocp.hpp"

namespace echem {

/// The 18 identification parameters, in their canonical order.
inline constexpr std::array<std::string_view, 18> kIdentNames = {
    "c_s_n_max", "c_s_p_max", "D_s_n", "D_s_p", "R_n",     "R_p",
    "A",         "L_n",       "L_p",   "eps_n", "eps_p",   "k_n",
    "k_p",       "R_l",       "L_s",   "eps_e_s", "eps_n_f", "eps_p_f"};

struct ParameterEntry {
  std::string name;
  double value = 0, lower = 0, upper = 0;
  bool free = false;
};

/// Named view of the identification parameters on top of a CellParameters
/// set. Entries not in the free mask keep their nominal value.
class ParameterVector {
 public:
  /// Values from p, bounds [lo, hi] x value, everything fixed.
  static ParameterVector from_cell(const CellParameters& p, double lo = 0.5, double hi = 1.5);

  std::size_t size() const { return entries_.size(); }
  const std::vector<ParameterEntry>& entries() const { return entries_; }
  const ParameterEntry& at(std::string_view name) const;
  double value(std::string_view name) const { return at(name).value; }
  void set(std::string_view name, double v);
  void set_bounds(std::string_view name, double lower, double upper);
  /// Marks exactly these names free. Throws ConfigError on unknown names.
  void set_free(const std::vector<std::string>& names);
  std::vector<std::string> free_names() const;
  bool is_free(std::string_view name) const { return at(name).free; }

  /// Throws ConfigError unless bounds are finite, lower < upper and every
  /// value lies inside its bounds.
  void validate() const;
  /// Copy of base with these values written into the matching fields.
  CellParameters apply(const CellParameters& base) const;

 private:
  ParameterEntry& find(std::string_view name);
  std::vector<ParameterEntry> entries_;
};

enum class FiniteDifference { Forward, Central };
enum class SensitivityOutput { Voltage, SocP, SocN };

struct SensitivityConfig {
  FiniteDifference scheme = FiniteDifference::Central;
  double rel_step = 1e-3;
  int decimation = 1;        // keep every n-th output sample
  double soc0 = 1.0;         // initial state of charge of the experiment
  double voltage_scale = 1.0;  // V
  double soc_scale = 1.0;
};

/// Normalized output partials: rows are [V; soc_p; soc_n] blocks over the
/// kept samples, columns are the free parameters in canonical order.
struct SensitivityMatrix {
  Eigen::MatrixXd S;
  std::vector<std::string> names;
  std::vector<bool> failed;              // perturbed simulation failed, column zeroed
  std::vector<std::string> failures;     // diagnostics, one per failed column
  std::vector<SensitivityOutput> row_output;
  Eigen::VectorXd column_norms;
  int samples = 0;  // rows per output block

  /// Columns restricted to one output block.
  Eigen::MatrixXd block(SensitivityOutput o) const;
};

/// Simulation used throughout identification: fresh-cell ESPM (no aging
/// terms) from a uniform state at soc0.
Trajectory ident_simulate(const DriveCycle& cycle, const CellParameters& p, const OcpTable& ocp,
                          const DiscretizationConfig& disc, double soc0);

/// Throws SimulationError when the nominal run fails; perturbed failures
/// only flag their column.
SensitivityMatrix sensitivity_matrix(const DriveCycle& cycle, const CellParameters& base,
                                     const ParameterVector& params, const OcpTable& ocp,
                                     const DiscretizationConfig& disc,
                                     const SensitivityConfig& cfg = {});

struct NormRow {
  std::string name;
  double voltage = 0;  // norm over the voltage rows
  double multi = 0;    // norm over every row
};

struct NormTable {
  std::vector<NormRow> by_multi;    // descending multi-output norm
  std::vector<NormRow> by_voltage;  // descending voltage-only norm
};

NormTable multi_vs_single_output_norms(const SensitivityMatrix& S);

struct CorrelationResult {
  Eigen::MatrixXd C;
  std::vector<std::string> names;     // columns kept, in matrix order
  std::vector<std::string> excluded;  // zero-norm columns left out
  /// C entry for two kept names; nullopt when either was excluded.
  std::optional<double> at(std::string_view a, std::string_view b) const;
};

CorrelationResult correlation_matrix(const SensitivityMatrix& S);

struct Exclusion {
  std::string name;
  std::string reason;    // "sensitivity" or "correlation"
  std::string blocking;  // selected member it correlates with
  double value = 0;      // norm or |correlation|
};

struct SubsetResult {
  std::vector<std::string> selected;
  std::vector<Exclusion> log;
};

/// Greedy walk down the multi-output ranking.
SubsetResult subset_select(const NormTable& norms, const CorrelationResult& corr,
                           double sens_threshold = 0.2, double corr_threshold = 0.8);

/// soc at each sample time, with sample k's current held until t_k+1.
std::vector<double> coulomb_count_soc(const DriveCycle& cycle, double Q0, double soc0);

/// Capacity implied by the cathode window, F L_p eps_p c_s_p_max |dtheta_p| A / 3600.
double cathode_window_capacity(const CellParameters& p);

struct FitData {
  DriveCycle cycle;  // must carry measured voltage
  double Q0 = 0;     // measured capacity, Ah
  double soc0 = 1.0;
  std::vector<double> soc;  // Coulomb-counted reference
};

/// Fails with ConfigError when the cycle has no voltage column.
FitData make_fit_data(const DriveCycle& cycle, double Q0, double soc0);

struct FitWeights {
  double w1 = 1, w2 = 1, w3 = 1;
  double penalty = 1e3;  // cost of an infeasible candidate
};

struct FitCost {
  double J1 = 0, J2 = 0, J3 = 0, total = 0;
  bool feasible = true;
  std::string message;
};

/// Candidate parameters are applied over base. When constrain_capacity is
/// set, A is rewritten so the cathode window holds data.Q0.
FitCost fit_cost(const ParameterVector& candidate, const CellParameters& base,
                 const OcpTable& ocp, const DiscretizationConfig& disc, const FitData& data,
                 const FitWeights& w = {}, bool constrain_capacity = true);

// ---------------------------------------------------------------------------
// Derivative-free optimizers over the unit box

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct OptimizerResult {
  Eigen::VectorXd x;
  double f = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> history;  // best cost after each iteration
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual std::string name() const = 0;
  /// Minimizes f over [0, 1]^n starting at x0, using at most budget calls.
  virtual OptimizerResult minimize(const Objective& f, const Eigen::VectorXd& x0,
                                   int budget) const = 0;
};

struct CmaEsOptions {
  std::uint64_t seed = 7;
  double sigma0 = 0.15;
  int population = 0;  // 0 picks 4 + 3 ln n
  double x_tol = 1e-7;
  double f_tol = 1e-14;
};

class CmaEs : public Optimizer {
 public:
  explicit CmaEs(CmaEsOptions opt = {}) : opt_(opt) {}
  std::string name() const override { return "cma-es"; }
  OptimizerResult minimize(const Objective& f, const Eigen::VectorXd& x0,
                           int budget) const override;

 private:
  CmaEsOptions opt_;
};

struct NelderMeadOptions {
  double initial_step = 0.05;
  double size_tol = 1e-8;
};

/// GSL simplex (nmsimplex2); points outside the box are clamped.
class NelderMead : public Optimizer {
 public:
  explicit NelderMead(NelderMeadOptions opt = {}) : opt_(opt) {}
  std::string name() const override { return "nelder-mead"; }
  OptimizerResult minimize(const Objective& f, const Eigen::VectorXd& x0,
                           int budget) const override;

 private:
  NelderMeadOptions opt_;
};

std::unique_ptr<Optimizer> make_optimizer(std::string_view name, std::uint64_t seed = 7);

struct FitOptions {
  int budget = 2000;
  FitWeights weights;
  bool constrain_capacity = true;
};

struct FitReport {
  ParameterVector initial;
  ParameterVector fitted;
  FitCost initial_cost;
  FitCost final_cost;
  int evaluations = 0;
  bool converged = false;
  std::string optimizer;
  std::vector<double> history;
};

/// Fits the free entries of initial in log-normalized coordinates
/// (z = log(x / lower) / log(upper / lower)).
FitReport fit(const FitData& data, const ParameterVector& initial, const CellParameters& base,
              const OcpTable& ocp, const DiscretizationConfig& disc, const Optimizer& optimizer,
              const FitOptions& opt = {});

void write_fit_report(std::ostream& out, const FitReport& r);
void write_sensitivity_report(std::ostream& out, const NormTable& norms,
                              const CorrelationResult& corr, const SubsetResult& subset,
                              const SensitivityMatrix& S);

}  // namespace echem
