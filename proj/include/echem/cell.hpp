#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace echem {

class KeyValueFile;

inline constexpr double kFaraday = 96485.33212;      // C/mol
inline constexpr double kGasConstant = 8.314462618;  // J/(mol K)

enum class Electrode { Anode, Cathode };

std::string_view to_string(Electrode e);

/// Geometry, transport, kinetic and stoichiometric constants of one cell.
/// Positive current is discharge throughout the library.
struct CellParameters {
  double A = 0, L_n = 0, L_s = 0, L_p = 0, R_n = 0, R_p = 0;
  double eps_n = 0, eps_p = 0;
  double eps_e_n = 0, eps_e_s = 0, eps_e_p = 0;
  double eps_n_f = 0, eps_p_f = 0;
  double c_s_n_max = 0, c_s_p_max = 0;
  double D_s_n_ref = 0, D_s_p_ref = 0;
  double Ea_D_n = 0, Ea_D_p = 0, Ea_k_n = 0, Ea_k_p = 0;
  double k_n_ref = 0, k_p_ref = 0;
  double c_e_0 = 0;
  double t_plus = 0;
  double R_l = 0;
  double T_ref = 0;
  double theta_n_100 = 0, theta_n_0 = 0, theta_p_100 = 0, theta_p_0 = 0;
  double F = kFaraday, R_g = kGasConstant;

  /// Specific interfacial area 3 eps / R (1/m).
  double a_s(Electrode e) const;
  double length(Electrode e) const { return e == Electrode::Anode ? L_n : L_p; }
  double c_max(Electrode e) const { return e == Electrode::Anode ? c_s_n_max : c_s_p_max; }
  double eps(Electrode e) const { return e == Electrode::Anode ? eps_n : eps_p; }
  double radius(Electrode e) const { return e == Electrode::Anode ? R_n : R_p; }
  double theta_100(Electrode e) const { return e == Electrode::Anode ? theta_n_100 : theta_p_100; }
  double theta_0(Electrode e) const { return e == Electrode::Anode ? theta_n_0 : theta_p_0; }
  double total_length() const { return L_n + L_s + L_p; }

  /// Cyclable capacity of an electrode over its stoichiometry window (Ah).
  double electrode_capacity(Electrode e) const;
  /// Stoichiometry of an electrode at a given state of charge.
  double theta_at_soc(Electrode e, double soc) const;

  /// Every violated invariant, one message each. Empty when valid.
  std::vector<std::string> violations() const;
  /// Like violations() but without the volume-fraction closure, for
  /// candidates produced by identification where entries move independently.
  std::vector<std::string> physical_violations() const;
  /// Throws ConfigError listing every violation.
  void validate() const;
};

struct CellField {
  std::string_view name;
  double CellParameters::*member;
};

/// Name/member table of every numeric CellParameters field.
std::span<const CellField> cell_fields();

CellParameters cell_parameters_from(const KeyValueFile& kv);
CellParameters load_cell_parameters(const std::filesystem::path& path);

/// ref * exp(-Ea/R_g (1/T - 1/T_ref)). Throws DomainError for T <= 0.
double arrhenius_scale(double ref, double Ea, double T, double T_ref, double R_g = kGasConstant);

double solid_diffusivity(const CellParameters& p, Electrode e, double T);
double rate_constant(const CellParameters& p, Electrode e, double T);

}  // namespace echem
