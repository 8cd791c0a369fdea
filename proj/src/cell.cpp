#include "echem/cell.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "echem/errors.hpp"
#include "echem/keyvalue.hpp"

namespace echem {

std::string_view to_string(Electrode e) { return e == Electrode::Anode ? "anode" : "cathode"; }

double CellParameters::a_s(Electrode e) const { return 3.0 * eps(e) / radius(e); }

double CellParameters::electrode_capacity(Electrode e) const {
  const double window = std::abs(theta_100(e) - theta_0(e));
  return F * length(e) * A * eps(e) * c_max(e) * window / 3600.0;
}

double CellParameters::theta_at_soc(Electrode e, double soc) const {
  return theta_0(e) + soc * (theta_100(e) - theta_0(e));
}

namespace {

constexpr std::array<CellField, 33> kFields{{
    {"A", &CellParameters::A},
    {"L_n", &CellParameters::L_n},
    {"L_s", &CellParameters::L_s},
    {"L_p", &CellParameters::L_p},
    {"R_n", &CellParameters::R_n},
    {"R_p", &CellParameters::R_p},
    {"eps_n", &CellParameters::eps_n},
    {"eps_p", &CellParameters::eps_p},
    {"eps_e_n", &CellParameters::eps_e_n},
    {"eps_e_s", &CellParameters::eps_e_s},
    {"eps_e_p", &CellParameters::eps_e_p},
    {"eps_n_f", &CellParameters::eps_n_f},
    {"eps_p_f", &CellParameters::eps_p_f},
    {"c_s_n_max", &CellParameters::c_s_n_max},
    {"c_s_p_max", &CellParameters::c_s_p_max},
    {"D_s_n_ref", &CellParameters::D_s_n_ref},
    {"D_s_p_ref", &CellParameters::D_s_p_ref},
    {"Ea_D_n", &CellParameters::Ea_D_n},
    {"Ea_D_p", &CellParameters::Ea_D_p},
    {"Ea_k_n", &CellParameters::Ea_k_n},
    {"Ea_k_p", &CellParameters::Ea_k_p},
    {"k_n_ref", &CellParameters::k_n_ref},
    {"k_p_ref", &CellParameters::k_p_ref},
    {"c_e_0", &CellParameters::c_e_0},
    {"t_plus", &CellParameters::t_plus},
    {"R_l", &CellParameters::R_l},
    {"T_ref", &CellParameters::T_ref},
    {"theta_n_100", &CellParameters::theta_n_100},
    {"theta_n_0", &CellParameters::theta_n_0},
    {"theta_p_100", &CellParameters::theta_p_100},
    {"theta_p_0", &CellParameters::theta_p_0},
    {"F", &CellParameters::F},
    {"R_g", &CellParameters::R_g},
}};

std::vector<std::string> check(const CellParameters& p, bool closure) {
  std::vector<std::string> out;
  auto positive = [&](std::string_view name, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      std::ostringstream s;
      s << name << " must be positive and finite (got " << v << ")";
      out.push_back(s.str());
    }
  };
  for (const char* n : {"A", "L_n", "L_s", "L_p", "R_n", "R_p", "c_s_n_max", "c_s_p_max",
                        "D_s_n_ref", "D_s_p_ref", "k_n_ref", "k_p_ref", "c_e_0", "T_ref", "F",
                        "R_g", "eps_n", "eps_p", "eps_e_n", "eps_e_s", "eps_e_p", "eps_n_f",
                        "eps_p_f"}) {
    for (const CellField& f : cell_fields())
      if (f.name == n) positive(f.name, p.*(f.member));
  }
  for (const CellField& f : cell_fields()) {
    const double v = p.*(f.member);
    if (!std::isfinite(v)) out.push_back(std::string(f.name) + " is not finite");
  }
  if (p.R_l < 0.0) out.push_back("R_l must be non-negative");
  for (double ea : {p.Ea_D_n, p.Ea_D_p, p.Ea_k_n, p.Ea_k_p})
    if (ea < 0.0) {
      out.push_back("activation energies must be non-negative");
      break;
    }
  for (double e : {p.eps_n, p.eps_p, p.eps_e_n, p.eps_e_s, p.eps_e_p, p.eps_n_f, p.eps_p_f})
    if (e >= 1.0) {
      out.push_back("volume fractions must be below 1");
      break;
    }
  if (closure) {
    if (p.eps_n + p.eps_e_n + p.eps_n_f > 1.0 + 1e-12)
      out.push_back("anode volume fractions eps_n + eps_e_n + eps_n_f exceed 1");
    if (p.eps_p + p.eps_e_p + p.eps_p_f > 1.0 + 1e-12)
      out.push_back("cathode volume fractions eps_p + eps_e_p + eps_p_f exceed 1");
  }
  if (!(p.theta_n_100 > p.theta_n_0)) out.push_back("theta_n_100 must exceed theta_n_0");
  if (!(p.theta_p_100 < p.theta_p_0)) out.push_back("theta_p_100 must be below theta_p_0");
  for (double th : {p.theta_n_100, p.theta_n_0, p.theta_p_100, p.theta_p_0})
    if (!(th > 0.0 && th < 1.0)) {
      out.push_back("stoichiometry window endpoints must lie in (0, 1)");
      break;
    }
  if (!(p.t_plus > 0.0 && p.t_plus < 1.0)) out.push_back("t_plus must lie in (0, 1)");
  return out;
}

}  // namespace

std::span<const CellField> cell_fields() { return kFields; }

std::vector<std::string> CellParameters::violations() const { return check(*this, true); }
std::vector<std::string> CellParameters::physical_violations() const {
  return check(*this, false);
}

void CellParameters::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid cell parameters:";
  for (const auto& s : v) msg += "\n  - " + s;
  throw ConfigError(msg);
}

CellParameters cell_parameters_from(const KeyValueFile& kv) {
  CellParameters p;
  std::vector<std::string> problems;
  for (const CellField& f : cell_fields()) {
    if (f.name == "F" || f.name == "R_g") {
      p.*(f.member) = kv.number_or(std::string(f.name), p.*(f.member));
      continue;
    }
    if (!kv.has(std::string(f.name))) {
      problems.push_back("missing " + std::string(f.name));
      continue;
    }
    try {
      p.*(f.member) = kv.number(std::string(f.name));
    } catch (const ParseError& e) {
      problems.push_back(e.what());
    }
  }
  for (const auto& [key, entry] : kv.entries()) {
    bool known = false;
    for (const CellField& f : cell_fields()) known = known || f.name == key;
    if (!known) problems.push_back("line " + std::to_string(entry.line) + ": unknown key " + key);
  }
  if (problems.empty()) {
    problems = p.violations();
  }
  if (!problems.empty()) {
    std::string msg = kv.source() + ": invalid cell parameters:";
    for (const auto& s : problems) msg += "\n  - " + s;
    throw ConfigError(msg);
  }
  return p;
}

CellParameters load_cell_parameters(const std::filesystem::path& path) {
  return cell_parameters_from(KeyValueFile::load(path));
}

double arrhenius_scale(double ref, double Ea, double T, double T_ref, double R_g) {
  if (!(T > 0.0) || !(T_ref > 0.0))
    throw DomainError("arrhenius_scale: temperatures must be positive");
  return ref * std::exp(-Ea / R_g * (1.0 / T - 1.0 / T_ref));
}

double solid_diffusivity(const CellParameters& p, Electrode e, double T) {
  return e == Electrode::Anode ? arrhenius_scale(p.D_s_n_ref, p.Ea_D_n, T, p.T_ref, p.R_g)
                               : arrhenius_scale(p.D_s_p_ref, p.Ea_D_p, T, p.T_ref, p.R_g);
}

double rate_constant(const CellParameters& p, Electrode e, double T) {
  return e == Electrode::Anode ? arrhenius_scale(p.k_n_ref, p.Ea_k_n, T, p.T_ref, p.R_g)
                               : arrhenius_scale(p.k_p_ref, p.Ea_k_p, T, p.T_ref, p.R_g);
}

}  // namespace echem
