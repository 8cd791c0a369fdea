#include "echem/aging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "echem/errors.hpp"

namespace echem {
namespace {

void require_side_reaction_sign(double i_s) {
  if (i_s > 0.0)
    throw DomainError("side-reaction current density must be <= 0 (got " + std::to_string(i_s) +
                      ")");
}

}  // namespace

double sei_growth_rate(double i_s, const SeiParameters& sei, double F) {
  require_side_reaction_sign(i_s);
  return -i_s * sei.M_sei / (2.0 * F * sei.rho_sei);
}

double capacity_fade_rate(double i_s, const CellParameters& p, const SeiParameters&) {
  require_side_reaction_sign(i_s);
  return i_s * p.a_s(Electrode::Anode) * p.A * p.L_n / 3600.0;
}

double modified_porosity(double L_sei, const CellParameters& p) {
  if (L_sei < 0.0) throw DomainError("SEI thickness must be non-negative");
  const double eps = 1.0 - p.eps_n * (1.0 + 3.0 * L_sei / p.R_n) - p.eps_n_f;
  if (!(eps > 0.0)) {
    std::ostringstream s;
    s << "anode pores closed: porosity " << eps << " at L_sei = " << L_sei << " m";
    throw PoreCloggingError(s.str());
  }
  return eps;
}

double sei_thickness_at_capacity(double Q, const CellParameters& p, const SeiParameters& sei) {
  const double a = p.a_s(Electrode::Anode);
  return sei.L_sei_0 -
         3600.0 * (Q - sei.Q_0) * sei.M_sei / (2.0 * p.F * p.A * p.L_n * a * sei.rho_sei);
}

double capacity_electrolyte_resistance(double Q, const CellParameters& p,
                                       const SeiParameters& sei, const ElectrolyteAverages& c_e,
                                       double T) {
  const double L = std::max(0.0, sei_thickness_at_capacity(Q, p, sei));
  return electrolyte_resistance(p, c_e, T, modified_porosity(L, p));
}

PowerFadeBranches power_fade_branches(double Q, const CellParameters& p, const SeiParameters& sei,
                                      const ElectrolyteAverages& c_e, double T) {
  if (Q > sei.Q_0) {
    std::ostringstream s;
    s << "capacity " << Q << " Ah exceeds Q_0 = " << sei.Q_0 << " Ah";
    throw DomainError(s.str());
  }
  PowerFadeBranches b;
  b.sei = theta_2(sei, p) * (sei.Q_0 - Q);
  const double R_bol = electrolyte_resistance(p, c_e, T, modified_porosity(sei.L_sei_0, p));
  b.electrolyte = capacity_electrolyte_resistance(Q, p, sei, c_e, T) - R_bol;
  return b;
}

double power_fade_resistance(double Q, const CellParameters& p, const SeiParameters& sei,
                             const ElectrolyteAverages& c_e, double T) {
  return power_fade_branches(Q, p, sei, c_e, T).total();
}

double power_fade_resistance(double Q, const CellParameters& p, const SeiParameters& sei,
                             const Eigen::VectorXd& c_e, double T) {
  const auto layout = ElectrolyteLayout::make(p, static_cast<int>(c_e.size()));
  return power_fade_resistance(Q, p, sei, region_averages(layout, c_e), T);
}

AgingState aging_state(const EspmState& s, const CellParameters& p, const SeiParameters& sei,
                       const ElectrolyteAverages& c_e, double T) {
  AgingState a;
  a.L_sei = s.L_sei;
  a.Q = s.Q;
  a.eps_e_n_current = modified_porosity(s.L_sei, p);
  const PowerFadeBranches b = power_fade_branches(s.Q, p, sei, c_e, T);
  a.R_sei_delta = b.sei;
  a.R_pf = b.total();
  return a;
}

SideReactionProfile::SideReactionProfile(std::vector<double> t, std::vector<double> i_s)
    : t_(std::move(t)), i_s_(std::move(i_s)) {
  if (t_.empty() || t_.size() != i_s_.size())
    throw ConfigError("side-reaction profile needs matching, non-empty columns");
  for (std::size_t k = 0; k < t_.size(); ++k) {
    if (k > 0 && !(t_[k] > t_[k - 1]))
      throw NonMonotoneTimeError("side-reaction profile time must increase", k + 1);
    require_side_reaction_sign(i_s_[k]);
  }
}

SideReactionProfile SideReactionProfile::constant(double i_s) { return {{0.0}, {i_s}}; }

double SideReactionProfile::at(double t) const {
  const auto it = std::upper_bound(t_.begin(), t_.end(), t);
  if (it == t_.begin()) return i_s_.front();
  return i_s_[static_cast<std::size_t>(it - t_.begin()) - 1];
}

std::vector<double> SideReactionProfile::breakpoints(double a, double b) const {
  std::vector<double> out;
  for (double t : t_)
    if (t > a && t < b) out.push_back(t);
  return out;
}

SideReactionProfile load_side_reaction_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open side-reaction profile " + path.string());
  std::vector<double> t, v;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream row(line);
    double a, b;
    if (!(row >> a >> b)) throw ParseError(path.string() + ": expected two columns", n);
    if (!std::isfinite(a) || !std::isfinite(b))
      throw NonFiniteValueError(path.string() + ": non-finite value", n);
    if (!t.empty() && !(a > t.back()))
      throw NonMonotoneTimeError(path.string() + ": time must increase strictly", n);
    t.push_back(a);
    v.push_back(b);
  }
  return SideReactionProfile(std::move(t), std::move(v));
}

double side_reaction_for_fade(double capacity_loss, double horizon, const CellParameters& p) {
  if (capacity_loss < 0.0 || !(horizon > 0.0))
    throw DomainError("capacity loss must be >= 0 and the horizon positive");
  return -capacity_loss * 3600.0 / (p.a_s(Electrode::Anode) * p.A * p.L_n * horizon);
}

EspmState age_cell(const EspmState& s, const SideReactionProfile& i_s, double t0,
                   double duration, double dt, const CellParameters& p,
                   const SeiParameters& sei) {
  if (!(dt > 0.0) || duration < 0.0) throw ConfigError("age_cell: invalid time step or horizon");
  EspmState out = s;
  std::vector<double> marks = i_s.breakpoints(t0, t0 + duration);
  marks.push_back(t0 + duration);
  double t = t0;
  for (double mark : marks) {
    while (t < mark) {
      const double h = std::min(dt, mark - t);
      const double rate_i = i_s.at(t);
      out.L_sei += sei_growth_rate(rate_i, sei, p.F) * h;
      out.Q += capacity_fade_rate(rate_i, p, sei) * h;
      t = (mark - t - h <= 1e-9 * std::max(1.0, std::abs(mark))) ? mark : t + h;
    }
  }
  if (!(out.Q > 0.0)) throw DomainError("capacity faded to zero");
  modified_porosity(out.L_sei, p);
  return out;
}

EspmState age_to_capacity(const EspmState& s, double Q_target, const CellParameters& p,
                          const SeiParameters& sei, double horizon, double dt) {
  const double i_s = side_reaction_for_fade(s.Q - Q_target, horizon, p);
  EspmState out = age_cell(s, SideReactionProfile::constant(i_s), 0.0, horizon, dt, p, sei);
  out.Q = Q_target;  // remove the last-ulp drift of the accumulated sum
  return out;
}

}  // namespace echem
