#include "echem/electrolyte.hpp"

#include <cmath>
#include <sstream>

#include "echem/errors.hpp"

namespace echem {

double electrolyte_diffusivity(double c_e, double T) {
  const double c = to_kmol_per_m3(c_e);
  const double cm2_per_s = std::pow(10.0, -(4.43 + 54.0 / (T - (229.0 + c)) + 0.22 * c));
  return 1e-4 * cm2_per_s;
}

double electrolyte_conductivity(double c_e, double T) {
  const double c = to_kmol_per_m3(c_e);
  // Valoen-Reimers form; the T^2 coefficient of the linear term is +2.8e-5.
  const double inner = (-10.5 + 0.074 * T - 6.96e-5 * T * T) +
                       c * (0.668 - 0.0178 * T + 2.8e-5 * T * T) +
                       c * c * (0.494 - 8.86e-4 * T);
  const double mS_per_cm = c * inner * inner;
  return 0.1 * mS_per_cm;
}

double diffusional_conductivity(double c_e, double T) {
  const double c = to_kmol_per_m3(c_e);
  return 0.601 - 0.24 * std::sqrt(c) + 0.982 * (1.0 - 0.0052 * (T - 293.0)) * std::pow(c, 1.5);
}

ElectrolyteLayout ElectrolyteLayout::make(const CellParameters& p, int M) {
  if (M < 6) throw ConfigError("electrolyte needs at least 6 cells");
  const double L = p.total_length();
  ElectrolyteLayout lay;
  lay.M_n = std::max(2, static_cast<int>(std::lround(M * p.L_n / L)));
  lay.M_p = std::max(2, static_cast<int>(std::lround(M * p.L_p / L)));
  lay.M_s = M - lay.M_n - lay.M_p;
  if (lay.M_s < 2) {
    const int deficit = 2 - lay.M_s;
    lay.M_s = 2;
    if (lay.M_n >= lay.M_p) lay.M_n -= deficit; else lay.M_p -= deficit;
  }
  auto add = [&](int count, double length, double eps, Region r) {
    for (int i = 0; i < count; ++i) {
      lay.dx.push_back(length / count);
      lay.porosity.push_back(eps);
      lay.region.push_back(r);
    }
  };
  add(lay.M_n, p.L_n, p.eps_e_n, Region::Anode);
  add(lay.M_s, p.L_s, p.eps_e_s, Region::Separator);
  add(lay.M_p, p.L_p, p.eps_e_p, Region::Cathode);
  return lay;
}

ElectrolyteAverages region_averages(const ElectrolyteLayout& layout, const Eigen::VectorXd& c_e) {
  double sum[3] = {0, 0, 0}, w[3] = {0, 0, 0};
  for (int i = 0; i < layout.size(); ++i) {
    const int r = static_cast<int>(layout.region[i]);
    sum[r] += layout.dx[i] * c_e[i];
    w[r] += layout.dx[i];
  }
  return {sum[0] / w[0], sum[1] / w[1], sum[2] / w[2]};
}

ElectrolyteAverages uniform_averages(double c_e) { return {c_e, c_e, c_e}; }

double electrolyte_inventory(const ElectrolyteLayout& layout, const Eigen::VectorXd& c_e) {
  double total = 0.0;
  for (int i = 0; i < layout.size(); ++i) total += layout.porosity[i] * layout.dx[i] * c_e[i];
  return total;
}

Eigen::VectorXd solve_tridiagonal(const Eigen::VectorXd& lower, const Eigen::VectorXd& diag,
                                  const Eigen::VectorXd& upper, const Eigen::VectorXd& rhs) {
  const Eigen::Index n = diag.size();
  Eigen::VectorXd c(n), d(n), x(n);
  c[0] = upper[0] / diag[0];
  d[0] = rhs[0] / diag[0];
  for (Eigen::Index i = 1; i < n; ++i) {
    const double m = diag[i] - lower[i] * c[i - 1];
    c[i] = i + 1 < n ? upper[i] / m : 0.0;
    d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
  }
  x[n - 1] = d[n - 1];
  for (Eigen::Index i = n - 2; i >= 0; --i) x[i] = d[i] - c[i] * x[i + 1];
  return x;
}

Eigen::VectorXd step_electrolyte_profile(const Eigen::VectorXd& c_e, double I, double T, double dt,
                                         const CellParameters& p,
                                         const ElectrolyteLayout& layout) {
  const int M = layout.size();
  if (c_e.size() != M) throw ConfigError("electrolyte profile size does not match layout");
  Eigen::VectorXd Deff(M);
  for (int i = 0; i < M; ++i)
    Deff[i] = electrolyte_diffusivity(c_e[i], T) * std::pow(layout.porosity[i], kBruggeman);

  // Face conductance between cells i and i+1 (harmonic mean keeps the flux
  // continuous across region interfaces).
  Eigen::VectorXd g(M - 1);
  for (int i = 0; i + 1 < M; ++i)
    g[i] = 1.0 / (0.5 * layout.dx[i] / Deff[i] + 0.5 * layout.dx[i + 1] / Deff[i + 1]);

  const double j_n = (1.0 - p.t_plus) * I / (p.F * p.A * p.L_n);
  const double j_p = -(1.0 - p.t_plus) * I / (p.F * p.A * p.L_p);

  Eigen::VectorXd lower = Eigen::VectorXd::Zero(M), diag(M), upper = Eigen::VectorXd::Zero(M),
                  rhs(M);
  for (int i = 0; i < M; ++i) {
    const double cap = layout.porosity[i] * layout.dx[i] / dt;
    double source = 0.0;
    if (layout.region[i] == Region::Anode) source = j_n;
    if (layout.region[i] == Region::Cathode) source = j_p;
    diag[i] = cap;
    if (i > 0) {
      lower[i] = -g[i - 1];
      diag[i] += g[i - 1];
    }
    if (i + 1 < M) {
      upper[i] = -g[i];
      diag[i] += g[i];
    }
    rhs[i] = cap * c_e[i] + source * layout.dx[i];
  }
  Eigen::VectorXd next = solve_tridiagonal(lower, diag, upper, rhs);
  for (int i = 0; i < M; ++i) {
    if (!std::isfinite(next[i]) || next[i] <= 0.0) {
      std::ostringstream s;
      s << "electrolyte concentration " << next[i] << " mol/m^3 at cell " << i;
      throw IntegrationError(s.str());
    }
  }
  return next;
}

double electrolyte_resistance(const CellParameters& p, const ElectrolyteAverages& c_e, double T,
                              double eps_e_n) {
  if (!(eps_e_n > 0.0) || !(p.eps_e_s > 0.0) || !(p.eps_e_p > 0.0))
    throw DomainError("electrolyte_resistance: porosity must be positive");
  const double k_n = electrolyte_conductivity(c_e.anode, T) * std::pow(eps_e_n, kBruggeman);
  const double k_s = electrolyte_conductivity(c_e.separator, T) * std::pow(p.eps_e_s, kBruggeman);
  const double k_p = electrolyte_conductivity(c_e.cathode, T) * std::pow(p.eps_e_p, kBruggeman);
  return (p.L_n / k_n + 2.0 * p.L_s / k_s + p.L_p / k_p) / (2.0 * p.A);
}

double electrolyte_resistance(const CellParameters& p, const Eigen::VectorXd& c_e, double T,
                              double eps_e_n) {
  const auto layout = ElectrolyteLayout::make(p, static_cast<int>(c_e.size()));
  return electrolyte_resistance(p, region_averages(layout, c_e), T, eps_e_n);
}

}  // namespace echem
