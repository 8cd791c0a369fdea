#include "echem/espm.hpp"

#include <cmath>
#include <sstream>

#include "echem/aging.hpp"
#include "echem/errors.hpp"

namespace echem {

void DiscretizationConfig::validate() const {
  if (N < 3) throw ConfigError("N must be at least 3 solid nodes");
  if (M < 6) throw ConfigError("M must be at least 6 electrolyte cells");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
}

SolidSystem build_solid_system(const CellParameters& p, const DiscretizationConfig& cfg,
                               Electrode e) {
  const int N = cfg.N;
  if (N < 3) throw ConfigError("N must be at least 3 solid nodes");
  SolidSystem sys;
  sys.dr = p.radius(e) / N;
  const double inv = 1.0 / (sys.dr * sys.dr);
  sys.A = Eigen::MatrixXd::Zero(N, N);
  for (int row = 0; row < N - 1; ++row) {
    const double i = row + 1;
    if (row > 0) sys.A(row, row - 1) = (i - 1.0) / i * inv;
    sys.A(row, row) = -2.0 * inv;
    sys.A(row, row + 1) = (i + 1.0) / i * inv;
  }
  sys.A(N - 1, N - 2) = 2.0 * inv;
  sys.A(N - 1, N - 1) = -2.0 * inv;
  sys.B = Eigen::VectorXd::Zero(N);
  const double sign = e == Electrode::Cathode ? 1.0 : -1.0;
  sys.B[N - 1] = sign * 2.0 * (N + 1.0) / (N * sys.dr * p.F * p.a_s(e) * p.A * p.length(e));
  return sys;
}

Eigen::VectorXd solid_volume_weights(int N) {
  Eigen::VectorXd w(N);
  for (int i = 1; i < N; ++i) w[i - 1] = double(i) * i;
  w[N - 1] = 0.5 * N * (N - 1.0);
  return w / w.sum();
}

double volume_average(const Eigen::VectorXd& c) {
  return solid_volume_weights(static_cast<int>(c.size())).dot(c);
}

EspmState initial_state(const CellParameters& p, const DiscretizationConfig& cfg, double soc,
                        double Q, double L_sei) {
  cfg.validate();
  EspmState s;
  s.c_s_p = Eigen::VectorXd::Constant(cfg.N, p.theta_at_soc(Electrode::Cathode, soc) * p.c_s_p_max);
  s.c_s_n = Eigen::VectorXd::Constant(cfg.N, p.theta_at_soc(Electrode::Anode, soc) * p.c_s_n_max);
  s.c_e = Eigen::VectorXd::Constant(cfg.M, p.c_e_0);
  s.Q = Q;
  s.L_sei = L_sei;
  return s;
}

Eigen::VectorXd step_particle(const Eigen::VectorXd& c, double I, double D, double dt,
                              const SolidSystem& sys, Integrator integrator) {
  if (integrator == Integrator::ExplicitEuler) {
    if (dt > kExplicitStability * sys.dr * sys.dr / D)
      throw ConfigError("explicit Euler step exceeds the stability bound 0.4 dr^2/D");
    return c + dt * (D * (sys.A * c) + sys.B * I);
  }
  const Eigen::Index n = c.size();
  Eigen::VectorXd lower = Eigen::VectorXd::Zero(n), diag(n), upper = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    diag[i] = 1.0 - dt * D * sys.A(i, i);
    if (i > 0) lower[i] = -dt * D * sys.A(i, i - 1);
    if (i + 1 < n) upper[i] = -dt * D * sys.A(i, i + 1);
  }
  return solve_tridiagonal(lower, diag, upper, c + dt * I * sys.B);
}

namespace {

void check_particle(const Eigen::VectorXd& c, double c_max, Electrode e) {
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (!std::isfinite(c[i]))
      throw IntegrationError(std::string(to_string(e)) + " particle concentration is not finite");
    if (c[i] < 0.0 || c[i] > c_max) {
      std::ostringstream s;
      s << to_string(e) << " particle node " << i << " at " << c[i]
        << " mol/m^3 left [0, " << c_max << "]";
      throw SaturationError(s.str());
    }
  }
}

struct Systems {
  SolidSystem anode, cathode;
  ElectrolyteLayout layout;
};

Systems make_systems(const CellParameters& p, const DiscretizationConfig& cfg) {
  return {build_solid_system(p, cfg, Electrode::Anode),
          build_solid_system(p, cfg, Electrode::Cathode), ElectrolyteLayout::make(p, cfg.M)};
}

void advance_solid(EspmState& s, double I, double T, double dt, const CellParameters& p,
                   const DiscretizationConfig& cfg, const Systems& sys) {
  s.c_s_p = step_particle(s.c_s_p, I, solid_diffusivity(p, Electrode::Cathode, T), dt,
                          sys.cathode, cfg.integrator);
  s.c_s_n = step_particle(s.c_s_n, I, solid_diffusivity(p, Electrode::Anode, T), dt, sys.anode,
                          cfg.integrator);
  check_particle(s.c_s_p, p.c_s_p_max, Electrode::Cathode);
  check_particle(s.c_s_n, p.c_s_n_max, Electrode::Anode);
}

VoltageTerms voltage_terms_impl(const EspmState& s, double I, double T, const CellParameters& p,
                                const OcpTable& ocp, const std::optional<SeiParameters>& aging,
                                const ElectrolyteLayout& layout) {
  VoltageTerms v;
  const double cs_p = s.surface(Electrode::Cathode), cs_n = s.surface(Electrode::Anode);
  v.U_p = ocp.cathode.potential(cs_p / p.c_s_p_max, T, p.T_ref);
  v.U_n = ocp.anode.potential(cs_n / p.c_s_n_max, T, p.T_ref);
  const ElectrolyteAverages avg = region_averages(layout, s.c_e);
  v.eta_p = overpotential(cs_p, avg.cathode, I, T, Electrode::Cathode, p);
  v.eta_n = overpotential(cs_n, avg.anode, I, T, Electrode::Anode, p);

  double total = 0.0, width = 0.0;
  for (int i = 0; i < layout.size(); ++i) {
    total += layout.dx[i] * s.c_e[i];
    width += layout.dx[i];
  }
  const double nu = diffusional_conductivity(total / width, T);
  const double ratio = s.c_e[s.c_e.size() - 1] / s.c_e[0];
  v.polarization = 2.0 * p.R_g * T * (1.0 - p.t_plus) * nu / p.F * std::log(ratio);
  v.ohmic_electrolyte = I * electrolyte_resistance(p, avg, T, p.eps_e_n);
  v.ohmic_lumped = I * p.R_l;
  if (aging) v.power_fade = I * power_fade_resistance(s.Q, p, *aging, avg, T);
  return v;
}

}  // namespace

EspmState step_solid(const EspmState& s, double I, double T, double dt, const CellParameters& p,
                     const DiscretizationConfig& cfg) {
  cfg.validate();
  EspmState next = s;
  const Systems sys{build_solid_system(p, cfg, Electrode::Anode),
                    build_solid_system(p, cfg, Electrode::Cathode), {}};
  advance_solid(next, I, T, dt, p, cfg, sys);
  return next;
}

EspmState step_electrolyte(const EspmState& s, double I, double T, double dt,
                           const CellParameters& p, const DiscretizationConfig& cfg) {
  cfg.validate();
  EspmState next = s;
  next.c_e = step_electrolyte_profile(s.c_e, I, T, dt, p, ElectrolyteLayout::make(p, cfg.M));
  return next;
}

double exchange_current_density(double c_surf, double c_e, double T, Electrode e,
                                const CellParameters& p) {
  const double c_max = p.c_max(e);
  if (!(c_surf > 0.0) || !(c_surf < c_max)) {
    std::ostringstream s;
    s << to_string(e) << " surface concentration " << c_surf << " is not inside (0, " << c_max
      << ")";
    throw KineticSingularityError(s.str());
  }
  if (!(c_e > 0.0)) throw DomainError("electrolyte concentration must be positive");
  return p.F * rate_constant(p, e, T) * std::sqrt(c_e * c_surf * (c_max - c_surf));
}

double overpotential(double c_surf, double c_e_local, double I, double T, Electrode e,
                     const CellParameters& p) {
  const double i0 = exchange_current_density(c_surf, c_e_local, T, e, p);
  const double sign = e == Electrode::Cathode ? -1.0 : 1.0;
  const double arg = sign * I / (2.0 * p.a_s(e) * p.A * p.length(e) * i0);
  return 2.0 * p.R_g * T / p.F * std::asinh(arg);
}

VoltageTerms voltage_terms(const EspmState& s, double I, double T, const CellParameters& p,
                           const OcpTable& ocp, const std::optional<SeiParameters>& aging) {
  return voltage_terms_impl(s, I, T, p, ocp, aging,
                            ElectrolyteLayout::make(p, static_cast<int>(s.c_e.size())));
}

double terminal_voltage(const EspmState& s, double I, double T, const CellParameters& p,
                        const OcpTable& ocp, const std::optional<SeiParameters>& aging) {
  return voltage_terms(s, I, T, p, ocp, aging).total();
}

BulkSoc bulk_soc(const EspmState& s, const CellParameters& p) {
  BulkSoc out;
  const double th_n = volume_average(s.c_s_n) / p.c_s_n_max;
  const double th_p = volume_average(s.c_s_p) / p.c_s_p_max;
  out.soc_n = (th_n - p.theta_n_0) / (p.theta_n_100 - p.theta_n_0);
  out.soc_p = (th_p - p.theta_p_0) / (p.theta_p_100 - p.theta_p_0);
  out.in_window = out.soc_n >= 0.0 && out.soc_n <= 1.0 && out.soc_p >= 0.0 && out.soc_p <= 1.0;
  return out;
}

Trajectory simulate(const DriveCycle& cycle, const CellParameters& p, const OcpTable& ocp,
                    const DiscretizationConfig& cfg, const EspmState& init,
                    const SimulationOptions& opt) {
  cfg.validate();
  if (cycle.samples.empty()) throw ConfigError("simulate: empty drive cycle");
  if (init.c_s_n.size() != cfg.N || init.c_s_p.size() != cfg.N || init.c_e.size() != cfg.M)
    throw ConfigError("simulate: initial state does not match the discretization");
  const Systems sys = make_systems(p, cfg);
  Trajectory out;
  const std::size_t n = cycle.size();
  out.t.reserve(n);
  out.V.reserve(n);
  if (opt.keep_states) out.states.reserve(n);

  EspmState s = init;
  double charge = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const CycleSample& in = cycle.samples[k];
    double V = 0.0;
    try {
      V = voltage_terms_impl(s, in.I, in.T, p, ocp, opt.aging, sys.layout).total();
    } catch (const DomainError& e) {
      throw SimulationError(SimulationError::Kind::Domain, in.t, e.what());
    }
    const BulkSoc soc = bulk_soc(s, p);
    out.t.push_back(in.t);
    out.I.push_back(in.I);
    out.T.push_back(in.T);
    out.V.push_back(V);
    out.soc_n.push_back(soc.soc_n);
    out.soc_p.push_back(soc.soc_p);
    out.theta_n_surf.push_back(s.surface(Electrode::Anode) / p.c_s_n_max);
    out.theta_p_surf.push_back(s.surface(Electrode::Cathode) / p.c_s_p_max);
    out.charge_ah.push_back(charge);
    if (opt.keep_states) out.states.push_back(s);
    if (V < opt.v_min || V > opt.v_max) {
      out.cutoff_reached = true;
      break;
    }
    if (k + 1 == n) break;

    const double span = cycle.samples[k + 1].t - in.t;
    const int steps = std::max(1, static_cast<int>(std::ceil(span / cfg.dt - 1e-9)));
    const double h = span / steps;
    try {
      for (int j = 0; j < steps; ++j) {
        advance_solid(s, in.I, in.T, h, p, cfg, sys);
        if (!opt.frozen_electrolyte)
          s.c_e = step_electrolyte_profile(s.c_e, in.I, in.T, h, p, sys.layout);
      }
    } catch (const SaturationError& e) {
      throw SimulationError(SimulationError::Kind::Saturation, in.t, e.what());
    } catch (const IntegrationError& e) {
      throw SimulationError(SimulationError::Kind::Integration, in.t, e.what());
    } catch (const DomainError& e) {
      throw SimulationError(SimulationError::Kind::Domain, in.t, e.what());
    }
    charge += in.I * span / 3600.0;
  }
  return out;
}

}  // namespace echem
