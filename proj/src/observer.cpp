#include "echem/observer.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "echem/aging.hpp"
#include "echem/errors.hpp"
#include "echem/keyvalue.hpp"

namespace echem {

std::filesystem::path default_data_dir() { return ECHEM_DATA_DIR; }

CellModel load_cell_model(const std::filesystem::path& dir) {
  CellModel m{load_cell_parameters(dir / "reference_cell.params"),
              load_ocp_table(dir / "ocp_graphite.dat", dir / "ocp_nmc.dat"),
              load_sei_parameters(dir / "sei.params")};
  return m;
}

// ---------------------------------------------------------------------------
// Slope bounds and tolerances derived from the tables

SlopeBounds ocp_slope_bounds(const CellModel& model) {
  const auto& p = model.params;
  auto bound = [&](Electrode e) {
    const double lo = std::min(p.theta_0(e), p.theta_100(e));
    const double hi = std::max(p.theta_0(e), p.theta_100(e));
    return ocp_slope_band(model.ocp.of(e), lo, hi, 2000).min_abs / p.c_max(e);
  };
  return {bound(Electrode::Cathode), bound(Electrode::Anode)};
}

double lithium_conserving_ratio(const CellParameters& p) {
  return p.eps_p * p.L_p / (p.eps_n * p.L_n);
}

std::pair<double, double> default_h_tol(const CellModel& model, double soc_error) {
  const auto& p = model.params;
  auto swing = [&](Electrode e) {
    const double a = p.theta_at_soc(e, 0.5 + 0.5 * soc_error);
    const double b = p.theta_at_soc(e, 0.5 - 0.5 * soc_error);
    const auto& c = model.ocp.of(e);
    return std::abs(c.potential(a, p.T_ref, p.T_ref) - c.potential(b, p.T_ref, p.T_ref));
  };
  const double h1 = swing(Electrode::Cathode), h2 = swing(Electrode::Anode);
  return {h1 + h2, h2};
}

double default_alpha_Q2(const CellModel& model) {
  const auto& p = model.params;
  const auto c_e = uniform_averages(p.c_e_0);
  double slope = std::numeric_limits<double>::infinity();
  const double Q0 = model.sei.Q_0;
  // Capacity cannot exceed Q0; above it the SEI thickness clamps at zero and h3 is flat.
  for (int i = 0; i <= 60; ++i) {
    const double q = Q0 * (0.8 + 0.2 * i / 60.0), h = 1e-4 * Q0;
    const double d = (capacity_electrolyte_resistance(q + h, p, model.sei, c_e, p.T_ref) -
                      capacity_electrolyte_resistance(q - h, p, model.sei, c_e, p.T_ref)) /
                     (2.0 * h);
    slope = std::min(slope, std::abs(d));
  }
  return slope;
}

// ---------------------------------------------------------------------------
// Configuration file

namespace {

bool is_auto(const KeyValueFile& kv, const std::string& key) {
  return !kv.has(key) || kv.text(key) == "auto";
}

}  // namespace

ObserverConfig load_observer_config(const std::filesystem::path& path, const CellModel& model,
                                    int N) {
  const KeyValueFile kv = KeyValueFile::load(path);
  ObserverConfig cfg;
  ObserverGains& g = cfg.gains;

  const std::vector<double> g1 = kv.numbers("G1");
  if (g1.size() == 1) {
    g.G1 = Eigen::VectorXd::Constant(N, g1[0]);
  } else if (static_cast<int>(g1.size()) == N) {
    g.G1 = Eigen::Map<const Eigen::VectorXd>(g1.data(), N);
  } else {
    throw ConfigError(path.string() + ": G1 needs 1 or N = " + std::to_string(N) + " entries");
  }

  const SlopeBounds slopes = ocp_slope_bounds(model);
  const double ratio = lithium_conserving_ratio(model.params);
  if (is_auto(kv, "gamma_n2") && is_auto(kv, "gamma_p2")) {
    g.gamma_n2 = slopes.anode;
    g.gamma_p2 = g.gamma_n2 / ratio;
    if (g.gamma_p2 > slopes.cathode) {
      g.gamma_p2 = slopes.cathode;
      g.gamma_n2 = g.gamma_p2 * ratio;
    }
  } else {
    g.gamma_p2 = kv.number("gamma_p2");
    g.gamma_n2 = kv.number("gamma_n2");
  }

  if (is_auto(kv, "G2")) {
    g.G2 = -g.G1 * (g.gamma_n2 / g.gamma_p2);
  } else {
    const std::vector<double> g2 = kv.numbers("G2");
    if (g2.size() == 1) g.G2 = Eigen::VectorXd::Constant(N, g2[0]);
    else if (static_cast<int>(g2.size()) == N) g.G2 = Eigen::Map<const Eigen::VectorXd>(g2.data(), N);
    else throw ConfigError(path.string() + ": G2 needs 1 or N entries, or auto");
  }

  const auto [ht1, ht2] = default_h_tol(model);
  g.h_tol_1 = is_auto(kv, "h_tol_1") ? ht1 : kv.number("h_tol_1");
  g.h_tol_2 = is_auto(kv, "h_tol_2") ? ht2 : kv.number("h_tol_2");
  g.alpha_Q2 = is_auto(kv, "alpha_Q2") ? default_alpha_Q2(model) : kv.number("alpha_Q2");
  g.G3 = kv.number("G3");
  g.beta1 = kv.number("beta1");
  g.beta2 = kv.number("beta2");
  g.k1 = kv.number("k1");
  g.k2 = kv.number("k2");
  g.psi = kv.number_or("psi", 0.0);
  g.phi = kv.number_or("phi", g.phi);

  GatingConfig& gt = cfg.gating;
  if (kv.has("gate_enabled")) {
    const std::string& v = kv.text("gate_enabled");
    if (v != "true" && v != "false") throw ConfigError(path.string() + ": gate_enabled must be true or false");
    gt.enabled = v == "true";
  }
  gt.threshold = kv.number_or("gate_threshold", gt.threshold);
  gt.window = kv.number_or("gate_window", gt.window);
  gt.dwell = kv.number_or("gate_dwell", gt.dwell);
  gt.prefilter_tau = kv.number_or("gate_prefilter_tau", gt.prefilter_tau);
  gt.q_filter_tau = kv.number_or("q_filter_tau", gt.q_filter_tau);

  ProjectionBounds& b = cfg.bounds;
  b.theta1_min = kv.number_or("theta1_min", b.theta1_min);
  b.theta1_max = kv.number_or("theta1_max", b.theta1_max);
  b.theta2_min = kv.number_or("theta2_min", b.theta2_min);
  b.theta2_max = kv.number_or("theta2_max", b.theta2_max);
  if (!(b.theta1_min > 0.0 && b.theta1_min < b.theta1_max && b.theta2_min > 0.0 &&
        b.theta2_min < b.theta2_max))
    throw ConfigError(path.string() + ": projection bounds must satisfy 0 < min < max");
  if (!(gt.threshold > 0.0 && gt.window > 0.0 && gt.dwell >= 0.0 && gt.prefilter_tau >= 0.0 &&
        gt.q_filter_tau >= 0.0))
    throw ConfigError(path.string() + ": invalid gating settings");
  return cfg;
}

void write_observer_config(std::ostream& out, const ObserverConfig& cfg) {
  const ObserverGains& g = cfg.gains;
  auto list = [&](const Eigen::VectorXd& v) {
    std::ostringstream s;
    s << std::setprecision(17);
    for (Eigen::Index i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v[i];
    return s.str();
  };
  out << std::setprecision(17);
  out << "G1 = " << list(g.G1) << "\nG2 = " << list(g.G2) << "\nG3 = " << g.G3
      << "\nbeta1 = " << g.beta1 << "\nbeta2 = " << g.beta2 << "\nk1 = " << g.k1
      << "\nk2 = " << g.k2 << "\ngamma_p2 = " << g.gamma_p2 << "\ngamma_n2 = " << g.gamma_n2
      << "\nalpha_Q2 = " << g.alpha_Q2 << "\nh_tol_1 = " << g.h_tol_1
      << "\nh_tol_2 = " << g.h_tol_2 << "\npsi = " << g.psi << "\nphi = " << g.phi << '\n';
  const GatingConfig& t = cfg.gating;
  out << "gate_enabled = " << (t.enabled ? "true" : "false") << "\ngate_threshold = " << t.threshold
      << "\ngate_window = " << t.window << "\ngate_dwell = " << t.dwell
      << "\ngate_prefilter_tau = " << t.prefilter_tau << "\nq_filter_tau = " << t.q_filter_tau
      << '\n';
  const ProjectionBounds& b = cfg.bounds;
  out << "theta1_min = " << b.theta1_min << "\ntheta1_max = " << b.theta1_max
      << "\ntheta2_min = " << b.theta2_min << "\ntheta2_max = " << b.theta2_max << '\n';
}

// ---------------------------------------------------------------------------
// Measurements

std::vector<Measurement> load_measurements(const std::filesystem::path& path) {
  const DriveCycle c = load_drive_cycle(path);
  if (!c.has_voltage()) throw ParseError(path.string() + ": measurement stream needs voltage_V", 0);
  std::vector<Measurement> out;
  out.reserve(c.size());
  for (const auto& s : c.samples) out.push_back({s.t, s.I, s.V, s.T});
  return out;
}

void write_measurements(const std::filesystem::path& path, const std::vector<Measurement>& m) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "t_s,current_A,voltage_V,temperature_K\n" << std::setprecision(12);
  for (const auto& s : m) out << s.t << ',' << s.I << ',' << s.V << ',' << s.T << '\n';
}

// ---------------------------------------------------------------------------
// Model pieces

ObserverState initial_observer_state(const CellModel& model, int N, double soc, double Q_hat,
                                     double theta1_ref, double theta2) {
  const auto& p = model.params;
  ObserverState s;
  s.x1_hat = Eigen::VectorXd::Constant(N, p.theta_at_soc(Electrode::Cathode, soc) * p.c_s_p_max);
  s.x2_hat = Eigen::VectorXd::Constant(N, p.theta_at_soc(Electrode::Anode, soc) * p.c_s_n_max);
  s.x1_ol = s.x1_hat;
  s.x2_ol = s.x2_hat;
  s.x3_hat = Q_hat;
  s.q_filtered = Q_hat;
  s.theta1_hat = theta1_ref;
  s.theta2_hat = theta2;
  return s;
}

double sliding_switch(double e, double phi) {
  if (phi > 0.0) return std::clamp(e / phi, -1.0, 1.0);
  return e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
}

double unpack_kappa_sei(double theta2_hat, const CellParameters& p, const SeiParameters& sei) {
  if (!(theta2_hat > 0.0)) throw DomainError("theta_2 estimate must be positive");
  const double a = p.a_s(Electrode::Anode);
  return 3600.0 * sei.M_sei /
         (2.0 * p.F * p.A * p.A * sei.rho_sei * a * a * p.L_n * p.L_n * theta2_hat);
}

namespace {

struct Systems {
  SolidSystem cathode, anode;
};

Systems make_systems(const CellParameters& p, int N) {
  DiscretizationConfig cfg;
  cfg.N = N;
  return {build_solid_system(p, cfg, Electrode::Cathode), build_solid_system(p, cfg, Electrode::Anode)};
}

double theta1_at(const ObserverState& s, const CellParameters& p, double T) {
  return arrhenius_scale(s.theta1_hat, p.Ea_D_n, T, p.T_ref, p.R_g);
}

struct ElectrodeOutput {
  double h = 0;
  bool clamped = false;
};

ElectrodeOutput electrode_output(double c_surf, double u, double T, Electrode e,
                                 const CellModel& model, bool clamp) {
  const auto& p = model.params;
  const OcpCurve& curve = model.ocp.of(e);
  double th = c_surf / p.c_max(e);
  ElectrodeOutput out;
  if (clamp && !curve.in_range(th)) {
    th = std::clamp(th, curve.theta_min(), curve.theta_max());
    out.clamped = true;
  }
  const double U = curve.potential(th, T, p.T_ref);
  const double eta = overpotential(th * p.c_max(e), p.c_e_0, u, T, e, p);
  out.h = U + eta;
  return out;
}

struct OutputEval {
  double y = 0;
  bool clamped = false;
};

OutputEval evaluate_output(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2, double x3,
                           double theta2, const Measurement& m, const CellModel& model,
                           bool clamp) {
  const auto& p = model.params;
  const auto h1 = electrode_output(x1[x1.size() - 1], m.I, m.T, Electrode::Cathode, model, clamp);
  const auto h2 = electrode_output(x2[x2.size() - 1], m.I, m.T, Electrode::Anode, model, clamp);
  const double h3 =
      capacity_electrolyte_resistance(x3, p, model.sei, uniform_averages(p.c_e_0), m.T);
  OutputEval out;
  out.y = h1.h - h2.h - p.R_l * m.I - h3 * m.I + (x3 - model.sei.Q_0) * theta2 * m.I;
  out.clamped = h1.clamped || h2.clamped;
  return out;
}

OutputEval evaluate_output(const ObserverState& s, const Measurement& m, const CellModel& model,
                           Electrode which, bool clamp) {
  return which == Electrode::Cathode
             ? evaluate_output(s.x1_hat, s.x2_ol, s.x3_hat, s.theta2_hat, m, model, clamp)
             : evaluate_output(s.x1_ol, s.x2_hat, s.x3_hat, s.theta2_hat, m, model, clamp);
}

// Implicit step of dx/dt = D A x + B u + injection, injection held constant.
Eigen::VectorXd propagate(const Eigen::VectorXd& x, double D, const SolidSystem& sys, double u,
                          const Eigen::VectorXd* injection, double dt) {
  Eigen::VectorXd rhs = x + dt * u * sys.B;
  if (injection) rhs += dt * *injection;
  return step_particle(rhs, 0.0, D, dt, sys, Integrator::ImplicitEuler);
}

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

StepOutcome cathode_step(const ObserverState& obs, const Measurement& m, double y_hat_1,
                         const ObserverGains& g, const CellModel& model, double dt,
                         const Systems& sys) {
  const auto& p = model.params;
  StepOutcome out{obs, false, {}};
  const double e = m.V - y_hat_1;
  if (!std::isfinite(e)) {
    out.fault = true;
    out.diagnostic = "cathode output error is not finite";
    return out;
  }
  const double Dp = solid_diffusivity(p, Electrode::Cathode, m.T);
  const Eigen::VectorXd inj = g.G1 * e + (-g.beta1 * g.G1) * sliding_switch(e, g.phi);
  out.state.x1_hat = propagate(obs.x1_hat, Dp, sys.cathode, m.I, &inj, dt);
  out.state.x2_ol = propagate(obs.x2_hat, theta1_at(obs, p, m.T), sys.anode, m.I, nullptr, dt);
  if (obs.gate_open) out.state.x3_hat = obs.x3_hat + dt * g.G3 * e * m.I;
  if (!finite(out.state.x1_hat) || !finite(out.state.x2_ol) || !std::isfinite(out.state.x3_hat)) {
    out.state = obs;
    out.fault = true;
    out.diagnostic = "cathode observer produced a non-finite state";
  }
  return out;
}

StepOutcome anode_step(const ObserverState& obs, const Measurement& m, double y_hat_2,
                       const ObserverGains& g, const CellModel& model, double dt,
                       const Systems& sys) {
  const auto& p = model.params;
  StepOutcome out{obs, false, {}};
  const double e = m.V - y_hat_2;
  if (!std::isfinite(e)) {
    out.fault = true;
    out.diagnostic = "anode output error is not finite";
    return out;
  }
  const Eigen::VectorXd inj = g.G2 * e + (-g.beta2 * g.G2) * sliding_switch(e, g.phi);
  out.state.x2_hat = propagate(obs.x2_hat, theta1_at(obs, p, m.T), sys.anode, m.I, &inj, dt);
  out.state.x1_ol = propagate(obs.x1_hat, solid_diffusivity(p, Electrode::Cathode, m.T),
                              sys.cathode, m.I, nullptr, dt);
  if (!finite(out.state.x2_hat) || !finite(out.state.x1_ol)) {
    out.state = obs;
    out.fault = true;
    out.diagnostic = "anode observer produced a non-finite state";
  }
  return out;
}

double ratio_deviation(const ObserverGains& g) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < g.G1.size(); ++i) {
    const double a = g.G1[i] / g.gamma_p2, b = g.G2[i] / g.gamma_n2;
    worst = std::max(worst, std::abs(a + b) / std::max(std::abs(a), 1e-300));
  }
  return worst;
}

constexpr double kRatioTolerance = 1e-9;

double theta1_rate(const ObserverState& obs, double e2, const ObserverGains& g,
                   const SolidSystem& anode) {
  const Eigen::Index N = obs.x2_hat.size();
  const double CAx = anode.A.row(N - 1).dot(obs.x2_hat);
  return CAx * sliding_switch(e2, g.phi) * g.h_tol_2 / (g.gamma_n2 * g.k1);
}

ObserverState apply_theta1(const ObserverState& obs, double e2, const Measurement& m,
                           const ObserverGains& g, const CellModel& model, double dt,
                           const ProjectionBounds& b, const SolidSystem& anode) {
  const auto& p = model.params;
  ObserverState s = obs;
  const double factor = arrhenius_scale(1.0, p.Ea_D_n, m.T, p.T_ref, p.R_g);
  const double next = obs.theta1_hat + dt * theta1_rate(obs, e2, g, anode) / factor;
  const double lo = b.theta1_min * p.D_s_n_ref, hi = b.theta1_max * p.D_s_n_ref;
  s.theta1_hat = std::clamp(next, lo, hi);
  if (s.theta1_hat != next) ++s.theta1_projections;
  return s;
}

StepOutcome apply_theta2(const ObserverState& obs, double e1, const Measurement& m,
                         const ObserverGains& g, const CellModel& model, double dt,
                         const ProjectionBounds& b) {
  StepOutcome out{obs, false, {}};
  const double dev = ratio_deviation(g);
  if (!(dev <= kRatioTolerance)) {
    std::ostringstream s;
    s << "theta_2 adaptation refused: G1/gamma_p2 + G2/gamma_n2 deviates by " << dev;
    out.fault = true;
    out.diagnostic = s.str();
    return out;
  }
  const Eigen::Index N = obs.x1_hat.size();
  const double rate = g.G1[N - 1] * (obs.x3_hat - model.sei.Q_0) * m.I *
                      sliding_switch(e1, g.phi) * g.h_tol_1 / (g.k2 * g.gamma_p2);
  const double nominal = theta_2(model.sei, model.params);
  const double next = obs.theta2_hat + dt * rate;
  out.state.theta2_hat = std::clamp(next, b.theta2_min * nominal, b.theta2_max * nominal);
  if (out.state.theta2_hat != next) ++out.state.theta2_projections;
  return out;
}

}  // namespace

double observer_output(const ObserverState& obs, const Measurement& m, const CellModel& model,
                       Electrode which) {
  return evaluate_output(obs, m, model, which, false).y;
}

StepOutcome cathode_observer_step(const ObserverState& obs, const Measurement& m, double y_hat_1,
                                  const ObserverGains& g, const CellModel& model, double dt) {
  return cathode_step(obs, m, y_hat_1, g, model, dt,
                      make_systems(model.params, static_cast<int>(obs.x1_hat.size())));
}

StepOutcome anode_observer_step(const ObserverState& obs, const Measurement& m, double y_hat_2,
                                const ObserverGains& g, const CellModel& model, double dt) {
  return anode_step(obs, m, y_hat_2, g, model, dt,
                    make_systems(model.params, static_cast<int>(obs.x1_hat.size())));
}

ObserverState adapt_theta1(const ObserverState& obs, const Measurement& m,
                           const ObserverGains& g, const CellModel& model, double dt,
                           const ProjectionBounds& bounds) {
  const Systems sys = make_systems(model.params, static_cast<int>(obs.x2_hat.size()));
  const double e2 = m.V - evaluate_output(obs, m, model, Electrode::Anode, true).y;
  if (!std::isfinite(e2)) return obs;
  return apply_theta1(obs, e2, m, g, model, dt, bounds, sys.anode);
}

StepOutcome adapt_theta2(const ObserverState& obs, const Measurement& m, const ObserverGains& g,
                         const CellModel& model, double dt, const ProjectionBounds& bounds) {
  const double e1 = m.V - evaluate_output(obs, m, model, Electrode::Cathode, true).y;
  if (!std::isfinite(e1)) return {obs, true, "cathode output error is not finite"};
  return apply_theta2(obs, e1, m, g, model, dt, bounds);
}

// ---------------------------------------------------------------------------
// Full run

namespace {

class GateMonitor {
 public:
  explicit GateMonitor(const GatingConfig& cfg) : cfg_(cfg) {}

  /// Feeds the residual at time t (held for dt); returns the RMS statistic.
  double update(double t, double e, double dt) {
    if (!started_) {
      filtered_ = e;
      started_ = true;
      t0_ = t;
    } else if (cfg_.prefilter_tau > 0.0) {
      filtered_ += (1.0 - std::exp(-dt / cfg_.prefilter_tau)) * (e - filtered_);
    } else {
      filtered_ = e;
    }
    window_.push_back({t, filtered_ * filtered_ * dt, dt});
    sum_ += window_.back().weighted;
    span_ += dt;
    while (!window_.empty() && window_.front().t <= t - cfg_.window) {
      sum_ -= window_.front().weighted;
      span_ -= window_.front().dt;
      window_.pop_front();
    }
    rms_ = span_ > 0.0 ? std::sqrt(std::max(sum_, 0.0) / span_) : 0.0;
    const bool full = t - t0_ >= cfg_.window;
    if (full && rms_ < cfg_.threshold) {
      if (!below_) {
        below_ = true;
        below_since_ = t;
      }
    } else {
      below_ = false;
    }
    return rms_;
  }

  bool ready(double t) const { return below_ && t - below_since_ >= cfg_.dwell; }

 private:
  struct Item {
    double t, weighted, dt;
  };
  GatingConfig cfg_;
  std::deque<Item> window_;
  double sum_ = 0, span_ = 0, rms_ = 0, filtered_ = 0, t0_ = 0, below_since_ = 0;
  bool started_ = false, below_ = false;
};

}  // namespace

EstimateTrajectory run_observer(const std::vector<Measurement>& stream, const ObserverConfig& cfg,
                                const CellModel& model, const ObserverState& init,
                                const ObserverRunOptions& opt) {
  const auto& p = model.params;
  const ObserverGains& g = cfg.gains;
  const int N = static_cast<int>(init.x1_hat.size());
  if (g.G1.size() != N || g.G2.size() != N || init.x2_hat.size() != N)
    throw ConfigError("run_observer: gain and state sizes disagree");
  if (stream.empty()) throw ConfigError("run_observer: empty measurement stream");
  const Systems sys = make_systems(p, N);

  EstimateTrajectory out;
  out.rows.reserve(stream.size());
  ObserverState s = init;
  if (!cfg.gating.enabled) s.gate_open = true;
  GateMonitor gate(cfg.gating);
  const Eigen::VectorXd wp = solid_volume_weights(N);

  for (std::size_t k = 0; k < stream.size(); ++k) {
    const Measurement& m = stream[k];
    double dt = 0.0;
    if (k + 1 < stream.size()) dt = stream[k + 1].t - m.t;
    else if (k > 0) dt = m.t - stream[k - 1].t;
    if (k + 1 < stream.size() && !(dt > 0.0))
      throw ConfigError("run_observer: measurement times must increase strictly");

    const OutputEval o1 = evaluate_output(s, m, model, Electrode::Cathode, true);
    const OutputEval o2 = evaluate_output(s, m, model, Electrode::Anode, true);
    const double e1 = m.V - o1.y, e2 = m.V - o2.y;

    const double stat = gate.update(m.t, e1, dt);
    if (!s.gate_open && gate.ready(m.t)) {
      s.gate_open = true;
      out.gate_time = m.t;
    }

    EstimateRow r;
    r.t = m.t;
    r.I = m.I;
    r.V = m.V;
    r.T = m.T;
    r.y_hat_1 = o1.y;
    r.y_hat_2 = o2.y;
    r.e_y1 = e1;
    r.e_y2 = e2;
    r.theta_p_surf = s.x1_hat[N - 1] / p.c_s_p_max;
    r.theta_n_surf = s.x2_hat[N - 1] / p.c_s_n_max;
    r.theta_p_bulk = wp.dot(s.x1_hat) / p.c_s_p_max;
    r.theta_n_bulk = wp.dot(s.x2_hat) / p.c_s_n_max;
    r.soc_p = (r.theta_p_bulk - p.theta_p_0) / (p.theta_p_100 - p.theta_p_0);
    r.soc_n = (r.theta_n_bulk - p.theta_n_0) / (p.theta_n_100 - p.theta_n_0);
    r.q_raw = s.x3_hat;
    r.q_filtered = s.q_filtered;
    r.theta1 = theta1_at(s, p, m.T);
    r.theta2 = s.theta2_hat;
    r.kappa_sei = unpack_kappa_sei(s.theta2_hat, p, model.sei);
    r.gate_statistic = stat;
    r.gate_open = s.gate_open;
    r.clamped = o1.clamped || o2.clamped;
    if (r.clamped) ++out.clamped_samples;
    out.rows.push_back(r);
    if (opt.keep_states) out.states.push_back(s);
    if (k + 1 == stream.size()) break;

    if (!std::isfinite(e1) || !std::isfinite(e2)) {
      ++out.faults;
      continue;
    }
    const StepOutcome c = cathode_step(s, m, o1.y, g, model, dt, sys);
    const StepOutcome a = anode_step(s, m, o2.y, g, model, dt, sys);
    if (c.fault || a.fault) {
      ++out.faults;
      continue;
    }
    ObserverState next = s;
    next.x1_hat = c.state.x1_hat;
    next.x2_ol = c.state.x2_ol;
    next.x3_hat = c.state.x3_hat;
    next.x2_hat = a.state.x2_hat;
    next.x1_ol = a.state.x1_ol;
    if (s.gate_open) {
      const ObserverState t1 = apply_theta1(s, e2, m, g, model, dt, cfg.bounds, sys.anode);
      next.theta1_hat = t1.theta1_hat;
      next.theta1_projections = t1.theta1_projections;
      const StepOutcome t2 = apply_theta2(s, e1, m, g, model, dt, cfg.bounds);
      if (t2.fault) {
        if (out.warnings.empty() || out.warnings.back() != t2.diagnostic)
          out.warnings.push_back(t2.diagnostic);
      } else {
        next.theta2_hat = t2.state.theta2_hat;
        next.theta2_projections = t2.state.theta2_projections;
      }
    }
    const double a_q = cfg.gating.q_filter_tau > 0.0
                           ? 1.0 - std::exp(-dt / cfg.gating.q_filter_tau)
                           : 1.0;
    next.q_filtered = s.q_filtered + a_q * (next.x3_hat - s.q_filtered);
    s = next;
  }
  if (!s.gate_open)
    out.warnings.push_back("gating condition never met; capacity and parameters not adapted");
  if (out.clamped_samples > 0)
    out.warnings.push_back(std::to_string(out.clamped_samples) +
                           " samples had a surface stoichiometry outside the OCP table");
  out.final_state = s;
  return out;
}

void write_estimates_csv(const std::filesystem::path& path, const EstimateTrajectory& traj) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "# estimate trajectory, format version " << kEstimateCsvVersion << '\n';
  out << "t_s,current_A,voltage_V,temperature_K,y_hat_1_V,y_hat_2_V,e_y1_V,e_y2_V,"
         "theta_p_surf,theta_p_bulk,theta_n_surf,theta_n_bulk,soc_p,soc_n,q_raw_Ah,"
         "q_filtered_Ah,D_s_n_m2_s,theta2_ohm_Ah,kappa_sei_S_m,gate_statistic_V,gate_open,"
         "clamped\n";
  out << std::setprecision(12);
  for (const auto& r : traj.rows) {
    out << r.t << ',' << r.I << ',' << r.V << ',' << r.T << ',' << r.y_hat_1 << ',' << r.y_hat_2
        << ',' << r.e_y1 << ',' << r.e_y2 << ',' << r.theta_p_surf << ',' << r.theta_p_bulk << ','
        << r.theta_n_surf << ',' << r.theta_n_bulk << ',' << r.soc_p << ',' << r.soc_n << ','
        << r.q_raw << ',' << r.q_filtered << ',' << r.theta1 << ',' << r.theta2 << ','
        << r.kappa_sei << ',' << r.gate_statistic << ',' << (r.gate_open ? 1 : 0) << ','
        << (r.clamped ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Gain conditions

bool ValidationReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const GainCheck& c) { return c.passed; });
}

const GainCheck* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

ValidationReport validate_gains(const ObserverGains& g, const CellModel& model,
                                const DiscretizationConfig& cfg, const AssumedErrors& at,
                                const ProjectionBounds& bounds) {
  const auto& p = model.params;
  ValidationReport rep;
  auto add = [&](std::string name, bool ok, double value, double bound, std::string detail) {
    rep.checks.push_back({std::move(name), ok, value, bound, std::move(detail)});
  };
  const int N = cfg.N;
  if (g.G1.size() != N || g.G2.size() != N) {
    add("dimensions", false, static_cast<double>(g.G1.size()), N, "G1 and G2 need N entries");
    return rep;
  }
  add("dimensions", true, N, N, "");

  const bool signs = (g.G1.array() < 0.0).all() && (g.G2.array() > 0.0).all();
  add("sign-pattern", signs, g.G1.maxCoeff(), 0.0, "every G1 entry < 0 and every G2 entry > 0");

  const bool positive = g.G3 > 0 && g.beta1 >= 0 && g.beta2 >= 0 && g.k1 > 0 && g.k2 > 0 &&
                        g.gamma_p2 > 0 && g.gamma_n2 > 0 && g.alpha_Q2 >= 0 && g.h_tol_1 > 0 &&
                        g.h_tol_2 > 0 && g.psi >= 0 && g.phi >= 0;
  add("positive-scalars", positive, 0, 0, "G3, k1, k2, gamma, h_tol > 0; beta, alpha, psi, phi >= 0");
  if (!(g.gamma_p2 > 0 && g.gamma_n2 > 0)) return rep;

  const double dev = ratio_deviation(g);
  add("gain-ratio", dev <= kRatioTolerance, dev, kRatioTolerance,
      "max |G1/gamma_p2 + G2/gamma_n2| / |G1/gamma_p2|");

  const SolidSystem sp = build_solid_system(p, cfg, Electrode::Cathode);
  const SolidSystem sn = build_solid_system(p, cfg, Electrode::Anode);
  {
    Eigen::MatrixXd Mc = solid_diffusivity(p, Electrode::Cathode, p.T_ref) * sp.A;
    Mc.col(N - 1) += g.gamma_p2 * g.G1;
    const double re = Eigen::EigenSolver<Eigen::MatrixXd>(Mc).eigenvalues().real().maxCoeff();
    add("cathode-spectrum", re < 0.0, re, 0.0, "max Re eig(A11 + gamma_p2 G1 C)");
  }
  {
    double worst = -1e300;
    for (double f : {1.0, bounds.theta1_min}) {
      Eigen::MatrixXd Ma = f * p.D_s_n_ref * sn.A;
      Ma.col(N - 1) -= g.gamma_n2 * g.G2;
      worst = std::max(worst,
                       Eigen::EigenSolver<Eigen::MatrixXd>(Ma).eigenvalues().real().maxCoeff());
    }
    add("anode-spectrum", worst < 0.0, worst, 0.0,
        "max Re eig(theta1 A22 - gamma_n2 G2 C) at theta1 = D_ref and the lower projection bound");
  }

  // Assumed error point: observer SOC below the truth by `soc_error`.
  const double soc_true = at.soc_center + 0.5 * at.soc_error;
  const double soc_obs = at.soc_center - 0.5 * at.soc_error;
  auto theta = [&](Electrode e, double soc) { return p.theta_at_soc(e, soc); };
  const double e1n = theta(Electrode::Cathode, soc_true) - theta(Electrode::Cathode, soc_obs);
  const double e2n = theta(Electrode::Anode, soc_true) - theta(Electrode::Anode, soc_obs);
  auto U = [&](Electrode e, double soc) {
    return model.ocp.of(e).potential(theta(e, soc), p.T_ref, p.T_ref);
  };
  const double h1t = U(Electrode::Cathode, soc_true) - U(Electrode::Cathode, soc_obs);
  const double h2t = U(Electrode::Anode, soc_true) - U(Electrode::Anode, soc_obs);
  const Eigen::VectorXd e1 = Eigen::VectorXd::Constant(N, e1n * p.c_s_p_max);
  const Eigen::VectorXd e2 = Eigen::VectorXd::Constant(N, e2n * p.c_s_n_max);

  // Worst case for the beta bounds: the state uncertainty is aligned with
  // the error, so -e' dx = -|e| |dx|.
  const Eigen::VectorXd dx = Eigen::VectorXd::Constant(N, at.state_uncertainty);
  const double b1 =
      (-std::abs(e1.dot(dx)) / std::max(std::abs(e1.dot(g.G1) * h2t), 1e-300) + 1.0) *
      std::abs(h2t);
  add("beta1", g.beta1 <= b1, g.beta1, b1, "beta1 <= (-e1' dx1 / |e1' G1 h2_ol~| + 1) |h2_ol~|");
  const double b2 =
      (-std::abs(e2.dot(dx)) / std::max(std::abs(e2.dot(g.G2) * h1t), 1e-300) + 1.0) *
      std::abs(h1t);
  add("beta2", g.beta2 <= b2, g.beta2, b2, "beta2 <= (-e2' dx2 / |e2' G2 h1_ol~| + 1) |h1_ol~|");

  // G3 condition in stoichiometry-normalized coordinates (states divided by
  // c_max, so e' G picks up 1/c_max^2).
  const double th2 = theta_2(model.sei, p);
  const double eG = e1.dot(g.G1) / (p.c_s_p_max * p.c_s_p_max) +
                    e2.dot(g.G2) / (p.c_s_n_max * p.c_s_n_max);
  const double ey1 = std::abs(h1t - h2t);
  const double g3_bound = std::abs(eG * (th2 + g.alpha_Q2 + g.psi)) / ey1;
  add("G3", g.G3 >= g3_bound, g.G3, g3_bound,
      "G3 >= |(e1' G1 + e2' G2)(theta2 + alpha_Q2 + psi)| / |e_y1|, normalized coordinates");

  const SlopeBounds slopes = ocp_slope_bounds(model);
  add("gamma_p2-band", g.gamma_p2 <= slopes.cathode, g.gamma_p2, slopes.cathode,
      "gamma_p2 below min |dh1/dc| over the cathode window");
  add("gamma_n2-band", g.gamma_n2 <= slopes.anode, g.gamma_n2, slopes.anode,
      "gamma_n2 below min |dh2/dc| over the anode window");
  const double aq = default_alpha_Q2(model);
  add("alpha_Q2-band", g.alpha_Q2 <= aq * (1.0 + 1e-9), g.alpha_Q2, aq,
      "alpha_Q2 below min |dh3/dQ|");
  add("boundary-layer", g.phi == 0.0 || g.beta1 < g.phi, g.beta1, g.phi,
      "beta below phi so the saturated sliding term cannot cancel the linear injection");
  return rep;
}

ExcitationReport persistence_of_excitation_check(const std::vector<double>& u, double dt,
                                                 double window, double delta1, double delta2) {
  ExcitationReport r;
  r.window = window;
  if (u.empty() || !(dt > 0.0) || !(window > 0.0)) return r;
  const auto w = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(window / dt)));
  if (w > u.size()) {
    r.min_integral = r.max_integral = 0.0;
    double total = 0.0;
    for (double v : u) total += v * v * dt;
    r.min_integral = r.max_integral = total;
    r.passed = false;
    return r;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < w; ++i) sum += u[i] * u[i] * dt;
  r.min_integral = r.max_integral = sum;
  for (std::size_t i = w; i < u.size(); ++i) {
    sum += (u[i] * u[i] - u[i - w] * u[i - w]) * dt;
    r.min_integral = std::min(r.min_integral, sum);
    r.max_integral = std::max(r.max_integral, sum);
  }
  r.passed = r.min_integral >= delta1 && r.max_integral <= delta2;
  return r;
}

double composite_lyapunov(const ObserverState& obs, const EspmState& plant, double theta1_true,
                          double theta2_true, double k1, double k2) {
  const double e3 = plant.Q - obs.x3_hat;
  const double et1 = theta1_true - obs.theta1_hat;
  const double et2 = theta2_true - obs.theta2_hat;
  const double v1 = 0.5 * (plant.c_s_p - obs.x1_hat).squaredNorm() + 0.5 * e3 * e3 + 0.5 * k2 * et2 * et2;
  const double v2 = 0.5 * (plant.c_s_n - obs.x2_hat).squaredNorm() + 0.5 * k1 * et1 * et1;
  return v1 + v2;
}

}  // namespace echem
