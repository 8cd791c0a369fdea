#include "echem/twin.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "echem/aging.hpp"
#include "echem/errors.hpp"

namespace echem {

void CorruptionSpec::validate() const {
  if (!(noise_std_I >= 0.0) || !(noise_std_V >= 0.0))
    throw ConfigError("noise standard deviations must be non-negative");
  if (!std::isfinite(bias_I) || !std::isfinite(bias_V)) throw ConfigError("biases must be finite");
}

std::vector<Measurement> corrupt(const std::vector<Measurement>& m, const CorruptionSpec& spec) {
  spec.validate();
  std::vector<Measurement> out = m;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (auto& s : out) {
    const double nI = unit(rng), nV = unit(rng);
    s.I += spec.bias_I + spec.noise_std_I * nI;
    s.V += spec.bias_V + spec.noise_std_V * nV;
  }
  return out;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void Summary::add(const std::string& key, double value) { items_.emplace_back(key, format_number(value)); }
void Summary::add(const std::string& key, const std::string& value) { items_.emplace_back(key, value); }

void Summary::write(std::ostream& out) const {
  for (const auto& [k, v] : items_) out << k << " = " << v << '\n';
}

std::optional<double> Summary::number(const std::string& key) const {
  for (const auto& [k, v] : items_)
    if (k == key) {
      try {
        return std::stod(v);
      } catch (const std::exception&) {
        return std::nullopt;
      }
    }
  return std::nullopt;
}

PlantConfig parse_plant(const std::string& text) {
  PlantConfig p;
  if (text == "fresh") return p;
  if (text.rfind("aged:", 0) == 0) {
    try {
      std::size_t used = 0;
      const double q = std::stod(text.substr(5), &used);
      if (used != text.size() - 5 || !(q > 0.0)) throw std::invalid_argument(text);
      p.aged_capacity = q;
      return p;
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("plant must be 'fresh' or 'aged:<capacity Ah>', got '" + text + "'");
}

std::optional<double> settling_time(const EstimateTrajectory& e, double Q, double tol) {
  std::optional<double> t;
  for (const auto& r : e.rows) {
    if (std::abs(r.q_filtered - Q) / Q < tol) {
      if (!t) t = r.t;
    } else {
      t.reset();
    }
  }
  return t;
}

TwinResult twin_experiment(const DriveCycle& cycle, const CellModel& model,
                           const PlantConfig& plant, const ObserverSetup& obs,
                           const CorruptionSpec& corruption, bool keep_observer_states) {
  TwinResult r;
  const auto& p = model.params;
  const char* stage = "plant";
  try {
    EspmState init = initial_state(p, plant.disc, plant.soc0, model.sei.Q_0, model.sei.L_sei_0);
    if (plant.aged_capacity) init = age_to_capacity(init, *plant.aged_capacity, p, model.sei);
    r.plant_Q = init.Q;
    SimulationOptions opt;
    opt.aging = model.sei;
    opt.frozen_electrolyte = plant.reduced_spm;
    opt.keep_states = true;
    r.plant = simulate(cycle, p, model.ocp, plant.disc, init, opt);

    stage = "corruption";
    r.clean.reserve(r.plant.size());
    for (std::size_t k = 0; k < r.plant.size(); ++k)
      r.clean.push_back({r.plant.t[k], r.plant.I[k], r.plant.V[k], r.plant.T[k]});
    r.measured = corrupt(r.clean, corruption);

    stage = "observer";
    double soc_obs = plant.soc0 - obs.soc_error;
    if (soc_obs < 0.02) soc_obs = plant.soc0 + obs.soc_error;
    const double theta2 = obs.theta2_init.value_or(theta_2(model.sei, p));
    r.observer_init = initial_observer_state(model, plant.disc.N, soc_obs, obs.q_init,
                                             obs.theta1_factor * p.D_s_n_ref, theta2);
    ObserverRunOptions ro;
    ro.keep_states = keep_observer_states;
    r.estimates = run_observer(r.measured, obs.config, model, r.observer_init, ro);
    r.ok = true;
  } catch (const std::exception& e) {
    r.failed_stage = stage;
    r.error = e.what();
  }

  Summary& s = r.summary;
  s.add("status", r.ok ? "ok" : "failed");
  if (!r.ok) {
    s.add("failed_stage", r.failed_stage);
    s.add("error", r.error);
    return r;
  }
  const EstimateRow& last = r.estimates.rows.back();
  const double q_err = (last.q_filtered - r.plant_Q) / r.plant_Q;
  s.add("plant_capacity_Ah", r.plant_Q);
  s.add("final_q_raw_Ah", last.q_raw);
  s.add("final_q_filtered_Ah", last.q_filtered);
  s.add("q_error_pct", 100.0 * std::abs(q_err));
  s.add("q_signed_error_pct", 100.0 * q_err);
  s.add("gate_time_s", r.estimates.gate_time ? *r.estimates.gate_time : NAN);
  const auto settle = settling_time(r.estimates, r.plant_Q, 0.02);
  s.add("q_settling_time_2pct_s", settle ? *settle : NAN);
  s.add("final_D_s_n_ref_m2_s", r.estimates.final_state.theta1_hat);
  s.add("D_s_n_error_pct",
        100.0 * std::abs(r.estimates.final_state.theta1_hat - p.D_s_n_ref) / p.D_s_n_ref);
  s.add("final_theta2_ohm_Ah", last.theta2);
  s.add("final_kappa_sei_S_m", last.kappa_sei);
  s.add("final_soc_p_error", last.soc_p - r.plant.soc_p.back());
  s.add("final_soc_n_error", last.soc_n - r.plant.soc_n.back());
  double sq = 0.0;
  std::size_t n = 0;
  for (const auto& row : r.estimates.rows)
    if (row.gate_open) {
      sq += row.e_y1 * row.e_y1;
      ++n;
    }
  s.add("rms_e_y1_after_gate_V", n ? std::sqrt(sq / n) : NAN);
  s.add("observer_faults", static_cast<double>(r.estimates.faults));
  s.add("clamped_samples", static_cast<double>(r.estimates.clamped_samples));
  s.add("theta1_projections", static_cast<double>(r.estimates.final_state.theta1_projections));
  s.add("theta2_projections", static_cast<double>(r.estimates.final_state.theta2_projections));
  s.add("samples", static_cast<double>(r.estimates.rows.size()));
  s.add("seed", std::to_string(corruption.seed));
  return r;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& tr) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "t_s,current_A,temperature_K,voltage_V,soc_n,soc_p,theta_n_surf,theta_p_surf,charge_Ah\n";
  out << std::setprecision(12);
  for (std::size_t k = 0; k < tr.size(); ++k)
    out << tr.t[k] << ',' << tr.I[k] << ',' << tr.T[k] << ',' << tr.V[k] << ',' << tr.soc_n[k]
        << ',' << tr.soc_p[k] << ',' << tr.theta_n_surf[k] << ',' << tr.theta_p_surf[k] << ','
        << tr.charge_ah[k] << '\n';
}

std::string describe_twin_config(const DriveCycle& cycle, const PlantConfig& plant,
                                 const ObserverSetup& obs, const CorruptionSpec& c) {
  std::ostringstream s;
  s << std::setprecision(17);
  s << "# resolved twin-experiment configuration\n";
  s << "cycle = " << cycle.name << "\ncycle_samples = " << cycle.size() << '\n';
  s << "plant = " << (plant.aged_capacity ? "aged:" + format_number(*plant.aged_capacity) : "fresh")
    << "\nplant_soc0 = " << plant.soc0 << "\nplant_reduced_spm = "
    << (plant.reduced_spm ? "true" : "false") << "\nN = " << plant.disc.N
    << "\nM = " << plant.disc.M << "\ndt = " << plant.disc.dt << '\n';
  s << "soc_error = " << obs.soc_error << "\nq_init = " << obs.q_init
    << "\ntheta1_factor = " << obs.theta1_factor << '\n';
  if (obs.theta2_init) s << "theta2_init = " << *obs.theta2_init << '\n';
  s << "noise_std_I = " << c.noise_std_I << "\nnoise_std_V = " << c.noise_std_V
    << "\nbias_I = " << c.bias_I << "\nbias_V = " << c.bias_V << "\nseed = " << c.seed << '\n';
  write_observer_config(s, obs.config);
  return s.str();
}

void write_twin_artifacts(const std::filesystem::path& dir, const TwinResult& r,
                          const std::string& config_echo) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "config.txt");
    out << config_echo;
  }
  if (r.plant.size() > 0) write_trajectory_csv(dir / "plant.csv", r.plant);
  if (!r.measured.empty()) write_measurements(dir / "measurements.csv", r.measured);
  if (!r.estimates.rows.empty()) write_estimates_csv(dir / "estimates.csv", r.estimates);
  std::ofstream out(dir / "summary.txt");
  r.summary.write(out);
}

}  // namespace echem
