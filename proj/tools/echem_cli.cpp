// Command-line front end: simulate, observe, twin, identify, sensitivity,
// validate-gains. Exit codes: 0 success, 1 domain or runtime failure,
// 2 usage error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "echem/aging.hpp"
#include "echem/errors.hpp"
#include "echem/ident.hpp"
#include "echem/observer.hpp"
#include "echem/twin.hpp"

namespace fs = std::filesystem;
using namespace echem;

namespace {

struct Common {
  std::string data_dir = default_data_dir().string();
  std::string out;
  int N = 10, M = 30;
  double dt = 1.0;

  DiscretizationConfig disc() const {
    DiscretizationConfig d;
    d.N = N;
    d.M = M;
    d.dt = dt;
    d.validate();
    return d;
  }
  // --out wins, then ECHEM_OUTPUT_DIR/<command>, then out/<command>.
  fs::path out_dir(const std::string& command) const {
    if (!out.empty()) return out;
    if (const char* env = std::getenv("ECHEM_OUTPUT_DIR")) return fs::path(env) / command;
    return fs::path("out") / command;
  }
  std::string echo() const {
    std::ostringstream s;
    s << "data_dir = " << data_dir << "\nN = " << N << "\nM = " << M << "\ndt = " << dt << '\n';
    return s.str();
  }
};

void add_common(CLI::App* app, Common& c, bool with_disc = true) {
  app->add_option("--data-dir", c.data_dir, "Cell data directory")
      ->check(CLI::ExistingDirectory)
      ->capture_default_str();
  app->add_option("--out", c.out, "Output directory (default $ECHEM_OUTPUT_DIR/<command> or out/<command>)");
  if (with_disc) {
    app->add_option("--nodes", c.N, "Radial nodes per particle")->capture_default_str();
    app->add_option("--cells", c.M, "Electrolyte cells")->capture_default_str();
    app->add_option("--dt", c.dt, "Integration step, s")->capture_default_str();
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void finish(const fs::path& dir, const Summary& s, const std::string& config) {
  fs::create_directories(dir);
  write_text(dir / "config.txt", config);
  std::ofstream out(dir / "summary.txt");
  s.write(out);
  std::cout << "wrote " << (dir / "summary.txt").string() << '\n';
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  Common c;
  std::string cycle, plant = "fresh";
  double soc0 = 1.0;
  double v_min = 2.5;
};

int run_simulate(const SimulateArgs& a) {
  const CellModel model = load_cell_model(a.c.data_dir);
  const DriveCycle cycle = load_drive_cycle(a.cycle);
  PlantConfig plant = parse_plant(a.plant);
  const auto disc = a.c.disc();
  EspmState init = initial_state(model.params, disc, a.soc0, model.sei.Q_0, model.sei.L_sei_0);
  if (plant.aged_capacity) init = age_to_capacity(init, *plant.aged_capacity, model.params, model.sei);
  SimulationOptions opt;
  opt.aging = model.sei;
  opt.v_min = a.v_min;
  opt.keep_states = false;
  const Trajectory tr = simulate(cycle, model.params, model.ocp, disc, init, opt);

  const fs::path dir = a.c.out_dir("simulate");
  fs::create_directories(dir);
  write_trajectory_csv(dir / "trajectory.csv", tr);
  Summary s;
  s.add("status", "ok");
  s.add("samples", static_cast<double>(tr.size()));
  s.add("capacity_Ah", init.Q);
  s.add("initial_voltage_V", tr.V.front());
  s.add("final_voltage_V", tr.V.back());
  s.add("min_voltage_V", *std::min_element(tr.V.begin(), tr.V.end()));
  s.add("final_soc_p", tr.soc_p.back());
  s.add("final_soc_n", tr.soc_n.back());
  s.add("charge_delivered_Ah", tr.charge_ah.back());
  s.add("cutoff_reached", tr.cutoff_reached ? "true" : "false");
  std::ostringstream echo;
  echo << "# resolved simulate configuration\ncycle = " << a.cycle << "\nplant = " << a.plant
       << "\nsoc0 = " << a.soc0 << "\nv_min = " << a.v_min << '\n'
       << a.c.echo();
  finish(dir, s, echo.str());
  std::cout << "simulated " << tr.size() << " samples, V " << format_number(tr.V.front()) << " -> "
            << format_number(tr.V.back()) << " V\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ObserveArgs {
  Common c;
  std::string measurements, config;
  double soc0 = 0.15, q_init = 2.1, theta1_factor = 0.1;
  double theta2 = 0;  // 0 = nominal
};

int run_observe(const ObserveArgs& a) {
  const CellModel model = load_cell_model(a.c.data_dir);
  const auto stream = load_measurements(a.measurements);
  const std::string cfg_path = a.config.empty() ? (fs::path(a.c.data_dir) / "observer.cfg").string() : a.config;
  const ObserverConfig cfg = load_observer_config(cfg_path, model, a.c.N);
  const double theta2 = a.theta2 > 0 ? a.theta2 : theta_2(model.sei, model.params);
  const ObserverState init = initial_observer_state(model, a.c.N, a.soc0, a.q_init,
                                                    a.theta1_factor * model.params.D_s_n_ref, theta2);
  const EstimateTrajectory e = run_observer(stream, cfg, model, init);

  const fs::path dir = a.c.out_dir("observe");
  fs::create_directories(dir);
  write_estimates_csv(dir / "estimates.csv", e);
  const auto& last = e.rows.back();
  Summary s;
  s.add("status", "ok");
  s.add("samples", static_cast<double>(e.rows.size()));
  s.add("final_q_raw_Ah", last.q_raw);
  s.add("final_q_filtered_Ah", last.q_filtered);
  s.add("final_soc_p", last.soc_p);
  s.add("final_soc_n", last.soc_n);
  s.add("final_D_s_n_m2_s", last.theta1);
  s.add("final_theta2_ohm_Ah", last.theta2);
  s.add("final_kappa_sei_S_m", last.kappa_sei);
  s.add("gate_time_s", e.gate_time ? *e.gate_time : NAN);
  s.add("observer_faults", static_cast<double>(e.faults));
  s.add("clamped_samples", static_cast<double>(e.clamped_samples));
  std::ostringstream echo;
  echo << "# resolved observe configuration\nmeasurements = " << a.measurements
       << "\nsoc0 = " << a.soc0 << "\nq_init = " << a.q_init
       << "\ntheta1_factor = " << a.theta1_factor << "\ntheta2_init = " << theta2 << '\n'
       << a.c.echo();
  write_observer_config(echo, cfg);
  finish(dir, s, echo.str());
  for (const auto& w : e.warnings) std::cout << "warning: " << w << '\n';
  std::cout << "final capacity estimate " << format_number(last.q_filtered) << " Ah\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TwinArgs {
  Common c;
  std::string cycle, plant = "fresh", config;
  double soc0 = 0.6, soc_error = 0.45, q_init = 2.1, theta1_factor = 0.1;
  bool reduced = false;
  CorruptionSpec corruption;
};

int run_twin(const TwinArgs& a) {
  const CellModel model = load_cell_model(a.c.data_dir);
  const DriveCycle cycle = load_drive_cycle(a.cycle);
  PlantConfig plant = parse_plant(a.plant);
  plant.soc0 = a.soc0;
  plant.reduced_spm = a.reduced;
  plant.disc = a.c.disc();
  a.corruption.validate();
  ObserverSetup setup;
  const std::string cfg_path = a.config.empty() ? (fs::path(a.c.data_dir) / "observer.cfg").string() : a.config;
  setup.config = load_observer_config(cfg_path, model, plant.disc.N);
  setup.soc_error = a.soc_error;
  setup.q_init = a.q_init;
  setup.theta1_factor = a.theta1_factor;

  const TwinResult r = twin_experiment(cycle, model, plant, setup, a.corruption);
  const fs::path dir = a.c.out_dir("twin");
  write_twin_artifacts(dir, r, describe_twin_config(cycle, plant, setup, a.corruption) + a.c.echo());
  std::cout << "wrote " << (dir / "summary.txt").string() << '\n';
  if (!r.ok) {
    std::cerr << "twin experiment failed in the " << r.failed_stage << " stage: " << r.error << '\n';
    return 1;
  }
  for (const auto& w : r.estimates.warnings) std::cout << "warning: " << w << '\n';
  std::cout << "plant " << format_number(r.plant_Q) << " Ah, estimate "
            << format_number(r.estimates.rows.back().q_filtered) << " Ah, error "
            << format_number(*r.summary.number("q_error_pct")) << " %\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct SensitivityArgs {
  Common c;
  std::string cycle;
  SensitivityConfig cfg;
  std::string scheme = "central";
  double sens_threshold = 0.2, corr_threshold = 0.8;
};

struct Pipeline {
  SensitivityMatrix S;
  NormTable norms;
  CorrelationResult corr;
  SubsetResult subset;
};

Pipeline identifiability(const DriveCycle& cycle, const CellModel& model,
                         const DiscretizationConfig& disc, const SensitivityConfig& cfg,
                         double sens_threshold, double corr_threshold) {
  ParameterVector pv = ParameterVector::from_cell(model.params);
  pv.set_free({kIdentNames.begin(), kIdentNames.end()});
  Pipeline p;
  p.S = sensitivity_matrix(cycle, model.params, pv, model.ocp, disc, cfg);
  p.norms = multi_vs_single_output_norms(p.S);
  p.corr = correlation_matrix(p.S);
  p.subset = subset_select(p.norms, p.corr, sens_threshold, corr_threshold);
  return p;
}

int run_sensitivity(SensitivityArgs a) {
  const CellModel model = load_cell_model(a.c.data_dir);
  const DriveCycle cycle = load_drive_cycle(a.cycle);
  a.cfg.scheme = a.scheme == "forward" ? FiniteDifference::Forward : FiniteDifference::Central;
  const Pipeline p = identifiability(cycle, model, a.c.disc(), a.cfg, a.sens_threshold, a.corr_threshold);

  const fs::path dir = a.c.out_dir("sensitivity");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "sensitivity.txt");
    write_sensitivity_report(out, p.norms, p.corr, p.subset, p.S);
  }
  Summary s;
  s.add("status", "ok");
  s.add("samples_per_output", static_cast<double>(p.S.samples));
  s.add("failed_columns", static_cast<double>(p.S.failures.size()));
  s.add("subset_size", static_cast<double>(p.subset.selected.size()));
  s.add("subset_leader", p.subset.selected.empty() ? "-" : p.subset.selected.front());
  std::string members;
  for (const auto& n : p.subset.selected) members += (members.empty() ? "" : ",") + n;
  s.add("subset", members.empty() ? "-" : members);
  std::ostringstream echo;
  echo << "# resolved sensitivity configuration\ncycle = " << a.cycle << "\nscheme = " << a.scheme
       << "\nrel_step = " << a.cfg.rel_step << "\ndecimation = " << a.cfg.decimation
       << "\nsoc0 = " << a.cfg.soc0 << "\nvoltage_scale = " << a.cfg.voltage_scale
       << "\nsoc_scale = " << a.cfg.soc_scale << "\nsens_threshold = " << a.sens_threshold
       << "\ncorr_threshold = " << a.corr_threshold << '\n'
       << a.c.echo();
  finish(dir, s, echo.str());
  std::cout << "selected " << members << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct IdentifyArgs {
  Common c;
  std::string cycle, free, optimizer = "cma-es";
  double q0 = 0, soc0 = 1.0;
  int budget = 2000;
  std::uint64_t seed = 7;
  bool no_constraint = false;
};

int run_identify(const IdentifyArgs& a) {
  const CellModel model = load_cell_model(a.c.data_dir);
  const DriveCycle cycle = load_drive_cycle(a.cycle);
  const auto disc = a.c.disc();
  const double q0 = a.q0 > 0 ? a.q0 : cathode_window_capacity(model.params);
  const FitData data = make_fit_data(cycle, q0, a.soc0);

  std::vector<std::string> free;
  if (a.free.empty() || a.free == "auto") {
    SensitivityConfig sc;
    sc.soc0 = a.soc0;
    free = identifiability(cycle, model, disc, sc, 0.2, 0.8).subset.selected;
  } else {
    std::stringstream ss(a.free);
    for (std::string item; std::getline(ss, item, ',');)
      if (!item.empty()) free.push_back(item);
  }
  ParameterVector pv = ParameterVector::from_cell(model.params);
  pv.set_free(free);
  const auto opt = make_optimizer(a.optimizer, a.seed);
  FitOptions fo;
  fo.budget = a.budget;
  fo.constrain_capacity = !a.no_constraint;
  const FitReport r = fit(data, pv, model.params, model.ocp, disc, *opt, fo);

  const fs::path dir = a.c.out_dir("identify");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "fit_report.txt");
    write_fit_report(out, r);
  }
  Summary s;
  s.add("status", "ok");
  s.add("optimizer", r.optimizer);
  s.add("evaluations", static_cast<double>(r.evaluations));
  s.add("converged", r.converged ? "true" : "false");
  s.add("final_J1_V", r.final_cost.J1);
  s.add("final_J2", r.final_cost.J2);
  s.add("final_J3", r.final_cost.J3);
  s.add("final_total", r.final_cost.total);
  for (const auto& n : free) s.add("fitted_" + n, r.fitted.value(n));
  std::ostringstream echo;
  echo << "# resolved identify configuration\ncycle = " << a.cycle << "\nq0 = " << q0
       << "\nsoc0 = " << a.soc0 << "\nfree = ";
  for (std::size_t i = 0; i < free.size(); ++i) echo << (i ? "," : "") << free[i];
  echo << "\noptimizer = " << a.optimizer << "\nbudget = " << a.budget << "\nseed = " << a.seed
       << "\ncapacity_constraint = " << (fo.constrain_capacity ? "true" : "false") << '\n'
       << a.c.echo();
  finish(dir, s, echo.str());
  std::cout << "fit " << (r.converged ? "converged" : "stopped") << " after " << r.evaluations
            << " evaluations, voltage RMS " << format_number(r.final_cost.J1) << " V\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct GainsArgs {
  Common c;
  std::string config;
};

int run_validate_gains(const GainsArgs& a) {
  const CellModel model = load_cell_model(a.c.data_dir);
  const std::string cfg_path = a.config.empty() ? (fs::path(a.c.data_dir) / "observer.cfg").string() : a.config;
  const auto disc = a.c.disc();
  const ObserverConfig cfg = load_observer_config(cfg_path, model, disc.N);
  const ValidationReport rep = validate_gains(cfg.gains, model, disc, {}, cfg.bounds);
  Summary s;
  s.add("status", rep.all_passed() ? "ok" : "failed");
  for (const auto& c : rep.checks) {
    std::cout << (c.passed ? "pass " : "FAIL ") << c.name << "  value " << format_number(c.value)
              << "  bound " << format_number(c.bound) << "  (" << c.detail << ")\n";
    s.add(c.name, c.passed ? "pass" : "fail");
  }
  std::ostringstream echo;
  echo << "# resolved validate-gains configuration\nconfig = " << cfg_path << '\n' << a.c.echo();
  write_observer_config(echo, cfg);
  finish(a.c.out_dir("validate-gains"), s, echo.str());
  return rep.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Electrochemical cell model, adaptive observer and identification tools"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run the ESPM over a drive cycle");
  add_common(s, sim.c);
  s->add_option("--cycle", sim.cycle, "Drive cycle CSV")->required()->check(CLI::ExistingFile);
  s->add_option("--plant", sim.plant, "fresh or aged:<Ah>")->capture_default_str();
  s->add_option("--soc0", sim.soc0, "Initial state of charge")->capture_default_str();
  s->add_option("--v-min", sim.v_min, "Discharge cutoff, V")->capture_default_str();

  ObserveArgs obs;
  auto* o = app.add_subcommand("observe", "Run the observer on a measured stream");
  add_common(o, obs.c);
  o->add_option("--measurements", obs.measurements, "CSV with t_s,current_A,temperature_K,voltage_V")
      ->required()
      ->check(CLI::ExistingFile);
  o->add_option("--config", obs.config, "Observer configuration (default <data-dir>/observer.cfg)")
      ->check(CLI::ExistingFile);
  o->add_option("--soc0", obs.soc0, "Initial SOC estimate")->capture_default_str();
  o->add_option("--q-init", obs.q_init, "Initial capacity estimate, Ah")->capture_default_str();
  o->add_option("--theta1-factor", obs.theta1_factor, "Initial D_s_n estimate over the nominal value")
      ->capture_default_str();
  o->add_option("--theta2", obs.theta2, "Initial theta_2, ohm/Ah (0 = nominal)");

  TwinArgs tw;
  auto* t = app.add_subcommand("twin", "Plant -> corruption -> observer experiment");
  add_common(t, tw.c);
  t->add_option("--cycle", tw.cycle, "Drive cycle CSV")->required()->check(CLI::ExistingFile);
  t->add_option("--plant", tw.plant, "fresh or aged:<Ah>")->capture_default_str();
  t->add_option("--config", tw.config, "Observer configuration (default <data-dir>/observer.cfg)")
      ->check(CLI::ExistingFile);
  t->add_option("--soc0", tw.soc0, "Plant initial SOC")->capture_default_str();
  t->add_option("--soc-error", tw.soc_error, "Initial SOC offset of the observer")->capture_default_str();
  t->add_option("--q-init", tw.q_init, "Initial capacity estimate, Ah")->capture_default_str();
  t->add_option("--theta1-factor", tw.theta1_factor, "Initial D_s_n estimate over truth")
      ->capture_default_str();
  t->add_flag("--reduced", tw.reduced, "Plant with frozen electrolyte (model-matched twin)");
  t->add_option("--noise-i", tw.corruption.noise_std_I, "Current noise std, A");
  t->add_option("--noise-v", tw.corruption.noise_std_V, "Voltage noise std, V");
  t->add_option("--bias-i", tw.corruption.bias_I, "Current bias, A");
  t->add_option("--bias-v", tw.corruption.bias_V, "Voltage bias, V");
  t->add_option("--seed", tw.corruption.seed, "Noise seed")->capture_default_str();

  IdentifyArgs id;
  auto* i = app.add_subcommand("identify", "Fit parameters to a measured cycle");
  add_common(i, id.c);
  i->add_option("--cycle", id.cycle, "Cycle CSV with a voltage_V column")->required()->check(CLI::ExistingFile);
  i->add_option("--q0", id.q0, "Measured capacity, Ah (default: from the parameter file)");
  i->add_option("--soc0", id.soc0, "Initial SOC")->capture_default_str();
  i->add_option("--free", id.free, "Comma-separated free parameters, or auto")->capture_default_str();
  i->add_option("--optimizer", id.optimizer, "cma-es or nelder-mead")
      ->check(CLI::IsMember({"cma-es", "nelder-mead"}))
      ->capture_default_str();
  i->add_option("--budget", id.budget, "Cost evaluations")->capture_default_str();
  i->add_option("--seed", id.seed, "Optimizer seed")->capture_default_str();
  i->add_flag("--no-capacity-constraint", id.no_constraint, "Fit A freely instead of from Q0");

  SensitivityArgs se;
  auto* e = app.add_subcommand("sensitivity", "Sensitivity ranking, correlation and subset selection");
  add_common(e, se.c);
  e->add_option("--cycle", se.cycle, "Drive cycle CSV")->required()->check(CLI::ExistingFile);
  e->add_option("--scheme", se.scheme, "central or forward")
      ->check(CLI::IsMember({"central", "forward"}))
      ->capture_default_str();
  e->add_option("--rel-step", se.cfg.rel_step, "Relative perturbation")->capture_default_str();
  e->add_option("--decimation", se.cfg.decimation, "Keep every n-th sample")->capture_default_str();
  e->add_option("--soc0", se.cfg.soc0, "Initial SOC")->capture_default_str();
  e->add_option("--sens-threshold", se.sens_threshold)->capture_default_str();
  e->add_option("--corr-threshold", se.corr_threshold)->capture_default_str();

  GainsArgs g;
  auto* v = app.add_subcommand("validate-gains", "Check observer gains against the design conditions");
  add_common(v, g.c);
  v->add_option("--config", g.config, "Observer configuration (default <data-dir>/observer.cfg)")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 2;
  }

  try {
    if (*s) return run_simulate(sim);
    if (*o) return run_observe(obs);
    if (*t) return run_twin(tw);
    if (*i) return run_identify(id);
    if (*e) return run_sensitivity(se);
    if (*v) return run_validate_gains(g);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 2;
}
