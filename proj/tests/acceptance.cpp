// Acceptance runner: one PASS/FAIL line per criterion. Exit status is
// nonzero when a criterion fails that was not listed with --expect-red.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "echem/aging.hpp"
#include "echem/electrolyte.hpp"
#include "echem/ident.hpp"
#include "echem/sei.hpp"
#include "echem/twin.hpp"

using namespace echem;

namespace {

// Tolerances
constexpr double kCapacityTol = 2.0;        // % final filtered capacity error
constexpr double kRuntimeBudget = 60.0;     // s per twin run
constexpr double kDiffusivityTol = 5.0;     // % anode diffusivity error
constexpr double kSolidConservation = 1e-9;
constexpr double kElectrolyteConservation = 1e-8;
constexpr double kIdentityTol = 1e-12;
constexpr double kFineGridTol = 0.01;
constexpr double kCorrelationTol = 1e-12;
constexpr std::size_t kSubsetSize = 7;
constexpr double kFitTol = 0.05;
constexpr double kDescentFraction = 0.99;
// error ball outside which V_O must not increase
constexpr double kBallSoc = 0.02, kBallQ = 0.02, kBallTheta1 = 0.05, kBallTheta2 = 0.05;

std::set<int> expected_red;
int unexpected = 0;

void report(int n, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s %s%s\n", n, pass ? "PASS" : "FAIL", detail.c_str(),
              !pass && expected_red.count(n) ? " (expected red)" : "");
  std::fflush(stdout);
  if (!pass && !expected_red.count(n)) ++unexpected;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

struct Context {
  CellModel model = load_cell_model(default_data_dir());
  DriveCycle us06 = load_drive_cycle(default_data_dir() / "cycles" / "us06_surrogate.csv");
  DriveCycle udds = load_drive_cycle(default_data_dir() / "cycles" / "udds_surrogate.csv");
  DriveCycle cc1 = load_drive_cycle(default_data_dir() / "cycles" / "cc_1c.csv");
  ObserverSetup setup;
  Context() { setup.config = load_observer_config(default_data_dir() / "observer.cfg", model, 10); }
};

double q_error(const TwinResult& r) {
  return r.ok ? *r.summary.number("q_error_pct") : INFINITY;
}

void capacity_criteria(const Context& cx, TwinResult& fresh_run) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  fresh_run = twin_experiment(cx.us06, cx.model, PlantConfig{}, cx.setup, CorruptionSpec{}, true);
  const double secs = std::chrono::duration<double>(clock::now() - t0).count();
  const double e1 = q_error(fresh_run);
  report(1, e1 < kCapacityTol && secs < kRuntimeBudget,
         fmt("fresh error %.3f%%", e1) + fmt(" runtime %.2f s", secs));

  PlantConfig aged;
  aged.aged_capacity = 1.84;
  const double e_us06 = q_error(twin_experiment(cx.us06, cx.model, aged, cx.setup, {}));
  aged.soc0 = 0.9;  // the charge-depleting cycle needs the headroom
  const double e_udds = q_error(twin_experiment(cx.udds, cx.model, aged, cx.setup, {}));
  report(2, e_us06 < kCapacityTol && e_udds < kCapacityTol,
         fmt("aged sustaining %.3f%%", e_us06) + fmt(" depleting %.3f%%", e_udds));

  double worst = 0;
  std::ostringstream seeds;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CorruptionSpec noise;
    noise.noise_std_I = 0.100;
    noise.noise_std_V = 0.025;
    noise.seed = seed;
    const double e = q_error(twin_experiment(cx.us06, cx.model, PlantConfig{}, cx.setup, noise));
    worst = std::max(worst, e);
    seeds << fmt(" %.3f", e);
  }
  report(3, worst < kCapacityTol, "noisy errors (%)" + seeds.str());

  CorruptionSpec bias;
  bias.bias_I = 0.010;
  bias.bias_V = 0.010;
  const double e4 = q_error(twin_experiment(cx.us06, cx.model, PlantConfig{}, cx.setup, bias));
  report(4, e4 < kCapacityTol, fmt("biased error %.3f%%", e4));
}

void adaptation_criterion(const Context& cx, const TwinResult& fresh_run) {
  // The observer carries the frozen-electrolyte model, so theta_1 is judged
  // on the model-matched twin; against the full plant it also absorbs the
  // electrolyte dynamics and is reported for reference only.
  PlantConfig matched;
  matched.reduced_spm = true;
  const auto r = twin_experiment(cx.us06, cx.model, matched, cx.setup, {});
  const double e = r.ok ? *r.summary.number("D_s_n_error_pct") : INFINITY;
  const double full = fresh_run.ok ? *fresh_run.summary.number("D_s_n_error_pct") : INFINITY;
  report(5, e < kDiffusivityTol,
         fmt("matched-twin D_s_n error %.3f%%", e) + fmt(" (full plant %.1f%%)", full));
}

void conservation_criterion(const Context& cx) {
  const auto& p = cx.model.params;
  DiscretizationConfig d;
  auto s = initial_state(p, d, 0.8, cx.model.sei.Q_0, cx.model.sei.L_sei_0);
  for (int k = 0; k < 300; ++k) s = step_solid(s, 5.0, p.T_ref, 1.0, p, d);
  const double n0 = volume_average(s.c_s_n), p0 = volume_average(s.c_s_p);
  for (int k = 0; k < 10000; ++k) s = step_solid(s, 0.0, p.T_ref, 1.0, p, d);
  const double solid = std::max(rel(volume_average(s.c_s_n), n0), rel(volume_average(s.c_s_p), p0));

  const auto layout = ElectrolyteLayout::make(p, d.M);
  Eigen::VectorXd c = Eigen::VectorXd::Constant(d.M, p.c_e_0);
  const double total0 = electrolyte_inventory(layout, c);
  for (int k = 0; k < 300; ++k) c = step_electrolyte_profile(c, 8.0, p.T_ref, 1.0, p, layout);
  for (int k = 0; k < 10000; ++k) c = step_electrolyte_profile(c, 0.0, p.T_ref, 1.0, p, layout);
  const double electrolyte = rel(electrolyte_inventory(layout, c), total0);
  report(6, solid < kSolidConservation && electrolyte < kElectrolyteConservation,
         fmt("solid drift %.2e", solid) + fmt(" electrolyte drift %.2e", electrolyte));
}

void identity_criterion(const Context& cx) {
  const auto& p = cx.model.params;
  const auto& sei = cx.model.sei;
  // capacity loss recomputed from film growth: dQ = -dL 2 F rho a A L_n / (3600 M)
  const double a = 3 * p.eps_n / p.R_n;
  double cross = 0;
  for (double i_s : {-1e-9, -3.7e-7, -1e-5, -0.02}) {
    const double via_L = -sei_growth_rate(i_s, sei, p.F) * 2 * p.F * sei.rho_sei * a * p.A *
                         p.L_n / (3600 * sei.M_sei);
    cross = std::max(cross, rel(capacity_fade_rate(i_s, p, sei), via_L));
  }
  const double rpf = std::abs(power_fade_resistance(sei.Q_0, p, sei, uniform_averages(p.c_e_0), p.T_ref));
  const double trip = rel(unpack_kappa_sei(theta_2(sei, p), p, sei), sei.kappa_sei);
  report(7, cross < kIdentityTol && rpf < kIdentityTol && trip < kIdentityTol,
         fmt("cross %.1e", cross) + fmt(" R_pf(Q0) %.1e", rpf) + fmt(" round trip %.1e", trip));
}

double worst_fine_grid_gap(const CellParameters& p) {
  double worst = 0;
  for (Electrode e : {Electrode::Anode, Electrode::Cathode}) {
    double surf[2];
    int i = 0;
    for (int N : {10, 100}) {
      DiscretizationConfig d;
      d.N = N;
      const auto sys = build_solid_system(p, d, e);
      Eigen::VectorXd c = Eigen::VectorXd::Constant(N, 0.5 * p.c_max(e));
      for (int k = 0; k < 1200; ++k)
        c = step_particle(c, 1.95, solid_diffusivity(p, e, p.T_ref), 1.0, sys, d.integrator);
      surf[i++] = c[N - 1];
    }
    worst = std::max(worst, rel(surf[0], surf[1]));
  }
  return worst;
}

double worst_correlation_gap(const SensitivityMatrix& S, const CorrelationResult& corr) {
  double worst = 0;
  for (const auto& a : corr.names) {
    const auto ia = std::find(S.names.begin(), S.names.end(), a) - S.names.begin();
    for (const auto& b : corr.names) {
      const auto ib = std::find(S.names.begin(), S.names.end(), b) - S.names.begin();
      double dot = 0, na = 0, nb = 0;
      for (Eigen::Index r = 0; r < S.S.rows(); ++r) {
        dot += S.S(r, ia) * S.S(r, ib);
        na += S.S(r, ia) * S.S(r, ia);
        nb += S.S(r, ib) * S.S(r, ib);
      }
      worst = std::max(worst, std::abs(*corr.at(a, b) - dot / std::sqrt(na * nb)));
    }
  }
  return worst;
}

void identification_criteria(const Context& cx) {
  const auto& p = cx.model.params;
  auto pv = ParameterVector::from_cell(p);
  pv.set_free({kIdentNames.begin(), kIdentNames.end()});
  const auto S = sensitivity_matrix(cx.cc1, p, pv, cx.model.ocp, DiscretizationConfig{});
  const auto corr = correlation_matrix(S);

  const double grid = worst_fine_grid_gap(p);
  const double cgap = worst_correlation_gap(S, corr);
  report(8, grid < kFineGridTol && cgap < kCorrelationTol,
         fmt("N10 vs N100 surface %.3f%%", 100 * grid) + fmt(" correlation gap %.1e", cgap));

  const auto norms = multi_vs_single_output_norms(S);
  bool dominated = norms.by_multi.size() == kIdentNames.size();
  for (const auto& row : norms.by_multi) dominated = dominated && row.multi >= row.voltage;
  const auto subset = subset_select(norms, corr, 0.2, 0.8);
  const bool leader = !subset.selected.empty() && subset.selected.front() == "A";
  std::string members;
  for (const auto& s : subset.selected) members += (members.empty() ? "" : ",") + s;
  report(9, dominated && leader && subset.selected.size() == kSubsetSize,
         std::string("multi>=single ") + (dominated ? "yes" : "no") + " leader " +
             (leader ? "A" : "?") + " |subset| " + std::to_string(subset.selected.size()) +
             " {" + members + "}");

  // synthetic truth, free set perturbed by alternating +/-20%
  DriveCycle cycle = cx.cc1;
  const auto tr = ident_simulate(cycle, p, cx.model.ocp, DiscretizationConfig{}, 1.0);
  for (std::size_t k = 0; k < cycle.size(); ++k) cycle.samples[k].V = tr.V[k];
  const auto data = make_fit_data(cycle, cathode_window_capacity(p), 1.0);
  auto start = ParameterVector::from_cell(p);
  start.set_free(subset.selected);
  double sign = 1;
  for (const auto& name : subset.selected) {
    start.set(name, start.value(name) * (1 + 0.2 * sign));
    sign = -sign;
  }
  const auto truth = ParameterVector::from_cell(p);
  const auto fitted = fit(data, start, p, cx.model.ocp, DiscretizationConfig{}, *make_optimizer("cma-es"));
  double worst = 0;
  std::string errs;
  for (const auto& name : subset.selected) {
    const double e = rel(fitted.fitted.value(name), truth.value(name));
    worst = std::max(worst, e);
    errs += " " + name + fmt(" %.4f%%", 100 * e);
  }
  report(10, !subset.selected.empty() && worst < kFitTol, "recovered" + errs);
}

void descent_criterion(const Context& cx, const TwinResult& r) {
  if (!r.ok || !r.estimates.gate_time) {
    report(11, false, "criterion-1 run unavailable");
    return;
  }
  const auto& p = cx.model.params;
  const auto& g = cx.setup.config.gains;
  const double th2 = theta_2(cx.model.sei, p);
  const auto w = solid_volume_weights(static_cast<int>(r.observer_init.x1_hat.size()));
  const double win_p = p.c_s_p_max * std::abs(p.theta_p_100 - p.theta_p_0);
  const double win_n = p.c_s_n_max * std::abs(p.theta_n_100 - p.theta_n_0);
  std::size_t outside = 0, descending = 0;
  for (std::size_t k = 0; k + 1 < r.estimates.states.size(); ++k) {
    if (r.estimates.rows[k].t < *r.estimates.gate_time) continue;
    const auto& o = r.estimates.states[k];
    const auto& s = r.plant.states[k];
    const bool in_ball = std::abs(w.dot(s.c_s_p - o.x1_hat)) / win_p <= kBallSoc &&
                         std::abs(w.dot(s.c_s_n - o.x2_hat)) / win_n <= kBallSoc &&
                         std::abs(s.Q - o.x3_hat) / s.Q <= kBallQ &&
                         rel(o.theta1_hat, p.D_s_n_ref) <= kBallTheta1 &&
                         rel(o.theta2_hat, th2) <= kBallTheta2;
    if (in_ball) continue;
    ++outside;
    const double v0 = composite_lyapunov(o, s, p.D_s_n_ref, th2, g.k1, g.k2);
    const double v1 = composite_lyapunov(r.estimates.states[k + 1], r.plant.states[k + 1],
                                         p.D_s_n_ref, th2, g.k1, g.k2);
    if (v1 <= v0) ++descending;
  }
  const double frac = outside ? double(descending) / double(outside) : 1.0;
  report(11, frac >= kDescentFraction,
         fmt("non-increasing in %.1f%%", 100 * frac) + " of " + std::to_string(outside) +
             " post-gate steps outside the ball");
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--expect-red" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      for (std::string item; std::getline(list, item, ',');) expected_red.insert(std::stoi(item));
    } else {
      std::cerr << "usage: acceptance [--expect-red 9,11]\n";
      return 2;
    }
  }
  try {
    const Context cx;
    TwinResult fresh;
    capacity_criteria(cx, fresh);
    adaptation_criterion(cx, fresh);
    conservation_criterion(cx);
    identity_criterion(cx);
    identification_criteria(cx);
    descent_criterion(cx, fresh);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return unexpected == 0 ? 0 : 1;
}
