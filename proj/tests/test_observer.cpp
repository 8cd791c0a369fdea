#include <gtest/gtest.h>

#include <cmath>

#include "echem/aging.hpp"
#include "echem/errors.hpp"
#include "echem/observer.hpp"
#include "echem/twin.hpp"
#include "support.hpp"

namespace echem {
namespace {

using testing::reference_model;

constexpr int kN = 10;
constexpr double kEnvelope = 0.025;  // V, ESPM vs reduced-model voltage bound

const ObserverConfig& shipped_config() {
  static const ObserverConfig cfg =
      load_observer_config(default_data_dir() / "observer.cfg", reference_model(), kN);
  return cfg;
}

DriveCycle cycle(const std::string& name) {
  return load_drive_cycle(default_data_dir() / "cycles" / (name + ".csv"));
}

ObserverState exact_state(double soc) {
  const auto& m = reference_model();
  return initial_observer_state(m, kN, soc, m.sei.Q_0, m.params.D_s_n_ref,
                                theta_2(m.sei, m.params));
}

std::vector<Measurement> to_stream(const Trajectory& tr) {
  std::vector<Measurement> out;
  for (std::size_t k = 0; k < tr.size(); ++k) out.push_back({tr.t[k], tr.I[k], tr.V[k], tr.T[k]});
  return out;
}

TEST(ValidateGains, ShippedDefaultsPass) {
  const auto rep = validate_gains(shipped_config().gains, reference_model(), DiscretizationConfig{});
  for (const auto& c : rep.checks) EXPECT_TRUE(c.passed) << c.name << " " << c.value << " vs " << c.bound;
  EXPECT_TRUE(rep.all_passed());
  ASSERT_NE(rep.find("G3"), nullptr);
  ASSERT_NE(rep.find("cathode-spectrum"), nullptr);
}

TEST(ValidateGains, PositiveG1EntryBreaksSignPattern) {
  auto g = shipped_config().gains;
  g.G1[3] = 5.0;
  const auto rep = validate_gains(g, reference_model(), DiscretizationConfig{});
  EXPECT_FALSE(rep.find("sign-pattern")->passed);
  EXPECT_FALSE(rep.all_passed());
}

TEST(ValidateGains, RatioViolationReportsDeviation) {
  auto g = shipped_config().gains;
  g.G2 *= 1.1;
  const auto* c = validate_gains(g, reference_model(), DiscretizationConfig{}).find("gain-ratio");
  ASSERT_NE(c, nullptr);
  EXPECT_FALSE(c->passed);
  EXPECT_NEAR(c->value, 0.1, 1e-9);
}

TEST(ValidateGains, ShippedGainsSatisfyRatio) {
  const auto& g = shipped_config().gains;
  for (int i = 0; i < kN; ++i)
    EXPECT_NEAR(g.G1[i] / g.gamma_p2, -g.G2[i] / g.gamma_n2, 1e-9 * std::abs(g.G1[i] / g.gamma_p2));
}

TEST(SlidingSwitch, SignAndBoundaryLayer) {
  EXPECT_EQ(sliding_switch(0.0, 0.0), 0.0);
  EXPECT_EQ(sliding_switch(-1e-9, 0.0), -1.0);
  EXPECT_EQ(sliding_switch(0.002, 0.005), 0.4);
  EXPECT_EQ(sliding_switch(0.02, 0.005), 1.0);
}

TEST(ObserverOutput, OpenCircuitIsOcpDifference) {
  const auto& m = reference_model();
  const auto& p = m.params;
  const auto s = exact_state(0.4);
  const Measurement meas{0, 0.0, 0, 298.15};
  const double Up = m.ocp.cathode.potential(s.x1_hat[kN - 1] / p.c_s_p_max, 298.15, p.T_ref);
  const double Un = m.ocp.anode.potential(s.x2_hat[kN - 1] / p.c_s_n_max, 298.15, p.T_ref);
  EXPECT_NEAR(observer_output(s, meas, m, Electrode::Cathode), Up - Un, 1e-15);
}

TEST(ObserverOutput, NominalCapacityLeavesOnlyBolResistance) {
  const auto& m = reference_model();
  const auto& p = m.params;
  auto s = exact_state(0.5);
  s.theta2_hat *= 7.0;  // must not matter at x3 = Q_0
  const double I = 2.5, T = 298.15;
  const Measurement meas{0, I, 0, T};
  const double cp = s.x1_hat[kN - 1], cn = s.x2_hat[kN - 1];
  const double expected = m.ocp.cathode.potential(cp / p.c_s_p_max, T, p.T_ref) +
                          overpotential(cp, p.c_e_0, I, T, Electrode::Cathode, p) -
                          m.ocp.anode.potential(cn / p.c_s_n_max, T, p.T_ref) -
                          overpotential(cn, p.c_e_0, I, T, Electrode::Anode, p) - p.R_l * I -
                          electrolyte_resistance(p, uniform_averages(p.c_e_0), T, p.eps_e_n) * I;
  EXPECT_NEAR(observer_output(s, meas, m, Electrode::Cathode), expected, 1e-12);
}

TEST(ObserverOutput, BothOutputsAgreeWhenCopiesCoincide) {
  const auto& m = reference_model();
  auto s = exact_state(0.3);
  s.x3_hat = 1.9;
  const Measurement meas{0, -1.2, 0, 305.0};
  EXPECT_EQ(observer_output(s, meas, m, Electrode::Cathode),
            observer_output(s, meas, m, Electrode::Anode));
  s.x2_ol.array() += 100.0;  // cathode output reads the open-loop anode copy
  EXPECT_NE(observer_output(s, meas, m, Electrode::Cathode),
            observer_output(s, meas, m, Electrode::Anode));
}

TEST(CathodeStep, NoErrorNoCurrentLeavesCapacity) {
  const auto& m = reference_model();
  auto s = exact_state(0.5);
  s.gate_open = true;
  s.x3_hat = 2.1;
  const Measurement meas{0, 0.0, 3.7, 298.15};
  const auto out = cathode_observer_step(s, meas, 3.7, shipped_config().gains, m, 1.0);
  EXPECT_FALSE(out.fault);
  EXPECT_EQ(out.state.x3_hat, 2.1);
  EXPECT_LT((out.state.x1_hat - s.x1_hat).norm(), 1e-9);
}

TEST(CathodeStep, CapacityFrozenWhileGateClosed) {
  const auto& m = reference_model();
  auto s = exact_state(0.5);
  const Measurement meas{0, 3.0, 3.7, 298.15};
  const auto out = cathode_observer_step(s, meas, 3.6, shipped_config().gains, m, 1.0);
  EXPECT_EQ(out.state.x3_hat, s.x3_hat);
  s.gate_open = true;
  const auto open = cathode_observer_step(s, meas, 3.6, shipped_config().gains, m, 1.0);
  EXPECT_NEAR(open.state.x3_hat - s.x3_hat, shipped_config().gains.G3 * 0.1 * 3.0, 1e-12);
}

TEST(CathodeStep, NanResidualIsRejected) {
  const auto& m = reference_model();
  const auto s = exact_state(0.5);
  const Measurement meas{0, 1.0, std::nan(""), 298.15};
  const auto out = cathode_observer_step(s, meas, 3.6, shipped_config().gains, m, 1.0);
  EXPECT_TRUE(out.fault);
  EXPECT_EQ(out.state.x1_hat, s.x1_hat);
}

TEST(AnodeStep, ZeroErrorIsOpenLoop) {
  const auto& m = reference_model();
  const auto& p = m.params;
  auto s = exact_state(0.6);
  s.x2_hat[0] -= 300.0;  // non-uniform so diffusion acts
  const Measurement meas{0, 2.0, 3.7, 298.15};
  const auto out = anode_observer_step(s, meas, 3.7, shipped_config().gains, m, 1.0);
  DiscretizationConfig d;
  const auto sys = build_solid_system(p, d, Electrode::Anode);
  const auto open = step_particle(s.x2_hat, 2.0, p.D_s_n_ref, 1.0, sys, Integrator::ImplicitEuler);
  EXPECT_LT((out.state.x2_hat - open).cwiseAbs().maxCoeff(), 1e-9);
}

// Recovers the applied injection from the implicit update and compares it
// with G2 e + G_v2 sgn(e), G_v2 = -beta2 G2.
TEST(AnodeStep, AppliedSlidingGainIsMinusBetaG2) {
  const auto& m = reference_model();
  const auto& p = m.params;
  auto g = shipped_config().gains;
  g.phi = 0.0;
  const auto s = exact_state(0.6);
  const double e = 4e-3, dt = 1.0;
  const Measurement meas{0, 1.0, 3.7, 298.15};
  const auto with = anode_observer_step(s, meas, 3.7 - e, g, m, dt).state.x2_hat;
  const auto without = anode_observer_step(s, meas, 3.7, g, m, dt).state.x2_hat;
  DiscretizationConfig d;
  const auto sys = build_solid_system(p, d, Electrode::Anode);
  const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(kN, kN) - dt * p.D_s_n_ref * sys.A;
  const Eigen::VectorXd inj = lhs * (with - without) / dt;
  const Eigen::VectorXd expected = g.G2 * e + (-g.beta2 * g.G2) * 1.0;
  EXPECT_LT((inj - expected).cwiseAbs().maxCoeff(), 1e-6 * expected.cwiseAbs().maxCoeff());
}

TEST(AdaptTheta1, NoResidualNoUpdate) {
  const auto& m = reference_model();
  auto s = exact_state(0.5);
  s.x2_hat[0] -= 500;
  s.x1_ol = s.x1_hat;
  Measurement meas{0, 1.0, 0, 298.15};
  meas.V = observer_output(s, meas, m, Electrode::Anode);
  EXPECT_EQ(adapt_theta1(s, meas, shipped_config().gains, m, 1.0).theta1_hat, s.theta1_hat);
}

TEST(AdaptTheta1, DirectionFollowsStencilAndResidual) {
  const auto& m = reference_model();
  const auto& p = m.params;
  DiscretizationConfig d;
  const auto sys = build_solid_system(p, d, Electrode::Anode);
  for (double bump : {-500.0, 500.0}) {
    for (double de : {-0.003, 0.003}) {
      auto s = exact_state(0.5);
      s.x2_hat[kN - 2] += bump;
      Measurement meas{0, 1.0, 0, 298.15};
      meas.V = observer_output(s, meas, m, Electrode::Anode) + de;
      const double CAx = sys.A.row(kN - 1).dot(s.x2_hat);
      const double change = adapt_theta1(s, meas, shipped_config().gains, m, 1.0).theta1_hat - s.theta1_hat;
      EXPECT_EQ(std::signbit(change), std::signbit(CAx * de)) << bump << " " << de;
      EXPECT_NE(change, 0.0);
    }
  }
}

TEST(AdaptTheta1, ProjectedIntoBounds) {
  const auto& m = reference_model();
  auto g = shipped_config().gains;
  g.k1 *= 1e-12;  // violent update
  auto s = exact_state(0.5);
  s.x2_hat[kN - 2] += 1000;
  Measurement meas{0, 1.0, 0, 298.15};
  meas.V = observer_output(s, meas, m, Electrode::Anode) - 0.01;
  const auto out = adapt_theta1(s, meas, g, m, 1.0);
  EXPECT_GE(out.theta1_hat, 0.01 * m.params.D_s_n_ref);
  EXPECT_LE(out.theta1_hat, 100 * m.params.D_s_n_ref);
  EXPECT_EQ(out.theta1_projections, 1);
}

TEST(AdaptTheta2, ZeroCurrentOrNominalCapacityNoUpdate) {
  const auto& m = reference_model();
  const auto& g = shipped_config().gains;
  auto s = exact_state(0.5);
  s.x3_hat = 1.8;
  Measurement rest{0, 0.0, 3.0, 298.15};
  EXPECT_EQ(adapt_theta2(s, rest, g, m, 1.0).state.theta2_hat, s.theta2_hat);
  s.x3_hat = m.sei.Q_0;
  Measurement load{0, 2.0, 3.0, 298.15};
  EXPECT_EQ(adapt_theta2(s, load, g, m, 1.0).state.theta2_hat, s.theta2_hat);
  s.x3_hat = 1.8;
  EXPECT_NE(adapt_theta2(s, load, g, m, 1.0).state.theta2_hat, s.theta2_hat);
}

TEST(AdaptTheta2, RefusedWhenRatioBroken) {
  const auto& m = reference_model();
  auto g = shipped_config().gains;
  g.G2 *= 1.01;
  auto s = exact_state(0.5);
  s.x3_hat = 1.8;
  const auto out = adapt_theta2(s, Measurement{0, 2.0, 3.0, 298.15}, g, m, 1.0);
  EXPECT_TRUE(out.fault);
  EXPECT_NE(out.diagnostic.find("refused"), std::string::npos);
  EXPECT_EQ(out.state.theta2_hat, s.theta2_hat);
}

TEST(UnpackKappa, ShippedSeiRoundTrip) {
  const auto& m = reference_model();
  const double k = unpack_kappa_sei(theta_2(m.sei, m.params), m.params, m.sei);
  EXPECT_LT(std::abs(k - m.sei.kappa_sei) / m.sei.kappa_sei, 1e-12);
}

TEST(SignStructure, OppositeConcentrationErrorsGiveOppositeOcpErrors) {
  const auto& m = reference_model();
  const auto& p = m.params;
  int pairs = 0;
  for (int i = 1; i < 20; ++i) {
    for (int j = 1; j < 20; ++j) {
      const double sp = i / 20.0, sn = j / 20.0;
      for (double d : {-0.05, 0.05}) {
        // cathode true above estimate, anode true below (or the reverse)
        const double tp = p.theta_at_soc(Electrode::Cathode, sp);
        const double tn = p.theta_at_soc(Electrode::Anode, sn);
        const double h1 = m.ocp.cathode.potential(tp + d, p.T_ref, p.T_ref) -
                          m.ocp.cathode.potential(tp, p.T_ref, p.T_ref);
        const double h2 = m.ocp.anode.potential(tn - d, p.T_ref, p.T_ref) -
                          m.ocp.anode.potential(tn, p.T_ref, p.T_ref);
        ASSERT_NE(h1, 0.0);
        EXPECT_EQ(std::signbit(h1), !std::signbit(h2));
        ++pairs;
      }
    }
  }
  EXPECT_EQ(pairs, 19 * 19 * 2);
}

TEST(Excitation, Definitions) {
  const std::vector<double> zero(1000, 0.0), constant(1000, 2.5);
  EXPECT_FALSE(persistence_of_excitation_check(zero, 1.0, 100, 1e-6, 1e9).passed);
  const auto c = persistence_of_excitation_check(constant, 1.0, 100, 1.0, 1e9);
  EXPECT_EQ(c.min_integral, 2.5 * 2.5 * 100);
  EXPECT_EQ(c.max_integral, 2.5 * 2.5 * 100);
  EXPECT_TRUE(c.passed);
}

TEST(Excitation, ShippedCyclesPassDefaults) {
  for (const char* name : {"us06_surrogate", "udds_surrogate"}) {
    std::vector<double> u;
    for (const auto& s : cycle(name).samples) u.push_back(s.I);
    const auto r = persistence_of_excitation_check(u, 1.0, kExcitationWindow, kExcitationDelta1,
                                                   kExcitationDelta2);
    EXPECT_TRUE(r.passed) << name << " min " << r.min_integral;
  }
}

TEST(RunObserver, ZeroErrorFixedPoint) {
  const auto& m = reference_model();
  DiscretizationConfig d;
  SimulationOptions opt;
  opt.frozen_electrolyte = true;
  opt.keep_states = false;
  const auto tr = simulate(cycle("us06_surrogate"), m.params, m.ocp, d,
                           initial_state(m.params, d, 0.6, m.sei.Q_0, m.sei.L_sei_0), opt);
  const auto est = run_observer(to_stream(tr), shipped_config(), m, exact_state(0.6));
  double worst = 0;
  for (const auto& r : est.rows) worst = std::max({worst, std::abs(r.e_y1), std::abs(r.e_y2)});
  EXPECT_LT(worst, 1e-9);
  EXPECT_NEAR(est.final_state.x3_hat, m.sei.Q_0, 1e-9);
  EXPECT_NEAR(est.final_state.theta1_hat, m.params.D_s_n_ref, 1e-6 * m.params.D_s_n_ref);
  EXPECT_NEAR(est.rows.back().soc_p, tr.soc_p.back(), 1e-9);
}

TEST(RunObserver, GateOpensOnceAndCapacityWaits) {
  const auto& m = reference_model();
  ObserverSetup setup;
  setup.config = shipped_config();
  const auto r = twin_experiment(cycle("us06_surrogate"), m, PlantConfig{}, setup, CorruptionSpec{});
  ASSERT_TRUE(r.ok) << r.error;
  ASSERT_TRUE(r.estimates.gate_time.has_value());
  int transitions = 0;
  for (std::size_t k = 1; k < r.estimates.rows.size(); ++k) {
    const auto& row = r.estimates.rows[k];
    transitions += row.gate_open != r.estimates.rows[k - 1].gate_open;
    if (!row.gate_open) EXPECT_EQ(row.q_raw, setup.q_init);
  }
  EXPECT_EQ(transitions, 1);
  // the filter acts downstream: raw and filtered differ once adaptation runs
  EXPECT_NE(r.estimates.rows.back().q_raw, r.estimates.rows.back().q_filtered);
}

TEST(RunObserver, NeverGatingStreamWarns) {
  const auto& m = reference_model();
  ObserverSetup setup;
  setup.config = shipped_config();
  setup.config.gating.threshold = 1e-12;
  const auto r = twin_experiment(cycle("us06_surrogate"), m, PlantConfig{}, setup, CorruptionSpec{});
  ASSERT_TRUE(r.ok);
  EXPECT_FALSE(r.estimates.gate_time.has_value());
  EXPECT_FALSE(r.estimates.final_state.gate_open);
  EXPECT_FALSE(r.estimates.warnings.empty());
  EXPECT_EQ(r.estimates.rows.back().q_raw, setup.q_init);
}

// Reduced-model twin: after the first 800 s the windowed worst anode surface
// error never grows by more than 5% over the best window seen so far.
TEST(RunObserver, AnodeErrorDecaysInMatchedTwin) {
  const auto& m = reference_model();
  ObserverSetup setup;
  setup.config = shipped_config();
  PlantConfig plant;
  plant.reduced_spm = true;
  const auto r = twin_experiment(cycle("us06_surrogate"), m, plant, setup, CorruptionSpec{});
  ASSERT_TRUE(r.ok);
  std::vector<double> window_max;
  for (std::size_t k = 0; k < r.estimates.rows.size(); ++k) {
    if (k % 400 == 0) window_max.push_back(0);
    window_max.back() = std::max(window_max.back(), std::abs(r.estimates.rows[k].theta_n_surf -
                                                             r.plant.theta_n_surf[k]));
  }
  double best = window_max[1];
  EXPECT_LT(window_max[1], window_max[0]);
  for (std::size_t w = 2; w < window_max.size(); ++w) {
    EXPECT_LE(window_max[w], 1.05 * best) << "window " << w;
    best = std::min(best, window_max[w]);
  }
  EXPECT_LT(best, 0.02);
}

// Ball a: the standard initialization (SOC 0.45 low, Q 2.1 Ah, D at 0.1x).
// Ball b: |SOC error| <= 0.5 on both electrodes, |Q error| <= 0.3 Ah,
// theta1 within the projection bounds.
TEST(RunObserver, PracticalStability) {
  const auto& m = reference_model();
  ObserverSetup setup;
  setup.config = shipped_config();
  for (const char* plant_text : {"fresh", "aged:1.84"}) {
    for (const char* name : {"us06_surrogate", "udds_surrogate"}) {
      const auto r = twin_experiment(cycle(name), m, parse_plant(plant_text), setup, CorruptionSpec{}, true);
      ASSERT_TRUE(r.ok) << plant_text << " " << name << ": " << r.error;
      EXPECT_LE(std::abs(r.observer_init.x3_hat - r.plant_Q), 0.3);
      for (std::size_t k = 0; k < r.estimates.rows.size(); ++k) {
        const auto& row = r.estimates.rows[k];
        ASSERT_LE(std::abs(row.soc_p - r.plant.soc_p[k]), 0.5) << row.t;
        ASSERT_LE(std::abs(row.soc_n - r.plant.soc_n[k]), 0.5) << row.t;
        ASSERT_LE(std::abs(row.q_raw - r.plant_Q), 0.3) << row.t;
        const double th1 = r.estimates.states[k].theta1_hat / m.params.D_s_n_ref;
        ASSERT_GE(th1, 0.01);
        ASSERT_LE(th1, 100.0);
      }
    }
  }
}

// The aged twin's theta2 and capacity imply a power-fade resistance whose
// voltage drop differs from the plant's by less than the model envelope.
TEST(RunObserver, AgedTheta2ReproducesPowerFade) {
  const auto& m = reference_model();
  const auto& p = m.params;
  ObserverSetup setup;
  setup.config = shipped_config();
  const auto r = twin_experiment(cycle("us06_surrogate"), m, parse_plant("aged:1.84"), setup, CorruptionSpec{});
  ASSERT_TRUE(r.ok);
  const auto& fs = r.estimates.final_state;
  const auto avg = uniform_averages(p.c_e_0);
  const double R_obs = capacity_electrolyte_resistance(fs.x3_hat, p, m.sei, avg, p.T_ref) -
                       capacity_electrolyte_resistance(m.sei.Q_0, p, m.sei, avg, p.T_ref) -
                       (fs.x3_hat - m.sei.Q_0) * fs.theta2_hat;
  const double R_plant = power_fade_resistance(r.plant_Q, p, m.sei, avg, p.T_ref);
  double I_max = 0;
  for (const auto& s : r.clean) I_max = std::max(I_max, std::abs(s.I));
  EXPECT_LT(std::abs(R_obs - R_plant) * I_max, kEnvelope);
  EXPECT_GT(fs.theta2_hat, 0.0);
}

TEST(CompositeLyapunov, ZeroAtExactStateAndWeighted) {
  const auto& m = reference_model();
  DiscretizationConfig d;
  const auto plant = initial_state(m.params, d, 0.6, m.sei.Q_0, m.sei.L_sei_0);
  auto obs = exact_state(0.6);
  const double th2 = theta_2(m.sei, m.params);
  EXPECT_EQ(composite_lyapunov(obs, plant, m.params.D_s_n_ref, th2, 1e35, 1e12), 0.0);
  obs.x3_hat += 0.1;
  obs.theta2_hat += 0.01;
  obs.x1_hat[0] += 2.0;
  EXPECT_NEAR(composite_lyapunov(obs, plant, m.params.D_s_n_ref, th2, 1e35, 1e12),
              0.5 * 4.0 + 0.5 * 0.01 + 0.5 * 1e12 * 1e-4, 1e-6);
}

TEST(ObserverConfig, AutoEntriesResolve) {
  const auto& g = shipped_config().gains;
  EXPECT_EQ(g.G1.size(), kN);
  EXPECT_GT(g.gamma_p2, 0.0);
  EXPECT_GT(g.gamma_n2, 0.0);
  EXPECT_GT(g.alpha_Q2, 0.0);
  EXPECT_GT(g.h_tol_1, 0.0);
  EXPECT_GT(g.h_tol_2, 0.0);
  EXPECT_NEAR(g.gamma_n2 / g.gamma_p2, lithium_conserving_ratio(reference_model().params), 1e-12);
}

}  // namespace
}  // namespace echem
