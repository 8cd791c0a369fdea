#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "echem/aging.hpp"
#include "echem/errors.hpp"
#include "support.hpp"

namespace echem {
namespace {

using testing::reference_model;

constexpr double kYear = 3.15576e7;  // s

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

TEST(SeiGrowth, ZeroLinearAndSign) {
  const auto& sei = reference_model().sei;
  EXPECT_EQ(sei_growth_rate(0.0, sei), 0.0);
  EXPECT_NEAR(sei_growth_rate(-2e-6, sei), 2 * sei_growth_rate(-1e-6, sei), 1e-30);
  EXPECT_DOUBLE_EQ(sei_growth_rate(-1e-6, sei), 1e-6 * sei.M_sei / (2 * kFaraday * sei.rho_sei));
  EXPECT_THROW(sei_growth_rate(1e-6, sei), DomainError);
  EXPECT_THROW(capacity_fade_rate(1e-6, reference_model().params, sei), DomainError);
}

// Both laws are driven by the same i_s, so their ratio is a fixed constant.
TEST(SeiGrowth, CapacityFadeCrossIdentity) {
  const auto& m = reference_model();
  const auto& p = m.params;
  const auto& sei = m.sei;
  const double a = 3 * p.eps_n / p.R_n;
  for (double i_s : {-1e-9, -3.7e-7, -1e-5, -0.02}) {
    const double dQ = capacity_fade_rate(i_s, p, sei);
    const double dL = sei_growth_rate(i_s, sei, p.F);
    const double via_L = -dL * 2 * p.F * sei.rho_sei * a * p.A * p.L_n / (3600 * sei.M_sei);
    EXPECT_LE(dQ, 0.0);
    EXPECT_LT(rel(dQ, via_L), 1e-12) << i_s;
  }
  EXPECT_EQ(capacity_fade_rate(0.0, p, sei), 0.0);
}

TEST(SeiGrowth, ConstantRateMatchesClosedForm) {
  const auto& m = reference_model();
  DiscretizationConfig d;
  const auto s = initial_state(m.params, d, 0.5, m.sei.Q_0, m.sei.L_sei_0);
  const double i_s = -2e-7;
  const auto aged = age_cell(s, SideReactionProfile::constant(i_s), 0.0, kYear, 3600.0, m.params, m.sei);
  const double L = m.sei.L_sei_0 - i_s * m.sei.M_sei * kYear / (2 * m.params.F * m.sei.rho_sei);
  const double Q = m.sei.Q_0 + i_s * (3 * m.params.eps_n / m.params.R_n) * m.params.A *
                                   m.params.L_n * kYear / 3600.0;
  EXPECT_LT(rel(aged.L_sei, L), 1e-9);
  EXPECT_LT(rel(aged.Q, Q), 1e-9);
  EXPECT_EQ(aged.c_s_n, s.c_s_n);  // concentrations are not touched
}

TEST(SeiGrowth, PiecewiseProfileIsIntegratedExactly) {
  const auto& m = reference_model();
  DiscretizationConfig d;
  const auto s = initial_state(m.params, d, 0.5, m.sei.Q_0, m.sei.L_sei_0);
  // breakpoints that do not fall on the aging step
  const SideReactionProfile prof({0.0, 1000.0, 2500.0}, {-1e-7, 0.0, -3e-7});
  const auto aged = age_cell(s, prof, 0.0, 4000.0, 700.0, m.params, m.sei);
  const double charge = -1e-7 * 1000.0 - 3e-7 * 1500.0;  // integral of i_s dt
  const double L = m.sei.L_sei_0 - charge * m.sei.M_sei / (2 * m.params.F * m.sei.rho_sei);
  EXPECT_LT(rel(aged.L_sei, L), 1e-12);
}

TEST(SeiGrowth, NoSideReactionLeavesStateUnchanged) {
  const auto& m = reference_model();
  DiscretizationConfig d;
  const auto s = initial_state(m.params, d, 0.5, m.sei.Q_0, m.sei.L_sei_0);
  const auto aged = age_cell(s, SideReactionProfile::constant(0.0), 0.0, kYear, 3600.0, m.params, m.sei);
  EXPECT_EQ(aged.Q, s.Q);
  EXPECT_EQ(aged.L_sei, s.L_sei);
}

TEST(SideReactionProfile, LoadsTwoColumnFile) {
  const auto path = std::filesystem::temp_directory_path() / "echem_is_profile.txt";
  {
    std::ofstream out(path);
    out << "# t i_s\n0 -1e-7\n100 -2e-7\n";
  }
  const auto prof = load_side_reaction_profile(path);
  EXPECT_EQ(prof.at(50.0), -1e-7);
  EXPECT_EQ(prof.at(100.0), -2e-7);
  EXPECT_EQ(prof.at(1e6), -2e-7);
  std::filesystem::remove(path);
}

TEST(ModifiedPorosity, LinearInThickness) {
  const auto& p = reference_model().params;
  EXPECT_DOUBLE_EQ(modified_porosity(0.0, p), 1 - p.eps_n - p.eps_n_f);
  const double L = 2e-8, h = 1e-10;
  const double fd = (modified_porosity(L + h, p) - modified_porosity(L - h, p)) / (2 * h);
  EXPECT_NEAR(fd, -3 * p.eps_n / p.R_n, 1e-6 * 3 * p.eps_n / p.R_n);
  EXPECT_LT(modified_porosity(L + h, p), modified_porosity(L, p));
  // shipped porosity corresponds to the BOL film
  EXPECT_NEAR(modified_porosity(reference_model().sei.L_sei_0, p), p.eps_e_n, 1e-12);
}

TEST(ModifiedPorosity, ClosesAtRootThickness) {
  const auto& p = reference_model().params;
  const double root = (1 - p.eps_n - p.eps_n_f) * p.R_n / (3 * p.eps_n);
  const double just_below = root * (1 - 1e-13);
  EXPECT_NEAR(modified_porosity(just_below, p), 0.0, 1e-12);
  EXPECT_THROW(modified_porosity(root * (1 + 1e-9), p), PoreCloggingError);
  EXPECT_THROW(modified_porosity(-1e-9, p), DomainError);
}

TEST(PowerFade, ZeroAtBeginningOfLife) {
  const auto& m = reference_model();
  for (double T : {273.15, 298.15, 318.15})
    EXPECT_NEAR(power_fade_resistance(m.sei.Q_0, m.params, m.sei, uniform_averages(1200), T), 0.0,
                1e-12);
}

TEST(PowerFade, SeiBranchIsLinear) {
  const auto& m = reference_model();
  const double th2 = theta_2(m.sei, m.params);
  const auto b = power_fade_branches(m.sei.Q_0 - 0.1, m.params, m.sei, uniform_averages(1200), 298.15);
  EXPECT_NEAR(b.sei, 0.1 * th2, 1e-15 * th2 + 1e-18);
  EXPECT_THROW(power_fade_branches(m.sei.Q_0 + 0.01, m.params, m.sei, uniform_averages(1200), 298.15),
               DomainError);
}

// 6% capacity loss, each branch evaluated from its own formula.
TEST(PowerFade, SumOfIndependentBranches) {
  const auto& m = reference_model();
  const auto& p = m.params;
  const auto& sei = m.sei;
  const double Q = 0.94 * sei.Q_0, T = 298.15;
  const auto avg = uniform_averages(1250);

  const double a = 3 * p.eps_n / p.R_n;
  const double sei_branch = 3600 * sei.M_sei /
                            (2 * p.F * p.A * p.A * sei.rho_sei * a * a * p.L_n * p.L_n * sei.kappa_sei) *
                            (sei.Q_0 - Q);
  const double L = sei.L_sei_0 + 3600 * (sei.Q_0 - Q) * sei.M_sei / (2 * p.F * sei.rho_sei * a * p.A * p.L_n);
  const double eps_aged = 1 - p.eps_n * (1 + 3 * L / p.R_n) - p.eps_n_f;
  const double eps_bol = 1 - p.eps_n * (1 + 3 * sei.L_sei_0 / p.R_n) - p.eps_n_f;
  const double kap = electrolyte_conductivity(1250, T);
  auto Re = [&](double eps_n) {
    return (p.L_n / (kap * std::pow(eps_n, 1.5)) + 2 * p.L_s / (kap * std::pow(p.eps_e_s, 1.5)) +
            p.L_p / (kap * std::pow(p.eps_e_p, 1.5))) / (2 * p.A);
  };
  const double expected = sei_branch + Re(eps_aged) - Re(eps_bol);
  EXPECT_LT(rel(power_fade_resistance(Q, p, sei, avg, T), expected), 1e-10);
}

TEST(PowerFade, MonotoneAlongFade) {
  const auto& m = reference_model();
  double prev = -1;
  for (double Q = m.sei.Q_0; Q > 1.5; Q -= 0.01) {
    const double r = power_fade_resistance(Q, m.params, m.sei, uniform_averages(1200), 298.15);
    EXPECT_GT(r, prev);
    prev = r;
  }
}

TEST(Theta2, TracksKappaAndRoundTrips) {
  const auto& m = reference_model();
  auto sei = m.sei;
  const double th = theta_2(sei, m.params);
  EXPECT_LT(rel(unpack_kappa_sei(th, m.params, sei), sei.kappa_sei), 1e-12);
  sei.kappa_sei *= 3.0;
  EXPECT_LT(rel(theta_2(sei, m.params), th / 3.0), 1e-12);
  EXPECT_LT(rel(unpack_kappa_sei(2 * th, m.params, m.sei), 0.5 * m.sei.kappa_sei), 1e-12);
  EXPECT_THROW(unpack_kappa_sei(0.0, m.params, m.sei), DomainError);
}

TEST(AgedPlant, VoltageDropIsIRpf) {
  const auto& m = reference_model();
  DiscretizationConfig d;
  const auto fresh = initial_state(m.params, d, 0.6, m.sei.Q_0, m.sei.L_sei_0);
  const auto aged = age_to_capacity(fresh, 1.84, m.params, m.sei);
  EXPECT_DOUBLE_EQ(aged.Q, 1.84);
  EXPECT_EQ(aged.c_s_p, fresh.c_s_p);
  const auto layout = ElectrolyteLayout::make(m.params, d.M);
  const double Rpf = power_fade_resistance(1.84, m.params, m.sei, region_averages(layout, aged.c_e), 298.15);
  EXPECT_GT(Rpf, 0.0);
  for (double I : {1.0, 3.9, -2.0}) {
    const double v_aged = terminal_voltage(aged, I, 298.15, m.params, m.ocp, m.sei);
    const double v_fresh = terminal_voltage(aged, I, 298.15, m.params, m.ocp);
    EXPECT_NEAR(v_aged - v_fresh, -I * Rpf, 1e-12);
  }
  // larger IR drop than the fresh plant at equal current
  const double drop_fresh = terminal_voltage(fresh, 0, 298.15, m.params, m.ocp, m.sei) -
                            terminal_voltage(fresh, 3.9, 298.15, m.params, m.ocp, m.sei);
  const double drop_aged = terminal_voltage(aged, 0, 298.15, m.params, m.ocp, m.sei) -
                           terminal_voltage(aged, 3.9, 298.15, m.params, m.ocp, m.sei);
  EXPECT_GT(drop_aged, drop_fresh);
}

TEST(AgedPlant, AgingStateFields) {
  const auto& m = reference_model();
  DiscretizationConfig d;
  const auto aged = age_to_capacity(initial_state(m.params, d, 0.6, m.sei.Q_0, m.sei.L_sei_0), 1.84,
                                    m.params, m.sei);
  const auto st = aging_state(aged, m.params, m.sei, uniform_averages(1200), 298.15);
  EXPECT_LE(st.Q, m.sei.Q_0);
  EXPECT_GE(st.L_sei, m.sei.L_sei_0);
  EXPECT_GT(st.eps_e_n_current, 0.0);
  EXPECT_LE(st.eps_e_n_current, m.params.eps_e_n);
  EXPECT_NEAR(st.R_sei_delta, theta_2(m.sei, m.params) * (m.sei.Q_0 - 1.84), 1e-15);
  EXPECT_GE(st.R_pf, st.R_sei_delta);
}

}  // namespace
}  // namespace echem
