#include "echem/ident.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "echem/errors.hpp"

namespace echem {

namespace {

double CellParameters::*field_of(std::string_view name) {
  if (name == "c_s_n_max") return &CellParameters::c_s_n_max;
  if (name == "c_s_p_max") return &CellParameters::c_s_p_max;
  if (name == "D_s_n") return &CellParameters::D_s_n_ref;
  if (name == "D_s_p") return &CellParameters::D_s_p_ref;
  if (name == "R_n") return &CellParameters::R_n;
  if (name == "R_p") return &CellParameters::R_p;
  if (name == "A") return &CellParameters::A;
  if (name == "L_n") return &CellParameters::L_n;
  if (name == "L_p") return &CellParameters::L_p;
  if (name == "eps_n") return &CellParameters::eps_n;
  if (name == "eps_p") return &CellParameters::eps_p;
  if (name == "k_n") return &CellParameters::k_n_ref;
  if (name == "k_p") return &CellParameters::k_p_ref;
  if (name == "R_l") return &CellParameters::R_l;
  if (name == "L_s") return &CellParameters::L_s;
  if (name == "eps_e_s") return &CellParameters::eps_e_s;
  if (name == "eps_n_f") return &CellParameters::eps_n_f;
  if (name == "eps_p_f") return &CellParameters::eps_p_f;
  throw ConfigError("unknown identification parameter '" + std::string(name) + "'");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// ParameterVector

ParameterVector ParameterVector::from_cell(const CellParameters& p, double lo, double hi) {
  if (!(lo > 0.0 && lo < 1.0 && hi > 1.0 && std::isfinite(hi)))
    throw ConfigError("parameter bound factors must satisfy 0 < lo < 1 < hi");
  ParameterVector v;
  for (auto name : kIdentNames) {
    const double x = p.*field_of(name);
    v.entries_.push_back({std::string(name), x, lo * x, hi * x, false});
  }
  return v;
}

ParameterEntry& ParameterVector::find(std::string_view name) {
  for (auto& e : entries_)
    if (e.name == name) return e;
  throw ConfigError("unknown identification parameter '" + std::string(name) + "'");
}

const ParameterEntry& ParameterVector::at(std::string_view name) const {
  return const_cast<ParameterVector*>(this)->find(name);
}

void ParameterVector::set(std::string_view name, double v) { find(name).value = v; }

void ParameterVector::set_bounds(std::string_view name, double lower, double upper) {
  auto& e = find(name);
  e.lower = lower;
  e.upper = upper;
}

void ParameterVector::set_free(const std::vector<std::string>& names) {
  for (const auto& n : names) find(n);
  for (auto& e : entries_)
    e.free = std::find(names.begin(), names.end(), e.name) != names.end();
}

std::vector<std::string> ParameterVector::free_names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_)
    if (e.free) out.push_back(e.name);
  return out;
}

void ParameterVector::validate() const {
  std::vector<std::string> bad;
  for (const auto& e : entries_) {
    if (!std::isfinite(e.lower) || !std::isfinite(e.upper) || !(e.lower < e.upper))
      bad.push_back(e.name + ": bounds [" + fmt(e.lower) + ", " + fmt(e.upper) + "]");
    else if (!(e.value >= e.lower && e.value <= e.upper))
      bad.push_back(e.name + " = " + fmt(e.value) + " outside its bounds");
  }
  if (!bad.empty()) {
    std::string msg = "invalid parameter vector:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ConfigError(msg);
  }
}

CellParameters ParameterVector::apply(const CellParameters& base) const {
  CellParameters p = base;
  for (const auto& e : entries_) p.*field_of(e.name) = e.value;
  return p;
}

// ---------------------------------------------------------------------------
// Sensitivity

Eigen::MatrixXd SensitivityMatrix::block(SensitivityOutput o) const {
  const int b = static_cast<int>(o);
  return S.middleRows(static_cast<Eigen::Index>(b) * samples, samples);
}

Trajectory ident_simulate(const DriveCycle& cycle, const CellParameters& p, const OcpTable& ocp,
                          const DiscretizationConfig& disc, double soc0) {
  const EspmState init =
      initial_state(p, disc, soc0, p.electrode_capacity(Electrode::Cathode), 0.0);
  SimulationOptions opt;
  opt.keep_states = false;
  return simulate(cycle, p, ocp, disc, init, opt);
}

namespace {

Eigen::VectorXd stacked_outputs(const Trajectory& tr, const SensitivityConfig& cfg, int rows) {
  Eigen::VectorXd y(3 * rows);
  for (int i = 0; i < rows; ++i) {
    const std::size_t k = static_cast<std::size_t>(i) * cfg.decimation;
    y[i] = tr.V[k] / cfg.voltage_scale;
    y[rows + i] = tr.soc_p[k] / cfg.soc_scale;
    y[2 * rows + i] = tr.soc_n[k] / cfg.soc_scale;
  }
  return y;
}

}  // namespace

SensitivityMatrix sensitivity_matrix(const DriveCycle& cycle, const CellParameters& base,
                                     const ParameterVector& params, const OcpTable& ocp,
                                     const DiscretizationConfig& disc,
                                     const SensitivityConfig& cfg) {
  if (!(cfg.rel_step > 0.0 && cfg.rel_step < 0.5))
    throw ConfigError("sensitivity relative step must lie in (0, 0.5)");
  if (cfg.decimation < 1) throw ConfigError("sensitivity decimation must be >= 1");
  if (!(cfg.voltage_scale > 0.0 && cfg.soc_scale > 0.0))
    throw ConfigError("sensitivity output scales must be positive");

  const CellParameters nominal = params.apply(base);
  const Trajectory tr0 = ident_simulate(cycle, nominal, ocp, disc, cfg.soc0);
  const int rows = static_cast<int>((tr0.size() - 1) / cfg.decimation + 1);
  const Eigen::VectorXd y0 = stacked_outputs(tr0, cfg, rows);

  SensitivityMatrix out;
  out.samples = rows;
  for (auto o : {SensitivityOutput::Voltage, SensitivityOutput::SocP, SensitivityOutput::SocN})
    out.row_output.insert(out.row_output.end(), rows, o);
  out.names = params.free_names();
  const auto cols = static_cast<Eigen::Index>(out.names.size());
  out.S = Eigen::MatrixXd::Zero(3 * rows, cols);
  out.failed.assign(out.names.size(), false);

  auto perturbed = [&](const std::string& name, double factor) {
    ParameterVector v = params;
    v.set(name, params.value(name) * factor);
    const Trajectory tr = ident_simulate(cycle, v.apply(base), ocp, disc, cfg.soc0);
    if (tr.size() != tr0.size())
      throw SimulationError(SimulationError::Kind::Other, tr.t.back(), "run ended early");
    return stacked_outputs(tr, cfg, rows);
  };

  const double h = cfg.rel_step;
  for (Eigen::Index j = 0; j < cols; ++j) {
    const std::string& name = out.names[static_cast<std::size_t>(j)];
    try {
      if (cfg.scheme == FiniteDifference::Central)
        out.S.col(j) = (perturbed(name, 1.0 + h) - perturbed(name, 1.0 - h)) / (2.0 * h);
      else
        out.S.col(j) = (perturbed(name, 1.0 + h) - y0) / h;
      if (!out.S.col(j).allFinite()) throw IntegrationError("non-finite output");
    } catch (const std::exception& e) {
      out.S.col(j).setZero();
      out.failed[static_cast<std::size_t>(j)] = true;
      out.failures.push_back(name + ": " + e.what());
    }
  }
  out.column_norms = out.S.colwise().norm().transpose();
  return out;
}

NormTable multi_vs_single_output_norms(const SensitivityMatrix& S) {
  NormTable t;
  const Eigen::MatrixXd V = S.block(SensitivityOutput::Voltage);
  for (std::size_t j = 0; j < S.names.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    t.by_multi.push_back({S.names[j], V.col(c).norm(), S.S.col(c).norm()});
  }
  t.by_voltage = t.by_multi;
  std::stable_sort(t.by_multi.begin(), t.by_multi.end(),
                   [](const NormRow& a, const NormRow& b) { return a.multi > b.multi; });
  std::stable_sort(t.by_voltage.begin(), t.by_voltage.end(),
                   [](const NormRow& a, const NormRow& b) { return a.voltage > b.voltage; });
  return t;
}

std::optional<double> CorrelationResult::at(std::string_view a, std::string_view b) const {
  auto ia = std::find(names.begin(), names.end(), a);
  auto ib = std::find(names.begin(), names.end(), b);
  if (ia == names.end() || ib == names.end()) return std::nullopt;
  return C(ia - names.begin(), ib - names.begin());
}

CorrelationResult correlation_matrix(const SensitivityMatrix& S) {
  CorrelationResult r;
  // Columns whose norm is zero up to rounding carry no direction.
  const double max_norm = S.column_norms.size() ? S.column_norms.maxCoeff() : 0.0;
  std::vector<Eigen::Index> keep;
  for (std::size_t j = 0; j < S.names.size(); ++j) {
    const double n = S.column_norms[static_cast<Eigen::Index>(j)];
    if (S.failed[j] || !(n > 1e-12 * max_norm)) {
      r.excluded.push_back(S.names[j]);
    } else {
      keep.push_back(static_cast<Eigen::Index>(j));
      r.names.push_back(S.names[j]);
    }
  }
  const auto k = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd X(S.S.rows(), k);
  for (Eigen::Index i = 0; i < k; ++i) X.col(i) = S.S.col(keep[static_cast<std::size_t>(i)]);
  const Eigen::VectorXd n = X.colwise().norm().transpose();
  r.C = (X.transpose() * X).array() / (n * n.transpose()).array();
  return r;
}

SubsetResult subset_select(const NormTable& norms, const CorrelationResult& corr,
                           double sens_threshold, double corr_threshold) {
  SubsetResult r;
  for (const auto& row : norms.by_multi) {
    if (!(row.multi > sens_threshold)) {
      r.log.push_back({row.name, "sensitivity", "", row.multi});
      continue;
    }
    if (std::find(corr.names.begin(), corr.names.end(), row.name) == corr.names.end()) {
      r.log.push_back({row.name, "sensitivity", "", 0.0});
      continue;
    }
    std::string blocking;
    double worst = 0.0;
    for (const auto& s : r.selected) {
      const double c = std::abs(*corr.at(row.name, s));
      if (c >= corr_threshold && c > worst) {
        worst = c;
        blocking = s;
      }
    }
    if (blocking.empty())
      r.selected.push_back(row.name);
    else
      r.log.push_back({row.name, "correlation", blocking, worst});
  }
  return r;
}

// ---------------------------------------------------------------------------
// Fitting

std::vector<double> coulomb_count_soc(const DriveCycle& cycle, double Q0, double soc0) {
  if (!(Q0 > 0.0)) throw ConfigError("coulomb counting needs Q0 > 0");
  std::vector<double> soc;
  soc.reserve(cycle.size());
  double charge = 0.0;  // A s
  for (std::size_t k = 0; k < cycle.size(); ++k) {
    if (k > 0) charge += cycle.samples[k - 1].I * (cycle.samples[k].t - cycle.samples[k - 1].t);
    soc.push_back(soc0 - charge / (3600.0 * Q0));
  }
  return soc;
}

double cathode_window_capacity(const CellParameters& p) {
  return p.F * p.L_p * p.eps_p * p.c_s_p_max * std::abs(p.theta_p_100 - p.theta_p_0) * p.A /
         3600.0;
}

FitData make_fit_data(const DriveCycle& cycle, double Q0, double soc0) {
  if (!cycle.has_voltage()) throw ConfigError("fit data needs a measured voltage column");
  FitData d;
  d.cycle = cycle;
  d.Q0 = Q0;
  d.soc0 = soc0;
  d.soc = coulomb_count_soc(cycle, Q0, soc0);
  return d;
}

namespace {

CellParameters candidate_cell(const ParameterVector& candidate, const CellParameters& base,
                              const FitData& data, bool constrain_capacity) {
  CellParameters p = candidate.apply(base);
  if (constrain_capacity) {
    p.A = 1.0;
    p.A = data.Q0 / cathode_window_capacity(p);
  }
  return p;
}

}  // namespace

FitCost fit_cost(const ParameterVector& candidate, const CellParameters& base,
                 const OcpTable& ocp, const DiscretizationConfig& disc, const FitData& data,
                 const FitWeights& w, bool constrain_capacity) {
  FitCost c;
  const CellParameters p = candidate_cell(candidate, base, data, constrain_capacity);
  // A failed run costs between penalty/2 and penalty, less the further it
  // got, so simplex methods still see a slope back to feasibility.
  auto infeasible = [&](std::string why, double progress) {
    c.feasible = false;
    c.message = std::move(why);
    c.J1 = c.J2 = c.J3 = std::numeric_limits<double>::quiet_NaN();
    c.total = w.penalty * (1.0 - 0.5 * std::clamp(progress, 0.0, 1.0));
    return c;
  };
  const auto bad = p.physical_violations();
  if (!bad.empty()) return infeasible(bad.front(), 0.0);
  Trajectory tr;
  try {
    tr = ident_simulate(data.cycle, p, ocp, disc, data.soc0);
  } catch (const SimulationError& e) {
    const double t0 = data.cycle.samples.front().t;
    const double span = data.cycle.duration();
    return infeasible(e.what(), span > 0.0 ? (e.time() - t0) / span : 0.0);
  } catch (const std::exception& e) {
    return infeasible(e.what(), 0.0);
  }
  const std::size_t n = data.cycle.size();
  double s1 = 0, s2 = 0, s3 = 0;
  for (std::size_t k = 0; k < n; ++k) {
    s1 += std::pow(tr.V[k] - data.cycle.samples[k].V, 2);
    s2 += std::pow(tr.soc_p[k] - data.soc[k], 2);
    s3 += std::pow(tr.soc_n[k] - data.soc[k], 2);
  }
  c.J1 = std::sqrt(s1 / n);
  c.J2 = std::sqrt(s2 / n);
  c.J3 = std::sqrt(s3 / n);
  c.total = w.w1 * c.J1 + w.w2 * c.J2 + w.w3 * c.J3;
  if (!std::isfinite(c.total)) return infeasible("non-finite cost", 0.0);
  return c;
}

// ---------------------------------------------------------------------------
// Optimizers

namespace {

Eigen::VectorXd clamp_unit(const Eigen::VectorXd& x) { return x.cwiseMax(0.0).cwiseMin(1.0); }

// Objective on the clamped point plus a quadratic pull back into the box.
double boxed(const Objective& f, const Eigen::VectorXd& x) {
  const Eigen::VectorXd c = clamp_unit(x);
  return f(c) + (x - c).squaredNorm();
}

}  // namespace

OptimizerResult CmaEs::minimize(const Objective& f, const Eigen::VectorXd& x0, int budget) const {
  const auto n = x0.size();
  OptimizerResult r;
  r.x = clamp_unit(x0);
  r.f = std::numeric_limits<double>::quiet_NaN();
  if (budget <= 0 || n == 0) return r;

  r.f = f(r.x);
  r.evaluations = 1;
  const int lambda = opt_.population > 0 ? opt_.population
                                         : 4 + static_cast<int>(std::floor(3.0 * std::log(n)));
  const int mu = lambda / 2;
  Eigen::VectorXd w(mu);
  for (int i = 0; i < mu; ++i) w[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  w /= w.sum();
  const double mueff = 1.0 / w.squaredNorm();
  const double dn = static_cast<double>(n);
  const double cc = (4.0 + mueff / dn) / (dn + 4.0 + 2.0 * mueff / dn);
  const double cs = (mueff + 2.0) / (dn + mueff + 5.0);
  const double c1 = 2.0 / ((dn + 1.3) * (dn + 1.3) + mueff);
  const double cmu =
      std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((dn + 2.0) * (dn + 2.0) + mueff));
  const double damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (dn + 1.0)) - 1.0) + cs;
  const double chi = std::sqrt(dn) * (1.0 - 1.0 / (4.0 * dn) + 1.0 / (21.0 * dn * dn));

  std::mt19937_64 rng(opt_.seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd m = r.x, pc = Eigen::VectorXd::Zero(n), ps = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n), B = C;
  Eigen::VectorXd D = Eigen::VectorXd::Ones(n);
  double sigma = opt_.sigma0;
  std::vector<double> recent;

  for (int gen = 0; r.evaluations + lambda <= budget; ++gen) {
    std::vector<Eigen::VectorXd> ys(static_cast<std::size_t>(lambda));
    std::vector<double> fs(static_cast<std::size_t>(lambda));
    for (int k = 0; k < lambda; ++k) {
      Eigen::VectorXd z(n);
      for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
      ys[k] = B * D.asDiagonal() * z;
      const Eigen::VectorXd x = m + sigma * ys[k];
      fs[k] = boxed(f, x);
      ++r.evaluations;
      const Eigen::VectorXd xc = clamp_unit(x);
      if ((x - xc).squaredNorm() == 0.0 && fs[k] < r.f) {
        r.f = fs[k];
        r.x = xc;
      }
    }
    std::vector<int> order(static_cast<std::size_t>(lambda));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fs[a] < fs[b]; });

    Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < mu; ++i) step += w[i] * ys[order[i]];
    m += sigma * step;

    const Eigen::VectorXd invsqrt_step = B * D.cwiseInverse().asDiagonal() * B.transpose() * step;
    ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * invsqrt_step;
    const double hsig_den = std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * (gen + 1)));
    const bool hsig = ps.norm() / hsig_den / chi < 1.4 + 2.0 / (dn + 1.0);
    pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * step;
    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) rank_mu += w[i] * ys[order[i]] * ys[order[i]].transpose();
    C = (1.0 - c1 - cmu) * C + c1 * (pc * pc.transpose() + (hsig ? 0.0 : cc * (2.0 - cc)) * C) +
        cmu * rank_mu;
    sigma *= std::exp((cs / damps) * (ps.norm() / chi - 1.0));

    C = 0.5 * (C + C.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
    B = eig.eigenvectors();
    D = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt();

    r.history.push_back(r.f);
    recent.push_back(fs[order[0]]);
    if (sigma * D.maxCoeff() < opt_.x_tol) {
      r.converged = true;
      break;
    }
    const int hist = 10 + static_cast<int>(std::ceil(30.0 * dn / lambda));
    if (static_cast<int>(recent.size()) >= hist) {
      auto [lo, hi] = std::minmax_element(recent.end() - hist, recent.end());
      if (*hi - *lo < opt_.f_tol) {
        r.converged = true;
        break;
      }
    }
  }
  return r;
}

namespace {

struct GslContext {
  const Objective* f;
  int evaluations = 0;
};

double gsl_objective(const gsl_vector* v, void* params) {
  auto* ctx = static_cast<GslContext*>(params);
  Eigen::VectorXd x(static_cast<Eigen::Index>(v->size));
  for (std::size_t i = 0; i < v->size; ++i) x[static_cast<Eigen::Index>(i)] = gsl_vector_get(v, i);
  ++ctx->evaluations;
  return boxed(*ctx->f, x);
}

}  // namespace

OptimizerResult NelderMead::minimize(const Objective& f, const Eigen::VectorXd& x0,
                                     int budget) const {
  const auto n = static_cast<std::size_t>(x0.size());
  OptimizerResult r;
  r.x = clamp_unit(x0);
  r.f = std::numeric_limits<double>::quiet_NaN();
  if (budget <= static_cast<int>(n) || n == 0) return r;

  GslContext ctx{&f};
  gsl_multimin_function fn{&gsl_objective, n, &ctx};
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* step = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i) {
    gsl_vector_set(x, i, r.x[static_cast<Eigen::Index>(i)]);
    gsl_vector_set(step, i, opt_.initial_step);
  }
  gsl_multimin_fminimizer* s =
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  // Budget check leaves room for one more iteration (at most n + 2 calls).
  while (ctx.evaluations + static_cast<int>(n) + 2 <= budget) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    r.history.push_back(s->fval);
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), opt_.size_tol) == GSL_SUCCESS) {
      r.converged = true;
      break;
    }
  }
  Eigen::VectorXd best(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) best[static_cast<Eigen::Index>(i)] = gsl_vector_get(s->x, i);
  r.x = clamp_unit(best);
  r.f = s->fval;
  r.evaluations = ctx.evaluations;
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);
  return r;
}

std::unique_ptr<Optimizer> make_optimizer(std::string_view name, std::uint64_t seed) {
  if (name == "cma-es") {
    CmaEsOptions o;
    o.seed = seed;
    return std::make_unique<CmaEs>(o);
  }
  if (name == "nelder-mead") return std::make_unique<NelderMead>();
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (cma-es or nelder-mead)");
}

// ---------------------------------------------------------------------------
// fit

FitReport fit(const FitData& data, const ParameterVector& initial, const CellParameters& base,
              const OcpTable& ocp, const DiscretizationConfig& disc, const Optimizer& optimizer,
              const FitOptions& opt) {
  initial.validate();
  FitReport rep;
  rep.initial = initial;
  rep.optimizer = optimizer.name();

  // A follows from the capacity constraint, so it is not searched over.
  std::vector<std::string> dims;
  for (const auto& name : initial.free_names())
    if (!(opt.constrain_capacity && name == "A")) dims.push_back(name);

  auto to_params = [&](const Eigen::VectorXd& z) {
    ParameterVector v = initial;
    for (std::size_t i = 0; i < dims.size(); ++i) {
      const auto& e = initial.at(dims[i]);
      const double zi = std::clamp(z[static_cast<Eigen::Index>(i)], 0.0, 1.0);
      v.set(dims[i], e.lower * std::pow(e.upper / e.lower, zi));
    }
    if (opt.constrain_capacity && initial.is_free("A"))
      v.set("A", candidate_cell(v, base, data, true).A);
    return v;
  };
  Eigen::VectorXd z0(static_cast<Eigen::Index>(dims.size()));
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto& e = initial.at(dims[i]);
    z0[static_cast<Eigen::Index>(i)] = std::log(e.value / e.lower) / std::log(e.upper / e.lower);
  }

  rep.initial_cost = fit_cost(initial, base, ocp, disc, data, opt.weights, opt.constrain_capacity);
  const Objective f = [&](const Eigen::VectorXd& z) {
    return fit_cost(to_params(z), base, ocp, disc, data, opt.weights, opt.constrain_capacity)
        .total;
  };
  const OptimizerResult r = optimizer.minimize(f, z0, opt.budget);
  rep.evaluations = r.evaluations;
  rep.converged = r.converged;
  rep.history = r.history;
  if (r.evaluations == 0) {
    rep.fitted = initial;
    rep.final_cost = rep.initial_cost;
    return rep;
  }
  rep.fitted = to_params(r.x);
  rep.final_cost = fit_cost(rep.fitted, base, ocp, disc, data, opt.weights, opt.constrain_capacity);
  if (rep.initial_cost.total < rep.final_cost.total) {
    rep.fitted = initial;
    rep.final_cost = rep.initial_cost;
  }
  return rep;
}

void write_fit_report(std::ostream& out, const FitReport& r) {
  out << "# fit report, format version 1\n";
  out << "optimizer = " << r.optimizer << '\n';
  out << "evaluations = " << r.evaluations << '\n';
  out << "converged = " << (r.converged ? "true" : "false") << '\n';
  auto cost = [&](const char* tag, const FitCost& c) {
    out << tag << "_J1_V = " << fmt(c.J1) << '\n'
        << tag << "_J2 = " << fmt(c.J2) << '\n'
        << tag << "_J3 = " << fmt(c.J3) << '\n'
        << tag << "_total = " << fmt(c.total) << '\n'
        << tag << "_feasible = " << (c.feasible ? "true" : "false") << '\n';
  };
  cost("initial", r.initial_cost);
  cost("final", r.final_cost);
  out << "\n[parameters] name initial fitted lower upper free\n";
  for (std::size_t i = 0; i < r.fitted.size(); ++i) {
    const auto& a = r.initial.entries()[i];
    const auto& b = r.fitted.entries()[i];
    out << b.name << ' ' << fmt(a.value) << ' ' << fmt(b.value) << ' ' << fmt(b.lower) << ' '
        << fmt(b.upper) << ' ' << (b.free ? 1 : 0) << '\n';
  }
  out << "\n[history] iteration best_cost\n";
  for (std::size_t i = 0; i < r.history.size(); ++i) out << i << ' ' << fmt(r.history[i]) << '\n';
}

void write_sensitivity_report(std::ostream& out, const NormTable& norms,
                              const CorrelationResult& corr, const SubsetResult& subset,
                              const SensitivityMatrix& S) {
  out << "# sensitivity report, format version 1\n";
  out << "samples_per_output = " << S.samples << '\n';
  for (const auto& f : S.failures) out << "failed_column = " << f << '\n';
  out << "\n[ranking] rank name multi_output_norm voltage_only_norm\n";
  for (std::size_t i = 0; i < norms.by_multi.size(); ++i)
    out << i + 1 << ' ' << norms.by_multi[i].name << ' ' << fmt(norms.by_multi[i].multi) << ' '
        << fmt(norms.by_multi[i].voltage) << '\n';
  out << "\n[ranking_voltage_only] rank name voltage_only_norm\n";
  for (std::size_t i = 0; i < norms.by_voltage.size(); ++i)
    out << i + 1 << ' ' << norms.by_voltage[i].name << ' ' << fmt(norms.by_voltage[i].voltage)
        << '\n';
  out << "\n[correlation]";
  for (const auto& n : corr.names) out << ' ' << n;
  out << '\n';
  for (Eigen::Index i = 0; i < corr.C.rows(); ++i) {
    out << corr.names[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < corr.C.cols(); ++j) out << ' ' << fmt(corr.C(i, j));
    out << '\n';
  }
  for (const auto& e : corr.excluded) out << "excluded_zero_norm = " << e << '\n';
  out << "\n[subset]";
  for (const auto& n : subset.selected) out << ' ' << n;
  out << "\n\n[exclusions] name reason blocking value\n";
  for (const auto& e : subset.log)
    out << e.name << ' ' << e.reason << ' ' << (e.blocking.empty() ? "-" : e.blocking) << ' '
        << fmt(e.value) << '\n';
}

}  // namespace echem
