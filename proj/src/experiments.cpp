#include "gibbsflow/experiments.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "gibbsflow/dolgopyat.hpp"
#include "gibbsflow/errors.hpp"
#include "gibbsflow/flow.hpp"
#include "gibbsflow/gibbs.hpp"
#include "gibbsflow/report.hpp"
#include "gibbsflow/uni.hpp"

namespace gf {

namespace {

namespace fs = std::filesystem;

struct Context {
  const ExperimentConfig& c;
  MarkovSystem sys;
  RunOutcome out;

  explicit Context(const ExperimentConfig& cfg) : c(cfg), sys(cfg.system) {}
  const json& p(const char* key) const { return c.parameters.at(key); }
  std::string path(const std::string& name) const { return (fs::path(c.out_dir) / name).string(); }
  void csv(const std::string& name, const Csv& t) {
    t.write(path(name));
    out.files.push_back(name);
  }
  void audit(bool ok, const std::string& what) {
    if (!ok) out.audit_failures.push_back(what);
  }
};

std::string word_string(const Word& w) {
  std::string s;
  for (int x : w) s += std::to_string(x);
  return s;
}

std::vector<double> b_list(const json& j) { return j.get<std::vector<double>>(); }

double base_c0(const MarkovSystem& sys, int N, C0Variant variant = C0Variant::Printed) {
  TransferOperator op(sys, N);
  return c0(op, eigendata(op, 0), variant).value;
}

void exp_validate(Context& x) {
  auto v = validate(x.sys, x.p("grid_points").get<int>());
  x.out.summary = {{"lambda", v.lambda},     {"rho", v.rho},         {"C4", v.C4},
                   {"C2", v.C2},             {"inf_r", v.inf_r},     {"sup_r", v.sup_r},
                   {"covering", v.covering}, {"primitive_power", v.primitive_power},
                   {"markov_residual", v.markov_residual}, {"C7", c7(x.sys)}};
}

void exp_eigen(Context& x) {
  validate(x.sys);
  TransferOperator op(x.sys, x.c.N);
  const double sigma = x.p("sigma").get<double>();
  auto e = eigendata(op, sigma, x.p("tol").get<double>());
  {
    std::ofstream f(x.path("eigen_f.csv"));
    e.f_function(op).write_csv(f);
    x.out.files.push_back("eigen_f.csv");
  }
  NormalizedOperator L(op, e, 0);
  Eigen::VectorXcd one = Eigen::VectorXcd::Ones(op.size());
  x.out.summary = {{"sigma", sigma},
                   {"lambda", e.lambda},
                   {"pressure", std::log(e.lambda)},
                   {"iterations", e.iterations},
                   {"f_min", e.f.minCoeff()},
                   {"f_max", e.f.maxCoeff()},
                   {"normalized_residual", (L.apply(one) - one).cwiseAbs().maxCoeff()},
                   {"C6", c6_bound(op, e)}};
  if (x.p("resolution_check").get<bool>()) x.out.summary["resolution_shift"] = resolution_shift(x.sys, x.c.N, sigma);
}

void exp_gibbs(Context& x) {
  validate(x.sys);
  TransferOperator op(x.sys, x.c.N);
  const double sigma = x.p("sigma").get<double>();
  const int depth = x.p("depth").get<int>();
  auto e = eigendata(op, sigma);
  auto audit = gibbs_audit(op, e, depth);
  auto table = cylinder_masses(op, e, depth);
  Csv csv({"itinerary", "depth", "mass", "ratio"});
  double total = 0;
  for (const auto& row : table.rows) {
    Cylinder cyl = make_cylinder(x.sys, row.word);
    double S = birkhoff_along(x.sys, x.sys.potential_exprs(), row.word, cyl.mid()) -
               sigma * birkhoff_along(x.sys, x.sys.roof_exprs(), row.word, cyl.mid());
    double ratio = row.mass / std::exp(-table.pressure * depth + S);
    csv.row({word_string(row.word), std::to_string(depth), num(row.mass), num(ratio)});
    total += row.mass;
  }
  x.csv("gibbs_masses.csv", csv);
  Csv per({"depth", "lower", "upper", "C5"});
  for (int n = 0; n < depth; ++n) per.row({std::to_string(n + 1), num(audit.lower[n]), num(audit.upper[n]), num(audit.C5[n])});
  x.csv("gibbs_audit.csv", per);
  x.out.summary = {{"pressure", table.pressure}, {"C5", audit.C5.back()}, {"mass_total", total}};
  x.audit(std::abs(total - 1) < 1e-9, "cylinder masses sum to " + num(total));
  x.audit(std::isfinite(audit.C5.back()), "Gibbs constant not finite");
}

void exp_partition(Context& x) {
  auto v = validate(x.sys);
  const double Delta = x.p("Delta").get<double>(), delta = x.p("delta").get<double>();
  double K = x.p("K").get<double>();
  if (K < 0) K = base_c0(x.sys, x.c.N);
  if (!(delta < Delta)) throw ConfigError("delta must be smaller than Delta", "/parameters/delta");
  auto bs = b_list(x.p("b"));
  double min_len = HUGE_VAL;
  for (int i = 0; i < x.sys.size(); ++i) min_len = std::min(min_len, x.sys.length(i));
  for (double b : bs)
    if (!(std::abs(b) > 2 * Delta * v.rho / min_len))
      throw FrequencyTooSmall("|b| = " + num(std::abs(b)) + " must exceed " + num(2 * Delta * v.rho / min_len));
  TransferOperator op(x.sys, x.c.N);
  auto e = eigendata(op, 0);
  Csv parts({"b", "left", "right", "depth"});
  Csv fed({"b", "count", "gamma", "gamma_left", "K_prime", "delta_prime"});
  for (double b : bs) {
    auto P = adapted_partition(x.sys, b, Delta);
    const double lo = 2 * Delta / std::abs(b), hi = 2 * Delta * v.rho / std::abs(b);
    for (const auto& q : P.elements) {
      parts.row({num(b), num(q.left), num(q.right), std::to_string(q.depth())});
      x.audit(q.diam() >= lo * (1 - 1e-12) && q.diam() <= hi * (1 + 1e-12),
              "diam Q = " + num(q.diam()) + " outside [" + num(lo) + ", " + num(hi) + "] at b = " + num(b));
    }
    x.audit(P.elements.size() <= std::abs(b) / (2 * Delta) * (1 + 1e-12), "too many Q at b = " + num(b));
    auto f = federer_audit(op, e, b, Delta, delta, K);
    fed.row({num(b), std::to_string(f.count), num(f.gamma), num(f.gamma_left), num(f.K_prime), num(f.delta_prime)});
    x.audit(f.gamma > 0, "gamma = 0 at b = " + num(b));
  }
  x.csv("partition.csv", parts);
  x.csv("federer.csv", fed);
  x.out.summary = {{"Delta", Delta}, {"delta", delta}, {"K", K}, {"b", bs}};
}

json coboundary_json(const CoboundaryReport& r) {
  return {{"cohomologous", r.cohomologous}, {"residual", r.residual}, {"chi", r.chi},
          {"theta_difference", r.theta_difference}, {"truncation", r.truncation}};
}

json witnesses_json(const std::vector<UniWitness>& ws, std::size_t limit = 64) {
  json out = json::array();
  for (std::size_t i = 0; i < ws.size() && i < limit; ++i)
    out.push_back({{"y", ws[i].y}, {"w1", word_string(ws[i].w1)}, {"w2", word_string(ws[i].w2)}, {"value", ws[i].value}});
  return out;
}

void exp_uni(Context& x) {
  validate(x.sys);
  const int depth = x.p("depth").get<int>();
  TransferOperator op(x.sys, x.c.N);
  auto e = eigendata(op, 0);
  auto [a, b] = ab_sequences(op, e, depth, x.p("y_grid").get<int>(), x.p("max_midpoints").get<std::size_t>());
  auto cob = coboundary_test(x.sys);
  auto uni = check_uni(x.sys, x.p("uni_depth").get<int>(), x.p("R").get<double>());
  Csv csv({"n", "a", "b"});
  for (int n = 0; n < depth; ++n) csv.row({std::to_string(n + 1), num(a.values[n]), num(b.values[n])});
  x.csv("uni_ab.csv", csv);
  x.out.summary = {{"a", a.values},
                   {"b", b.values},
                   {"cohomologous", cob.cohomologous},
                   {"residual", cob.residual},
                   {"D_full", uni.D_full},
                   {"D_point", uni.D_point},
                   {"C7", c7(x.sys)},
                   {"witnesses", witnesses_json(uni.witnesses)}};
  for (int n = 0; n < depth; ++n) {
    x.audit(a.values[n] <= 1 + 1e-9, "a(" + std::to_string(n + 1) + ") = " + num(a.values[n]) + " > 1");
    x.audit(b.values[n] <= 1 + 1e-9, "b(" + std::to_string(n + 1) + ") = " + num(b.values[n]) + " > 1");
    for (int m = 0; n + m + 1 < depth; ++m) {
      double lhs = b.values[n + m + 1], rhs = b.values[n] * b.values[m];
      x.audit(lhs <= rhs + 1e-6, "b not submultiplicative at (" + std::to_string(n + 1) + ", " +
                                     std::to_string(m + 1) + ")");
    }
  }
}

void exp_transversality(Context& x) {
  validate(x.sys);
  const double C7 = c7(x.sys);
  auto uni = check_uni(x.sys, x.p("depth").get<int>(), x.p("R").get<double>());
  auto pw = uni_from_transversality(x.sys, x.p("delta").get<double>(), x.p("b").get<double>(),
                                    x.p("beta").get<double>());
  x.out.summary = {{"C7", C7},
                   {"D_full", uni.D_full},
                   {"D_point", uni.D_point},
                   {"n1", pw.n1},
                   {"n2", pw.n2},
                   {"D", pw.D},
                   {"points", pw.points},
                   {"points_with_pair", pw.points_with_pair},
                   {"points_passing", pw.points_passing},
                   {"pass_rate", pw.pass_rate},
                   {"worst_margin", pw.worst_margin},
                   {"no_transversal_pair", pw.no_transversal_pair},
                   {"witnesses", witnesses_json(uni.witnesses)}};
  for (const auto& w : uni.witnesses)
    x.audit(std::abs(w.value) <= C7 * (1 + 1e-9), "|D psi| = " + num(w.value) + " exceeds C7");
}

void exp_cohomology(Context& x) {
  validate(x.sys);
  auto r = coboundary_test(x.sys, x.p("truncation").get<int>(), x.p("tol").get<double>());
  x.out.summary = coboundary_json(r);
  Csv csv({"element", "residual", "chi"});
  for (std::size_t i = 0; i < r.element_residuals.size(); ++i)
    csv.row({std::to_string(i), num(r.element_residuals[i]), num(r.chi[i])});
  x.csv("cohomology.csv", csv);
}

void exp_cancellation(Context& x) {
  validate(x.sys);
  auto cob = coboundary_test(x.sys);
  if (cob.cohomologous) {
    x.out.flags.push_back("no_cancellation: constant_roof_detected");
    x.out.summary = {{"cohomology", coboundary_json(cob)}};
    return;
  }
  const double delta = x.p("delta").get<double>(), beta = x.p("beta").get<double>();
  const auto variant = x.p("c0_variant") == "divided" ? C0Variant::Divided : C0Variant::Printed;
  const double C0 = base_c0(x.sys, x.c.N, variant);
  auto bs = b_list(x.p("b"));
  // Gate: every b must pass the delta constraints before anything runs.
  std::vector<DolgopyatParams> params;
  for (double b : bs) {
    params.push_back(dolgopyat_params(x.sys, C0, delta, b, beta));
    check_delta_constraints(params.back());
  }
  GridPolicy g;
  g.per_b = x.p("nodes_per_b").get<double>();
  Csv csv({"b", "m", "u2", "v2", "tau_hat", "cone_worst", "positivity", "domination", "log_hoelder", "v_hoelder",
           "cancellation_margin", "witnesses", "failed", "eta"});
  json rows = json::array();
  for (const auto& p : params) {
    TransferOperator op(x.sys, g.nodes(p.b));
    auto e = eigendata(op, 0);
    auto v0 = GridFunction::sample(x.sys, op.N(), [](int, double y) { return std::exp(cplx(0, 2 * std::numbers::pi * y)); });
    auto tr = cone_iteration(op, e, p, x.p("iterations").get<int>(), v0);
    for (const auto& s : tr.steps) {
      csv.row({num(p.b), std::to_string(s.m), num(s.u2), num(s.v2), num(s.tau_hat), num(s.cone.worst()),
               num(s.cone.positivity), num(s.cone.domination), num(s.cone.log_hoelder), num(s.cone.v_hoelder),
               num(s.cancellation_margin), std::to_string(s.witnesses), std::to_string(s.failed), num(s.eta)});
      x.audit(s.failed == 0, "Q without witness at b = " + num(p.b));
      x.audit(s.tau_hat < 1, "tau_hat = " + num(s.tau_hat) + " at b = " + num(p.b) + ", m = " + std::to_string(s.m));
    }
    x.audit(tr.worst_cone >= -1e-8, "cone margin " + num(tr.worst_cone) + " at b = " + num(p.b));
    x.audit(tr.worst_cancellation >= -1e-9, "cancellation margin " + num(tr.worst_cancellation) + " at b = " + num(p.b));
    rows.push_back({{"b", p.b}, {"N", op.N()}, {"n1", p.n1}, {"n2", p.n2}, {"Delta", p.Delta},
                    {"tau_max", tr.tau_max}, {"worst_cone", tr.worst_cone},
                    {"worst_cancellation", tr.worst_cancellation}});
  }
  x.csv("cancellation.csv", csv);
  x.out.summary = {{"C0", C0}, {"C7", c7(x.sys)}, {"delta", delta}, {"rows", rows}};
}

void exp_contraction(Context& x) {
  validate(x.sys);
  auto cob = coboundary_test(x.sys);
  if (cob.cohomologous) {
    x.out.flags.push_back("no_contraction: constant_roof_detected");
    x.out.summary = {{"cohomology", coboundary_json(cob)}, {"contraction", "none"}};
    return;
  }
  const double sigma = x.p("sigma").get<double>();
  auto bs = b_list(x.p("b"));
  ContractionOptions opt;
  opt.grid.per_b = x.p("nodes_per_b").get<double>();
  opt.random_family = x.p("family").get<int>();
  opt.seed = x.c.seed;
  opt.delta = x.p("delta").get<double>();
  auto rep = l1_contraction(x.sys, sigma, bs, x.p("beta").get<double>(), opt);
  Csv csv({"b", "k_or_ell", "ratio", "zeta_hat", "xi_hat", "witnesses_failed", "N", "C6", "family_size", "beta_ok"});
  for (const auto& r : rep.rows) {
    csv.row({num(r.b), std::to_string(r.k), num(r.ratio), num(r.zeta_hat), num(r.xi_hat),
             std::to_string(r.witnesses_failed), std::to_string(r.N), num(r.c6), std::to_string(r.family_size),
             r.beta_ok ? "1" : "0"});
    x.audit(r.ratio < 1, "L1 ratio " + num(r.ratio) + " >= 1 at b = " + num(r.b));
  }
  x.audit(rep.xi_hat > 0, "fitted xi_hat = " + num(rep.xi_hat));
  x.csv("contraction.csv", csv);
  x.out.summary = {{"xi_hat", rep.xi_hat}, {"C0", rep.C0}, {"contraction", rep.xi_hat > 0 ? "l1" : "none"}};
  if (x.p("norm_sweep").get<bool>()) {
    SweepOptions so;
    so.grid = opt.grid;
    so.random_functions = x.p("sweep_functions").get<int>();
    so.seed = x.c.seed;
    auto sw = norm_contraction_sweep(x.sys, sigma, bs, x.p("B").get<double>(), so);
    Csv ns({"b", "k_or_ell", "ratio", "zeta_hat", "xi_hat", "witnesses_failed", "envelope"});
    for (const auto& r : sw.rows) {
      ns.row({num(r.b), std::to_string(r.k), num(r.ratio), num(r.zeta_hat), num(r.xi_hat),
              std::to_string(r.witnesses_failed), num(r.envelope)});
      x.audit(r.zeta_hat <= r.envelope * (1 + 1e-9), "zeta_hat above the envelope at b = " + num(r.b));
    }
    x.csv("contraction_norm.csv", ns);
  }
}

void exp_correlate(Context& x) {
  validate(x.sys);
  TransferOperator op(x.sys, x.c.N);
  auto e = eigendata(op, x.p("sigma").get<double>());
  const double t_max = x.p("t_max").get<double>(), dt = x.p("dt").get<double>();
  std::vector<double> ts;
  for (int k = 0; k * dt <= t_max * (1 + 1e-12); ++k) ts.push_back(k * dt);
  CorrelationOptions opt;
  opt.batches = x.p("batches").get<int>();
  opt.sampling.jobs = x.c.jobs;
  opt.sampling.thin = x.p("thin").get<int>();
  opt.sampling.burn_in = x.p("burn_in").get<int>();
  auto v = parse(x.p("v").get<std::string>()), w = parse(x.p("w").get<std::string>());
  auto s = correlation_series(op, e, v, w, ts, x.p("samples").get<std::size_t>(), x.c.seed, opt);
  fit_decay(s);
  Csv csv({"t", "C_hat", "stderr", "used_in_fit"});
  for (std::size_t k = 0; k < ts.size(); ++k) csv.row({num(s.t[k]), num(s.C[k]), num(s.se[k]), s.used_in_fit[k] ? "1" : "0"});
  x.csv("correlation.csv", csv);
  // Decay must be resolved and the last tenth of the grid must be noise; a
  // constant roof keeps |C| periodic, so its window reaches t_max.
  bool tail_clear = true;
  for (std::size_t k = 0; k < ts.size(); ++k)
    if (ts[k] > 0.9 * t_max && s.used_in_fit[k]) tail_clear = false;
  const bool mixing = s.rate > 3 * s.rate_se && tail_clear;
  x.out.summary = {{"rate", s.rate},           {"rate_se", s.rate_se},     {"prefactor", s.prefactor},
                   {"window_lo", s.window_lo}, {"window_hi", s.window_hi}, {"t_star", s.t_star},
                   {"samples", s.samples},     {"tail_clear", tail_clear}, {"mixing", mixing}};
  if (!mixing) x.out.flags.push_back("no_mixing: correlations do not decay to noise");
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& c) {
  static const std::map<std::string, std::function<void(Context&)>> table = {
      {"validate", exp_validate},       {"eigen", exp_eigen},
      {"gibbs-audit", exp_gibbs},       {"partition", exp_partition},
      {"uni", exp_uni},                 {"transversality", exp_transversality},
      {"cohomology", exp_cohomology},   {"cancellation", exp_cancellation},
      {"contraction", exp_contraction}, {"correlate", exp_correlate}};
  auto it = table.find(c.experiment);
  if (it == table.end()) throw ConfigError("unknown experiment '" + c.experiment + "'", "/experiment");
  fs::create_directories(c.out_dir);
  Context x(c);
  it->second(x);
  x.out.summary["experiment"] = c.experiment;
  x.out.summary["system"] = c.system.name;
  x.out.summary["flags"] = x.out.flags;
  x.out.summary["audit_failures"] = x.out.audit_failures;
  const std::string name = c.experiment + ".json";
  write_json(x.path(name), x.out.summary);
  x.out.files.push_back(name);
  return x.out;
}

int run(const ExperimentConfig& c, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  auto out = run_experiment(c);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest = {
      {"experiment", c.experiment},
      {"system", c.system.name},
      {"config_hash", hex64(c.hash())},
      {"config", c.resolved()},
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"versions",
       {{"gibbsflow", "0.1.0"},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"boost", BOOST_LIB_VERSION}}},
      {"wall_time_s", wall},
      {"files", out.files},
      {"flags", out.flags},
      {"audit_failures", out.audit_failures},
      {"status", out.audit_ok() ? "ok" : "audit_failure"}};
  write_json((fs::path(c.out_dir) / "manifest.json").string(), manifest);
  for (const auto& f : out.flags) log << "flag: " << f << "\n";
  for (const auto& f : out.audit_failures) log << "audit failure: " << f << "\n";
  log << c.experiment << " on " << c.system.name << ": " << (out.audit_ok() ? "ok" : "AUDIT FAILURE") << " ("
      << c.out_dir << ")\n";
  return out.audit_ok() ? 0 : 2;
}

}  // namespace gf
