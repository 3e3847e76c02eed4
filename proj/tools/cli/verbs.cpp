#include "cli/verbs.hpp"

#include <cmath>
#include <cstdlib>

#include "cli/battery.hpp"
#include "transfer/algebra.hpp"
#include "transfer/kam.hpp"
#include "transfer/solvers.hpp"

namespace transfer::cli {
namespace {

const json& need(const json& inputs, const char* key) {
  auto it = inputs.find(key);
  if (it == inputs.end() || it->is_null()) throw SchemaError(std::string("$.") + key, "missing input");
  return *it;
}

struct Pair {
  ProbMeasure mu, nu;
};

Pair measures(const json& inputs) {
  return {read_measure(need(inputs, "mu"), "$.mu"), read_measure(need(inputs, "nu"), "$.nu")};
}

AscentConfig ascent_config(const RunConfig& cfg) {
  AscentConfig ac;
  ac.seed = cfg.seed;
  ac.tol = resolve_tol(cfg, ac.tol);
  return ac;
}

KamConfig kam_config(const json& inputs, const RunConfig& cfg, const Space& space) {
  KamConfig kc;
  kc.seed = cfg.seed;
  kc.tol = resolve_tol(cfg, kc.tol);
  if (auto it = inputs.find("base_point"); it != inputs.end() && !it->is_null()) {
    if (!it->is_string()) throw SchemaError("$.base_point", "expected a point label");
    kc.base_point = space->index_of(it->get<std::string>());
  }
  return kc;
}

json labelled(const Space& s, const Vec& v) {
  json j = json::object();
  for (std::size_t i = 0; i < s->size(); ++i) j[s->label(i)] = num(v(static_cast<Eigen::Index>(i)));
  return j;
}

json sequence(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

Report eval_verb(const json& in, const RunConfig&) {
  Report r;
  const TransferHandle t = read_transfer(need(in, "transfer"), "$.transfer");
  const auto [mu, nu] = measures(in);
  t.check_arguments(mu, nu);
  const Evaluation ev = t.evaluate(mu, nu);
  r.values["value"] = claim(ev.value, ev.tol, ev.method);
  r.values["converged"] = ev.converged;
  if (t.cost && std::isfinite(ev.value)) {
    const LPSolution s = solve_transport_lp(*t.cost, mu, nu);
    r.witnesses["coupling"] = mat_json(s.coupling->matrix());
    r.witnesses["phi"] = potential_json(*s.phi);
    r.witnesses["psi"] = potential_json(*s.psi);
  }
  r.provenance = {{"transfer", t.name}, {"method", ev.method}, {"note", ev.note}};
  if (!ev.converged) r.status = "not_converged";
  return r;
}

Report dual_gap_verb(const json& in, const RunConfig& cfg) {
  Report r;
  const TransferHandle t = read_transfer(need(in, "transfer"), "$.transfer");
  const auto [mu, nu] = measures(in);
  t.check_arguments(mu, nu);
  const AscentConfig ac = ascent_config(cfg);
  const Evaluation ev = t.evaluate(mu, nu);
  const bool backward = t.has_backward();
  const DualReport d = backward ? backward_dual(t, mu, nu, ac) : forward_dual(t, mu, nu, ac);
  const bool both_infinite = !std::isfinite(ev.value) && d.ascent.unbounded;
  const double gap = both_infinite ? 0.0 : ev.value - d.value;
  const double gap_tol = 1e-5;
  r.values["primal"] = claim(ev.value, ev.tol, ev.method);
  r.values["dual"] = claim(both_infinite ? kInfinity : d.value, d.ascent.gap(), "ascent");
  r.values["dual_upper_bound"] = claim(d.upper_bound, 0.0, "ascent");
  r.values["gap"] = claim(gap, gap_tol, "ascent");
  r.values["closed"] = std::abs(gap) <= gap_tol;
  if (d.potential) r.witnesses["potential"] = potential_json(*d.potential);
  r.provenance = {{"transfer", t.name},   {"side", backward ? "backward" : "forward"},
                  {"seed", cfg.seed},     {"tol", ac.tol},
                  {"iterations", d.ascent.iterations}, {"primal_method", ev.method}};
  if (!d.ascent.warning.empty()) r.warnings.push_back(d.ascent.warning);
  if (!d.ascent.converged && std::abs(gap) > gap_tol) r.status = "not_converged";
  return r;
}

ComposedTransfer chain_of(const json& in) {
  const std::vector<TransferHandle> parts = read_chain(need(in, "chain"), "$.chain");
  ComposedTransfer ct = convolve(parts[0], parts[1]);
  for (std::size_t i = 2; i < parts.size(); ++i) ct = convolve(ct, parts[i]);
  return ct;
}

Report convolve_verb(const json& in, const RunConfig& cfg) {
  Report r;
  const ComposedTransfer ct = chain_of(in);
  const auto [mu, nu] = measures(in);
  const AscentConfig ac = ascent_config(cfg);
  const ConvolutionValue v = ct.primal(mu, nu, ac);
  r.values["primal"] = claim(v.value, std::max(0.0, v.value - v.lower_bound), v.method);
  if (v.sigma) r.witnesses["sigma"] = vec_json(*v.sigma);
  if (const auto cost = ct.exact_cost()) {
    const double exact = solve_transport_lp(*cost, mu, nu).value;
    r.values["composed_cost_value"] = claim(exact, 0.0, "min-plus");
    r.witnesses["composed_cost"] = cost_json(*cost);
    json mids = json::array();
    for (const Vec& s : optimal_intermediates(ct, mu, nu)) mids.push_back(vec_json(s));
    r.witnesses["intermediates"] = mids;
  }
  if (ct.direction == Direction::Backward) {
    const DualReport d = backward_dual(ct.handle(ac), mu, nu, ac);
    r.values["dual"] = claim(d.value, d.ascent.gap(), "ascent");
    if (d.potential) r.witnesses["potential"] = potential_json(*d.potential);
  }
  json names = json::array();
  for (const auto& p : ct.parts) names.push_back(p.name);
  r.provenance = {{"parts", names}, {"seed", cfg.seed}, {"tol", ac.tol}, {"method", v.method}};
  if (!v.converged) r.status = "not_converged";
  return r;
}

Report tensor_verb(const json& in, const RunConfig&) {
  Report r;
  const std::vector<TransferHandle> parts = read_chain(need(in, "chain"), "$.chain");
  if (parts.size() != 2) throw SchemaError("$.chain", "tensor takes exactly two transfers");
  const TransferHandle t = tensor(parts[0], parts[1]);
  const auto [mu, nu] = measures(in);
  t.check_arguments(mu, nu);
  const Evaluation ev = t.evaluate(mu, nu);
  r.values["value"] = claim(ev.value, ev.tol, ev.method);
  r.values["converged"] = ev.converged;
  r.witnesses["source"] = space_json(t.source);
  r.witnesses["target"] = space_json(t.target);
  r.provenance = {{"transfer", t.name}, {"method", ev.method}};
  if (!ev.converged) r.status = "not_converged";
  return r;
}

Report ineq_verb(const json& in, const RunConfig& cfg) {
  Report r;
  const InequalitySpec spec = read_inequality(need(in, "spec"), "$.spec");
  SearchConfig sc;
  sc.seed = cfg.seed;
  sc.tol = resolve_tol(cfg, sc.tol);
  const GapReport g = check_te_inequality(spec, sc);
  r.values["primal_gap"] = claim(g.primal_gap, g.tol, g.primal_path);
  r.values["dual_gap"] = claim(g.dual_gap, g.tol, "ascent");
  r.values["verdict"] = g.verdict();
  r.values["dual_verdict"] = g.dual_holds() ? "HOLDS" : "VIOLATED";
  r.values["consistent"] = g.consistent();
  r.witnesses["worst_sigma"] = vec_json(g.worst_sigma);
  if (g.worst_sigma2.size()) r.witnesses["worst_sigma2"] = vec_json(g.worst_sigma2);
  r.witnesses["worst_potential"] = vec_json(g.worst_potential);
  r.witnesses["worst_member"] = g.worst_member;
  r.provenance = {{"form", to_string(g.form)}, {"grid_step", g.grid_step}, {"restarts", g.restarts},
                  {"seed", g.seed},            {"tol", g.tol},             {"primal_path", g.primal_path}};
  r.warnings = g.warnings;
  if (!g.consistent()) r.warnings.push_back("primal and dual verdicts disagree");
  return r;
}

Report kam_verb(const json& in, const RunConfig& cfg) {
  Report r;
  const TransferHandle t = read_transfer(need(in, "transfer"), "$.transfer");
  const KamConfig kc = kam_config(in, cfg, t.source);
  const EffectiveConstant ec = effective_constant(t, kc);
  const KamResult res = weak_kam_solve(calibrate(t, ec.ell), kc);
  const double half_width = 0.5 * (ec.upper - ec.lower);
  r.values["ell"] = claim(ec.ell, ec.exact ? 0.0 : half_width, ec.exact ? "min-plus" : "iteration");
  r.values["ell_bracket"] = {{"lower", claim(ec.lower, 0.0, "iteration")}, {"upper", claim(ec.upper, 0.0, "iteration")}};
  r.values["C"] = claim(ec.C, 0.0, ec.exact ? "min-plus" : "iteration");
  r.values["residual"] = claim(res.residual, kc.tol, res.method);
  r.values["converged"] = res.converged;
  if (res.u) r.witnesses["u"] = potential_json(*res.u);
  r.witnesses["M"] = sequence(res.M);
  r.witnesses["m"] = sequence(res.m);
  r.provenance = {{"method", res.method},        {"ell_method", ec.method}, {"iterations", res.iterations},
                  {"period", res.period},        {"seed", kc.seed},         {"tol", kc.tol},
                  {"base_point", t.source->label(kc.base_point)}};
  if (ec.exact) r.provenance["tv_modulus"] = num(ec.tv_modulus);
  if (!res.converged) {
    r.status = "not_converged";
    r.warnings.push_back(res.message);
  }
  r.csv_header = {"n", "M_n", "m_n", "residual"};
  const std::size_t rows = std::max(res.M.size(), res.trace.size());
  for (std::size_t i = 0; i < rows; ++i)
    r.csv_rows.push_back({json(i + 1), i < res.M.size() ? num(res.M[i]) : json(),
                          i < res.m.size() ? num(res.m[i]) : json(),
                          i < res.trace.size() ? num(res.trace[i]) : json()});
  return r;
}

double ell_for(const json& in, const TransferHandle& t, const KamConfig& kc) {
  if (auto it = in.find("ell"); it != in.end() && !it->is_null()) return read_number(*it, "$.ell");
  return effective_constant(t, kc).ell;
}

Report barrier_verb(const json& in, const RunConfig& cfg) {
  Report r;
  const TransferHandle t = read_transfer(need(in, "transfer"), "$.transfer");
  const KamConfig kc = kam_config(in, cfg, t.source);
  const double ell = ell_for(in, t, kc);
  const PeierlsBarrier b = peierls_barrier(t, ell, kc);
  r.values["ell_used"] = claim(ell, 0.0, b.h ? "min-plus" : "iteration");
  r.values["exact"] = b.exact;
  r.values["lower_bound"] = b.lower_bound;
  if (b.h) {
    r.values["idempotence_defect"] = claim(idempotence_defect(b), 1e-8, "min-plus");
    r.witnesses["h"] = cost_json(*b.h);
  } else {
    const std::size_t n = t.source->size();
    Mat table(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < n; ++y)
        table(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = b.eval(dirac(t.source, x), dirac(t.source, y));
    r.witnesses["h_lower_bound"] = mat_json(table);
    r.warnings.push_back("generic route: barrier values are lower bounds (sup over seeded potentials)");
  }
  if (b.lower) r.witnesses["liminf_lower"] = mat_json(*b.lower);
  if (b.upper) r.witnesses["liminf_upper"] = mat_json(*b.upper);
  if (b.h && !b.exact) r.warnings.push_back("no period detected; h is the min over the last window");
  r.provenance = {{"method", b.method}, {"burn_in", b.burn_in}, {"period", b.period},
                  {"seed", kc.seed},    {"samples", kc.samples}};
  if (b.h && !b.exact) r.status = "not_converged";
  return r;
}

Report mather_verb(const json& in, const RunConfig& cfg) {
  Report r;
  const TransferHandle t = read_transfer(need(in, "transfer"), "$.transfer");
  const KamConfig kc = kam_config(in, cfg, t.source);
  const double ell = ell_for(in, t, kc);
  const PeierlsBarrier b = peierls_barrier(t, ell, kc);
  const AubryReport a = aubry_mather(t, ell, b, std::max(kc.tol, 1e-8));
  r.values["ell"] = claim(ell, 0.0, b.h ? "min-plus" : "iteration");
  if (a.mather_value) r.values["mather_value"] = claim(*a.mather_value, 1e-8, "exact-lp");
  if (a.mather_calibrated) r.values["mather_calibrated"] = claim(*a.mather_calibrated, 1e-8, "exact-lp");
  r.values["factorization_error"] = claim(a.factorization_error, a.tol_used, b.h ? "min-plus" : "sampled");
  r.witnesses["aubry_points"] = a.labels;
  json measures_j = json::array();
  for (const auto& m : a.aubry_measures) measures_j.push_back(vec_json(m.weights()));
  r.witnesses["aubry_measures"] = measures_j;
  r.witnesses["certificates"] = sequence(a.certificates);
  if (a.mather_plan) r.witnesses["mather_plan"] = mat_json(*a.mather_plan);
  if (a.mather_marginal) r.witnesses["mather_marginal"] = labelled(t.source, *a.mather_marginal);
  r.provenance = {{"barrier_method", b.method}, {"tol_used", a.tol_used}, {"seed", kc.seed}};
  r.warnings = a.warnings;
  if (b.lower_bound) r.warnings.push_back("generic route: barrier values are lower bounds");
  return r;
}

Report entropy_verb(const json& in, const RunConfig& cfg) {
  Report r;
  const json& e = need(in, "entropy");
  const auto [mu, nu] = measures(in);
  const AscentConfig ac = ascent_config(cfg);
  const std::string kind = e.is_object() && e.contains("kind") && e["kind"].is_string() ? e["kind"].get<std::string>() : "";
  if (kind == "generalized" || kind == "power") {
    const ConvexTransferHandle t = read_convex(e, "$.entropy");
    const Evaluation ev = t.evaluate(mu, nu);
    const DualReport d = convex_dual(t, mu, nu, ac);
    r.values["value"] = claim(ev.value, ev.tol, ev.method);
    r.values["dual"] = claim(d.value, d.ascent.gap(), "ascent");
    if (d.potential) r.witnesses["potential"] = potential_json(*d.potential);
    r.provenance = {{"transfer", t.name}, {"seed", cfg.seed}, {"tol", ac.tol}};
    return r;
  }
  const EntropicHandle h = read_entropic(e, "$.entropy");
  const Evaluation ev = h.evaluate(mu, nu);
  const DualReport d = entropic_dual(h, mu, nu, ac);
  r.values["value"] = claim(ev.value, ev.tol, ev.method);
  r.values["dual"] = claim(d.value, d.ascent.gap(), "ascent");
  if (d.potential) r.witnesses["potential"] = potential_json(*d.potential);
  const bool linked = e.contains("link");
  if (!linked && kind == "log" && std::isfinite(ev.value)) {
    const Potential w = log_entropy_witness(mu, nu);
    r.values["witness_value"] = claim(w.values().dot(nu.weights()) - h.conjugate(mu, w.values()).value, 1e-12,
                                      "closed-form");
    r.witnesses["closed_form_potential"] = potential_json(w);
  }
  if (!linked && kind == "donsker_varadhan" && (nu.weights().array() > 0).all()) {
    const GeneratorModel gm = read_generator(e["generator"], "$.entropy.generator");
    const Potential w = dv_witness(gm, nu);
    r.values["witness_value"] = claim(w.values().dot(nu.weights()) - h.conjugate(mu, w.values()).value, 1e-10,
                                      "closed-form");
    r.witnesses["closed_form_potential"] = potential_json(w);
  }
  r.provenance = {{"transfer", h.name}, {"seed", cfg.seed}, {"tol", ac.tol}};
  return r;
}

Report verify_verb(const json& in, const RunConfig& cfg) {
  const json& l = need(in, "level");
  if (!l.is_string()) throw SchemaError("$.level", "expected fast or full");
  return verify_suite(parse_level(l.get<std::string>()), cfg.seed);
}

}  // namespace

double resolve_tol(const RunConfig& cfg, double builtin) {
  if (cfg.tol) {
    if (!(*cfg.tol > 0.0) || !std::isfinite(*cfg.tol)) throw InputError("--tol must be a positive number");
    return *cfg.tol;
  }
  if (const char* env = std::getenv("TRANSFER_TOL"); env && *env) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end == env || *end != '\0' || !(v > 0.0) || !std::isfinite(v))
      throw InputError(std::string("TRANSFER_TOL must be a positive number, got '") + env + "'");
    return v;
  }
  return builtin;
}

const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v{"eval", "dual-gap", "convolve", "tensor", "ineq",
                                          "kam",  "mather",   "barrier",  "entropy", "verify"};
  return v;
}

Report run(const std::string& verb, const json& inputs, const RunConfig& cfg) {
  Report r = [&] {
    if (verb == "eval") return eval_verb(inputs, cfg);
    if (verb == "dual-gap") return dual_gap_verb(inputs, cfg);
    if (verb == "convolve") return convolve_verb(inputs, cfg);
    if (verb == "tensor") return tensor_verb(inputs, cfg);
    if (verb == "ineq") return ineq_verb(inputs, cfg);
    if (verb == "kam") return kam_verb(inputs, cfg);
    if (verb == "mather") return mather_verb(inputs, cfg);
    if (verb == "barrier") return barrier_verb(inputs, cfg);
    if (verb == "entropy") return entropy_verb(inputs, cfg);
    if (verb == "verify") return verify_verb(inputs, cfg);
    throw InputError("unknown verb '" + verb + "'");
  }();
  r.verb = verb;
  if (verb != "verify") r.inputs = inputs;
  return r;
}

int exit_code(const Report& r) {
  if (r.status == "ok") return 0;
  if (r.status == "not_converged") return 3;
  return 1;
}

}  // namespace transfer::cli
