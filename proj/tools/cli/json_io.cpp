#include "cli/json_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "transfer/algebra.hpp"

namespace transfer::cli {
namespace {

std::string at(const std::string& path, const std::string& key) { return path + "." + key; }
std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(at(path, key), "missing field");
  return *it;
}

const json* optional_field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

std::string read_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected a string");
  return j.get<std::string>();
}

std::size_t read_index(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
    throw SchemaError(path, "expected a nonnegative integer");
  return j.get<std::size_t>();
}

void require_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
}

// Re-raise library validation errors with the JSON path attached.
template <class F>
auto guarded(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const SchemaError&) {
    throw;
  } catch (const InputError& e) {
    throw SchemaError(path, e.what());
  }
}

double read_cost_entry(const json& j, const std::string& path) {
  const double x = read_number(j, path);
  if (x == kInfinity) return kForbidden;
  if (!std::isfinite(x)) throw SchemaError(path, "cost entries must be finite or \"inf\"");
  return x;
}

}  // namespace

json num(double x) {
  if (std::isnan(x)) return "nan";
  if (x == kInfinity || x >= kForbidden) return "inf";
  if (x == -kInfinity) return "-inf";
  return x;
}

double read_number(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "Infinity") return kInfinity;
    if (s == "-inf" || s == "-Infinity") return -kInfinity;
  }
  throw SchemaError(path, "expected a number or \"inf\"");
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

json mat_json(const Mat& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec_json(m.row(i).transpose()));
  return a;
}

Vec read_vec(const json& j, const std::string& path) {
  require_array(j, path);
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = read_number(j[i], at(path, i));
  return v;
}

Mat read_mat(const json& j, const std::string& path) {
  require_array(j, path);
  if (j.empty()) throw SchemaError(path, "empty matrix");
  require_array(j[0], at(path, 0));
  Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vec row = read_vec(j[i], at(path, i));
    if (row.size() != m.cols()) throw SchemaError(at(path, i), "ragged matrix row");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

json load_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open '" + file + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(file, std::string("malformed JSON: ") + e.what());
  }
}

json space_json(const Space& s) {
  json j{{"id", s->id()}, {"points", s->points()}};
  if (s->has_coords()) j["coords"] = s->coords();
  return j;
}

json measure_json(const ProbMeasure& m) { return {{"space", space_json(m.space())}, {"weights", vec_json(m.weights())}}; }

json potential_json(const Potential& p) { return {{"space", space_json(p.space())}, {"values", vec_json(p.values())}}; }

json cost_json(const CostMatrix& c) {
  return {{"source", space_json(c.source())}, {"target", space_json(c.target())}, {"entries", mat_json(c.entries())}};
}

Space read_space(const json& j, const std::string& path) {
  const std::string id = read_string(field(j, "id", path), at(path, "id"));
  std::vector<std::string> points;
  if (const json* p = optional_field(j, "points", path)) {
    require_array(*p, at(path, "points"));
    for (std::size_t i = 0; i < p->size(); ++i) points.push_back(read_string((*p)[i], at(at(path, "points"), i)));
  } else if (const json* n = optional_field(j, "size", path)) {
    const std::size_t k = read_index(*n, at(path, "size"));
    for (std::size_t i = 0; i < k; ++i) points.push_back("x" + std::to_string(i));
  } else {
    throw SchemaError(at(path, "points"), "missing field");
  }
  std::optional<std::vector<double>> coords;
  if (const json* c = optional_field(j, "coords", path)) {
    const Vec v = read_vec(*c, at(path, "coords"));
    coords = std::vector<double>(v.begin(), v.end());
  }
  return guarded(path, [&] { return make_space(id, points, coords); });
}

ProbMeasure read_measure(const json& j, const std::string& path) {
  if (const json* f = optional_field(j, "factors", path)) {
    require_array(*f, at(path, "factors"));
    if (f->size() != 2) throw SchemaError(at(path, "factors"), "expected two factors");
    return product_measure(read_measure((*f)[0], at(at(path, "factors"), 0)),
                           read_measure((*f)[1], at(at(path, "factors"), 1)));
  }
  const Space s = read_space(field(j, "space", path), at(path, "space"));
  const Vec w = read_vec(field(j, "weights", path), at(path, "weights"));
  return guarded(at(path, "weights"), [&] { return ProbMeasure(s, w); });
}

Potential read_potential(const json& j, const std::string& path) {
  const Space s = read_space(field(j, "space", path), at(path, "space"));
  const Vec v = read_vec(field(j, "values", path), at(path, "values"));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v(i))) throw SchemaError(at(at(path, "values"), static_cast<std::size_t>(i)), "must be finite");
  return guarded(at(path, "values"), [&] { return Potential(s, v); });
}

CostMatrix read_cost(const json& j, const std::string& path) {
  const Space src = read_space(field(j, "source", path), at(path, "source"));
  const json* t = optional_field(j, "target", path);
  const Space tgt = t ? read_space(*t, at(path, "target")) : src;
  const json& e = field(j, "entries", path);
  const std::string ep = at(path, "entries");
  require_array(e, ep);
  Mat c(static_cast<Eigen::Index>(e.size()), e.empty() ? 0 : static_cast<Eigen::Index>(e[0].size()));
  for (std::size_t i = 0; i < e.size(); ++i) {
    require_array(e[i], at(ep, i));
    if (static_cast<Eigen::Index>(e[i].size()) != c.cols()) throw SchemaError(at(ep, i), "ragged matrix row");
    for (std::size_t k = 0; k < e[i].size(); ++k)
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = read_cost_entry(e[i][k], at(at(ep, i), k));
  }
  return guarded(path, [&] { return CostMatrix(src, tgt, c); });
}

ScalarFn read_scalar(const json& j, const std::string& path) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "identity") return ScalarFn::identity();
    if (s == "exp") return ScalarFn::exp();
    if (s == "log") return ScalarFn::log();
    if (s == "neg_log") return ScalarFn::neg_log();
    if (s == "xlogx") return ScalarFn::xlogx();
    if (s == "chi_square") return ScalarFn::chi_square();
    throw SchemaError(path, "unknown scalar function '" + s + "'");
  }
  const std::string kind = read_string(field(j, "kind", path), at(path, "kind"));
  if (kind == "power") {
    const double p = read_number(field(j, "p", path), at(path, "p"));
    const json* sc = optional_field(j, "scale", path);
    const double scale = sc ? read_number(*sc, at(path, "scale")) : 1.0;
    return guarded(path, [&] { return ScalarFn::power(p, scale); });
  }
  if (kind == "sampled") {
    const Vec s = read_vec(field(j, "s", path), at(path, "s"));
    const Vec v = read_vec(field(j, "v", path), at(path, "v"));
    return guarded(path, [&] {
      return ScalarFn::sampled(std::vector<double>(s.begin(), s.end()), std::vector<double>(v.begin(), v.end()));
    });
  }
  return read_scalar(json(kind), at(path, "kind"));
}

GeneratorModel read_generator(const json& j, const std::string& path) {
  const Space s = read_space(field(j, "space", path), at(path, "space"));
  const Mat l = read_mat(field(j, "rates", path), at(path, "rates"));
  const Vec m = read_vec(field(j, "mu", path), at(path, "mu"));
  return guarded(path, [&] { return GeneratorModel(s, l, m); });
}

std::vector<std::string> known_transfer_kinds() {
  return {"mk", "kr", "tv", "trivial", "pushforward", "brenier", "martingale", "marton", "barycentric", "schrodinger"};
}

TransferHandle read_transfer(const json& j, const std::string& path) {
  const std::string kind = read_string(field(j, "kind", path), at(path, "kind"));
  auto cost = [&] { return read_cost(field(j, "cost", path), at(path, "cost")); };
  auto space = [&] { return read_space(field(j, "space", path), at(path, "space")); };
  return guarded(path, [&]() -> TransferHandle {
    if (kind == "mk") return mk_transfer(cost());
    if (kind == "kr") return kr_transfer(cost());
    if (kind == "martingale") return martingale_transfer(cost());
    if (kind == "tv") return tv_transfer(space());
    if (kind == "brenier") return brenier_transfer(space());
    if (kind == "trivial")
      return trivial_transfer(read_potential(field(j, "c1", path), at(path, "c1")),
                              read_potential(field(j, "c2", path), at(path, "c2")));
    if (kind == "marton") return marton_transfer({read_scalar(field(j, "gamma", path), at(path, "gamma")), cost()});
    if (kind == "barycentric") {
      if (optional_field(j, "space", path)) return barycentric_transfer(space());
      return barycentric_transfer(read_space(field(j, "source", path), at(path, "source")),
                                  read_space(field(j, "target", path), at(path, "target")));
    }
    if (kind == "pushforward") {
      const Space src = read_space(field(j, "source", path), at(path, "source"));
      const Space tgt = read_space(field(j, "target", path), at(path, "target"));
      const json& m = field(j, "map", path);
      const std::string mp = at(path, "map");
      require_array(m, mp);
      if (m.size() != src->size()) throw SchemaError(mp, "map must have one entry per source point");
      std::vector<std::size_t> map;
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i].is_string()) {
          map.push_back(guarded(at(mp, i), [&] { return tgt->index_of(m[i].get<std::string>()); }));
        } else {
          map.push_back(read_index(m[i], at(mp, i)));
          if (map.back() >= tgt->size()) throw SchemaError(at(mp, i), "index outside the target space");
        }
      }
      return pushforward_transfer(map, src, tgt);
    }
    if (kind == "schrodinger") {
      const Space s = space();
      return schrodinger_transfer(MarkovKernelModel(s, read_mat(field(j, "kernel", path), at(path, "kernel")),
                                                    read_vec(field(j, "reversing", path), at(path, "reversing"))));
    }
    throw SchemaError(at(path, "kind"), "unknown transfer kind '" + kind + "'");
  });
}

std::vector<TransferHandle> read_chain(const json& j, const std::string& path) {
  require_array(j, path);
  if (j.size() < 2) throw SchemaError(path, "a chain needs at least two transfers");
  std::vector<TransferHandle> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(read_transfer(j[i], at(path, i)));
  return out;
}

EntropicHandle read_entropic(const json& j, const std::string& path) {
  const std::string kind = read_string(field(j, "kind", path), at(path, "kind"));
  EntropicHandle e = [&] {
    if (kind == "log") return log_entropy(read_space(field(j, "space", path), at(path, "space")));
    if (kind == "donsker_varadhan")
      return donsker_varadhan(read_generator(field(j, "generator", path), at(path, "generator")));
    throw SchemaError(at(path, "kind"), "unknown entropic kind '" + kind + "'");
  }();
  if (const json* l = optional_field(j, "link", path)) {
    const TransferHandle t = read_transfer(*l, at(path, "link"));
    return guarded(at(path, "link"), [&] { return entropic_convolve(e, t); });
  }
  return e;
}

ConvexTransferHandle read_convex(const json& j, const std::string& path) {
  const std::string kind = read_string(field(j, "kind", path), at(path, "kind"));
  const ScalarFn alpha = read_scalar(field(j, "alpha", path), at(path, "alpha"));
  if (kind == "generalized") {
    const Space s = read_space(field(j, "space", path), at(path, "space"));
    return guarded(path, [&] { return generalized_entropy(alpha, s); });
  }
  if (kind == "power") {
    const TransferHandle t = read_transfer(field(j, "transfer", path), at(path, "transfer"));
    PowerGrid grid;
    if (const json* g = optional_field(j, "grid", path)) {
      const std::string gp = at(path, "grid");
      if (const json* x = optional_field(*g, "lo", gp)) grid.lo = read_number(*x, at(gp, "lo"));
      if (const json* x = optional_field(*g, "hi", gp)) grid.hi = read_number(*x, at(gp, "hi"));
      if (const json* x = optional_field(*g, "points", gp)) grid.points = read_index(*x, at(gp, "points"));
    }
    return guarded(path, [&] { return power_transfer(alpha, t, grid); });
  }
  throw SchemaError(at(path, "kind"), "unknown convex transfer kind '" + kind + "'");
}

InequalitySpec read_inequality(const json& j, const std::string& path) {
  const std::string form_s = read_string(field(j, "form", path), at(path, "form"));
  InequalityForm form;
  if (form_s == "backward_backward") form = InequalityForm::BackwardBackward;
  else if (form_s == "forward_backward") form = InequalityForm::ForwardBackward;
  else if (form_s == "maurey") form = InequalityForm::Maurey;
  else throw SchemaError(at(path, "form"), "expected backward_backward, forward_backward or maurey");

  auto positive = [&](const char* key) {
    const json* x = optional_field(j, key, path);
    if (!x) return 1.0;
    const double v = read_number(*x, at(path, key));
    if (!(v > 0.0) || !std::isfinite(v)) throw SchemaError(at(path, key), "must be a positive finite number");
    return v;
  };
  const double lambda = positive("lambda"), lambda2 = positive("lambda2");

  const json& lj = field(j, "lhs", path);
  const std::string lk = read_string(field(lj, "kind", at(path, "lhs")), at(at(path, "lhs"), "kind"));
  const BackwardFamily lhs = lk == "generalized" || lk == "power"
                                 ? backward_family(read_convex(lj, at(path, "lhs")))
                                 : backward_family(read_transfer(lj, at(path, "lhs")));
  InequalitySpec spec{form, lhs, read_measure(field(j, "mu", path), at(path, "mu")),
                      read_measure(field(j, "nu", path), at(path, "nu"))};
  spec.lambda = lambda;
  spec.lambda2 = lambda2;
  if (const json* e = optional_field(j, "entropy", path)) spec.entropy = read_entropic(*e, at(path, "entropy"));
  if (const json* l = optional_field(j, "link", path)) spec.link = read_transfer(*l, at(path, "link"));
  if (const json* l = optional_field(j, "link2", path)) spec.link2 = read_transfer(*l, at(path, "link2"));
  return spec;
}

}  // namespace transfer::cli
