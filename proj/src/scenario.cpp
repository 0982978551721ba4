#include "mslab/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "mslab/metric.hpp"
#include "mslab/openness.hpp"
#include "mslab/parallel.hpp"
#include "mslab/psh.hpp"
#include "mslab/report.hpp"
#include "mslab/stability.hpp"

namespace mslab {

using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Strict JSON access with path-qualified errors.

class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& what) const { throw ScenarioError(path_ + ": " + what); }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  const json& require(const std::string& key) {
    const json* v = find(key);
    if (!v) fail("missing field '" + key + "'");
    return *v;
  }
  bool has(const std::string& key) const { return j_.contains(key); }

  double number(const std::string& key, std::optional<double> def = std::nullopt) {
    const json* v = find(key);
    if (!v) {
      if (def) return *def;
      fail("missing field '" + key + "'");
    }
    if (!v->is_number()) throw ScenarioError(at(key) + ": expected a number");
    return v->get<double>();
  }
  int integer(const std::string& key, std::optional<int> def = std::nullopt) {
    const json* v = find(key);
    if (!v) {
      if (def) return *def;
      fail("missing field '" + key + "'");
    }
    if (!v->is_number_integer()) throw ScenarioError(at(key) + ": expected an integer");
    return v->get<int>();
  }
  std::string string(const std::string& key, std::optional<std::string> def = std::nullopt) {
    const json* v = find(key);
    if (!v) {
      if (def) return *def;
      fail("missing field '" + key + "'");
    }
    if (!v->is_string()) throw ScenarioError(at(key) + ": expected a string");
    return v->get<std::string>();
  }
  std::vector<double> numbers(const std::string& key) {
    const json& v = require(key);
    if (!v.is_array() || v.empty()) throw ScenarioError(at(key) + ": expected a nonempty array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ScenarioError(at(key) + ": expected numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ScenarioError(at(it.key()) + ": unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

Complex parse_complex(const json& v, const std::string& path) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw ScenarioError(path + ": expected a number or [re, im]");
}

Point parse_point(const json& v, std::size_t dim, const std::string& path) {
  if (!v.is_array() || v.size() != dim)
    throw ScenarioError(path + ": expected a point with " + std::to_string(dim) + " coordinates");
  Point p(static_cast<Eigen::Index>(dim));
  for (std::size_t k = 0; k < dim; ++k) p[static_cast<Eigen::Index>(k)] = parse_complex(v[k], path);
  return p;
}

template <typename F>
auto guarded(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw ScenarioError(path + ": " + e.what());
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Scenario model.

struct Tolerances {
  double quad = 1e-9;
  double quad_rel = 1e-9;
  double theta = 1e-8;
  double resolution = 0.02;
  double capacity_plus = 1e-3;
  double target = 1e-3;
};

struct Scenario {
  std::string name;
  std::size_t dim = 1;
  Params params;
  Polydisc region = Polydisc::unit(1);
  std::optional<SingularMetric> metric;
  std::map<std::string, Section> sections;
  Tolerances tol;
  std::uint64_t seed = 1;
  json canonical;  // inputs shared by every experiment's cache key
};

struct Result {
  std::string csv;
  json summary;
  bool passed = true;
  std::string message;
};

struct Experiment {
  std::string name;
  std::string type;
  json spec;
  std::function<Result()> run;
};

std::string iso_time(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json num(double x) {
  if (std::isfinite(x)) return x;
  return format_number(x);
}

SingularMetric parse_metric(const json& j, const Scenario& sc) {
  Obj o(j, "metric");
  std::vector<Point> singular;
  if (const json* sp = o.find("singular_points")) {
    if (!sp->is_array()) o.fail("singular_points must be an array of points");
    for (std::size_t k = 0; k < sp->size(); ++k)
      singular.push_back(parse_point((*sp)[k], sc.dim, "metric.singular_points[" + std::to_string(k) + "]"));
  }
  const int kinds = o.has("monomial") + o.has("entries") + o.has("family");
  if (kinds != 1) o.fail("exactly one of 'monomial', 'entries' or 'family' is required");
  SingularMetric h = SingularMetric::identity(1, sc.region);
  if (const json* m = o.find("monomial")) {
    Obj mo(*m, "metric.monomial");
    MonomialWeights w;
    if (mo.has("a")) {
      w = MonomialWeights::scalar(sc.dim, mo.number("a"), mo.number("coeff", 1.0));
    } else {
      const std::vector<double> coeff = mo.numbers("coeff");
      const std::size_t r = coeff.size();
      w.coeff = Eigen::Map<const Eigen::VectorXd>(coeff.data(), static_cast<Eigen::Index>(r));
      w.axis = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(sc.dim));
      w.radial = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(r));
      if (const json* ax = mo.find("axis")) {
        if (!ax->is_array() || ax->size() != r) mo.fail("axis needs one row per component");
        for (std::size_t i = 0; i < r; ++i) {
          const json& row = (*ax)[i];
          if (!row.is_array() || row.size() != sc.dim) mo.fail("axis rows need one entry per coordinate");
          for (std::size_t k = 0; k < sc.dim; ++k) {
            if (!row[k].is_number()) mo.fail("axis entries must be numbers");
            w.axis(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k].get<double>();
          }
        }
      }
      if (mo.has("radial")) {
        const std::vector<double> rad = mo.numbers("radial");
        if (rad.size() != r) mo.fail("radial needs one entry per component");
        for (std::size_t i = 0; i < r; ++i) w.radial[static_cast<Eigen::Index>(i)] = rad[i];
      }
      w.origin = Point::Zero(static_cast<Eigen::Index>(sc.dim));
    }
    if (const json* org = mo.find("origin")) w.origin = parse_point(*org, sc.dim, "metric.monomial.origin");
    mo.finish();
    h = guarded("metric.monomial", [&] { return SingularMetric::monomial(w, sc.region); });
  } else if (const json* e = o.find("entries")) {
    const int rank = o.integer("rank", 1);
    if (rank < 1) o.fail("rank must be positive");
    if (!e->is_array()) o.fail("entries must be an array of rows");
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : *e) {
      std::vector<std::string> r;
      if (row.is_string()) {
        r.push_back(row.get<std::string>());
      } else if (row.is_array()) {
        for (const auto& x : row) {
          if (!x.is_string()) o.fail("entries must be expression strings");
          r.push_back(x.get<std::string>());
        }
      } else {
        o.fail("entries must be an array of rows");
      }
      rows.push_back(r);
    }
    h = guarded("metric.entries", [&] {
      return SingularMetric::parse(static_cast<std::size_t>(rank), rows, sc.region, singular, sc.params);
    });
  } else {
    const json& fam = o.require("family");
    const int s = o.integer("s");
    const std::string use = o.string("use", "normalized");
    if (use != "normalized" && use != "raw") o.fail("use must be 'normalized' or 'raw'");
    if (!fam.is_array() || fam.empty()) o.fail("family must be a nonempty array of maps");
    std::vector<std::vector<Polynomial>> family;
    for (std::size_t a = 0; a < fam.size(); ++a) {
      const std::string path = "metric.family[" + std::to_string(a) + "]";
      if (!fam[a].is_array()) throw ScenarioError(path + ": expected an array of component strings");
      std::vector<Polynomial> comps;
      for (const auto& c : fam[a]) {
        if (!c.is_string()) throw ScenarioError(path + ": expected strings");
        comps.push_back(guarded(path, [&] { return Polynomial::parse(c.get<std::string>(), sc.dim); }));
      }
      family.push_back(comps);
    }
    const FamilyMetric fm = guarded("metric.family", [&] { return from_family(family, s, sc.region, singular); });
    h = use == "raw" ? fm.raw : fm.normalized;
  }
  o.finish();
  return h;
}

Scenario parse_scenario(const json& doc, const RunFlags& flags) {
  Obj top(doc, "");
  Scenario sc;
  sc.name = top.string("name");
  top.find("description");
  sc.dim = static_cast<std::size_t>(top.integer("dim", 1));
  if (sc.dim < 1) top.fail("dim must be positive");
  if (const json* p = top.find("params")) {
    if (!p->is_object()) throw ScenarioError("params: expected an object of numbers");
    for (auto it = p->begin(); it != p->end(); ++it) {
      if (!it->is_number()) throw ScenarioError("params." + it.key() + ": expected a number");
      sc.params[it.key()] = it->get<double>();
    }
  }
  {
    const json& r = top.require("region");
    Obj ro(r, "region");
    Point c = Point::Zero(static_cast<Eigen::Index>(sc.dim));
    if (const json* cj = ro.find("center")) c = parse_point(*cj, sc.dim, "region.center");
    Eigen::VectorXd radii(static_cast<Eigen::Index>(sc.dim));
    const json& rj = ro.require("radii");
    if (rj.is_number()) {
      radii.setConstant(rj.get<double>());
    } else if (rj.is_array() && rj.size() == sc.dim) {
      for (std::size_t k = 0; k < sc.dim; ++k) {
        if (!rj[k].is_number()) ro.fail("radii must be numbers");
        radii[static_cast<Eigen::Index>(k)] = rj[k].get<double>();
      }
    } else {
      ro.fail("radii must be a number or one number per coordinate");
    }
    ro.finish();
    sc.region = guarded("region", [&] { return Polydisc(c, radii); });
  }
  if (const json* m = top.find("metric")) sc.metric = parse_metric(*m, sc);
  if (const json* s = top.find("sections")) {
    if (!s->is_object()) throw ScenarioError("sections: expected an object");
    for (auto it = s->begin(); it != s->end(); ++it) {
      const std::string path = "sections." + it.key();
      std::vector<std::string> comps;
      if (it->is_string()) {
        comps.push_back(it->get<std::string>());
      } else if (it->is_array()) {
        for (const auto& c : *it) {
          if (!c.is_string()) throw ScenarioError(path + ": expected strings");
          comps.push_back(c.get<std::string>());
        }
      } else {
        throw ScenarioError(path + ": expected a string or an array of strings");
      }
      Section sec = guarded(path, [&] { return Section::parse(comps, sc.dim); });
      if (sc.metric && sec.rank() != sc.metric->rank())
        throw ScenarioError(path + ": section rank does not match the metric rank");
      sc.sections.emplace(it.key(), std::move(sec));
    }
  }
  if (const json* t = top.find("tolerances")) {
    Obj to(*t, "tolerances");
    sc.tol.quad = to.number("quad", sc.tol.quad);
    sc.tol.quad_rel = to.number("quad_rel", sc.tol.quad_rel);
    sc.tol.theta = to.number("theta", sc.tol.theta);
    sc.tol.resolution = to.number("resolution", sc.tol.resolution);
    sc.tol.capacity_plus = to.number("capacity_plus", sc.tol.capacity_plus);
    sc.tol.target = to.number("target", sc.tol.target);
    to.finish();
  }
  if (flags.tol) sc.tol.quad = *flags.tol;
  if (const json* s = top.find("seed")) {
    if (!s->is_number_unsigned()) throw ScenarioError("seed: expected a non-negative integer");
    sc.seed = s->get<std::uint64_t>();
  }
  if (flags.seed) sc.seed = *flags.seed;
  top.find("experiments");
  top.finish();

  sc.canonical = {{"version", kVersion},
                  {"dim", sc.dim},
                  {"params", doc.value("params", json::object())},
                  {"region", doc.at("region")},
                  {"metric", doc.value("metric", json())},
                  {"sections", doc.value("sections", json::object())},
                  {"tolerances",
                   {{"quad", sc.tol.quad},
                    {"quad_rel", sc.tol.quad_rel},
                    {"theta", sc.tol.theta},
                    {"resolution", sc.tol.resolution},
                    {"capacity_plus", sc.tol.capacity_plus},
                    {"target", sc.tol.target}}},
                  {"seed", sc.seed}};
  return sc;
}

// ---------------------------------------------------------------------------
// Experiments.

const SingularMetric& need_metric(const Scenario& sc, const std::string& path) {
  if (!sc.metric) throw ScenarioError(path + ": this experiment needs a metric");
  return *sc.metric;
}

const Section& need_section(const Scenario& sc, Obj& o, const std::string& path) {
  const std::string name = o.string("section", "F");
  auto it = sc.sections.find(name);
  if (it == sc.sections.end()) throw ScenarioError(path + ".section: unknown section '" + name + "'");
  return it->second;
}

Point point_or_center(const Scenario& sc, Obj& o, const std::string& path) {
  if (const json* p = o.find("at")) return parse_point(*p, sc.dim, path + ".at");
  return sc.region.center();
}

QuadOptions quad_options(const Scenario& sc) {
  QuadOptions q;
  q.tol = sc.tol.quad;
  q.rel_tol = sc.tol.quad_rel;
  return q;
}

ExponentOptions exponent_options(const Scenario& sc) {
  ExponentOptions e;
  e.resolution = sc.tol.resolution;
  return e;
}

std::vector<double> t_grid(Obj& o, const std::string& path) {
  if (o.has("ts")) return o.numbers("ts");
  const json& g = o.require("t_grid");
  Obj go(g, path + ".t_grid");
  const double from = go.number("from"), to = go.number("to");
  const int count = go.integer("count");
  const bool zero = go.find("include_zero") ? go.require("include_zero").get<bool>() : true;
  go.finish();
  if (count < 2 || !(to > from) || from < 0.0) go.fail("needs count >= 2 and 0 <= from < to");
  std::vector<double> ts;
  if (zero && from > 0.0) ts.push_back(0.0);
  for (int i = 0; i < count; ++i) ts.push_back(from + (to - from) * i / (count - 1));
  return ts;
}

Experiment make_experiment(const json& spec, std::size_t index, const Scenario& sc) {
  const std::string path = "experiments[" + std::to_string(index) + "]";
  Obj o(spec, path);
  Experiment ex;
  ex.type = o.string("type");
  ex.name = o.string("name", ex.type);
  ex.spec = spec;
  if (ex.name.empty() || ex.name.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.-") !=
                             std::string::npos || ex.name == "manifest")
    throw ScenarioError(path + ".name: use letters, digits, '_', '.', '-' (and not 'manifest')");
  const std::string& type = ex.type;

  if (type == "theta") {
    const std::vector<double> betas = o.numbers("betas");
    const double tol = sc.tol.theta;
    ex.run = [betas, tol] {
      Result r;
      CsvTable t({"beta", "theta", "quad_error", "identity_residual"});
      json rows = json::array();
      for (double b : betas) {
        const ThetaValue v = theta(b, tol);
        const double res = theta_identity_residual(b, tol);
        if (!(res <= 3.0 * tol) || !(v.value >= 1.0)) r.passed = false;
        t.row({format_number(b), format_number(v.value), format_number(v.quad_error), format_number(res)});
        rows.push_back({{"beta", b}, {"theta", num(v.value)}, {"identity_residual", num(res)}});
      }
      r.csv = t.str();
      r.summary = {{"tolerance", tol}, {"values", rows}};
      if (!r.passed) r.message = "identity residual above 3 tol";
      return r;
    };
  } else if (type == "g") {
    const std::vector<double> betas = o.numbers("betas"), ts = o.numbers("ts");
    ex.run = [betas, ts] {
      Result r;
      CsvTable t({"beta", "t", "g", "upper_bound"});
      for (double b : betas)
        for (double s : ts) {
          const double g = g_beta(b, s);
          const double ub = std::exp(-1.0 - (1.0 + b) * s) / ((1.0 + b) * s);
          if (!(g <= ub * (1.0 + 1e-12))) r.passed = false;
          t.row({format_number(b), format_number(s), format_number(g), format_number(ub)});
        }
      r.csv = t.str();
      r.summary = {{"points", betas.size() * ts.size()}, {"upper_bound_holds", r.passed}};
      if (!r.passed) r.message = "g exceeded its upper bound";
      return r;
    };
  } else if (type == "exponent") {
    const SingularMetric h = need_metric(sc, path);
    const Section f = need_section(sc, o, path);
    const Point at = point_or_center(sc, o, path);
    std::optional<double> expected;
    if (o.has("expected")) expected = o.number("expected");
    ExponentOptions eo = exponent_options(sc);
    eo.resolution = o.number("resolution", eo.resolution);
    eo.beta_max = o.number("beta_max", eo.beta_max);
    ex.run = [h, f, at, expected, eo] {
      Result r;
      const ExponentBracket b = singularity_exponent(h, f, at, eo);
      CsvTable t({"lo", "hi", "iterations", "indeterminate_hits", "unbounded", "not_member"});
      t.row({format_number(b.lo), format_number(b.hi), std::to_string(b.iterations),
             std::to_string(b.indeterminate_hits), b.unbounded ? "1" : "0", b.not_member ? "1" : "0"});
      r.csv = t.str();
      r.summary = {{"lo", b.lo}, {"hi", b.hi}, {"unbounded", b.unbounded}, {"not_member", b.not_member}};
      if (expected) {
        r.passed = b.lo - 1e-12 <= *expected && *expected <= b.hi + 1e-12;
        r.summary["expected"] = *expected;
        if (!r.passed) r.message = "expected exponent outside the bracket";
      }
      return r;
    };
  } else if (type == "capacity") {
    const SingularMetric h = need_metric(sc, path);
    const Section f = need_section(sc, o, path);
    const Point at = point_or_center(sc, o, path);
    const double beta = o.number("beta");
    ProjectionOracleConfig cfg;
    cfg.quad = quad_options(sc);
    cfg.max_degree = o.integer("max_degree", -1);
    const std::string method = o.string("method", "auto");
    if (method == "analytic")
      cfg.method = GramMethod::Analytic;
    else if (method == "quadrature")
      cfg.method = GramMethod::Quadrature;
    else if (method != "auto")
      throw ScenarioError(path + ".method: expected 'auto', 'analytic' or 'quadrature'");
    std::optional<double> expected;
    if (o.has("expected")) expected = o.number("expected");
    const Polydisc region = sc.region;
    ex.run = [h, f, at, beta, cfg, expected, region] {
      Result r;
      const IntegralEstimate c = capacity_C(h, f, beta, region, at, cfg);
      CsvTable t({"beta", "capacity", "abs_error", "status"});
      t.row({format_number(beta), format_number(c.value), format_number(c.abs_error), to_string(c.status)});
      r.csv = t.str();
      r.summary = {{"beta", beta}, {"capacity", num(c.value)}, {"abs_error", num(c.abs_error)},
                   {"status", to_string(c.status)}};
      r.passed = c.status == QuadStatus::Converged;
      if (expected) {
        const double allowed = std::max(1e-6 * std::abs(*expected), 2.0 * c.abs_error);
        if (!(std::abs(c.value - *expected) <= allowed)) r.passed = false;
        r.summary["expected"] = *expected;
      }
      if (!r.passed) r.message = "capacity did not converge to the expected value";
      return r;
    };
  } else if (type == "gcurve") {
    const SingularMetric h = need_metric(sc, path);
    const Section f = need_section(sc, o, path);
    const Point at = point_or_center(sc, o, path);
    const double beta = o.number("beta");
    const std::vector<double> ts = t_grid(o, path);
    std::optional<double> G;
    if (o.has("G")) G = o.number("G");
    const double dtol = o.number("differential_tol", 1e-3);
    ProjectionOracleConfig cfg;
    cfg.quad = quad_options(sc);
    const Polydisc region = sc.region;
    ex.run = [h, f, at, beta, ts, G, dtol, cfg, region] {
      Result r;
      const GCurve curve = g_curve(h, f, beta, at, region, ts, cfg);
      bool monotone = true;
      for (std::size_t k = 1; k < curve.samples.size(); ++k) {
        const GSample &a = curve.samples[k - 1], &b = curve.samples[k];
        if (b.value > a.value + 2.0 * std::max(a.abs_error, b.abs_error)) monotone = false;
      }
      r.summary = {{"beta", beta}, {"samples", curve.samples.size()}, {"monotone", monotone}};
      std::optional<SlackReport> slack;
      if (!curve.samples.empty() && curve.samples.front().t == 0.0) {
        slack = lower_bound_check(curve);
        r.summary["lower_bound_passed"] = slack->passed;
        r.summary["min_slack_t_ge_0.05"] = num(slack->min_slack_away_from_zero);
        if (!slack->passed) r.passed = false;
      }
      if (G) {
        const double res = differential_inequality_check(curve, *G);
        r.summary["G"] = *G;
        r.summary["differential_residual"] = num(res);
        if (!(res <= dtol)) r.passed = false;
      }
      if (!monotone) r.passed = false;
      r.csv = to_csv(curve, slack ? &*slack : nullptr);
      if (!r.passed) r.message = "G-curve checks failed";
      return r;
    };
  } else if (type == "effectiveness") {
    const SingularMetric h = need_metric(sc, path);
    const Section f = need_section(sc, o, path);
    const Point at = point_or_center(sc, o, path);
    const std::vector<double> betas = o.numbers("betas");
    EffectivenessOptions eo;
    eo.resolution = sc.tol.capacity_plus;
    eo.exponent = exponent_options(sc);
    eo.oracle.quad = quad_options(sc);
    eo.theta_tol = sc.tol.theta;
    const Polydisc region = sc.region;
    ex.run = [h, f, at, betas, eo, region] {
      Result r;
      std::vector<EffectivenessReport> reps;
      for (double b : betas) reps.push_back(effectiveness_verdict(h, f, at, region, b, eo));
      json rows = json::array();
      int unsound = 0;
      for (const auto& e : reps) {
        if (!e.sound()) ++unsound;
        rows.push_back({{"beta", e.beta},
                        {"theta", num(e.theta_beta)},
                        {"ratio", num(e.ratio)},
                        {"predicted_member", e.predicted_member},
                        {"observed_member", e.observed_member}});
      }
      r.csv = to_csv(reps);
      const ExponentBracket& c = reps.front().exponent;
      r.summary = {{"energy", num(reps.front().energy)},
                   {"capacity_plus", num(reps.front().capacity_plus)},
                   {"ratio", num(reps.front().ratio)},
                   {"exponent", {{"lo", c.lo}, {"hi", c.hi}}},
                   {"unsound_cases", unsound},
                   {"reports", rows}};
      r.passed = unsound == 0;
      if (!r.passed) r.message = "predicted membership not observed";
      return r;
    };
  } else if (type == "stability" || type == "union_sheaf") {
    const SingularMetric h = need_metric(sc, path);
    const Section f = need_section(sc, o, path);
    const SequenceRule rule = guarded(path + ".rule", [&] { return parse_sequence_rule(o.string("rule", "Scale")); });
    const int j_first = o.integer("j_first", 1), j_last = o.integer("j_last", 32);
    const std::uint64_t seed = sc.seed;
    MetricSequenceSpec ms{h, rule, j_first, j_last, 64, seed};
    if (type == "union_sheaf") {
      const Point at = point_or_center(sc, o, path);
      ex.run = [ms, f, at] {
        Result r;
        const std::vector<SingularMetric> seq = build_sequence(ms);
        const std::optional<int> j0 = union_sheaf_check(ms.base, seq, f, at, ms.j_first);
        CsvTable t({"j0", "found"});
        t.row({j0 ? std::to_string(*j0) : "", j0 ? "1" : "0"});
        r.csv = t.str();
        r.summary = {{"rule", to_string(ms.rule)}, {"found", j0.has_value()}};
        if (j0) r.summary["j0"] = *j0;
        r.passed = j0.has_value();
        if (!r.passed) r.message = "no index in range carries F into E(h_j)";
        return r;
      };
    } else {
      const double p = o.number("p");
      StabilityOptions so;
      so.j_first = j_first;
      so.target = o.number("target", sc.tol.target);
      so.exponent = exponent_options(sc);
      so.quad = quad_options(sc);
      so.quad.tol = std::max(so.quad.tol, 1e-12);
      std::optional<Section> g;
      if (o.has("perturbation")) {
        const std::string gname = o.string("perturbation");
        auto it = sc.sections.find(gname);
        if (it == sc.sections.end()) throw ScenarioError(path + ".perturbation: unknown section '" + gname + "'");
        g = it->second;
      }
      Polydisc region = sc.region;
      if (o.has("radius"))
        region = guarded(path + ".radius", [&] {
          return Polydisc(sc.region.center(),
                          Eigen::VectorXd::Constant(static_cast<Eigen::Index>(sc.dim), o.number("radius")));
        });
      const std::string require = o.string("require", "Decaying");
      if (require != "Decaying" && require != "any") throw ScenarioError(path + ".require: expected 'Decaying' or 'any'");
      ex.run = [ms, f, g, p, so, region, require] {
        Result r;
        const std::vector<SingularMetric> seq = build_sequence(ms);
        const std::vector<Section> fs =
            g ? linear_family(f, *g, ms.j_first, ms.j_last) : std::vector<Section>(seq.size(), f);
        const StabilityReport rep = stability_lp(ms.base, seq, fs, f, p, region, so);
        r.csv = to_csv(rep);
        r.summary = {{"p", p},
                     {"rule", to_string(ms.rule)},
                     {"c_estimate", rep.c_estimate},
                     {"verdict", to_string(rep.verdict)},
                     {"final_gap", num(rep.per_j.back().gap)},
                     {"target", so.target}};
        r.passed = require == "any" || rep.verdict == StabilityVerdict::Decaying;
        if (!r.passed) r.message = "L^p gap not decaying to the target";
        return r;
      };
    }
  } else if (type == "strong_openness") {
    const SingularMetric h = need_metric(sc, path);
    const Section f = need_section(sc, o, path);
    const Point at = point_or_center(sc, o, path);
    const std::vector<double> betas = o.numbers("betas");
    ex.run = [h, f, at, betas] {
      Result r;
      const std::optional<double> b = strong_openness_search(h, f, at, betas);
      CsvTable t({"beta", "found"});
      t.row({b ? format_number(*b) : "", b ? "1" : "0"});
      r.csv = t.str();
      r.summary = {{"found", b.has_value()}};
      if (b) r.summary["beta"] = *b;
      r.passed = b.has_value();
      if (!r.passed) r.message = "no grid beta with membership";
      return r;
    };
  } else if (type == "lelong") {
    const std::string text = o.string("phi");
    ParseOptions po;
    po.dimension = sc.dim;
    const Expr phi = guarded(path + ".phi", [&] { return parse_expr(text, po); });
    const Point at = point_or_center(sc, o, path);
    const double r_min = o.number("r_min", 1e-6), r_max = o.number("r_max", 1e-2);
    std::optional<double> expected;
    if (o.has("expected")) expected = o.number("expected");
    const Params params = sc.params;
    ex.run = [phi, at, r_min, r_max, expected, params] {
      Result r;
      const LelongEstimate e = lelong_number(phi, at, r_min, r_max, params);
      std::string skoda = "n/a";
      if (e.confidence == Confidence::High) skoda = to_string(skoda_guarantee(e));
      CsvTable t({"value", "fit_residual", "confidence", "skoda"});
      t.row({format_number(e.value), format_number(e.fit_residual), to_string(e.confidence), skoda});
      r.csv = t.str();
      r.summary = {{"value", e.value}, {"confidence", to_string(e.confidence)}, {"skoda", skoda}};
      r.passed = e.confidence == Confidence::High;
      if (expected) {
        r.summary["expected"] = *expected;
        if (!(std::abs(e.value - *expected) <= 0.01 * std::max(std::abs(*expected), 1e-12))) r.passed = false;
      }
      if (!r.passed) r.message = "Lelong estimate off or low confidence";
      return r;
    };
  } else if (type == "bergman") {
    const double a = o.number("a");
    const std::vector<double> ms_d = o.numbers("ms");
    const double zval = o.number("z", 0.5);
    const int grid = o.integer("grid", 20);
    std::vector<int> ms;
    for (double m : ms_d) {
      if (m < 1 || m != std::floor(m)) throw ScenarioError(path + ".ms: expected positive integers");
      ms.push_back(static_cast<int>(m));
    }
    ex.run = [a, ms, zval, grid] {
      Result r;
      CsvTable t({"m", "L", "max_scaled_deficit", "error_at_z"});
      double c1 = 0.0, prev = std::numeric_limits<double>::infinity();
      bool decreasing = true;
      for (int m : ms) {
        const int L = bergman_truncation(a, m);
        double deficit = -std::numeric_limits<double>::infinity();
        for (int i = 1; i <= grid; ++i) {
          const double x = 0.9 * i / grid;
          const double phi = 2.0 * a * std::log(x);
          deficit = std::max(deficit, m * (phi - bergman_log(a, m, L, Complex(x, 0.0))));
        }
        c1 = std::max(c1, deficit);
        const double err = std::abs(bergman_log(a, m, L, Complex(zval, 0.0)) - 2.0 * a * std::log(zval));
        if (!(err < prev)) decreasing = false;
        prev = err;
        t.row({std::to_string(m), std::to_string(L), format_number(deficit), format_number(err)});
      }
      r.csv = t.str();
      r.summary = {{"a", a}, {"C1", c1}, {"error_decreasing", decreasing}};
      r.passed = decreasing;
      if (!r.passed) r.message = "pointwise error not decreasing in m";
      return r;
    };
  } else {
    throw ScenarioError(path + ".type: unknown experiment type '" + type + "'");
  }
  o.finish();
  return ex;
}

void write_file(const std::filesystem::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + p.string() + " for writing");
  out << data;
  out.close();
  if (!out) throw IoError("failed writing " + p.string());
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---------------------------------------------------------------------------

std::string content_hash(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ResultCache::ResultCache(std::filesystem::path dir, std::ostream& log) : dir_(std::move(dir)), log_(log) {}

std::string ResultCache::get_or_compute(const std::string& key, const std::function<std::string()>& compute,
                                        bool* hit) {
  if (hit) *hit = false;
  if (!enabled()) return compute();
  const std::string id = content_hash(key);
  const std::filesystem::path file = dir_ / (id + ".json");
  std::error_code ec;
  if (std::filesystem::exists(file, ec)) {
    try {
      const json entry = json::parse(read_file(file));
      if (entry.at("key").get<std::string>() != key) throw std::runtime_error("key mismatch");
      if (hit) *hit = true;
      return entry.at("value").get<std::string>();
    } catch (const std::exception& e) {
      log_ << "warning: corrupt cache entry " << file.string() << " (" << e.what() << "); recomputing\n";
    }
  }
  const std::string value = compute();
  std::filesystem::create_directories(dir_, ec);
  if (ec) {
    log_ << "warning: cannot create cache directory " << dir_.string() << "\n";
    return value;
  }
  const json entry = {{"key", key}, {"value", value}, {"created_at", iso_time(std::chrono::system_clock::now())}};
  const std::filesystem::path tmp = dir_ / (id + ".tmp" + std::to_string(::getpid()));
  try {
    write_file(tmp, entry.dump());
    std::filesystem::rename(tmp, file);
  } catch (const std::exception& e) {
    std::filesystem::remove(tmp, ec);
    log_ << "warning: cache write failed: " << e.what() << "\n";
  }
  return value;
}

RunSummary run_scenario_text(const std::string& json_text, const std::string& origin,
                             const std::filesystem::path& out_dir, const RunFlags& flags, std::ostream& log) {
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(origin + ": invalid JSON: " + e.what());
  }
  const Scenario sc = parse_scenario(doc, flags);
  std::vector<Experiment> exps;
  if (doc.contains("experiments")) {
    const json& arr = doc.at("experiments");
    if (!arr.is_array()) throw ScenarioError("experiments: expected an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      exps.push_back(make_experiment(arr[i], i, sc));
      if (!names.insert(exps.back().name).second)
        throw ScenarioError("experiments[" + std::to_string(i) + "].name: duplicate name '" + exps.back().name + "'");
    }
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  std::filesystem::path cache_dir;
  if (!flags.no_cache) {
    if (!flags.cache_dir.empty())
      cache_dir = flags.cache_dir;
    else if (const char* env = std::getenv("MSLAB_CACHE_DIR"); env && *env)
      cache_dir = env;
    else
      cache_dir = out_dir / ".cache";
  }
  ResultCache cache(cache_dir, log);
  if (flags.jobs > 0) set_default_jobs(flags.jobs);

  RunSummary summary;
  summary.scenario = sc.name;
  json manifest_exps = json::array();
  for (const auto& ex : exps) {
    ExperimentOutcome out;
    out.name = ex.name;
    out.type = ex.type;
    json key = sc.canonical;
    key["experiment"] = ex.spec;
    std::string payload;
    try {
      payload = cache.get_or_compute(
          key.dump(),
          [&] {
            Result r = ex.run();
            return json{{"csv", r.csv}, {"summary", r.summary}, {"passed", r.passed}, {"message", r.message}}.dump();
          },
          &out.cached);
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      payload = json{{"csv", ""}, {"summary", json::object()}, {"passed", false}, {"message", e.what()}}.dump();
    }
    const json result = json::parse(payload);
    out.passed = result.at("passed").get<bool>();
    out.message = result.at("message").get<std::string>();
    json body = {{"experiment", ex.name},
                 {"type", ex.type},
                 {"passed", out.passed},
                 {"summary", result.at("summary")}};
    if (!out.message.empty()) body["message"] = out.message;
    const std::string csv = result.at("csv").get<std::string>();
    if (!csv.empty()) {
      write_file(out_dir / (ex.name + ".csv"), csv);
      out.files.push_back(ex.name + ".csv");
    }
    write_file(out_dir / (ex.name + ".json"), body.dump(2) + "\n");
    out.files.push_back(ex.name + ".json");
    log << (out.passed ? "pass " : "FAIL ") << ex.name << " (" << ex.type << (out.cached ? ", cached" : "") << ")"
        << (out.message.empty() ? "" : ": " + out.message) << "\n";
    manifest_exps.push_back({{"name", out.name},
                             {"type", out.type},
                             {"passed", out.passed},
                             {"cached", out.cached},
                             {"files", out.files}});
    summary.experiments.push_back(out);
  }
  summary.exit_code = std::all_of(summary.experiments.begin(), summary.experiments.end(),
                                  [](const ExperimentOutcome& o) { return o.passed; })
                          ? 0
                          : 1;
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest = {{"scenario", sc.name},
                   {"source", origin},
                   {"inputs_hash", content_hash(doc.dump())},
                   {"version", kVersion},
                   {"started_at", iso_time(started)},
                   {"wall_time_seconds", wall},
                   {"jobs", flags.jobs > 0 ? flags.jobs : default_jobs()},
                   {"cache", cache_dir.empty() ? json() : json(cache_dir.string())},
                   {"experiments", manifest_exps},
                   {"exit_code", summary.exit_code}};
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return summary;
}

RunSummary run_scenario(const std::filesystem::path& scenario, const std::filesystem::path& out_dir,
                        const RunFlags& flags, std::ostream& log) {
  return run_scenario_text(read_file(scenario), scenario.string(), out_dir, flags, log);
}

}  // namespace mslab
