// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../common/oracles.hpp"
#include "mslab/openness.hpp"
#include "mslab/psh.hpp"
#include "mslab/quadrature.hpp"
#include "mslab/stability.hpp"

using namespace mslab;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::ostringstream detail, failures;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failures << " [failed: " << what << "]";
    }
  }
};

SingularMetric model(double a, double radius = 1.0, std::size_t dim = 1) {
  return SingularMetric::monomial(MonomialWeights::scalar(dim, a), Polydisc::centered(dim, radius));
}

Section monomial_section(int k) { return Section::parse({k == 0 ? "1" : "z1^" + std::to_string(k)}, 1); }

Point origin(std::size_t dim = 1) { return Point::Zero(static_cast<Eigen::Index>(dim)); }

double r2(const Point& z) { return z.squaredNorm(); }

// 1. theta machinery
void theta_machinery(Outcome& out) {
  const std::vector<double> betas{0.1, 0.25, 1.0, 10.0};
  double worst = 0.0, prev = std::numeric_limits<double>::infinity();
  bool decreasing = true;
  for (double b : betas) {
    worst = std::max(worst, theta_identity_residual(b, 1e-6));
    const double v = theta(b, 1e-6).value;
    decreasing = decreasing && v < prev;
    prev = v;
  }
  out.require(worst <= 3e-6, "identity residual <= 3e-6");
  out.require(decreasing, "theta strictly decreasing");
  const double t100 = theta(100.0).value;
  out.require(t100 < 1.02, "theta(100) < 1.02");
  std::vector<double> small;
  for (int k = 1; k <= 4; ++k) small.push_back(theta(std::pow(10.0, -k)).value);
  bool increasing = true;
  for (std::size_t i = 1; i < small.size(); ++i) increasing = increasing && small[i] > small[i - 1];
  out.require(increasing, "theta(10^-k) increasing");
  out.require(small[3] > 2.0 * small[0], "theta(1e-4) > 2 theta(0.1)");
  out.detail << "max residual " << worst << ", theta(100) = " << t100 << ", theta(1e-4)/theta(0.1) = " << small[3] / small[0];
}

// 2. g oracle
void g_oracle(Outcome& out) {
  double worst = 0.0;
  for (int i = 0; i < 10; ++i)
    for (int k = 0; k < 10; ++k) {
      const double beta = 0.5 * i, t = 0.01 * std::pow(1000.0, k / 9.0);
      worst = std::max(worst, std::abs(g_beta(beta, t) - std::exp(-1.0) * oracle::e1((1.0 + beta) * t)));
    }
  out.require(worst <= 1e-10, "|g - e^-1 E1| <= 1e-10 on the 10x10 grid");
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ub(0.0, 10.0), ut(1e-4, 5.0);
  int bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const double beta = ub(rng), t = ut(rng);
    const double bound = std::exp(-1.0 - (1.0 + beta) * t) / ((1.0 + beta) * t);
    if (!(g_beta(beta, t) <= bound * (1.0 + 1e-12))) ++bad;
  }
  out.require(bad == 0, "upper bound at 1e4 random points");
  out.detail << "max deviation " << worst << ", bound violations " << bad << "/10000";
}

// 3. exponents on the monomial family
void exponents(Outcome& out) {
  int cases = 0, failures = 0;
  double widest = 0.0;
  for (double a : {0.5, 1.0, 2.0})
    for (int k = 0; k <= 3; ++k) {
      const double c = (k + 1) / a - 1.0;
      if (c < 0.0) continue;
      ++cases;
      const ExponentBracket b = singularity_exponent(model(a), monomial_section(k), origin());
      widest = std::max(widest, b.hi - b.lo);
      if (!(b.lo <= c && c <= b.hi && b.hi - b.lo <= 0.02)) {
        ++failures;
        out.detail << " (a=" << a << ",k=" << k << ": [" << b.lo << "," << b.hi << "] vs " << c << ")";
      }
    }
  out.require(failures == 0, "every bracket contains (k+1)/a - 1 with width <= 0.02");
  out.detail << cases << " cases with c >= 0, " << failures << " failures, widest bracket " << widest;
}

// 4. capacities
void capacities(Outcome& out) {
  struct Inst {
    double a, beta, radius;
    int k;
  };
  // Each F = z^k lies outside the module m = {z^l : l + 1 > a (1 + beta)}.
  const std::vector<Inst> inst{{0.5, 2.0, 1.0, 0}, {0.5, 3.0, 0.6, 1}, {1.0, 1.5, 0.8, 1},
                               {2.0, 1.0, 0.7, 2}, {2.0, 1.0, 1.0, 3}, {1.0, 3.0, 0.5, 2}};
  double worst_analytic = 0.0, worst_quad = 0.0;
  ProjectionOracleConfig quad;
  quad.method = GramMethod::Quadrature;
  for (const Inst& s : inst) {
    const SingularMetric h = model(s.a, s.radius);
    const Polydisc region = Polydisc::centered(1, s.radius);
    const double exact = kPi * std::pow(s.radius, 2 * s.k + 2) / (s.k + 1);
    const double an = capacity_C(h, monomial_section(s.k), s.beta, region, origin()).value;
    const double qu = capacity_C(h, monomial_section(s.k), s.beta, region, origin(), quad).value;
    worst_analytic = std::max(worst_analytic, std::abs(an - exact) / exact);
    worst_quad = std::max(worst_quad, std::abs(qu - exact) / exact);
  }
  out.require(worst_analytic <= 1e-6, "analytic relative error <= 1e-6");
  out.require(worst_quad <= 1e-3, "quadrature relative error <= 1e-3");

  // C = 0 exactly when the support of F lies in m.
  int checked = 0, mismatched = 0;
  for (double a : {0.5, 1.0, 2.0})
    for (double beta : {0.5, 1.5, 3.0})
      for (int k = 0; k <= 4; ++k) {
        const SingularMetric h = model(a);
        const bool in_module = k + 1 > a * (1.0 + beta) + 1e-12;
        const double c = capacity_C(h, monomial_section(k), beta, Polydisc::unit(1), origin()).value;
        ++checked;
        if ((c == 0.0) != in_module) ++mismatched;
      }
  out.require(mismatched == 0, "C = 0 iff F in m");
  out.detail << inst.size() << " instances, analytic rel err " << worst_analytic << ", quadrature rel err " << worst_quad
             << "; zero-iff-member on " << checked << " cases, " << mismatched << " mismatches";
}

// 5. G-curve bound
void g_curve_bound(Outcome& out) {
  std::vector<double> ts{0.0};
  for (int i = 0; i < 49; ++i) ts.push_back(0.05 + (10.0 - 0.05) * i / 48.0);
  const GCurve curve = g_curve(model(0.5), Section::parse({"1"}, 1), 2.0, origin(), Polydisc::unit(1), ts);
  double worst = 0.0;
  bool within = true;
  for (const GSample& s : curve.samples) {
    const double d = std::abs(s.value - kPi * std::exp(-2.0 * s.t));
    worst = std::max(worst, d);
    within = within && d <= s.abs_error + 1e-12 * kPi;
  }
  out.require(curve.samples.size() == 50, "50 grid points");
  out.require(within, "G = pi e^{-2t} within quadrature error");
  const SlackReport rep = lower_bound_check(curve);
  out.require(rep.passed, "lower_bound_check passes");
  out.require(rep.min_slack_away_from_zero > 0.0, "slack > 0 for t >= 0.05");
  out.detail << curve.samples.size() << " points, max |G - pi e^-2t| " << worst << ", min slack (t >= 0.05) "
             << rep.min_slack_away_from_zero;
}

// 6. differential inequality chain
void differential_chain(Outcome& out) {
  std::vector<double> ts;
  for (int i = 0; i < 200; ++i) ts.push_back(10.0 * i / 199.0);
  const GCurve curve = g_curve(model(0.5), Section::parse({"1"}, 1), 2.0, origin(), Polydisc::unit(1), ts);
  const double r = differential_inequality_check(curve, 2.0 * kPi);
  out.require(r < 1e-3, "residual < 1e-3");
  out.detail << "residual " << r << " on a 200-point grid with G = 2 pi";
}

// 7. effectiveness soundness
void effectiveness(Outcome& out) {
  const std::vector<std::pair<double, int>> models{{0.25, 0}, {0.5, 0}, {0.75, 0}, {0.9, 0}, {1.5, 1}};
  const std::vector<double> betas{0.05, 0.1, 0.2, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0};
  int pairs = 0, unsound = 0, predicted = 0;
  for (const auto& [a, k] : models)
    for (double beta : betas) {
      const EffectivenessReport r =
          effectiveness_verdict(model(a), monomial_section(k), origin(), Polydisc::unit(1), beta);
      ++pairs;
      if (r.predicted_member) ++predicted;
      if (!r.sound()) {
        ++unsound;
        out.detail << " (a=" << a << ",k=" << k << ",beta=" << beta << ")";
      }
    }
  out.require(pairs == 50 && unsound == 0, "no predicted member observed outside");
  const EffectivenessReport base = effectiveness_verdict(model(0.5), monomial_section(0), origin(), Polydisc::unit(1), 1.0);
  const ThetaValue t1 = theta(1.0);
  out.require(t1.value <= base.ratio + t1.quad_error, "theta(c_o) <= ratio on a = 0.5");
  out.detail << pairs << " pairs, " << predicted << " predicted members, " << unsound
             << " unsound; theta(1) = " << t1.value << " <= ratio " << base.ratio;
}

// 8. Lelong numbers, Skoda and integrability thresholds
void skoda_lelong(Outcome& out) {
  double worst = 0.0;
  bool skoda_ok = true;
  for (double c : {0.5, 1.5, 3.0}) {
    const LelongEstimate e =
        lelong_number(parse_expr(std::to_string(c / 2.0) + "*log(abs2(z1))"), origin(), 1e-6, 1e-2);
    worst = std::max(worst, std::abs(e.value - c) / c);
    skoda_ok = skoda_ok && ((skoda_guarantee(e) == SkodaVerdict::Guaranteed) == (c < 2.0));
  }
  out.require(worst <= 0.01, "Lelong within 1%");
  out.require(skoda_ok, "Guaranteed exactly for c < 2");

  struct Case {
    std::size_t n;
    double c;
  };
  const std::vector<Case> cases{{1, 0.5}, {1, 1.5}, {1, 2.5}, {1, 3.5}, {2, 1.0},
                                {2, 3.0}, {2, 3.5}, {2, 4.5}, {2, 6.0}};
  int match = 0;
  for (const Case& s : cases) {
    const double c = s.c;
    const ScalarField f = [c](const Point& z) { return Value(std::pow(r2(z), -c / 2.0)); };
    const IntegrabilityVerdict v = integrability_at(f, origin(s.n), 0.5, 16);
    const Integrability want = c < 2.0 * static_cast<double>(s.n) ? Integrability::Converges : Integrability::Diverges;
    if (v.verdict == want)
      ++match;
    else
      out.detail << " (n=" << s.n << ",c=" << c << ": " << to_string(v.verdict) << ")";
  }
  out.require(match == static_cast<int>(cases.size()), "integrability verdicts match c < 2n");
  out.detail << "max Lelong rel err " << worst << ", integrability " << match << "/" << cases.size();
}

// 9. Bergman sandwich
void bergman(Outcome& out) {
  const double a = 0.5;
  const std::vector<int> ms{1, 2, 4, 8};
  std::vector<double> grid;
  for (int i = 1; i <= 20; ++i) grid.push_back(0.045 * i);
  double c1 = 0.0;
  for (int m : ms) {
    const int L = bergman_truncation(a, m);
    for (double r : grid) c1 = std::max(c1, m * (2 * a * std::log(r) - bergman_log(a, m, L, r)));
  }
  bool sandwich = true;
  for (int m : ms) {
    const int L = bergman_truncation(a, m);
    for (double r : grid) sandwich = sandwich && bergman_log(a, m, L, r) >= 2 * a * std::log(r) - c1 / m - 1e-12;
  }
  out.require(sandwich, "phi_m >= phi - C1/m on the grid");
  double prev = std::numeric_limits<double>::infinity();
  bool monotone = true;
  std::ostringstream errs;
  for (int m : ms) {
    const double e = std::abs(bergman_log(a, m, bergman_truncation(a, m), 0.5) - 2 * a * std::log(0.5));
    monotone = monotone && e < prev;
    prev = e;
    errs << " " << e;
  }
  out.require(monotone, "|phi_m - phi|(0.5) decreasing");
  out.detail << "fitted C1 = " << c1 << ", errors at 0.5:" << errs.str();
}

// 10. stability
void stability(Outcome& out) {
  const SingularMetric h = model(0.5);
  const Section one = Section::parse({"1"}, 1);
  MetricSequenceSpec spec{h, SequenceRule::Scale, 1, 32};
  const std::vector<SingularMetric> scale = build_sequence(spec);
  // h_1 = |z|^{-2} has no finite L^1.2 gap; the gap table starts at j = 2.
  StabilityOptions opt;
  opt.j_first = 2;
  const StabilityReport rep =
      stability_lp(h, std::vector<SingularMetric>(scale.begin() + 1, scale.end()), one, 1.2, Polydisc::unit(1), opt);
  const double final_gap = rep.per_j.back().gap;
  out.require(rep.verdict == StabilityVerdict::Decaying, "Scale rule p = 1.2 Decaying with final gap < 1e-3");
  out.detail << "Scale p=1.2: gap " << rep.per_j.front().gap << " (j=2) -> " << final_gap << " (j=32), verdict "
             << to_string(rep.verdict) << "; ";

  struct Inst {
    double a;
    int k;
    SequenceRule rule;
  };
  const std::vector<Inst> inst{{0.5, 0, SequenceRule::Scale},  {0.5, 0, SequenceRule::Offset},
                               {0.9, 0, SequenceRule::Scale},  {1.5, 1, SequenceRule::Scale},
                               {2.0, 3, SequenceRule::Offset}, {0.25, 0, SequenceRule::Scale}};
  int found = 0;
  std::ostringstream j0s;
  for (const Inst& s : inst) {
    MetricSequenceSpec sp{model(s.a), s.rule, 1, 32};
    const auto j0 = union_sheaf_check(model(s.a), build_sequence(sp), monomial_section(s.k), origin());
    if (j0) {
      ++found;
      j0s << " " << *j0;
    } else {
      j0s << " none";
    }
  }
  out.require(found == static_cast<int>(inst.size()), "union_sheaf_check finds j0 on all instances");
  out.detail << "union j0:" << j0s.str() << "; ";

  // Family phi = log|z|, phi_j = (1 + 1/j) phi, p = 1/2.
  QuadOptions q;
  q.tol = 1e-7;
  q.rel_tol = 1e-6;
  q.singular_points.push_back(origin());
  const ScalarField phi = [](const Point& z) { return Value(0.5 * std::log(r2(z))); };
  double prev = std::numeric_limits<double>::infinity(), last = prev;
  bool decreasing = true;
  long j_end = 0;
  for (long j = 1; j <= (1L << 24); j *= 4) {
    const double k = 1.0 + 1.0 / static_cast<double>(j);
    const ScalarField pj = [k, &phi](const Point& z) { return phi(z) * Value(k); };
    last = exp_gap_lp(phi, pj, 0.5, Polydisc::unit(1), q).value;
    decreasing = decreasing && last < prev;
    prev = last;
    j_end = j;
    if (last < 1e-3) break;
  }
  out.require(decreasing && last < 1e-3, "exp gap decreasing to < 1e-3");
  out.detail << "exp gap " << last << " at j = " << j_end;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(MSLAB_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// 11. Fubini identity and determinism
void hygiene(Outcome& out) {
  QuadOptions q;
  q.tol = 1e-8;
  q.singular_points.push_back(origin());
  const ScalarField one = [](const Point&) { return Value(1.0); };
  const std::vector<std::pair<std::string, ScalarField>> phis{
      {"constant", [](const Point&) { return Value(-0.7); }},
      {"a=0.5", [](const Point& z) { return Value(0.5 * std::log(r2(z))); }},
      {"a=0.25", [](const Point& z) { return Value(0.25 * std::log(r2(z))); }}};
  double worst = 0.0;
  for (const auto& [name, phi] : phis) worst = std::max(worst, fubini_tail_residual(one, phi, Polydisc::unit(1), q));
  out.require(worst < 5.0 * q.tol, "Fubini residual < 5 tol");

  const fs::path tmp = fs::temp_directory_path() / ("mslab-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(tmp);
  int files = 0;
  bool identical = true, ran = true;
  for (const char* name : {"monomial-a05", "stability-a05"}) {
    const std::string scenario = std::string(MSLAB_SOURCE_DIR) + "/scenarios/" + name + ".json";
    const fs::path a = tmp / name / "jobs1", b = tmp / name / "jobs8";
    ran = ran && run_cli("--jobs 1 --no-cache --out " + a.string() + " run " + scenario) == 0;
    ran = ran && run_cli("--jobs 8 --no-cache --out " + b.string() + " run " + scenario) == 0;
    if (!fs::exists(a)) continue;
    for (const auto& e : fs::directory_iterator(a)) {
      if (e.path().extension() != ".csv") continue;
      ++files;
      if (slurp(e.path()) != slurp(b / e.path().filename())) {
        identical = false;
        out.detail << " (differs: " << name << "/" << e.path().filename().string() << ")";
      }
    }
  }
  fs::remove_all(tmp);
  out.require(ran, "both scenario runs exit 0");
  out.require(identical && files > 0, "CSV bodies byte-identical across --jobs 1 and --jobs 8");
  out.detail << "max Fubini residual " << worst << " (tol " << q.tol << "); " << files << " CSV files compared";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"theta machinery", theta_machinery},
      {"g oracle", g_oracle},
      {"singularity exponents", exponents},
      {"capacities", capacities},
      {"G-curve lower bound", g_curve_bound},
      {"differential inequality", differential_chain},
      {"effectiveness soundness", effectiveness},
      {"Lelong and Skoda", skoda_lelong},
      {"Bergman sandwich", bergman},
      {"L^p stability", stability},
      {"engine hygiene", hygiene},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.failures << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!out.pass) ++failed;
    std::printf("%s %2zu %s (%.1f s): %s%s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), secs,
                out.detail.str().c_str(), out.failures.str().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
