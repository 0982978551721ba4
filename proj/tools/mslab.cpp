// mslab: scenario runner and single-operation subcommands.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mslab/openness.hpp"
#include "mslab/parallel.hpp"
#include "mslab/report.hpp"
#include "mslab/scenario.hpp"

using json = nlohmann::json;

namespace {

struct Global {
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  bool no_cache = false;
  std::string cache_dir;
  std::string out = "mslab-out";
  int jobs = 0;

  mslab::RunFlags flags() const { return {tol, seed, no_cache, cache_dir, jobs}; }
};

// Model flags shared by the single-experiment subcommands.
struct Model {
  int dim = 1;
  double radius = 1.0;
  std::optional<double> a;
  std::string weight;
  std::vector<std::string> section{"1"};

  void add(CLI::App* app) {
    app->add_option("--dim", dim, "Number of complex variables")->check(CLI::PositiveNumber);
    app->add_option("--radius", radius, "Polydisc radius about the origin")->check(CLI::PositiveNumber);
    auto* oa = app->add_option("--a", a, "Monomial weight |z|^{-2a}");
    app->add_option("--weight", weight, "Scalar metric weight expression")->excludes(oa);
    app->add_option("--section", section, "Section components (one expression per component)");
  }

  json scenario(const std::string& name, json experiment) const {
    json metric;
    if (a)
      metric = {{"monomial", {{"a", *a}}}};
    else if (!weight.empty())
      metric = {{"entries", json::array({json::array({weight})})}};
    else
      metric = {{"monomial", {{"a", 0.0}}}};
    return {{"name", name},
            {"dim", dim},
            {"region", {{"radii", radius}}},
            {"metric", metric},
            {"sections", {{"F", section}}},
            {"experiments", json::array({std::move(experiment)})}};
  }
};

int run_single(const Global& g, const json& doc, const std::string& name) {
  const mslab::RunSummary s = mslab::run_scenario_text(doc.dump(), name, g.out, g.flags(), std::cerr);
  for (const auto& e : s.experiments) {
    for (const auto& f : e.files) {
      if (f.size() < 4 || f.substr(f.size() - 4) != ".csv") continue;
      std::ifstream in(std::filesystem::path(g.out) / f);
      std::cout << in.rdbuf();
    }
    if (!e.message.empty()) std::cerr << e.name << ": " << e.message << "\n";
  }
  return s.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for singular hermitian metrics and strong openness", "mslab"};
  app.set_version_flag("--version", mslab::kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Global g;
  app.add_option("--tol", g.tol, "Absolute quadrature tolerance")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Sampling seed");
  app.add_flag("--no-cache", g.no_cache, "Bypass the result cache");
  app.add_option("--cache-dir", g.cache_dir, "Cache directory (default $MSLAB_CACHE_DIR, else <out>/.cache)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--jobs", g.jobs, "Worker threads (0 = hardware concurrency)")->check(CLI::NonNegativeNumber);

  std::string scenario_path;
  auto* run = app.add_subcommand("run", "Run every experiment of a scenario file");
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();

  std::vector<double> betas;
  auto* th = app.add_subcommand("theta", "Evaluate theta(beta)");
  th->add_option("--beta", betas, "beta > 0")->required();
  double theta_tol = 1e-8;
  th->add_option("--theta-tol", theta_tol, "Quadrature tolerance");

  std::vector<double> ts;
  auto* gs = app.add_subcommand("g", "Evaluate g_beta(t)");
  gs->add_option("--beta", betas, "beta > 0")->required();
  gs->add_option("--t", ts, "t > 0")->required();

  Model model;
  double beta = 1.0;
  double resolution = 0.02;
  auto* ex = app.add_subcommand("exponent", "Bracket the singularity exponent c_o(F, h)");
  model.add(ex);
  ex->add_option("--resolution", resolution, "Bracket width");

  double t_from = 0.05, t_to = 10.0;
  int t_count = 49;
  auto* gc = app.add_subcommand("gcurve", "Tabulate G_beta(t) and the lower-bound slack");
  model.add(gc);
  gc->add_option("--beta", beta, "beta > 0");
  gc->add_option("--from", t_from, "First positive t");
  gc->add_option("--to", t_to, "Last t");
  gc->add_option("--count", t_count, "Positive grid points (t = 0 is prepended)");

  auto* ef = app.add_subcommand("effectiveness", "Compare theta(beta) with the energy/capacity ratio");
  model.add(ef);
  ef->add_option("--beta", betas, "beta values")->required();

  std::string rule = "Scale";
  double p = 1.2;
  int j_first = 1, j_last = 32;
  std::string perturbation;
  auto* st = app.add_subcommand("stability", "L^p gap of a decreasing metric sequence");
  model.add(st);
  st->add_option("--rule", rule, "Scale, Offset or Mollify");
  st->add_option("--p", p, "Exponent p");
  st->add_option("--j-first", j_first, "First index");
  st->add_option("--j-last", j_last, "Last index");
  st->add_option("--perturbation", perturbation, "G in F_j = F + G/j");

  std::string phi;
  double r_min = 1e-6, r_max = 1e-2;
  int lelong_dim = 1;
  auto* le = app.add_subcommand("lelong", "Estimate the Lelong number at the origin");
  le->add_option("--phi", phi, "psh function expression")->required();
  le->add_option("--dim", lelong_dim, "Number of complex variables");
  le->add_option("--r-min", r_min, "Smallest radius");
  le->add_option("--r-max", r_max, "Largest radius");

  double bergman_a = 0.5, bergman_z = 0.5;
  std::vector<int> ms{1, 2, 4, 8};
  auto* be = app.add_subcommand("bergman", "Bergman approximants of 2a log|z| on the unit disc");
  be->add_option("--a", bergman_a, "Weight exponent");
  be->add_option("--m", ms, "Levels m");
  be->add_option("--z", bergman_z, "Real evaluation point in (0, 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (g.jobs > 0) mslab::set_default_jobs(g.jobs);
    if (*run) {
      const mslab::RunSummary s = mslab::run_scenario(scenario_path, g.out, g.flags(), std::cerr);
      return s.exit_code;
    }
    if (*th) {
      for (double b : betas) {
        if (!(b > 0.0)) throw mslab::ScenarioError("--beta must be positive");
        const mslab::ThetaValue v = mslab::theta(b, theta_tol);
        std::cout << "beta=" << mslab::format_number(b) << " theta=" << mslab::format_number(v.value)
                  << " error=" << mslab::format_number(v.quad_error) << "\n";
      }
      return 0;
    }
    if (*gs) {
      for (double b : betas)
        for (double t : ts) {
          if (!(b > 0.0) || !(t > 0.0)) throw mslab::ScenarioError("--beta and --t must be positive");
          std::cout << "beta=" << mslab::format_number(b) << " t=" << mslab::format_number(t)
                    << " g=" << mslab::format_number(mslab::g_beta(b, t)) << " error=0\n";
        }
      return 0;
    }
    if (*ex)
      return run_single(g, model.scenario("exponent", {{"type", "exponent"}, {"name", "exponent"}, {"resolution", resolution}}),
                        "exponent");
    if (*gc)
      return run_single(g,
                        model.scenario("gcurve", {{"type", "gcurve"},
                                                  {"name", "gcurve"},
                                                  {"beta", beta},
                                                  {"t_grid", {{"from", t_from}, {"to", t_to}, {"count", t_count}}}}),
                        "gcurve");
    if (*ef)
      return run_single(g, model.scenario("effectiveness", {{"type", "effectiveness"}, {"name", "effectiveness"}, {"betas", betas}}),
                        "effectiveness");
    if (*st) {
      json e = {{"type", "stability"}, {"name", "stability"}, {"rule", rule}, {"p", p},
                {"j_first", j_first},  {"j_last", j_last},    {"require", "any"}};
      json doc = model.scenario("stability", e);
      if (!perturbation.empty()) {
        doc["sections"]["G"] = json::array({perturbation});
        doc["experiments"][0]["perturbation"] = "G";
      }
      return run_single(g, doc, "stability");
    }
    if (*le) {
      json doc = {{"name", "lelong"},
                  {"dim", lelong_dim},
                  {"region", {{"radii", 1.0}}},
                  {"experiments", json::array({{{"type", "lelong"}, {"name", "lelong"}, {"phi", phi}, {"r_min", r_min},
                                                {"r_max", r_max}}})}};
      return run_single(g, doc, "lelong");
    }
    if (*be) {
      json doc = {{"name", "bergman"},
                  {"region", {{"radii", 1.0}}},
                  {"experiments", json::array({{{"type", "bergman"}, {"name", "bergman"}, {"a", bergman_a}, {"ms", ms},
                                                {"z", bergman_z}}})}};
      return run_single(g, doc, "bergman");
    }
  } catch (const mslab::ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const mslab::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
