#include "mslab/openness.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "mslab/parallel.hpp"
#include "mslab/special.hpp"

namespace mslab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kInvE = std::exp(-1.0);

// 1 + scale * int_0^inf (1 - e^{-g(t)}) e^{scale t} dt, where ge(t) = g(t) e^{scale t}
// is supplied in a form that stays finite for large t. The tail beyond T is
// bounded by tail(T).
ThetaValue theta_panels(double beta, double tol, double scale, const std::function<double(double)>& g,
                        const std::function<double(double)>& ge, const std::function<double(double)>& tail) {
  auto integrand = [&](double t) {
    if (t <= 0.0) return 1.0;
    const double gt = g(t);
    if (!(gt > 0.0)) return ge(t);
    if (std::isinf(gt)) return std::exp(scale * t);
    return -std::expm1(-gt) / gt * ge(t);
  };
  // [0, 1] carries the t^{1/e} cusp of e^{-g}; tanh-sinh copes with it.
  double err = 0.0, l1 = 0.0;
  boost::math::quadrature::tanh_sinh<double> ts;
  double sum = ts.integrate(integrand, 0.0, 1.0, 1e-12, &err, &l1);
  std::vector<double> breaks{1.0};
  std::size_t i = 0;
  for (int guard = 0; guard < 200; ++guard) {
    if (i + 1 >= breaks.size()) {
      const double t = breaks.back();
      if (scale * tail(t) < 1e-2 * tol) break;
      breaks.push_back(2.0 * t);
    }
    const IntegralEstimate p = integrate_1d(integrand, breaks[i], breaks[i + 1], 1e-12);
    sum += p.value;
    err += p.abs_error;
    ++i;
  }
  ThetaValue out;
  out.beta = beta;
  out.value = 1.0 + scale * sum;
  out.quad_error = scale * (err + tail(breaks.back()));
  return out;
}

void check_theta_beta(double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("theta needs beta > 0 (theta blows up as beta -> 0+)");
}

double default_rho0(const SingularMetric& h, const Point& o, double rho0) {
  if (rho0 > 0.0) return rho0;
  const double d = h.domain().boundary_distance(o);
  if (!(d > 0.0)) throw std::invalid_argument("point must lie inside the metric's domain");
  return 0.5 * d;
}

void enumerate_indices(std::size_t n, int max_degree, MultiIndex& cur, std::size_t k, int used,
                       std::vector<MultiIndex>& out) {
  if (k == n) {
    out.push_back(cur);
    return;
  }
  for (int a = 0; a + used <= max_degree; ++a) {
    cur[k] = a;
    enumerate_indices(n, max_degree, cur, k + 1, used + a, out);
  }
  cur[k] = 0;
}

std::vector<MultiIndex> indices_up_to(std::size_t n, int max_degree) {
  std::vector<MultiIndex> out;
  MultiIndex cur(n, 0);
  enumerate_indices(n, max_degree, cur, 0, 0, out);
  std::sort(out.begin(), out.end(), [](const MultiIndex& a, const MultiIndex& b) {
    int da = 0, db = 0;
    for (int x : a) da += x;
    for (int x : b) db += x;
    return da != db ? da < db : a < b;
  });
  return out;
}

const MonomialWeights& require_monomial(const SingularMetric& h, const Point& o) {
  const auto& w = h.monomial_weights();
  if (!w)
    throw std::invalid_argument(
        "capacity_C needs a monomial-model metric; use capacity_upper_bound for the generic bound "
        "int_U |F|^2_{h/det h}");
  if (w->origin.size() != o.size() || (w->origin - o).norm() > 1e-12)
    throw std::invalid_argument(
        "capacity_C needs monomial weights centred at o; use capacity_upper_bound for the generic bound");
  return *w;
}

struct ComponentProblem {
  std::vector<MultiIndex> basis;
  std::vector<bool> in_module;
  Eigen::VectorXcd f;
};

bool analytic_applicable(const MonomialWeights& nu, const Polydisc& region, const Point& o) {
  if ((region.center() - o).norm() > 1e-12) return false;
  if (nu.dim() == 1) return true;
  for (Eigen::Index i = 0; i < nu.radial.size(); ++i)
    if (nu.radial[i] != 0.0) return false;
  return true;
}

double analytic_norm2(const MonomialWeights& nu, std::size_t i, const MultiIndex& alpha, const Polydisc& region) {
  const auto row = static_cast<Eigen::Index>(i);
  double v = nu.coeff[row];
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    double e = 2.0 * (alpha[k] - nu.axis(row, static_cast<Eigen::Index>(k)));
    if (alpha.size() == 1) e -= 2.0 * nu.radial[row];
    if (!(e + 2.0 > 0.0)) return kInf;
    const double R = region.radii()[static_cast<Eigen::Index>(k)];
    v *= 2.0 * M_PI * std::pow(R, e + 2.0) / (e + 2.0);
  }
  return v;
}

IntegralEstimate capacity_impl(const SingularMetric& h, const Section& f, double beta, const Polydisc& region,
                               const Point& o, const std::optional<double>& t, const ProjectionOracleConfig& cfg) {
  if (!(beta >= 0.0)) throw std::invalid_argument("capacity needs beta >= 0");
  if (f.rank() != h.rank()) throw std::invalid_argument("section rank does not match metric rank");
  if (f.dim() != h.dim() || region.dim() != h.dim()) throw std::invalid_argument("dimension mismatch");
  const MonomialWeights& w = require_monomial(h, o);
  const MonomialWeights mu = w.twisted(beta);
  const MonomialWeights nu = w.normalized();
  const std::size_t n = h.dim(), r = h.rank();
  const int degree = std::max(f.degree(), 0);
  const int max_degree = cfg.max_degree < 0 ? degree + 1 : std::max(cfg.max_degree, degree);
  const std::vector<MultiIndex> all = indices_up_to(n, max_degree);

  std::vector<ComponentProblem> comps(r);
  bool all_inside = true;
  for (std::size_t i = 0; i < r; ++i) {
    const Polynomial p = f.components[i].shifted(o);
    for (const auto& [alpha, c] : p.terms())
      if (!nu.integrable(i, alpha))
        throw std::invalid_argument("int_U |F|^2_{h/det h} is infinite; the capacity is undefined");
    ComponentProblem& cp = comps[i];
    for (const auto& alpha : all) {
      if (!nu.integrable(i, alpha)) continue;
      cp.basis.push_back(alpha);
      cp.in_module.push_back(mu.integrable(i, alpha));
    }
    cp.f = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(cp.basis.size()));
    for (std::size_t b = 0; b < cp.basis.size(); ++b) {
      const Complex c = p.coefficient(cp.basis[b]);
      cp.f[static_cast<Eigen::Index>(b)] = c;
      if (c != 0.0 && !cp.in_module[b]) all_inside = false;
    }
  }
  IntegralEstimate out;
  if (all_inside) return out;  // F - F lies in the module: exact zero

  const bool analytic_ok = !t && analytic_applicable(nu, region, o);
  if (cfg.method == GramMethod::Analytic && !analytic_ok)
    throw std::invalid_argument("analytic Gram matrix needs an o-centred region without a sublevel restriction");
  const bool analytic = analytic_ok && cfg.method != GramMethod::Quadrature;

  std::vector<Eigen::MatrixXcd> gram(r), gram_err(r);
  if (analytic) {
    for (std::size_t i = 0; i < r; ++i) {
      const auto K = static_cast<Eigen::Index>(comps[i].basis.size());
      gram[i] = Eigen::MatrixXcd::Zero(K, K);
      gram_err[i] = Eigen::MatrixXcd::Zero(K, K);
      for (Eigen::Index b = 0; b < K; ++b) {
        gram[i](b, b) = analytic_norm2(nu, i, comps[i].basis[static_cast<std::size_t>(b)], region);
        gram_err[i](b, b) = 4.0 * std::numeric_limits<double>::epsilon() * gram[i](b, b).real();
      }
    }
  } else {
    std::vector<std::size_t> offset(r + 1, 0);
    for (std::size_t i = 0; i < r; ++i) {
      const std::size_t K = comps[i].basis.size();
      offset[i + 1] = offset[i] + K * (K + 1);
    }
    const std::size_t m = offset[r];
    const VectorField field = [&](const Point& z, double* out_values) {
      const Point d = z - o;
      for (std::size_t i = 0; i < r; ++i) {
        const Value wi = nu.weight(i, z);
        const double weight = wi.finite() ? wi.real() : kInf;
        const auto& basis = comps[i].basis;
        std::vector<Complex> mono(basis.size());
        for (std::size_t b = 0; b < basis.size(); ++b) {
          Complex v = 1.0;
          for (std::size_t k = 0; k < n; ++k)
            for (int e = 0; e < basis[b][k]; ++e) v *= d[static_cast<Eigen::Index>(k)];
          mono[b] = v;
        }
        double* o_i = out_values + offset[i];
        for (std::size_t p = 0; p < basis.size(); ++p)
          for (std::size_t q = p; q < basis.size(); ++q) {
            const Complex v = mono[p] * std::conj(mono[q]);
            *o_i++ = weight * v.real();
            *o_i++ = weight * v.imag();
          }
      }
    };
    QuadOptions q = cfg.quad;
    if (q.singular_points.empty() && (region.center() - o).norm() <= 1e-12) q.singular_points.push_back(o);
    std::vector<IntegralEstimate> est;
    if (t) {
      const ScalarField phi = [&h](const Point& z) { return log_det(h, z); };
      est = integrate_vector(field, m, region, q, phi, *t);
    } else {
      est = integrate_vector(field, m, region, q);
    }
    for (const auto& e : est) {
      if (e.status == QuadStatus::DivergenceSuspected || !std::isfinite(e.value))
        throw std::runtime_error("Gram matrix quadrature did not converge");
      out.cells_used = std::max(out.cells_used, e.cells_used);
      if (e.status == QuadStatus::MaxCellsReached) out.status = QuadStatus::MaxCellsReached;
    }
    for (std::size_t i = 0; i < r; ++i) {
      const auto K = static_cast<Eigen::Index>(comps[i].basis.size());
      gram[i] = Eigen::MatrixXcd::Zero(K, K);
      gram_err[i] = Eigen::MatrixXcd::Zero(K, K);
      std::size_t idx = offset[i];
      for (Eigen::Index p = 0; p < K; ++p)
        for (Eigen::Index qq = p; qq < K; ++qq) {
          const Complex v(est[idx].value, est[idx + 1].value);
          const double e = est[idx].abs_error + est[idx + 1].abs_error;
          idx += 2;
          gram[i](p, qq) = v;
          gram[i](qq, p) = std::conj(v);
          if (p == qq) gram[i](p, p) = v.real();
          gram_err[i](p, qq) = gram_err[i](qq, p) = e;
        }
    }
  }

  double value = 0.0, error = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    const ComponentProblem& cp = comps[i];
    std::vector<Eigen::Index> inside, outside;
    for (std::size_t b = 0; b < cp.basis.size(); ++b) {
      const auto idx = static_cast<Eigen::Index>(b);
      if (gram[i](idx, idx).real() <= 0.0) continue;  // zero norm on the region
      (cp.in_module[b] ? inside : outside).push_back(idx);
    }
    if (outside.empty()) continue;
    const auto nN = static_cast<Eigen::Index>(outside.size());
    const auto nM = static_cast<Eigen::Index>(inside.size());
    // Scale to unit diagonal before forming the Schur complement on the
    // complement of the module.
    Eigen::VectorXd s_out(nN), s_in(nM);
    for (Eigen::Index a = 0; a < nN; ++a) s_out[a] = 1.0 / std::sqrt(gram[i](outside[a], outside[a]).real());
    for (Eigen::Index a = 0; a < nM; ++a) s_in[a] = 1.0 / std::sqrt(gram[i](inside[a], inside[a]).real());
    Eigen::MatrixXcd Gnn(nN, nN), Gnm(nN, nM), Gmm(nM, nM);
    for (Eigen::Index a = 0; a < nN; ++a) {
      for (Eigen::Index b = 0; b < nN; ++b) Gnn(a, b) = gram[i](outside[a], outside[b]) * s_out[a] * s_out[b];
      for (Eigen::Index b = 0; b < nM; ++b) Gnm(a, b) = gram[i](outside[a], inside[b]) * s_out[a] * s_in[b];
    }
    for (Eigen::Index a = 0; a < nM; ++a)
      for (Eigen::Index b = 0; b < nM; ++b) Gmm(a, b) = gram[i](inside[a], inside[b]) * s_in[a] * s_in[b];
    Eigen::MatrixXcd schur = Gnn;
    if (nM > 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Gmm);
      const Eigen::VectorXd& ev = es.eigenvalues();
      const double cut = 1e-13 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
      Eigen::VectorXd inv = Eigen::VectorXd::Zero(nM);
      for (Eigen::Index a = 0; a < nM; ++a)
        if (ev[a] > cut) inv[a] = 1.0 / ev[a];
      const Eigen::MatrixXcd pinv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().adjoint();
      schur -= Gnm * pinv * Gnm.adjoint();
    }
    Eigen::VectorXcd fs(nN);
    for (Eigen::Index a = 0; a < nN; ++a) fs[a] = cp.f[outside[a]] / s_out[a];
    const double c = (fs.adjoint() * schur * fs)(0, 0).real();
    value += std::max(c, 0.0);
    for (Eigen::Index a = 0; a < nN; ++a)
      for (Eigen::Index b = 0; b < nN; ++b)
        error += std::abs(cp.f[outside[a]]) * std::abs(cp.f[outside[b]]) *
                 gram_err[i](outside[a], outside[b]).real();
  }
  out.value = value;
  out.abs_error = error;
  return out;
}

}  // namespace

double g_beta(double beta, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("g_beta needs t > 0 (g_beta(0+) = +inf)");
  if (!(beta >= 0.0)) throw std::invalid_argument("g_beta needs beta >= 0");
  return kInvE * expint_e1((1.0 + beta) * t);
}

ThetaValue theta(double beta, double tol) {
  check_theta_beta(beta);
  const double k = 1.0 + beta;
  return theta_panels(
      beta, tol, 1.0, [&](double t) { return g_beta(beta, t); },
      [&](double t) { return kInvE * expint_e1_scaled(k * t) * std::exp(-beta * t); },
      [&](double T) { return kInvE * expint_e1(beta * T) / k; });
}

ThetaValue theta_alternate(double beta, double tol) {
  check_theta_beta(beta);
  const double lambda = beta / (1.0 + beta);
  return theta_panels(
      beta, tol, 1.0 / (1.0 + beta), [&](double t) { return g_beta(0.0, t); },
      [&](double t) { return kInvE * expint_e1_scaled(t) * std::exp(-lambda * t); },
      [&](double T) { return kInvE * expint_e1(lambda * T); });
}

double theta_identity_residual(double beta, double tol) {
  return std::abs(theta(beta, tol).value - theta_alternate(beta, tol).value);
}

// Slopes this close to zero are rounding noise on a log-divergent integrand.
constexpr double kSlopeNoise = 1e-9;

MembershipProbe membership(const SingularMetric& h, const Section& f, const Point& o, double beta,
                           const MembershipOptions& opt) {
  if (f.is_zero()) throw std::invalid_argument("membership needs a nonzero section");
  const SingularMetric ht = h.twisted(beta);
  const ScalarField norm2 = [&](const Point& z) { return section_norm2(ht, f, z); };
  MembershipProbe p;
  p.beta = beta;
  p.integrability = integrability_at(norm2, o, default_rho0(h, o, opt.rho0), opt.levels, opt.integrability);
  switch (p.integrability.verdict) {
    case Integrability::Converges:
      p.member = true;
      break;
    case Integrability::Diverges:
      p.member = false;
      break;
    case Integrability::Indeterminate:
      p.member = p.integrability.tail_slope < -kSlopeNoise;
      break;
  }
  return p;
}

ExponentBracket singularity_exponent(const SingularMetric& h, const Section& f, const Point& o,
                                     const ExponentOptions& opt) {
  if (!(opt.resolution > 0.0) || !(opt.beta_max > 0.0))
    throw std::invalid_argument("singularity_exponent needs positive resolution and beta_max");
  ExponentBracket b;
  auto probe = [&](double beta) {
    const MembershipProbe p = membership(h, f, o, beta, opt.membership);
    if (p.integrability.verdict == Integrability::Indeterminate) ++b.indeterminate_hits;
    return p.member;
  };
  if (!probe(0.0)) {
    b.not_member = true;
    return b;
  }
  if (probe(opt.beta_max)) {
    b.lo = b.hi = opt.beta_max;
    b.unbounded = true;
    return b;
  }
  b.lo = 0.0;
  b.hi = opt.beta_max;
  while (b.hi - b.lo > opt.resolution) {
    const double mid = 0.5 * (b.lo + b.hi);
    ++b.iterations;
    (probe(mid) ? b.lo : b.hi) = mid;
  }
  return b;
}

IntegralEstimate capacity_C(const SingularMetric& h, const Section& f, double beta, const Polydisc& region,
                            const Point& o, const ProjectionOracleConfig& cfg) {
  return capacity_impl(h, f, beta, region, o, std::nullopt, cfg);
}

IntegralEstimate capacity_sublevel(const SingularMetric& h, const Section& f, double beta, const Polydisc& region,
                                   const Point& o, double t, const ProjectionOracleConfig& cfg) {
  if (!(t >= 0.0)) throw std::invalid_argument("sublevel parameter t must be >= 0");
  return capacity_impl(h, f, beta, region, o, t, cfg);
}

IntegralEstimate capacity_upper_bound(const SingularMetric& h, const Section& f, const Polydisc& region,
                                      const QuadOptions& opt) {
  const SingularMetric nh = h.normalized();
  return integrate([&](const Point& z) { return section_norm2(nh, f, z); }, region, opt);
}

std::vector<std::pair<std::size_t, MultiIndex>> module_basis(const SingularMetric& h, double beta, int max_degree) {
  const auto& w = h.monomial_weights();
  if (!w) throw std::invalid_argument("module_basis needs a monomial-model metric");
  const MonomialWeights mu = w->twisted(beta);
  std::vector<std::pair<std::size_t, MultiIndex>> out;
  const std::vector<MultiIndex> all = indices_up_to(h.dim(), max_degree);
  for (std::size_t i = 0; i < h.rank(); ++i)
    for (const auto& alpha : all)
      if (mu.integrable(i, alpha)) out.emplace_back(i, alpha);
  return out;
}

GCurve g_curve(const SingularMetric& h, const Section& f, double beta, const Point& o, const Polydisc& region,
               const std::vector<double>& t_grid, const ProjectionOracleConfig& cfg) {
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    if (!(t_grid[k] >= 0.0)) throw std::invalid_argument("g_curve needs t >= 0");
    if (k > 0 && !(t_grid[k] > t_grid[k - 1])) throw std::invalid_argument("g_curve needs a strictly increasing grid");
  }
  GCurve curve;
  curve.beta = beta;
  curve.region = region;
  curve.samples.resize(t_grid.size());
  ProjectionOracleConfig inner = cfg;
  inner.quad.jobs = 1;
  const int jobs = cfg.quad.jobs > 0 ? cfg.quad.jobs : default_jobs();
  parallel_for(t_grid.size(), jobs, [&](std::size_t k) {
    const IntegralEstimate e = capacity_sublevel(h, f, beta, region, o, t_grid[k], inner);
    curve.samples[k] = GSample{t_grid[k], e.value, e.abs_error};
  });
  return curve;
}

SlackReport lower_bound_check(const GCurve& curve) {
  if (curve.samples.empty() || curve.samples.front().t != 0.0)
    throw std::invalid_argument("lower_bound_check needs a curve sampled at t = 0");
  const GSample& s0 = curve.samples.front();
  if (!std::isfinite(s0.value)) throw std::invalid_argument("lower_bound_check needs G(0) finite");
  SlackReport rep;
  rep.min_slack_away_from_zero = kInf;
  for (const auto& s : curve.samples) {
    SlackRow row;
    row.t = s.t;
    const double factor = s.t > 0.0 ? -std::expm1(-g_beta(curve.beta, s.t)) : 1.0;
    row.slack = s.value - s0.value * factor;
    row.allowance = s.abs_error + s0.abs_error * factor + 1e-13 * s0.value;
    if (row.slack < -row.allowance) rep.passed = false;
    if (s.t >= 0.05) rep.min_slack_away_from_zero = std::min(rep.min_slack_away_from_zero, row.slack);
    rep.rows.push_back(row);
  }
  return rep;
}

double differential_inequality_check(const GCurve& curve, double G) {
  const auto& s = curve.samples;
  if (s.size() < 2) throw std::invalid_argument("differential_inequality_check needs at least two samples");
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (!(G > s[k].value)) throw std::invalid_argument("differential_inequality_check needs G > every G(t)");
    if (k > 0 && s[k].value > s[k - 1].value + s[k].abs_error + s[k - 1].abs_error)
      throw std::invalid_argument("differential_inequality_check needs a nonincreasing curve");
  }
  const std::size_t N = s.size();
  std::vector<double> q(N);
  for (std::size_t k = 0; k + 1 < N; ++k) {
    const double dq = -(s[k + 1].value - s[k].value) / (s[k + 1].t - s[k].t);
    q[k] = dq / (G - s[k].value);
  }
  q[N - 1] = -(s[N - 1].value - s[N - 2].value) / (s[N - 1].t - s[N - 2].t) / (G - s[N - 1].value);
  double lhs = 0.0, worst = 0.0;
  for (std::size_t k = N; k-- > 0;) {
    if (k + 1 < N) lhs += 0.5 * (q[k] + q[k + 1]) * (s[k + 1].t - s[k].t);
    const double rhs = std::log(G / (G - s[k].value));
    worst = std::max(worst, lhs - rhs);
  }
  return worst;
}

EffectivenessReport effectiveness_verdict(const SingularMetric& h, const Section& f, const Point& o,
                                          const Polydisc& region, double beta, const EffectivenessOptions& opt) {
  if (!(beta >= 0.0)) throw std::invalid_argument("effectiveness_verdict needs beta >= 0");
  EffectivenessReport rep;
  rep.beta = beta;
  QuadOptions q = opt.oracle.quad;
  q.singular_points.push_back(o);
  const IntegralEstimate energy = integrate([&](const Point& z) { return section_norm2(h, f, z); }, region, q);
  if (energy.infinite() || energy.status == QuadStatus::DivergenceSuspected)
    throw std::invalid_argument("int_D |F|^2_h is infinite; the effectiveness criterion does not apply");
  rep.energy = energy.value;
  rep.exponent = singularity_exponent(h, f, o, opt.exponent);
  rep.capacity_plus = capacity_C(h, f, rep.exponent.hi + opt.resolution, region, o, opt.oracle).value;
  rep.ratio = rep.capacity_plus > 0.0 ? rep.energy / rep.capacity_plus : kInf;
  rep.theta_beta = beta > 0.0 ? theta(beta, opt.theta_tol).value : kInf;
  rep.predicted_member = rep.theta_beta > rep.ratio;
  rep.observed_member = membership(h, f, o, beta, opt.exponent.membership).member;
  return rep;
}

std::optional<double> strong_openness_search(const SingularMetric& h, const Section& f, const Point& o,
                                             std::vector<double> beta_grid, const MembershipOptions& opt) {
  if (!membership(h, f, o, 0.0, opt).member) throw std::invalid_argument("F is not in E(h)_o");
  std::sort(beta_grid.begin(), beta_grid.end());
  for (double beta : beta_grid) {
    if (beta < 0.0) continue;
    if (membership(h, f, o, beta, opt).integrability.verdict == Integrability::Converges) return beta;
  }
  return std::nullopt;
}

}  // namespace mslab
