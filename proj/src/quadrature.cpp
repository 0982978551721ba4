#include "mslab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <limits>
#include <numbers>
#include <queue>
#include <random>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mslab/parallel.hpp"

namespace mslab {

std::string to_string(QuadStatus s) {
  switch (s) {
    case QuadStatus::Converged:
      return "Converged";
    case QuadStatus::MaxCellsReached:
      return "MaxCellsReached";
    case QuadStatus::DivergenceSuspected:
      return "DivergenceSuspected";
  }
  return "?";
}

std::string to_string(Integrability v) {
  switch (v) {
    case Integrability::Converges:
      return "Converges";
    case Integrability::Diverges:
      return "Diverges";
    case Integrability::Indeterminate:
      return "Indeterminate";
  }
  return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Neumaier compensated sum.
struct Accumulator {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

// Genz-Malik degree 7 rule with embedded degree 5 rule.
struct GenzMalik {
  explicit GenzMalik(std::size_t d) : dim(d) {
    const double n = static_cast<double>(d);
    w1 = (12824.0 - 9120.0 * n + 400.0 * n * n) / 19683.0;
    w2 = 980.0 / 6561.0;
    w3 = (1820.0 - 400.0 * n) / 19683.0;
    w4 = 200.0 / 19683.0;
    w5 = 6859.0 / 19683.0 / std::ldexp(1.0, static_cast<int>(d));
    e1 = (729.0 - 950.0 * n + 50.0 * n * n) / 729.0;
    e2 = 245.0 / 486.0;
    e3 = (265.0 - 100.0 * n) / 1458.0;
    e4 = 25.0 / 729.0;
  }
  std::size_t dim;
  double w1, w2, w3, w4, w5, e1, e2, e3, e4;
  static constexpr double l2 = 0.35856858280031809;  // sqrt(9/70)
  static constexpr double l4 = 0.94868329805051379;  // sqrt(9/10)
  static constexpr double l5 = 0.68824720161168529;  // sqrt(9/19)
};

struct CellResult {
  std::vector<double> val;
  std::vector<double> err;
  std::vector<double> amb;
  int split = 0;
  bool finite = true;
};

class CellEvaluator {
 public:
  CellEvaluator(const BoxIntegrand& f, std::size_t m, std::size_t d, const BoxMask& mask, const Eigen::VectorXd& width0)
      : f_(f), mask_(mask), m_(m), d_(d), rule_(d), width0_(width0) {}

  CellResult operator()(const double* c, const double* h) const {
    const std::size_t m = m_, d = d_;
    std::vector<double> u(c, c + d), out(m), raw(m);
    std::vector<double> f0(m), s2(m, 0.0), s3(m, 0.0), s4(m, 0.0), s5(m, 0.0);
    std::vector<double> a0(m), a2(m, 0.0), a3(m, 0.0), a4(m, 0.0), a5(m, 0.0);
    std::vector<double> diff(d, 0.0);
    bool any_in = false, any_out = false, last_in = true;
    bool finite = true;
    // Axes along which the mask indicator was seen to change.
    std::vector<char> mask_axis(d, 0);

    auto eval = [&](double* acc, double* absacc) {
      f_(u.data(), raw.data());
      bool in = true;
      if (mask_) in = mask_(u.data());
      (in ? any_in : any_out) = true;
      last_in = in;
      for (std::size_t k = 0; k < m; ++k) {
        const double v = in ? raw[k] : 0.0;
        if (!std::isfinite(v)) finite = false;
        out[k] = v;
        acc[k] += v;
        absacc[k] += std::isfinite(raw[k]) ? std::abs(raw[k]) : kInf;
      }
    };

    std::fill(f0.begin(), f0.end(), 0.0);
    std::fill(a0.begin(), a0.end(), 0.0);
    eval(f0.data(), a0.data());
    const bool center_in = last_in;

    std::vector<double> p2(m), p4(m), pa(m);
    for (std::size_t i = 0; i < d; ++i) {
      std::fill(p2.begin(), p2.end(), 0.0);
      std::fill(p4.begin(), p4.end(), 0.0);
      std::fill(pa.begin(), pa.end(), 0.0);
      int seen_in = center_in ? 1 : 0;
      u[i] = c[i] - GenzMalik::l2 * h[i];
      eval(p2.data(), pa.data());
      seen_in += last_in;
      u[i] = c[i] + GenzMalik::l2 * h[i];
      eval(p2.data(), pa.data());
      seen_in += last_in;
      for (std::size_t k = 0; k < m; ++k) a2[k] += pa[k];
      std::fill(pa.begin(), pa.end(), 0.0);
      u[i] = c[i] - GenzMalik::l4 * h[i];
      eval(p4.data(), pa.data());
      seen_in += last_in;
      u[i] = c[i] + GenzMalik::l4 * h[i];
      eval(p4.data(), pa.data());
      seen_in += last_in;
      if (seen_in != 0 && seen_in != 5) mask_axis[i] = 1;
      for (std::size_t k = 0; k < m; ++k) a3[k] += pa[k];
      u[i] = c[i];
      for (std::size_t k = 0; k < m; ++k) {
        s2[k] += p2[k];
        s3[k] += p4[k];
        diff[i] += std::abs((p2[k] - 2.0 * f0[k]) - (p4[k] - 2.0 * f0[k]) / 7.0);
      }
    }
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j)
        for (int si = -1; si <= 1; si += 2)
          for (int sj = -1; sj <= 1; sj += 2) {
            u[i] = c[i] + si * GenzMalik::l4 * h[i];
            u[j] = c[j] + sj * GenzMalik::l4 * h[j];
            eval(s4.data(), a4.data());
            u[i] = c[i];
            u[j] = c[j];
          }
    const std::size_t corners = std::size_t{1} << d;
    for (std::size_t b = 0; b < corners; ++b) {
      for (std::size_t i = 0; i < d; ++i) u[i] = c[i] + ((b >> i) & 1 ? 1.0 : -1.0) * GenzMalik::l5 * h[i];
      eval(s5.data(), a5.data());
    }

    // Rule nodes stay away from the cell faces, so a mask boundary in a thin
    // sliver along a face would go unnoticed. Probe corners and face centres.
    if (mask_ && any_in != any_out) {
      for (std::size_t b = 0; b < corners && any_in != any_out; ++b) {
        for (std::size_t i = 0; i < d; ++i) u[i] = c[i] + ((b >> i) & 1 ? 1.0 : -1.0) * h[i];
        (mask_(u.data()) ? any_in : any_out) = true;
      }
      for (std::size_t i = 0; i < d; ++i) u[i] = c[i];
    }
    if (mask_ && any_in && any_out) {
      for (std::size_t i = 0; i < d; ++i) {
        for (int s = -1; s <= 1; s += 2) {
          u[i] = c[i] + s * h[i];
          if (mask_(u.data()) != center_in) mask_axis[i] = 1;
        }
        u[i] = c[i];
      }
    }

    double vol = 1.0;
    for (std::size_t i = 0; i < d; ++i) vol *= 2.0 * h[i];

    CellResult r;
    r.val.resize(m);
    r.err.resize(m);
    r.amb.assign(m, 0.0);
    r.finite = finite;
    const GenzMalik& g = rule_;
    for (std::size_t k = 0; k < m; ++k) {
      if (!finite) {
        r.val[k] = kInf;
        r.err[k] = kInf;
        continue;
      }
      const double i7 = vol * (g.w1 * f0[k] + g.w2 * s2[k] + g.w3 * s3[k] + g.w4 * s4[k] + g.w5 * s5[k]);
      const double i5 = vol * (g.e1 * f0[k] + g.e2 * s2[k] + g.e3 * s3[k] + g.e4 * s4[k]);
      r.val[k] = i7;
      r.err[k] = std::abs(i7 - i5);
      if (any_in && any_out) {
        const double mass = vol * (std::abs(g.w1) * a0[k] + g.w2 * a2[k] + std::abs(g.w3) * a3[k] + g.w4 * a4[k] +
                                   g.w5 * a5[k]);
        r.amb[k] = mass;
      }
    }

    // Split along the coordinate with the largest fourth difference; near-ties
    // go to the relatively widest side.
    double best = -1.0;
    for (std::size_t i = 0; i < d; ++i) best = std::max(best, diff[i]);
    double best_width = -1.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double rel_width = h[i] / width0_[static_cast<Eigen::Index>(i)];
      const bool near_best = !(diff[i] < best * (1.0 - 1e-3)) || !std::isfinite(best);
      if (near_best && rel_width > best_width) {
        best_width = rel_width;
        r.split = static_cast<int>(i);
      }
    }
    bool mask_split = false;
    if (any_in && any_out) {
      best_width = -1.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double rel_width = h[i] / width0_[static_cast<Eigen::Index>(i)];
        if (mask_axis[i] && rel_width > best_width) {
          best_width = rel_width;
          r.split = static_cast<int>(i);
          mask_split = true;
        }
      }
    }
    if (!mask_split && (!finite || best <= 0.0)) {
      // No usable difference information: widest relative side.
      best_width = -1.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double rel_width = h[i] / width0_[static_cast<Eigen::Index>(i)];
        if (rel_width > best_width) {
          best_width = rel_width;
          r.split = static_cast<int>(i);
        }
      }
    }
    return r;
  }

 private:
  const BoxIntegrand& f_;
  const BoxMask& mask_;
  std::size_t m_, d_;
  GenzMalik rule_;
  Eigen::VectorXd width0_;
};

}  // namespace

CubatureResult cubature(const BoxIntegrand& f, std::size_t m, const Box& box, const CubatureOptions& opt,
                        const BoxMask& mask) {
  const std::size_t d = static_cast<std::size_t>(box.lo.size());
  if (d < 2) throw std::invalid_argument("cubature needs dimension >= 2");
  if (m == 0) throw std::invalid_argument("cubature needs at least one component");
  const Eigen::VectorXd width0 = (box.hi - box.lo) * 0.5;
  CellEvaluator evaluator(f, m, d, mask, width0);
  const int max_depth = 64 * static_cast<int>(d);

  // Flat storage; index doubles as the deterministic cell id.
  std::vector<double> centers, halfs, vals, errs, ambs;
  std::vector<int> depth, split;
  std::vector<char> alive, finite;

  auto push = [&](const double* c, const double* h, int dep, const CellResult& r) {
    centers.insert(centers.end(), c, c + d);
    halfs.insert(halfs.end(), h, h + d);
    vals.insert(vals.end(), r.val.begin(), r.val.end());
    errs.insert(errs.end(), r.err.begin(), r.err.end());
    ambs.insert(ambs.end(), r.amb.begin(), r.amb.end());
    depth.push_back(dep);
    split.push_back(r.split);
    alive.push_back(1);
    finite.push_back(r.finite ? 1 : 0);
    return depth.size() - 1;
  };

  auto priority = [&](std::size_t id) {
    double p = 0.0;
    for (std::size_t k = 0; k < m; ++k) p += errs[id * m + k] + 10.0 * ambs[id * m + k];
    return std::isnan(p) ? kInf : p;
  };

  using Entry = std::pair<double, std::size_t>;
  auto cmp = [](const Entry& a, const Entry& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second > b.second;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> heap(cmp);

  std::vector<long double> tot_val(m, 0.0L), tot_err(m, 0.0L), tot_amb(m, 0.0L);
  long nonfinite = 0;
  bool stuck_nonfinite = false;

  auto account = [&](std::size_t id, int sign) {
    if (!finite[id]) {
      nonfinite += sign;
      return;
    }
    for (std::size_t k = 0; k < m; ++k) {
      tot_val[k] += sign * static_cast<long double>(vals[id * m + k]);
      tot_err[k] += sign * static_cast<long double>(errs[id * m + k]);
      tot_amb[k] += sign * static_cast<long double>(ambs[id * m + k]);
    }
  };

  {
    const Eigen::VectorXd c0 = (box.lo + box.hi) * 0.5;
    const std::size_t id = push(c0.data(), width0.data(), 0, evaluator(c0.data(), width0.data()));
    account(id, +1);
    heap.emplace(priority(id), id);
  }

  auto converged = [&] {
    if (nonfinite > 0) return false;
    // Relative accuracy is norm-wise: components that vanish by symmetry are
    // measured against the largest one.
    double scale = 0.0;
    for (std::size_t k = 0; k < m; ++k) scale = std::max(scale, std::abs(static_cast<double>(tot_val[k])));
    const double allowed = std::max(opt.tol, opt.rel_tol * scale);
    for (std::size_t k = 0; k < m; ++k) {
      if (static_cast<double>(tot_err[k] + tot_amb[k]) > allowed) return false;
      if (static_cast<double>(10.0L * tot_amb[k]) > allowed) return false;
    }
    return true;
  };

  QuadStatus status = QuadStatus::Converged;
  long cells = 1;
  while (!converged()) {
    if (heap.empty()) {
      status = nonfinite > 0 || stuck_nonfinite ? QuadStatus::DivergenceSuspected : QuadStatus::MaxCellsReached;
      break;
    }
    const std::size_t alive_cells = heap.size();
    const std::size_t batch = std::clamp<std::size_t>(alive_cells / 16, 1, 1024);
    if (cells + 2 * static_cast<long>(batch) > opt.max_cells) {
      status = nonfinite > 0 ? QuadStatus::DivergenceSuspected : QuadStatus::MaxCellsReached;
      break;
    }
    std::vector<std::size_t> parents;
    while (parents.size() < batch && !heap.empty()) {
      const std::size_t id = heap.top().second;
      heap.pop();
      if (depth[id] >= max_depth) {
        if (!finite[id]) stuck_nonfinite = true;
        continue;  // left alive but no longer refined
      }
      parents.push_back(id);
    }
    if (parents.empty()) continue;

    const std::size_t nchild = 2 * parents.size();
    std::vector<std::vector<double>> cc(nchild, std::vector<double>(d)), hh(nchild, std::vector<double>(d));
    for (std::size_t p = 0; p < parents.size(); ++p) {
      const std::size_t id = parents[p];
      const int s = split[id];
      for (int side = 0; side < 2; ++side) {
        auto& c = cc[2 * p + side];
        auto& h = hh[2 * p + side];
        std::copy_n(&centers[id * d], d, c.begin());
        std::copy_n(&halfs[id * d], d, h.begin());
        h[s] *= 0.5;
        c[s] += (side == 0 ? -1.0 : 1.0) * h[s];
      }
    }
    std::vector<CellResult> results(nchild);
    parallel_for(nchild, opt.jobs, [&](std::size_t i) { results[i] = evaluator(cc[i].data(), hh[i].data()); });

    for (std::size_t p = 0; p < parents.size(); ++p) {
      const std::size_t id = parents[p];
      account(id, -1);
      alive[id] = 0;
      for (int side = 0; side < 2; ++side) {
        const std::size_t i = 2 * p + side;
        const std::size_t child = push(cc[i].data(), hh[i].data(), depth[id] + 1, results[i]);
        account(child, +1);
        heap.emplace(priority(child), child);
      }
    }
    cells += static_cast<long>(nchild);
  }

  CubatureResult out;
  out.value.assign(m, 0.0);
  out.error.assign(m, 0.0);
  out.cells = cells;
  bool any_nonfinite = false;
  for (std::size_t k = 0; k < m; ++k) {
    Accumulator v, e;
    for (std::size_t id = 0; id < alive.size(); ++id) {
      if (!alive[id]) continue;
      if (!finite[id]) {
        any_nonfinite = true;
        continue;
      }
      v.add(vals[id * m + k]);
      e.add(errs[id * m + k] + ambs[id * m + k]);
    }
    out.value[k] = v.value();
    out.error[k] = e.value();
  }
  if (any_nonfinite) {
    for (std::size_t k = 0; k < m; ++k) {
      out.value[k] = kInf;
      out.error[k] = kInf;
    }
    status = QuadStatus::DivergenceSuspected;
  }
  out.status = status;
  return out;
}

// ---------------------------------------------------------------------------
// Coordinate maps.

namespace {

// u = (r_1, t_1, ..., r_n, t_n) -> z_k = c_k + r_k e^{i t_k}.
struct PolarMap {
  Point c;
  std::size_t n;
  double operator()(const double* u, Point& z) const {
    double jac = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double r = u[2 * k];
      z[static_cast<Eigen::Index>(k)] = c[static_cast<Eigen::Index>(k)] + std::polar(r, u[2 * k + 1]);
      jac *= r;
    }
    return jac;
  }
  Box box(const Eigen::VectorXd& radii) const {
    Box b{Eigen::VectorXd::Zero(2 * n), Eigen::VectorXd::Zero(2 * n)};
    for (std::size_t k = 0; k < n; ++k) {
      b.hi[2 * k] = radii[k];
      b.hi[2 * k + 1] = kTwoPi;
    }
    return b;
  }
};

// u = (r, eta_1..eta_{n-1}, xi_1..xi_n): moduli r * (unit vector in the
// positive orthant of S^{n-1}), phases xi.
struct SphereMap {
  Point c;
  std::size_t n;
  double operator()(const double* u, Point& z) const {
    const double r = u[0];
    double jac = std::pow(r, 2.0 * static_cast<double>(n) - 1.0);
    double sin_prod = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      double rho_hat = sin_prod;
      if (k + 1 < n) {
        const double eta = u[1 + k];
        rho_hat *= std::cos(eta);
        jac *= std::pow(std::sin(eta), static_cast<double>(n - 2 - k));
        sin_prod *= std::sin(eta);
      }
      jac *= rho_hat;
      z[static_cast<Eigen::Index>(k)] = c[static_cast<Eigen::Index>(k)] + std::polar(r * rho_hat, u[n + k]);
    }
    return jac;
  }
  Box box(double r_in, double r_out) const {
    Box b{Eigen::VectorXd::Zero(2 * n), Eigen::VectorXd::Zero(2 * n)};
    b.lo[0] = r_in;
    b.hi[0] = r_out;
    for (std::size_t k = 1; k < n; ++k) b.hi[k] = std::numbers::pi / 2.0;
    for (std::size_t k = 0; k < n; ++k) b.hi[n + k] = kTwoPi;
    return b;
  }
};

double value_to_double(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Finite:
      return v.real();
    case Value::Kind::PosInf:
      return kInf;
    case Value::Kind::NegInf:
      return -kInf;
    case Value::Kind::Undefined:
      break;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// Smooth cutoff: 1 on s <= 1/2, 0 on s >= 1.
double bump(double s) {
  if (s <= 0.5) return 1.0;
  if (s >= 1.0) return 0.0;
  const double x = 2.0 * s - 1.0;
  const double a = std::exp(-1.0 / x);
  const double b = std::exp(-1.0 / (1.0 - x));
  return b / (a + b);
}

template <typename Map>
BoxIntegrand wrap(const VectorField& f, std::size_t m, Map map, std::function<double(const Point&)> weight = {}) {
  return [f, m, map, weight](const double* u, double* out) {
    Point z(static_cast<Eigen::Index>(map.n));
    const double jac = map(u, z);
    double w = jac;
    if (w != 0.0 && weight) w *= weight(z);
    if (w == 0.0) {
      std::fill(out, out + m, 0.0);
      return;
    }
    f(z, out);
    for (std::size_t k = 0; k < m; ++k) out[k] *= w;
  };
}

template <typename Map>
BoxMask wrap_mask(const ScalarField& phi, double t, Map map) {
  if (!phi) return {};
  return [phi, t, map](const double* u) {
    Point z(static_cast<Eigen::Index>(map.n));
    map(u, z);
    const Value v = phi(z);
    if (v.kind() == Value::Kind::NegInf) return true;
    if (!v.finite()) return false;
    return v.real() < -t;
  };
}

std::vector<IntegralEstimate> to_estimates(const CubatureResult& r) {
  std::vector<IntegralEstimate> out(r.value.size());
  for (std::size_t k = 0; k < r.value.size(); ++k) {
    out[k].value = r.value[k];
    out[k].abs_error = r.error[k];
    out[k].cells_used = r.cells;
    out[k].status = r.status;
  }
  return out;
}

void merge_into(std::vector<IntegralEstimate>& acc, const std::vector<IntegralEstimate>& part) {
  for (std::size_t k = 0; k < acc.size(); ++k) {
    acc[k].value += part[k].value;
    acc[k].abs_error += part[k].abs_error;
    acc[k].cells_used += part[k].cells_used;
    if (part[k].status == QuadStatus::DivergenceSuspected || acc[k].status == QuadStatus::DivergenceSuspected)
      acc[k].status = QuadStatus::DivergenceSuspected;
    else if (part[k].status != QuadStatus::Converged)
      acc[k].status = part[k].status;
  }
}

// Sums dyadic shell contributions L_j, j = 0, 1, ..., with a geometric tail
// once the ratios L_j / L_{j-1} settle.
std::vector<IntegralEstimate> shell_series(const std::function<CubatureResult(int, double, double, long)>& level,
                                           std::size_t m, const QuadOptions& opt) {
  constexpr int kMaxLevels = 64;
  constexpr int kMinLevels = 8;
  constexpr int kZeroLevels = 48;
  constexpr int kDivergenceLevels = 20;
  constexpr double kRatioCap = 0.98;

  std::vector<std::vector<double>> contrib(m);
  std::vector<Accumulator> sum(m), err(m);
  std::vector<char> done(m, 0), diverged(m, 0);
  std::vector<double> tail(m, 0.0), tail_err(m, 0.0);
  long cells = 0;
  QuadStatus status = QuadStatus::Converged;

  for (int j = 0; j < kMaxLevels; ++j) {
    const double tol_j = 0.5 * opt.tol / ((j + 2.0) * (j + 2.0));
    const long budget = std::max<long>(opt.max_cells - cells, 64);
    CubatureResult r = level(j, tol_j, 0.5 * opt.rel_tol, budget);
    cells += r.cells;
    if (r.status == QuadStatus::MaxCellsReached) status = QuadStatus::MaxCellsReached;
    for (std::size_t k = 0; k < m; ++k) {
      if (done[k] || diverged[k]) continue;
      if (!std::isfinite(r.value[k])) {
        diverged[k] = 1;
        continue;
      }
      contrib[k].push_back(r.value[k]);
      sum[k].add(r.value[k]);
      err[k].add(r.error[k]);
    }

    double scale = 0.0;
    for (std::size_t k = 0; k < m; ++k) scale = std::max(scale, std::abs(sum[k].value()));
    for (std::size_t k = 0; k < m; ++k) {
      if (done[k] || diverged[k]) continue;
      const auto& L = contrib[k];
      const int n = static_cast<int>(L.size());
      if (n < 3) continue;
      const double l0 = L[n - 1], l1 = L[n - 2], l2 = L[n - 3];
      if (l0 == 0.0 && l1 == 0.0 && l2 == 0.0) {
        if (j + 1 >= kZeroLevels) done[k] = 1;
        continue;
      }
      const double allowed = std::max(opt.tol, opt.rel_tol * scale);
      if (l1 == 0.0 || l2 == 0.0) continue;
      const double q0 = l0 / l1, q1 = l1 / l2;
      if (q0 < 0.0 || q1 < 0.0) {
        // Sign changes: no extrapolation, stop once contributions are negligible.
        if (j + 1 >= kMinLevels && std::abs(l0) + std::abs(l1) <= 1e-3 * allowed) done[k] = 1;
        continue;
      }
      if (j + 1 >= kDivergenceLevels && q0 >= kRatioCap && q1 >= kRatioCap && l0 > 0.0) {
        diverged[k] = 1;
        continue;
      }
      if (j + 1 < kMinLevels || q0 >= kRatioCap) continue;
      double dq = std::abs(q0 - q1);
      if (n >= 4 && L[n - 4] != 0.0) dq = std::max(dq, std::abs(q1 - l2 / L[n - 4]));
      const double t = l0 * q0 / (1.0 - q0);
      const double te = std::abs(t) * (dq / (1.0 - q0) + 1e-9) + r.error[k] * q0 / (1.0 - q0);
      if (te <= 0.25 * allowed) {
        tail[k] = t;
        tail_err[k] = te;
        done[k] = 1;
      }
    }
    bool all = true;
    for (std::size_t k = 0; k < m; ++k) all = all && (done[k] || diverged[k]);
    if (all) break;
    if (cells >= opt.max_cells) {
      status = QuadStatus::MaxCellsReached;
      break;
    }
  }

  std::vector<IntegralEstimate> out(m);
  for (std::size_t k = 0; k < m; ++k) {
    out[k].cells_used = cells;
    if (diverged[k]) {
      out[k].value = kInf;
      out[k].abs_error = kInf;
      out[k].status = QuadStatus::DivergenceSuspected;
      continue;
    }
    out[k].value = sum[k].value() + tail[k];
    out[k].abs_error = err[k].value() + tail_err[k];
    out[k].status = done[k] ? status : QuadStatus::MaxCellsReached;
  }
  return out;
}

bool has_singular_center(const Polydisc& region, const QuadOptions& opt) {
  for (const auto& p : opt.singular_points) {
    if (p.size() != region.center().size()) continue;
    if ((p - region.center()).norm() <= 1e-12 * (1.0 + region.min_radius())) return true;
  }
  return false;
}

CubatureOptions cub_options(const QuadOptions& opt, double tol, double rel_tol, long max_cells) {
  CubatureOptions c;
  c.tol = tol;
  c.rel_tol = rel_tol;
  c.max_cells = max_cells;
  c.jobs = opt.jobs;
  return c;
}

}  // namespace

std::vector<IntegralEstimate> integrate_vector(const VectorField& f, std::size_t m, const Polydisc& region,
                                               const QuadOptions& opt, const ScalarField& phi, double t) {
  const std::size_t n = region.dim();
  const PolarMap polar{region.center(), n};
  if (!has_singular_center(region, opt)) {
    const CubatureResult r = cubature(wrap(f, m, polar), m, polar.box(region.radii()),
                                      cub_options(opt, opt.tol, opt.rel_tol, opt.max_cells), wrap_mask(phi, t, polar));
    return to_estimates(r);
  }

  const SphereMap sphere{region.center(), n};
  if (n == 1) {
    const double radius = region.radii()[0];
    auto level = [&](int j, double tol, double rel, long budget) {
      const double r_out = std::ldexp(radius, -j), r_in = std::ldexp(radius, -j - 1);
      return cubature(wrap(f, m, polar), m, Box{Eigen::Vector2d(r_in, 0.0), Eigen::Vector2d(r_out, kTwoPi)},
                      cub_options(opt, tol, rel, budget), wrap_mask(phi, t, polar));
    };
    return shell_series(level, m, opt);
  }

  // Smooth partition of unity around the singular center.
  const double rho = region.min_radius();
  const Point c = region.center();
  auto chi = [c, rho](const Point& z) { return bump((z - c).norm() / rho); };
  auto one_minus_chi = [c, rho](const Point& z) { return 1.0 - bump((z - c).norm() / rho); };
  QuadOptions half = opt;
  half.tol = 0.5 * opt.tol;
  const CubatureResult outer =
      cubature(wrap(f, m, polar, one_minus_chi), m, polar.box(region.radii()),
               cub_options(opt, half.tol, opt.rel_tol, opt.max_cells / 2), wrap_mask(phi, t, polar));
  half.max_cells = opt.max_cells / 2;
  auto level = [&](int j, double tol, double rel, long budget) {
    const double r_out = std::ldexp(rho, -j), r_in = std::ldexp(rho, -j - 1);
    return cubature(wrap(f, m, sphere, chi), m, sphere.box(r_in, r_out), cub_options(opt, tol, rel, budget),
                    wrap_mask(phi, t, sphere));
  };
  std::vector<IntegralEstimate> out = shell_series(level, m, half);
  merge_into(out, to_estimates(outer));
  for (auto& e : out)
    if (e.status == QuadStatus::DivergenceSuspected) e.value = kInf;
  return out;
}

namespace {

VectorField scalar_to_vector(const ScalarField& f) {
  return [f](const Point& z, double* out) { out[0] = value_to_double(f(z)); };
}

}  // namespace

IntegralEstimate integrate(const ScalarField& f, const Polydisc& region, const QuadOptions& opt) {
  return integrate_vector(scalar_to_vector(f), 1, region, opt).front();
}

IntegralEstimate integrate_sublevel(const ScalarField& f, const ScalarField& phi, double t, const Polydisc& region,
                                    const QuadOptions& opt) {
  if (!phi) throw std::invalid_argument("integrate_sublevel needs a function phi");
  return integrate_vector(scalar_to_vector(f), 1, region, opt, phi, t).front();
}

std::vector<IntegralEstimate> integrate_shell_vector(const VectorField& f, std::size_t m, const Point& center,
                                                     double r_in, double r_out, const QuadOptions& opt) {
  if (!(r_in >= 0.0 && r_out > r_in)) throw std::invalid_argument("shell radii must satisfy 0 <= r_in < r_out");
  const SphereMap sphere{center, static_cast<std::size_t>(center.size())};
  const CubatureResult r = cubature(wrap(f, m, sphere), m, sphere.box(r_in, r_out),
                                    cub_options(opt, opt.tol, opt.rel_tol, opt.max_cells));
  return to_estimates(r);
}

IntegralEstimate integrate_shell(const ScalarField& f, const Point& center, double r_in, double r_out,
                                 const QuadOptions& opt) {
  return integrate_shell_vector(scalar_to_vector(f), 1, center, r_in, r_out, opt).front();
}

// ---------------------------------------------------------------------------

namespace {

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  return den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
}

}  // namespace

IntegrabilityVerdict integrability_at(const ScalarField& f, const Point& center, double rho0, int levels,
                                      const IntegrabilityOptions& opt) {
  if (levels < 8) throw std::invalid_argument("integrability_at needs at least 8 levels");
  if (!(rho0 > 0.0)) throw std::invalid_argument("integrability_at needs rho0 > 0");
  IntegrabilityVerdict v;
  QuadOptions q;
  q.tol = 0.0;
  q.rel_tol = opt.rel_tol;
  q.max_cells = opt.max_cells_per_level;
  q.jobs = opt.jobs;
  Accumulator running;
  bool infinite = false;
  for (int j = 0; j < levels; ++j) {
    AnnulusRow row;
    row.level = j;
    row.outer_radius = std::ldexp(rho0, -j);
    row.inner_radius = std::ldexp(rho0, -j - 1);
    const IntegralEstimate e = integrate_shell(f, center, row.inner_radius, row.outer_radius, q);
    row.integral = e.value;
    row.error = e.abs_error;
    if (!std::isfinite(e.value)) infinite = true;
    running.add(e.value);
    row.running_sum = running.value();
    v.annuli.push_back(row);
    // Deeper levels only overflow once divergence is this clear.
    const double first = v.annuli.front().integral;
    if (infinite || (j + 1 >= 8 && first > 0.0 && running.value() > opt.growth_factor * first)) break;
  }
  levels = static_cast<int>(v.annuli.size());
  auto slope_over = [&](int from) {
    std::vector<double> x, y;
    for (int j = from; j < levels; ++j) {
      const double i = v.annuli[j].integral;
      x.push_back(j);
      y.push_back(std::log2(std::isfinite(i) ? std::max(std::abs(i), 1e-300) : 1e300));
    }
    return ls_slope(x, y);
  };
  v.decay_slope = slope_over(0);
  v.tail_slope = slope_over(levels / 2);
  const double i0 = v.annuli.front().integral;
  const bool grown = i0 > 0.0 && running.value() > opt.growth_factor * i0;
  if (infinite || v.decay_slope > opt.slope_margin || grown)
    v.verdict = Integrability::Diverges;
  else if (v.decay_slope < -opt.slope_margin)
    v.verdict = Integrability::Converges;
  else
    v.verdict = Integrability::Indeterminate;
  return v;
}

// ---------------------------------------------------------------------------

IntegralEstimate integrate_1d(const std::function<double(double)>& f, double a, double b, double tol) {
  IntegralEstimate e;
  double err = 0.0, l1 = 0.0;
  e.value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, tol, &err, &l1);
  e.abs_error = err;
  e.cells_used = 1;
  e.status = err <= std::max(tol * l1, 1e-300) || err <= tol ? QuadStatus::Converged : QuadStatus::MaxCellsReached;
  return e;
}

double fubini_tail_residual(const ScalarField& f, const ScalarField& phi, const Polydisc& region,
                            const QuadOptions& opt) {
  std::mt19937_64 rng(0x5eedULL);
  std::map<double, int> seen;
  for (int i = 0; i < 2000; ++i) {
    const Point z = region.sample(rng);
    const Value v = phi(z);
    if (v.is_undefined() || (v.finite() && v.real() >= 0.0) || v.kind() == Value::Kind::PosInf)
      throw std::invalid_argument("fubini_tail_residual needs phi < 0 on the region");
    if (v.finite()) ++seen[-v.real()];
  }
  // Repeated sample values are atoms of phi; S(t) jumps there.
  std::vector<double> breaks;
  for (const auto& [t, count] : seen)
    if (count > 1) breaks.push_back(t);

  QuadOptions o = opt;
  o.tol = 0.1 * opt.tol;
  const ScalarField weighted = [&](const Point& z) { return f(z) * exp(-phi(z)); };
  const IntegralEstimate lhs = integrate(weighted, region, o);
  const IntegralEstimate base = integrate(f, region, o);
  if (lhs.infinite() || base.infinite() || lhs.status == QuadStatus::DivergenceSuspected)
    throw std::invalid_argument("fubini_tail_residual: a side of the identity diverges");

  // t-integral of S(t) e^t over unit panels; each S(t) is resolved to an
  // absolute accuracy scaled by e^{-t}.
  auto integrand = [&](double t) {
    QuadOptions s = opt;
    s.tol = 1e-3 * opt.tol * std::exp(-t);
    s.rel_tol = 1e-12;
    const IntegralEstimate e = integrate_sublevel(f, phi, t, region, s);
    if (!std::isfinite(e.value)) throw std::invalid_argument("fubini_tail_residual: sublevel integral diverges");
    return e.value * std::exp(t);
  };
  // Panel tolerance is relative in boost; aim at an absolute 1e-3 tol per panel.
  auto panel = [&](double a, double b) {
    const double size = std::abs(integrand(a)) + std::abs(integrand(b));
    const double rel = std::clamp(1e-3 * opt.tol / std::max(size, 1e-300), 1e-11, 1e-2);
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, a, b, 6, rel, &err);
  };
  const double cutoff = opt.tol * std::exp(-5.0);
  Accumulator tail;
  for (int k = 0; k < 200; ++k) {
    double a = k;
    double value = 0.0;
    for (double t : breaks)
      if (t > a && t < k + 1.0) {
        value += panel(a, t);
        a = t;
      }
    value += panel(a, k + 1.0);
    tail.add(value);
    if (integrand(k + 1.0) < cutoff && std::abs(value) < cutoff) break;
  }
  return std::abs(lhs.value - (base.value + tail.value()));
}

}  // namespace mslab
