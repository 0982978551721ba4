#include "mslab/stability.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mslab/linalg.hpp"
#include "mslab/parallel.hpp"

namespace mslab {

namespace {

std::string format_point(const Point& z) {
  std::ostringstream os;
  os.precision(6);
  os << "(";
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (k) os << ", ";
    os << z[k].real() << (z[k].imag() < 0 ? "-" : "+") << std::abs(z[k].imag()) << "i";
  }
  os << ")";
  return os.str();
}

[[noreturn]] void witness(const std::string& what, int j, const Point& z) {
  throw std::invalid_argument(what + " fails for j = " + std::to_string(j) + " at z = " + format_point(z));
}

void check_pair(const SingularMetric& base, const SingularMetric& hj, int j, const std::vector<Point>& samples) {
  for (const auto& z : samples) {
    const Value phi = log_det(base, z), phij = log_det(hj, z);
    if (phi.finite() && phij.finite() && phij.real() > phi.real() + 1e-12 * (1.0 + std::abs(phi.real())))
      witness("phi_j <= phi", j, z);
  }
  const OrderReport rep = check_order(hj, base, samples);
  for (const auto& s : rep.samples) {
    if (!s.dominates) witness("h_j >= h", j, s.point);
    if (!s.reversal) witness("h_j / det h_j <= h / det h", j, s.point);
  }
}

void check_mollify(const MetricSequenceSpec& spec, const std::vector<Point>& samples) {
  const SingularMetric& h = spec.base;
  for (int j = spec.j_first; j <= spec.j_last; ++j) {
    const double eps = 1.0 / j;
    for (const auto& z : samples) {
      if (h.domain().boundary_distance(z) <= eps) continue;
      const PointMetric m = metric_at(h, z);
      if (!m.finite) continue;
      const PointMetric reg = regularize(h, eps, z);
      const double scale = std::max(1.0, m.values.cwiseAbs().maxCoeff());
      if (!dominates<Complex>(reg.values, m.values, 1e-9 * scale)) witness("h_eps >= h (eps = 1/j)", j, z);
    }
  }
  throw std::invalid_argument("Mollify sequences have no closed-form metric; use the Scale or Offset rule");
}

}  // namespace

std::string to_string(SequenceRule r) {
  switch (r) {
    case SequenceRule::Scale:
      return "Scale";
    case SequenceRule::Offset:
      return "Offset";
    case SequenceRule::Mollify:
      return "Mollify";
  }
  return "?";
}

SequenceRule parse_sequence_rule(const std::string& name) {
  if (name == "Scale" || name == "scale") return SequenceRule::Scale;
  if (name == "Offset" || name == "offset") return SequenceRule::Offset;
  if (name == "Mollify" || name == "mollify") return SequenceRule::Mollify;
  throw std::invalid_argument("unknown sequence rule '" + name + "' (expected Scale, Offset or Mollify)");
}

std::string to_string(StabilityVerdict v) { return v == StabilityVerdict::Decaying ? "Decaying" : "NotDecaying"; }

std::vector<SingularMetric> build_sequence(const MetricSequenceSpec& spec) {
  if (spec.j_first < 1 || spec.j_last < spec.j_first) throw std::invalid_argument("sequence needs 1 <= j_first <= j_last");
  const SingularMetric& h = spec.base;
  const std::vector<Point> samples = sample_points(h.domain(), spec.check_samples, spec.seed);
  if (spec.rule == SequenceRule::Mollify) check_mollify(spec, samples);
  const double r = static_cast<double>(h.rank());
  std::vector<SingularMetric> seq;
  for (int j = spec.j_first; j <= spec.j_last; ++j) {
    SingularMetric hj = spec.rule == SequenceRule::Scale ? h.twisted(1.0 / (r * j))
                                                         : h.twisted(0.0, Expr::constant(-1.0 / j));
    check_pair(h, hj, j, samples);
    seq.push_back(std::move(hj));
  }
  return seq;
}

std::vector<Section> linear_family(const Section& f, const Section& g, int j_first, int j_last) {
  std::vector<Section> out;
  for (int j = j_first; j <= j_last; ++j) out.push_back(axpy(f, Complex(1.0 / j, 0.0), g));
  return out;
}

StabilityVerdict decay_verdict(const std::vector<GapRow>& rows, double target) {
  if (rows.size() < 4) return StabilityVerdict::NotDecaying;
  const double first = rows.front().gap;
  for (std::size_t k = rows.size() - 3; k < rows.size(); ++k)
    if (!(rows[k].gap <= 0.5 * first)) return StabilityVerdict::NotDecaying;
  return rows.back().gap <= target ? StabilityVerdict::Decaying : StabilityVerdict::NotDecaying;
}

StabilityReport stability_lp(const SingularMetric& base, const std::vector<SingularMetric>& seq,
                             const std::vector<Section>& f_seq, const Section& f, double p, const Polydisc& region,
                             const StabilityOptions& opt) {
  if (!(p > 0.0)) throw std::invalid_argument("stability_lp needs p > 0");
  if (seq.size() != f_seq.size()) throw std::invalid_argument("metric and section sequences differ in length");
  const Point o = opt.o ? *opt.o : region.center();
  const ExponentBracket c = singularity_exponent(base, f, o, opt.exponent);
  if (c.not_member) throw std::invalid_argument("F is not in E(h)_o");
  if (!c.unbounded && p >= 1.0 + c.lo) {
    std::ostringstream os;
    os << "p = " << p << " is outside the L^p stability range p < 1 + c with c in [" << c.lo << ", " << c.hi << "]";
    throw std::invalid_argument(os.str());
  }
  for (std::size_t i = 0; i < f_seq.size(); ++i)
    if (!membership(base, f_seq[i], o, 0.0, opt.exponent.membership).member)
      throw std::invalid_argument("F_j is not in E(h)_o for j = " + std::to_string(opt.j_first + static_cast<int>(i)));

  StabilityReport rep;
  rep.p = p;
  rep.c_estimate = 0.5 * (c.lo + c.hi);
  rep.per_j.resize(seq.size());
  QuadOptions q = opt.quad;
  q.singular_points.push_back(o);
  const int jobs = q.jobs > 0 ? q.jobs : default_jobs();
  q.jobs = 1;
  parallel_for(seq.size(), jobs, [&](std::size_t i) {
    const ScalarField gap = [&](const Point& z) {
      const Value a = section_norm2(seq[i], f_seq[i], z), b = section_norm2(base, f, z);
      if (!a.finite() || !b.finite()) return Value::undefined();
      return Value(std::pow(std::abs(a.real() - b.real()), p));
    };
    const IntegralEstimate e = integrate(gap, region, q);
    rep.per_j[i] = GapRow{opt.j_first + static_cast<int>(i), e.value, e.abs_error};
  });
  rep.verdict = decay_verdict(rep.per_j, opt.target);
  return rep;
}

StabilityReport stability_lp(const SingularMetric& base, const std::vector<SingularMetric>& seq, const Section& f,
                             double p, const Polydisc& region, const StabilityOptions& opt) {
  return stability_lp(base, seq, std::vector<Section>(seq.size(), f), f, p, region, opt);
}

std::optional<int> union_sheaf_check(const SingularMetric& base, const std::vector<SingularMetric>& seq,
                                     const Section& f, const Point& o, int j_first, const MembershipOptions& opt) {
  if (!membership(base, f, o, 0.0, opt).member) throw std::invalid_argument("F is not in E(h)_o");
  for (std::size_t i = 0; i < seq.size(); ++i)
    if (membership(seq[i], f, o, 0.0, opt).integrability.verdict == Integrability::Converges)
      return j_first + static_cast<int>(i);
  return std::nullopt;
}

}  // namespace mslab
