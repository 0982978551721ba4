#ifndef MSLAB_STABILITY_HPP
#define MSLAB_STABILITY_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mslab/metric.hpp"
#include "mslab/openness.hpp"
#include "mslab/polynomial.hpp"
#include "mslab/quadrature.hpp"

namespace mslab {

/// Scale: phi_j = (1 + 1/j) phi. Offset: h_j = h e^{1/j}. Mollify: eps_j = 1/j
/// regularisation (checked, never returned).
enum class SequenceRule { Scale, Offset, Mollify };
std::string to_string(SequenceRule r);
SequenceRule parse_sequence_rule(const std::string& name);

struct MetricSequenceSpec {
  SingularMetric base;
  SequenceRule rule = SequenceRule::Scale;
  int j_first = 1;
  int j_last = 32;
  std::size_t check_samples = 64;
  std::uint64_t seed = 11;
};

/// h_j for j in [j_first, j_last]. Samples phi_j <= phi, h_j >= h and
/// h_j / det h_j <= h / det h; throws std::invalid_argument naming a witness
/// point on the first violation. Mollify sequences always throw: either a
/// witness of h_eps >= h failing, or that they have no closed form.
std::vector<SingularMetric> build_sequence(const MetricSequenceSpec& spec);

/// F_j = F + (1/j) G for j in [j_first, j_last].
std::vector<Section> linear_family(const Section& f, const Section& g, int j_first, int j_last);

enum class StabilityVerdict { Decaying, NotDecaying };
std::string to_string(StabilityVerdict v);

struct GapRow {
  int j = 0;
  double gap = 0.0;
  double error = 0.0;
};

struct StabilityReport {
  double p = 1.0;
  std::vector<GapRow> per_j;
  double c_estimate = 0.0;
  StabilityVerdict verdict = StabilityVerdict::NotDecaying;
};

struct StabilityOptions {
  int j_first = 1;     // index of seq[0]
  double target = 1e-3;
  std::optional<Point> o;  // defaults to the region centre
  ExponentOptions exponent;
  QuadOptions quad = [] {
    QuadOptions q;
    q.tol = 1e-9;
    q.rel_tol = 1e-7;
    return q;
  }();
};

/// Decaying iff the last three gaps are each <= half the first and the final
/// gap is <= target.
StabilityVerdict decay_verdict(const std::vector<GapRow>& rows, double target);

/// gap_j = int_region | |F_j|^2_{h_j} - |F|^2_h |^p. Refuses p >= 1 + c with c
/// the exponent of (base, F) at o; every F_j must lie in E(base)_o.
StabilityReport stability_lp(const SingularMetric& base, const std::vector<SingularMetric>& seq,
                             const std::vector<Section>& f_seq, const Section& f, double p, const Polydisc& region,
                             const StabilityOptions& opt = {});
StabilityReport stability_lp(const SingularMetric& base, const std::vector<SingularMetric>& seq, const Section& f,
                             double p, const Polydisc& region, const StabilityOptions& opt = {});

/// Smallest j (counting from j_first) with |F|^2_{h_j} integrable at o
/// (verdict Converges); nullopt if none. Throws if F is not in E(base)_o.
std::optional<int> union_sheaf_check(const SingularMetric& base, const std::vector<SingularMetric>& seq,
                                     const Section& f, const Point& o, int j_first = 1,
                                     const MembershipOptions& opt = {});

}  // namespace mslab

#endif  // MSLAB_STABILITY_HPP
