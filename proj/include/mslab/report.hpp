#ifndef MSLAB_REPORT_HPP
#define MSLAB_REPORT_HPP

#include <string>
#include <vector>

#include "mslab/openness.hpp"
#include "mslab/stability.hpp"

namespace mslab {

/// Shortest round-trip decimal ("%.17g"); inf, -inf and nan spelled out.
std::string format_number(double x);

/// Minimal CSV builder: header row, ',' separator, '\n' line ends, no quoting.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  CsvTable& row(const std::vector<std::string>& cells);
  std::string str() const;

 private:
  std::size_t width_;
  std::string text_;
};

/// t,G,abs_error[,slack,allowance]
std::string to_csv(const GCurve& curve, const SlackReport* slack = nullptr);
/// beta,theta,energy,capacity_plus,ratio,predicted_member,observed_member
std::string to_csv(const std::vector<EffectivenessReport>& reports);
/// j,gap,error
std::string to_csv(const StabilityReport& report);

}  // namespace mslab

#endif  // MSLAB_REPORT_HPP
