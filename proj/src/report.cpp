#include "mslab/report.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mslab {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : width_(header.size()) { row(header); }

CsvTable& CsvTable::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) throw std::logic_error("CSV row width does not match the header");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].find_first_of(",\n\"") != std::string::npos) throw std::logic_error("CSV cell needs quoting");
    if (i) text_ += ',';
    text_ += cells[i];
  }
  text_ += '\n';
  return *this;
}

std::string CsvTable::str() const { return text_; }

std::string to_csv(const GCurve& curve, const SlackReport* slack) {
  std::vector<std::string> header{"t", "G", "abs_error"};
  if (slack) {
    header.push_back("slack");
    header.push_back("allowance");
  }
  CsvTable t(header);
  for (std::size_t k = 0; k < curve.samples.size(); ++k) {
    const GSample& s = curve.samples[k];
    std::vector<std::string> cells{format_number(s.t), format_number(s.value), format_number(s.abs_error)};
    if (slack) {
      cells.push_back(format_number(slack->rows.at(k).slack));
      cells.push_back(format_number(slack->rows.at(k).allowance));
    }
    t.row(cells);
  }
  return t.str();
}

std::string to_csv(const std::vector<EffectivenessReport>& reports) {
  CsvTable t({"beta", "theta", "energy", "capacity_plus", "ratio", "predicted_member", "observed_member"});
  for (const auto& r : reports)
    t.row({format_number(r.beta), format_number(r.theta_beta), format_number(r.energy), format_number(r.capacity_plus),
           format_number(r.ratio), r.predicted_member ? "1" : "0", r.observed_member ? "1" : "0"});
  return t.str();
}

std::string to_csv(const StabilityReport& report) {
  CsvTable t({"j", "gap", "error"});
  for (const auto& r : report.per_j) t.row({std::to_string(r.j), format_number(r.gap), format_number(r.error)});
  return t.str();
}

}  // namespace mslab
