#ifndef MSLAB_SCENARIO_HPP
#define MSLAB_SCENARIO_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mslab {

inline constexpr const char* kVersion = "0.3.0";

/// Malformed scenario or expression (exit code 2).
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable input or unwritable output (exit code 3).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunFlags {
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  bool no_cache = false;
  std::string cache_dir;  // empty: $MSLAB_CACHE_DIR, else <out>/.cache
  int jobs = 0;
};

struct ExperimentOutcome {
  std::string name;
  std::string type;
  bool passed = false;
  bool cached = false;
  std::string message;  // failure reason, empty on success
  std::vector<std::string> files;
};

struct RunSummary {
  std::string scenario;
  std::vector<ExperimentOutcome> experiments;
  int exit_code = 0;
};

/// Loads the scenario, runs every experiment and writes <name>.csv,
/// <name>.json per experiment plus manifest.json into out_dir. Throws
/// ScenarioError or IoError; verdict failures are reported via exit_code 1.
RunSummary run_scenario(const std::filesystem::path& scenario, const std::filesystem::path& out_dir,
                        const RunFlags& flags, std::ostream& log);

/// The same from an in-memory JSON document; `origin` labels messages.
RunSummary run_scenario_text(const std::string& json_text, const std::string& origin,
                             const std::filesystem::path& out_dir, const RunFlags& flags, std::ostream& log);

// ---------------------------------------------------------------------------
// Content-addressed cache of serialized results.

/// FNV-1a 64-bit hash rendered as 16 hex digits.
std::string content_hash(const std::string& data);

class ResultCache {
 public:
  /// An empty directory disables caching.
  ResultCache(std::filesystem::path dir, std::ostream& log);

  bool enabled() const { return !dir_.empty(); }
  /// Returns the stored payload for key or recomputes, stores and returns it.
  /// Corrupt entries are recomputed and overwritten with a warning.
  std::string get_or_compute(const std::string& key, const std::function<std::string()>& compute, bool* hit = nullptr);

 private:
  std::filesystem::path dir_;
  std::ostream& log_;
};

}  // namespace mslab

#endif  // MSLAB_SCENARIO_HPP
