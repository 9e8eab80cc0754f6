#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace mslab {

std::string version();

/// Experiment kinds understood by run_experiment.
const std::vector<std::string>& experiment_kinds();

/// Raised for malformed configs; maps to exit status 2.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised when a run cannot produce a meaningful result (divergence, an
/// empty microstate space where the experiment needs one); exit status 3.
struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string kind;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string output_path;
  std::filesystem::path base_dir = ".";  // relative file references resolve here
};

/// Reads {"kind", "params", "seed", "output_path"}; `kind` may also come from
/// the command line. Throws ValidationError.
ExperimentConfig config_from_json(const nlohmann::json& j, const std::string& kind_override = "",
                                  const std::filesystem::path& base_dir = ".");
nlohmann::json to_json(const ExperimentConfig& cfg);

/// 64-bit FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

struct Report {
  nlohmann::json json;
  std::string csv;
};

/// Parses params against the per-kind schema, then runs. Reports contain the
/// config hash, seed and version and nothing time-dependent.
Report run_experiment(const ExperimentConfig& cfg);

struct Diagnostics {
  std::vector<std::string> errors;
  std::vector<std::string> notes;
  bool ok() const { return errors.empty(); }
};

/// Schema and formula checks plus a 100-sample smoke test; never throws.
Diagnostics validate_experiment(const ExperimentConfig& cfg);

/// "4..12" (inclusive, step 1), "4..12:2", a single integer, or a JSON list.
std::vector<int> parse_n_list(const nlohmann::json& j);

/// JSON number, with infinities as "inf"/"-inf" strings and NaN as null.
nlohmann::json json_number(double x);

/// Serialized report text (2-space indented JSON with a trailing newline).
std::string render(const nlohmann::json& j);

}  // namespace mslab
