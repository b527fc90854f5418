#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace collapse {

// Flat configuration: "[section]" headers plus "key = value" lines flatten
// to "section.key" -> raw string. '#' and ';' open comments; keys must be
// unique. Chosen flat so configs diff line-by-line.
using ConfigMap = std::map<std::string, std::string>;

// Throws std::runtime_error with a line number on malformed input.
ConfigMap parse_ini(const std::string& text);
ConfigMap load_config_file(const std::string& path);

struct Violation {
    std::string name;     // stable machine-readable id, e.g. "pde-stability"
    std::string message;
};

struct ExperimentInfo {
    std::string name;
    std::string summary;
};

std::vector<ExperimentInfo> list_experiments();

// Checks every declared precondition (stability bounds, resolution guards,
// simplex sums, unknown keys) without running anything.
std::vector<Violation> validate_config(const ConfigMap& config);

// CLI flags; each one replaces the matching run.* key before the run.
struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> trajectories;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> workers;
};

struct InvariantResult {
    std::string name;
    double measured = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::string detail;   // states the comparison sense when it is not <=
};

struct RunReport {
    std::string experiment;
    std::string out_dir;
    std::vector<Violation> violations;  // non-empty: nothing ran, nothing written
    bool ran = false;
    bool overall_pass = false;
    std::vector<InvariantResult> invariants;
    std::vector<std::string> outputs;   // files written (moments/outcomes/summary/manifest)
    std::string summary_json;           // contents of summary.json
};

// Validate, run, then write moments.csv, outcomes.csv, summary.json and
// manifest.json into the output directory (default out/<experiment>).
// Output bytes depend only on the effective config, not on worker count.
// Runtime failures throw after removing any partially written outputs.
RunReport run_experiment(const ConfigMap& config, const RunOverrides& overrides = {});

}  // namespace collapse
