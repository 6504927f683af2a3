#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hjreg/error.hpp"

namespace hjreg::experiments {

enum class Kind { kFundamental, kOperators, kDiscounted, kRegularize, kSingularity, kPropcheck, kLambdaSweep };

/// Subcommand names: fundamental, operators, discounted, regularize,
/// singularity, propcheck, lambda-sweep.
Kind parse_kind(const std::string& name);
std::string to_string(Kind kind);
const std::vector<Kind>& all_kinds();

/// Complete configuration tree with every accepted key at its default.
nlohmann::json default_config(Kind kind);

/// Recursively merges `overrides` into `config`. Keys absent from `config`
/// raise ConfigError, except below "lagrangian.params" whose keys the
/// catalog validates.
void merge_config(nlohmann::json& config, const nlohmann::json& overrides);

/// Applies "dotted.path=value"; the value is parsed as JSON when possible and
/// taken as a string otherwise.
void apply_assignment(nlohmann::json& config, const std::string& assignment);

/// Range checks (positive tolerances, sorted grids, sizes). Throws ConfigError.
void validate(Kind kind, const nlohmann::json& config);

/// 0 success, 2 configuration, 3 solver non-convergence, 4 failed check or
/// any other module error.
int exit_code_for(ErrorKind kind);

struct RunResult {
    int exit_code = 0;
    std::string error_class;
    std::string message;
    std::map<std::string, bool> checks;
    std::vector<std::string> artifacts;
    double wall_seconds = 0.0;
};

/// Writes manifest.json and timing.json for a finished or failed run.
void write_manifest(Kind kind, const nlohmann::json& config, const RunResult& result,
                    const std::filesystem::path& out_dir);

/// Runs one experiment and writes its artifacts, manifest.json (config echo,
/// versions, status, checks; no timing) and timing.json into `out_dir`.
/// The manifest is written even when the run fails.
RunResult run(Kind kind, const nlohmann::json& config, const std::filesystem::path& out_dir);

}  // namespace hjreg::experiments
