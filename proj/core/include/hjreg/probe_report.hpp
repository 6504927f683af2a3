#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace hjreg {

/// Empirical constants gathered by a sampling probe, with the evidence that
/// backs them. Every inequality check goes through `record`, which keeps the
/// worst slack and the violation list consistent: no violations exactly when
/// the worst slack is non-negative.
struct ProbeReport {
    std::string probe;
    std::map<std::string, double> constants;
    /// Named (abscissa, value) tables, e.g. the kappa_T table over R/(t-s).
    std::map<std::string, std::vector<std::array<double, 2>>> tables;
    std::size_t samples = 0;
    std::vector<std::string> violations;

    explicit ProbeReport(std::string name = {}) : probe(std::move(name)) {}

    void record(double slack, std::string_view what);
    [[nodiscard]] bool ok() const { return violations.empty(); }
    [[nodiscard]] bool has_checks() const { return checks_ > 0; }
    [[nodiscard]] double worst_slack() const { return worst_slack_; }
    [[nodiscard]] double constant(const std::string& key) const;

    [[nodiscard]] nlohmann::json to_json() const;

private:
    double worst_slack_ = 0.0;
    std::size_t checks_ = 0;
};

}  // namespace hjreg
