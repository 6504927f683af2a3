#include "hjreg/probe_report.hpp"

#include <cmath>

#include "hjreg/error.hpp"

namespace hjreg {

namespace {
constexpr std::size_t kMaxListedViolations = 50;
}

void ProbeReport::record(double slack, std::string_view what) {
    if (std::isnan(slack)) slack = -1.0;
    worst_slack_ = checks_ == 0 ? slack : std::min(worst_slack_, slack);
    ++checks_;
    if (slack < 0.0) {
        if (violations.size() < kMaxListedViolations) {
            violations.emplace_back(what);
        } else if (violations.size() == kMaxListedViolations) {
            violations.emplace_back("... further violations truncated");
        }
    }
}

double ProbeReport::constant(const std::string& key) const {
    const auto it = constants.find(key);
    if (it == constants.end()) {
        throw Error(ErrorKind::kInvalidArgument, "probe '" + probe + "' has no constant '" + key + "'");
    }
    return it->second;
}

nlohmann::json ProbeReport::to_json() const {
    nlohmann::json j;
    j["probe"] = probe;
    j["constants"] = nlohmann::json::object();
    for (const auto& [k, v] : constants) j["constants"][k] = v;
    j["tables"] = nlohmann::json::object();
    for (const auto& [k, rows] : tables) {
        auto& arr = j["tables"][k] = nlohmann::json::array();
        for (const auto& row : rows) arr.push_back({row[0], row[1]});
    }
    j["samples"] = samples;
    j["checks"] = checks_;
    j["worst_slack"] = checks_ > 0 ? nlohmann::json(worst_slack_) : nlohmann::json(nullptr);
    j["violations"] = violations;
    return j;
}

}  // namespace hjreg
