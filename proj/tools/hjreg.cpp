#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hjreg/error.hpp"
#include "hjreg/experiments.hpp"

namespace ex = hjreg::experiments;

namespace {

struct Flags {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::vector<std::string> tolerances;
    std::vector<std::string> assignments;
    bool print_config = false;
};

/// Defaults, then the config file, then --set, --tol, --seed and --threads.
nlohmann::json resolve(ex::Kind kind, const Flags& flags) {
    nlohmann::json config = ex::default_config(kind);
    if (!flags.config_path.empty()) {
        std::ifstream in(flags.config_path);
        if (!in) throw hjreg::Error(hjreg::ErrorKind::kConfigError, "cannot read " + flags.config_path);
        const nlohmann::json file = nlohmann::json::parse(in, nullptr, false, true);
        if (file.is_discarded()) {
            throw hjreg::Error(hjreg::ErrorKind::kConfigError, flags.config_path + " is not valid JSON");
        }
        ex::merge_config(config, file);
    }
    for (const std::string& a : flags.assignments) ex::apply_assignment(config, a);
    for (const std::string& t : flags.tolerances) ex::apply_assignment(config, "tol." + t);
    if (flags.seed) config["seed"] = *flags.seed;
    if (flags.threads) config["threads"] = *flags.threads;
    return config;
}

int execute(ex::Kind kind, const Flags& flags) {
    const std::string out = flags.out_dir.empty() ? "out/" + ex::to_string(kind) : flags.out_dir;
    nlohmann::json config = ex::default_config(kind);
    try {
        config = resolve(kind, flags);
    } catch (const hjreg::Error& e) {
        ex::RunResult failed;
        failed.exit_code = ex::exit_code_for(e.kind());
        failed.error_class = std::string(hjreg::to_string(e.kind()));
        failed.message = e.what();
        ex::write_manifest(kind, config, failed, out);
        std::cerr << "hjreg: " << e.what() << '\n';
        return failed.exit_code;
    }
    if (flags.print_config) {
        std::cout << config.dump(2) << '\n';
        return 0;
    }
    const ex::RunResult result = ex::run(kind, config, out);
    for (const auto& [name, ok] : result.checks) std::cout << (ok ? "pass " : "FAIL ") << name << '\n';
    if (!result.message.empty()) std::cerr << "hjreg: " << result.error_class << ": " << result.message << '\n';
    std::cout << "wrote " << result.artifacts.size() << " artifacts to " << out << " (exit " << result.exit_code
              << ")\n";
    return result.exit_code;
}

const char* describe(ex::Kind kind) {
    switch (kind) {
        case ex::Kind::kFundamental: return "Action minimization against closed-form kernels";
        case ex::Kind::kOperators: return "Lax-Oleinik operators, Moreau oracle and kappa0 estimate";
        case ex::Kind::kDiscounted: return "Discounted HJ solver, reference grid, contraction and lift";
        case ex::Kind::kRegularize: return "Intrinsic regularization sweep and gradient limits";
        case ex::Kind::kSingularity: return "Maximizer trace from a singular point";
        case ex::Kind::kPropcheck: return "Randomized inequality probes on action and operators";
        case ex::Kind::kLambdaSweep: return "Minimal-H momenta across a decreasing discount grid";
    }
    return "";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Intrinsic Lasry-Lions regularization experiments"};
    app.require_subcommand(1);
    Flags flags;
    std::optional<ex::Kind> chosen;
    for (ex::Kind kind : ex::all_kinds()) {
        CLI::App* sub = app.add_subcommand(ex::to_string(kind), describe(kind));
        sub->add_option("--config", flags.config_path, "JSON configuration file")->check(CLI::ExistingFile);
        sub->add_option("--out", flags.out_dir, "Output directory (default out/<experiment>)");
        sub->add_option("--seed", flags.seed, "Random seed");
        sub->add_option("--threads", flags.threads, "Worker thread cap")->check(CLI::PositiveNumber);
        sub->add_option("--tol", flags.tolerances, "Tolerance override KEY=VALUE");
        sub->add_option("--set", flags.assignments, "Configuration override dotted.key=VALUE");
        sub->add_flag("--print-config", flags.print_config, "Print the resolved configuration and exit");
        sub->callback([&chosen, kind] { chosen = kind; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    return execute(*chosen, flags);
}
