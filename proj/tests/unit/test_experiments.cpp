#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "hjreg/error.hpp"
#include "hjreg/experiments.hpp"

namespace hjreg {
namespace {

using nlohmann::json;
namespace ex = experiments;
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "hjreg_unit" / name;
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::kInvalidArgument;
}

TEST(Experiments, KindNamesRoundTrip) {
    for (ex::Kind k : ex::all_kinds()) EXPECT_EQ(ex::parse_kind(ex::to_string(k)), k);
    EXPECT_EQ(ex::all_kinds().size(), 7u);
    EXPECT_EQ(ex::parse_kind("lambda-sweep"), ex::Kind::kLambdaSweep);
    EXPECT_EQ(kind_of([] { (void)ex::parse_kind("plot"); }), ErrorKind::kConfigError);
}

TEST(Experiments, DefaultsValidate) {
    for (ex::Kind k : ex::all_kinds()) EXPECT_NO_THROW(ex::validate(k, ex::default_config(k))) << ex::to_string(k);
}

TEST(Experiments, MergeRejectsUnknownKeys) {
    json c = ex::default_config(ex::Kind::kOperators);
    ex::merge_config(c, json{{"taus", {0.3}}, {"tol", {{"oracle", 1e-3}}}});
    EXPECT_EQ(c["taus"], json({0.3}));
    EXPECT_DOUBLE_EQ(c["tol"]["oracle"].get<double>(), 1e-3);
    EXPECT_EQ(kind_of([&] { ex::merge_config(c, json{{"tau", 0.3}}); }), ErrorKind::kConfigError);
    EXPECT_EQ(kind_of([&] { ex::merge_config(c, json{{"tol", {{"oracel", 1.0}}}}); }), ErrorKind::kConfigError);
}

TEST(Experiments, MergeLeavesLagrangianParamsToCatalog) {
    json c = ex::default_config(ex::Kind::kDiscounted);
    EXPECT_NO_THROW(ex::merge_config(c, json{{"lagrangian", {{"params", {{"amplitude", 2.0}}}}}}));
    EXPECT_DOUBLE_EQ(c["lagrangian"]["params"]["amplitude"].get<double>(), 2.0);
}

TEST(Experiments, DottedAssignments) {
    json c = ex::default_config(ex::Kind::kRegularize);
    ex::apply_assignment(c, "lambda=0.25");
    EXPECT_DOUBLE_EQ(c["lambda"].get<double>(), 0.25);
    ex::apply_assignment(c, "lagrangian.params.potential=cos");
    EXPECT_EQ(c["lagrangian"]["params"]["potential"], "cos");
    ex::apply_assignment(c, "t_grid.count=4");
    EXPECT_EQ(c["t_grid"]["count"], 4);
    EXPECT_EQ(kind_of([&] { ex::apply_assignment(c, "no_equals_sign"); }), ErrorKind::kConfigError);
    EXPECT_EQ(kind_of([&] { ex::apply_assignment(c, "bogus.key=1"); }), ErrorKind::kConfigError);
}

TEST(Experiments, ValidateRejectsBadRanges) {
    json c = ex::default_config(ex::Kind::kFundamental);
    c["tol"]["oracle"] = -1.0;
    EXPECT_EQ(kind_of([&] { ex::validate(ex::Kind::kFundamental, c); }), ErrorKind::kConfigError);
    c = ex::default_config(ex::Kind::kOperators);
    c["taus"] = json::array();
    EXPECT_EQ(kind_of([&] { ex::validate(ex::Kind::kOperators, c); }), ErrorKind::kConfigError);
}

TEST(Experiments, ExitCodes) {
    EXPECT_EQ(ex::exit_code_for(ErrorKind::kConfigError), 2);
    EXPECT_EQ(ex::exit_code_for(ErrorKind::kInvalidArgument), 2);
    EXPECT_EQ(ex::exit_code_for(ErrorKind::kNoConvergence), 3);
    EXPECT_EQ(ex::exit_code_for(ErrorKind::kNonConvergence), 3);
    EXPECT_EQ(ex::exit_code_for(ErrorKind::kNonContraction), 3);
    EXPECT_EQ(ex::exit_code_for(ErrorKind::kNotSingular), 4);
}

TEST(Experiments, FundamentalRunWritesManifest) {
    const fs::path dir = scratch("fundamental");
    json c = ex::default_config(ex::Kind::kFundamental);
    c["samples"] = 10;
    const auto result = ex::run(ex::Kind::kFundamental, c, dir);
    EXPECT_EQ(result.exit_code, 0) << result.message;
    ASSERT_TRUE(result.checks.count("oracle"));
    EXPECT_TRUE(result.checks.at("oracle"));
    const json manifest = json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(manifest["experiment"], "fundamental");
    EXPECT_EQ(manifest["status"], "ok");
    EXPECT_TRUE(manifest["error"].is_null());
    EXPECT_EQ(manifest["config"], c);
    EXPECT_FALSE(manifest.contains("wall_seconds"));
    EXPECT_TRUE(fs::exists(dir / "timing.json"));
    for (const auto& a : manifest["artifacts"]) EXPECT_TRUE(fs::exists(dir / a.get<std::string>())) << a;
}

TEST(Experiments, FailedRunStillWritesManifest) {
    const fs::path dir = scratch("failed");
    json c = ex::default_config(ex::Kind::kOperators);
    c["grid"]["counts"] = {21};
    c["taus"] = {2.0};
    const auto result = ex::run(ex::Kind::kOperators, c, dir);
    EXPECT_NE(result.exit_code, 0);
    const json manifest = json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(manifest["status"], "failed");
    EXPECT_EQ(manifest["exit_code"], result.exit_code);
    EXPECT_EQ(manifest["error"]["class"], result.error_class);
}

TEST(Experiments, SameSeedSameBytes) {
    json c = ex::default_config(ex::Kind::kPropcheck);
    c["samples"] = 8;
    const fs::path a = scratch("det_a");
    const fs::path b = scratch("det_b");
    const auto ra = ex::run(ex::Kind::kPropcheck, c, a);
    const auto rb = ex::run(ex::Kind::kPropcheck, c, b);
    EXPECT_EQ(ra.artifacts, rb.artifacts);
    EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
    for (const auto& name : ra.artifacts) EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
}

}  // namespace
}  // namespace hjreg
