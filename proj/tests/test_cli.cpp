// End-to-end checks of the vucalc binary: exit codes, report text, and JSON
// output. Paths arrive through the environment (VUCALC_BIN, VUCALC_SPECS,
// VUCALC_TMP); see tests/CMakeLists.txt.

#include <catch_amalgamated.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <string>

#include "oracle_helpers.hpp"

using Catch::Matchers::ContainsSubstring;
using nlohmann::json;

namespace {

std::string env_path(const char* name) {
    const char* v = std::getenv(name);
    REQUIRE(v != nullptr);
    return v;
}

std::string spec_file(const std::string& name) {
    return env_path("VUCALC_SPECS") + "/" + name;
}

std::string tmp_file(const std::string& name) { return env_path("VUCALC_TMP") + "/" + name; }

oracle::CommandResult vucalc(const std::string& args) {
    return oracle::run_command(env_path("VUCALC_BIN") + " " + args);
}

json json_report(const std::string& path) {
    return json::parse(oracle::read_text_file(path));
}

} // namespace

TEST_CASE("decompose: |x| at the origin has no smooth directions") {
    const auto r = vucalc("decompose " + spec_file("abs_value.json"));
    CAPTURE(r.output);
    CHECK(r.exit_code == 0);
    CHECK_THAT(r.output, ContainsSubstring("status: ok (exit 0)"));
    CHECK_THAT(r.output, ContainsSubstring("dim U: 0   dim V: 1"));
    CHECK_THAT(r.output, ContainsSubstring("[ok  ] transversality"));
    CHECK_THAT(r.output, ContainsSubstring("[ok  ] nondegeneracy"));
    // The full doubled structure is degenerate by construction; that is
    // reported, but only as information, and does not affect the exit code.
    CHECK_THAT(r.output, ContainsSubstring("[FAIL] strong_transversality (informational)"));
}

TEST_CASE("decompose: LASSO JSON report carries the U-gradient and generator model") {
    const std::string out_path = tmp_file("lasso_decompose.json");
    const auto r = vucalc("decompose " + spec_file("lasso.json") + " --json " + out_path);
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);

    const json j = json_report(out_path);
    CHECK(j["command"] == "decompose");
    CHECK(j["status"] == "ok");
    CHECK(j["exit_code"] == 0);
    CHECK(j["kind"] == "sum");
    CHECK(j["m"] == 2);
    CHECK(j["n"] == 3);
    CHECK(j["xbar"][0] == 0.5);
    CHECK(j["xbar"][1] == 0.0);
    CHECK(j["options"]["seed"] == 42);

    const json& d = j["decomposition"];
    CHECK(d["dim_u"] == 1);
    CHECK(d["dim_v"] == 1);
    CHECK(d["ambient_dim"] == 2);
    CHECK(d["generator_count"] == 2);
    CHECK(d["transversality_verified"] == true);

    REQUIRE(d["u_basis"].size() == 1);
    CHECK(std::abs(std::abs(d["u_basis"][0][0].get<double>()) - 1.0) < 1e-12);
    CHECK(std::abs(d["u_basis"][0][1].get<double>()) < 1e-12);

    // gbar = grad q + tau * sign pattern on the support: (-0.5, 0) + (0.1, 0).
    CHECK(std::abs(d["gbar"][0].get<double>() - (-0.4)) < 1e-12);
    CHECK(std::abs(d["gbar"][1].get<double>()) < 1e-12);
    CHECK(std::abs(d["u_gradient"][0].get<double>() - (-0.4)) < 1e-12);
    CHECK(std::abs(d["u_gradient"][1].get<double>()) < 1e-12);
    REQUIRE(d["u_lagrangian_gradient"].size() == 1);
}

TEST_CASE("decompose: a folded kink reports the violated hypothesis with a witness") {
    const auto r = vucalc("decompose " + spec_file("cusp.json"));
    CAPTURE(r.output);
    CHECK(r.exit_code == 3);
    CHECK_THAT(r.output, ContainsSubstring("status: hypothesis-violation (exit 3)"));
    CHECK_THAT(r.output, ContainsSubstring("failure: transversality"));
    CHECK_THAT(r.output, ContainsSubstring("[FAIL] transversality"));
    CHECK_THAT(r.output, ContainsSubstring("witness (inner-value coordinates): (1, 0)"));
    CHECK_THAT(r.output, !ContainsSubstring("dim U:")); // no decomposition block

    // The JSON mirror of the violation report: hypotheses only.
    const std::string out_path = tmp_file("cusp_decompose.json");
    const auto rj = vucalc("decompose " + spec_file("cusp.json") + " --json " + out_path);
    CHECK(rj.exit_code == 3);
    const json j = json_report(out_path);
    CHECK(j["status"] == "hypothesis-violation");
    CHECK(j["failure"] == "transversality");
    CHECK(!j.contains("decomposition"));
    REQUIRE(j["hypotheses"].size() >= 1);
    CHECK(j["hypotheses"][0]["name"] == "transversality");
    CHECK(j["hypotheses"][0]["holds"] == false);
    REQUIRE(j["hypotheses"][0].contains("witness"));
    CHECK(std::abs(j["hypotheses"][0]["witness"][0].get<double>() - 1.0) < 1e-9);
    CHECK(std::abs(j["hypotheses"][0]["witness"][1].get<double>()) < 1e-9);
}

TEST_CASE("decompose: --force proceeds past a violated hypothesis, unverified") {
    const auto r = vucalc("decompose " + spec_file("cusp.json") + " --force");
    CAPTURE(r.output);
    CHECK(r.exit_code == 0);
    CHECK_THAT(r.output,
               ContainsSubstring("--force: proceeding despite violated transversality"));
    CHECK_THAT(r.output, ContainsSubstring("dim U: 2   dim V: 0"));
    CHECK_THAT(r.output, ContainsSubstring("transversality verified: no"));
}

TEST_CASE("decompose: overlapping summands violate the sum condition") {
    const auto r = vucalc("decompose " + spec_file("sum_overlap.json"));
    CAPTURE(r.output);
    CHECK(r.exit_code == 3);
    CHECK_THAT(r.output, ContainsSubstring("failure: sum_condition"));
    CHECK_THAT(r.output, ContainsSubstring("[FAIL] sum_condition"));
    CHECK_THAT(r.output, ContainsSubstring("stacked pulled-back normals have rank 1 of 2"));
}

TEST_CASE("fast-track: a smooth objective has no V space to track") {
    const auto r = vucalc("fast-track " + spec_file("smooth.json"));
    CAPTURE(r.output);
    CHECK(r.exit_code == 2);
    CHECK_THAT(r.output, ContainsSubstring(
                             "error: fast-track requires dim V >= 1 (structure is smooth here)"));
}

TEST_CASE("fast-track: parabola probe shows quadratic decay in one Newton step") {
    const std::string out_path = tmp_file("parabola_probe.json");
    const auto r =
        vucalc("fast-track " + spec_file("parabola_max.json") + " --json " + out_path);
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    CHECK_THAT(r.output, ContainsSubstring("track probe"));
    CHECK_THAT(r.output, ContainsSubstring("probe directions: U-coordinate axes (auto)"));
    CHECK_THAT(r.output,
               ContainsSubstring("direction            scale      ||v||      ||v||/t^2"));

    const json j = json_report(out_path);
    CHECK(j["decomposition"]["dim_u"] == 1);
    CHECK(j["decomposition"]["dim_v"] == 1);
    CHECK(j["decomposition"]["ambient_dim"] == 2);

    const json& rows = j["probe"]["rows"];
    REQUIRE(rows.size() == 3); // one U direction, three default scales
    for (const json& row : rows) {
        CHECK(row["ratio_v_over_t2"].get<double>() == 0.25);
        CHECK(row["newton_iters"].get<int>() == 1); // the tie equation is linear in v
        CHECK(row["residual_norm"].get<double>() <= 1e-12);
        CHECK(row["offstructure_residual"].get<double>() <= 1e-12);
    }
    CHECK(j["probe"]["grad_v_zero_norm"].get<double>() <= 1e-12);
}

TEST_CASE("fast-track: explicit scales and directions replace the defaults") {
    const std::string out_path = tmp_file("parabola_probe_custom.json");
    const auto r = vucalc("fast-track " + spec_file("parabola_max.json") +
                          " --scales 0.5 --directions 1 --json " + out_path);
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    CHECK_THAT(r.output, !ContainsSubstring("probe directions: U-coordinate axes (auto)"));

    const json j = json_report(out_path);
    const json& rows = j["probe"]["rows"];
    REQUIRE(rows.size() == 1);
    CHECK(rows[0]["scale"].get<double>() == 0.5);
    CHECK(rows[0]["v_norm"].get<double>() == 0.0625); // |v| = t^2 / 4
    CHECK(rows[0]["ratio_v_over_t2"].get<double>() == 0.25);

    const auto bad = vucalc("fast-track " + spec_file("parabola_max.json") +
                            " --directions 1,0");
    CHECK(bad.exit_code == 2);
    CHECK_THAT(bad.output, ContainsSubstring("options.directions: expected length 1 (dim U)"));
}

TEST_CASE("fast-track: the doubled track of an l1-regularized quadratic stays put") {
    const std::string out_path = tmp_file("l1_quadratic_track.json");
    const auto r =
        vucalc("fast-track " + spec_file("l1_quadratic.json") + " --json " + out_path);
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    CHECK_THAT(r.output,
               ContainsSubstring("track variables are doubled: (r, x) with r tied to x"));

    const json j = json_report(out_path);
    CHECK(j["decomposition"]["dim_v"] == 2);       // one per zero coordinate
    CHECK(j["decomposition"]["dim_u"] == 4);
    CHECK(j["decomposition"]["ambient_dim"] == 6); // (r, x) over m = 3

    const json& rows = j["probe"]["rows"];
    REQUIRE(rows.size() == 12); // four U axes, three default scales
    for (const json& row : rows) {
        CHECK(row["v_norm"].get<double>() <= 1e-12);
        CHECK(row["newton_iters"].get<int>() == 0); // the warm start already solves it
    }
}

TEST_CASE("verify: LASSO passes all three oracle comparisons") {
    const auto r = vucalc("verify " + spec_file("lasso.json"));
    CAPTURE(r.output);
    CHECK(r.exit_code == 0);
    CHECK_THAT(r.output, ContainsSubstring("status: ok (exit 0)"));
    CHECK_THAT(r.output, ContainsSubstring("[ok  ] u_space_vs_generator_model"));
    CHECK_THAT(r.output, ContainsSubstring("[ok  ] u_gradient_vs_finite_difference"));
    CHECK_THAT(r.output, ContainsSubstring("[ok  ] sampled_subdifferential_hausdorff"));
}

TEST_CASE("verify: a wrong supplied subgradient is caught by finite differences") {
    const auto r = vucalc("verify " + spec_file("lasso_bad_gbar.json"));
    CAPTURE(r.output);
    CHECK(r.exit_code == 5);
    CHECK_THAT(r.output, ContainsSubstring("status: verification-mismatch (exit 5)"));
    CHECK_THAT(r.output, ContainsSubstring("failure: u_gradient_vs_finite_difference"));
    CHECK_THAT(r.output, ContainsSubstring("[FAIL] u_gradient_vs_finite_difference"));
    CHECK_THAT(r.output, ContainsSubstring("[ok  ] u_space_vs_generator_model"));
    CHECK_THAT(r.output, ContainsSubstring("gbar_override in effect"));

    const std::string out_path = tmp_file("bad_gbar_verify.json");
    const auto rj = vucalc("verify " + spec_file("lasso_bad_gbar.json") + " --json " + out_path);
    CHECK(rj.exit_code == 5);
    const json j = json_report(out_path);
    CHECK(j["failure"] == "u_gradient_vs_finite_difference");
    REQUIRE(j["comparisons"].size() == 3);
    CHECK(j["comparisons"][1]["pass"] == false);
    // The override is 0.1 away from the true subgradient along U.
    CHECK(std::abs(j["comparisons"][1]["gap"].get<double>() - 0.1) < 1e-6);
    CHECK(!j.contains("decomposition"));
}

TEST_CASE("verify: dense kinks around the base point abort sampling") {
    const auto r = vucalc("verify " + spec_file("kink_dense.json"));
    CAPTURE(r.output);
    CHECK(r.exit_code == 4);
    CHECK_THAT(r.output, ContainsSubstring("error: sample_subdifferential"));
    CHECK_THAT(r.output, ContainsSubstring("samples hit kinks"));
}

TEST_CASE("verify: identical seeds produce byte-identical JSON reports") {
    const std::string p1 = tmp_file("verify_seed_a.json");
    const std::string p2 = tmp_file("verify_seed_b.json");
    const auto r1 = vucalc("verify " + spec_file("lasso.json") + " --seed 42 --json " + p1);
    const auto r2 = vucalc("verify " + spec_file("lasso.json") + " --seed 42 --json " + p2);
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);
    CHECK(r1.output == r2.output);
    CHECK(oracle::read_text_file(p1) == oracle::read_text_file(p2));
}

TEST_CASE("invalid inputs exit with code 2 and a pointed message") {
    const auto missing = vucalc("decompose " + tmp_file("does_not_exist.json"));
    CHECK(missing.exit_code == 2);
    CHECK_THAT(missing.output, ContainsSubstring("error: cannot open spec file"));

    const std::string bad_path = tmp_file("malformed.json");
    oracle::write_text_file(bad_path, "{\n  \"m\": 1,\n  \"phi\": [\n}\n");
    const auto bad = vucalc("decompose " + bad_path);
    CHECK(bad.exit_code == 2);
    CHECK_THAT(bad.output, ContainsSubstring("error: " + bad_path + ":"));

    const auto scales = vucalc("fast-track " + spec_file("parabola_max.json") +
                               " --scales 0.1,oops");
    CHECK(scales.exit_code == 2);
    CHECK_THAT(scales.output, ContainsSubstring("--scales: cannot parse 'oops'"));

    // Usage errors fold into the same code instead of leaking CLI11's own set.
    CHECK(vucalc("").exit_code == 2);
    CHECK(vucalc("decompose").exit_code == 2);
    CHECK(vucalc("decompose " + spec_file("lasso.json") + " --bogus").exit_code == 2);
    CHECK(vucalc("--help").exit_code == 0);
}

TEST_CASE("the rank tolerance env var overrides every rank decision") {
    // An absurdly coarse cutoff filters out every structure normal, so the
    // kink disappears: V collapses and all of R^2 counts as smooth.
    const auto coarse = oracle::run_command("VUCALC_RANK_TOL=10 " + env_path("VUCALC_BIN") +
                                            " decompose " + spec_file("lasso.json"));
    CAPTURE(coarse.output);
    CHECK(coarse.exit_code == 0);
    CHECK_THAT(coarse.output, ContainsSubstring("dim U: 2   dim V: 0"));

    // Zero restores the automatic rule and with it the true split.
    const auto zero = oracle::run_command("VUCALC_RANK_TOL=0 " + env_path("VUCALC_BIN") +
                                          " decompose " + spec_file("lasso.json"));
    CHECK(zero.exit_code == 0);
    CHECK_THAT(zero.output, ContainsSubstring("dim U: 1   dim V: 1"));

    const auto junk = oracle::run_command("VUCALC_RANK_TOL=nope " + env_path("VUCALC_BIN") +
                                          " decompose " + spec_file("lasso.json"));
    CHECK(junk.exit_code == 2);
    CHECK_THAT(junk.output, ContainsSubstring("VUCALC_RANK_TOL"));
}
