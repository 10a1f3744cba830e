// vucalc: VU-decompositions, U-gradients, and structure-track probes for
// composite nonsmooth functions given as problem-spec JSON files.
//
// Exit codes: 0 success, 2 invalid input, 3 hypothesis violation (with a
// witness block), 4 numerical failure, 5 verification mismatch (with a
// comparisons block).

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "vucalc/driver.hpp"

namespace {

using vucalc::Report;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const vucalc::NewtonDiverged*>(&e) ||
        dynamic_cast<const vucalc::SingularNewtonJacobian*>(&e) ||
        dynamic_cast<const vucalc::SingularVtV*>(&e) ||
        dynamic_cast<const vucalc::InsufficientSamples*>(&e))
        return 4;
    if (dynamic_cast<const vucalc::TransversalityViolated*>(&e) ||
        dynamic_cast<const vucalc::SumRuleConditionViolated*>(&e) ||
        dynamic_cast<const vucalc::AffineDependence*>(&e) ||
        dynamic_cast<const vucalc::PdgInconsistent*>(&e) ||
        dynamic_cast<const vucalc::RankDeficientVBar*>(&e) ||
        dynamic_cast<const vucalc::MissingHorizonInfo*>(&e))
        return 3;
    return 2;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw vucalc::ValidationError("cannot open spec file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<double> parse_scales(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            size_t used = 0;
            const double v = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw vucalc::ValidationError("--scales: cannot parse '" + item + "' as a number");
        }
    }
    if (out.empty()) throw vucalc::ValidationError("--scales: empty list");
    return out;
}

// "auto", or semicolon-separated vectors of comma-separated U-coordinates:
// "1,0;0,1".
std::vector<vucalc::Vector> parse_directions(const std::string& text) {
    std::vector<vucalc::Vector> out;
    std::stringstream ss(text);
    std::string vec;
    while (std::getline(ss, vec, ';')) {
        const std::vector<double> entries = parse_scales(vec);
        vucalc::Vector d(static_cast<vucalc::Index>(entries.size()));
        for (size_t i = 0; i < entries.size(); ++i) d(static_cast<vucalc::Index>(i)) = entries[i];
        out.push_back(std::move(d));
    }
    if (out.empty()) throw vucalc::ValidationError("--directions: empty list");
    return out;
}

void apply_rank_tol_env(vucalc::SpecOptions& opt) {
    const char* env = std::getenv("VUCALC_RANK_TOL");
    if (!env || !*env) return;
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end == env || *end != '\0' || !(v >= 0.0) || !std::isfinite(v))
        throw vucalc::ValidationError(
            "VUCALC_RANK_TOL: expected a finite number >= 0 (0 restores the automatic rule)");
    opt.rank_tol = v;
}

int emit(const Report& rep, const std::string& json_path) {
    if (!json_path.empty()) {
        std::ofstream out(json_path, std::ios::binary);
        if (!out) {
            std::cerr << "error: cannot write " << json_path << "\n";
            return 2;
        }
        out << vucalc::report_to_json(rep).dump(2) << "\n";
    }
    std::cout << vucalc::report_to_text(rep);
    return rep.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"VU-decompositions, U-gradients, and structure-track probes for "
                 "composite nonsmooth functions"};
    app.require_subcommand(1);

    std::string spec_path, json_path;
    bool force = false;

    std::string scales_arg, directions_arg = "auto";
    unsigned seed = 0;
    int samples = 0;
    double radius = 0.0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("spec", spec_path, "problem spec (JSON)")->required();
        cmd->add_option("--json", json_path, "also write the report as JSON to this file");
        cmd->add_flag("--force", force, "proceed despite violated hypotheses (unverified)");
    };

    CLI::App* dec = app.add_subcommand("decompose", "U/V bases and U-gradient at xbar");
    add_common(dec);

    CLI::App* ft = app.add_subcommand("fast-track", "probe the structure track around xbar");
    add_common(ft);
    ft->add_option("--scales", scales_arg, "comma-separated positive step sizes");
    ft->add_option("--directions", directions_arg,
                   "'auto' (U-coordinate axes) or 'u11,u12,...;u21,u22,...'");

    CLI::App* ver = app.add_subcommand("verify",
                                       "cross-check the decomposition against slow oracles");
    add_common(ver);
    CLI::Option* seed_opt = ver->add_option("--seed", seed, "sampling seed");
    CLI::Option* samples_opt = ver->add_option("--samples", samples, "number of sample points");
    CLI::Option* radius_opt = ver->add_option("--radius", radius, "sampling ball radius");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // app.exit prints the message (or help text); fold CLI11's dozen usage
        // codes into the documented exit 2, keeping --help/--version at 0.
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        vucalc::ProblemSpec spec = vucalc::parse_spec(read_file(spec_path), spec_path);
        if (force) spec.options.force = true;
        apply_rank_tol_env(spec.options);

        Report rep;
        if (dec->parsed()) {
            rep = vucalc::run_decompose(spec, spec_path);
        } else if (ft->parsed()) {
            if (!scales_arg.empty()) spec.options.scales = parse_scales(scales_arg);
            if (directions_arg != "auto")
                spec.options.directions = parse_directions(directions_arg);
            rep = vucalc::run_fast_track(spec, spec_path);
        } else {
            if (*seed_opt) spec.options.seed = seed;
            if (*samples_opt) spec.options.samples = samples;
            if (*radius_opt) spec.options.radius = radius;
            rep = vucalc::run_verify(spec, spec_path);
        }
        return emit(rep, json_path);
    } catch (const vucalc::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
