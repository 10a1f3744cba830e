#pragma once

// Problem-spec JSON: parsing with field-path validation messages, and exact
// round-trip serialization. Schema (see README):
//   { "m": 2,
//     "phi": [ {"A": [[...]], "b": [...], "c": 0.0}, ... ],
//     "h":   {"kind": "max"} | {"kind": "l1", "tau": 0.1}
//          | {"kind": "smooth", "w": [...]}                  (w optional)
//          | {"kind": "sum", "parts": [ {...kind+count...} ]},
//     "xbar": [...],
//     "options": { ... } }

#include <json.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vucalc/atoms.hpp"
#include "vucalc/dense.hpp"

namespace vucalc {

using json = nlohmann::ordered_json;

/// One slice of the outer function in a "sum" spec; count is how many
/// consecutive inner components it consumes.
struct HPart {
    std::string kind; // "max" | "l1" | "smooth"
    Index count = 0;
    double tau = 0.0;         // l1 only
    std::optional<Vector> w;  // smooth only; defaults to ones
};

struct HSpec {
    std::string kind; // "max" | "l1" | "smooth" | "sum"
    double tau = 0.0;
    std::optional<Vector> w;
    std::vector<HPart> parts;
};

struct SpecOptions {
    double active_tol = tol::active_default;
    double zero_tol = tol::zero_default;
    double rank_tol = kAutoRankTol; // 0 = auto
    double newton_tol = tol::newton_default;
    int max_iters = kNewtonMaxItersDefault;
    unsigned seed = 42;
    int samples = 2000;
    double radius = 1e-4;
    double fd_step = tol::fd_step_default;
    std::vector<double> scales{0.1, 0.01, 0.001};
    std::optional<std::vector<Vector>> directions; // U-coordinates; absent = auto
    std::vector<Index> k_f;   // optional reduced sets (0-based)
    std::vector<Index> k_phi;
    bool force = false;
    std::optional<Vector> gbar_override; // testing hook: replaces the pushed gbar
};

struct ProblemSpec {
    Index m = 0;
    std::vector<QuadraticAtom> phi;
    HSpec h;
    Vector xbar;
    SpecOptions options;
};

// Bitwise equality helpers (Eigen's == is coefficient-wise, not boolean).
inline bool exact_eq(const Vector& a, const Vector& b) {
    return a.size() == b.size() && (a.size() == 0 || (a.array() == b.array()).all());
}
inline bool exact_eq(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           (a.size() == 0 || (a.array() == b.array()).all());
}
inline bool exact_eq(const std::optional<Vector>& a, const std::optional<Vector>& b) {
    return a.has_value() == b.has_value() && (!a || exact_eq(*a, *b));
}

inline bool operator==(const HPart& a, const HPart& b) {
    return a.kind == b.kind && a.count == b.count && a.tau == b.tau && exact_eq(a.w, b.w);
}

inline bool operator==(const HSpec& a, const HSpec& b) {
    return a.kind == b.kind && a.tau == b.tau && exact_eq(a.w, b.w) && a.parts == b.parts;
}

inline bool operator==(const QuadraticAtom& a, const QuadraticAtom& b) {
    return exact_eq(a.A, b.A) && exact_eq(a.b, b.b) && a.c == b.c;
}

inline bool operator==(const SpecOptions& a, const SpecOptions& b) {
    bool dirs = a.directions.has_value() == b.directions.has_value();
    if (dirs && a.directions) {
        dirs = a.directions->size() == b.directions->size();
        for (size_t i = 0; dirs && i < a.directions->size(); ++i)
            dirs = exact_eq((*a.directions)[i], (*b.directions)[i]);
    }
    return a.active_tol == b.active_tol && a.zero_tol == b.zero_tol &&
           a.rank_tol == b.rank_tol && a.newton_tol == b.newton_tol &&
           a.max_iters == b.max_iters && a.seed == b.seed && a.samples == b.samples &&
           a.radius == b.radius && a.fd_step == b.fd_step && a.scales == b.scales && dirs &&
           a.k_f == b.k_f && a.k_phi == b.k_phi && a.force == b.force &&
           exact_eq(a.gbar_override, b.gbar_override);
}

inline bool operator==(const ProblemSpec& a, const ProblemSpec& b) {
    return a.m == b.m && a.phi == b.phi && a.h == b.h && exact_eq(a.xbar, b.xbar) &&
           a.options == b.options;
}

namespace specio_detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
    throw ValidationError(path + ": " + what);
}

inline double get_number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(path, "must be finite");
    return v;
}

inline Vector get_vector(const json& j, const std::string& path, Index expect = -1) {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    Vector v(static_cast<Index>(j.size()));
    for (size_t i = 0; i < j.size(); ++i)
        v(static_cast<Index>(i)) = get_number(j[i], path + "[" + std::to_string(i) + "]");
    if (expect >= 0 && v.size() != expect)
        fail(path, "expected length " + std::to_string(expect) + ", got " +
                       std::to_string(v.size()));
    return v;
}

inline Matrix get_matrix(const json& j, const std::string& path, Index rows, Index cols) {
    if (!j.is_array()) fail(path, "expected an array of rows");
    if (static_cast<Index>(j.size()) != rows)
        fail(path, "expected " + std::to_string(rows) + " rows, got " + std::to_string(j.size()));
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        m.row(r) = get_vector(j[static_cast<size_t>(r)], path + "[" + std::to_string(r) + "]",
                              cols)
                       .transpose();
    return m;
}

inline void check_keys(const json& j, const std::string& path,
                       std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) { ok = true; break; }
        if (!ok) fail(path.empty() ? key : path + "." + key, "unknown field");
    }
}

inline QuadraticAtom get_atom(const json& j, const std::string& path, Index m) {
    if (!j.is_object()) fail(path, "expected an object {A, b, c}");
    check_keys(j, path, {"A", "b", "c"});
    if (!j.contains("A") || !j.contains("b")) fail(path, "needs fields A and b");
    Matrix a = get_matrix(j["A"], path + ".A", m, m);
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9)
        fail(path + ".A", "not symmetric (max |A - A^T| = " + std::to_string(asym) +
                              " exceeds 1e-9)");
    Vector b = get_vector(j["b"], path + ".b", m);
    const double c = j.contains("c") ? get_number(j["c"], path + ".c") : 0.0;
    return QuadraticAtom(std::move(a), std::move(b), c);
}

inline HPart get_part(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    check_keys(j, path, {"kind", "count", "tau", "w"});
    HPart p;
    if (!j.contains("kind") || !j["kind"].is_string()) fail(path, "needs a string field kind");
    p.kind = j["kind"].get<std::string>();
    if (p.kind != "max" && p.kind != "l1" && p.kind != "smooth")
        fail(path + ".kind", "must be one of max, l1, smooth");
    if (!j.contains("count") || !j["count"].is_number_integer())
        fail(path, "needs an integer field count");
    p.count = j["count"].get<Index>();
    if (p.count < 1) fail(path + ".count", "must be at least 1");
    if (p.kind == "l1") {
        if (!j.contains("tau")) fail(path, "l1 part needs tau");
        p.tau = get_number(j["tau"], path + ".tau");
        if (!(p.tau > 0)) fail(path + ".tau", "must be positive");
    } else if (j.contains("tau")) {
        fail(path + ".tau", "only valid for l1 parts");
    }
    if (p.kind == "smooth") {
        if (j.contains("w")) p.w = get_vector(j["w"], path + ".w", p.count);
    } else if (j.contains("w")) {
        fail(path + ".w", "only valid for smooth parts");
    }
    return p;
}

inline std::vector<Index> get_index_list(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array of integers");
    std::vector<Index> out;
    for (size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number_integer())
            fail(path + "[" + std::to_string(i) + "]", "expected an integer");
        out.push_back(j[i].get<Index>());
    }
    return out;
}

} // namespace specio_detail

/// Parse and validate a spec document. Syntax errors carry "<file>:<line>";
/// validation errors carry the JSON field path.
inline ProblemSpec parse_spec(const std::string& text, const std::string& filename = "spec") {
    using specio_detail::fail;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        size_t line = 1;
        for (size_t i = 0; i < e.byte && i < text.size(); ++i)
            if (text[i] == '\n') ++line;
        throw ValidationError(filename + ":" + std::to_string(line) + ": " + e.what());
    }
    if (!doc.is_object()) fail(filename, "top level must be an object");
    specio_detail::check_keys(doc, "", {"m", "phi", "h", "xbar", "options"});
    for (const char* req : {"m", "phi", "h", "xbar"})
        if (!doc.contains(req)) fail(filename, std::string("missing required field ") + req);

    ProblemSpec spec;
    if (!doc["m"].is_number_integer() || doc["m"].get<Index>() < 1)
        fail("m", "must be a positive integer");
    spec.m = doc["m"].get<Index>();

    if (!doc["phi"].is_array() || doc["phi"].empty())
        fail("phi", "expected a non-empty array of quadratic atoms");
    for (size_t i = 0; i < doc["phi"].size(); ++i)
        spec.phi.push_back(
            specio_detail::get_atom(doc["phi"][i], "phi[" + std::to_string(i) + "]", spec.m));
    const Index n = static_cast<Index>(spec.phi.size());

    const json& h = doc["h"];
    if (!h.is_object() || !h.contains("kind") || !h["kind"].is_string())
        fail("h", "expected an object with a string field kind");
    spec.h.kind = h["kind"].get<std::string>();
    if (spec.h.kind == "max") {
        specio_detail::check_keys(h, "h", {"kind"});
    } else if (spec.h.kind == "l1") {
        specio_detail::check_keys(h, "h", {"kind", "tau"});
        if (!h.contains("tau")) fail("h", "l1 needs tau");
        spec.h.tau = specio_detail::get_number(h["tau"], "h.tau");
        if (!(spec.h.tau > 0)) fail("h.tau", "must be positive");
    } else if (spec.h.kind == "smooth") {
        specio_detail::check_keys(h, "h", {"kind", "w"});
        if (h.contains("w")) spec.h.w = specio_detail::get_vector(h["w"], "h.w", n);
    } else if (spec.h.kind == "sum") {
        specio_detail::check_keys(h, "h", {"kind", "parts"});
        if (!h.contains("parts") || !h["parts"].is_array() || h["parts"].empty())
            fail("h.parts", "expected a non-empty array");
        Index total = 0;
        for (size_t i = 0; i < h["parts"].size(); ++i) {
            spec.h.parts.push_back(
                specio_detail::get_part(h["parts"][i], "h.parts[" + std::to_string(i) + "]"));
            total += spec.h.parts.back().count;
        }
        if (total != n)
            fail("h.parts", "part counts sum to " + std::to_string(total) + " but phi has " +
                                std::to_string(n) + " atoms");
    } else {
        fail("h.kind", "must be one of max, l1, smooth, sum");
    }

    spec.xbar = specio_detail::get_vector(doc["xbar"], "xbar", spec.m);

    if (doc.contains("options")) {
        const json& o = doc["options"];
        if (!o.is_object()) fail("options", "expected an object");
        specio_detail::check_keys(o, "options",
                                  {"active_tol", "zero_tol", "rank_tol", "newton_tol",
                                   "max_iters", "seed", "samples", "radius", "fd_step", "scales",
                                   "directions", "kf", "kphi", "force", "gbar_override"});
        SpecOptions& opt = spec.options;
        if (o.contains("active_tol")) {
            opt.active_tol = specio_detail::get_number(o["active_tol"], "options.active_tol");
            if (!(opt.active_tol > 0)) fail("options.active_tol", "must be positive");
        }
        if (o.contains("zero_tol")) {
            opt.zero_tol = specio_detail::get_number(o["zero_tol"], "options.zero_tol");
            if (!(opt.zero_tol > 0)) fail("options.zero_tol", "must be positive");
        }
        if (o.contains("rank_tol")) {
            opt.rank_tol = specio_detail::get_number(o["rank_tol"], "options.rank_tol");
            if (opt.rank_tol < 0) fail("options.rank_tol", "must be >= 0 (0 = auto)");
        }
        if (o.contains("newton_tol")) {
            opt.newton_tol = specio_detail::get_number(o["newton_tol"], "options.newton_tol");
            if (!(opt.newton_tol > 0)) fail("options.newton_tol", "must be positive");
        }
        if (o.contains("max_iters")) {
            if (!o["max_iters"].is_number_integer() || o["max_iters"].get<int>() < 1)
                fail("options.max_iters", "must be a positive integer");
            opt.max_iters = o["max_iters"].get<int>();
        }
        if (o.contains("seed")) {
            if (!o["seed"].is_number_integer() || o["seed"].get<long long>() < 0)
                fail("options.seed", "must be a nonnegative integer");
            opt.seed = o["seed"].get<unsigned>();
        }
        if (o.contains("samples")) {
            if (!o["samples"].is_number_integer() || o["samples"].get<int>() < 1)
                fail("options.samples", "must be a positive integer");
            opt.samples = o["samples"].get<int>();
        }
        if (o.contains("radius")) {
            opt.radius = specio_detail::get_number(o["radius"], "options.radius");
            if (!(opt.radius > 0)) fail("options.radius", "must be positive");
        }
        if (o.contains("fd_step")) {
            opt.fd_step = specio_detail::get_number(o["fd_step"], "options.fd_step");
            if (!(opt.fd_step > 0)) fail("options.fd_step", "must be positive");
        }
        if (o.contains("scales")) {
            if (!o["scales"].is_array() || o["scales"].empty())
                fail("options.scales", "expected a non-empty array");
            opt.scales.clear();
            for (size_t i = 0; i < o["scales"].size(); ++i) {
                const double s = specio_detail::get_number(
                    o["scales"][i], "options.scales[" + std::to_string(i) + "]");
                if (!(s > 0)) fail("options.scales", "scales must be positive");
                opt.scales.push_back(s);
            }
        }
        if (o.contains("directions")) {
            if (!o["directions"].is_array() || o["directions"].empty())
                fail("options.directions", "expected a non-empty array of vectors");
            std::vector<Vector> dirs;
            for (size_t i = 0; i < o["directions"].size(); ++i)
                dirs.push_back(specio_detail::get_vector(
                    o["directions"][i], "options.directions[" + std::to_string(i) + "]"));
            opt.directions = std::move(dirs);
        }
        if (o.contains("kf")) opt.k_f = specio_detail::get_index_list(o["kf"], "options.kf");
        if (o.contains("kphi"))
            opt.k_phi = specio_detail::get_index_list(o["kphi"], "options.kphi");
        if (o.contains("force")) {
            if (!o["force"].is_boolean()) fail("options.force", "expected a boolean");
            opt.force = o["force"].get<bool>();
        }
        if (o.contains("gbar_override"))
            opt.gbar_override =
                specio_detail::get_vector(o["gbar_override"], "options.gbar_override", spec.m);
    }
    return spec;
}

namespace specio_detail {

inline json vector_to_json(const Vector& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) rows.push_back(vector_to_json(m.row(r).transpose()));
    return rows;
}

} // namespace specio_detail

/// Full-precision serialization; parse(serialize(spec)) reproduces spec.
inline json spec_to_json(const ProblemSpec& spec) {
    json doc;
    doc["m"] = spec.m;
    doc["phi"] = json::array();
    for (const auto& a : spec.phi) {
        json atom;
        atom["A"] = specio_detail::matrix_to_json(a.A);
        atom["b"] = specio_detail::vector_to_json(a.b);
        atom["c"] = a.c;
        doc["phi"].push_back(std::move(atom));
    }
    json h;
    h["kind"] = spec.h.kind;
    if (spec.h.kind == "l1") h["tau"] = spec.h.tau;
    if (spec.h.kind == "smooth" && spec.h.w) h["w"] = specio_detail::vector_to_json(*spec.h.w);
    if (spec.h.kind == "sum") {
        h["parts"] = json::array();
        for (const auto& p : spec.h.parts) {
            json part;
            part["kind"] = p.kind;
            part["count"] = p.count;
            if (p.kind == "l1") part["tau"] = p.tau;
            if (p.kind == "smooth" && p.w) part["w"] = specio_detail::vector_to_json(*p.w);
            h["parts"].push_back(std::move(part));
        }
    }
    doc["h"] = std::move(h);
    doc["xbar"] = specio_detail::vector_to_json(spec.xbar);

    json o;
    const SpecOptions& opt = spec.options;
    o["active_tol"] = opt.active_tol;
    o["zero_tol"] = opt.zero_tol;
    o["rank_tol"] = opt.rank_tol;
    o["newton_tol"] = opt.newton_tol;
    o["max_iters"] = opt.max_iters;
    o["seed"] = opt.seed;
    o["samples"] = opt.samples;
    o["radius"] = opt.radius;
    o["fd_step"] = opt.fd_step;
    o["scales"] = json::array();
    for (double s : opt.scales) o["scales"].push_back(s);
    if (opt.directions) {
        o["directions"] = json::array();
        for (const auto& d : *opt.directions)
            o["directions"].push_back(specio_detail::vector_to_json(d));
    }
    if (!opt.k_f.empty()) {
        o["kf"] = json::array();
        for (Index i : opt.k_f) o["kf"].push_back(i);
    }
    if (!opt.k_phi.empty()) {
        o["kphi"] = json::array();
        for (Index i : opt.k_phi) o["kphi"].push_back(i);
    }
    o["force"] = opt.force;
    if (opt.gbar_override) o["gbar_override"] = specio_detail::vector_to_json(*opt.gbar_override);
    doc["options"] = std::move(o);
    return doc;
}

} // namespace vucalc
