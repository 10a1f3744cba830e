#pragma once

// Pipelines behind the CLI subcommands: build the chain-rule decomposition
// for a parsed problem spec (decompose), probe its structure track
// (fast-track), and cross-check the analytic answers against slow independent
// oracles (verify). Reports are plain structs; serialization is deterministic
// (insertion-ordered JSON, shortest-round-trip doubles, no timestamps), so
// identical invocations produce byte-identical output.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vucalc/chain.hpp"
#include "vucalc/fast_track.hpp"
#include "vucalc/oracles.hpp"
#include "vucalc/spec_io.hpp"

namespace vucalc {

/// One checked hypothesis. Entries marked required=false are informational:
/// a failure is reported but does not abort the command.
struct HypothesisEntry {
    std::string name;
    bool holds = false;
    bool required = true;
    std::string note;
    std::optional<Vector> witness; // inner-value coordinates (length n)
};

/// One verify comparison: gap <= tolerance decides pass.
struct OracleComparison {
    std::string name;
    bool skipped = false;
    bool pass = false;
    double value = 0.0;     // scalar summary of the computed side
    double reference = 0.0; // scalar summary of the oracle side
    double gap = 0.0;       // the judged quantity
    double tolerance = 0.0;
    std::string note;
};

struct Report {
    std::string command;   // decompose | fast-track | verify
    std::string spec_path;
    std::string kind;      // outer function kind
    Index m = 0;           // domain dimension
    Index n = 0;           // number of inner components
    Vector xbar;
    json options_json;     // resolved options, as serialized by spec_to_json

    int exit_code = 0;
    std::string status = "ok"; // ok | hypothesis-violation | verification-mismatch
    std::string failure;       // violated hypothesis / first failed comparison

    std::vector<HypothesisEntry> hypotheses;

    // Decomposition block (exit 0 only). For fast-track the bases live in the
    // track's variable space (doubled coordinates for l1 structures).
    Index dim_u = 0, dim_v = 0;
    Index track_dim = 0; // ambient dimension of the bases below
    Matrix u_basis, v_basis, v_raw;
    Vector gbar, u_gradient, u_lagrangian_gradient;
    bool transversality_verified = false;
    std::optional<Index> generator_count; // pushforward model size, if built

    std::optional<ProbeReport> probe; // fast-track only
    std::vector<OracleComparison> comparisons; // verify only
    std::vector<std::string> notes;
};

namespace driver_detail {

struct PartSlice {
    HPart part;
    Index offset = 0;
};

inline std::vector<PartSlice> part_slices(const ProblemSpec& spec) {
    const Index n = static_cast<Index>(spec.phi.size());
    std::vector<PartSlice> out;
    if (spec.h.kind == "sum") {
        Index off = 0;
        for (const auto& p : spec.h.parts) {
            out.push_back({p, off});
            off += p.count;
        }
        if (off != n)
            throw ValidationError("h.parts: counts sum to " + std::to_string(off) +
                                  " but phi has " + std::to_string(n) + " components");
    } else {
        HPart p;
        p.kind = spec.h.kind;
        p.count = n;
        p.tau = spec.h.tau;
        p.w = spec.h.w;
        out.push_back({p, 0});
    }
    return out;
}

/// True when the slice [offset, offset+count) of the inner map is exactly the
/// identity on the domain: count == m and component k selects coordinate k.
inline bool identity_slice(const ProblemSpec& spec, Index offset, Index count) {
    if (count != spec.m) return false;
    for (Index k = 0; k < count; ++k) {
        const QuadraticAtom& a = spec.phi[static_cast<size_t>(offset + k)];
        if (a.c != 0.0) return false;
        if (a.A.size() > 0 && a.A.cwiseAbs().maxCoeff() != 0.0) return false;
        for (Index i = 0; i < spec.m; ++i)
            if (a.b(i) != (i == k ? 1.0 : 0.0)) return false;
    }
    return true;
}

/// Detects the shape "smooth parts + exactly one l1 part over an identity
/// slice" (covers plain l1 over the identity as the degenerate case) and
/// returns the collapsed smooth term and the l1 weight.
struct L1IdentityShape {
    QuadraticAtom q;
    double tau = 0.0;
};

inline std::optional<L1IdentityShape> l1_identity_shape(const ProblemSpec& spec) {
    const auto slices = part_slices(spec);
    int l1_parts = 0;
    for (const auto& s : slices) {
        if (s.part.kind == "l1")
            ++l1_parts;
        else if (s.part.kind != "smooth")
            return std::nullopt;
    }
    if (l1_parts != 1) return std::nullopt;

    L1IdentityShape shape;
    shape.q = QuadraticAtom::zero(spec.m);
    for (const auto& s : slices) {
        if (s.part.kind == "l1") {
            if (!identity_slice(spec, s.offset, s.part.count)) return std::nullopt;
            shape.tau = s.part.tau;
            continue;
        }
        const Vector w = s.part.w ? *s.part.w : Vector::Ones(s.part.count);
        for (Index k = 0; k < s.part.count; ++k) {
            const QuadraticAtom& a = spec.phi[static_cast<size_t>(s.offset + k)];
            shape.q.A += w(k) * a.A;
            shape.q.b += w(k) * a.b;
            shape.q.c += w(k) * a.c;
        }
    }
    return shape;
}

/// Everything the three commands share: the composed decomposition, the
/// hypothesis scoreboard, evaluation oracles, and track construction data.
struct Analysis {
    Index m = 0, n = 0;
    Vector z;   // inner values at xbar
    Matrix jac; // inner Jacobian at xbar (n x m)

    ChainResult chain;
    std::vector<HypothesisEntry> hypotheses;
    std::vector<std::string> notes;
    bool violated = false;      // some required hypothesis failed
    std::string violated_name;

    ScalarFn f_eval;
    GradientOracle grad_oracle;
    double gradient_lipschitz = 0.0; // curvature bound for the sampling tolerance

    // Track construction: a Newton track for a single max part with >= 2
    // active components, a doubled-variable structure for l1-over-identity
    // shapes, and the trivial track chi(u) = xbar + Ubar u whenever dim V = 0
    // or the shape is l1-over-identity.
    std::optional<PdgStructure> max_pdg; // f atoms = active components
    bool trivial_track = false;
    std::optional<L1Structure> l1s;
};

inline NonsmoothAtom part_atom(const HPart& p, const SpecOptions& opt) {
    if (p.kind == "max") return NonsmoothAtom::coordinate_max(opt.active_tol);
    if (p.kind == "l1") return NonsmoothAtom::l1_norm(p.tau, opt.zero_tol);
    return NonsmoothAtom::smooth_linear(p.w ? *p.w : Vector::Ones(p.count));
}

inline void build_eval_oracles(const ProblemSpec& spec, Analysis& a) {
    const auto slices = part_slices(spec);
    const SpecOptions opt = spec.options;
    const std::vector<QuadraticAtom> atoms = spec.phi;

    a.f_eval = [slices, opt, atoms](const Vector& x) {
        double total = 0.0;
        for (const auto& s : slices) {
            Vector z(s.part.count);
            for (Index k = 0; k < s.part.count; ++k)
                z(k) = eval(atoms[static_cast<size_t>(s.offset + k)], x);
            total += eval(part_atom(s.part, opt), z);
        }
        return total;
    };

    a.grad_oracle = [slices, opt, atoms](const Vector& x) -> std::optional<Vector> {
        Vector g = Vector::Zero(x.size());
        for (const auto& s : slices) {
            Vector z(s.part.count);
            for (Index k = 0; k < s.part.count; ++k)
                z(k) = eval(atoms[static_cast<size_t>(s.offset + k)], x);
            if (s.part.kind == "max") {
                const auto act = active_set(NonsmoothAtom::coordinate_max(opt.active_tol), z);
                if (act.size() != 1) return std::nullopt; // tie: kink point
                g += grad(atoms[static_cast<size_t>(s.offset + act[0])], x);
            } else if (s.part.kind == "l1") {
                for (Index k = 0; k < s.part.count; ++k) {
                    if (std::abs(z(k)) <= opt.zero_tol) return std::nullopt;
                    g += s.part.tau * (z(k) > 0 ? 1.0 : -1.0) *
                         grad(atoms[static_cast<size_t>(s.offset + k)], x);
                }
            } else {
                const Vector w = s.part.w ? *s.part.w : Vector::Ones(s.part.count);
                for (Index k = 0; k < s.part.count; ++k)
                    g += w(k) * grad(atoms[static_cast<size_t>(s.offset + k)], x);
            }
        }
        return g;
    };

    // Curvature bound: sum of coefficient-weighted spectral norms of the
    // inner Hessians (symmetric, so the largest |eigenvalue|).
    double lip = 0.0;
    for (const auto& s : slices) {
        const Vector w = s.part.w ? *s.part.w : Vector::Ones(s.part.count);
        for (Index k = 0; k < s.part.count; ++k) {
            const QuadraticAtom& at = atoms[static_cast<size_t>(s.offset + k)];
            double spectral = 0.0;
            if (at.A.size() > 0 && at.A.cwiseAbs().maxCoeff() > 0.0) {
                Eigen::SelfAdjointEigenSolver<Matrix> es(at.A);
                spectral = es.eigenvalues().cwiseAbs().maxCoeff();
            }
            const double coef = s.part.kind == "max"  ? 1.0
                                : s.part.kind == "l1" ? s.part.tau
                                                      : std::abs(w(k));
            lip += coef * spectral;
        }
    }
    a.gradient_lipschitz = lip;
}

inline Vector lift_witness(const Vector& slice_witness, Index offset, Index n) {
    Vector w = Vector::Zero(n);
    w.segment(offset, slice_witness.size()) = slice_witness;
    return w;
}

inline std::string fmt_num(double x) {
    if (x == 0.0) x = 0.0;  // collapse -0 so reports do not depend on sign bits
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

inline void add_strong_transversality_entry(Analysis& a, const PdgStructure& pdg,
                                            const Vector& x, double rank_tol,
                                            const std::string& extra) {
    const StrongTransversalityReport st = strong_transversality(pdg, x, rank_tol);
    HypothesisEntry e;
    e.name = "strong_transversality";
    e.required = false;
    e.holds = st.holds;
    e.note = "full structure gradients have rank " + std::to_string(st.rank) + " of " +
             std::to_string(st.columns);
    if (!st.holds) {
        e.note += "; greedy suggestion (heuristic): keep f indices {";
        for (size_t i = 0; i < st.suggested_k_f.size(); ++i)
            e.note += (i ? "," : "") + std::to_string(st.suggested_k_f[i]);
        e.note += "} and constraint indices {";
        for (size_t i = 0; i < st.suggested_k_phi.size(); ++i)
            e.note += (i ? "," : "") + std::to_string(st.suggested_k_phi[i]);
        e.note += "}";
    }
    if (!extra.empty()) e.note += "; " + extra;
    a.hypotheses.push_back(std::move(e));
}

/// Structured fallback when sign-vertex enumeration blows the generator
/// budget: l1 over an identity slice plus smooth parts.
inline void analyze_l1_structured(const ProblemSpec& spec, const L1IdentityShape& shape,
                                  Analysis& a) {
    const SpecOptions& opt = spec.options;
    a.chain = l1_compose(shape.q, shape.tau, spec.xbar, opt.zero_tol);
    a.notes.push_back("structured l1 path: sign-vertex enumeration exceeds the generator "
                      "budget, so the subspace math uses the support directly");
    if (!a.chain.pushforward_model)
        a.notes.push_back("pushforward generator model omitted (generator budget)");

    HypothesisEntry tr;
    tr.name = "transversality";
    tr.holds = true;
    tr.note = "the l1 block of the inner map is the identity; remaining blocks are smooth";
    a.hypotheses.push_back(std::move(tr));

    HypothesisEntry nd;
    nd.name = "nondegeneracy";
    nd.holds = true;
    nd.note = "horizon subdifferential is {0}";
    a.hypotheses.push_back(std::move(nd));

    if (spec.h.kind == "sum") {
        HypothesisEntry sc;
        sc.name = "sum_condition";
        sc.holds = true;
        sc.note = "smooth summands have trivial normals";
        a.hypotheses.push_back(std::move(sc));
    }

    a.l1s = l1_regularized_structure(shape.q, shape.tau, spec.xbar, opt.zero_tol);
    a.trivial_track = true;
    std::string sets = "track uses reduced sets: f index 0 and one constraint per zero "
                       "coordinate of xbar";
    add_strong_transversality_entry(a, a.l1s->pdg, a.l1s->xbar_doubled, opt.rank_tol, sets);
}

inline Analysis analyze(const ProblemSpec& spec) {
    Analysis a;
    a.m = spec.m;
    a.n = static_cast<Index>(spec.phi.size());
    const SpecOptions& opt = spec.options;

    const SmoothMap inner(spec.m, spec.phi);
    a.z = eval(inner, spec.xbar);
    a.jac = jacobian(inner, spec.xbar);
    require_finite(a.z, "inner values at xbar");
    require_finite(a.jac, "inner Jacobian at xbar");
    build_eval_oracles(spec, a);

    const auto slices = part_slices(spec);
    const auto shape = l1_identity_shape(spec);

    struct PartOut {
        SubdifferentialModel model;   // slice coordinates
        ManifoldModel manifold;       // slice coordinates
        TransversalityReport tr;
        ChainResult chain;            // composed into the domain
        ManifoldModel pulled;         // domain coordinates
    };
    std::vector<PartOut> parts;
    try {
        for (const auto& s : slices) {
            PartOut p;
            const Vector zp = a.z.segment(s.offset, s.part.count);
            const Matrix jp = a.jac.middleRows(s.offset, s.part.count);
            const NonsmoothAtom atom = part_atom(s.part, opt);
            p.model = subdifferential(atom, zp); // may exceed the generator budget

            if (s.part.kind == "max") {
                const auto act = active_set(atom, zp);
                Matrix ncols = Matrix::Zero(s.part.count, static_cast<Index>(act.size()) - 1);
                for (size_t k = 1; k < act.size(); ++k) {
                    ncols(act[k], static_cast<Index>(k) - 1) = 1.0;
                    ncols(act[0], static_cast<Index>(k) - 1) = -1.0;
                }
                p.manifold = ManifoldModel::from_normal_columns(ncols, opt.rank_tol);
            } else if (s.part.kind == "l1") {
                std::vector<Index> zeros;
                for (Index k = 0; k < s.part.count; ++k)
                    if (std::abs(zp(k)) <= opt.zero_tol) zeros.push_back(k);
                Matrix ncols = Matrix::Zero(s.part.count, static_cast<Index>(zeros.size()));
                for (size_t k = 0; k < zeros.size(); ++k)
                    ncols(zeros[k], static_cast<Index>(k)) = 1.0;
                p.manifold = ManifoldModel::from_normal_columns(ncols, opt.rank_tol);
            } else {
                p.manifold = ManifoldModel::full_space(s.part.count);
            }

            p.tr = transversality_check(jp, p.manifold, opt.rank_tol);
            p.chain = compose_vu(p.model, jp, p.manifold, /*force=*/true, opt.rank_tol);
            p.chain.transversality_verified = p.tr.holds;
            p.pulled = ManifoldModel::from_normal_columns(
                (jp.transpose() * p.manifold.normal_basis.cols).eval(), opt.rank_tol);
            parts.push_back(std::move(p));
        }
    } catch (const GeneratorBudgetExceeded&) {
        if (!shape) throw;
        analyze_l1_structured(spec, *shape, a);
        return a;
    }

    // Hypothesis scoreboard over the parts.
    HypothesisEntry tr;
    tr.name = "transversality";
    tr.holds = true;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].tr.holds) continue;
        if (tr.holds) { // first failure carries the witness
            tr.holds = false;
            tr.note = "part " + std::to_string(i) + " (" + slices[i].part.kind +
                      "): adjoint Jacobian annihilates a structure normal (rank " +
                      std::to_string(parts[i].tr.rank) + " of " +
                      std::to_string(parts[i].tr.normal_dim) + ")";
            if (parts[i].tr.witness)
                tr.witness = lift_witness(*parts[i].tr.witness, slices[i].offset, a.n);
        }
    }
    if (tr.holds)
        tr.note = parts.size() == 1 ? "adjoint Jacobian is injective on the structure normals"
                                    : "holds for every part";
    const bool tr_holds = tr.holds;
    a.hypotheses.push_back(std::move(tr));

    HypothesisEntry nd;
    nd.name = "nondegeneracy";
    nd.holds = true;
    for (size_t i = 0; i < parts.size(); ++i) {
        const auto rep = nondegeneracy_check(parts[i].model,
                                             a.jac.middleRows(slices[i].offset,
                                                              slices[i].part.count));
        if (!rep.holds) {
            nd.holds = false;
            nd.note = "part " + std::to_string(i) + ": " + rep.reason;
            break;
        }
        nd.note = rep.reason;
    }
    a.hypotheses.push_back(std::move(nd));

    bool sum_ok = true;
    if (parts.size() > 1) {
        std::vector<ManifoldModel> pulled;
        for (const auto& p : parts) pulled.push_back(p.pulled);
        const SumConditionReport sc = sum_condition_check(pulled, opt.rank_tol);
        HypothesisEntry e;
        e.name = "sum_condition";
        e.holds = sc.holds;
        sum_ok = sc.holds;
        e.note = "stacked pulled-back normals have rank " + std::to_string(sc.stacked_rank) +
                 " of " + std::to_string(sc.dim_sum);
        a.hypotheses.push_back(std::move(e));
    }

    if (!tr_holds) {
        a.violated = true;
        a.violated_name = "transversality";
    } else if (!nd.holds) {
        a.violated = true;
        a.violated_name = "nondegeneracy";
    } else if (!sum_ok) {
        a.violated = true;
        a.violated_name = "sum_condition";
    }

    // Combine the parts.
    if (parts.size() == 1) {
        a.chain = parts[0].chain;
    } else {
        std::vector<Summand> summands;
        for (auto& p : parts) {
            Summand s;
            s.model = *p.chain.pushforward_model;
            s.manifold = p.pulled;
            OrthonormalBasis v = orthonormal_complement(p.chain.u_basis);
            Matrix v_raw = v.cols;
            s.vu = make_vu_pair(p.chain.u_basis, std::move(v), std::move(v_raw), opt.rank_tol);
            summands.push_back(std::move(s));
        }
        if (sum_ok) {
            a.chain = sum_rule(summands, opt.rank_tol);
        } else {
            // Forced assembly: the sum rule minus its admission check.
            std::vector<OrthonormalBasis> u_bases;
            Vector gbar = Vector::Zero(a.m);
            std::vector<SubdifferentialModel> models;
            for (const auto& s : summands) {
                u_bases.push_back(s.vu.u_basis);
                gbar += s.model.ri_point;
                models.push_back(s.model);
            }
            a.chain.u_basis = intersect_subspaces(u_bases, opt.rank_tol);
            a.chain.gbar_pushed = gbar;
            a.chain.u_lagrangian_gradient = a.chain.u_basis.cols.transpose() * gbar;
            a.chain.u_gradient = a.chain.u_basis.cols * a.chain.u_lagrangian_gradient;
            try {
                a.chain.pushforward_model = minkowski_sum(models);
            } catch (const GeneratorBudgetExceeded&) {
                a.chain.pushforward_model.reset();
            }
        }
        a.chain.transversality_verified = tr_holds && sum_ok;
    }
    if (!a.chain.pushforward_model)
        a.notes.push_back("pushforward generator model omitted (generator budget)");

    // Track construction data.
    if (slices.size() == 1 && slices[0].part.kind == "max") {
        const auto act = active_set(NonsmoothAtom::coordinate_max(opt.active_tol), a.z);
        if (act.size() >= 2) {
            PdgStructure pdg;
            for (Index i : act) pdg.f_atoms.push_back(spec.phi[static_cast<size_t>(i)]);
            a.max_pdg = std::move(pdg);
        }
    }
    if (shape) {
        a.l1s = l1_regularized_structure(shape->q, shape->tau, spec.xbar, opt.zero_tol);
        a.trivial_track = true;
        add_strong_transversality_entry(a, a.l1s->pdg, a.l1s->xbar_doubled, opt.rank_tol,
                                        "track uses reduced sets: f index 0 and one "
                                        "constraint per zero coordinate of xbar");
    } else if (a.max_pdg) {
        add_strong_transversality_entry(a, *a.max_pdg, spec.xbar, opt.rank_tol,
                                        "structure built from the " +
                                            std::to_string(a.max_pdg->f_atoms.size()) +
                                            " active components");
    }
    if (a.chain.u_basis.dim() == a.m) a.trivial_track = true; // dim V = 0

    return a;
}

inline void apply_gbar_override(const ProblemSpec& spec, Analysis& a) {
    if (!spec.options.gbar_override) return;
    const Vector& g = *spec.options.gbar_override;
    a.chain.gbar_pushed = g;
    a.chain.u_lagrangian_gradient = a.chain.u_basis.cols.transpose() * g;
    a.chain.u_gradient = a.chain.u_basis.cols * a.chain.u_lagrangian_gradient;
    a.notes.push_back("gbar_override in effect: gradient data uses the supplied subgradient");
}

inline Report base_report(const std::string& command, const ProblemSpec& spec,
                          const std::string& spec_path) {
    Report rep;
    rep.command = command;
    rep.spec_path = spec_path;
    rep.kind = spec.h.kind;
    rep.m = spec.m;
    rep.n = static_cast<Index>(spec.phi.size());
    rep.xbar = spec.xbar;
    rep.options_json = spec_to_json(spec)["options"];
    return rep;
}

inline void fill_decomposition(Report& rep, const Analysis& a) {
    const OrthonormalBasis v = orthonormal_complement(a.chain.u_basis);
    rep.dim_u = a.chain.u_basis.dim();
    rep.dim_v = v.dim();
    rep.track_dim = a.chain.u_basis.ambient_dim;
    rep.u_basis = a.chain.u_basis.cols;
    rep.v_basis = v.cols;
    rep.v_raw = a.chain.pushforward_model
                    ? minkowski_difference_span(*a.chain.pushforward_model)
                    : v.cols;
    rep.gbar = a.chain.gbar_pushed;
    rep.u_gradient = a.chain.u_gradient;
    rep.u_lagrangian_gradient = a.chain.u_lagrangian_gradient;
    rep.transversality_verified = a.chain.transversality_verified;
    if (a.chain.pushforward_model) rep.generator_count = a.chain.pushforward_model->count();
}

inline Report hypothesis_violation(Report rep, const Analysis& a) {
    rep.exit_code = 3;
    rep.status = "hypothesis-violation";
    rep.failure = a.violated_name;
    rep.hypotheses = a.hypotheses;
    rep.notes = a.notes;
    return rep;
}

} // namespace driver_detail

inline Report run_decompose(const ProblemSpec& spec, const std::string& spec_path) {
    using namespace driver_detail;
    Report rep = base_report("decompose", spec, spec_path);
    Analysis a = analyze(spec);
    if (a.violated && !spec.options.force) return hypothesis_violation(std::move(rep), a);
    if (a.violated)
        a.notes.push_back("--force: proceeding despite violated " + a.violated_name +
                          "; the decomposition is unverified");
    apply_gbar_override(spec, a);
    rep.hypotheses = a.hypotheses;
    rep.notes = a.notes;
    fill_decomposition(rep, a);
    return rep;
}

inline Report run_fast_track(const ProblemSpec& spec, const std::string& spec_path) {
    using namespace driver_detail;
    Report rep = base_report("fast-track", spec, spec_path);
    Analysis a = analyze(spec);
    if (a.violated && !spec.options.force) return hypothesis_violation(std::move(rep), a);
    if (a.violated)
        a.notes.push_back("--force: proceeding despite violated " + a.violated_name +
                          "; the decomposition is unverified");
    rep.hypotheses = a.hypotheses;

    FastTrackOptions fopts;
    fopts.newton_tol = spec.options.newton_tol;
    fopts.max_iters = spec.options.max_iters;
    fopts.rank_tol = spec.options.rank_tol;

    PdgStructure pdg;
    Vector track_xbar;
    if (a.max_pdg) {
        pdg = *a.max_pdg;
        track_xbar = spec.xbar;
    } else if (a.l1s) {
        if (a.l1s->zero_coords.empty())
            throw ValidationError("fast-track requires dim V >= 1 (structure is smooth here)");
        pdg = a.l1s->pdg;
        track_xbar = a.l1s->xbar_doubled;
        a.notes.push_back("track variables are doubled: (r, x) with r tied to x");
    } else if (spec.h.kind == "smooth" ||
               (spec.h.kind == "max" && !a.max_pdg)) {
        throw ValidationError("fast-track requires dim V >= 1 (structure is smooth here)");
    } else {
        throw ValidationError("fast-track supports a single max outer function or an "
                              "l1-regularized smooth function over an identity block");
    }
    if (!spec.options.k_f.empty()) pdg.k_f = spec.options.k_f;
    if (!spec.options.k_phi.empty()) pdg.k_phi = spec.options.k_phi;

    const FastTrack ft = FastTrack::create(std::move(pdg), track_xbar, fopts);

    std::vector<Vector> dirs;
    if (spec.options.directions) {
        dirs = *spec.options.directions;
        for (const auto& d : dirs)
            if (d.size() != ft.vu.dim_u())
                throw ValidationError("options.directions: expected length " +
                                      std::to_string(ft.vu.dim_u()) + " (dim U)");
    } else {
        for (Index k = 0; k < ft.vu.dim_u(); ++k) {
            Vector e = Vector::Zero(ft.vu.dim_u());
            e(k) = 1.0;
            dirs.push_back(std::move(e));
        }
        a.notes.push_back("probe directions: U-coordinate axes (auto)");
    }

    rep.probe = property_probe(ft, dirs, spec.options.scales, spec.options.fd_step);

    rep.dim_u = ft.vu.dim_u();
    rep.dim_v = ft.vu.dim_v();
    rep.track_dim = ft.vu.ambient();
    rep.u_basis = ft.vu.u_basis.cols;
    rep.v_basis = ft.vu.v_basis.cols;
    rep.v_raw = ft.vu.v_raw;
    rep.gbar = grad(ft.pdg.f_atoms[0], track_xbar);
    rep.u_lagrangian_gradient = ft.vu.u_basis.cols.transpose() * rep.gbar;
    rep.u_gradient = ft.vu.u_basis.cols * rep.u_lagrangian_gradient;
    rep.transversality_verified = a.chain.transversality_verified;
    rep.notes = a.notes;
    return rep;
}

inline Report run_verify(const ProblemSpec& spec, const std::string& spec_path) {
    using namespace driver_detail;
    Report rep = base_report("verify", spec, spec_path);
    Analysis a = analyze(spec);
    if (a.violated && !spec.options.force) return hypothesis_violation(std::move(rep), a);
    if (a.violated)
        a.notes.push_back("--force: proceeding despite violated " + a.violated_name +
                          "; the decomposition is unverified");
    apply_gbar_override(spec, a);
    rep.hypotheses = a.hypotheses;
    fill_decomposition(rep, a);
    const SpecOptions& opt = spec.options;

    { // 1. Chain-rule U space against the plain decomposition of the
      //    composite generator model.
        OracleComparison c;
        c.name = "u_space_vs_generator_model";
        c.tolerance = 1e-8;
        if (a.chain.pushforward_model) {
            const OrthonormalBasis bf =
                brute_force_u_space(*a.chain.pushforward_model, opt.rank_tol);
            c.value = static_cast<double>(a.chain.u_basis.dim());
            c.reference = static_cast<double>(bf.dim());
            c.gap = subspace_distance(a.chain.u_basis, bf);
            c.pass = c.gap <= c.tolerance;
            c.note = "largest principal angle between the U bases";
        } else {
            c.skipped = true;
            c.note = "no generator model (generator budget); nothing to compare";
        }
        rep.comparisons.push_back(std::move(c));
    }

    { // 2. Analytic U-gradient against central differences of the reduced
      //    function along the track.
        OracleComparison c;
        c.name = "u_gradient_vs_finite_difference";
        c.tolerance = 1e-5;
        if (a.chain.u_basis.dim() == 0) {
            c.pass = true;
            c.note = "dim U = 0: the gradient comparison is empty";
        } else if (a.max_pdg) {
            FastTrackOptions fopts;
            fopts.newton_tol = opt.newton_tol;
            fopts.max_iters = opt.max_iters;
            fopts.rank_tol = opt.rank_tol;
            const FastTrack ft = FastTrack::create(*a.max_pdg, spec.xbar, fopts);
            const Vector fd =
                fd_u_lagrangian_gradient(a.f_eval, ft, a.chain.gbar_pushed, opt.fd_step);
            const Vector lifted = ft.vu.u_basis.cols * fd;
            c.value = lifted.size() ? lifted.cwiseAbs().maxCoeff() : 0.0;
            c.reference = a.chain.u_gradient.size() ? a.chain.u_gradient.cwiseAbs().maxCoeff()
                                                    : 0.0;
            c.gap = (lifted - a.chain.u_gradient).cwiseAbs().maxCoeff();
            c.pass = c.gap <= c.tolerance;
            c.note = "Newton track over the active components; gap is the max-abs "
                     "difference of the lifted gradients";
        } else if (a.trivial_track) {
            const Vector fd =
                fd_u_lagrangian_gradient(a.f_eval, spec.xbar, a.chain.u_basis, opt.fd_step);
            const Vector lifted = a.chain.u_basis.cols * fd;
            c.value = lifted.size() ? lifted.cwiseAbs().maxCoeff() : 0.0;
            c.reference = a.chain.u_gradient.size() ? a.chain.u_gradient.cwiseAbs().maxCoeff()
                                                    : 0.0;
            c.gap = (lifted - a.chain.u_gradient).cwiseAbs().maxCoeff();
            c.pass = c.gap <= c.tolerance;
            c.note = "the track selection is identically zero here, so the reduced "
                     "function is f along xbar + U u";
        } else {
            c.skipped = true;
            c.note = "no track model for this outer structure";
        }
        rep.comparisons.push_back(std::move(c));
    }

    { // 3. Generator model against gradients sampled around xbar.
        OracleComparison c;
        c.name = "sampled_subdifferential_hausdorff";
        c.tolerance = std::max(10.0 * opt.radius * a.gradient_lipschitz, 1e-12);
        if (a.chain.pushforward_model) {
            const SubdifferentialModel sampled =
                sample_subdifferential(a.grad_oracle, spec.xbar, opt.radius,
                                       opt.samples, opt.seed);
            c.value = static_cast<double>(sampled.count());
            c.reference = static_cast<double>(a.chain.pushforward_model->count());
            c.gap = hausdorff_distance(sampled.generators,
                                       a.chain.pushforward_model->generators);
            c.pass = c.gap <= c.tolerance;
            c.note = "value/reference are the generator counts; gap is the symmetric "
                     "Hausdorff distance (inf-norm)";
        } else {
            c.skipped = true;
            c.note = "no generator model (generator budget); nothing to compare";
        }
        rep.comparisons.push_back(std::move(c));
    }

    for (const auto& c : rep.comparisons) {
        if (!c.skipped && !c.pass) {
            rep.exit_code = 5;
            rep.status = "verification-mismatch";
            rep.failure = c.name;
            break;
        }
    }
    rep.notes = a.notes;
    return rep;
}

// ---- serialization ---------------------------------------------------------

namespace driver_detail {

inline json vector_to_json(const Vector& v) {
    json j = json::array();
    for (Index i = 0; i < v.size(); ++i) j.push_back(v(i) == 0.0 ? 0.0 : v(i));
    return j;
}

/// Bases and raw columns serialize as lists of column vectors.
inline json columns_to_json(const Matrix& m) {
    json j = json::array();
    for (Index c = 0; c < m.cols(); ++c) j.push_back(vector_to_json(m.col(c)));
    return j;
}

inline json hypotheses_to_json(const std::vector<HypothesisEntry>& hs) {
    json arr = json::array();
    for (const auto& h : hs) {
        json e;
        e["name"] = h.name;
        e["holds"] = h.holds;
        e["required"] = h.required;
        e["note"] = h.note;
        if (h.witness) e["witness"] = vector_to_json(*h.witness);
        arr.push_back(std::move(e));
    }
    return arr;
}

inline json comparisons_to_json(const std::vector<OracleComparison>& cs) {
    json arr = json::array();
    for (const auto& c : cs) {
        json e;
        e["name"] = c.name;
        if (c.skipped) {
            e["skipped"] = true;
        } else {
            e["pass"] = c.pass;
            e["value"] = c.value;
            e["reference"] = c.reference;
            e["gap"] = c.gap;
            e["tolerance"] = c.tolerance;
        }
        e["note"] = c.note;
        arr.push_back(std::move(e));
    }
    return arr;
}

inline std::string fmt_vector(const Vector& v) {
    std::string s = "(";
    for (Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_num(v(i));
    return s + ")";
}

} // namespace driver_detail

inline json report_to_json(const Report& rep) {
    using namespace driver_detail;
    json j;
    j["command"] = rep.command;
    j["spec"] = rep.spec_path;
    j["kind"] = rep.kind;
    j["status"] = rep.status;
    j["exit_code"] = rep.exit_code;
    if (!rep.failure.empty()) j["failure"] = rep.failure;

    if (rep.exit_code == 3) { // witness block only
        j["hypotheses"] = hypotheses_to_json(rep.hypotheses);
        if (!rep.notes.empty()) j["notes"] = rep.notes;
        return j;
    }
    if (rep.exit_code == 5) { // comparisons block only
        j["comparisons"] = comparisons_to_json(rep.comparisons);
        if (!rep.notes.empty()) j["notes"] = rep.notes;
        return j;
    }

    j["m"] = rep.m;
    j["n"] = rep.n;
    j["xbar"] = vector_to_json(rep.xbar);
    j["options"] = rep.options_json;
    j["hypotheses"] = hypotheses_to_json(rep.hypotheses);

    json d;
    d["dim_u"] = rep.dim_u;
    d["dim_v"] = rep.dim_v;
    d["ambient_dim"] = rep.track_dim;
    d["u_basis"] = columns_to_json(rep.u_basis);
    d["v_basis"] = columns_to_json(rep.v_basis);
    d["v_raw"] = columns_to_json(rep.v_raw);
    d["gbar"] = vector_to_json(rep.gbar);
    d["u_gradient"] = vector_to_json(rep.u_gradient);
    d["u_lagrangian_gradient"] = vector_to_json(rep.u_lagrangian_gradient);
    d["transversality_verified"] = rep.transversality_verified;
    if (rep.generator_count) d["generator_count"] = *rep.generator_count;
    j["decomposition"] = std::move(d);

    if (rep.probe) {
        json p;
        p["fd_step"] = rep.probe->fd_step;
        p["grad_v_zero_norm"] = rep.probe->grad_v_zero_norm;
        json rows = json::array();
        for (const auto& r : rep.probe->rows) {
            json e;
            e["direction"] = vector_to_json(r.direction);
            e["scale"] = r.scale;
            e["v_norm"] = r.v_norm;
            e["ratio_v_over_t2"] = r.ratio;
            e["newton_iters"] = r.newton_iters;
            e["residual_norm"] = r.residual_norm;
            e["offstructure_residual"] = r.offstructure_residual;
            rows.push_back(std::move(e));
        }
        p["rows"] = std::move(rows);
        j["probe"] = std::move(p);
    }

    if (!rep.comparisons.empty()) j["comparisons"] = comparisons_to_json(rep.comparisons);
    if (!rep.notes.empty()) j["notes"] = rep.notes;
    return j;
}

inline std::string report_to_text(const Report& rep) {
    using namespace driver_detail;
    std::string out = "vucalc " + rep.command + " -- " + rep.spec_path + "\n";
    out += "status: " + rep.status + " (exit " + std::to_string(rep.exit_code) + ")\n";
    if (!rep.failure.empty()) out += "failure: " + rep.failure + "\n";

    const auto hyp_lines = [&] {
        std::string s = "hypotheses:\n";
        for (const auto& h : rep.hypotheses) {
            s += std::string("  [") + (h.holds ? "ok  " : "FAIL") + "] " + h.name +
                 (h.required ? "" : " (informational)") + ": " + h.note + "\n";
            if (h.witness)
                s += "         witness (inner-value coordinates): " + fmt_vector(*h.witness) +
                     "\n";
        }
        return s;
    };
    const auto cmp_lines = [&] {
        std::string s = "comparisons:\n";
        for (const auto& c : rep.comparisons) {
            if (c.skipped) {
                s += "  [skip] " + c.name + ": " + c.note + "\n";
                continue;
            }
            s += std::string("  [") + (c.pass ? "ok  " : "FAIL") + "] " + c.name +
                 ": value " + fmt_num(c.value) + ", reference " + fmt_num(c.reference) +
                 ", gap " + fmt_num(c.gap) + ", tolerance " + fmt_num(c.tolerance) + "\n";
            s += "         " + c.note + "\n";
        }
        return s;
    };
    const auto note_lines = [&] {
        std::string s;
        if (!rep.notes.empty()) {
            s += "notes:\n";
            for (const auto& n : rep.notes) s += "  - " + n + "\n";
        }
        return s;
    };

    if (rep.exit_code == 3) return out + hyp_lines() + note_lines();
    if (rep.exit_code == 5) return out + cmp_lines() + note_lines();

    out += "kind: " + rep.kind + "   m: " + std::to_string(rep.m) +
           "   inner components: " + std::to_string(rep.n) + "\n";
    out += "xbar: " + fmt_vector(rep.xbar) + "\n";
    out += hyp_lines();
    out += "decomposition (ambient " + std::to_string(rep.track_dim) + "):\n";
    out += "  dim U: " + std::to_string(rep.dim_u) + "   dim V: " + std::to_string(rep.dim_v) +
           "   transversality verified: " + (rep.transversality_verified ? "yes" : "no") + "\n";
    for (Index c = 0; c < rep.u_basis.cols(); ++c)
        out += "  u" + std::to_string(c + 1) + " = " + fmt_vector(rep.u_basis.col(c)) + "\n";
    for (Index c = 0; c < rep.v_basis.cols(); ++c)
        out += "  v" + std::to_string(c + 1) + " = " + fmt_vector(rep.v_basis.col(c)) + "\n";
    out += "  gbar = " + fmt_vector(rep.gbar) + "\n";
    out += "  U-gradient = " + fmt_vector(rep.u_gradient) + "\n";
    out += "  U-gradient (U coordinates) = " + fmt_vector(rep.u_lagrangian_gradient) + "\n";
    if (rep.generator_count)
        out += "  subdifferential generators: " + std::to_string(*rep.generator_count) + "\n";

    if (rep.probe) {
        out += "track probe (fd step " + fmt_num(rep.probe->fd_step) + "):\n";
        out += "  direction            scale      ||v||      ||v||/t^2  iters  residual   "
               "off-structure\n";
        for (const auto& r : rep.probe->rows) {
            char line[160];
            std::snprintf(line, sizeof line, "  %-20s %-10.3g %-10.4g %-10.4g %-6d %-10.3g %.3g\n",
                          fmt_vector(r.direction).c_str(), r.scale, r.v_norm, r.ratio,
                          r.newton_iters, r.residual_norm, r.offstructure_residual);
            out += line;
        }
        out += "  fd gradient of the track selection at 0 (max-abs): " +
               fmt_num(rep.probe->grad_v_zero_norm) + "\n";
    }
    if (!rep.comparisons.empty()) out += cmp_lines();
    return out + note_lines();
}

} // namespace vucalc
