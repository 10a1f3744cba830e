#pragma once

// VU decompositions: from a subdifferential model (V = span of generator
// differences, U = its orthogonal complement) or from a primal structure of
// C^2 functions whose gradients assemble the raw V columns.

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "vucalc/atoms.hpp"
#include "vucalc/subdiff.hpp"
#include "vucalc/subspace.hpp"

namespace vucalc {

/// Primal structure: functions f_0..f_m1 agreeing with f on the structure
/// manifold, and constraints phi_1..phi_m2 vanishing on it. k_f / k_phi select
/// reduced index sets (0-based into the arrays; k_f must contain 0). Defaults
/// are the full sets.
struct PdgStructure {
    std::vector<QuadraticAtom> f_atoms;   // f_0 first; size >= 1
    std::vector<QuadraticAtom> phi_atoms; // may be empty
    std::vector<Index> k_f;
    std::vector<Index> k_phi;

    PdgStructure() = default;
    PdgStructure(std::vector<QuadraticAtom> f, std::vector<QuadraticAtom> phi,
                 std::vector<Index> kf = {}, std::vector<Index> kphi = {})
        : f_atoms(std::move(f)), phi_atoms(std::move(phi)), k_f(std::move(kf)),
          k_phi(std::move(kphi)) {
        if (f_atoms.empty()) throw ValidationError("PdgStructure: needs f_0");
        const Index n = f_atoms.front().dim();
        for (const auto& a : f_atoms)
            if (a.dim() != n) throw DimensionMismatch("PdgStructure: mixed dimensions in f atoms");
        for (const auto& a : phi_atoms)
            if (a.dim() != n)
                throw DimensionMismatch("PdgStructure: mixed dimensions in phi atoms");
        if (k_f.empty())
            for (Index i = 0; i < static_cast<Index>(f_atoms.size()); ++i) k_f.push_back(i);
        if (k_phi.empty())
            for (Index j = 0; j < static_cast<Index>(phi_atoms.size()); ++j) k_phi.push_back(j);
        normalize_indices(k_f, static_cast<Index>(f_atoms.size()), "k_f");
        normalize_indices(k_phi, static_cast<Index>(phi_atoms.size()), "k_phi");
        if (k_f.empty() || k_f.front() != 0)
            throw ValidationError("PdgStructure: k_f must contain index 0");
    }

    Index dim() const {
        if (f_atoms.empty()) throw ValidationError("PdgStructure: needs f_0");
        return f_atoms.front().dim();
    }

  private:
    static void normalize_indices(std::vector<Index>& idx, Index limit, const char* name) {
        std::sort(idx.begin(), idx.end());
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
        for (Index i : idx)
            if (i < 0 || i >= limit)
                throw ValidationError(std::string("PdgStructure: ") + name + " index " +
                                      std::to_string(i) + " out of range");
    }
};

/// Re-runs the validating constructor: structures assembled field by field
/// (default construction + push_back) get their index sets defaulted, sorted,
/// deduplicated, and bounds-checked. Every consumer normalizes first.
inline PdgStructure normalized(PdgStructure pdg) {
    return PdgStructure(std::move(pdg.f_atoms), std::move(pdg.phi_atoms), std::move(pdg.k_f),
                        std::move(pdg.k_phi));
}

namespace detail {

// Full-set raw V columns at x: gradient differences for i = 1..m1, then all
// constraint gradients.
inline Matrix full_v_columns(const PdgStructure& pdg, const Vector& x) {
    const Index m1 = static_cast<Index>(pdg.f_atoms.size()) - 1;
    const Index m2 = static_cast<Index>(pdg.phi_atoms.size());
    Matrix cols(pdg.dim(), m1 + m2);
    const Vector g0 = grad(pdg.f_atoms[0], x);
    for (Index i = 1; i <= m1; ++i) cols.col(i - 1) = grad(pdg.f_atoms[i], x) - g0;
    for (Index j = 0; j < m2; ++j) cols.col(m1 + j) = grad(pdg.phi_atoms[j], x);
    return cols;
}

// Reduced raw V columns per k_f / k_phi.
inline Matrix reduced_v_columns(const PdgStructure& pdg, const Vector& x) {
    Matrix cols(pdg.dim(), static_cast<Index>(pdg.k_f.size()) - 1 +
                               static_cast<Index>(pdg.k_phi.size()));
    const Vector g0 = grad(pdg.f_atoms[0], x);
    Index at = 0;
    for (Index i : pdg.k_f)
        if (i != 0) cols.col(at++) = grad(pdg.f_atoms[i], x) - g0;
    for (Index j : pdg.k_phi) cols.col(at++) = grad(pdg.phi_atoms[j], x);
    return cols;
}

inline Index numerical_rank(const Matrix& m, double rank_tol) {
    if (m.cols() == 0 || m.rows() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& sv = svd.singularValues();
    const double cut = resolve_rank_tol(rank_tol, m.rows(), m.cols(), sv(0));
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) ++rank;
    return rank;
}

} // namespace detail

/// VU decomposition of a subdifferential model: V = span(generators - ri),
/// U = orthogonal complement.
inline VuPair decompose(const SubdifferentialModel& model, double rank_tol = kAutoRankTol) {
    OrthonormalBasis v = orthonormal_range(minkowski_difference_span(model), rank_tol);
    OrthonormalBasis u = orthonormal_complement(v);
    Matrix raw = v.cols;
    return make_vu_pair(std::move(u), std::move(v), std::move(raw), rank_tol);
}

struct PdgCheckEntry {
    std::string label;
    double residual = 0.0;
    bool pass = true;
};

struct PdgConsistencyReport {
    std::vector<PdgCheckEntry> entries;
    bool all_pass = true;
    double tol = tol::consistency_default;
};

/// Diagnostic: |f_i(x) - f_value| and |phi_j(x)| over the FULL index sets.
inline PdgConsistencyReport check_pdg_consistency(const PdgStructure& pdg, const Vector& x,
                                                  double f_value,
                                                  double tol = tol::consistency_default) {
    PdgConsistencyReport rep;
    rep.tol = tol;
    for (size_t i = 0; i < pdg.f_atoms.size(); ++i) {
        PdgCheckEntry e;
        e.label = "f[" + std::to_string(i) + "]";
        e.residual = std::abs(eval(pdg.f_atoms[i], x) - f_value);
        e.pass = e.residual <= tol;
        rep.all_pass = rep.all_pass && e.pass;
        rep.entries.push_back(std::move(e));
    }
    for (size_t j = 0; j < pdg.phi_atoms.size(); ++j) {
        PdgCheckEntry e;
        e.label = "phi[" + std::to_string(j) + "]";
        e.residual = std::abs(eval(pdg.phi_atoms[j], x));
        e.pass = e.residual <= tol;
        rep.all_pass = rep.all_pass && e.pass;
        rep.entries.push_back(std::move(e));
    }
    return rep;
}

/// VU decomposition from the primal structure's reduced raw columns. Requires
/// structure consistency at x, reduced-column independence, and that the
/// reduced columns span the same space as the full set.
inline VuPair decompose_pdg(const PdgStructure& pdg_in, const Vector& x,
                            double rank_tol = kAutoRankTol,
                            double consistency_tol = tol::consistency_default) {
    const PdgStructure pdg = normalized(pdg_in);
    if (x.size() != pdg.dim()) throw DimensionMismatch("decompose_pdg: wrong point dimension");
    const PdgConsistencyReport rep =
        check_pdg_consistency(pdg, x, eval(pdg.f_atoms[0], x), consistency_tol);
    if (!rep.all_pass) {
        double worst = 0.0;
        std::string label;
        for (const auto& e : rep.entries)
            if (!e.pass && e.residual >= worst) {
                worst = e.residual;
                label = e.label;
            }
        throw PdgInconsistent("decompose_pdg: structure inconsistent at the point (worst " +
                              label + ", residual " + std::to_string(worst) + ")");
    }

    const Matrix reduced = detail::reduced_v_columns(pdg, x);
    const Index red_rank = detail::numerical_rank(reduced, rank_tol);
    if (red_rank < reduced.cols())
        throw RankDeficientVBar("decompose_pdg: reduced V columns are dependent (rank " +
                                std::to_string(red_rank) + " of " +
                                std::to_string(reduced.cols()) + ")");
    const Matrix full = detail::full_v_columns(pdg, x);
    if (detail::numerical_rank(full, rank_tol) != red_rank)
        throw PdgInconsistent("decompose_pdg: reduced index sets do not span the full V space");

    OrthonormalBasis v = orthonormal_range(reduced, rank_tol);
    OrthonormalBasis u = orthonormal_complement(v);
    return make_vu_pair(std::move(u), std::move(v), reduced, rank_tol);
}

struct StrongTransversalityReport {
    bool holds = false;
    Matrix vbar; // full-set raw columns
    Index rank = 0;
    Index columns = 0;
    // Heuristic greedy suggestion of an independent column subset (labelled as
    // such in CLI reports; never applied automatically).
    std::vector<Index> suggested_k_f;
    std::vector<Index> suggested_k_phi;
};

/// Full-set independence check: holds iff the raw V columns over ALL indices
/// have full column rank at the given tolerance.
inline StrongTransversalityReport strong_transversality(const PdgStructure& pdg_in,
                                                        const Vector& x,
                                                        double rank_tol = kAutoRankTol) {
    const PdgStructure pdg = normalized(pdg_in);
    if (x.size() != pdg.dim())
        throw DimensionMismatch("strong_transversality: wrong point dimension");
    StrongTransversalityReport rep;
    rep.vbar = detail::full_v_columns(pdg, x);
    rep.columns = rep.vbar.cols();
    rep.rank = detail::numerical_rank(rep.vbar, rank_tol);
    rep.holds = rep.rank == rep.columns;

    rep.suggested_k_f.push_back(0);
    if (rep.columns > 0 && rep.rank > 0) {
        // Greedy pivot order from column-pivoted QR; first `rank` pivots form
        // an independent subset.
        Eigen::ColPivHouseholderQR<Matrix> qr(rep.vbar);
        const auto& perm = qr.colsPermutation().indices();
        std::vector<Index> picked;
        for (Index k = 0; k < rep.rank; ++k) picked.push_back(perm(k));
        std::sort(picked.begin(), picked.end());
        const Index m1 = static_cast<Index>(pdg.f_atoms.size()) - 1;
        for (Index c : picked) {
            if (c < m1) rep.suggested_k_f.push_back(c + 1);
            else rep.suggested_k_phi.push_back(c - m1);
        }
    }
    return rep;
}

/// U-gradient data for a chosen relative-interior subgradient.
struct UGradientResult {
    Vector u_gradient;            // Ubar Ubar^T gbar, ambient coordinates
    Vector u_lagrangian_gradient; // Ubar^T gbar, U coordinates
    VuPair vu;
    Vector ri_point_used;
};

inline UGradientResult u_gradient(const VuPair& vu, const Vector& gbar) {
    if (gbar.size() != vu.ambient()) throw DimensionMismatch("u_gradient: wrong dimension");
    require_finite(gbar, "u_gradient");
    UGradientResult r;
    r.u_lagrangian_gradient = vu.u_basis.cols.transpose() * gbar;
    r.u_gradient = vu.u_basis.cols * r.u_lagrangian_gradient;
    r.vu = vu;
    r.ri_point_used = gbar;
    return r;
}

} // namespace vucalc
