#pragma once

// Tracking the structure manifold in U-coordinates: for each u, solve the
// square system  f_i(chi) - f_0(chi) = 0 (i in k_f\{0}),  phi_j(chi) = 0
// (j in k_phi)  for v, where chi = xbar + Ubar u + Vbar v. Newton from v = 0.

#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "vucalc/subspace.hpp"
#include "vucalc/vu.hpp"

namespace vucalc {

struct FastTrackOptions {
    double newton_tol = tol::newton_default; // residual inf-norm target
    int max_iters = kNewtonMaxItersDefault;
    double rank_tol = kAutoRankTol;
    double consistency_tol = tol::consistency_default;
};

struct FastTrack {
    Vector xbar;
    PdgStructure pdg;
    VuPair vu; // reduced raw V columns at xbar
    FastTrackOptions opts;

    /// Decomposes the structure at xbar (validating consistency and reduced
    /// independence) and requires a nondegenerate split: dim V >= 1 and
    /// dim U >= 1.
    static FastTrack create(PdgStructure pdg_in, Vector xbar, FastTrackOptions opts = {}) {
        PdgStructure pdg = normalized(std::move(pdg_in));
        FastTrack ft;
        ft.vu = decompose_pdg(pdg, xbar, opts.rank_tol, opts.consistency_tol);
        if (ft.vu.dim_v() < 1)
            throw ValidationError("fast-track requires dim V >= 1 (structure is smooth here)");
        if (ft.vu.dim_u() < 1)
            throw ValidationError("fast-track requires dim U >= 1 (no smooth directions)");
        ft.xbar = std::move(xbar);
        ft.pdg = std::move(pdg);
        ft.opts = opts;
        return ft;
    }
};

struct TrackPoint {
    Vector u;        // U coordinates
    Vector v;        // V coordinates (relative to the raw columns)
    Vector chi;      // xbar + Ubar u + Vbar v
    int newton_iters = 0;
    double residual_norm = 0.0;
};

namespace detail {

inline Vector track_residual(const FastTrack& ft, const Vector& chi) {
    Vector r(ft.vu.dim_v());
    Index at = 0;
    const double f0 = eval(ft.pdg.f_atoms[0], chi);
    for (Index i : ft.pdg.k_f)
        if (i != 0) r(at++) = eval(ft.pdg.f_atoms[i], chi) - f0;
    for (Index j : ft.pdg.k_phi) r(at++) = eval(ft.pdg.phi_atoms[j], chi);
    return r;
}

} // namespace detail

/// Reduced raw V columns evaluated along the track (gradient differences and
/// constraint gradients at chi).
inline Matrix v_basis_along(const FastTrack& ft, const TrackPoint& tp) {
    return detail::reduced_v_columns(ft.pdg, tp.chi);
}

/// Newton solve for v at the given u. v_start warm-starts continuation along
/// a ray; by default the iteration starts at v = 0.
inline TrackPoint solve_track(const FastTrack& ft, const Vector& u, const Vector* v_start = nullptr) {
    if (u.size() != ft.vu.dim_u())
        throw DimensionMismatch("solve_track: u has length " + std::to_string(u.size()) +
                                ", expected " + std::to_string(ft.vu.dim_u()));
    require_finite(u, "solve_track");

    TrackPoint tp;
    tp.u = u;
    tp.v = v_start ? *v_start : Vector::Zero(ft.vu.dim_v());
    if (v_start && v_start->size() != ft.vu.dim_v())
        throw DimensionMismatch("solve_track: warm start has wrong dimension");

    const Vector base = ft.xbar + ft.vu.u_basis.cols * u;
    tp.chi = base + ft.vu.v_raw * tp.v;
    Vector r = detail::track_residual(ft, tp.chi);
    tp.residual_norm = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
    if (tp.residual_norm <= ft.opts.newton_tol) return tp;

    double prev = tp.residual_norm;
    int growth = 0;
    for (int iter = 1; iter <= ft.opts.max_iters; ++iter) {
        const Matrix vc = detail::reduced_v_columns(ft.pdg, tp.chi);
        const Matrix jr = vc.transpose() * ft.vu.v_raw;
        Eigen::FullPivLU<Matrix> lu(jr);
        if (!lu.isInvertible())
            throw SingularNewtonJacobian("solve_track: Newton Jacobian singular at iteration " +
                                         std::to_string(iter));
        tp.v += lu.solve(-r);
        tp.chi = base + ft.vu.v_raw * tp.v;
        r = detail::track_residual(ft, tp.chi);
        tp.residual_norm = r.cwiseAbs().maxCoeff();
        tp.newton_iters = iter;
        if (tp.residual_norm <= ft.opts.newton_tol) return tp;
        if (tp.residual_norm > prev) {
            if (++growth >= 5)
                throw NewtonDiverged("solve_track: residual grew 5 consecutive iterations (" +
                                     std::to_string(tp.residual_norm) + ")");
        } else {
            growth = 0;
        }
        prev = tp.residual_norm;
    }
    throw NewtonDiverged("solve_track: no convergence in " + std::to_string(ft.opts.max_iters) +
                         " iterations (residual " + std::to_string(tp.residual_norm) + ")");
}

/// Track derivative  Ubar - Vbar (V(u)^T Vbar)^{-1} V(u)^T Ubar  (n x dim U).
/// Reduces to Ubar exactly at u = 0.
inline Matrix track_jacobian(const FastTrack& ft, const TrackPoint& tp) {
    const Matrix vc = v_basis_along(ft, tp);
    const Matrix m = vc.transpose() * ft.vu.v_raw;
    Eigen::FullPivLU<Matrix> lu(m);
    if (!lu.isInvertible())
        throw SingularVtV("track_jacobian: V(u)^T Vbar is singular along the track");
    const Matrix x = lu.solve(vc.transpose() * ft.vu.u_basis.cols);
    return ft.vu.u_basis.cols - ft.vu.v_raw * x;
}

struct ProbeRow {
    Vector direction;
    double scale = 0.0;
    double v_norm = 0.0;        // ||v(t d)||_2
    double ratio = 0.0;         // ||v|| / t^2
    int newton_iters = 0;
    double residual_norm = 0.0; // reduced-system residual at the solution
    // Residuals of structure functions OUTSIDE the reduced index sets at
    // chi(t d); reported for information, never judged.
    double offstructure_residual = 0.0;
};

struct ProbeReport {
    std::vector<ProbeRow> rows;
    double grad_v_zero_norm = 0.0; // FD estimate of ||grad v(0)||, max-abs entry
    double fd_step = tol::fd_step_default;
};

namespace detail {

inline double offstructure_residual(const FastTrack& ft, const Vector& chi) {
    double worst = 0.0;
    const double f0 = eval(ft.pdg.f_atoms[0], chi);
    std::vector<bool> in_kf(ft.pdg.f_atoms.size(), false);
    for (Index i : ft.pdg.k_f) in_kf[static_cast<size_t>(i)] = true;
    std::vector<bool> in_kphi(ft.pdg.phi_atoms.size(), false);
    for (Index j : ft.pdg.k_phi) in_kphi[static_cast<size_t>(j)] = true;
    for (size_t i = 1; i < ft.pdg.f_atoms.size(); ++i)
        if (!in_kf[i]) worst = std::max(worst, std::abs(eval(ft.pdg.f_atoms[i], chi) - f0));
    for (size_t j = 0; j < ft.pdg.phi_atoms.size(); ++j)
        if (!in_kphi[j]) worst = std::max(worst, std::abs(eval(ft.pdg.phi_atoms[j], chi)));
    return worst;
}

} // namespace detail

/// Trace each direction across the given scales (warm-starting consecutive
/// solves), recording the quadratic-decay diagnostics, and finite-difference
/// the v-map at 0.
inline ProbeReport property_probe(const FastTrack& ft, const std::vector<Vector>& directions,
                                  const std::vector<double>& scales,
                                  double fd_step = tol::fd_step_default) {
    if (directions.empty() || scales.empty())
        throw ValidationError("property_probe: needs at least one direction and one scale");
    ProbeReport rep;
    rep.fd_step = fd_step;
    for (const auto& d : directions) {
        std::vector<double> ordered = scales;
        std::sort(ordered.begin(), ordered.end());
        Vector warm = Vector::Zero(ft.vu.dim_v());
        for (double t : ordered) {
            if (!(t > 0.0)) throw ValidationError("property_probe: scales must be positive");
            const TrackPoint tp = solve_track(ft, (t * d).eval(), &warm);
            warm = tp.v;
            ProbeRow row;
            row.direction = d;
            row.scale = t;
            row.v_norm = tp.v.norm();
            row.ratio = row.v_norm / (t * t);
            row.newton_iters = tp.newton_iters;
            row.residual_norm = tp.residual_norm;
            row.offstructure_residual = detail::offstructure_residual(ft, tp.chi);
            rep.rows.push_back(std::move(row));
        }
    }
    // Central-difference columns of grad v(0); the analytic value is 0.
    double worst = 0.0;
    for (Index k = 0; k < ft.vu.dim_u(); ++k) {
        Vector e = Vector::Zero(ft.vu.dim_u());
        e(k) = fd_step;
        const TrackPoint plus = solve_track(ft, e);
        const TrackPoint minus = solve_track(ft, (-e).eval());
        const Vector col = (plus.v - minus.v) / (2.0 * fd_step);
        if (col.size()) worst = std::max(worst, col.cwiseAbs().maxCoeff());
    }
    rep.grad_v_zero_norm = worst;
    return rep;
}

// Doubled-variable primal structure for x |-> q(x) + tau*||x||_1 at xbar.
// Variables are (r, x) in R^{2m}: one smooth selection function
//   f_0(r, x) = q(x) + tau * sum_i sign(xbar_i) * r_i,
// one vanishing constraint r_i = 0 per zero coordinate of xbar, and the tie
// constraint ||r - x||^2 = 0.  The full constraint gradients are always rank
// deficient at (xbar, xbar) (the tie constraint has zero gradient there), so
// the structure ships with reduced index sets: keep f_0 and the per-coordinate
// constraints, drop the tie.
struct L1Structure {
    PdgStructure pdg;
    Vector xbar_doubled;
    std::vector<Index> zero_coords;
};

inline L1Structure l1_regularized_structure(const QuadraticAtom& q, double tau,
                                            const Vector& xbar,
                                            double zero_tol = tol::zero_default) {
    const Index m = xbar.size();
    check_dim(q, xbar, "l1_regularized_structure");
    require_finite(xbar, "xbar");
    if (!(tau >= 0.0) || !std::isfinite(tau))
        throw ValidationError("l1_regularized_structure: tau must be finite and >= 0");
    L1Structure out;
    const Index d = 2 * m;

    QuadraticAtom f0 = QuadraticAtom::zero(d);
    f0.A.block(m, m, m, m) = q.A;
    f0.c = q.c;
    for (Index i = 0; i < m; ++i) {
        f0.b(m + i) = q.b(i);
        const double s = std::abs(xbar(i)) <= zero_tol ? 0.0 : (xbar(i) > 0.0 ? 1.0 : -1.0);
        f0.b(i) = tau * s;
        if (s == 0.0) out.zero_coords.push_back(i);
    }
    out.pdg.f_atoms.push_back(std::move(f0));

    for (Index i : out.zero_coords) {
        QuadraticAtom phi = QuadraticAtom::zero(d);
        phi.b(i) = 1.0;
        out.pdg.phi_atoms.push_back(std::move(phi));
    }
    QuadraticAtom tie = QuadraticAtom::zero(d);
    for (Index i = 0; i < m; ++i) {
        tie.A(i, i) = 2.0;
        tie.A(m + i, m + i) = 2.0;
        tie.A(i, m + i) = -2.0;
        tie.A(m + i, i) = -2.0;
    }
    out.pdg.phi_atoms.push_back(std::move(tie));

    out.pdg.k_f = {0};
    out.pdg.k_phi.resize(out.zero_coords.size());
    std::iota(out.pdg.k_phi.begin(), out.pdg.k_phi.end(), Index{0});

    out.xbar_doubled.resize(d);
    out.xbar_doubled.head(m) = xbar;
    out.xbar_doubled.tail(m) = xbar;
    return out;
}

} // namespace vucalc
