#pragma once

// Calculus for composites f = h(Phi(x)): the U/V chain rule under a
// transversality condition, plus the derived rules (smooth perturbation,
// l2 regularization, sums, separable blocks, l1 support shortcut, finite max).

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vucalc/atoms.hpp"
#include "vucalc/subdiff.hpp"
#include "vucalc/subspace.hpp"
#include "vucalc/vu.hpp"

namespace vucalc {

/// Locally smooth manifold through a point, stored as orthonormal bases of its
/// normal and tangent spaces there.
struct ManifoldModel {
    Index ambient_dim = 0;
    OrthonormalBasis normal_basis;
    OrthonormalBasis tangent_basis;

    static ManifoldModel from_normal_basis(OrthonormalBasis n) {
        ManifoldModel m;
        m.ambient_dim = n.ambient_dim;
        m.tangent_basis = orthonormal_complement(n);
        m.normal_basis = std::move(n);
        return m;
    }

    static ManifoldModel from_tangent_basis(OrthonormalBasis t) {
        ManifoldModel m;
        m.ambient_dim = t.ambient_dim;
        m.normal_basis = orthonormal_complement(t);
        m.tangent_basis = std::move(t);
        return m;
    }

    /// Normal space given as a (possibly redundant) column list.
    static ManifoldModel from_normal_columns(const Matrix& cols, double rank_tol = kAutoRankTol) {
        return from_normal_basis(orthonormal_range(cols, rank_tol));
    }

    static ManifoldModel full_space(Index n) {
        return from_normal_basis(OrthonormalBasis::empty(n));
    }
};

struct TransversalityReport {
    bool holds = true;
    Index normal_dim = 0;
    Index rank = 0;
    double sigma_min = 0.0; // smallest singular value of J^T N
    std::optional<Vector> witness; // unit normal vector annihilated by J^T, on failure
};

/// Checks {z in N_M : J^T z = 0} = {0} by a rank test on J^T N. On failure the
/// witness is a unit normal direction with J^T z below the rank tolerance.
inline TransversalityReport transversality_check(const Matrix& j, const ManifoldModel& m,
                                                 double rank_tol = kAutoRankTol) {
    require_finite(j, "transversality_check");
    if (j.rows() != m.ambient_dim)
        throw DimensionMismatch("transversality_check: Jacobian rows (" +
                                std::to_string(j.rows()) + ") != manifold ambient (" +
                                std::to_string(m.ambient_dim) + ")");
    TransversalityReport rep;
    rep.normal_dim = m.normal_basis.dim();
    if (rep.normal_dim == 0) return rep; // nothing to annihilate

    const Matrix t = j.transpose() * m.normal_basis.cols; // (domain) x (normal_dim)
    Eigen::JacobiSVD<Matrix> svd(t, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cut = resolve_rank_tol(rank_tol, t.rows(), t.cols(), sv(0));
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) ++rep.rank;
    // Singular values beyond min(rows,cols) are implicitly zero.
    rep.sigma_min = sv.size() >= rep.normal_dim ? sv(rep.normal_dim - 1) : 0.0;
    rep.holds = rep.rank == rep.normal_dim;
    if (!rep.holds) {
        // Kernel direction: last column of the full V factor (right singular
        // vector of the smallest -- possibly implicit zero -- singular value).
        Vector w = svd.matrixV().col(svd.matrixV().cols() - 1);
        Vector z = m.normal_basis.cols * w;
        if (z.cwiseAbs().maxCoeff() > 0) {
            for (Index i = 0; i < z.size(); ++i) // deterministic sign, same rule as bases
                if (std::abs(z(i)) > 1e-12) {
                    if (z(i) < 0) z = -z;
                    break;
                }
        }
        rep.witness = std::move(z);
    }
    return rep;
}

struct NondegeneracyReport {
    bool holds = false;
    std::string reason;
    std::optional<TransversalityReport> delegated;
};

/// A trivial horizon subdifferential makes the composition nondegenerate
/// outright; otherwise the question reduces to transversality of the attached
/// manifold (indicator-type outer functions).
inline NondegeneracyReport nondegeneracy_check(const SubdifferentialModel& model, const Matrix& j,
                                               const std::optional<ManifoldModel>& manifold = {},
                                               double rank_tol = kAutoRankTol) {
    NondegeneracyReport rep;
    if (model.horizon_trivial) {
        rep.holds = true;
        rep.reason = "horizon subdifferential is {0}";
        return rep;
    }
    if (!manifold)
        throw MissingHorizonInfo("nondegeneracy_check: nontrivial horizon requires a manifold "
                                 "model of the outer function's domain structure");
    rep.delegated = transversality_check(j, *manifold, rank_tol);
    rep.holds = rep.delegated->holds;
    rep.reason = rep.holds ? "reduces to transversality, which holds"
                           : "reduces to transversality, which fails";
    return rep;
}

/// Chain-rule output for a composite f = h(Phi(x)) at a point.
struct ChainResult {
    OrthonormalBasis u_basis;     // smooth subspace of the composite, in domain space
    Vector u_gradient;            // Ubar Ubar^T Jphi^T gbar, domain coordinates
    Vector u_lagrangian_gradient; // Ubar^T Jphi^T gbar, U coordinates
    Vector gbar_pushed;           // Jphi^T gbar
    // Exact generator model of the composite subdifferential; absent when the
    // generator budget forced a structured path.
    std::optional<SubdifferentialModel> pushforward_model;
    bool transversality_verified = true;
};

/// The chain rule: U = {d : d^T J^T (g - gbar) = 0 for all generators g},
/// gradient data from the pushed relative-interior point. Refuses without
/// transversality unless force is set, in which case the result is flagged
/// unverified.
inline ChainResult compose_vu(const SubdifferentialModel& model, const Matrix& j,
                              const ManifoldModel& manifold, bool force = false,
                              double rank_tol = kAutoRankTol) {
    if (j.rows() != model.ambient_dim)
        throw DimensionMismatch("compose_vu: Jacobian rows != model ambient dimension");
    const TransversalityReport tr = transversality_check(j, manifold, rank_tol);
    if (!tr.holds && !force) {
        std::string msg = "compose_vu: transversality fails (rank " + std::to_string(tr.rank) +
                          " of " + std::to_string(tr.normal_dim) + ")";
        throw TransversalityViolated(msg);
    }
    const SubdifferentialModel pushed = pushforward(model, j);
    const VuPair vu = decompose(pushed, rank_tol);

    ChainResult res;
    res.u_basis = vu.u_basis;
    res.gbar_pushed = pushed.ri_point;
    res.u_lagrangian_gradient = res.u_basis.cols.transpose() * pushed.ri_point;
    res.u_gradient = res.u_basis.cols * res.u_lagrangian_gradient;
    res.pushforward_model = pushed;
    res.transversality_verified = tr.holds;
    return res;
}

/// Adding a C^1 term q leaves U untouched and shifts the gradient data by the
/// U-projection of grad q. The returned basis is the input basis, unchanged.
inline UGradientResult smooth_perturbation(const UGradientResult& p_result, const Vector& grad_q) {
    if (grad_q.size() != p_result.vu.ambient())
        throw DimensionMismatch("smooth_perturbation: gradient dimension mismatch");
    require_finite(grad_q, "smooth_perturbation");
    UGradientResult r = p_result;
    const Vector shift_u = r.vu.u_basis.cols.transpose() * grad_q;
    r.u_lagrangian_gradient += shift_u;
    r.u_gradient += r.vu.u_basis.cols * shift_u;
    r.ri_point_used += grad_q;
    return r;
}

/// Special case q = (lambda/2)||x||^2, grad q = lambda * xbar.
inline UGradientResult l2_regularize(const UGradientResult& p_result, double lambda,
                                     const Vector& xbar) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ValidationError("l2_regularize: lambda must be nonnegative");
    return smooth_perturbation(p_result, lambda * xbar);
}

struct SumConditionReport {
    bool holds = true;
    Index stacked_rank = 0;
    Index dim_sum = 0;
};

/// Direct-sum test: normals can only sum to zero trivially iff the stacked
/// normal bases have full column rank.
inline SumConditionReport sum_condition_check(const std::vector<ManifoldModel>& manifolds,
                                              double rank_tol = kAutoRankTol) {
    if (manifolds.empty()) throw ValidationError("sum_condition_check: empty input");
    const Index n = manifolds.front().ambient_dim;
    Index total = 0;
    for (const auto& m : manifolds) {
        if (m.ambient_dim != n)
            throw DimensionMismatch("sum_condition_check: mixed ambient dimensions");
        total += m.normal_basis.dim();
    }
    Matrix stacked(n, total);
    Index at = 0;
    for (const auto& m : manifolds) {
        stacked.middleCols(at, m.normal_basis.dim()) = m.normal_basis.cols;
        at += m.normal_basis.dim();
    }
    SumConditionReport rep;
    rep.dim_sum = total;
    rep.stacked_rank = detail::numerical_rank(stacked, rank_tol);
    rep.holds = rep.stacked_rank == rep.dim_sum;
    return rep;
}

/// One summand of f = sum f_i, everything already expressed in the common
/// domain space: subdifferential model of f_i at xbar, its structure manifold
/// there, and its VU pair.
struct Summand {
    SubdifferentialModel model;
    ManifoldModel manifold;
    VuPair vu;
};

/// Sum rule: U = intersection of the summand U spaces, gradient from the sum
/// of the relative-interior points. Requires the direct-sum condition on the
/// summand normals.
inline ChainResult sum_rule(const std::vector<Summand>& summands,
                            double rank_tol = kAutoRankTol) {
    if (summands.empty()) throw ValidationError("sum_rule: empty input");
    const Index n = summands.front().vu.ambient();
    std::vector<ManifoldModel> manifolds;
    std::vector<OrthonormalBasis> u_bases;
    for (const auto& s : summands) {
        if (s.vu.ambient() != n || s.model.ambient_dim != n || s.manifold.ambient_dim != n)
            throw DimensionMismatch("sum_rule: mixed ambient dimensions");
        manifolds.push_back(s.manifold);
        u_bases.push_back(s.vu.u_basis);
    }
    const SumConditionReport cond = sum_condition_check(manifolds, rank_tol);
    if (!cond.holds)
        throw SumRuleConditionViolated("sum_rule: normals admit a nontrivial zero sum (stacked "
                                       "rank " + std::to_string(cond.stacked_rank) + " of " +
                                       std::to_string(cond.dim_sum) + ")");

    ChainResult res;
    res.u_basis = intersect_subspaces(u_bases, rank_tol);
    Vector gbar = Vector::Zero(n);
    for (const auto& s : summands) gbar += s.model.ri_point;
    res.gbar_pushed = gbar;
    res.u_lagrangian_gradient = res.u_basis.cols.transpose() * gbar;
    res.u_gradient = res.u_basis.cols * res.u_lagrangian_gradient;
    std::vector<SubdifferentialModel> models;
    for (const auto& s : summands) models.push_back(s.model);
    try {
        res.pushforward_model = minkowski_sum(models);
    } catch (const GeneratorBudgetExceeded&) {
        res.pushforward_model.reset();
    }
    return res;
}

/// Separable sum over independent variable blocks: block-diagonal U, stacked
/// gradients.
inline ChainResult separable_sum(const std::vector<ChainResult>& blocks) {
    if (blocks.empty()) throw ValidationError("separable_sum: empty input");
    Index n = 0, u_total = 0;
    for (const auto& b : blocks) {
        n += b.u_basis.ambient_dim;
        u_total += b.u_basis.dim();
    }
    ChainResult res;
    Matrix u = Matrix::Zero(n, u_total);
    Vector grad = Vector::Zero(n), gbar = Vector::Zero(n), lag(u_total);
    Index row = 0, col = 0, lag_at = 0;
    bool verified = true;
    for (const auto& b : blocks) {
        const Index bn = b.u_basis.ambient_dim, bu = b.u_basis.dim();
        u.block(row, col, bn, bu) = b.u_basis.cols;
        grad.segment(row, bn) = b.u_gradient;
        gbar.segment(row, bn) = b.gbar_pushed;
        lag.segment(lag_at, bu) = b.u_lagrangian_gradient;
        verified = verified && b.transversality_verified;
        row += bn;
        col += bu;
        lag_at += bu;
    }
    res.u_basis = OrthonormalBasis::from_columns(std::move(u));
    res.u_gradient = std::move(grad);
    res.gbar_pushed = std::move(gbar);
    res.u_lagrangian_gradient = std::move(lag);
    res.transversality_verified = verified;

    // Composite generators are block concatenations; enumerate within budget.
    long long prod = 1;
    bool fits = true;
    for (const auto& b : blocks) {
        if (!b.pushforward_model) { fits = false; break; }
        prod *= b.pushforward_model->count();
        if (prod > kGeneratorBudget) { fits = false; break; }
    }
    if (fits) {
        std::vector<Vector> gens{Vector(0)};
        for (const auto& b : blocks) {
            std::vector<Vector> next;
            for (const auto& acc : gens)
                for (const auto& g : b.pushforward_model->generators) {
                    Vector v(acc.size() + g.size());
                    v << acc, g;
                    next.push_back(std::move(v));
                }
            gens = std::move(next);
        }
        res.pushforward_model =
            SubdifferentialModel::with_ri_point(std::move(gens), res.gbar_pushed);
    }
    return res;
}

/// Structured rule for f(x) + tau*||x||_1: U is spanned by the coordinate
/// directions of the support of xbar, and the gradient data comes from
/// grad f(xbar) + tau*sgn(xbar) (sign 0 on the zero set). Never enumerates
/// sign vertices for the subspace math.
inline ChainResult l1_compose(const QuadraticAtom& f_smooth, double tau, const Vector& xbar,
                              double zero_tol = tol::zero_default) {
    if (!(tau > 0.0) || !std::isfinite(tau))
        throw ValidationError("l1_compose: tau must be positive");
    if (!(zero_tol > 0.0)) throw ValidationError("l1_compose: zero_tol must be positive");
    check_dim(f_smooth, xbar, "l1_compose");
    require_finite(xbar, "l1_compose");
    const Index n = xbar.size();

    std::vector<Index> support;
    Vector sgn = Vector::Zero(n);
    for (Index i = 0; i < n; ++i)
        if (std::abs(xbar(i)) > zero_tol) {
            support.push_back(i);
            sgn(i) = xbar(i) > 0 ? 1.0 : -1.0;
        }

    Matrix u(n, static_cast<Index>(support.size()));
    u.setZero();
    for (size_t k = 0; k < support.size(); ++k) u(support[k], static_cast<Index>(k)) = 1.0;

    ChainResult res;
    res.u_basis = OrthonormalBasis::from_columns(std::move(u));
    res.gbar_pushed = grad(f_smooth, xbar) + tau * sgn;
    res.u_lagrangian_gradient = res.u_basis.cols.transpose() * res.gbar_pushed;
    res.u_gradient = res.u_basis.cols * res.u_lagrangian_gradient;
    res.transversality_verified = true;

    const Index zeros = n - static_cast<Index>(support.size());
    if (zeros < 63 && (Index{1} << zeros) <= kGeneratorBudget) {
        const Vector gf = grad(f_smooth, xbar);
        SubdifferentialModel l1 = subdifferential(NonsmoothAtom::l1_norm(tau, zero_tol), xbar);
        std::vector<Vector> gens;
        gens.reserve(l1.generators.size());
        for (const auto& g : l1.generators) gens.push_back(gf + g);
        res.pushforward_model =
            SubdifferentialModel::with_ri_point(std::move(gens), res.gbar_pushed);
    }
    return res;
}

/// f(x) = max_i Phi_i(x) via the chain rule. Requires the active gradients to
/// be affinely independent; the outer structure manifold is the equal-value
/// set of the active coordinates.
inline ChainResult finite_max_compose(const SmoothMap& phi, const Vector& xbar,
                                      double active_tol = tol::active_default,
                                      bool force = false, double rank_tol = kAutoRankTol) {
    if (phi.range_dim() == 0) throw ValidationError("finite_max_compose: empty map");
    const Vector z = eval(phi, xbar);
    const NonsmoothAtom atom = NonsmoothAtom::coordinate_max(active_tol);
    const std::vector<Index> act = active_set(atom, z);
    const Matrix j = jacobian(phi, xbar);

    // Affine independence of the active gradients == linear independence of
    // their differences against the first active one.
    const Index a = static_cast<Index>(act.size());
    Matrix diffs(phi.domain_dim, a - 1);
    const Vector g0 = j.row(act[0]).transpose();
    for (Index k = 1; k < a; ++k) diffs.col(k - 1) = j.row(act[k]).transpose() - g0;
    if (detail::numerical_rank(diffs, rank_tol) != a - 1)
        throw AffineDependence("finite_max_compose: active gradients are affinely dependent (" +
                               std::to_string(a) + " active)");

    // Outer manifold: coordinates of the active set agree.
    Matrix normal_cols(phi.range_dim(), a - 1);
    normal_cols.setZero();
    for (Index k = 1; k < a; ++k) {
        normal_cols(act[k], k - 1) = 1.0;
        normal_cols(act[0], k - 1) = -1.0;
    }
    const ManifoldModel manifold = ManifoldModel::from_normal_columns(normal_cols, rank_tol);
    return compose_vu(subdifferential(atom, z), j, manifold, force, rank_tol);
}

} // namespace vucalc
