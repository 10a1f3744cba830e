#pragma once

// Independent checks: finite-difference U-Lagrangian gradients through the
// Newton track (or the trivial v == 0 track where that selection is exact),
// sampled subdifferentials from a gradient oracle, and principal-angle
// distances between subspaces.

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vucalc/fast_track.hpp"
#include "vucalc/subdiff.hpp"
#include "vucalc/subspace.hpp"
#include "vucalc/vu.hpp"

namespace vucalc {

using ScalarFn = std::function<double(const Vector&)>;
using GradientOracle = std::function<std::optional<Vector>(const Vector&)>;

/// Central-difference gradient of L(u) = f(chi(u)) - gbar^T (Vbar v(u)) at
/// u = 0, with v(u) from the Newton track. Newton failures propagate.
inline Vector fd_u_lagrangian_gradient(const ScalarFn& f, const FastTrack& ft, const Vector& gbar,
                                       double h_step = tol::fd_step_default) {
    if (gbar.size() != ft.vu.ambient())
        throw DimensionMismatch("fd_u_lagrangian_gradient: gbar dimension mismatch");
    if (!(h_step > 0.0)) throw ValidationError("fd_u_lagrangian_gradient: step must be positive");
    const auto value = [&](const Vector& u) {
        const TrackPoint tp = solve_track(ft, u);
        return f(tp.chi) - gbar.dot(ft.vu.v_raw * tp.v);
    };
    Vector g(ft.vu.dim_u());
    for (Index k = 0; k < g.size(); ++k) {
        Vector e = Vector::Zero(g.size());
        e(k) = h_step;
        g(k) = (value(e) - value(-e)) / (2.0 * h_step);
    }
    return g;
}

/// Trivial-track variant for composites whose track selection is identically
/// v = 0 (smooth functions; l1-regularized smooth functions probed along the
/// support): L(u) = f(xbar + Ubar u).
inline Vector fd_u_lagrangian_gradient(const ScalarFn& f, const Vector& xbar,
                                       const OrthonormalBasis& u_basis,
                                       double h_step = tol::fd_step_default) {
    if (xbar.size() != u_basis.ambient_dim)
        throw DimensionMismatch("fd_u_lagrangian_gradient: xbar dimension mismatch");
    if (!(h_step > 0.0)) throw ValidationError("fd_u_lagrangian_gradient: step must be positive");
    Vector g(u_basis.dim());
    for (Index k = 0; k < g.size(); ++k) {
        const Vector dir = u_basis.cols.col(k);
        g(k) = (f(xbar + h_step * dir) - f(xbar - h_step * dir)) / (2.0 * h_step);
    }
    return g;
}

/// Empirical subdifferential: gradients at n_samples points drawn uniformly
/// from the radius-ball around xbar (the oracle returns nullopt at kink
/// points, which are skipped), sorted and deduplicated at 1e-6. Fails if more
/// than 90% of the draws hit kinks.
inline SubdifferentialModel sample_subdifferential(const GradientOracle& grad_oracle,
                                                   const Vector& xbar, double radius,
                                                   int n_samples, unsigned seed) {
    if (!(radius > 0.0)) throw ValidationError("sample_subdifferential: radius must be positive");
    if (n_samples < 1) throw ValidationError("sample_subdifferential: need at least one sample");
    const Index n = xbar.size();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<Vector> grads;
    int kinks = 0;
    for (int s = 0; s < n_samples; ++s) {
        Vector dir(n);
        do {
            for (Index i = 0; i < n; ++i) dir(i) = gauss(rng);
        } while (dir.norm() == 0.0);
        dir.normalize();
        const double r = radius * std::pow(unit(rng), 1.0 / static_cast<double>(n));
        const Vector x = xbar + r * dir;
        if (auto g = grad_oracle(x)) {
            if (g->size() != n)
                throw DimensionMismatch("sample_subdifferential: oracle returned wrong dimension");
            grads.push_back(std::move(*g));
        } else {
            ++kinks;
        }
    }
    if (kinks > (9 * n_samples) / 10 || grads.empty())
        throw InsufficientSamples("sample_subdifferential: " + std::to_string(kinks) + " of " +
                                  std::to_string(n_samples) +
                                  " samples hit kinks; not enough gradients");

    // Order-independent generator list: lexicographic sort, then adjacent
    // dedup at inf-norm 1e-6.
    std::sort(grads.begin(), grads.end(), [](const Vector& a, const Vector& b) {
        for (Index i = 0; i < a.size(); ++i)
            if (a(i) != b(i)) return a(i) < b(i);
        return false;
    });
    std::vector<Vector> dedup;
    for (auto& g : grads)
        if (dedup.empty() || (g - dedup.back()).cwiseAbs().maxCoeff() > tol::dedup)
            dedup.push_back(std::move(g));
    return SubdifferentialModel::from_generators(std::move(dedup));
}

/// Reference answer for chain-rule U bases: plain VU decomposition of a
/// composite subdifferential model.
inline OrthonormalBasis brute_force_u_space(const SubdifferentialModel& model_f,
                                            double rank_tol = kAutoRankTol) {
    return decompose(model_f, rank_tol).u_basis;
}

/// Symmetric Hausdorff distance (inf-norm) between two finite generator sets.
inline double hausdorff_distance(const std::vector<Vector>& a, const std::vector<Vector>& b) {
    if (a.empty() || b.empty())
        throw ValidationError("hausdorff_distance: empty generator set");
    const auto directed = [](const std::vector<Vector>& from, const std::vector<Vector>& to) {
        double worst = 0.0;
        for (const auto& x : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& y : to) {
                if (y.size() != x.size())
                    throw DimensionMismatch("hausdorff_distance: mixed dimensions");
                best = std::min(best, (x - y).cwiseAbs().maxCoeff());
            }
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(a, b), directed(b, a));
}

/// Largest principal angle between equal-dimensional subspaces; +infinity when
/// the dimensions differ. acos of a cosine computed in floating point cannot
/// resolve angles below sqrt(eps), so small angles are recovered from the
/// sine instead (Bjorck-Golub): sin(theta_max) = ||B1 - B2 (B2^T B1)||_2.
inline double subspace_distance(const OrthonormalBasis& b1, const OrthonormalBasis& b2) {
    if (b1.ambient_dim != b2.ambient_dim)
        throw DimensionMismatch("subspace_distance: ambient dimensions differ");
    if (b1.dim() != b2.dim()) return std::numeric_limits<double>::infinity();
    if (b1.dim() == 0) return 0.0;
    const Matrix cross = b2.cols.transpose() * b1.cols;
    Eigen::JacobiSVD<Matrix> svd(cross);
    const double c = std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0);
    if (c * c < 0.5) return std::acos(c); // angle >= 45 degrees: cosine is accurate
    Eigen::JacobiSVD<Matrix> residual(b1.cols - b2.cols * cross);
    const double s = std::clamp(residual.singularValues().maxCoeff(), 0.0, 1.0);
    return std::asin(s);
}

} // namespace vucalc
