#pragma once

// Polytope models of convex subdifferentials: an explicit generator list
// (vertices), a relative-interior point, and a horizon flag. Operations are
// exact on the generator representation; anything that would enumerate more
// than kGeneratorBudget generators refuses, signalling callers to switch to a
// structured path.

#include <string>
#include <utility>
#include <vector>

#include "vucalc/dense.hpp"

namespace vucalc {

struct SubdifferentialModel {
    Index ambient_dim = 0;
    std::vector<Vector> generators; // convex hull = the modelled subdifferential
    Vector ri_point;                // a point in the relative interior of that hull
    bool horizon_trivial = true;    // horizon subdifferential == {0}

    Index count() const { return static_cast<Index>(generators.size()); }

    /// Canonical model: ri_point is the generator barycenter.
    static SubdifferentialModel from_generators(std::vector<Vector> gens,
                                                bool horizon_trivial = true) {
        SubdifferentialModel m = validate(std::move(gens), horizon_trivial);
        Vector bary = Vector::Zero(m.ambient_dim);
        for (const auto& g : m.generators) bary += g;
        m.ri_point = bary / static_cast<double>(m.generators.size());
        return m;
    }

    /// Model with a caller-chosen relative-interior point (e.g. a strictly
    /// positive convex combination other than the barycenter). The caller
    /// asserts membership in the relative interior.
    static SubdifferentialModel with_ri_point(std::vector<Vector> gens, Vector ri,
                                              bool horizon_trivial = true) {
        SubdifferentialModel m = validate(std::move(gens), horizon_trivial);
        require_finite(ri, "SubdifferentialModel.ri_point");
        if (ri.size() != m.ambient_dim)
            throw DimensionMismatch("SubdifferentialModel: ri_point dimension mismatch");
        m.ri_point = std::move(ri);
        return m;
    }

  private:
    static SubdifferentialModel validate(std::vector<Vector> gens, bool horizon_trivial) {
        if (gens.empty())
            throw ValidationError("SubdifferentialModel: needs at least one generator");
        SubdifferentialModel m;
        m.ambient_dim = gens.front().size();
        for (const auto& g : gens) {
            require_finite(g, "SubdifferentialModel.generator");
            if (g.size() != m.ambient_dim)
                throw DimensionMismatch("SubdifferentialModel: generators of mixed dimension");
        }
        m.generators = std::move(gens);
        m.horizon_trivial = horizon_trivial;
        return m;
    }
};

/// Outer convex functions with closed-form subdifferentials.
enum class OuterKind { coordinate_max, l1_norm, abs_value, smooth_linear };

struct NonsmoothAtom {
    OuterKind kind = OuterKind::coordinate_max;
    double tau = 1.0;  // scale for l1_norm / abs_value
    Vector w;          // coefficients for smooth_linear
    double active_tol = tol::active_default;

    /// h(y) = max_i y_i. Activity rule: max(y) - y_i <= active_tol*(1+|max(y)|).
    static NonsmoothAtom coordinate_max(double active_tol = tol::active_default) {
        NonsmoothAtom a;
        a.kind = OuterKind::coordinate_max;
        a.active_tol = require_pos(active_tol, "active_tol");
        return a;
    }

    /// h(y) = tau * ||y||_1. Coordinates with |y_i| <= zero_tol count as kinks.
    static NonsmoothAtom l1_norm(double tau, double zero_tol = tol::zero_default) {
        NonsmoothAtom a;
        a.kind = OuterKind::l1_norm;
        a.tau = require_pos(tau, "tau");
        a.active_tol = require_pos(zero_tol, "zero_tol");
        return a;
    }

    /// h(y) = tau * |y| on R^1.
    static NonsmoothAtom abs_value(double tau, double zero_tol = tol::zero_default) {
        NonsmoothAtom a = l1_norm(tau, zero_tol);
        a.kind = OuterKind::abs_value;
        return a;
    }

    /// h(y) = w^T y (smooth; singleton subdifferential).
    static NonsmoothAtom smooth_linear(Vector w) {
        require_finite(w, "smooth_linear.w");
        NonsmoothAtom a;
        a.kind = OuterKind::smooth_linear;
        a.w = std::move(w);
        return a;
    }

  private:
    static double require_pos(double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw ValidationError(std::string("NonsmoothAtom: ") + name + " must be positive");
        return v;
    }
};

inline double eval(const NonsmoothAtom& atom, const Vector& y) {
    require_finite(y, "eval(NonsmoothAtom)");
    switch (atom.kind) {
        case OuterKind::coordinate_max:
            if (y.size() == 0) throw DimensionMismatch("coordinate_max: empty argument");
            return y.maxCoeff();
        case OuterKind::l1_norm:
            return atom.tau * y.lpNorm<1>();
        case OuterKind::abs_value:
            if (y.size() != 1) throw DimensionMismatch("abs_value: expects dimension 1");
            return atom.tau * std::abs(y(0));
        case OuterKind::smooth_linear:
            if (y.size() != atom.w.size())
                throw DimensionMismatch("smooth_linear: dimension mismatch");
            return atom.w.dot(y);
    }
    throw Error("eval(NonsmoothAtom): unreachable");
}

/// Kink-activity indices. For coordinate_max: the near-argmax set. For
/// l1_norm/abs_value: coordinates within zero tolerance. Empty for
/// smooth_linear.
inline std::vector<Index> active_set(const NonsmoothAtom& atom, const Vector& y) {
    require_finite(y, "active_set");
    std::vector<Index> act;
    switch (atom.kind) {
        case OuterKind::coordinate_max: {
            if (y.size() == 0) throw DimensionMismatch("active_set: empty argument");
            const double top = y.maxCoeff();
            const double cut = atom.active_tol * (1.0 + std::abs(top));
            for (Index i = 0; i < y.size(); ++i)
                if (top - y(i) <= cut) act.push_back(i);
            break;
        }
        case OuterKind::l1_norm:
        case OuterKind::abs_value:
            for (Index i = 0; i < y.size(); ++i)
                if (std::abs(y(i)) <= atom.active_tol) act.push_back(i);
            break;
        case OuterKind::smooth_linear:
            break;
    }
    return act;
}

/// Exact subdifferential of the atom at z as a generator model. l1-type atoms
/// enumerate the 2^(#zeros) sign vertices and refuse beyond the generator
/// budget.
inline SubdifferentialModel subdifferential(const NonsmoothAtom& atom, const Vector& z) {
    require_finite(z, "subdifferential");
    const Index n = z.size();
    switch (atom.kind) {
        case OuterKind::coordinate_max: {
            std::vector<Index> act = active_set(atom, z);
            std::vector<Vector> gens;
            gens.reserve(act.size());
            for (Index i : act) {
                Vector e = Vector::Zero(n);
                e(i) = 1.0;
                gens.push_back(std::move(e));
            }
            return SubdifferentialModel::from_generators(std::move(gens));
        }
        case OuterKind::abs_value:
            if (n != 1) throw DimensionMismatch("abs_value: expects dimension 1");
            [[fallthrough]];
        case OuterKind::l1_norm: {
            std::vector<Index> zeros = active_set(atom, z);
            const Index nz = static_cast<Index>(zeros.size());
            if (nz >= 63 || (Index{1} << nz) > kGeneratorBudget)
                throw GeneratorBudgetExceeded(
                    "subdifferential: 2^" + std::to_string(nz) + " l1 vertices exceed budget " +
                    std::to_string(kGeneratorBudget));
            Vector base(n);
            for (Index i = 0; i < n; ++i)
                base(i) = std::abs(z(i)) <= atom.active_tol ? 0.0 : (z(i) > 0 ? atom.tau : -atom.tau);
            std::vector<Vector> gens;
            gens.reserve(static_cast<size_t>(Index{1} << nz));
            for (Index pattern = 0; pattern < (Index{1} << nz); ++pattern) {
                Vector g = base;
                for (Index k = 0; k < nz; ++k)
                    g(zeros[k]) = (pattern >> k) & 1 ? -atom.tau : atom.tau;
                gens.push_back(std::move(g));
            }
            return SubdifferentialModel::from_generators(std::move(gens));
        }
        case OuterKind::smooth_linear: {
            if (z.size() != atom.w.size())
                throw DimensionMismatch("smooth_linear: dimension mismatch");
            return SubdifferentialModel::from_generators({atom.w});
        }
    }
    throw Error("subdifferential: unreachable");
}

/// Columns g_j - ri_point, one per generator. A singleton model yields a
/// single zero column (smooth point, span {0}).
inline Matrix minkowski_difference_span(const SubdifferentialModel& model) {
    Matrix d(model.ambient_dim, model.count());
    for (Index j = 0; j < model.count(); ++j) d.col(j) = model.generators[j] - model.ri_point;
    return d;
}

/// Image of the model under g -> J^T g (J = inner-map Jacobian, rows in the
/// model's space). Result lives in R^(J.cols()).
inline SubdifferentialModel pushforward(const SubdifferentialModel& model, const Matrix& j) {
    require_finite(j, "pushforward");
    if (j.rows() != model.ambient_dim)
        throw DimensionMismatch("pushforward: Jacobian has " + std::to_string(j.rows()) +
                                " rows, model lives in dimension " +
                                std::to_string(model.ambient_dim));
    std::vector<Vector> gens;
    gens.reserve(model.generators.size());
    for (const auto& g : model.generators) gens.push_back(j.transpose() * g);
    return SubdifferentialModel::with_ri_point(std::move(gens), j.transpose() * model.ri_point,
                                               model.horizon_trivial);
}

/// Exact Minkowski sum by generator enumeration. Refuses when the product of
/// generator counts exceeds the budget.
inline SubdifferentialModel minkowski_sum(const std::vector<SubdifferentialModel>& models) {
    if (models.empty()) throw ValidationError("minkowski_sum: empty input");
    const Index n = models.front().ambient_dim;
    long long total = 1;
    for (const auto& m : models) {
        if (m.ambient_dim != n)
            throw DimensionMismatch("minkowski_sum: mixed ambient dimensions");
        total *= m.count();
        if (total > kGeneratorBudget)
            throw GeneratorBudgetExceeded("minkowski_sum: generator product exceeds budget " +
                                          std::to_string(kGeneratorBudget));
    }
    std::vector<Vector> gens{Vector::Zero(n)};
    for (const auto& m : models) {
        std::vector<Vector> next;
        next.reserve(gens.size() * m.generators.size());
        for (const auto& acc : gens)
            for (const auto& g : m.generators) next.push_back(acc + g);
        gens = std::move(next);
    }
    Vector ri = Vector::Zero(n);
    bool horizon = true;
    for (const auto& m : models) {
        ri += m.ri_point;
        horizon = horizon && m.horizon_trivial;
    }
    return SubdifferentialModel::with_ri_point(std::move(gens), std::move(ri), horizon);
}

} // namespace vucalc
