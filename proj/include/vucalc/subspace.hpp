#pragma once

// Orthonormal-basis plumbing: ranges, complements, intersections, and the
// U/V coordinate maps everything downstream is built on. All bases produced
// here follow one deterministic sign convention so repeated runs are
// bit-identical.

#include <string>
#include <vector>

#include "vucalc/dense.hpp"

namespace vucalc {

namespace detail {

// Deterministic sign fix: first entry of each column with |x| > 1e-12 is made
// positive. Idempotent, span-preserving.
inline void fix_column_signs(Matrix& m) {
    for (Index j = 0; j < m.cols(); ++j) {
        for (Index i = 0; i < m.rows(); ++i) {
            if (std::abs(m(i, j)) > 1e-12) {
                if (m(i, j) < 0.0) m.col(j) = -m.col(j);
                break;
            }
        }
    }
}

} // namespace detail

/// Columns form an orthonormal set spanning a subspace of R^ambient. k == 0 is
/// the trivial subspace {0}.
struct OrthonormalBasis {
    Index ambient_dim = 0;
    Matrix cols; // ambient_dim x k

    Index dim() const { return cols.cols(); }

    /// Validate orthonormality (1e-12) and normalize column signs.
    static OrthonormalBasis from_columns(Matrix c) {
        require_finite(c, "OrthonormalBasis");
        OrthonormalBasis b;
        b.ambient_dim = c.rows();
        if (c.cols() > 0) {
            const Matrix gram = c.transpose() * c;
            const double err =
                (gram - Matrix::Identity(c.cols(), c.cols())).cwiseAbs().maxCoeff();
            if (err > tol::orthonormality)
                throw ValidationError("OrthonormalBasis: columns not orthonormal (max |B^T B - I| = " +
                                      std::to_string(err) + ")");
        }
        detail::fix_column_signs(c);
        b.cols = std::move(c);
        return b;
    }

    static OrthonormalBasis identity(Index n) {
        OrthonormalBasis b;
        b.ambient_dim = n;
        b.cols = Matrix::Identity(n, n);
        return b;
    }

    static OrthonormalBasis empty(Index n) {
        OrthonormalBasis b;
        b.ambient_dim = n;
        b.cols = Matrix(n, 0);
        return b;
    }
};

/// Orthonormal basis for the column span of m. rank_tol <= 0 selects the auto
/// rule max(rows,cols)*eps*sigma_max.
inline OrthonormalBasis orthonormal_range(const Matrix& m, double rank_tol = kAutoRankTol) {
    require_finite(m, "orthonormal_range");
    if (m.cols() == 0 || m.rows() == 0) return OrthonormalBasis::empty(m.rows());

    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    const double cut = resolve_rank_tol(rank_tol, m.rows(), m.cols(), sv.size() ? sv(0) : 0.0);
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) ++rank;

    Matrix u = svd.matrixU().leftCols(rank);
    detail::fix_column_signs(u);
    OrthonormalBasis b;
    b.ambient_dim = m.rows();
    b.cols = std::move(u);
    return b;
}

/// Orthonormal basis of the orthogonal complement of span(basis).
inline OrthonormalBasis orthonormal_complement(const OrthonormalBasis& basis) {
    const Index n = basis.ambient_dim;
    if (basis.dim() == 0) return OrthonormalBasis::identity(n);
    if (basis.dim() == n) return OrthonormalBasis::empty(n);

    Eigen::JacobiSVD<Matrix> svd(basis.cols, Eigen::ComputeFullU);
    Matrix comp = svd.matrixU().rightCols(n - basis.dim());
    detail::fix_column_signs(comp);
    OrthonormalBasis b;
    b.ambient_dim = n;
    b.cols = std::move(comp);
    return b;
}

/// Intersection of subspaces via complements: (sum of complements)^perp.
inline OrthonormalBasis intersect_subspaces(const std::vector<OrthonormalBasis>& bases,
                                            double rank_tol = kAutoRankTol) {
    if (bases.empty())
        throw DimensionMismatch("intersect_subspaces: empty input");
    const Index n = bases.front().ambient_dim;
    Index total = 0;
    for (const auto& b : bases) {
        if (b.ambient_dim != n)
            throw DimensionMismatch("intersect_subspaces: mixed ambient dimensions");
        total += n - b.dim();
    }
    Matrix stacked(n, total);
    Index at = 0;
    for (const auto& b : bases) {
        const OrthonormalBasis c = orthonormal_complement(b);
        stacked.middleCols(at, c.dim()) = c.cols;
        at += c.dim();
    }
    return orthonormal_complement(orthonormal_range(stacked, rank_tol));
}

/// U-coordinates of x: Ubar^T x.
inline Vector restrict_u(const Vector& x, const OrthonormalBasis& u_basis) {
    if (x.size() != u_basis.ambient_dim)
        throw DimensionMismatch("restrict_u: x has dimension " + std::to_string(x.size()) +
                                ", basis ambient is " + std::to_string(u_basis.ambient_dim));
    return u_basis.cols.transpose() * x;
}

/// V-coordinates relative to raw (not necessarily orthonormal) columns:
/// (Vbar^T Vbar)^{-1} Vbar^T x. Requires full column rank.
inline Vector restrict_v(const Vector& x, const Matrix& v_raw, double rank_tol = kAutoRankTol) {
    if (x.size() != v_raw.rows())
        throw DimensionMismatch("restrict_v: x has dimension " + std::to_string(x.size()) +
                                ", columns live in dimension " + std::to_string(v_raw.rows()));
    if (v_raw.cols() == 0) return Vector(0);
    Eigen::JacobiSVD<Matrix> svd(v_raw, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cut = resolve_rank_tol(rank_tol, v_raw.rows(), v_raw.cols(), sv(0));
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) ++rank;
    if (rank < v_raw.cols())
        throw RankDeficientVBar("restrict_v: columns are rank deficient (rank " +
                                std::to_string(rank) + " of " + std::to_string(v_raw.cols()) + ")");
    return svd.solve(x);
}

/// x = Vbar x_v + Ubar x_u.
inline Vector reconstruct(const Vector& x_u, const Vector& x_v, const OrthonormalBasis& u_basis,
                          const Matrix& v_raw) {
    if (u_basis.ambient_dim != v_raw.rows() && v_raw.cols() > 0)
        throw DimensionMismatch("reconstruct: mixed ambient dimensions");
    if (x_u.size() != u_basis.dim() || x_v.size() != v_raw.cols())
        throw DimensionMismatch("reconstruct: coordinate lengths do not match bases");
    Vector out = Vector::Zero(u_basis.ambient_dim);
    if (v_raw.cols() > 0) out += v_raw * x_v;
    if (u_basis.dim() > 0) out += u_basis.cols * x_u;
    return out;
}

/// A VU-decomposition of R^n: orthonormal U and V bases plus the raw V columns
/// they came from (equal to v_basis.cols when no raw structure exists).
struct VuPair {
    OrthonormalBasis u_basis;
    OrthonormalBasis v_basis;
    Matrix v_raw;

    Index ambient() const { return u_basis.ambient_dim; }
    Index dim_u() const { return u_basis.dim(); }
    Index dim_v() const { return v_basis.dim(); }
};

/// Assemble and validate a VuPair: complementary dimensions, U perp V (1e-10),
/// and span(v_raw) == span(v_basis).
inline VuPair make_vu_pair(OrthonormalBasis u_basis, OrthonormalBasis v_basis, Matrix v_raw,
                           double rank_tol = kAutoRankTol) {
    if (u_basis.ambient_dim != v_basis.ambient_dim)
        throw DimensionMismatch("VuPair: U and V ambient dimensions differ");
    const Index n = u_basis.ambient_dim;
    if (u_basis.dim() + v_basis.dim() != n)
        throw ValidationError("VuPair: dim U + dim V != ambient dimension");
    if (v_raw.cols() == 0) v_raw = v_basis.dim() > 0 ? v_basis.cols : Matrix(n, 0);
    if (v_raw.rows() != n)
        throw DimensionMismatch("VuPair: raw V columns have wrong ambient dimension");

    if (u_basis.dim() > 0 && v_basis.dim() > 0) {
        const double cross = (u_basis.cols.transpose() * v_basis.cols).cwiseAbs().maxCoeff();
        if (cross > tol::vu_orthogonality)
            throw ValidationError("VuPair: U and V not orthogonal (max |U^T V| = " +
                                  std::to_string(cross) + ")");
    }
    if (v_raw.cols() > 0 || v_basis.dim() > 0) {
        // span agreement: v_basis must capture exactly span(v_raw)
        Matrix joint(n, v_basis.dim() + v_raw.cols());
        joint << v_basis.cols, v_raw;
        const Index joint_rank = orthonormal_range(joint, rank_tol).dim();
        const Index raw_rank = orthonormal_range(v_raw, rank_tol).dim();
        if (joint_rank != v_basis.dim() || raw_rank != v_basis.dim())
            throw ValidationError("VuPair: span(v_raw) differs from span(v_basis)");
    }

    VuPair p;
    p.u_basis = std::move(u_basis);
    p.v_basis = std::move(v_basis);
    p.v_raw = std::move(v_raw);
    return p;
}

/// VuPair from raw V columns: V = span(columns), U = orthogonal complement.
inline VuPair vu_from_v_columns(const Matrix& v_columns, double rank_tol = kAutoRankTol) {
    OrthonormalBasis v = orthonormal_range(v_columns, rank_tol);
    OrthonormalBasis u = orthonormal_complement(v);
    return make_vu_pair(std::move(u), std::move(v), v_columns, rank_tol);
}

} // namespace vucalc
