#pragma once

// C^2 building blocks for structure functions and inner maps. The concrete
// currency is the quadratic atom 0.5 x^T A x + b^T x + c; a callback-based
// interface is provided for callers with non-quadratic smooth pieces.

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vucalc/dense.hpp"

namespace vucalc {

/// f(x) = 0.5 x^T A x + b^T x + c with A symmetric (symmetrized on entry).
struct QuadraticAtom {
    Matrix A;
    Vector b;
    double c = 0.0;

    QuadraticAtom() = default;
    QuadraticAtom(Matrix a, Vector b_, double c_) : A(std::move(a)), b(std::move(b_)), c(c_) {
        require_finite(A, "QuadraticAtom.A");
        require_finite(b, "QuadraticAtom.b");
        if (!std::isfinite(c)) throw NonFiniteInput("QuadraticAtom.c: non-finite");
        if (A.rows() != A.cols())
            throw DimensionMismatch("QuadraticAtom: A is " + std::to_string(A.rows()) + "x" +
                                    std::to_string(A.cols()));
        if (A.rows() != b.size())
            throw DimensionMismatch("QuadraticAtom: A is " + std::to_string(A.rows()) +
                                    "-dimensional but b has length " + std::to_string(b.size()));
        A = 0.5 * (A + A.transpose()).eval();
    }

    static QuadraticAtom zero(Index n) {
        return QuadraticAtom(Matrix::Zero(n, n), Vector::Zero(n), 0.0);
    }

    /// Affine atom b^T x + c.
    static QuadraticAtom affine(Vector b_, double c_ = 0.0) {
        const Index n = b_.size();
        return QuadraticAtom(Matrix::Zero(n, n), std::move(b_), c_);
    }

    Index dim() const { return b.size(); }
};

inline void check_dim(const QuadraticAtom& atom, const Vector& x, const char* op) {
    if (x.size() != atom.dim())
        throw DimensionMismatch(std::string(op) + ": point has dimension " +
                                std::to_string(x.size()) + ", atom expects " +
                                std::to_string(atom.dim()));
}

inline double eval(const QuadraticAtom& atom, const Vector& x) {
    check_dim(atom, x, "eval");
    return 0.5 * x.dot(atom.A * x) + atom.b.dot(x) + atom.c;
}

inline Vector grad(const QuadraticAtom& atom, const Vector& x) {
    check_dim(atom, x, "grad");
    return atom.A * x + atom.b;
}

inline Matrix hess(const QuadraticAtom& atom, const Vector& x) {
    check_dim(atom, x, "hess");
    return atom.A;
}

/// Callback-based C^2 function for callers whose smooth pieces are not
/// quadratic. Only value/gradient are required by the solvers; hessian may be
/// left empty.
struct SmoothFn {
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> gradient;
    std::function<Matrix(const Vector&)> hessian; // optional

    static SmoothFn from_atom(const QuadraticAtom& atom) {
        SmoothFn f;
        f.value = [atom](const Vector& x) { return eval(atom, x); };
        f.gradient = [atom](const Vector& x) { return grad(atom, x); };
        f.hessian = [atom](const Vector& x) { return hess(atom, x); };
        return f;
    }
};

/// Inner map Phi: R^m -> R^n, componentwise quadratic. n == components.size().
struct SmoothMap {
    Index domain_dim = 0;
    std::vector<QuadraticAtom> components;

    SmoothMap() = default;
    SmoothMap(Index m, std::vector<QuadraticAtom> comps)
        : domain_dim(m), components(std::move(comps)) {
        for (const auto& a : components)
            if (a.dim() != domain_dim)
                throw DimensionMismatch("SmoothMap: component dimension " +
                                        std::to_string(a.dim()) + " != domain dimension " +
                                        std::to_string(domain_dim));
    }

    Index range_dim() const { return static_cast<Index>(components.size()); }
};

inline Vector eval(const SmoothMap& map, const Vector& x) {
    if (x.size() != map.domain_dim) throw DimensionMismatch("eval: wrong domain dimension");
    Vector out(map.range_dim());
    for (Index i = 0; i < map.range_dim(); ++i) out(i) = eval(map.components[i], x);
    return out;
}

/// Jacobian at x: n x m, row i = grad(component_i, x)^T.
inline Matrix jacobian(const SmoothMap& map, const Vector& x) {
    if (x.size() != map.domain_dim) throw DimensionMismatch("jacobian: wrong domain dimension");
    Matrix j(map.range_dim(), map.domain_dim);
    for (Index i = 0; i < map.range_dim(); ++i) j.row(i) = grad(map.components[i], x).transpose();
    return j;
}

} // namespace vucalc
