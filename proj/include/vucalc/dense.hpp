#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "vucalc/errors.hpp"

namespace vucalc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Shared tolerance defaults. Every check that consumes one of these reports the
// value it used, so reports stay auditable.
namespace tol {
inline constexpr double orthonormality = 1e-12;   // B^T B == I
inline constexpr double vu_orthogonality = 1e-10; // U^T V == 0
inline constexpr double active_default = 1e-8;    // max-type activity
inline constexpr double zero_default = 1e-10;     // l1 support detection
inline constexpr double newton_default = 1e-12;   // track residual, inf-norm
inline constexpr double fd_step_default = 1e-5;   // central differences
inline constexpr double dedup = 1e-6;             // sampled-gradient dedup, inf-norm
inline constexpr double consistency_default = 1e-8;
} // namespace tol

inline constexpr int kGeneratorBudget = 4096;
inline constexpr int kNewtonMaxItersDefault = 50;

// rank_tol <= 0 means "auto": max(rows,cols) * eps * sigma_max.
inline constexpr double kAutoRankTol = 0.0;

inline double auto_rank_tol(Index rows, Index cols, double sigma_max) {
    const double eps = std::numeric_limits<double>::epsilon();
    return static_cast<double>(std::max(rows, cols)) * eps * sigma_max;
}

inline double resolve_rank_tol(double rank_tol, Index rows, Index cols, double sigma_max) {
    return rank_tol > 0.0 ? rank_tol : auto_rank_tol(rows, cols, sigma_max);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_finite(const Matrix& m, const std::string& what) {
    if (!m.allFinite()) throw NonFiniteInput(what + ": non-finite entry");
}

inline void require_finite(const Vector& v, const std::string& what) {
    if (!v.allFinite()) throw NonFiniteInput(what + ": non-finite entry");
}

} // namespace vucalc
