#pragma once

// Matrix-free Krylov and banded solvers used by the Newton iterations.

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace plpde {

/// y = A x for a matrix-free operator.
using LinearOperator = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& y)>;

struct GmresOptions {
    int restart = 20;
    int max_iterations = 200;
    double relative_tolerance = 1e-8;
};

struct GmresResult {
    int iterations = 0;
    double relative_residual = 1.0;
    bool converged = false;
};

/// Restarted GMRES with right preconditioning: solves A M⁻¹ y = b, x = M⁻¹ y.
/// `x` holds the initial guess on entry. Norms and inner products are
/// evaluated in a fixed order, so results are reproducible.
GmresResult gmres(const LinearOperator& A, const LinearOperator& preconditioner, const Eigen::VectorXd& b,
                  Eigen::VectorXd& x, const GmresOptions& options = {});

/// Solves the tridiagonal system lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]
/// by elimination without pivoting. Throws LinearSolveFailure on a zero pivot.
std::vector<double> solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                      std::span<const double> upper, std::span<const double> rhs);

}  // namespace plpde
