#include "plpde/linear.hpp"

#include <cmath>

#include "plpde/errors.hpp"

namespace plpde {

GmresResult gmres(const LinearOperator& A, const LinearOperator& preconditioner, const Eigen::VectorXd& b,
                  Eigen::VectorXd& x, const GmresOptions& options) {
    const Eigen::Index n = b.size();
    if (x.size() != n) x = Eigen::VectorXd::Zero(n);
    const int m = std::max(1, options.restart);
    GmresResult result;
    const double b_norm = b.norm();
    if (b_norm == 0.0) {
        x.setZero();
        result.relative_residual = 0.0;
        result.converged = true;
        return result;
    }

    Eigen::MatrixXd V(n, m + 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    Eigen::VectorXd cs(m), sn(m), g(m + 1);
    Eigen::VectorXd w(n), z(n), r(n);

    A(x, r);
    r = b - r;
    double beta = r.norm();
    result.relative_residual = beta / b_norm;
    while (result.iterations < options.max_iterations) {
        if (result.relative_residual <= options.relative_tolerance) {
            result.converged = true;
            return result;
        }
        V.col(0) = r / beta;
        g.setZero();
        g(0) = beta;
        H.setZero();
        int k = 0;
        for (; k < m && result.iterations < options.max_iterations; ++k) {
            ++result.iterations;
            preconditioner(V.col(k), z);
            A(z, w);
            // Modified Gram–Schmidt.
            for (int i = 0; i <= k; ++i) {
                H(i, k) = w.dot(V.col(i));
                w -= H(i, k) * V.col(i);
            }
            H(k + 1, k) = w.norm();
            if (H(k + 1, k) > 0.0) V.col(k + 1) = w / H(k + 1, k);
            for (int i = 0; i < k; ++i) {
                const double t = cs(i) * H(i, k) + sn(i) * H(i + 1, k);
                H(i + 1, k) = -sn(i) * H(i, k) + cs(i) * H(i + 1, k);
                H(i, k) = t;
            }
            const double denom = std::hypot(H(k, k), H(k + 1, k));
            if (denom == 0.0) throw LinearSolveFailure("GMRES breakdown: singular Krylov projection");
            cs(k) = H(k, k) / denom;
            sn(k) = H(k + 1, k) / denom;
            H(k, k) = denom;
            H(k + 1, k) = 0.0;
            g(k + 1) = -sn(k) * g(k);
            g(k) = cs(k) * g(k);
            result.relative_residual = std::abs(g(k + 1)) / b_norm;
            if (result.relative_residual <= options.relative_tolerance) {
                ++k;
                break;
            }
        }
        // Back substitution and update.
        Eigen::VectorXd y = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        Eigen::VectorXd update = V.leftCols(k) * y;
        preconditioner(update, z);
        x += z;
        A(x, r);
        r = b - r;
        beta = r.norm();
        result.relative_residual = beta / b_norm;
        if (beta == 0.0) break;
    }
    result.converged = result.relative_residual <= options.relative_tolerance;
    return result;
}

std::vector<double> solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                      std::span<const double> upper, std::span<const double> rhs) {
    const std::size_t n = diag.size();
    if (lower.size() != n || upper.size() != n || rhs.size() != n) {
        throw DomainError("solve_tridiagonal: size mismatch");
    }
    std::vector<double> c(n), d(n), x(n);
    double pivot = diag[0];
    if (pivot == 0.0 || !std::isfinite(pivot)) throw LinearSolveFailure("tridiagonal solve: zero pivot at row 0");
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for (std::size_t i = 1; i < n; ++i) {
        pivot = diag[i] - lower[i] * c[i - 1];
        if (pivot == 0.0 || !std::isfinite(pivot)) {
            throw LinearSolveFailure("tridiagonal solve: zero pivot at row " + std::to_string(i));
        }
        c[i] = upper[i] / pivot;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
    return x;
}

}  // namespace plpde
