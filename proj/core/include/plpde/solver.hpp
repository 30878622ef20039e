#pragma once

// Nonlinear solvers for f(Λ(√−1∂∂̄u + X)) = ψ on the flat model geometries:
// damped Newton with an admissibility safeguard, the continuity path
//   f(Λ(𝔤[u] + tAω)) = e^{tu} (tH + (1−t)ψ),   t: 1 → 0,
// the closed problem with unknown constant f(Λ(𝔤[u])) = e^b ψ, sup u = 0,
// and the Dirichlet problem on the interval.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "plpde/errors.hpp"
#include "plpde/hermfield.hpp"
#include "plpde/json.hpp"
#include "plpde/symcalc.hpp"

namespace plpde {

enum class SolveMode {
    periodic_with_constant,  ///< torus; unknowns (u, b) with sup u = 0
    dirichlet,               ///< interval; u = φ at both end nodes
};

std::string to_string(SolveMode mode);

struct ProblemSpec {
    ModelGeometry geometry;
    OperatorSpec op;
    HermitianField X;
    ScalarField psi;
    SolveMode mode = SolveMode::periodic_with_constant;
    /// Dirichlet data φ; only the two end values are used.
    std::optional<ScalarField> boundary;
    /// Discrete subsolution ū (Dirichlet start point).
    std::optional<ScalarField> subsolution;
    /// Known exact solution (manufactured problems), for reporting only.
    std::optional<ScalarField> exact;

    ProblemSpec(ModelGeometry g, OperatorSpec o, HermitianField x, ScalarField p);

    /// Checks shapes, ψ > 0, the window sup_∂Γ f < inf ψ, mode/geometry
    /// compatibility and subsolution admissibility. Throws ConfigurationError.
    void validate() const;
};

struct SolverOptions {
    double newton_tolerance = 1e-10;  ///< max-norm residual at the end of the solve
    double path_tolerance = 1e-8;     ///< max-norm residual at intermediate t
    int max_newton_iterations = 40;
    double t_min = 1e-4;
    double initial_step = 0.25;
    double step_floor = 1e-4;
    double step_growth = 1.5;
    int fast_convergence_iterations = 3;
    double min_damping = 0x1p-30;
    std::optional<double> homotopy_A;  ///< A in tAω; chosen automatically when unset
    int gmres_restart = 20;
    int gmres_max_iterations = 300;
    /// Optional sink for structured diagnostics (one JSON object per event).
    std::function<void(const json&)> diagnostics;
};

struct ResidualRecord {
    double t = 0.0;
    int iteration = 0;
    double residual = 0.0;  ///< max-norm after the step
    double damping = 1.0;   ///< accepted step length (0 for the initial residual)
    int linear_iterations = 0;
};

/// t·sup u and t·inf u against the constants sup log(f(Λ(X+Aω))/ψᵗ) and
/// inf log(f(Λ(X+tAω))/ψᵗ) (−∞ when the latter is undefined).
struct BoundRecord {
    double t = 0.0;
    double t_sup_u = 0.0;
    double t_inf_u = 0.0;
    double upper_constant = 0.0;
    double lower_constant = 0.0;
    bool within = true;
};

struct SolveState {
    ScalarField u;
    double b = 0.0;
    double t = 0.0;
    double A = 0.0;
    std::vector<ResidualRecord> residual_history;
    std::vector<BoundRecord> bounds;
    std::vector<double> t_path;
    double admissibility_margin = 0.0;
    double final_residual = 0.0;
    int newton_iterations = 0;
    int linear_iterations = 0;
    bool tikhonov_used = false;
    bool comparison_holds = true;  ///< u ≥ ū − 1e-10 (Dirichlet with subsolution)
    std::vector<std::string> warnings;

    explicit SolveState(ModelGeometry g) : u(std::move(g)) {}
};

/// Raised when the homotopy step falls below the floor; carries the last
/// converged state on the path.
class HomotopyStall : public Error {
public:
    HomotopyStall(const std::string& message, SolveState last_good)
        : Error(message), last_good_(std::move(last_good)) {}
    const SolveState& last_good() const noexcept { return last_good_; }

private:
    SolveState last_good_;
};

/// Counters over every accepted Newton step in the process, verified
/// independently at acceptance time.
struct SafetyAudit {
    std::uint64_t accepted_steps = 0;
    std::uint64_t inadmissible_accepts = 0;
    std::uint64_t nonmonotone_accepts = 0;
};
SafetyAudit safety_audit();
void reset_safety_audit();

/// H(z) = f(Λ(X(z) + Aω)), the right-hand side at t = 1.
ScalarField homotopy_anchor(const ProblemSpec& spec, double A);

/// Smallest A ∈ {1, 2, 4, ...} with X + Aω admissible and H > 0 everywhere.
double choose_homotopy_A(const ProblemSpec& spec);

/// f(Λ(𝔤[u] + tAω)) − e^{b + tu}(tH + (1−t)ψ); at Dirichlet end nodes u − φ.
/// Throws AdmissibilityError at an inadmissible grid point.
ScalarField residual(const ProblemSpec& spec, const SolveState& state);

/// One damped Newton iteration at the state's t (the (u, b) system with a
/// mean-zero gauge when t = 0 in periodic mode). The line search starts at
/// `damping` and halves until the trial is admissible and the max-norm
/// residual decreases. Throws NewtonStall / LinearSolveFailure.
SolveState newton_step(const ProblemSpec& spec, const SolveState& state, double damping = 1.0,
                       const SolverOptions& options = {});

/// Continuity path from t = 1, u = 0 down to t_min, then the (u, b) system,
/// then the shift to sup u = 0.
SolveState homotopy_solve(const ProblemSpec& spec, const SolverOptions& options = {});

/// Newton from the subsolution (or the linear interpolant of φ when none is
/// supplied) on the interval.
SolveState dirichlet_solve(const ProblemSpec& spec, const SolverOptions& options = {});

/// Dispatches on the problem mode.
SolveState solve(const ProblemSpec& spec, const SolverOptions& options = {});

/// Analytic manufactured solution: u*(x) and its complex Hessian ∂∂̄u*(x).
struct ManufacturedSolution {
    std::function<double(std::span<const double>)> u;
    std::function<HermitianMatrix(std::span<const double>)> hessian;
};

/// ψ := f(Λ(λ(∂∂̄u* + X))) with the grid's own differentiation, so u* is the
/// exact discrete solution. Periodic mode on the torus, Dirichlet on the
/// interval (φ = u*, ū = u* + (x − a)(x − b)). Throws ConfigurationError
/// naming the worst point when u* is inadmissible.
ProblemSpec mms_generate(const ModelGeometry& geometry, const OperatorSpec& op, const ScalarField& u_star,
                         const HermitianField& X);

/// As above, but ψ from the analytic Hessian, so the discrete solution
/// differs from u* by the truncation error of the grid.
ProblemSpec mms_generate(const ModelGeometry& geometry, const OperatorSpec& op, const ManufacturedSolution& u_star,
                         const HermitianField& X);

json to_json(const SolveState& state);

}  // namespace plpde
