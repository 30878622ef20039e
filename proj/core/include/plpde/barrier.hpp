#pragma once

// The auxiliary barrier problem on an interval,
//   h'' + ϱ₁ (h')² + b = 0,   h = 0 at both ends,
// solved through the substitution w = e^{ϱ₁ h}, which turns it into the
// linear problem w'' + ϱ₁ b w = 0 with w = 1 at both ends. A solution exists
// exactly when that w stays positive, i.e. when ϱ₁ b lies below the first
// Dirichlet eigenvalue of −d²/dx².

#include <optional>
#include <string>

#include "plpde/hermfield.hpp"
#include "plpde/json.hpp"

namespace plpde {

/// Coefficients of the model quasilinear term: the gradient coefficient ϱ₁
/// and the constant forcing b (the ϱ₀ profile reduced to a constant).
struct BarrierModel {
    double rho1 = 1.0;
    double b = 0.0;
};

struct BarrierResult {
    bool exists = false;
    /// h on the grid when a solution exists.
    std::optional<ScalarField> h;
    /// The linear unknown w = e^{ϱ₁ h} (present whenever the linear solve succeeded).
    std::optional<ScalarField> w;
    double min_w = 0.0;
    /// Why no solution was returned.
    std::string reason;
};

/// Second-order central differences in x on an interval geometry.
/// Nonexistence is a result, not an error; a non-interval geometry or
/// ϱ₁ ≤ 0 throws ConfigurationError.
BarrierResult barrier_solve(const ModelGeometry& geometry, const BarrierModel& model);

/// max over interior nodes of |D²h + ϱ₁ (D¹h)² + b| with central differences.
double barrier_residual(const ScalarField& h, const BarrierModel& model);

/// The closed form h(x) = log cos x, which satisfies h'' + (h')² + 1 = 0.
/// The grid must stay at least 0.05 away from ±π/2; otherwise DomainError.
ScalarField riccati_oracle(const ModelGeometry& geometry);

json to_json(const BarrierResult& result);

}  // namespace plpde
