#include "plpde/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "plpde/errors.hpp"
#include "plpde/linear.hpp"

namespace plpde {

BarrierResult barrier_solve(const ModelGeometry& geometry, const BarrierModel& model) {
    if (geometry.kind() != GeometryKind::interval) throw ConfigurationError("the barrier problem needs an interval", "barrier.geometry");
    if (!(model.rho1 > 0.0) || !std::isfinite(model.rho1)) throw ConfigurationError("rho1 must be positive", "barrier.rho1");
    if (!std::isfinite(model.b)) throw ConfigurationError("b must be finite", "barrier.b");

    const std::size_t P = geometry.point_count();
    const double h = geometry.spacing();
    const double c = model.rho1 * model.b;
    std::vector<double> lower(P, 0.0), diag(P, 1.0), upper(P, 0.0), rhs(P, 1.0);
    for (std::size_t i = 1; i + 1 < P; ++i) {
        lower[i] = 1.0 / (h * h);
        upper[i] = 1.0 / (h * h);
        diag[i] = -2.0 / (h * h) + c;
        rhs[i] = 0.0;
    }

    BarrierResult result;
    std::vector<double> w;
    try {
        w = solve_tridiagonal(lower, diag, upper, rhs);
    } catch (const LinearSolveFailure& e) {
        result.reason = std::string("linear problem is singular: ") + e.what();
        return result;
    }
    result.min_w = *std::min_element(w.begin(), w.end());
    const bool finite = std::all_of(w.begin(), w.end(), [](double v) { return std::isfinite(v); });
    result.w = ScalarField(geometry, w);
    if (!finite || !(result.min_w > 0.0)) {
        result.reason = "w = exp(rho1 h) is not positive: rho1 b is at or above the first Dirichlet eigenvalue";
        return result;
    }
    ScalarField out(geometry);
    for (std::size_t i = 0; i < P; ++i) out.values[i] = std::log(w[i]) / model.rho1;
    out.values.front() = 0.0;
    out.values.back() = 0.0;
    result.exists = true;
    result.h = std::move(out);
    return result;
}

double barrier_residual(const ScalarField& h, const BarrierModel& model) {
    if (h.geometry.kind() != GeometryKind::interval) throw ConfigurationError("the barrier problem needs an interval");
    const double dx = h.geometry.spacing();
    const auto& v = h.values;
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        const double d2 = (v[i - 1] - 2.0 * v[i] + v[i + 1]) / (dx * dx);
        const double d1 = (v[i + 1] - v[i - 1]) / (2.0 * dx);
        worst = std::max(worst, std::abs(d2 + model.rho1 * d1 * d1 + model.b));
    }
    return worst;
}

ScalarField riccati_oracle(const ModelGeometry& geometry) {
    if (geometry.kind() != GeometryKind::interval) throw DomainError("riccati_oracle needs an interval");
    const double edge = std::numbers::pi / 2.0 - 0.05;
    if (geometry.a() < -edge - 1e-12 || geometry.b() > edge + 1e-12) {
        throw DomainError("riccati_oracle: grid must stay 0.05 away from ±π/2");
    }
    return ScalarField::from_function(geometry, [](std::span<const double> x) { return std::log(std::cos(x[0])); });
}

json to_json(const BarrierResult& r) {
    json j{{"exists", r.exists}, {"nonexistence", !r.exists}, {"min_w", r.min_w}};
    if (!r.reason.empty()) j["reason"] = r.reason;
    if (r.h) {
        j["sup_h"] = r.h->max();
        j["inf_h"] = r.h->min();
    }
    return j;
}

}  // namespace plpde
