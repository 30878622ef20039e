#pragma once

// Measured a priori estimate ratios on solved fields:
//   c2_ratio      = sup_{B_{r/2}} |∂∂̄u|_ω · r² / (1 + osc u)
//   grad_ratio    = |∂u|²_ω(x*) · r² / (1 + sup_{B_r} u − u(x*)),  x* = argmax_{B_{r/2}} |∂u|²_ω
//   harnack_ratio = sup_{B_{r/2}} u / inf_{B_{r/2}} u   (u > 0 on B_r only)
//   osc_ratio     = (sup u − inf u) / d²
// |∂∂̄u|_ω is the pointwise operator norm with respect to ω. Balls on the
// torus are Euclidean balls modulo the lattice with radius at most ¼.

#include <optional>
#include <string>
#include <vector>

#include "plpde/conegeo.hpp"
#include "plpde/hermfield.hpp"
#include "plpde/json.hpp"
#include "plpde/solver.hpp"

namespace plpde {

struct Ball {
    std::vector<double> center;  ///< real coordinates (2n on the torus, 1 on the interval)
    double radius = 0.25;
};

/// Grid indices inside the ball (with a relative tolerance of 1e-12 on the
/// radius). Throws DomainError when the ball leaves the domain, has the
/// wrong dimension, or exceeds radius ¼ on the torus.
std::vector<std::size_t> ball_points(const ModelGeometry& geometry, const Ball& ball);

/// Pointwise |∂∂̄u|_ω (largest |eigenvalue| of ∂∂̄u relative to ω).
ScalarField hessian_norm(const ScalarField& u);
/// Pointwise |∂u|²_ω = ω^{ij̄} ∂_i u ∂_j̄ u (spectral on the torus, second-order
/// differences on the interval).
ScalarField gradient_norm_squared(const ScalarField& u);

double measure_c2(const ScalarField& u, const Ball& ball);
double measure_gradient(const ScalarField& u, const Ball& ball);
/// std::nullopt means Skipped: u is not positive on B_r.
std::optional<double> measure_harnack(const ScalarField& u, const Ball& ball);
double measure_osc(const ScalarField& u);

inline double measure_c2(const SolveState& s, const Ball& ball) { return measure_c2(s.u, ball); }
inline double measure_gradient(const SolveState& s, const Ball& ball) { return measure_gradient(s.u, ball); }
inline std::optional<double> measure_harnack(const SolveState& s, const Ball& ball) { return measure_harnack(s.u, ball); }

struct LevelMeasurement {
    int level = 0;  ///< points per axis (torus) or node count (interval)
    double c2_ratio = 0.0;
    double grad_ratio = 0.0;
    std::optional<double> harnack_ratio;
    double osc_ratio = 0.0;
};

struct EstimateOptions {
    Ball ball;
    /// Constant added to u before the Harnack quotient (for instances whose
    /// normalization makes u ≤ 0); unset means u itself.
    std::optional<double> harnack_shift;
};

LevelMeasurement measure_level(const ScalarField& u, const EstimateOptions& options);

struct RatioStability {
    std::string name;
    double max_over_min = 0.0;  ///< over the three finest levels
    bool finite = true;
    bool stable = true;  ///< finite and max/min ≤ 2
    bool skipped = false;
};

struct EstimateReport {
    std::string instance;
    Ball ball;
    std::vector<LevelMeasurement> levels;  ///< ascending resolution
    std::vector<RatioStability> stability;
    bool all_stable = true;
};

/// Sorts the levels by resolution and fills the stability flags.
EstimateReport make_estimate_report(std::string instance, const Ball& ball, std::vector<LevelMeasurement> levels);

/// The discrete ellipticity inequality min_a g_a ≥ c₁ Σ_l f_{Λ_l} at every
/// (interior) grid point of a solved state, with c₁ from ellipticity_c1
/// sampled at the median level of f over the grid.
struct EllipticityCheck {
    C1Estimate c1;
    double sigma = 0.0;
    double min_slack = 0.0;  ///< min over points of g_min − c₁ Σ f_{Λ_l}
    std::size_t worst_point = 0;
    bool holds = false;      ///< min_slack ≥ −1e-10
};
EllipticityCheck check_ellipticity(const ProblemSpec& spec, const ScalarField& u, const ProbeOptions& options = {});

json to_json(const EllipticityCheck& check);
json to_json(const EstimateReport& report);
/// Flat CSV with header "level,ratio,value" (Skipped ratios are omitted).
std::string to_csv(const EstimateReport& report);

}  // namespace plpde
