#pragma once

// Run configuration: one JSON document parsed into validated building blocks.
// Every error is a ConfigurationError naming the offending field path.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "plpde/barrier.hpp"
#include "plpde/conegeo.hpp"
#include "plpde/estimates.hpp"
#include "plpde/hermfield.hpp"
#include "plpde/json.hpp"
#include "plpde/solver.hpp"
#include "plpde/symcalc.hpp"

namespace plpde::cli {

/// A smooth scalar profile:
///   constant + Σ amplitude·cos(2π·frequency·x[axis] + phase) + Σ_k c_k x[0]^k.
/// Polynomial terms are only allowed on the interval.
struct Profile {
    struct Mode {
        double amplitude = 0.0;
        int axis = 0;
        double frequency = 1.0;
        double phase = 0.0;
    };
    double constant = 0.0;
    std::vector<Mode> modes;
    std::vector<double> polynomial;

    double value(std::span<const double> x) const;
    /// Second derivative along one real axis.
    double second_derivative(std::span<const double> x, int axis) const;
    /// ∂∂̄ of the profile on the given geometry (each term depends on one axis).
    HermitianMatrix complex_hessian(const ModelGeometry& g, std::span<const double> x) const;
};

struct GeometryConfig {
    GeometryKind kind = GeometryKind::flat_torus;
    int n = 1;
    int points = 16;
    double a = 0.0;
    double b = 1.0;
    std::vector<double> omega_diagonal;  ///< empty: ω = identity
};

struct XConfig {
    std::optional<double> scalar;   ///< X = c·ω
    std::vector<Profile> diagonal;  ///< X = diag(profiles)
};

struct PsiConfig {
    bool given = false;
    enum class Kind { constant, file, mms } kind = Kind::constant;
    double constant = 1.0;
    std::filesystem::path file;
    Profile u_star;
    bool analytic = false;
    std::vector<int> levels;  ///< refinement levels for the mms command
};

struct OutputConfig {
    std::filesystem::path directory = "plpde_out";
    bool write_json = true;
    bool write_csv = true;
    bool write_fields = true;
};

struct RunConfig {
    json document;
    std::uint64_t seed = 20240611;
    bool barrier = false;  ///< problem.type == "barrier"

    GeometryConfig geometry;
    OperatorSpec op;
    XConfig X;
    PsiConfig psi;
    std::optional<SolveMode> mode;
    std::optional<Profile> boundary;
    std::optional<Profile> subsolution;
    BarrierModel barrier_model;

    SolverOptions solver;
    ProbeOptions probe;
    std::optional<Ball> ball;
    std::optional<double> harnack_shift;
    OutputConfig output;
};

/// Parses and validates; relative file paths resolve against `base_dir`.
RunConfig parse_config(const json& document, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// The configured geometry, optionally at another resolution.
ModelGeometry build_geometry(const RunConfig& config, std::optional<int> points = std::nullopt);
HermitianField build_X(const RunConfig& config, const ModelGeometry& geometry);
/// The fully validated problem on `geometry`.
ProblemSpec build_problem(const RunConfig& config, const ModelGeometry& geometry);
/// Estimate ball: configured, or the default for the geometry.
Ball estimate_ball(const RunConfig& config, const ModelGeometry& geometry);
Ball default_ball(const ModelGeometry& geometry);

/// 64-bit FNV-1a hash of the canonical (sorted-key, compact) serialization.
std::uint64_t config_hash(const json& document);
std::string hex64(std::uint64_t value);

}  // namespace plpde::cli
