#pragma once

// Geometry of admissibility cones and level sets of f: cone membership,
// level-set projection, supporting-normal probes of the tangent cone at
// infinity, and the sorted-gradient lower bound c₁.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "plpde/errors.hpp"
#include "plpde/json.hpp"
#include "plpde/symcalc.hpp"

namespace plpde {

struct GardingCone {
    int k = 1;
    int dim = 1;
};

struct PartialCone {
    int K = 1;
    int n = 1;
};

/// The admissible eigenvalue set {λ ∈ ℝⁿ : (Λ − βΛ')(λ) ∈ Γ} of an operator.
struct OperatorDomain {
    OperatorSpec spec;
};

using ConeSpec = std::variant<GardingCone, PartialCone, OperatorDomain>;

enum class Membership { interior, boundary, outside };

std::string to_string(Membership m);

/// Classifies λ against the defining inequalities of the cone. Inequalities
/// of degree j are compared after taking signed j-th roots, so every test is
/// on the scale of |λ|. Default tolerance is 1e-10 (1 + |λ|).
Membership cone_membership(const ConeSpec& cone, std::span<const double> lambda,
                           std::optional<double> tolerance = std::nullopt);

/// Space in which level sets are probed.
enum class ProbeSpace {
    lambda_space,      ///< f itself on Γ ⊂ ℝ^N
    eigenvalue_space,  ///< the composite f ∘ (Λ − βΛ') on ℝⁿ
};

/// A scalar function whose level sets are probed, with its gradient and
/// cone margin.
class LevelTarget {
public:
    LevelTarget(const Operator& op, ProbeSpace space);

    std::size_t dim() const noexcept { return dim_; }
    ProbeSpace space() const noexcept { return space_; }
    double margin(std::span<const double> x) const;
    double value_and_gradient(std::span<const double> x, std::span<double> grad) const;
    double boundary_sup() const;
    double diagonal_value(double t) const;

private:
    const Operator* op_;
    ProbeSpace space_;
    std::size_t dim_;
};

struct LevelSetSample {
    std::vector<double> point;
    std::vector<double> gradient;
    std::vector<double> normal;  ///< Df / |Df|
    double support_value = 0.0;  ///< normal · point
    double residual = 0.0;       ///< f(point) − σ
};

/// Finds τ with f(base + τ·1) = σ by bracketing, bisection and a Newton
/// polish. Returns nullopt when f stays above σ on the whole admissible part
/// of the line (the AboveLevel outcome).
std::optional<LevelSetSample> project_to_level(const LevelTarget& target, double sigma,
                                               std::span<const double> base);

/// Samples λ(s) = τ·1 + s·d on ∂Γ^σ for s = 0, 1, ..., count−1.
/// Entries are nullopt for rays that stay above the level.
std::vector<std::optional<LevelSetSample>> level_set_sample(const Operator& op, double sigma,
                                                            std::span<const double> direction,
                                                            std::size_t count,
                                                            ProbeSpace space = ProbeSpace::lambda_space);

/// Throws DomainError unless sup_∂Γ f < σ < sup_Γ f.
void check_level(const LevelTarget& target, double sigma);

struct ProbeOptions {
    std::vector<double> magnitudes{1e2, 1e3, 1e4, 1e5, 1e6};
    /// Maximum number of coordinate-subset rays; one ray per subset size is
    /// the minimum for a conclusive probe.
    std::size_t ray_budget = 64;
    std::size_t random_directions = 48;
    ProbeSpace space = ProbeSpace::lambda_space;
    std::uint64_t seed = 20240611;
    double zero_tolerance = 1e-6;
    double convergence_tolerance = 1e-4;
};

struct RayProbe {
    std::vector<int> subset;  ///< 0-based coordinates that diverge
    std::vector<double> magnitudes;
    std::vector<std::vector<double>> normals;
    std::vector<double> support_values;
    std::vector<double> residuals;
    std::vector<double> limiting_normal;
    int nonzero_count = 0;
    double last_change = 0.0;
    bool converged = false;
};

struct C1Estimate {
    double value = 0.0;        ///< the bound; 0 when flagged
    double raw_minimum = 0.0;  ///< smallest sampled ratio
    bool flagged = false;      ///< raw minimum fell below 1e-8
    int rank = 0;
    std::size_t samples = 0;
};

struct RankCertificate {
    double sigma = 0.0;
    std::size_t ambient_dim = 0;
    ProbeSpace space = ProbeSpace::lambda_space;
    int estimated_rank = 0;
    std::vector<RayProbe> rays;
    std::vector<double> diagonal_normal;
    C1Estimate c1;
    double threshold_checked = 0.0;
    bool passes_condition = false;
    bool conclusive = true;
    std::string inconclusive_reason;
    std::vector<std::string> assumptions;
};

/// Raised when the normal sequences do not settle or the ray budget is too
/// small; carries whatever was measured.
class ProbeInconclusive : public Error {
public:
    ProbeInconclusive(const std::string& reason, RankCertificate partial)
        : Error("rank probe inconclusive: " + reason), certificate_(std::move(partial)) {}

    const RankCertificate& certificate() const noexcept { return certificate_; }

private:
    RankCertificate certificate_;
};

/// Rank threshold N (n − K)/n + 1 of the partial-Laplacian rank condition.
double rank_threshold(const OperatorSpec& spec);

/// Coordinate-subset probe of the supporting normals of the tangent cone at
/// infinity of {f > σ}. Threshold is rank_threshold for lambda_space probes
/// and 2 for eigenvalue_space probes.
RankCertificate rank_probe(const Operator& op, double sigma, const ProbeOptions& options = {});

struct RankConditionResult {
    bool passes = false;
    double threshold = 0.0;
    int rank = 0;
    std::vector<double> levels;
    std::vector<RankCertificate> certificates;
};

/// Probes five levels f(t·1), t = 10^{-1}, 10^{-1/2}, ..., 10, and compares
/// the minimum rank with rank_threshold.
RankConditionResult rank_condition_check(const Operator& op, const ProbeOptions& options = {});

/// min over samples of (sum of the m − r + 1 smallest gradient entries) /
/// (sum of all entries). Flagged (value 0) when the minimum is below 1e-8.
C1Estimate c1_estimate(int rank, std::span<const LevelSetSample> samples);

/// Level-set samples for c1_estimate: coordinate-subset rays and seeded
/// random directions at every probe magnitude, plus the diagonal point.
std::vector<LevelSetSample> c1_samples(const Operator& op, double sigma, const ProbeOptions& options = {});

/// c₁ for the discrete ellipticity inequality: sampled at `sigma` with the
/// rank count fixed at rank_threshold, i.e. the bound on the sum of the
/// N K / n smallest coefficients f_{Λ_l}.
C1Estimate ellipticity_c1(const Operator& op, double sigma, const ProbeOptions& options = {});

json to_json(const RankCertificate& certificate);
json to_json(const RankConditionResult& result);
json to_json(const C1Estimate& estimate);

}  // namespace plpde
