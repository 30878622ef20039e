#pragma once

// Symmetric-function layer: index-set families, the partial-sum map Λ, the
// elementary symmetric functions, and the catalogued operator families f
// with first and second derivatives.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace plpde {

/// Maximum complex dimension accepted anywhere in the library.
inline constexpr int max_dimension = 16;

/// The ordered family of K-element subsets of {0, ..., n-1}.
///
/// Sets are stored 0-based and ordered lexicographically; the order is a
/// pure function of (n, K). Serialized forms use 1-based indices.
class IndexSetFamily {
public:
    IndexSetFamily(int n, int K);

    int n() const noexcept { return n_; }
    int K() const noexcept { return K_; }
    /// N = n! / (K! (n-K)!).
    std::size_t size() const noexcept { return count_; }
    std::span<const int> set(std::size_t j) const {
        return {flat_.data() + j * static_cast<std::size_t>(K_), static_cast<std::size_t>(K_)};
    }
    /// Positions j of the sets I_j that contain index i.
    std::span<const std::size_t> sets_containing(int i) const { return containing_[static_cast<std::size_t>(i)]; }
    /// Number of sets containing any fixed index, N K / n.
    std::size_t multiplicity() const noexcept { return count_ * static_cast<std::size_t>(K_) / static_cast<std::size_t>(n_); }

private:
    int n_;
    int K_;
    std::size_t count_ = 0;
    std::vector<int> flat_;
    std::vector<std::vector<std::size_t>> containing_;
};

/// Throws DomainError unless 1 <= K <= n <= max_dimension.
IndexSetFamily enumerate_index_sets(int n, int K);

/// Binomial coefficient as a double (exact for the sizes used here).
double binomial(int n, int k);

/// Λ(λ)_j = Σ_{i ∈ I_j} λ_i.
std::vector<double> lambda_map(std::span<const double> lambda, const IndexSetFamily& family);
void lambda_map(std::span<const double> lambda, const IndexSetFamily& family, std::span<double> out);

/// Λ'(λ)_j = Σ_{i ∉ I_j} λ_i, so that Λ + Λ' = σ_1(λ)·1.
std::vector<double> lambda_prime(std::span<const double> lambda, const IndexSetFamily& family);

/// e_0 .. e_kmax of v by the product recurrence e_j += v_i e_{j-1}.
std::vector<double> elementary_symmetric(std::span<const double> v, int kmax);

/// σ_k(v); throws DomainError unless 1 <= k <= v.size().
double sigma_k(int k, std::span<const double> v);

/// σ_{k-1}(v | i) for every i, i.e. ∂σ_k/∂v_i, from prefix/suffix products
/// (no division, so large entries do not cancel).
std::vector<double> sigma_k_partials(int k, std::span<const double> v);

struct FlaggedValue {
    double value = 0.0;
    bool in_domain = false;
};

/// ρ_k(λ) = Π_{I ∈ 𝔍_k} Σ_{i∈I} λ_i. `in_domain` is false when λ ∉ P_k.
FlaggedValue rho_k(int k, std::span<const double> lambda);

/// Catalogued symmetric functions on ℝ^m.
enum class Family {
    sigma_root,  ///< σ_k^{1/k} on Γ_k
    log_rho,     ///< log σ_m = Σ log x_j on Γ_m; composed with Λ this is log ρ_K
    linear,      ///< σ_1 on Γ_1
};

std::string to_string(Family family);
Family family_from_string(const std::string& name);

/// A symmetric concave function on ℝ^m together with its domain cone.
///
/// Evaluation outside the cone throws AdmissibilityError naming the first
/// violated defining inequality.
class SymmetricFunction {
public:
    SymmetricFunction(Family family, int k);

    Family family() const noexcept { return family_; }
    int k() const noexcept { return k_; }

    double value(std::span<const double> x) const;
    /// Returns f(x) and writes Df(x) into `grad` (size m).
    double value_and_gradient(std::span<const double> x, std::span<double> grad) const;
    /// dᵀ D²f(x) d.
    double hessian_action(std::span<const double> x, std::span<const double> d) const;

    /// Degree-one normalized minimum of the defining inequalities of the cone.
    /// Positive exactly in the interior; equals t at t·1.
    double margin(std::span<const double> x) const;
    /// Name of the most violated defining inequality at x.
    std::string violated_constraint(std::span<const double> x) const;

    /// sup of f over ∂Γ (−∞ when f is unbounded below near the boundary).
    double boundary_sup() const;
    /// f(t·1) in ℝ^m.
    double diagonal_value(double t, std::size_t m) const;
    /// Throws DomainError when the function is undefined on ℝ^m.
    void check_dimension(std::size_t m) const;

private:
    void require_admissible(std::span<const double> x) const;

    Family family_;
    int k_;
};

/// Which catalogued f, acting on which Λ, with what deformation.
struct OperatorSpec {
    Family family = Family::sigma_root;
    int k = 1;  ///< order for sigma_root; ignored otherwise
    int n = 1;  ///< complex dimension
    int K = 1;  ///< partial-sum length
    double beta = 0.0;         ///< deformation Λ − βΛ'
    double level_shift = 0.0;  ///< additive constant in f
};

/// f ∘ (Λ − βΛ') as a function of eigenvalues, plus the same f on ℝ^N.
///
/// The deformation uses Λ − βΛ' = (1+β)Λ − β σ_1(λ)·1 with σ_1 recovered
/// from Λ by the column-sum identity, so Λ' is never materialized.
class Operator {
public:
    explicit Operator(OperatorSpec spec);

    const OperatorSpec& spec() const noexcept { return spec_; }
    const IndexSetFamily& index_sets() const noexcept { return sets_; }
    const SymmetricFunction& function() const noexcept { return function_; }
    std::size_t n() const noexcept { return static_cast<std::size_t>(spec_.n); }
    std::size_t N() const noexcept { return sets_.size(); }

    /// (1+β)Λ − β σ_1·1 written into `out`.
    void deform(std::span<const double> Lambda, std::span<double> out) const;

    /// f at the deformed Λ plus level_shift. Throws AdmissibilityError.
    double f_eval(std::span<const double> Lambda) const;
    /// Df at the deformed Λ: the coefficients f_{Λ_l}.
    std::vector<double> f_grad(std::span<const double> Lambda) const;
    double f_hessian_action(std::span<const double> Lambda, std::span<const double> direction) const;
    /// Margin of the deformed Λ in Γ.
    double margin(std::span<const double> Lambda) const;

    /// F(λ) = f(deformed Λ(λ)) + shift.
    double composite_value(std::span<const double> lambda) const;
    /// Returns F(λ); writes ∂F/∂λ_a into `grad` (size n) and, when
    /// `f_coefficients` is non-empty, the N coefficients f_{Λ_l}.
    double composite_value_and_gradient(std::span<const double> lambda, std::span<double> grad,
                                        std::span<double> f_coefficients = {}) const;
    double composite_margin(std::span<const double> lambda) const;

    /// F at λ = t·1, i.e. f(Λ(t ω)).
    double diagonal_value(double t) const;
    double boundary_sup() const { return function_.boundary_sup() + spec_.level_shift; }

private:
    OperatorSpec spec_;
    IndexSetFamily sets_;
    SymmetricFunction function_;
};

}  // namespace plpde
