#pragma once

// Grids of Hermitian forms over flat model geometries: the complex Hessian
// ∂∂̄u, the field 𝔤 = ∂∂̄u + X, its pointwise eigen-decomposition with
// respect to ω, and the linearization coefficients of f ∘ Λ ∘ λ.

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "plpde/json.hpp"
#include "plpde/symcalc.hpp"

namespace plpde {

using cplx = std::complex<double>;
using HermitianMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class GeometryKind { flat_torus, interval };

/// A flat model geometry with a constant Hermitian metric ω.
///
/// FlatTorus: ℂⁿ / ℤ^{2n} sampled on [0,1)^{2n}, axes ordered
/// (x₁, y₁, …, xₙ, yₙ) with zᵢ = xᵢ + √−1 yᵢ, row-major (last axis fastest).
///
/// Interval: nodes a = x₀ < … < x_{m−1} = b of the real part of z₁; fields
/// depend on x only, so ∂∂̄u has the single entry (1,1) = ¼ u''.
class ModelGeometry {
public:
    static ModelGeometry flat_torus(int n, int points_per_axis, HermitianMatrix omega = {});
    static ModelGeometry interval(double a, double b, int points, int n = 1, HermitianMatrix omega = {});

    GeometryKind kind() const noexcept { return kind_; }
    int n() const noexcept { return n_; }
    int points_per_axis() const noexcept { return points_; }
    int real_dim() const noexcept { return kind_ == GeometryKind::flat_torus ? 2 * n_ : 1; }
    std::size_t point_count() const noexcept { return count_; }
    std::vector<std::size_t> shape() const;
    double a() const noexcept { return a_; }
    double b() const noexcept { return b_; }
    /// Grid spacing: 1/points on the torus, (b − a)/(points − 1) on the interval.
    double spacing() const noexcept;
    /// Largest distance between two points of the domain.
    double diameter() const;

    const HermitianMatrix& omega() const noexcept { return omega_; }
    /// L⁻¹ for the Cholesky factor ω = L L*.
    const HermitianMatrix& omega_cholesky_inverse() const noexcept { return l_inverse_; }
    bool omega_is_identity() const noexcept { return identity_metric_; }

    /// Real coordinates of grid point p (2n values on the torus, 1 on the interval).
    void coordinates(std::size_t p, std::span<double> out) const;
    std::vector<double> coordinates(std::size_t p) const;

    bool same_grid(const ModelGeometry& other) const;
    json to_json() const;
    static ModelGeometry from_json(const json& j);

private:
    ModelGeometry() = default;
    void set_metric(HermitianMatrix omega);

    GeometryKind kind_ = GeometryKind::flat_torus;
    int n_ = 1;
    int points_ = 0;
    std::size_t count_ = 0;
    double a_ = 0.0;
    double b_ = 1.0;
    HermitianMatrix omega_;
    HermitianMatrix l_inverse_;
    bool identity_metric_ = true;
};

struct ScalarField {
    ModelGeometry geometry;
    std::vector<double> values;

    explicit ScalarField(ModelGeometry g);
    ScalarField(ModelGeometry g, std::vector<double> v);
    template <class Fn>
    static ScalarField from_function(const ModelGeometry& g, Fn&& fn) {
        ScalarField out(g);
        std::vector<double> x(static_cast<std::size_t>(g.real_dim()));
        for (std::size_t p = 0; p < g.point_count(); ++p) {
            g.coordinates(p, x);
            out.values[p] = fn(std::span<const double>(x));
        }
        return out;
    }
    static ScalarField constant(const ModelGeometry& g, double c);

    std::size_t size() const noexcept { return values.size(); }
    double max() const;
    double min() const;
    double mean() const;
};

/// A grid of n×n Hermitian matrices stored point-major, each row-major.
struct HermitianField {
    ModelGeometry geometry;
    std::vector<cplx> data;

    explicit HermitianField(ModelGeometry g);
    /// The same matrix at every point.
    static HermitianField constant(const ModelGeometry& g, const HermitianMatrix& m);
    /// c·ω at every point.
    static HermitianField scaled_metric(const ModelGeometry& g, double c);

    int n() const noexcept { return geometry.n(); }
    std::size_t size() const noexcept { return geometry.point_count(); }
    Eigen::Map<HermitianMatrix> at(std::size_t p);
    Eigen::Map<const HermitianMatrix> at(std::size_t p) const;
    /// max over points of |A − A*| (entrywise).
    double hermitian_defect() const;
};

/// Pointwise generalized eigenpairs 𝔤 v_a = λ_a ω v_a, λ ascending,
/// v_a* ω v_b = δ_ab. frames[p n² + i n + a] is component i of v_a.
struct SpectralField {
    ModelGeometry geometry;
    std::vector<double> eigenvalues;
    std::vector<cplx> frames;

    explicit SpectralField(ModelGeometry g);
    std::span<const double> lambda(std::size_t p) const {
        const auto n = static_cast<std::size_t>(geometry.n());
        return {eigenvalues.data() + p * n, n};
    }
    /// Columns are the eigenvectors at point p.
    Eigen::Map<const HermitianMatrix> frame(std::size_t p) const;
};

/// Fourier differentiation on the flat torus with cached FFTW plans.
///
/// Hessian symbols (k = 2π·frequency): entry (i,i) is ¼(−k_{xi}² − k_{yi}²);
/// for i < j, Re is ¼(−k_{xi}k_{xj} − k_{yi}k_{yj}) and Im is
/// ¼(k_{yi}k_{xj} − k_{xi}k_{yj}). Products of first derivatives along
/// different axes vanish at the Nyquist frequency.
class TorusSpectral {
public:
    explicit TorusSpectral(const ModelGeometry& geometry);
    ~TorusSpectral();
    TorusSpectral(const TorusSpectral&) = delete;
    TorusSpectral& operator=(const TorusSpectral&) = delete;

    std::size_t spectrum_size() const noexcept { return spectrum_size_; }
    const ModelGeometry& geometry() const noexcept { return geometry_; }

    /// Transforms a real field into the stored spectrum.
    void forward(std::span<const double> values);
    /// out = F⁻¹[symbol · stored spectrum] (normalized).
    void inverse(std::span<const double> symbol, std::span<double> out);
    /// Mutable access to the stored spectrum (unnormalized r2c layout).
    std::span<cplx> spectrum() noexcept;

    /// Real symbol of Re (∂_i ∂̄_j) or Im (∂_i ∂̄_j); `imag` must be false when i == j.
    const std::vector<double>& hessian_symbol(int i, int j, bool imag) const;
    /// Symbol of δu ↦ tr(M ∂∂̄δu) for a constant Hermitian M.
    std::vector<double> trace_symbol(const HermitianMatrix& m) const;
    /// out = ∂u/∂(real axis) of the stored spectrum; the Nyquist mode is dropped.
    void derivative(int axis, std::span<double> out);

private:
    struct Impl;
    ModelGeometry geometry_;
    std::size_t spectrum_size_ = 0;
    std::unique_ptr<Impl> impl_;
    std::vector<std::vector<double>> symbols_;
    std::vector<std::vector<double>> first_symbols_;
};

/// ∂∂̄u: spectral on the torus, second-order finite differences on the
/// interval (one-sided second-order closure at the two end nodes).
HermitianField complex_hessian(const ScalarField& u);
HermitianField complex_hessian(const ScalarField& u, TorusSpectral& spectral);
/// Writes ∂∂̄u into an existing field on the same grid (no allocation).
void complex_hessian(std::span<const double> u, TorusSpectral& spectral, HermitianField& out);

/// 𝔤 = ∂∂̄u + X, re-symmetrized as ½(A + A*).
HermitianField assemble_g(const ScalarField& u, const HermitianField& X);
HermitianField assemble_g(const HermitianField& hessian, const HermitianField& X);

/// Pointwise Cholesky-reduced generalized eigenproblem. Throws
/// ConfigurationError when ω is not positive definite.
SpectralField spectral_decompose(const HermitianField& g);
void spectral_decompose(const HermitianField& g, SpectralField& out);

/// G = Σ_a g_a v_a v_a* with g_a = ∂(f∘Λ)/∂λ_a. Throws AdmissibilityError
/// with the grid index at the first inadmissible point.
HermitianField linearization_coefficients(const Operator& op, const SpectralField& s);

/// f∘Λ∘λ evaluated on a spectral field, optionally with the linearization.
struct PointwiseEvaluation {
    std::vector<double> value;        ///< F(λ + shift·1)
    std::vector<double> margin;       ///< cone margin of the deformed Λ
    std::vector<double> coefficient_sum;  ///< Σ_l f_{Λ_l}
    std::vector<double> min_frame_diagonal;  ///< min_a g_a
    std::unique_ptr<HermitianField> linearization;  ///< M = Σ g_a v_a v_a*
    double min_margin = 0.0;
    std::size_t worst_point = 0;
    bool admissible = true;
};

/// Evaluates F at λ(p) + shift·1 (i.e. for 𝔤 + shift·ω) at every point.
/// Inadmissible points get value NaN and clear `admissible`; when
/// `throw_on_inadmissible` is set an AdmissibilityError is raised instead.
PointwiseEvaluation evaluate_operator(const Operator& op, const SpectralField& s, double shift, bool linearize,
                                      bool throw_on_inadmissible);

}  // namespace plpde
