#include "plpde/hermfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "plpde/errors.hpp"
#include "plpde/parallel.hpp"

namespace plpde {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

// FFTW's planner is not thread-safe; plan creation and destruction go
// through this lock. Execution of distinct plans is safe.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

template <int Dim>
void decompose_point(const cplx* g, const HermitianMatrix& l_inverse, bool identity, int n, double* lambda,
                     cplx* frame) {
    using Mat = Eigen::Matrix<cplx, Dim, Dim, Eigen::RowMajor>;
    Eigen::Map<const Mat> G(g, n, n);
    Mat A;
    if (identity) {
        A = G;
    } else {
        const Mat L = l_inverse;
        A = L * G * L.adjoint();
    }
    A = (0.5 * (A + A.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<Mat> solver(A);
    if (solver.info() != Eigen::Success) throw Error("pointwise eigen-decomposition failed to converge");
    Eigen::Map<Mat> V(frame, n, n);
    if (identity) {
        V = solver.eigenvectors();
    } else {
        const Mat L = l_inverse;
        V = L.adjoint() * solver.eigenvectors();
    }
    for (int a = 0; a < n; ++a) lambda[a] = solver.eigenvalues()(a);
}

// Closed-form eigenpairs of the 2x2 Hermitian [[a, c], [conj(c), d]].
// Each eigenvector is taken from the better-conditioned row of A − λI, so no
// cancellation occurs when the off-diagonal entry is small.
void decompose_2x2(const cplx* g, const HermitianMatrix& l_inverse, bool identity, double* lambda, cplx* frame) {
    double a;
    double d;
    cplx c;
    if (identity) {
        a = g[0].real();
        c = 0.5 * (g[1] + std::conj(g[2]));
        d = g[3].real();
    } else {
        Eigen::Map<const Eigen::Matrix<cplx, 2, 2, Eigen::RowMajor>> G(g);
        const Eigen::Matrix<cplx, 2, 2, Eigen::RowMajor> L = l_inverse;
        const Eigen::Matrix<cplx, 2, 2, Eigen::RowMajor> A = L * G * L.adjoint();
        a = A(0, 0).real();
        c = 0.5 * (A(0, 1) + std::conj(A(1, 0)));
        d = A(1, 1).real();
    }
    const double mean = 0.5 * (a + d);
    const double delta = 0.5 * (a - d);
    const double r = std::hypot(delta, std::abs(c));
    lambda[0] = mean - r;
    lambda[1] = mean + r;
    cplx w[2][2];  // w[col][row]
    if (r == 0.0) {
        w[0][0] = 1.0; w[0][1] = 0.0;
        w[1][0] = 0.0; w[1][1] = 1.0;
    } else {
        // Eigenvector of the larger eigenvalue.
        cplx top;
        cplx bottom;
        if (delta >= 0.0) {
            top = delta + r;
            bottom = std::conj(c);
        } else {
            top = c;
            bottom = r - delta;
        }
        const double norm = std::sqrt(std::norm(top) + std::norm(bottom));
        top /= norm;
        bottom /= norm;
        w[1][0] = top;
        w[1][1] = bottom;
        w[0][0] = -std::conj(bottom);
        w[0][1] = std::conj(top);
    }
    // frame row-major: frame[i*2 + a] = component i of eigenvector a.
    if (identity) {
        for (int col = 0; col < 2; ++col) {
            frame[0 * 2 + col] = w[col][0];
            frame[1 * 2 + col] = w[col][1];
        }
    } else {
        // v = L^{-*} w
        for (int col = 0; col < 2; ++col) {
            for (int i = 0; i < 2; ++i) {
                frame[i * 2 + col] = std::conj(l_inverse(0, i)) * w[col][0] + std::conj(l_inverse(1, i)) * w[col][1];
            }
        }
    }
}

void decompose_dispatch(const cplx* g, const HermitianMatrix& l_inverse, bool identity, int n, double* lambda,
                        cplx* frame) {
    switch (n) {
        case 1: {
            const double scale = identity ? 1.0 : std::norm(l_inverse(0, 0));
            lambda[0] = g[0].real() * scale;
            frame[0] = identity ? cplx(1.0) : std::conj(l_inverse(0, 0));
            return;
        }
        case 2: decompose_2x2(g, l_inverse, identity, lambda, frame); return;
        case 3: decompose_point<3>(g, l_inverse, identity, n, lambda, frame); return;
        case 4: decompose_point<4>(g, l_inverse, identity, n, lambda, frame); return;
        default: decompose_point<Eigen::Dynamic>(g, l_inverse, identity, n, lambda, frame); return;
    }
}

}  // namespace

// ---------------------------------------------------------------- geometry

void ModelGeometry::set_metric(HermitianMatrix omega) {
    if (omega.size() == 0) omega = HermitianMatrix::Identity(n_, n_);
    if (omega.rows() != n_ || omega.cols() != n_) {
        throw ConfigurationError("metric must be a " + std::to_string(n_) + "x" + std::to_string(n_) + " matrix",
                                 "geometry.omega");
    }
    const double scale = std::max(1.0, omega.cwiseAbs().maxCoeff());
    if ((omega - omega.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw ConfigurationError("metric is not Hermitian", "geometry.omega");
    }
    omega = (0.5 * (omega + omega.adjoint())).eval();
    Eigen::LLT<HermitianMatrix> llt(omega);
    if (llt.info() != Eigen::Success) throw ConfigurationError("metric is not positive definite", "geometry.omega");
    const HermitianMatrix L = llt.matrixL();
    l_inverse_ = L.inverse();
    identity_metric_ = (omega - HermitianMatrix::Identity(n_, n_)).cwiseAbs().maxCoeff() == 0.0;
    omega_ = std::move(omega);
}

ModelGeometry ModelGeometry::flat_torus(int n, int points_per_axis, HermitianMatrix omega) {
    if (n < 1 || n > max_dimension) throw ConfigurationError("complex dimension out of range", "geometry.n");
    if (!is_power_of_two(points_per_axis) || points_per_axis < 2) {
        throw ConfigurationError("points per axis must be a power of two >= 2, got " + std::to_string(points_per_axis),
                                 "geometry.points_per_axis");
    }
    const double total = std::pow(static_cast<double>(points_per_axis), 2.0 * n);
    if (total > static_cast<double>(1u << 27)) {
        throw ConfigurationError("torus grid has too many points", "geometry.points_per_axis");
    }
    ModelGeometry g;
    g.kind_ = GeometryKind::flat_torus;
    g.n_ = n;
    g.points_ = points_per_axis;
    g.count_ = static_cast<std::size_t>(std::llround(total));
    g.a_ = 0.0;
    g.b_ = 1.0;
    g.set_metric(std::move(omega));
    return g;
}

ModelGeometry ModelGeometry::interval(double a, double b, int points, int n, HermitianMatrix omega) {
    if (n < 1 || n > max_dimension) throw ConfigurationError("complex dimension out of range", "geometry.n");
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) {
        throw ConfigurationError("interval endpoints must satisfy a < b", "geometry.a");
    }
    if (points < 5) throw ConfigurationError("interval needs at least 5 nodes", "geometry.points");
    ModelGeometry g;
    g.kind_ = GeometryKind::interval;
    g.n_ = n;
    g.points_ = points;
    g.count_ = static_cast<std::size_t>(points);
    g.a_ = a;
    g.b_ = b;
    g.set_metric(std::move(omega));
    return g;
}

std::vector<std::size_t> ModelGeometry::shape() const {
    return std::vector<std::size_t>(static_cast<std::size_t>(real_dim()), static_cast<std::size_t>(points_));
}

double ModelGeometry::spacing() const noexcept {
    return kind_ == GeometryKind::flat_torus ? 1.0 / points_ : (b_ - a_) / (points_ - 1);
}

double ModelGeometry::diameter() const {
    return kind_ == GeometryKind::flat_torus ? std::sqrt(2.0 * n_) / 2.0 : b_ - a_;
}

void ModelGeometry::coordinates(std::size_t p, std::span<double> out) const {
    if (kind_ == GeometryKind::interval) {
        out[0] = a_ + (b_ - a_) * static_cast<double>(p) / (points_ - 1);
        return;
    }
    const auto m = static_cast<std::size_t>(points_);
    for (int d = real_dim() - 1; d >= 0; --d) {
        out[static_cast<std::size_t>(d)] = static_cast<double>(p % m) / points_;
        p /= m;
    }
}

std::vector<double> ModelGeometry::coordinates(std::size_t p) const {
    std::vector<double> x(static_cast<std::size_t>(real_dim()));
    coordinates(p, x);
    return x;
}

bool ModelGeometry::same_grid(const ModelGeometry& o) const {
    return kind_ == o.kind_ && n_ == o.n_ && points_ == o.points_ && a_ == o.a_ && b_ == o.b_ &&
           omega_ == o.omega_;
}

json ModelGeometry::to_json() const {
    json omega = json::array();
    for (int i = 0; i < n_; ++i) {
        json row = json::array();
        for (int j = 0; j < n_; ++j) row.push_back({omega_(i, j).real(), omega_(i, j).imag()});
        omega.push_back(row);
    }
    if (kind_ == GeometryKind::flat_torus) {
        return json{{"kind", "flat_torus"}, {"n", n_}, {"points_per_axis", points_}, {"omega", omega}};
    }
    return json{{"kind", "interval"}, {"n", n_}, {"a", a_}, {"b", b_}, {"points", points_}, {"omega", omega}};
}

ModelGeometry ModelGeometry::from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const int n = j.value("n", 1);
    HermitianMatrix omega;
    if (j.contains("omega")) {
        const auto& rows = j.at("omega");
        omega.resize(n, n);
        if (rows.size() != static_cast<std::size_t>(n)) throw ConfigurationError("metric has wrong size", "geometry.omega");
        for (int r = 0; r < n; ++r) {
            if (rows[static_cast<std::size_t>(r)].size() != static_cast<std::size_t>(n)) {
                throw ConfigurationError("metric has wrong size", "geometry.omega");
            }
            for (int c = 0; c < n; ++c) {
                const auto& e = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
                omega(r, c) = e.is_array() ? cplx(e.at(0).get<double>(), e.at(1).get<double>()) : cplx(e.get<double>());
            }
        }
    }
    if (kind == "flat_torus") return flat_torus(n, j.at("points_per_axis").get<int>(), omega);
    if (kind == "interval") return interval(j.at("a").get<double>(), j.at("b").get<double>(), j.at("points").get<int>(), n, omega);
    throw ConfigurationError("unknown geometry kind '" + kind + "'", "geometry.kind");
}

// ---------------------------------------------------------------- fields

ScalarField::ScalarField(ModelGeometry g) : geometry(std::move(g)), values(geometry.point_count(), 0.0) {}

ScalarField::ScalarField(ModelGeometry g, std::vector<double> v) : geometry(std::move(g)), values(std::move(v)) {
    if (values.size() != geometry.point_count()) throw ConfigurationError("scalar field size does not match its grid");
}

ScalarField ScalarField::constant(const ModelGeometry& g, double c) {
    ScalarField f(g);
    std::fill(f.values.begin(), f.values.end(), c);
    return f;
}

double ScalarField::max() const { return *std::max_element(values.begin(), values.end()); }
double ScalarField::min() const { return *std::min_element(values.begin(), values.end()); }
double ScalarField::mean() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

HermitianField::HermitianField(ModelGeometry g)
    : geometry(std::move(g)),
      data(geometry.point_count() * static_cast<std::size_t>(geometry.n() * geometry.n()), cplx(0.0)) {}

HermitianField HermitianField::constant(const ModelGeometry& g, const HermitianMatrix& m) {
    if (m.rows() != g.n() || m.cols() != g.n()) throw ConfigurationError("matrix size does not match the geometry");
    HermitianField f(g);
    const std::size_t nn = static_cast<std::size_t>(g.n() * g.n());
    for (std::size_t p = 0; p < f.size(); ++p) std::copy(m.data(), m.data() + nn, f.data.begin() + static_cast<std::ptrdiff_t>(p * nn));
    return f;
}

HermitianField HermitianField::scaled_metric(const ModelGeometry& g, double c) {
    return constant(g, c * g.omega());
}

Eigen::Map<HermitianMatrix> HermitianField::at(std::size_t p) {
    const int n = geometry.n();
    return {data.data() + p * static_cast<std::size_t>(n * n), n, n};
}

Eigen::Map<const HermitianMatrix> HermitianField::at(std::size_t p) const {
    const int n = geometry.n();
    return {data.data() + p * static_cast<std::size_t>(n * n), n, n};
}

double HermitianField::hermitian_defect() const {
    double worst = 0.0;
    for (std::size_t p = 0; p < size(); ++p) {
        const auto A = at(p);
        worst = std::max(worst, (A - A.adjoint()).cwiseAbs().maxCoeff());
    }
    return worst;
}

SpectralField::SpectralField(ModelGeometry g)
    : geometry(std::move(g)),
      eigenvalues(geometry.point_count() * static_cast<std::size_t>(geometry.n()), 0.0),
      frames(geometry.point_count() * static_cast<std::size_t>(geometry.n() * geometry.n()), cplx(0.0)) {}

Eigen::Map<const HermitianMatrix> SpectralField::frame(std::size_t p) const {
    const int n = geometry.n();
    return {frames.data() + p * static_cast<std::size_t>(n * n), n, n};
}

// ---------------------------------------------------------------- spectral differentiation

struct TorusSpectral::Impl {
    double* real = nullptr;
    fftw_complex* spectrum = nullptr;
    fftw_complex* scratch = nullptr;
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
    std::size_t points = 0;

    ~Impl() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        if (r2c) fftw_destroy_plan(r2c);
        if (c2r) fftw_destroy_plan(c2r);
        fftw_free(real);
        fftw_free(spectrum);
        fftw_free(scratch);
    }
};

TorusSpectral::TorusSpectral(const ModelGeometry& geometry) : geometry_(geometry), impl_(std::make_unique<Impl>()) {
    if (geometry.kind() != GeometryKind::flat_torus) throw ConfigurationError("spectral differentiation needs a torus");
    const int rank = geometry.real_dim();
    const int m = geometry.points_per_axis();
    std::vector<int> dims(static_cast<std::size_t>(rank), m);
    impl_->points = geometry.point_count();
    spectrum_size_ = impl_->points / static_cast<std::size_t>(m) * static_cast<std::size_t>(m / 2 + 1);
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        impl_->real = fftw_alloc_real(impl_->points);
        impl_->spectrum = fftw_alloc_complex(spectrum_size_);
        impl_->scratch = fftw_alloc_complex(spectrum_size_);
        // FFTW_ESTIMATE keeps the chosen algorithm, and so the rounding, fixed
        // from run to run.
        impl_->r2c = fftw_plan_dft_r2c(rank, dims.data(), impl_->real, impl_->spectrum, FFTW_ESTIMATE);
        impl_->c2r = fftw_plan_dft_c2r(rank, dims.data(), impl_->scratch, impl_->real, FFTW_ESTIMATE);
    }
    if (!impl_->r2c || !impl_->c2r) throw Error("FFTW plan creation failed");

    // Wave numbers per spectrum entry and axis.
    const int n = geometry.n();
    const std::size_t S = spectrum_size_;
    std::vector<std::vector<double>> k(static_cast<std::size_t>(rank), std::vector<double>(S));
    std::vector<std::vector<char>> nyquist(static_cast<std::size_t>(rank), std::vector<char>(S));
    const std::size_t last = static_cast<std::size_t>(m / 2 + 1);
    for (std::size_t s = 0; s < S; ++s) {
        std::size_t rest = s;
        for (int d = rank - 1; d >= 0; --d) {
            const std::size_t extent = d == rank - 1 ? last : static_cast<std::size_t>(m);
            const int idx = static_cast<int>(rest % extent);
            rest /= extent;
            const int freq = idx <= m / 2 ? idx : idx - m;
            k[static_cast<std::size_t>(d)][s] = 2.0 * std::numbers::pi * freq;
            nyquist[static_cast<std::size_t>(d)][s] = (m % 2 == 0 && idx == m / 2) ? 1 : 0;
        }
    }
    auto first = [&](int axis, std::size_t s) {
        return nyquist[static_cast<std::size_t>(axis)][s] ? 0.0 : k[static_cast<std::size_t>(axis)][s];
    };
    first_symbols_.assign(static_cast<std::size_t>(rank), std::vector<double>(S));
    for (int d = 0; d < rank; ++d) {
        for (std::size_t s = 0; s < S; ++s) first_symbols_[static_cast<std::size_t>(d)][s] = first(d, s);
    }
    symbols_.assign(static_cast<std::size_t>(n * n), std::vector<double>(S));
    for (int i = 0; i < n; ++i) {
        auto& diag = symbols_[static_cast<std::size_t>(i)];
        for (std::size_t s = 0; s < S; ++s) {
            const double kx = k[static_cast<std::size_t>(2 * i)][s];
            const double ky = k[static_cast<std::size_t>(2 * i + 1)][s];
            diag[s] = 0.25 * (-kx * kx - ky * ky);
        }
    }
    std::size_t slot = static_cast<std::size_t>(n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            auto& re = symbols_[slot++];
            auto& im = symbols_[slot++];
            for (std::size_t s = 0; s < S; ++s) {
                const double kxi = first(2 * i, s), kyi = first(2 * i + 1, s);
                const double kxj = first(2 * j, s), kyj = first(2 * j + 1, s);
                re[s] = 0.25 * (-kxi * kxj - kyi * kyj);
                im[s] = 0.25 * (kyi * kxj - kxi * kyj);
            }
        }
    }
}

TorusSpectral::~TorusSpectral() = default;

void TorusSpectral::forward(std::span<const double> values) {
    if (values.size() != impl_->points) throw DomainError("spectral transform: field size mismatch");
    std::copy(values.begin(), values.end(), impl_->real);
    fftw_execute(impl_->r2c);
}

std::span<cplx> TorusSpectral::spectrum() noexcept {
    return {reinterpret_cast<cplx*>(impl_->spectrum), spectrum_size_};
}

void TorusSpectral::inverse(std::span<const double> symbol, std::span<double> out) {
    if (symbol.size() != spectrum_size_ || out.size() != impl_->points) throw DomainError("spectral inverse: size mismatch");
    const double scale = 1.0 / static_cast<double>(impl_->points);
    for (std::size_t s = 0; s < spectrum_size_; ++s) {
        const double f = symbol[s] * scale;
        impl_->scratch[s][0] = impl_->spectrum[s][0] * f;
        impl_->scratch[s][1] = impl_->spectrum[s][1] * f;
    }
    fftw_execute(impl_->c2r);
    std::copy(impl_->real, impl_->real + impl_->points, out.begin());
}

void TorusSpectral::derivative(int axis, std::span<double> out) {
    if (axis < 0 || axis >= geometry_.real_dim()) throw DomainError("derivative: axis out of range");
    if (out.size() != impl_->points) throw DomainError("derivative: size mismatch");
    const auto& k = first_symbols_[static_cast<std::size_t>(axis)];
    const double scale = 1.0 / static_cast<double>(impl_->points);
    for (std::size_t s = 0; s < spectrum_size_; ++s) {
        // multiplication by √−1·k
        const double f = k[s] * scale;
        impl_->scratch[s][0] = -impl_->spectrum[s][1] * f;
        impl_->scratch[s][1] = impl_->spectrum[s][0] * f;
    }
    fftw_execute(impl_->c2r);
    std::copy(impl_->real, impl_->real + impl_->points, out.begin());
}

const std::vector<double>& TorusSpectral::hessian_symbol(int i, int j, bool imag) const {
    const int n = geometry_.n();
    if (i < 0 || j < i || j >= n || (i == j && imag)) throw DomainError("hessian_symbol: need 0 <= i <= j < n");
    if (i == j) return symbols_[static_cast<std::size_t>(i)];
    // Pairs (i, j), i < j, in lexicographic order after the n diagonal slots.
    std::size_t slot = static_cast<std::size_t>(n);
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            if (a == i && b == j) return symbols_[slot + (imag ? 1 : 0)];
            slot += 2;
        }
    }
    throw DomainError("hessian_symbol: bad index");
}

std::vector<double> TorusSpectral::trace_symbol(const HermitianMatrix& M) const {
    const int n = geometry_.n();
    std::vector<double> out(spectrum_size_, 0.0);
    for (int i = 0; i < n; ++i) {
        const double m = M(i, i).real();
        const auto& d = hessian_symbol(i, i, false);
        for (std::size_t s = 0; s < spectrum_size_; ++s) out[s] += m * d[s];
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double mr = 2.0 * M(i, j).real();
            const double mi = 2.0 * M(i, j).imag();
            const auto& re = hessian_symbol(i, j, false);
            const auto& im = hessian_symbol(i, j, true);
            for (std::size_t s = 0; s < spectrum_size_; ++s) out[s] += mr * re[s] + mi * im[s];
        }
    }
    return out;
}

// ---------------------------------------------------------------- Hessian

void complex_hessian(std::span<const double> u, TorusSpectral& spectral, HermitianField& H) {
    const auto& g = H.geometry;
    if (!g.same_grid(spectral.geometry()) || u.size() != g.point_count()) {
        throw ConfigurationError("spectral differentiator built for another grid");
    }
    const int n = g.n();
    const std::size_t nn = static_cast<std::size_t>(n * n);
    spectral.forward(u);
    thread_local std::vector<double> tmp;
    thread_local std::vector<double> tmp_im;
    tmp.resize(u.size());
    tmp_im.resize(u.size());
    for (int i = 0; i < n; ++i) {
        spectral.inverse(spectral.hessian_symbol(i, i, false), tmp);
        for (std::size_t p = 0; p < tmp.size(); ++p) H.data[p * nn + static_cast<std::size_t>(i * n + i)] = tmp[p];
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            spectral.inverse(spectral.hessian_symbol(i, j, false), tmp);
            spectral.inverse(spectral.hessian_symbol(i, j, true), tmp_im);
            for (std::size_t p = 0; p < tmp.size(); ++p) {
                const cplx v(tmp[p], tmp_im[p]);
                H.data[p * nn + static_cast<std::size_t>(i * n + j)] = v;
                H.data[p * nn + static_cast<std::size_t>(j * n + i)] = std::conj(v);
            }
        }
    }
}

HermitianField complex_hessian(const ScalarField& u, TorusSpectral& spectral) {
    HermitianField H(u.geometry);
    complex_hessian(u.values, spectral, H);
    return H;
}

HermitianField complex_hessian(const ScalarField& u) {
    const auto& g = u.geometry;
    if (g.kind() == GeometryKind::flat_torus) {
        TorusSpectral spectral(g);
        return complex_hessian(u, spectral);
    }
    HermitianField H(g);
    const std::size_t m = u.size();
    const double h = g.spacing();
    const double inv_h2 = 1.0 / (h * h);
    const std::size_t nn = static_cast<std::size_t>(g.n() * g.n());
    const auto& v = u.values;
    for (std::size_t p = 0; p < m; ++p) {
        double second;
        if (p == 0) {
            second = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) * inv_h2;
        } else if (p == m - 1) {
            second = (2.0 * v[m - 1] - 5.0 * v[m - 2] + 4.0 * v[m - 3] - v[m - 4]) * inv_h2;
        } else {
            second = (v[p - 1] - 2.0 * v[p] + v[p + 1]) * inv_h2;
        }
        H.data[p * nn] = 0.25 * second;
    }
    return H;
}

HermitianField assemble_g(const HermitianField& hessian, const HermitianField& X) {
    if (!hessian.geometry.same_grid(X.geometry)) throw ConfigurationError("assemble_g: grid mismatch");
    HermitianField out(hessian.geometry);
    const int n = hessian.n();
    const std::size_t nn = static_cast<std::size_t>(n * n);
    for (std::size_t p = 0; p < out.size(); ++p) {
        const cplx* h = hessian.data.data() + p * nn;
        const cplx* x = X.data.data() + p * nn;
        cplx* dst = out.data.data() + p * nn;
        for (int i = 0; i < n; ++i) {
            const std::size_t ii = static_cast<std::size_t>(i * n + i);
            dst[ii] = (h[ii] + x[ii]).real();
            for (int j = i + 1; j < n; ++j) {
                const std::size_t ij = static_cast<std::size_t>(i * n + j);
                const std::size_t ji = static_cast<std::size_t>(j * n + i);
                const cplx v = 0.5 * ((h[ij] + x[ij]) + std::conj(h[ji] + x[ji]));
                dst[ij] = v;
                dst[ji] = std::conj(v);
            }
        }
    }
    return out;
}

HermitianField assemble_g(const ScalarField& u, const HermitianField& X) { return assemble_g(complex_hessian(u), X); }

// ---------------------------------------------------------------- spectra

void spectral_decompose(const HermitianField& g, SpectralField& s) {
    if (!s.geometry.same_grid(g.geometry)) s = SpectralField(g.geometry);
    const int n = g.n();
    const std::size_t nn = static_cast<std::size_t>(n * n);
    const auto& linv = g.geometry.omega_cholesky_inverse();
    const bool identity = g.geometry.omega_is_identity();
    parallel_for(g.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            decompose_dispatch(g.data.data() + p * nn, linv, identity, n,
                               s.eigenvalues.data() + p * static_cast<std::size_t>(n), s.frames.data() + p * nn);
        }
    });
}

SpectralField spectral_decompose(const HermitianField& g) {
    SpectralField s(g.geometry);
    spectral_decompose(g, s);
    return s;
}

PointwiseEvaluation evaluate_operator(const Operator& op, const SpectralField& s, double shift, bool linearize,
                                      bool throw_on_inadmissible) {
    const int n = s.geometry.n();
    if (static_cast<std::size_t>(n) != op.n()) throw ConfigurationError("operator dimension does not match the geometry");
    const std::size_t P = s.geometry.point_count();
    PointwiseEvaluation out;
    out.value.assign(P, 0.0);
    out.margin.assign(P, 0.0);
    out.coefficient_sum.assign(P, 0.0);
    out.min_frame_diagonal.assign(P, 0.0);
    if (linearize) out.linearization = std::make_unique<HermitianField>(s.geometry);
    const double nan = std::numeric_limits<double>::quiet_NaN();

    parallel_for(P, [&](std::size_t begin, std::size_t end) {
        std::vector<double> lam(static_cast<std::size_t>(n));
        std::vector<double> grad(static_cast<std::size_t>(n));
        std::vector<double> coeff(op.N());
        for (std::size_t p = begin; p < end; ++p) {
            const auto l = s.lambda(p);
            for (int a = 0; a < n; ++a) lam[static_cast<std::size_t>(a)] = l[static_cast<std::size_t>(a)] + shift;
            const double margin = op.composite_margin(lam);
            out.margin[p] = margin;
            if (!(margin > 0.0)) {
                out.value[p] = nan;
                continue;
            }
            try {
                out.value[p] = op.composite_value_and_gradient(lam, grad, coeff);
            } catch (const AdmissibilityError&) {
                out.margin[p] = 0.0;
                out.value[p] = nan;
                continue;
            }
            double total = 0.0;
            for (double c : coeff) total += c;
            out.coefficient_sum[p] = total;
            out.min_frame_diagonal[p] = *std::min_element(grad.begin(), grad.end());
            if (linearize) {
                const auto V = s.frame(p);
                auto M = out.linearization->at(p);
                for (int i = 0; i < n; ++i) {
                    for (int j = i; j < n; ++j) {
                        cplx acc(0.0);
                        for (int a = 0; a < n; ++a) acc += grad[static_cast<std::size_t>(a)] * V(i, a) * std::conj(V(j, a));
                        if (i == j) {
                            M(i, i) = acc.real();
                        } else {
                            M(i, j) = acc;
                            M(j, i) = std::conj(acc);
                        }
                    }
                }
            }
        }
    });

    out.min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < P; ++p) {
        if (out.margin[p] < out.min_margin) {
            out.min_margin = out.margin[p];
            out.worst_point = p;
        }
        if (out.admissible && !(out.margin[p] > 0.0)) {
            out.admissible = false;
            if (throw_on_inadmissible) {
                std::vector<double> lam(s.lambda(p).begin(), s.lambda(p).end());
                for (double& v : lam) v += shift;
                std::vector<double> Lambda = lambda_map(lam, op.index_sets());
                std::vector<double> D(Lambda.size());
                op.deform(Lambda, D);
                throw AdmissibilityError(op.function().violated_constraint(D), p);
            }
        }
    }
    return out;
}

HermitianField linearization_coefficients(const Operator& op, const SpectralField& s) {
    auto eval = evaluate_operator(op, s, 0.0, true, true);
    return std::move(*eval.linearization);
}

}  // namespace plpde
