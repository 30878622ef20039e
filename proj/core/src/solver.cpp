#include "plpde/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <memory>

#include "plpde/linear.hpp"
#include "plpde/parallel.hpp"

namespace plpde {

namespace {

std::atomic<std::uint64_t> g_accepted{0};
std::atomic<std::uint64_t> g_inadmissible{0};
std::atomic<std::uint64_t> g_nonmonotone{0};

double max_abs(const std::vector<double>& v, std::size_t* where = nullptr) {
    double m = 0.0;
    std::size_t at = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double a = std::abs(v[i]);
        if (!(a <= m)) {  // also catches NaN
            m = a;
            at = i;
            if (std::isnan(a)) {
                m = std::numeric_limits<double>::infinity();
                break;
            }
        }
    }
    if (where) *where = at;
    return m;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

void emit(const SolverOptions& options, json event) {
    if (options.diagnostics) options.diagnostics(event);
}

// Everything that depends only on the problem: differentiation, the fixed
// fields, reusable buffers, and the homotopy anchor H.
class Discretization {
public:
    explicit Discretization(const ProblemSpec& spec)
        : spec_(spec),
          op_(spec.op),
          torus_(spec.geometry.kind() == GeometryKind::flat_torus),
          g_(spec.geometry),
          s_(spec.geometry),
          sx_(spec.geometry),
          anchor_(spec.geometry) {
        if (torus_) spectral_ = std::make_unique<TorusSpectral>(spec.geometry);
        HermitianField x = assemble_g(HermitianField(spec.geometry), spec.X);
        spectral_decompose(x, sx_);
        if (spec.boundary) {
            phi_left_ = spec.boundary->values.front();
            phi_right_ = spec.boundary->values.back();
        }
    }

    const ProblemSpec& spec() const { return spec_; }
    const Operator& op() const { return op_; }
    bool torus() const { return torus_; }
    std::size_t size() const { return spec_.geometry.point_count(); }
    bool dirichlet() const { return spec_.mode == SolveMode::dirichlet; }
    bool is_boundary(std::size_t p) const { return dirichlet() && (p == 0 || p + 1 == size()); }

    void set_A(double A) {
        A_ = A;
        const auto pe = evaluate_operator(op_, sx_, A, false, false);
        anchor_.values = pe.value;
        for (std::size_t p = 0; p < size(); ++p) {
            if (is_boundary(p)) anchor_.values[p] = spec_.psi.values[p];
        }
    }
    double A() const { return A_; }
    const ScalarField& anchor() const { return anchor_; }

    struct Evaluation {
        std::vector<double> R;
        std::vector<double> rhs;  // e^{b+tu} ψᵗ
        PointwiseEvaluation pe;
        double max_residual = 0.0;
        std::size_t worst = 0;
        bool admissible = true;
        double min_margin = 0.0;
        std::size_t worst_margin_point = 0;
    };

    double psi_t(std::size_t p, double t) const {
        return t == 0.0 ? spec_.psi.values[p] : t * anchor_.values[p] + (1.0 - t) * spec_.psi.values[p];
    }

    Evaluation evaluate(const std::vector<double>& u, double t, double b, bool linearize) {
        const std::size_t P = size();
        if (torus_) {
            // The constant part of u is removed before differentiating so a
            // large mean does not pollute the Hessian with rounding error.
            const double mean = mean_of(u);
            centered_.resize(P);
            for (std::size_t p = 0; p < P; ++p) centered_[p] = u[p] - mean;
            complex_hessian(centered_, *spectral_, g_);
        } else {
            g_ = complex_hessian(ScalarField(spec_.geometry, u));
        }
        add_X();
        spectral_decompose(g_, s_);
        Evaluation e;
        e.pe = evaluate_operator(op_, s_, t * A_, linearize, false);
        e.R.resize(P);
        e.rhs.resize(P);
        e.min_margin = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < P; ++p) {
            if (is_boundary(p)) {
                e.R[p] = u[p] - (p == 0 ? phi_left_ : phi_right_);
                e.rhs[p] = 0.0;
                continue;
            }
            if (e.pe.margin[p] < e.min_margin) {
                e.min_margin = e.pe.margin[p];
                e.worst_margin_point = p;
            }
            if (!(e.pe.margin[p] > 0.0)) e.admissible = false;
            e.rhs[p] = std::exp(b + t * u[p]) * psi_t(p, t);
            e.R[p] = e.pe.value[p] - e.rhs[p];
        }
        e.max_residual = e.admissible ? max_abs(e.R, &e.worst) : std::numeric_limits<double>::infinity();
        return e;
    }

    [[noreturn]] void throw_inadmissible(const Evaluation& e, double t) const {
        const std::size_t p = e.worst_margin_point;
        std::vector<double> lam(s_.lambda(p).begin(), s_.lambda(p).end());
        for (double& v : lam) v += t * A_;
        std::vector<double> L = lambda_map(lam, op_.index_sets());
        std::vector<double> D(L.size());
        op_.deform(L, D);
        throw AdmissibilityError(op_.function().violated_constraint(D), p);
    }

    /// Bound constants at t from the decomposition of X.
    BoundRecord bounds(const std::vector<double>& u, double t) const {
        BoundRecord r;
        r.t = t;
        double sup_u = -std::numeric_limits<double>::infinity();
        double inf_u = std::numeric_limits<double>::infinity();
        for (double v : u) {
            sup_u = std::max(sup_u, v);
            inf_u = std::min(inf_u, v);
        }
        r.t_sup_u = t * sup_u;
        r.t_inf_u = t * inf_u;
        r.upper_constant = -std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < size(); ++p) {
            r.upper_constant = std::max(r.upper_constant, std::log(anchor_.values[p] / psi_t(p, t)));
        }
        const auto pe = evaluate_operator(op_, sx_, t * A_, false, false);
        r.lower_constant = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < size(); ++p) {
            if (!(pe.margin[p] > 0.0) || !(pe.value[p] > 0.0)) {
                r.lower_constant = -std::numeric_limits<double>::infinity();
                break;
            }
            r.lower_constant = std::min(r.lower_constant, std::log(pe.value[p] / psi_t(p, t)));
        }
        r.within = r.t_sup_u <= r.upper_constant + 1e-8 && r.t_inf_u >= r.lower_constant - 1e-8;
        return r;
    }

    // ---- linearized operator ------------------------------------------------

    struct Linearization {
        std::vector<std::vector<double>> coeff;  // per Hessian symbol slot
        std::vector<double> zero_order;          // c = t e^{b+tu} ψᵗ
        std::vector<double> d_b;                 // e^{b} ψ (augmented system)
        std::vector<double> inverse_symbol;      // preconditioner
        double shift = 0.0;                      // Tikhonov
        bool augmented = false;
    };

    Linearization linearize(const Evaluation& e, double t, bool augmented, const SolverOptions& options,
                            SolveState& state) {
        const int n = spec_.geometry.n();
        const std::size_t P = size();
        const auto& M = *e.pe.linearization;
        Linearization L;
        L.augmented = augmented;
        L.zero_order.resize(P);
        for (std::size_t p = 0; p < P; ++p) L.zero_order[p] = is_boundary(p) ? 0.0 : t * e.rhs[p];
        if (augmented) L.d_b = e.rhs;

        // Degenerate ellipticity guard.
        double trace_sum = 0.0;
        bool degenerate = false;
        for (std::size_t p = 0; p < P; ++p) {
            if (is_boundary(p)) continue;
            double tr = 0.0;
            for (int i = 0; i < n; ++i) tr += M.at(p)(i, i).real();
            trace_sum += tr;
            if (e.pe.min_frame_diagonal[p] < 1e-12 * std::abs(tr)) degenerate = true;
        }
        if (degenerate) {
            L.shift = 1e-10 * trace_sum / static_cast<double>(P);
            state.tikhonov_used = true;
            emit(options, json{{"event", "tikhonov_shift"}, {"t", t}, {"shift", L.shift}});
        }

        if (torus_) {
            L.coeff.assign(static_cast<std::size_t>(n * n), std::vector<double>(P));
            for (std::size_t p = 0; p < P; ++p) {
                const auto m = M.at(p);
                std::size_t slot = static_cast<std::size_t>(n);
                for (int i = 0; i < n; ++i) L.coeff[static_cast<std::size_t>(i)][p] = m(i, i).real();
                for (int i = 0; i < n; ++i) {
                    for (int j = i + 1; j < n; ++j) {
                        L.coeff[slot++][p] = 2.0 * m(i, j).real();
                        L.coeff[slot++][p] = 2.0 * m(i, j).imag();
                    }
                }
            }
            HermitianMatrix mean = HermitianMatrix::Zero(n, n);
            for (std::size_t p = 0; p < P; ++p) mean += M.at(p);
            mean /= static_cast<double>(P);
            L.inverse_symbol = spectral_->trace_symbol(mean);
            const double c_mean = mean_of(L.zero_order) + L.shift;
            for (double& s : L.inverse_symbol) s -= c_mean;
            if (augmented) L.inverse_symbol[0] = -mean_of(L.d_b) - L.shift;
            for (double& s : L.inverse_symbol) s = s != 0.0 ? 1.0 / s : 0.0;
        } else {
            L.coeff.assign(1, std::vector<double>(P));
            for (std::size_t p = 0; p < P; ++p) L.coeff[0][p] = M.at(p)(0, 0).real();
        }
        return L;
    }

    /// y = tr(M ∂∂̄x) − (c + shift) x, torus only.
    void apply(const Linearization& L, const double* x, double* y) {
        const int n = spec_.geometry.n();
        const std::size_t P = size();
        spectral_->forward(std::span<const double>(x, P));
        tmp_.resize(P);
        std::fill(y, y + P, 0.0);
        std::size_t slot = 0;
        auto accumulate = [&](const std::vector<double>& symbol, const std::vector<double>& c) {
            spectral_->inverse(symbol, tmp_);
            for (std::size_t p = 0; p < P; ++p) y[p] += c[p] * tmp_[p];
        };
        for (int i = 0; i < n; ++i) accumulate(spectral_->hessian_symbol(i, i, false), L.coeff[slot++]);
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                accumulate(spectral_->hessian_symbol(i, j, false), L.coeff[slot++]);
                accumulate(spectral_->hessian_symbol(i, j, true), L.coeff[slot++]);
            }
        }
        for (std::size_t p = 0; p < P; ++p) y[p] -= (L.zero_order[p] + L.shift) * x[p];
    }

    /// Newton direction; for the augmented system returns δb through `db`.
    std::vector<double> direction(const Evaluation& e, const Linearization& L, double tolerance,
                                  const SolverOptions& options, double& db, int& linear_iterations) {
        const std::size_t P = size();
        db = 0.0;
        if (!torus_) {
            const double h = spec_.geometry.spacing();
            std::vector<double> lo(P, 0.0), di(P, 1.0), up(P, 0.0), rhs(P);
            for (std::size_t p = 0; p < P; ++p) {
                rhs[p] = -e.R[p];
                if (is_boundary(p)) continue;
                const double a = 0.25 * L.coeff[0][p] / (h * h);
                lo[p] = a;
                up[p] = a;
                di[p] = -2.0 * a - L.zero_order[p] - L.shift;
            }
            linear_iterations = 1;
            return solve_tridiagonal(lo, di, up, rhs);
        }
        Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(e.R.data(), static_cast<Eigen::Index>(P));
        b = -b;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(P));
        Eigen::VectorXd work(static_cast<Eigen::Index>(P));
        const LinearOperator A = [&](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
            out.resize(in.size());
            if (L.augmented) {
                // z ↦ L(z − z̄) − e^bψ z̄ : the mean of z carries δb.
                const double zbar = in.mean();
                apply(L, in.data(), out.data());
                for (std::size_t p = 0; p < P; ++p) {
                    out[static_cast<Eigen::Index>(p)] += (L.zero_order[p] + L.shift) * zbar - L.d_b[p] * zbar;
                }
            } else {
                apply(L, in.data(), out.data());
            }
        };
        const LinearOperator M = [&](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
            out.resize(in.size());
            spectral_->forward(std::span<const double>(in.data(), P));
            spectral_->inverse(L.inverse_symbol, std::span<double>(out.data(), P));
        };
        GmresOptions go;
        go.restart = options.gmres_restart;
        go.max_iterations = options.gmres_max_iterations;
        go.relative_tolerance = tolerance;
        const GmresResult r = gmres(A, M, b, x, go);
        linear_iterations = r.iterations;
        if (!(r.relative_residual <= 0.5)) {
            throw LinearSolveFailure("Krylov solve stagnated at relative residual " + std::to_string(r.relative_residual));
        }
        std::vector<double> dx(x.data(), x.data() + P);
        if (L.augmented) {
            const double zbar = x.mean();
            for (double& v : dx) v -= zbar;
            db = zbar;
        }
        return dx;
    }

private:
    void add_X() {
        const int n = spec_.geometry.n();
        const std::size_t nn = static_cast<std::size_t>(n * n);
        const auto& X = spec_.X.data;
        for (std::size_t p = 0; p < size(); ++p) {
            cplx* g = g_.data.data() + p * nn;
            const cplx* x = X.data() + p * nn;
            for (int i = 0; i < n; ++i) {
                const std::size_t ii = static_cast<std::size_t>(i * n + i);
                g[ii] = (g[ii] + x[ii]).real();
                for (int j = i + 1; j < n; ++j) {
                    const std::size_t ij = static_cast<std::size_t>(i * n + j);
                    const std::size_t ji = static_cast<std::size_t>(j * n + i);
                    const cplx v = 0.5 * ((g[ij] + x[ij]) + std::conj(g[ji] + x[ji]));
                    g[ij] = v;
                    g[ji] = std::conj(v);
                }
            }
        }
    }

    const ProblemSpec& spec_;
    Operator op_;
    bool torus_;
    std::unique_ptr<TorusSpectral> spectral_;
    HermitianField g_;
    SpectralField s_;
    SpectralField sx_;
    ScalarField anchor_;
    double A_ = 0.0;
    double phi_left_ = 0.0;
    double phi_right_ = 0.0;
    std::vector<double> centered_;
    std::vector<double> tmp_;
};

// One damped Newton iteration; returns the number of linear iterations.
// `e` is the evaluation at the current state (with linearization) and is
// replaced by the evaluation at the accepted iterate (without).
void newton_iteration(Discretization& disc, SolveState& state, Discretization::Evaluation& e, double damping,
                      const SolverOptions& options) {
    const bool augmented = disc.spec().mode == SolveMode::periodic_with_constant && state.t == 0.0;
    auto L = disc.linearize(e, state.t, augmented, options, state);
    const double eta = std::clamp(std::min(1e-2, e.max_residual), 1e-13, 1e-2);
    double db = 0.0;
    int lin_it = 0;
    const std::vector<double> du = disc.direction(e, L, eta, options, db, lin_it);

    const std::size_t P = disc.size();
    std::vector<double> trial(P);
    double alpha = damping;
    while (alpha >= options.min_damping) {
        for (std::size_t p = 0; p < P; ++p) trial[p] = state.u.values[p] + alpha * du[p];
        const double trial_b = state.b + alpha * db;
        auto te = disc.evaluate(trial, state.t, trial_b, false);
        if (te.admissible && te.max_residual < e.max_residual) {
            // Independent re-check of the two safety invariants.
            ++g_accepted;
            if (!(te.min_margin > 0.0)) ++g_inadmissible;
            if (!(te.max_residual < e.max_residual)) ++g_nonmonotone;
            state.u.values = trial;
            state.b = trial_b;
            state.admissibility_margin = te.min_margin;
            state.newton_iterations += 1;
            state.linear_iterations += lin_it;
            state.residual_history.push_back(
                {state.t, static_cast<int>(state.residual_history.size()), te.max_residual, alpha, lin_it});
            emit(options, json{{"event", "newton_step"},
                               {"t", state.t},
                               {"residual", te.max_residual},
                               {"damping", alpha},
                               {"linear_iterations", lin_it}});
            e = std::move(te);
            return;
        }
        alpha *= 0.5;
    }
    throw NewtonStall("line search exhausted below step 2^-30 at t=" + std::to_string(state.t), e.worst, e.max_residual);
}

// Newton to `tolerance` at fixed t; returns the iteration count.
int newton_solve(Discretization& disc, SolveState& state, double tolerance, const SolverOptions& options) {
    auto e = disc.evaluate(state.u.values, state.t, state.b, true);
    if (!e.admissible) disc.throw_inadmissible(e, state.t);
    state.admissibility_margin = e.min_margin;
    state.residual_history.push_back({state.t, 0, e.max_residual, 0.0, 0});
    int it = 0;
    while (e.max_residual > tolerance) {
        if (it == options.max_newton_iterations) {
            throw NewtonStall("Newton did not reach tolerance in " + std::to_string(it) + " iterations at t=" +
                                  std::to_string(state.t),
                              e.worst, e.max_residual);
        }
        if (it > 0) e = disc.evaluate(state.u.values, state.t, state.b, true);
        newton_iteration(disc, state, e, 1.0, options);
        ++it;
    }
    state.final_residual = e.max_residual;
    return it;
}

double choose_A(Discretization& disc) {
    const auto& spec = disc.spec();
    HermitianField x = assemble_g(HermitianField(spec.geometry), spec.X);
    const SpectralField s = spectral_decompose(x);
    const Operator op(spec.op);
    for (int e = 0; e <= 40; ++e) {
        const double A = std::ldexp(1.0, e);
        const auto pe = evaluate_operator(op, s, A, false, false);
        bool ok = pe.admissible;
        for (std::size_t p = 0; ok && p < pe.value.size(); ++p) ok = pe.value[p] > 0.0;
        if (ok) return A;
    }
    throw ConfigurationError("no homotopy constant A <= 2^40 makes X + A omega admissible with f > 0");
}

}  // namespace

// ---------------------------------------------------------------- problem definition

std::string to_string(SolveMode mode) {
    return mode == SolveMode::periodic_with_constant ? "periodic_with_constant" : "dirichlet";
}

ProblemSpec::ProblemSpec(ModelGeometry g, OperatorSpec o, HermitianField x, ScalarField p)
    : geometry(std::move(g)), op(o), X(std::move(x)), psi(std::move(p)) {}

void ProblemSpec::validate() const {
    if (!X.geometry.same_grid(geometry) || !psi.geometry.same_grid(geometry)) {
        throw ConfigurationError("X and psi must live on the problem grid", "problem");
    }
    if (op.n != geometry.n()) throw ConfigurationError("operator n does not match the geometry", "problem.operator.n");
    const Operator o(op);
    for (double v : psi.values) {
        if (!std::isfinite(v) || !(v > 0.0)) throw ConfigurationError("psi must be finite and positive", "problem.psi");
    }
    if (!(o.boundary_sup() < psi.min())) {
        throw ConfigurationError("psi violates the window sup_∂Γ f < inf ψ (sup_∂Γ f = " +
                                     std::to_string(o.boundary_sup()) + ", inf ψ = " + std::to_string(psi.min()) + ")",
                                 "problem.psi");
    }
    if (mode == SolveMode::periodic_with_constant && geometry.kind() != GeometryKind::flat_torus) {
        throw ConfigurationError("periodic mode needs a flat torus", "problem.mode");
    }
    if (mode == SolveMode::dirichlet) {
        if (geometry.kind() != GeometryKind::interval) throw ConfigurationError("Dirichlet mode needs an interval", "problem.mode");
        if (!boundary) throw ConfigurationError("Dirichlet mode needs boundary data", "problem.boundary");
        if (!boundary->geometry.same_grid(geometry)) throw ConfigurationError("boundary data grid mismatch", "problem.boundary");
    }
    if (subsolution) {
        if (!subsolution->geometry.same_grid(geometry)) throw ConfigurationError("subsolution grid mismatch", "problem.subsolution");
        const auto g = assemble_g(*subsolution, X);
        const auto pe = evaluate_operator(o, spectral_decompose(g), 0.0, false, false);
        const std::size_t P = geometry.point_count();
        for (std::size_t p = 0; p < P; ++p) {
            const bool end = mode == SolveMode::dirichlet && (p == 0 || p + 1 == P);
            if (!end && !(pe.margin[p] > 0.0)) {
                throw ConfigurationError("subsolution is inadmissible at grid index " + std::to_string(p),
                                         "problem.subsolution");
            }
        }
    }
}

SafetyAudit safety_audit() { return {g_accepted.load(), g_inadmissible.load(), g_nonmonotone.load()}; }

void reset_safety_audit() {
    g_accepted = 0;
    g_inadmissible = 0;
    g_nonmonotone = 0;
}

ScalarField homotopy_anchor(const ProblemSpec& spec, double A) {
    Discretization disc(spec);
    disc.set_A(A);
    return disc.anchor();
}

double choose_homotopy_A(const ProblemSpec& spec) {
    Discretization disc(spec);
    return choose_A(disc);
}

ScalarField residual(const ProblemSpec& spec, const SolveState& state) {
    Discretization disc(spec);
    if (state.t != 0.0) disc.set_A(state.A);
    auto e = disc.evaluate(state.u.values, state.t, state.b, false);
    if (!e.admissible) disc.throw_inadmissible(e, state.t);
    return ScalarField(spec.geometry, std::move(e.R));
}

SolveState newton_step(const ProblemSpec& spec, const SolveState& state, double damping, const SolverOptions& options) {
    spec.validate();
    Discretization disc(spec);
    if (state.t != 0.0) disc.set_A(state.A);
    SolveState next = state;
    auto e = disc.evaluate(next.u.values, next.t, next.b, true);
    if (!e.admissible) disc.throw_inadmissible(e, next.t);
    if (e.max_residual == 0.0) return next;
    newton_iteration(disc, next, e, damping, options);
    next.final_residual = e.max_residual;
    return next;
}

SolveState homotopy_solve(const ProblemSpec& spec, const SolverOptions& options) {
    spec.validate();
    if (spec.mode != SolveMode::periodic_with_constant) {
        throw ConfigurationError("homotopy_solve needs periodic mode", "problem.mode");
    }
    Discretization disc(spec);
    const double A = options.homotopy_A ? *options.homotopy_A : choose_A(disc);
    disc.set_A(A);

    SolveState state(spec.geometry);
    state.A = A;
    state.t = 1.0;
    state.b = 0.0;
    {
        const auto e = disc.evaluate(state.u.values, 1.0, 0.0, false);
        if (!e.admissible) disc.throw_inadmissible(e, 1.0);
        state.residual_history.push_back({1.0, 0, e.max_residual, 0.0, 0});
        state.admissibility_margin = e.min_margin;
        state.final_residual = e.max_residual;
    }
    state.t_path.push_back(1.0);
    state.bounds.push_back(disc.bounds(state.u.values, 1.0));
    emit(options, json{{"event", "homotopy_start"}, {"A", A}, {"residual", state.final_residual}});

    double t = 1.0;
    double dt = options.initial_step;
    while (t > options.t_min) {
        const double t_new = std::max(options.t_min, t - dt);
        SolveState trial = state;
        // Predictor: keep t·mean(u) fixed.
        const double mean = state.u.mean();
        const double scaled = mean * t / t_new;
        for (double& v : trial.u.values) v = v - mean + scaled;
        trial.t = t_new;
        int iterations = 0;
        try {
            iterations = newton_solve(disc, trial, options.path_tolerance, options);
        } catch (const Error& err) {
            dt *= 0.5;
            emit(options, json{{"event", "homotopy_step_rejected"}, {"t", t_new}, {"reason", err.what()}, {"next_step", dt}});
            if (dt < options.step_floor) {
                throw HomotopyStall("homotopy step fell below " + std::to_string(options.step_floor) + " at t=" +
                                        std::to_string(t) + ": " + err.what(),
                                    state);
            }
            continue;
        }
        state = std::move(trial);
        t = t_new;
        state.t_path.push_back(t);
        auto bound = disc.bounds(state.u.values, t);
        if (!bound.within) {
            state.warnings.push_back("bound violated at t=" + std::to_string(t));
            emit(options, json{{"event", "bound_violation"}, {"t", t}});
        }
        state.bounds.push_back(bound);
        if (iterations <= options.fast_convergence_iterations) dt *= options.step_growth;
    }

    // The (u, b) system at t = 0 with a mean-zero gauge.
    const double mean = state.u.mean();
    state.b = state.t * mean;
    for (double& v : state.u.values) v -= mean;
    state.t = 0.0;
    try {
        newton_solve(disc, state, options.newton_tolerance, options);
    } catch (const NewtonStall&) {
        throw;
    }
    state.t_path.push_back(0.0);

    // sup u = 0; b is unchanged because the t = 0 residual ignores constants.
    const double shift = state.u.max();
    for (double& v : state.u.values) v -= shift;
    const auto e = disc.evaluate(state.u.values, 0.0, state.b, false);
    state.final_residual = e.max_residual;
    state.admissibility_margin = e.min_margin;
    emit(options, json{{"event", "solve_complete"}, {"b", state.b}, {"residual", state.final_residual}});
    return state;
}

SolveState dirichlet_solve(const ProblemSpec& spec, const SolverOptions& options) {
    spec.validate();
    if (spec.mode != SolveMode::dirichlet) throw ConfigurationError("dirichlet_solve needs Dirichlet mode", "problem.mode");
    Discretization disc(spec);
    SolveState state(spec.geometry);
    state.t = 0.0;
    state.b = 0.0;
    const std::size_t P = spec.geometry.point_count();
    if (spec.subsolution) {
        state.u.values = spec.subsolution->values;
    } else {
        const double left = spec.boundary->values.front();
        const double right = spec.boundary->values.back();
        for (std::size_t p = 0; p < P; ++p) {
            const double s = static_cast<double>(p) / static_cast<double>(P - 1);
            state.u.values[p] = (1.0 - s) * left + s * right;
        }
    }
    newton_solve(disc, state, options.newton_tolerance, options);
    if (spec.subsolution) {
        for (std::size_t p = 0; p < P; ++p) {
            if (state.u.values[p] < spec.subsolution->values[p] - 1e-10) state.comparison_holds = false;
        }
        if (!state.comparison_holds) state.warnings.push_back("discrete comparison u >= subsolution failed");
    }
    return state;
}

SolveState solve(const ProblemSpec& spec, const SolverOptions& options) {
    return spec.mode == SolveMode::dirichlet ? dirichlet_solve(spec, options) : homotopy_solve(spec, options);
}

// ---------------------------------------------------------------- manufactured solutions

namespace {

ProblemSpec finish_mms(const ModelGeometry& geometry, const OperatorSpec& op, const HermitianField& X,
                       const HermitianField& g, const ScalarField& u_star) {
    const Operator o(op);
    const auto pe = evaluate_operator(o, spectral_decompose(g), 0.0, false, false);
    const std::size_t P = geometry.point_count();
    const bool interval = geometry.kind() == GeometryKind::interval;
    for (std::size_t p = 0; p < P; ++p) {
        const bool end = interval && (p == 0 || p + 1 == P);
        if (!end && !(pe.margin[p] > 0.0)) {
            throw ConfigurationError("manufactured solution is inadmissible: minimum margin " +
                                         std::to_string(pe.min_margin) + " at grid index " +
                                         std::to_string(pe.worst_point),
                                     "problem.psi.mms");
        }
    }
    std::vector<double> psi = pe.value;
    if (interval) {
        // End-node values are unused by the Dirichlet residual; keep ψ positive there.
        psi.front() = std::isfinite(psi.front()) && psi.front() > 0.0 ? psi.front() : psi[1];
        psi.back() = std::isfinite(psi.back()) && psi.back() > 0.0 ? psi.back() : psi[P - 2];
    }
    ProblemSpec spec(geometry, op, X, ScalarField(geometry, std::move(psi)));
    spec.exact = u_star;
    if (interval) {
        spec.mode = SolveMode::dirichlet;
        spec.boundary = u_star;
        ScalarField sub = u_star;
        for (std::size_t p = 0; p < P; ++p) {
            const double x = geometry.coordinates(p)[0];
            sub.values[p] += (x - geometry.a()) * (x - geometry.b());
        }
        sub.values.front() = u_star.values.front();
        sub.values.back() = u_star.values.back();
        spec.subsolution = std::move(sub);
    } else {
        spec.mode = SolveMode::periodic_with_constant;
    }
    return spec;
}

}  // namespace

ProblemSpec mms_generate(const ModelGeometry& geometry, const OperatorSpec& op, const ScalarField& u_star,
                         const HermitianField& X) {
    if (!u_star.geometry.same_grid(geometry)) throw ConfigurationError("u* grid mismatch", "problem.psi.mms");
    ScalarField centered = u_star;
    if (geometry.kind() == GeometryKind::flat_torus) {
        const double mean = u_star.mean();
        for (double& v : centered.values) v -= mean;
    }
    const HermitianField g = assemble_g(centered, X);
    return finish_mms(geometry, op, X, g, u_star);
}

ProblemSpec mms_generate(const ModelGeometry& geometry, const OperatorSpec& op, const ManufacturedSolution& u_star,
                         const HermitianField& X) {
    const ScalarField u = ScalarField::from_function(geometry, u_star.u);
    HermitianField hess(geometry);
    std::vector<double> x(static_cast<std::size_t>(geometry.real_dim()));
    for (std::size_t p = 0; p < geometry.point_count(); ++p) {
        geometry.coordinates(p, x);
        const HermitianMatrix h = u_star.hessian(x);
        if (h.rows() != geometry.n() || h.cols() != geometry.n()) {
            throw ConfigurationError("manufactured Hessian has the wrong size", "problem.psi.mms");
        }
        hess.at(p) = h;
    }
    return finish_mms(geometry, op, X, assemble_g(hess, X), u);
}

// ---------------------------------------------------------------- reports

namespace {
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
}  // namespace

json to_json(const SolveState& s) {
    json history = json::array();
    for (const auto& r : s.residual_history) {
        history.push_back(json{{"t", r.t},
                               {"iteration", r.iteration},
                               {"residual", r.residual},
                               {"damping", r.damping},
                               {"linear_iterations", r.linear_iterations}});
    }
    json bounds = json::array();
    for (const auto& b : s.bounds) {
        bounds.push_back(json{{"t", b.t},
                              {"t_sup_u", b.t_sup_u},
                              {"t_inf_u", b.t_inf_u},
                              {"upper_constant", finite_or_null(b.upper_constant)},
                              {"lower_constant", finite_or_null(b.lower_constant)},
                              {"within", b.within}});
    }
    return json{{"b", s.b},
                {"t", s.t},
                {"A", s.A},
                {"final_residual", s.final_residual},
                {"admissibility_margin", s.admissibility_margin},
                {"newton_iterations", s.newton_iterations},
                {"linear_iterations", s.linear_iterations},
                {"tikhonov_used", s.tikhonov_used},
                {"comparison_holds", s.comparison_holds},
                {"sup_u", s.u.max()},
                {"inf_u", s.u.min()},
                {"t_path", s.t_path},
                {"residual_history", history},
                {"bounds", bounds},
                {"warnings", s.warnings}};
}

}  // namespace plpde
