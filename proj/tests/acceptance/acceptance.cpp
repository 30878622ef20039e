// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "plpde/barrier.hpp"
#include "plpde/conegeo.hpp"
#include "plpde/estimates.hpp"
#include "plpde/hermfield.hpp"
#include "plpde/solver.hpp"
#include "plpde/symcalc.hpp"

using namespace plpde;
using std::numbers::pi;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += "failed: " + what;
        }
    }
    void note(const std::string& what) {
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

OperatorSpec make_spec(Family family, int k, int n, int K) {
    OperatorSpec s;
    s.family = family;
    s.k = k;
    s.n = n;
    s.K = K;
    return s;
}

/// Every solved problem, kept for the ellipticity and bound audits.
struct Solved {
    std::string name;
    ProblemSpec spec;
    SolveState state;
};
std::deque<Solved> solved;  // stable addresses: solves are cached by pointer

const SolveState& record(const std::string& name, const ProblemSpec& spec, SolveState state) {
    solved.push_back({name, spec, std::move(state)});
    return solved.back().state;
}

// ---------------------------------------------------------------- 1

Outcome identities() {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240611);
    std::uniform_int_distribution<int> dim(2, 8);
    double worst = 0.0;
    for (int s = 0; s < 10000; ++s) {
        const int n = dim(rng);
        const int K = std::uniform_int_distribution<int>(1, n)(rng);
        const auto sets = enumerate_index_sets(n, K);
        const auto lam = oracle::random_vector(static_cast<std::size_t>(n), rng, -5, 5);
        const double s1 = std::accumulate(lam.begin(), lam.end(), 0.0);
        const auto L = lambda_map(lam, sets);
        const auto Lp = lambda_prime(lam, sets);
        double column = 0.0;
        for (std::size_t j = 0; j < L.size(); ++j) {
            worst = std::max(worst, std::abs(L[j] + Lp[j] - s1) / (1 + std::abs(s1)));
            column += L[j];
        }
        const double expected = static_cast<double>(sets.size()) * K / n * s1;
        worst = std::max(worst, std::abs(column - expected) / ((1 + std::abs(expected)) * static_cast<double>(sets.size())));
    }
    // K = n − 1: Λ(λ(𝔤)) is the spectrum of (tr 𝔤)ω − 𝔤; the interval geometry
    // carries a batch of n×n forms without a 2n-dimensional grid.
    double worst_trace = 0.0;
    for (int n = 2; n <= 8; ++n) {
        const auto g = ModelGeometry::interval(0, 1, 256, n);
        const auto sets = enumerate_index_sets(n, n - 1);
        HermitianField G(g);
        std::vector<oracle::Matrix> forms;
        for (std::size_t p = 0; p < G.size(); ++p) {
            forms.push_back(oracle::random_hermitian(n, rng));
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) G.at(p)(i, j) = forms.back()(i, j);
        }
        const auto sp = spectral_decompose(G);
        for (std::size_t p = 0; p < G.size(); ++p) {
            auto L = lambda_map(sp.lambda(p), sets);
            std::sort(L.begin(), L.end());
            const oracle::Matrix t = forms[p].trace().real() * oracle::Matrix::Identity(n, n) - forms[p];
            const auto ref = oracle::eigenvalues(t);
            for (int a = 0; a < n; ++a) {
                worst_trace = std::max(worst_trace, std::abs(L[static_cast<std::size_t>(a)] - ref[static_cast<std::size_t>(a)]));
            }
        }
    }
    const double elapsed = seconds_since(start);
    out.require(worst <= 1e-12, "partition/column-sum defect " + fmt(worst));
    out.require(worst_trace <= 1e-12, "trace-form defect " + fmt(worst_trace));
    out.require(elapsed < 5.0, "runtime " + fmt(elapsed) + " s");
    out.note("10000 samples, max defects " + fmt(worst) + " / " + fmt(worst_trace) + ", " + fmt(elapsed) + " s");
    return out;
}

// ---------------------------------------------------------------- 2

Outcome ranks() {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    ProbeOptions eig;
    eig.space = ProbeSpace::eigenvalue_space;
    int checked = 0;
    for (int m = 3; m <= 5; ++m) {
        for (int k = 1; k <= m; ++k) {
            const Operator op(make_spec(Family::sigma_root, k, m, 1));
            const auto cert = rank_probe(op, op.diagonal_value(1.0), eig);
            out.require(cert.estimated_rank == m - k + 1, "rank of sigma_" + std::to_string(k) + " in dim " +
                                                             std::to_string(m) + " = " +
                                                             std::to_string(cert.estimated_rank));
            ++checked;
        }
        const Operator trace(make_spec(Family::linear, 1, m, 1));
        const auto cert = rank_probe(trace, trace.diagonal_value(1.0), eig);
        out.require(cert.estimated_rank == m, "rank of the trace in dim " + std::to_string(m));
        ++checked;
    }
    for (int k = 1; k <= 3; ++k) {
        const Operator op(make_spec(Family::sigma_root, k, 3, 2));
        const auto r = rank_condition_check(op);
        out.require(r.threshold == 2.0, "threshold " + fmt(r.threshold));
        out.require(r.passes == (k <= 2), "n=3 K=2 k=" + std::to_string(k) + " passes=" + std::to_string(r.passes));
    }
    const double elapsed = seconds_since(start);
    out.require(elapsed < 60.0, "runtime " + fmt(elapsed) + " s");
    out.note(std::to_string(checked) + " ranks exact, n=3 K=2 table pass/pass/fail, " + fmt(elapsed) + " s");
    return out;
}

// ---------------------------------------------------------------- 4

double gauge_error(const SolveState& s, const ScalarField& u_star) {
    const double shift = u_star.max();
    double err = 0.0;
    for (std::size_t p = 0; p < u_star.size(); ++p) err = std::max(err, std::abs(s.u.values[p] - (u_star.values[p] - shift)));
    return err;
}

ScalarField torus_u_star(const ModelGeometry& g) {
    return ScalarField::from_function(g, [](auto x) { return 0.05 * std::cos(2 * pi * x[0]) + 0.03 * std::cos(2 * pi * x[3]); });
}

/// Torus MMS solves by variant ("K1", "K2") and points per axis.
std::map<std::pair<std::string, int>, const SolveState*> torus_mms;
/// Interval MMS solves by node count.
std::map<int, const SolveState*> interval_mms;

const SolveState& torus_solve(const std::string& variant, int points) {
    const auto key = std::make_pair(variant, points);
    if (auto it = torus_mms.find(key); it != torus_mms.end()) return *it->second;
    const auto g = ModelGeometry::flat_torus(2, points);
    const auto op = variant == "K1" ? make_spec(Family::sigma_root, 2, 2, 1) : make_spec(Family::linear, 1, 2, 2);
    const auto spec = mms_generate(g, op, torus_u_star(g), HermitianField::scaled_metric(g, 2.0));
    const auto& s = record("torus " + variant + " " + std::to_string(points), spec, solve(spec));
    torus_mms[key] = &s;
    return s;
}

ManufacturedSolution interval_u_star() {
    ManufacturedSolution ms;
    ms.u = [](std::span<const double> x) { return 1.0 + 0.1 * std::cos(2 * pi * x[0]); };
    ms.hessian = [](std::span<const double> x) {
        HermitianMatrix h = HermitianMatrix::Zero(2, 2);
        h(0, 0) = 0.25 * (-0.4 * pi * pi * std::cos(2 * pi * x[0]));
        return h;
    };
    return ms;
}

const SolveState& interval_solve(int points) {
    if (auto it = interval_mms.find(points); it != interval_mms.end()) return *it->second;
    const auto g = ModelGeometry::interval(0, 1, points, 2);
    const auto spec = mms_generate(g, make_spec(Family::sigma_root, 2, 2, 1), interval_u_star(), HermitianField::scaled_metric(g, 1.0));
    const auto& s = record("interval " + std::to_string(points), spec, solve(spec));
    interval_mms[points] = &s;
    return s;
}

Outcome mms_convergence() {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    for (const std::string variant : {"K1", "K2"}) {
        const auto& s = torus_solve(variant, 32);
        const double err = gauge_error(s, torus_u_star(s.u.geometry));
        out.require(err <= 1e-8, "torus " + variant + " error " + fmt(err));
        out.note("torus " + variant + " error " + fmt(err));
    }
    double e64 = 0.0, e128 = 0.0;
    for (int points : {65, 129}) {
        const auto& s = interval_solve(points);
        const auto g = s.u.geometry;
        const auto exact = ScalarField::from_function(g, interval_u_star().u);
        double err = 0.0;
        for (std::size_t p = 0; p < g.point_count(); ++p) err = std::max(err, std::abs(s.u.values[p] - exact.values[p]));
        (points == 65 ? e64 : e128) = err;
    }
    const double ratio = e64 / e128;
    out.require(std::abs(ratio - 4.0) <= 0.8, "interval ratio " + fmt(ratio));
    const double elapsed = seconds_since(start);
    out.require(elapsed < 120.0, "runtime " + fmt(elapsed) + " s");
    out.note("interval ratio " + fmt(ratio) + ", " + fmt(elapsed) + " s");
    return out;
}

// ---------------------------------------------------------------- 5

Outcome homotopy_closed_form() {
    Outcome out;
    int instances = 0;
    for (auto [n, k, c, p] : {std::tuple{2, 2, 1.5, 0.8}, std::tuple{3, 2, 0.7, 2.0}, std::tuple{3, 3, 2.0, 0.3}}) {
        const auto g = ModelGeometry::flat_torus(n, n == 2 ? 8 : 4);
        const auto op = make_spec(Family::sigma_root, k, n, 1);
        const ProblemSpec spec(g, op, HermitianField::scaled_metric(g, c), ScalarField::constant(g, p));
        const double A = choose_homotopy_A(spec);
        SolveState start(g);
        start.t = 1.0;
        start.A = A;
        double r0 = 0.0;
        for (double v : residual(spec, start).values) r0 = std::max(r0, std::abs(v));
        out.require(r0 <= 1e-12, "t=1 residual " + fmt(r0));
        const auto& s = record("constant n=" + std::to_string(n) + " k=" + std::to_string(k), spec, solve(spec));
        // f(Λ(c·1)) = c·σ_k(1,…,1)^{1/k} = c·binom(n,k)^{1/k}
        const double f = c * std::pow(oracle::sigma_k(k, std::vector<double>(static_cast<std::size_t>(n), 1.0)), 1.0 / k);
        const double expected_b = std::log(f / p);
        out.require(std::abs(s.b - expected_b) <= 1e-10, "b error " + fmt(std::abs(s.b - expected_b)));
        double umax = 0.0;
        for (double v : s.u.values) umax = std::max(umax, std::abs(v));
        out.require(umax <= 1e-10, "u not identically zero: " + fmt(umax));
        ++instances;
    }
    out.note(std::to_string(instances) + " constant instances exact");
    return out;
}

Outcome bounds_audit() {
    Outcome out;
    std::size_t records = 0;
    for (const auto& s : solved) {
        for (const auto& b : s.state.bounds) {
            ++records;
            const bool ok = b.t_sup_u <= b.upper_constant + 1e-8 && b.t_inf_u >= b.lower_constant - 1e-8;
            out.require(ok && b.within, s.name + " bound at t=" + fmt(b.t));
        }
    }
    out.note(std::to_string(records) + " bound records");
    return out;
}

// ---------------------------------------------------------------- 6

Outcome barrier() {
    Outcome out;
    const int points = 16385;
    const auto g = ModelGeometry::interval(-pi / 2, pi / 2, points);
    const auto r = barrier_solve(g, {1.0, 0.5});
    out.require(r.exists, "no solution for b = 0.5");
    if (r.exists) {
        const auto ref = oracle::barrier_newton(-pi / 2, pi / 2, points, 1.0, 0.5);
        double diff = 0.0;
        for (std::size_t p = 0; p < ref.size(); ++p) diff = std::max(diff, std::abs(r.h->values[p] - ref[p]));
        out.require(diff <= 1e-8, "cross-check " + fmt(diff));
        out.note("cross-check " + fmt(diff));
    }
    const auto none = barrier_solve(ModelGeometry::interval(-pi / 2, pi / 2, 4097), {1.0, 1.0});
    out.require(!none.exists, "solution reported for b = 1");
    std::vector<double> res;
    for (int n : {1601, 3201, 6401}) {
        res.push_back(barrier_residual(riccati_oracle(ModelGeometry::interval(-pi / 2 + 0.05, pi / 2 - 0.05, n)), {1.0, 1.0}));
    }
    for (std::size_t i = 0; i + 1 < res.size(); ++i) {
        const double ratio = res[i] / res[i + 1];
        out.require(std::abs(ratio - 4.0) <= 0.8, "log-cos ratio " + fmt(ratio));
        out.note("log-cos ratio " + fmt(ratio));
    }
    return out;
}

// ---------------------------------------------------------------- 7

Outcome estimate_stability() {
    Outcome out;
    const Ball torus_ball{std::vector<double>(4, 0.0), 0.25};
    const Ball interval_ball{{0.5}, 0.25};
    std::vector<EstimateReport> reports;
    for (const std::string variant : {"K1", "K2"}) {
        std::vector<LevelMeasurement> levels;
        for (int points : {8, 16, 32}) {
            auto m = measure_level(torus_solve(variant, points).u, EstimateOptions{torus_ball, 1.0});
            m.level = points;
            levels.push_back(m);
        }
        reports.push_back(make_estimate_report("torus " + variant, torus_ball, levels));
    }
    {
        std::vector<LevelMeasurement> levels;
        for (int points : {65, 129, 257}) {
            auto m = measure_level(interval_solve(points).u, EstimateOptions{interval_ball, std::nullopt});
            m.level = points;
            levels.push_back(m);
        }
        reports.push_back(make_estimate_report("interval", interval_ball, levels));
    }
    double spread = 1.0;
    for (const auto& r : reports) {
        for (const auto& s : r.stability) {
            if (s.name == "osc_ratio") continue;
            spread = std::max(spread, s.max_over_min);
            out.require(!s.skipped, r.instance + " " + s.name + " skipped");
            out.require(s.finite && s.stable, r.instance + " " + s.name + " max/min " + fmt(s.max_over_min));
        }
        for (const auto& m : r.levels) {
            out.require(std::isfinite(m.c2_ratio) && std::isfinite(m.grad_ratio) && m.harnack_ratio &&
                            std::isfinite(*m.harnack_ratio),
                        r.instance + " non-finite ratio at level " + std::to_string(m.level));
        }
    }
    // Constant positive instance: Dirichlet data φ ≡ 2 with ψ = f(X) has u ≡ 2.
    const auto g = ModelGeometry::interval(0, 1, 65, 2);
    ProblemSpec spec(g, make_spec(Family::sigma_root, 2, 2, 1), HermitianField::scaled_metric(g, 1.0), ScalarField::constant(g, 1.0));
    spec.mode = SolveMode::dirichlet;
    spec.boundary = ScalarField::constant(g, 2.0);
    const auto& s = record("constant interval", spec, solve(spec));
    const auto h = measure_harnack(s.u, interval_ball);
    out.require(h.has_value() && *h == 1.0, "constant harnack " + (h ? fmt(*h) : std::string("skipped")));
    const auto& torus_constant = solved.front().state;  // u ≡ 0 on the torus, shifted by 1
    ScalarField shifted = torus_constant.u;
    for (double& v : shifted.values) v += 1.0;
    const auto ht = measure_harnack(shifted, torus_ball);
    out.require(ht.has_value() && *ht == 1.0, "constant torus harnack " + (ht ? fmt(*ht) : std::string("skipped")));
    out.note(std::to_string(reports.size()) + " instances stable, largest max/min " + fmt(spread) + ", constant harnack = 1");
    return out;
}

// ---------------------------------------------------------------- 3

Outcome ellipticity() {
    Outcome out;
    // The rank condition holds for σ₂^{1/2} with pair sums in dimension three.
    const auto g = ModelGeometry::flat_torus(3, 8);
    const auto u = ScalarField::from_function(g, [](auto x) { return 0.02 * std::cos(2 * pi * x[0]) + 0.01 * std::cos(2 * pi * x[5]); });
    const auto spec = mms_generate(g, make_spec(Family::sigma_root, 2, 3, 2), u, HermitianField::scaled_metric(g, 1.0));
    record("n=3 K=2 mms", spec, solve(spec));
    std::size_t positive = 0;
    for (const auto& s : solved) {
        const auto check = check_ellipticity(s.spec, s.state.u);
        out.require(check.holds, s.name + " slack " + fmt(check.min_slack));
        if (!check.c1.flagged && check.c1.value > 0.0) ++positive;
    }
    out.require(positive > 0, "no instance with a positive c1");
    out.note(std::to_string(solved.size()) + " solved instances, " + std::to_string(positive) + " with c1 > 0");
    return out;
}

// ---------------------------------------------------------------- 8

Outcome safety() {
    Outcome out;
    const auto audit = safety_audit();
    out.require(audit.accepted_steps > 0, "no accepted steps audited");
    out.require(audit.inadmissible_accepts == 0, std::to_string(audit.inadmissible_accepts) + " inadmissible accepts");
    out.require(audit.nonmonotone_accepts == 0, std::to_string(audit.nonmonotone_accepts) + " non-monotone accepts");

    std::mt19937_64 rng(99);
    int families = 0;
    for (auto [family, k, m] : {std::tuple{Family::sigma_root, 1, 4}, std::tuple{Family::sigma_root, 2, 3},
                                std::tuple{Family::sigma_root, 2, 5}, std::tuple{Family::sigma_root, 3, 4},
                                std::tuple{Family::log_rho, 0, 3}, std::tuple{Family::linear, 1, 3}}) {
        const SymmetricFunction f(family, k);
        const auto draw = [&] {
            for (;;) {
                auto x = oracle::random_vector(static_cast<std::size_t>(m), rng, -1.0, 3.0);
                if (f.margin(x) > 1e-3) return x;
            }
        };
        std::vector<double> grad(static_cast<std::size_t>(m));
        int bad = 0;
        for (int s = 0; s < 10000; ++s) {
            const auto a = draw();
            const auto b = draw();
            std::vector<double> mid(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) mid[i] = 0.5 * (a[i] + b[i]);
            const double fa = f.value_and_gradient(a, grad);
            if (*std::min_element(grad.begin(), grad.end()) < -1e-12) ++bad;
            if (f.value(mid) < 0.5 * (fa + f.value(b)) - 1e-10) ++bad;
        }
        out.require(bad == 0, to_string(family) + " k=" + std::to_string(k) + ": " + std::to_string(bad) + " violations");
        ++families;
    }
    out.note(std::to_string(audit.accepted_steps) + " accepted steps audited, " + std::to_string(families) +
             " families x 10000 samples");
    return out;
}

}  // namespace

int main() {
    reset_safety_audit();
    std::map<int, Outcome> results;
    std::map<int, std::string> names{{1, "combinatorial identities"},
                                     {2, "rank reproduction"},
                                     {3, "discrete ellipticity inequality"},
                                     {4, "manufactured-solution convergence"},
                                     {5, "homotopy closed form and bounds"},
                                     {6, "barrier dichotomy"},
                                     {7, "estimate-ratio stability"},
                                     {8, "safety invariants"}};
    const auto guarded = [](const std::function<Outcome()>& fn) {
        try {
            return fn();
        } catch (const std::exception& e) {
            Outcome o;
            o.require(false, std::string("exception: ") + e.what());
            return o;
        }
    };
    results[1] = guarded(identities);
    results[2] = guarded(ranks);
    results[5] = guarded(homotopy_closed_form);
    results[4] = guarded(mms_convergence);
    results[6] = guarded(barrier);
    results[7] = guarded(estimate_stability);
    results[3] = guarded(ellipticity);
    {
        auto b = guarded(bounds_audit);
        if (!b.pass) results[5].pass = false;
        results[5].note(b.detail);
    }
    results[8] = guarded(safety);

    bool all = true;
    for (const auto& [id, r] : results) {
        std::printf("%s criterion %d: %s (%s)\n", r.pass ? "PASS" : "FAIL", id, names[id].c_str(), r.detail.c_str());
        all = all && r.pass;
    }
    std::fflush(stdout);
    return all ? 0 : 1;
}
