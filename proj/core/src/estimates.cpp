#include "plpde/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "plpde/errors.hpp"

namespace plpde {

namespace {

constexpr double kRadiusSlack = 1e-12;

double periodic_offset(double d) {
    d -= std::floor(d);
    return std::min(d, 1.0 - d);
}

}  // namespace

std::vector<std::size_t> ball_points(const ModelGeometry& g, const Ball& ball) {
    const auto dim = static_cast<std::size_t>(g.real_dim());
    if (ball.center.size() != dim) throw DomainError("ball center has the wrong dimension");
    if (!(ball.radius > 0.0)) throw DomainError("ball radius must be positive");
    const double r = ball.radius * (1.0 + kRadiusSlack);
    if (g.kind() == GeometryKind::flat_torus) {
        if (ball.radius > 0.25) throw DomainError("torus balls are limited to radius 1/4");
    } else {
        const double slack = kRadiusSlack * (g.b() - g.a());
        if (ball.center[0] - ball.radius < g.a() - slack || ball.center[0] + ball.radius > g.b() + slack) {
            throw DomainError("ball leaves the interval");
        }
    }
    std::vector<std::size_t> out;
    std::vector<double> x(dim);
    for (std::size_t p = 0; p < g.point_count(); ++p) {
        g.coordinates(p, x);
        double d2 = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double off = g.kind() == GeometryKind::flat_torus ? periodic_offset(x[d] - ball.center[d])
                                                                    : x[d] - ball.center[d];
            d2 += off * off;
        }
        if (std::sqrt(d2) <= r) out.push_back(p);
    }
    if (out.empty()) throw DomainError("ball contains no grid points");
    return out;
}

ScalarField hessian_norm(const ScalarField& u) {
    const SpectralField s = spectral_decompose(complex_hessian(u));
    ScalarField out(u.geometry);
    for (std::size_t p = 0; p < u.size(); ++p) {
        double m = 0.0;
        for (double l : s.lambda(p)) m = std::max(m, std::abs(l));
        out.values[p] = m;
    }
    return out;
}

ScalarField gradient_norm_squared(const ScalarField& u) {
    const ModelGeometry& g = u.geometry;
    const int n = g.n();
    const std::size_t P = u.size();
    // Components ∂_i u = ½(∂_{x_i} u − √−1 ∂_{y_i} u).
    std::vector<std::vector<cplx>> du(static_cast<std::size_t>(n), std::vector<cplx>(P, 0.0));
    if (g.kind() == GeometryKind::flat_torus) {
        TorusSpectral spectral(g);
        spectral.forward(u.values);
        std::vector<double> dx(P), dy(P);
        for (int i = 0; i < n; ++i) {
            spectral.derivative(2 * i, dx);
            spectral.derivative(2 * i + 1, dy);
            for (std::size_t p = 0; p < P; ++p) du[static_cast<std::size_t>(i)][p] = 0.5 * cplx(dx[p], -dy[p]);
        }
    } else {
        const double h = g.spacing();
        const auto& v = u.values;
        for (std::size_t p = 0; p < P; ++p) {
            double d;
            if (p == 0) {
                d = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
            } else if (p + 1 == P) {
                d = (3.0 * v[P - 1] - 4.0 * v[P - 2] + v[P - 3]) / (2.0 * h);
            } else {
                d = (v[p + 1] - v[p - 1]) / (2.0 * h);
            }
            du[0][p] = 0.5 * d;
        }
    }
    ScalarField out(g);
    const HermitianMatrix& Linv = g.omega_cholesky_inverse();
    Eigen::VectorXcd v(n);
    for (std::size_t p = 0; p < P; ++p) {
        for (int i = 0; i < n; ++i) v[i] = du[static_cast<std::size_t>(i)][p];
        out.values[p] = g.omega_is_identity() ? v.squaredNorm() : (Linv * v).squaredNorm();
    }
    return out;
}

double measure_osc(const ScalarField& u) {
    const double d = u.geometry.diameter();
    return (u.max() - u.min()) / (d * d);
}

double measure_c2(const ScalarField& u, const Ball& ball) {
    const Ball half{ball.center, ball.radius / 2.0};
    const auto pts = ball_points(u.geometry, half);
    ball_points(u.geometry, ball);
    const ScalarField hn = hessian_norm(u);
    double sup = 0.0;
    for (std::size_t p : pts) sup = std::max(sup, hn.values[p]);
    return sup * ball.radius * ball.radius / (1.0 + (u.max() - u.min()));
}

double measure_gradient(const ScalarField& u, const Ball& ball) {
    const Ball half{ball.center, ball.radius / 2.0};
    const auto inner = ball_points(u.geometry, half);
    const auto outer = ball_points(u.geometry, ball);
    const ScalarField gn = gradient_norm_squared(u);
    std::size_t star = inner.front();
    for (std::size_t p : inner) {
        if (gn.values[p] > gn.values[star]) star = p;
    }
    double sup_outer = -std::numeric_limits<double>::infinity();
    for (std::size_t p : outer) sup_outer = std::max(sup_outer, u.values[p]);
    return gn.values[star] * ball.radius * ball.radius / (1.0 + sup_outer - u.values[star]);
}

std::optional<double> measure_harnack(const ScalarField& u, const Ball& ball) {
    const Ball half{ball.center, ball.radius / 2.0};
    for (std::size_t p : ball_points(u.geometry, ball)) {
        if (!(u.values[p] > 0.0)) return std::nullopt;
    }
    double sup = -std::numeric_limits<double>::infinity();
    double inf = std::numeric_limits<double>::infinity();
    for (std::size_t p : ball_points(u.geometry, half)) {
        sup = std::max(sup, u.values[p]);
        inf = std::min(inf, u.values[p]);
    }
    return sup / inf;
}

LevelMeasurement measure_level(const ScalarField& u, const EstimateOptions& options) {
    LevelMeasurement m;
    m.level = u.geometry.points_per_axis();
    m.c2_ratio = measure_c2(u, options.ball);
    m.grad_ratio = measure_gradient(u, options.ball);
    if (options.harnack_shift) {
        ScalarField shifted = u;
        for (double& v : shifted.values) v += *options.harnack_shift;
        m.harnack_ratio = measure_harnack(shifted, options.ball);
    } else {
        m.harnack_ratio = measure_harnack(u, options.ball);
    }
    m.osc_ratio = measure_osc(u);
    return m;
}

namespace {

RatioStability stability_of(const std::string& name, const std::vector<std::optional<double>>& series) {
    RatioStability s;
    s.name = name;
    const std::size_t start = series.size() > 3 ? series.size() - 3 : 0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t i = start; i < series.size(); ++i) {
        if (!series[i]) {
            s.skipped = true;
            continue;
        }
        const double v = *series[i];
        if (!std::isfinite(v) || v < 0.0) s.finite = false;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (s.skipped) {
        s.stable = true;
        s.max_over_min = 0.0;
        return s;
    }
    if (hi == 0.0) {
        s.max_over_min = 1.0;
    } else {
        s.max_over_min = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    }
    s.stable = s.finite && s.max_over_min <= 2.0;
    return s;
}

}  // namespace

EstimateReport make_estimate_report(std::string instance, const Ball& ball, std::vector<LevelMeasurement> levels) {
    std::sort(levels.begin(), levels.end(), [](const auto& a, const auto& b) { return a.level < b.level; });
    EstimateReport r;
    r.instance = std::move(instance);
    r.ball = ball;
    r.levels = std::move(levels);
    std::vector<std::optional<double>> c2, grad, harnack, osc;
    for (const auto& l : r.levels) {
        c2.emplace_back(l.c2_ratio);
        grad.emplace_back(l.grad_ratio);
        harnack.push_back(l.harnack_ratio);
        osc.emplace_back(l.osc_ratio);
    }
    r.stability = {stability_of("c2_ratio", c2), stability_of("grad_ratio", grad),
                   stability_of("harnack_ratio", harnack), stability_of("osc_ratio", osc)};
    r.all_stable = std::all_of(r.stability.begin(), r.stability.end(), [](const auto& s) { return s.stable; });
    return r;
}

EllipticityCheck check_ellipticity(const ProblemSpec& spec, const ScalarField& u, const ProbeOptions& options) {
    const Operator op(spec.op);
    const auto pe = evaluate_operator(op, spectral_decompose(assemble_g(u, spec.X)), 0.0, false, false);
    const std::size_t P = u.size();
    const bool interval = u.geometry.kind() == GeometryKind::interval;
    std::vector<std::size_t> interior;
    for (std::size_t p = 0; p < P; ++p) {
        if (!(interval && (p == 0 || p + 1 == P))) interior.push_back(p);
    }
    std::vector<double> values;
    for (std::size_t p : interior) {
        if (!(pe.margin[p] > 0.0)) throw AdmissibilityError("state is inadmissible", p);
        values.push_back(pe.value[p]);
    }
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2), values.end());
    EllipticityCheck out;
    out.sigma = values[values.size() / 2];
    out.c1 = ellipticity_c1(op, out.sigma, options);
    out.min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t p : interior) {
        const double slack = pe.min_frame_diagonal[p] - out.c1.value * pe.coefficient_sum[p];
        if (slack < out.min_slack) {
            out.min_slack = slack;
            out.worst_point = p;
        }
    }
    out.holds = out.min_slack >= -1e-10;
    return out;
}

json to_json(const EllipticityCheck& c) {
    return json{{"c1", to_json(c.c1)},
                {"sigma", c.sigma},
                {"min_slack", c.min_slack},
                {"worst_point", c.worst_point},
                {"holds", c.holds}};
}

json to_json(const EstimateReport& r) {
    json levels = json::array();
    for (const auto& l : r.levels) {
        levels.push_back(json{{"level", l.level},
                              {"c2_ratio", l.c2_ratio},
                              {"grad_ratio", l.grad_ratio},
                              {"harnack_ratio", l.harnack_ratio ? json(*l.harnack_ratio) : json("skipped")},
                              {"osc_ratio", l.osc_ratio}});
    }
    json stability = json::array();
    for (const auto& s : r.stability) {
        stability.push_back(json{{"ratio", s.name},
                                 {"max_over_min", std::isfinite(s.max_over_min) ? json(s.max_over_min) : json(nullptr)},
                                 {"finite", s.finite},
                                 {"stable", s.stable},
                                 {"skipped", s.skipped}});
    }
    return json{{"instance", r.instance},
                {"ball", {{"center", r.ball.center}, {"radius", r.ball.radius}}},
                {"hessian_norm", "operator norm relative to omega"},
                {"levels", levels},
                {"stability", stability},
                {"all_stable", r.all_stable}};
}

std::string to_csv(const EstimateReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << "level,ratio,value\n";
    for (const auto& l : r.levels) {
        os << l.level << ",c2_ratio," << l.c2_ratio << "\n";
        os << l.level << ",grad_ratio," << l.grad_ratio << "\n";
        if (l.harnack_ratio) os << l.level << ",harnack_ratio," << *l.harnack_ratio << "\n";
        os << l.level << ",osc_ratio," << l.osc_ratio << "\n";
    }
    return os.str();
}

}  // namespace plpde
