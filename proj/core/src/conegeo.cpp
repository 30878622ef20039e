#include "plpde/conegeo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace plpde {

namespace {

double signed_root(double value, int degree) {
    if (degree == 1) return value;
    const double r = std::pow(std::abs(value), 1.0 / degree);
    return value < 0.0 ? -r : r;
}

// Degree-normalized defining inequalities e_j / C(m, j), j = 1..k.
void garding_values(std::span<const double> x, int k, std::vector<double>& out) {
    const auto e = elementary_symmetric(x, k);
    const int m = static_cast<int>(x.size());
    for (int j = 1; j <= k; ++j) {
        out.push_back(signed_root(e[static_cast<std::size_t>(j)] / binomial(m, j), j));
    }
}

Membership classify(const std::vector<double>& values, double tol) {
    bool on_boundary = false;
    for (double v : values) {
        if (v < -tol) return Membership::outside;
        if (v <= tol) on_boundary = true;
    }
    return on_boundary ? Membership::boundary : Membership::interior;
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

std::string to_string(ProbeSpace space) {
    return space == ProbeSpace::lambda_space ? "lambda_space" : "eigenvalue_space";
}

LevelSetSample make_sample(const LevelTarget& target, double sigma, std::vector<double> point) {
    LevelSetSample s;
    s.gradient.assign(point.size(), 0.0);
    const double f = target.value_and_gradient(point, s.gradient);
    double norm = 0.0;
    for (double g : s.gradient) norm += g * g;
    norm = std::sqrt(norm);
    s.normal.resize(point.size());
    s.support_value = 0.0;
    for (std::size_t i = 0; i < point.size(); ++i) {
        s.normal[i] = norm > 0.0 ? s.gradient[i] / norm : 0.0;
        s.support_value += s.normal[i] * point[i];
    }
    s.residual = f - sigma;
    s.point = std::move(point);
    return s;
}

// Subsets {0..s-1} for s = 1..m-1 first, then seeded random subsets of each
// size in turn, up to the budget.
std::vector<std::vector<int>> probe_subsets(std::size_t m, std::size_t budget, std::uint64_t seed) {
    std::vector<std::vector<int>> subsets;
    if (m < 2) return subsets;
    std::set<std::vector<int>> seen;
    for (std::size_t s = 1; s < m; ++s) {
        std::vector<int> J(s);
        std::iota(J.begin(), J.end(), 0);
        seen.insert(J);
        subsets.push_back(std::move(J));
    }
    std::mt19937_64 rng(seed);
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t attempts = 0;
    std::size_t size = 1;
    while (subsets.size() < budget && attempts < 8 * budget) {
        ++attempts;
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<int> J(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(size));
        std::sort(J.begin(), J.end());
        size = size % (m - 1) + 1;
        if (seen.insert(J).second) subsets.push_back(std::move(J));
    }
    return subsets;
}

std::vector<double> ray_base(std::size_t m, const std::vector<int>& subset, double magnitude) {
    std::vector<double> base(m, 0.0);
    for (int i : subset) base[static_cast<std::size_t>(i)] = magnitude;
    return base;
}

}  // namespace

std::string to_string(Membership m) {
    switch (m) {
        case Membership::interior: return "interior";
        case Membership::boundary: return "boundary";
        case Membership::outside: return "outside";
    }
    return "unknown";
}

Membership cone_membership(const ConeSpec& cone, std::span<const double> lambda, std::optional<double> tolerance) {
    if (lambda.empty()) throw DomainError("cone_membership: empty vector");
    const double tol = tolerance.value_or(1e-10 * (1.0 + max_abs(lambda)));
    std::vector<double> values;
    std::visit(
        [&](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, GardingCone>) {
                if (c.dim != static_cast<int>(lambda.size()) || c.k < 1 || c.k > c.dim) {
                    throw DomainError("cone_membership: Garding cone Gamma_" + std::to_string(c.k) + " in R^" +
                                      std::to_string(c.dim) + " does not match a vector of length " +
                                      std::to_string(lambda.size()));
                }
                garding_values(lambda, c.k, values);
            } else if constexpr (std::is_same_v<T, PartialCone>) {
                if (c.n != static_cast<int>(lambda.size())) {
                    throw DomainError("cone_membership: partial-sum cone dimension mismatch");
                }
                const IndexSetFamily family(c.n, c.K);
                values = lambda_map(lambda, family);
            } else {
                if (c.spec.n != static_cast<int>(lambda.size())) {
                    throw DomainError("cone_membership: operator dimension mismatch");
                }
                const Operator op(c.spec);
                values.push_back(op.composite_margin(lambda));
            }
        },
        cone);
    return classify(values, tol);
}

// ---------------------------------------------------------------- level sets

LevelTarget::LevelTarget(const Operator& op, ProbeSpace space)
    : op_(&op), space_(space), dim_(space == ProbeSpace::lambda_space ? op.N() : op.n()) {}

double LevelTarget::margin(std::span<const double> x) const {
    return space_ == ProbeSpace::lambda_space ? op_->function().margin(x) : op_->composite_margin(x);
}

double LevelTarget::value_and_gradient(std::span<const double> x, std::span<double> grad) const {
    if (space_ == ProbeSpace::lambda_space) {
        return op_->function().value_and_gradient(x, grad) + op_->spec().level_shift;
    }
    return op_->composite_value_and_gradient(x, grad);
}

double LevelTarget::boundary_sup() const { return op_->boundary_sup(); }

double LevelTarget::diagonal_value(double t) const {
    if (space_ == ProbeSpace::lambda_space) {
        return op_->function().diagonal_value(t, dim_) + op_->spec().level_shift;
    }
    return op_->diagonal_value(t);
}

void check_level(const LevelTarget& target, double sigma) {
    if (!std::isfinite(sigma)) throw DomainError("level must be finite");
    if (!(sigma > target.boundary_sup())) {
        throw DomainError("level " + std::to_string(sigma) + " must exceed sup over the cone boundary (" +
                          std::to_string(target.boundary_sup()) + ")");
    }
}

std::optional<LevelSetSample> project_to_level(const LevelTarget& target, double sigma, std::span<const double> base) {
    const std::size_t m = target.dim();
    if (base.size() != m) throw DomainError("project_to_level: base point has the wrong dimension");
    check_level(target, sigma);

    std::vector<double> x(m);
    std::vector<double> grad(m);
    struct Eval {
        bool admissible = false;
        double value = 0.0;
        double slope = 0.0;
    };
    auto eval = [&](double tau) -> Eval {
        for (std::size_t i = 0; i < m; ++i) x[i] = base[i] + tau;
        if (!(target.margin(x) > 0.0)) return {};
        try {
            const double f = target.value_and_gradient(x, grad);
            double slope = 0.0;
            for (double g : grad) slope += g;
            return {true, f, slope};
        } catch (const AdmissibilityError&) {
            return {};
        }
    };
    auto above = [&](const Eval& e) { return e.admissible && e.value >= sigma; };

    const double scale = std::max(1.0, max_abs(base));
    constexpr int max_expansions = 2000;

    double hi = scale;
    Eval e_hi = eval(hi);
    for (int it = 0; !above(e_hi); ++it) {
        if (it == max_expansions) throw DomainError("project_to_level: level is not reached along the diagonal");
        hi = 2.0 * hi + scale;
        e_hi = eval(hi);
    }

    double step = scale;
    double lo = hi - step;
    bool bracketed = false;
    for (int it = 0; it < max_expansions; ++it) {
        const Eval e = eval(lo);
        if (!above(e)) {
            bracketed = true;
            break;
        }
        hi = lo;
        e_hi = e;
        step *= 2.0;
        lo = hi - step;
    }
    if (!bracketed) return std::nullopt;

    for (int it = 0; it < 4000; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi)) break;
        const Eval e = eval(mid);
        if (above(e)) {
            hi = mid;
            e_hi = e;
        } else {
            lo = mid;
        }
    }

    // Newton polish from the admissible side of the bracket.
    double tau = hi;
    Eval best = e_hi;
    for (int it = 0; it < 8 && best.slope > 0.0; ++it) {
        const double trial = tau - (best.value - sigma) / best.slope;
        const Eval e = eval(trial);
        if (!e.admissible || !(std::abs(e.value - sigma) < std::abs(best.value - sigma))) break;
        tau = trial;
        best = e;
    }

    std::vector<double> point(m);
    for (std::size_t i = 0; i < m; ++i) point[i] = base[i] + tau;
    return make_sample(target, sigma, std::move(point));
}

std::vector<std::optional<LevelSetSample>> level_set_sample(const Operator& op, double sigma,
                                                            std::span<const double> direction, std::size_t count,
                                                            ProbeSpace space) {
    const LevelTarget target(op, space);
    if (direction.size() != target.dim()) throw DomainError("level_set_sample: direction has the wrong dimension");
    std::vector<std::optional<LevelSetSample>> out;
    out.reserve(count);
    std::vector<double> base(direction.size());
    for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t i = 0; i < base.size(); ++i) base[i] = static_cast<double>(s) * direction[i];
        out.push_back(project_to_level(target, sigma, base));
    }
    return out;
}

// ---------------------------------------------------------------- rank probe

double rank_threshold(const OperatorSpec& spec) {
    const double N = binomial(spec.n, spec.K);
    return N * static_cast<double>(spec.n - spec.K) / static_cast<double>(spec.n) + 1.0;
}

C1Estimate c1_estimate(int rank, std::span<const LevelSetSample> samples) {
    C1Estimate out;
    out.rank = rank;
    out.samples = samples.size();
    if (samples.empty()) throw DomainError("c1_estimate: no samples");
    const std::size_t m = samples.front().gradient.size();
    if (rank < 1 || static_cast<std::size_t>(rank) > m) {
        throw DomainError("c1_estimate: rank " + std::to_string(rank) + " outside 1.." + std::to_string(m));
    }
    const std::size_t count = m - static_cast<std::size_t>(rank) + 1;
    double worst = std::numeric_limits<double>::infinity();
    std::vector<double> g;
    for (const auto& s : samples) {
        g = s.gradient;
        const double total = std::accumulate(g.begin(), g.end(), 0.0);
        std::sort(g.begin(), g.end());
        const double smallest = std::accumulate(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(count), 0.0);
        worst = std::min(worst, total > 0.0 ? smallest / total : 0.0);
    }
    out.raw_minimum = worst;
    out.flagged = worst < 1e-8;
    out.value = out.flagged ? 0.0 : worst;
    return out;
}

std::vector<LevelSetSample> c1_samples(const Operator& op, double sigma, const ProbeOptions& options) {
    const LevelTarget target(op, options.space);
    const std::size_t m = target.dim();
    std::vector<LevelSetSample> samples;
    auto add = [&](std::span<const double> base) {
        if (auto s = project_to_level(target, sigma, base)) samples.push_back(std::move(*s));
    };
    add(std::vector<double>(m, 0.0));
    for (const auto& J : probe_subsets(m, std::max<std::size_t>(options.ray_budget, 1), options.seed)) {
        for (double mag : options.magnitudes) add(ray_base(m, J, mag));
    }
    std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<double> scales{1.0};
    scales.insert(scales.end(), options.magnitudes.begin(), options.magnitudes.end());
    std::vector<double> d(m);
    for (std::size_t r = 0; r < options.random_directions; ++r) {
        for (auto& v : d) v = unit(rng);
        const double s = scales[r % scales.size()];
        std::vector<double> base(m);
        for (std::size_t i = 0; i < m; ++i) base[i] = s * d[i];
        add(base);
    }
    return samples;
}

C1Estimate ellipticity_c1(const Operator& op, double sigma, const ProbeOptions& options) {
    ProbeOptions o = options;
    o.space = ProbeSpace::lambda_space;
    const auto samples = c1_samples(op, sigma, o);
    const int r = static_cast<int>(std::lround(rank_threshold(op.spec())));
    return c1_estimate(std::min<int>(r, static_cast<int>(op.N())), samples);
}

RankCertificate rank_probe(const Operator& op, double sigma, const ProbeOptions& options) {
    const LevelTarget target(op, options.space);
    check_level(target, sigma);
    const std::size_t m = target.dim();

    if (options.magnitudes.size() < 2) throw DomainError("rank_probe: need at least two probe magnitudes");
    for (std::size_t i = 1; i < options.magnitudes.size(); ++i) {
        if (!(options.magnitudes[i] > options.magnitudes[i - 1]) || !(options.magnitudes[0] > 0.0)) {
            throw DomainError("rank_probe: probe magnitudes must be positive and increasing");
        }
    }

    RankCertificate cert;
    cert.sigma = sigma;
    cert.ambient_dim = m;
    cert.space = options.space;
    cert.threshold_checked = options.space == ProbeSpace::lambda_space ? rank_threshold(op.spec()) : 2.0;
    cert.assumptions = {
        "f is symmetric, so one coordinate subset per size represents all subsets of that size",
        "supporting normals are read at magnitudes up to " + std::to_string(options.magnitudes.back()),
        "a normal component counts as nonzero above " + std::to_string(options.zero_tolerance) +
            " times the largest component",
    };

    const std::vector<double> origin(m, 0.0);
    if (auto diag = project_to_level(target, sigma, origin)) cert.diagonal_normal = diag->normal;

    const std::size_t required = m < 2 ? 1 : m - 1;
    if (options.ray_budget < required) {
        cert.conclusive = false;
        cert.inconclusive_reason = "ray budget " + std::to_string(options.ray_budget) + " is below the " +
                                   std::to_string(required) + " subset sizes that must be probed";
        throw ProbeInconclusive(cert.inconclusive_reason, cert);
    }

    if (m == 1) {
        cert.estimated_rank = 1;
    } else {
        int rank = std::numeric_limits<int>::max();
        for (const auto& J : probe_subsets(m, options.ray_budget, options.seed)) {
            RayProbe ray;
            ray.subset = J;
            for (double mag : options.magnitudes) {
                auto s = project_to_level(target, sigma, ray_base(m, J, mag));
                if (!s) continue;
                ray.magnitudes.push_back(mag);
                ray.normals.push_back(s->normal);
                ray.support_values.push_back(s->support_value);
                ray.residuals.push_back(s->residual);
            }
            if (ray.normals.size() < 2) {
                cert.rays.push_back(ray);
                cert.conclusive = false;
                cert.inconclusive_reason = "fewer than two level-set points along a probe ray";
                throw ProbeInconclusive(cert.inconclusive_reason, cert);
            }
            const auto& last = ray.normals.back();
            const auto& prev = ray.normals[ray.normals.size() - 2];
            double change = 0.0;
            for (std::size_t i = 0; i < m; ++i) change = std::max(change, std::abs(last[i] - prev[i]));
            ray.last_change = change;
            ray.converged = change <= options.convergence_tolerance;
            ray.limiting_normal = last;
            const double top = max_abs(last);
            for (double v : last) {
                if (std::abs(v) > options.zero_tolerance * top) ++ray.nonzero_count;
            }
            cert.rays.push_back(ray);
            if (!ray.converged) {
                cert.conclusive = false;
                cert.inconclusive_reason = "supporting normals did not settle along a probe ray (last change " +
                                           std::to_string(change) + ")";
                throw ProbeInconclusive(cert.inconclusive_reason, cert);
            }
            rank = std::min(rank, ray.nonzero_count);
        }
        cert.estimated_rank = rank;
    }

    cert.passes_condition = static_cast<double>(cert.estimated_rank) >= cert.threshold_checked;
    const auto samples = c1_samples(op, sigma, options);
    cert.c1 = c1_estimate(cert.estimated_rank, samples);
    return cert;
}

RankConditionResult rank_condition_check(const Operator& op, const ProbeOptions& options) {
    const LevelTarget target(op, options.space);
    RankConditionResult result;
    result.threshold = options.space == ProbeSpace::lambda_space ? rank_threshold(op.spec()) : 2.0;
    result.rank = std::numeric_limits<int>::max();
    for (double t : {0.1, std::pow(10.0, -0.5), 1.0, std::pow(10.0, 0.5), 10.0}) {
        const double level = target.diagonal_value(t);
        result.levels.push_back(level);
        result.certificates.push_back(rank_probe(op, level, options));
        result.rank = std::min(result.rank, result.certificates.back().estimated_rank);
    }
    result.passes = static_cast<double>(result.rank) >= result.threshold;
    return result;
}

// ---------------------------------------------------------------- reports

json to_json(const C1Estimate& e) {
    return json{{"value", e.value},
                {"raw_minimum", e.raw_minimum},
                {"flagged", e.flagged},
                {"rank", e.rank},
                {"samples", e.samples}};
}

json to_json(const RankCertificate& c) {
    json rays = json::array();
    for (const auto& r : c.rays) {
        std::vector<int> subset;
        for (int i : r.subset) subset.push_back(i + 1);
        rays.push_back(json{{"subset", subset},
                            {"magnitudes", r.magnitudes},
                            {"normals", r.normals},
                            {"support_values", r.support_values},
                            {"residuals", r.residuals},
                            {"limiting_normal", r.limiting_normal},
                            {"nonzero_count", r.nonzero_count},
                            {"last_change", r.last_change},
                            {"converged", r.converged}});
    }
    json out{{"sigma", c.sigma},
             {"ambient_dim", c.ambient_dim},
             {"space", to_string(c.space)},
             {"estimated_rank", c.estimated_rank},
             {"threshold_checked", c.threshold_checked},
             {"passes_condition", c.passes_condition},
             {"conclusive", c.conclusive},
             {"diagonal_normal", c.diagonal_normal},
             {"c1", to_json(c.c1)},
             {"rays", rays},
             {"assumptions", c.assumptions}};
    if (!c.conclusive) out["inconclusive_reason"] = c.inconclusive_reason;
    return out;
}

json to_json(const RankConditionResult& r) {
    json certs = json::array();
    for (const auto& c : r.certificates) certs.push_back(to_json(c));
    return json{{"passes", r.passes},
                {"threshold", r.threshold},
                {"rank", r.rank},
                {"levels", r.levels},
                {"certificates", certs}};
}

}  // namespace plpde
