#include "plpde_cli/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <sstream>

#include "plpde/errors.hpp"
#include "plpde/field_io.hpp"

namespace plpde::cli {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// A JSON value with its location in the document, for field-path errors.
class Node {
public:
    Node(const json& value, std::string path) : value_(value), path_(std::move(path)) {}

    const json& value() const { return value_; }
    const std::string& path() const { return path_; }

    [[noreturn]] void fail(const std::string& message) const { throw ConfigurationError(message, path_); }

    void expect_object() const {
        if (!value_.is_object()) fail("expected an object");
    }
    void allow(std::initializer_list<const char*> keys) const {
        expect_object();
        for (const auto& [key, _] : value_.items()) {
            bool known = false;
            for (const char* k : keys) known = known || key == k;
            if (!known) Node(value_[key], join(key)).fail("unknown field");
        }
    }
    bool has(const char* key) const { return value_.is_object() && value_.contains(key); }
    Node operator[](const char* key) const {
        expect_object();
        if (!value_.contains(key)) Node(value_, join(key)).fail("missing required field");
        return Node(value_.at(key), join(key));
    }
    Node at(std::size_t i) const { return Node(value_.at(i), path_ + "[" + std::to_string(i) + "]"); }
    std::size_t size() const {
        if (!value_.is_array()) fail("expected an array");
        return value_.size();
    }

    double number() const {
        if (!value_.is_number()) fail("expected a number");
        const double v = value_.get<double>();
        if (!std::isfinite(v)) fail("expected a finite number");
        return v;
    }
    long long integer() const {
        if (!value_.is_number_integer()) fail("expected an integer");
        return value_.get<long long>();
    }
    std::uint64_t unsigned_integer() const {
        if (value_.is_number_unsigned()) return value_.get<std::uint64_t>();
        const long long v = integer();
        if (v < 0) fail("expected a non-negative integer");
        return static_cast<std::uint64_t>(v);
    }
    std::string string() const {
        if (!value_.is_string()) fail("expected a string");
        return value_.get<std::string>();
    }
    bool boolean() const {
        if (!value_.is_boolean()) fail("expected true or false");
        return value_.get<bool>();
    }
    std::vector<double> numbers() const {
        std::vector<double> out;
        for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).number());
        return out;
    }

    double number_or(const char* key, double fallback) const { return has(key) ? (*this)[key].number() : fallback; }
    int int_or(const char* key, int fallback) const {
        return has(key) ? static_cast<int>((*this)[key].integer()) : fallback;
    }

private:
    std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& value_;
    std::string path_;
};

Profile parse_profile(const Node& node, const GeometryConfig& geometry) {
    Profile p;
    if (node.value().is_number()) {
        p.constant = node.number();
        return p;
    }
    node.allow({"constant", "modes", "polynomial"});
    p.constant = node.number_or("constant", 0.0);
    const int dims = geometry.kind == GeometryKind::flat_torus ? 2 * geometry.n : 1;
    if (node.has("modes")) {
        const Node modes = node["modes"];
        for (std::size_t i = 0; i < modes.size(); ++i) {
            const Node m = modes.at(i);
            m.allow({"amplitude", "axis", "frequency", "phase"});
            Profile::Mode mode;
            mode.amplitude = m["amplitude"].number();
            mode.axis = m.int_or("axis", 0);
            mode.frequency = m.number_or("frequency", 1.0);
            mode.phase = m.number_or("phase", 0.0);
            if (mode.axis < 0 || mode.axis >= dims) m["axis"].fail("axis outside 0.." + std::to_string(dims - 1));
            if (geometry.kind == GeometryKind::flat_torus && mode.frequency != std::round(mode.frequency)) {
                m["frequency"].fail("torus modes need integer frequencies to be periodic");
            }
            p.modes.push_back(mode);
        }
    }
    if (node.has("polynomial")) {
        if (geometry.kind != GeometryKind::interval) node["polynomial"].fail("polynomial terms are only periodic on the interval");
        p.polynomial = node["polynomial"].numbers();
    }
    return p;
}

GeometryConfig parse_geometry(const Node& node) {
    node.allow({"kind", "n", "points_per_axis", "points", "a", "b", "omega_diagonal"});
    GeometryConfig g;
    const std::string kind = node["kind"].string();
    if (kind == "flat_torus") {
        g.kind = GeometryKind::flat_torus;
        g.points = node.int_or("points_per_axis", 16);
    } else if (kind == "interval") {
        g.kind = GeometryKind::interval;
        g.points = node.int_or("points", 65);
        g.a = node["a"].number();
        g.b = node["b"].number();
        if (!(g.b > g.a)) node["b"].fail("interval needs a < b");
    } else {
        node["kind"].fail("expected \"flat_torus\" or \"interval\"");
    }
    g.n = node.int_or("n", 1);
    if (g.n < 1 || g.n > 8) node["n"].fail("n must be in 1..8");
    if (node.has("omega_diagonal")) {
        g.omega_diagonal = node["omega_diagonal"].numbers();
        if (g.omega_diagonal.size() != static_cast<std::size_t>(g.n)) node["omega_diagonal"].fail("needs n entries");
        for (double v : g.omega_diagonal) {
            if (!(v > 0.0)) node["omega_diagonal"].fail("metric entries must be positive");
        }
    }
    return g;
}

OperatorSpec parse_operator(const Node& node, int n) {
    node.allow({"family", "k", "K", "beta", "level_shift"});
    OperatorSpec op;
    try {
        op.family = family_from_string(node["family"].string());
    } catch (const Error& e) {
        node["family"].fail(e.what());
    }
    op.n = n;
    op.K = node.int_or("K", 1);
    op.k = node.int_or("k", 1);
    op.beta = node.number_or("beta", 0.0);
    op.level_shift = node.number_or("level_shift", 0.0);
    if (op.K < 1 || op.K > n) node["K"].fail("K must be in 1..n");
    try {
        const Operator check(op);
        (void)check;
    } catch (const Error& e) {
        Node(node.value(), node.path()).fail(e.what());
    }
    return op;
}

}  // namespace

// ---------------------------------------------------------------- profiles

double Profile::value(std::span<const double> x) const {
    double v = constant;
    for (const auto& m : modes) v += m.amplitude * std::cos(kTwoPi * m.frequency * x[static_cast<std::size_t>(m.axis)] + m.phase);
    double power = 1.0;
    for (double c : polynomial) {
        v += c * power;
        power *= x[0];
    }
    return v;
}

double Profile::second_derivative(std::span<const double> x, int axis) const {
    double v = 0.0;
    for (const auto& m : modes) {
        if (m.axis != axis) continue;
        const double k = kTwoPi * m.frequency;
        v -= m.amplitude * k * k * std::cos(k * x[static_cast<std::size_t>(axis)] + m.phase);
    }
    if (axis == 0) {
        double power = 1.0;
        for (std::size_t i = 2; i < polynomial.size(); ++i) {
            v += static_cast<double>(i * (i - 1)) * polynomial[i] * power;
            power *= x[0];
        }
    }
    return v;
}

HermitianMatrix Profile::complex_hessian(const ModelGeometry& g, std::span<const double> x) const {
    const int n = g.n();
    HermitianMatrix h = HermitianMatrix::Zero(n, n);
    if (g.kind() == GeometryKind::interval) {
        h(0, 0) = 0.25 * second_derivative(x, 0);
        return h;
    }
    for (int i = 0; i < n; ++i) h(i, i) = 0.25 * (second_derivative(x, 2 * i) + second_derivative(x, 2 * i + 1));
    return h;
}

// ---------------------------------------------------------------- parsing

RunConfig parse_config(const json& document, const std::filesystem::path& base_dir) {
    const Node root(document, "");
    root.allow({"seed", "problem", "solver", "probe", "estimates", "output"});
    RunConfig c;
    c.document = document;
    if (root.has("seed")) c.seed = root["seed"].unsigned_integer();

    const Node problem = root["problem"];
    problem.allow({"type", "geometry", "operator", "X", "psi", "mode", "boundary", "subsolution", "barrier"});
    c.geometry = parse_geometry(problem["geometry"]);
    const std::string type = problem.has("type") ? problem["type"].string() : "pde";
    if (type == "barrier") {
        c.barrier = true;
        if (c.geometry.kind != GeometryKind::interval) problem["geometry"]["kind"].fail("the barrier problem needs an interval");
        const Node bm = problem["barrier"];
        bm.allow({"rho1", "b"});
        c.barrier_model.rho1 = bm.number_or("rho1", 1.0);
        c.barrier_model.b = bm["b"].number();
        if (!(c.barrier_model.rho1 > 0.0)) bm["rho1"].fail("rho1 must be positive");
    } else if (type != "pde") {
        problem["type"].fail("expected \"pde\" or \"barrier\"");
    }

    if (problem.has("operator")) {
        c.op = parse_operator(problem["operator"], c.geometry.n);
    } else if (!c.barrier) {
        problem["operator"];  // raises "missing required field"
    }

    if (!c.barrier) {
        if (problem.has("X")) {
            const Node x = problem["X"];
            if (x.value().is_number()) {
                c.X.scalar = x.number();
            } else {
                x.allow({"scalar", "diagonal"});
                if (x.has("scalar") == x.has("diagonal")) x.fail("give exactly one of \"scalar\" or \"diagonal\"");
                if (x.has("scalar")) {
                    c.X.scalar = x["scalar"].number();
                } else {
                    const Node d = x["diagonal"];
                    if (d.size() != static_cast<std::size_t>(c.geometry.n)) d.fail("needs n profiles");
                    for (std::size_t i = 0; i < d.size(); ++i) c.X.diagonal.push_back(parse_profile(d.at(i), c.geometry));
                }
            }
        } else {
            c.X.scalar = 0.0;
        }

        c.psi.given = problem.has("psi");
        static const json empty = json::object();
        const Node psi = c.psi.given ? problem["psi"] : Node(empty, "problem.psi");
        if (!c.psi.given) {
            // Only commands that build the PDE problem need ψ (see build_problem).
        } else if (psi.value().is_number()) {
            c.psi.kind = PsiConfig::Kind::constant;
            c.psi.constant = psi.number();
        } else {
            psi.allow({"constant", "file", "mms"});
            const int kinds = int(psi.has("constant")) + int(psi.has("file")) + int(psi.has("mms"));
            if (kinds != 1) psi.fail("give exactly one of \"constant\", \"file\" or \"mms\"");
            if (psi.has("constant")) {
                c.psi.kind = PsiConfig::Kind::constant;
                c.psi.constant = psi["constant"].number();
            } else if (psi.has("file")) {
                c.psi.kind = PsiConfig::Kind::file;
                c.psi.file = psi["file"].string();
                if (c.psi.file.is_relative()) c.psi.file = base_dir / c.psi.file;
            } else {
                const Node mms = psi["mms"];
                mms.allow({"u_star", "analytic", "levels"});
                c.psi.kind = PsiConfig::Kind::mms;
                c.psi.u_star = parse_profile(mms["u_star"], c.geometry);
                c.psi.analytic = mms.has("analytic") && mms["analytic"].boolean();
                if (mms.has("levels")) {
                    const Node lv = mms["levels"];
                    for (std::size_t i = 0; i < lv.size(); ++i) {
                        const long long v = lv.at(i).integer();
                        if (v < 5 || v > (1 << 20)) lv.at(i).fail("level out of range");
                        c.psi.levels.push_back(static_cast<int>(v));
                    }
                }
            }
        }

        if (problem.has("mode")) {
            const std::string m = problem["mode"].string();
            if (m == "periodic_with_constant") {
                c.mode = SolveMode::periodic_with_constant;
            } else if (m == "dirichlet") {
                c.mode = SolveMode::dirichlet;
            } else {
                problem["mode"].fail("expected \"periodic_with_constant\" or \"dirichlet\"");
            }
        }
        if (problem.has("boundary")) c.boundary = parse_profile(problem["boundary"], c.geometry);
        if (problem.has("subsolution")) c.subsolution = parse_profile(problem["subsolution"], c.geometry);
    }

    if (root.has("solver")) {
        const Node s = root["solver"];
        s.allow({"newton_tolerance", "path_tolerance", "max_newton_iterations", "t_min", "initial_step", "step_floor",
                 "step_growth", "min_damping", "homotopy_A", "gmres_restart", "gmres_max_iterations"});
        auto positive = [&](const char* key, double fallback) {
            const double v = s.number_or(key, fallback);
            if (!(v > 0.0)) s[key].fail("must be positive");
            return v;
        };
        c.solver.newton_tolerance = positive("newton_tolerance", c.solver.newton_tolerance);
        c.solver.path_tolerance = positive("path_tolerance", c.solver.path_tolerance);
        c.solver.max_newton_iterations = s.int_or("max_newton_iterations", c.solver.max_newton_iterations);
        c.solver.t_min = positive("t_min", c.solver.t_min);
        c.solver.initial_step = positive("initial_step", c.solver.initial_step);
        c.solver.step_floor = positive("step_floor", c.solver.step_floor);
        c.solver.step_growth = positive("step_growth", c.solver.step_growth);
        c.solver.min_damping = positive("min_damping", c.solver.min_damping);
        if (s.has("homotopy_A")) c.solver.homotopy_A = positive("homotopy_A", 1.0);
        c.solver.gmres_restart = s.int_or("gmres_restart", c.solver.gmres_restart);
        c.solver.gmres_max_iterations = s.int_or("gmres_max_iterations", c.solver.gmres_max_iterations);
        if (c.solver.t_min >= 1.0) s["t_min"].fail("must be below 1");
        if (c.solver.max_newton_iterations < 1) s["max_newton_iterations"].fail("must be at least 1");
        if (c.solver.gmres_restart < 1) s["gmres_restart"].fail("must be at least 1");
    }

    c.probe.seed = c.seed;
    if (root.has("probe")) {
        const Node p = root["probe"];
        p.allow({"magnitudes", "ray_budget", "random_directions", "space", "zero_tolerance", "convergence_tolerance"});
        if (p.has("magnitudes")) c.probe.magnitudes = p["magnitudes"].numbers();
        if (p.has("ray_budget")) c.probe.ray_budget = p["ray_budget"].unsigned_integer();
        if (p.has("random_directions")) c.probe.random_directions = p["random_directions"].unsigned_integer();
        if (p.has("space")) {
            const std::string s = p["space"].string();
            if (s == "lambda") {
                c.probe.space = ProbeSpace::lambda_space;
            } else if (s == "eigenvalue") {
                c.probe.space = ProbeSpace::eigenvalue_space;
            } else {
                p["space"].fail("expected \"lambda\" or \"eigenvalue\"");
            }
        }
        c.probe.zero_tolerance = p.number_or("zero_tolerance", c.probe.zero_tolerance);
        c.probe.convergence_tolerance = p.number_or("convergence_tolerance", c.probe.convergence_tolerance);
    }

    if (root.has("estimates")) {
        const Node e = root["estimates"];
        e.allow({"ball", "harnack_shift"});
        if (e.has("ball")) {
            const Node b = e["ball"];
            b.allow({"center", "radius"});
            Ball ball;
            ball.center = b["center"].numbers();
            ball.radius = b["radius"].number();
            const std::size_t dims = c.geometry.kind == GeometryKind::flat_torus ? 2 * c.geometry.n : 1;
            if (ball.center.size() != dims) b["center"].fail("needs " + std::to_string(dims) + " coordinates");
            if (!(ball.radius > 0.0)) b["radius"].fail("must be positive");
            if (c.geometry.kind == GeometryKind::flat_torus && ball.radius > 0.25) b["radius"].fail("torus balls are limited to radius 1/4");
            c.ball = ball;
        }
        if (e.has("harnack_shift")) c.harnack_shift = e["harnack_shift"].number();
    }

    if (root.has("output")) {
        const Node o = root["output"];
        o.allow({"directory", "formats"});
        if (o.has("directory")) c.output.directory = o["directory"].string();
        if (o.has("formats")) {
            const Node f = o["formats"];
            c.output.write_json = c.output.write_csv = c.output.write_fields = false;
            for (std::size_t i = 0; i < f.size(); ++i) {
                const std::string s = f.at(i).string();
                if (s == "json") {
                    c.output.write_json = true;
                } else if (s == "csv") {
                    c.output.write_csv = true;
                } else if (s == "f64") {
                    c.output.write_fields = true;
                } else {
                    f.at(i).fail("expected \"json\", \"csv\" or \"f64\"");
                }
            }
        }
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot open config file " + path.string());
    json document;
    try {
        document = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigurationError(std::string("malformed JSON: ") + e.what(), path.string());
    }
    return parse_config(document, path.parent_path());
}

// ---------------------------------------------------------------- building

ModelGeometry build_geometry(const RunConfig& c, std::optional<int> points) {
    const auto& g = c.geometry;
    HermitianMatrix omega;
    if (!g.omega_diagonal.empty()) {
        omega = HermitianMatrix::Zero(g.n, g.n);
        for (int i = 0; i < g.n; ++i) omega(i, i) = g.omega_diagonal[static_cast<std::size_t>(i)];
    }
    const int p = points.value_or(g.points);
    try {
        if (g.kind == GeometryKind::flat_torus) return ModelGeometry::flat_torus(g.n, p, omega);
        return ModelGeometry::interval(g.a, g.b, p, g.n, omega);
    } catch (const ConfigurationError& e) {
        throw ConfigurationError(e.what(), "problem.geometry");
    }
}

HermitianField build_X(const RunConfig& c, const ModelGeometry& g) {
    if (c.X.scalar) return HermitianField::scaled_metric(g, *c.X.scalar);
    HermitianField X(g);
    std::vector<double> x(static_cast<std::size_t>(g.real_dim()));
    for (std::size_t p = 0; p < g.point_count(); ++p) {
        g.coordinates(p, x);
        auto m = X.at(p);
        for (int i = 0; i < g.n(); ++i) m(i, i) = c.X.diagonal[static_cast<std::size_t>(i)].value(x);
    }
    return X;
}

ProblemSpec build_problem(const RunConfig& c, const ModelGeometry& g) {
    if (c.barrier) throw ConfigurationError("a barrier configuration has no PDE problem", "problem.type");
    if (!c.psi.given) throw ConfigurationError("missing required field", "problem.psi");
    const HermitianField X = build_X(c, g);
    auto field = [&](const Profile& p) { return ScalarField::from_function(g, [&](std::span<const double> x) { return p.value(x); }); };

    std::optional<ProblemSpec> spec;
    switch (c.psi.kind) {
        case PsiConfig::Kind::constant:
            spec.emplace(g, c.op, X, ScalarField::constant(g, c.psi.constant));
            break;
        case PsiConfig::Kind::file: {
            ScalarField psi = read_scalar_field(c.psi.file);
            if (!psi.geometry.same_grid(g)) throw ConfigurationError("psi file grid does not match the geometry", "problem.psi.file");
            spec.emplace(g, c.op, X, std::move(psi));
            break;
        }
        case PsiConfig::Kind::mms:
            if (c.psi.analytic) {
                const Profile u = c.psi.u_star;
                ManufacturedSolution ms{[u](std::span<const double> x) { return u.value(x); },
                                        [u, g](std::span<const double> x) { return u.complex_hessian(g, x); }};
                spec.emplace(mms_generate(g, c.op, ms, X));
            } else {
                spec.emplace(mms_generate(g, c.op, field(c.psi.u_star), X));
            }
            break;
    }
    if (c.mode) spec->mode = *c.mode;
    else if (c.psi.kind != PsiConfig::Kind::mms) {
        spec->mode = g.kind() == GeometryKind::interval ? SolveMode::dirichlet : SolveMode::periodic_with_constant;
    }
    if (c.boundary) spec->boundary = field(*c.boundary);
    if (c.subsolution) spec->subsolution = field(*c.subsolution);
    spec->validate();
    return std::move(*spec);
}

Ball default_ball(const ModelGeometry& g) {
    if (g.kind() == GeometryKind::flat_torus) return Ball{std::vector<double>(static_cast<std::size_t>(g.real_dim()), 0.5), 0.25};
    return Ball{{0.5 * (g.a() + g.b())}, 0.25 * (g.b() - g.a())};
}

Ball estimate_ball(const RunConfig& c, const ModelGeometry& g) { return c.ball ? *c.ball : default_ball(g); }

std::uint64_t config_hash(const json& document) {
    const std::string text = document.dump();
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << value;
    return os.str();
}

}  // namespace plpde::cli
