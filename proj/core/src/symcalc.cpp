#include "plpde/symcalc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "plpde/errors.hpp"

namespace plpde {

namespace {

// Second-order jet in one scalar parameter: value, first and second derivative.
struct Jet {
    double v = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

// e_j(x + t d) as jets in t for j = 0..kmax.
std::vector<Jet> elementary_symmetric_jets(std::span<const double> x, std::span<const double> d, int kmax) {
    std::vector<Jet> e(static_cast<std::size_t>(kmax) + 1);
    e[0].v = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const int top = std::min<int>(kmax, static_cast<int>(i) + 1);
        for (int j = top; j >= 1; --j) {
            const Jet& p = e[static_cast<std::size_t>(j) - 1];
            Jet& q = e[static_cast<std::size_t>(j)];
            q.v += x[i] * p.v;
            q.d1 += x[i] * p.d1 + d[i] * p.v;
            q.d2 += x[i] * p.d2 + 2.0 * d[i] * p.d1;
        }
    }
    return e;
}

double signed_root(double value, int degree) {
    if (degree == 1) return value;
    const double r = degree == 2 ? std::sqrt(std::abs(value)) : std::pow(std::abs(value), 1.0 / degree);
    return value < 0.0 ? -r : r;
}

std::vector<double>& scratch(int slot) {
    thread_local std::vector<double> buffers[4];
    return buffers[slot];
}

}  // namespace

// ---------------------------------------------------------------- index sets

IndexSetFamily::IndexSetFamily(int n, int K) : n_(n), K_(K) {
    if (n < 1 || n > max_dimension || K < 1 || K > n) {
        throw DomainError("index set family requires 1 <= K <= n <= " + std::to_string(max_dimension) +
                          ", got n=" + std::to_string(n) + ", K=" + std::to_string(K));
    }
    std::vector<int> current(static_cast<std::size_t>(K));
    std::iota(current.begin(), current.end(), 0);
    containing_.assign(static_cast<std::size_t>(n), {});
    while (true) {
        for (int i : current) containing_[static_cast<std::size_t>(i)].push_back(count_);
        flat_.insert(flat_.end(), current.begin(), current.end());
        ++count_;
        // advance to the lexicographic successor
        int pos = K - 1;
        while (pos >= 0 && current[static_cast<std::size_t>(pos)] == n - K + pos) --pos;
        if (pos < 0) break;
        ++current[static_cast<std::size_t>(pos)];
        for (int q = pos + 1; q < K; ++q) {
            current[static_cast<std::size_t>(q)] = current[static_cast<std::size_t>(q) - 1] + 1;
        }
    }
}

IndexSetFamily enumerate_index_sets(int n, int K) { return IndexSetFamily(n, K); }

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double result = 1.0;
    for (int i = 1; i <= k; ++i) result = result * (n - k + i) / i;
    return std::round(result);
}

void lambda_map(std::span<const double> lambda, const IndexSetFamily& family, std::span<double> out) {
    if (lambda.size() != static_cast<std::size_t>(family.n()) || out.size() != family.size()) {
        throw DomainError("lambda_map: dimension mismatch (lambda has " + std::to_string(lambda.size()) +
                          " entries, family expects n=" + std::to_string(family.n()) + ")");
    }
    for (std::size_t j = 0; j < family.size(); ++j) {
        double s = 0.0;
        for (int i : family.set(j)) s += lambda[static_cast<std::size_t>(i)];
        out[j] = s;
    }
}

std::vector<double> lambda_map(std::span<const double> lambda, const IndexSetFamily& family) {
    std::vector<double> out(family.size());
    lambda_map(lambda, family, out);
    return out;
}

std::vector<double> lambda_prime(std::span<const double> lambda, const IndexSetFamily& family) {
    if (lambda.size() != static_cast<std::size_t>(family.n())) {
        throw DomainError("lambda_prime: dimension mismatch");
    }
    std::vector<double> out(family.size());
    std::vector<char> in_set(lambda.size());
    for (std::size_t j = 0; j < family.size(); ++j) {
        std::fill(in_set.begin(), in_set.end(), 0);
        for (int i : family.set(j)) in_set[static_cast<std::size_t>(i)] = 1;
        double s = 0.0;
        for (std::size_t i = 0; i < lambda.size(); ++i) {
            if (!in_set[i]) s += lambda[i];
        }
        out[j] = s;
    }
    return out;
}

// ------------------------------------------------------- elementary symmetric

namespace {

// e_0..e_kmax of v into e (size kmax + 1).
void elementary_symmetric_into(std::span<const double> v, int kmax, double* e) {
    std::fill(e, e + kmax + 1, 0.0);
    e[0] = 1.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const int top = std::min<int>(kmax, static_cast<int>(i) + 1);
        for (int j = top; j >= 1; --j) e[j] += v[i] * e[j - 1];
    }
}

// σ_{k-1}(v | i) for every i into out (size m), from prefix/suffix products.
void sigma_k_partials_into(int k, std::span<const double> v, double* out) {
    const std::size_t m = v.size();
    const std::size_t width = static_cast<std::size_t>(k);  // degrees 0..k-1
    thread_local std::vector<double> suffix;
    thread_local std::vector<double> prefix;
    // suffix[i] holds e_0..e_{k-1} of v[i+1..m)
    suffix.assign((m + 1) * width, 0.0);
    suffix[m * width] = 1.0;
    for (std::size_t i = m; i-- > 0;) {
        const double* next = &suffix[(i + 1) * width];
        double* cur = &suffix[i * width];
        cur[0] = 1.0;
        for (std::size_t j = 1; j < width; ++j) cur[j] = next[j] + v[i] * next[j - 1];
    }
    prefix.assign(width, 0.0);
    prefix[0] = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
        // out[i] = e_{k-1}(v without i) = Σ_j prefix_j * suffix(i+1)_{k-1-j}
        const double* suf = &suffix[(i + 1) * width];
        double s = 0.0;
        for (std::size_t j = 0; j < width; ++j) s += prefix[j] * suf[width - 1 - j];
        out[i] = s;
        for (std::size_t j = width - 1; j >= 1; --j) prefix[j] += v[i] * prefix[j - 1];
    }
}

double* es_buffer(int kmax) {
    thread_local std::vector<double> buffer;
    buffer.resize(static_cast<std::size_t>(kmax) + 1);
    return buffer.data();
}

}  // namespace

std::vector<double> elementary_symmetric(std::span<const double> v, int kmax) {
    std::vector<double> e(static_cast<std::size_t>(std::max(kmax, 0)) + 1, 0.0);
    elementary_symmetric_into(v, std::max(kmax, 0), e.data());
    return e;
}

double sigma_k(int k, std::span<const double> v) {
    if (k < 1 || static_cast<std::size_t>(k) > v.size()) {
        throw DomainError("sigma_k: order " + std::to_string(k) + " out of range for dimension " +
                          std::to_string(v.size()));
    }
    return elementary_symmetric(v, k)[static_cast<std::size_t>(k)];
}

std::vector<double> sigma_k_partials(int k, std::span<const double> v) {
    const std::size_t m = v.size();
    if (k < 1 || static_cast<std::size_t>(k) > m) throw DomainError("sigma_k_partials: order out of range");
    std::vector<double> out(m);
    sigma_k_partials_into(k, v, out.data());
    return out;
}

FlaggedValue rho_k(int k, std::span<const double> lambda) {
    const IndexSetFamily family(static_cast<int>(lambda.size()), k);
    FlaggedValue result{1.0, true};
    for (std::size_t j = 0; j < family.size(); ++j) {
        double s = 0.0;
        for (int i : family.set(j)) s += lambda[static_cast<std::size_t>(i)];
        if (!(s > 0.0)) result.in_domain = false;
        result.value *= s;
    }
    return result;
}

// ---------------------------------------------------------------- families

std::string to_string(Family family) {
    switch (family) {
        case Family::sigma_root: return "sigma_k";
        case Family::log_rho: return "log_rho";
        case Family::linear: return "linear";
    }
    return "unknown";
}

Family family_from_string(const std::string& name) {
    if (name == "sigma_k" || name == "sigma_root") return Family::sigma_root;
    if (name == "log_rho") return Family::log_rho;
    if (name == "linear" || name == "sigma_1") return Family::linear;
    throw ConfigurationError("unknown operator family '" + name + "' (expected sigma_k, log_rho or linear)");
}

SymmetricFunction::SymmetricFunction(Family family, int k) : family_(family), k_(k) {
    if (family_ == Family::sigma_root && k_ < 1) throw DomainError("sigma_k family requires k >= 1");
    if (family_ != Family::sigma_root) k_ = family_ == Family::linear ? 1 : 0;
}

void SymmetricFunction::check_dimension(std::size_t m) const {
    if (m == 0) throw DomainError("symmetric function on an empty vector");
    if (family_ == Family::sigma_root && static_cast<std::size_t>(k_) > m) {
        throw DomainError("sigma_" + std::to_string(k_) + " is undefined on R^" + std::to_string(m));
    }
}

double SymmetricFunction::margin(std::span<const double> x) const {
    const std::size_t m = x.size();
    switch (family_) {
        case Family::linear: {
            double s = 0.0;
            for (double v : x) s += v;
            return s / static_cast<double>(m);
        }
        case Family::log_rho: return *std::min_element(x.begin(), x.end());
        case Family::sigma_root: {
            double* e = es_buffer(k_);
            elementary_symmetric_into(x, k_, e);
            double worst = std::numeric_limits<double>::infinity();
            for (int j = 1; j <= k_; ++j) {
                const double normalized = e[j] / binomial(static_cast<int>(m), j);
                worst = std::min(worst, signed_root(normalized, j));
            }
            return worst;
        }
    }
    return 0.0;
}

std::string SymmetricFunction::violated_constraint(std::span<const double> x) const {
    switch (family_) {
        case Family::linear: return "sigma_1 > 0 violated";
        case Family::log_rho: {
            const auto it = std::min_element(x.begin(), x.end());
            return "component " + std::to_string(it - x.begin() + 1) + " > 0 violated (value " +
                   std::to_string(*it) + ")";
        }
        case Family::sigma_root: {
            const auto e = elementary_symmetric(x, k_);
            int worst_j = 1;
            double worst = std::numeric_limits<double>::infinity();
            for (int j = 1; j <= k_; ++j) {
                const double v =
                    signed_root(e[static_cast<std::size_t>(j)] / binomial(static_cast<int>(x.size()), j), j);
                if (v < worst) {
                    worst = v;
                    worst_j = j;
                }
            }
            return "sigma_" + std::to_string(worst_j) + " > 0 violated (value " +
                   std::to_string(e[static_cast<std::size_t>(worst_j)]) + ")";
        }
    }
    return "unknown";
}

void SymmetricFunction::require_admissible(std::span<const double> x) const {
    if (!(margin(x) > 0.0)) throw AdmissibilityError(violated_constraint(x));
}

double SymmetricFunction::value(std::span<const double> x) const {
    check_dimension(x.size());
    switch (family_) {
        case Family::linear: {
            require_admissible(x);
            double s = 0.0;
            for (double v : x) s += v;
            return s;
        }
        case Family::log_rho: {
            require_admissible(x);
            double s = 0.0;
            for (double v : x) s += std::log(v);
            return s;
        }
        case Family::sigma_root: {
            double* e = es_buffer(k_);
            elementary_symmetric_into(x, k_, e);
            for (int j = 1; j <= k_; ++j) {
                if (!(e[j] > 0.0)) throw AdmissibilityError(violated_constraint(x));
            }
            return k_ == 1 ? e[1] : k_ == 2 ? std::sqrt(e[2]) : std::pow(e[k_], 1.0 / k_);
        }
    }
    return 0.0;
}

double SymmetricFunction::value_and_gradient(std::span<const double> x, std::span<double> grad) const {
    const double f = value(x);
    switch (family_) {
        case Family::linear: std::fill(grad.begin(), grad.end(), 1.0); break;
        case Family::log_rho:
            for (std::size_t i = 0; i < x.size(); ++i) grad[i] = 1.0 / x[i];
            break;
        case Family::sigma_root: {
            // D σ_k^{1/k} = σ_k^{1/k} / (k σ_k) · σ_{k-1}(x|i)
            const double s = k_ == 2 ? f * f : std::pow(f, k_);
            const double scale = f / (k_ * s);
            sigma_k_partials_into(k_, x, grad.data());
            for (std::size_t i = 0; i < x.size(); ++i) grad[i] *= scale;
            break;
        }
    }
    return f;
}

double SymmetricFunction::hessian_action(std::span<const double> x, std::span<const double> d) const {
    check_dimension(x.size());
    require_admissible(x);
    switch (family_) {
        case Family::linear: return 0.0;
        case Family::log_rho: {
            double s = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) s -= d[i] * d[i] / (x[i] * x[i]);
            return s;
        }
        case Family::sigma_root: {
            const auto e = elementary_symmetric_jets(x, d, k_);
            const Jet& s = e[static_cast<std::size_t>(k_)];
            const double p = 1.0 / k_;
            return p * std::pow(s.v, p - 1.0) * s.d2 + p * (p - 1.0) * std::pow(s.v, p - 2.0) * s.d1 * s.d1;
        }
    }
    return 0.0;
}

double SymmetricFunction::boundary_sup() const {
    switch (family_) {
        case Family::sigma_root:
        case Family::linear: return 0.0;
        case Family::log_rho: return -std::numeric_limits<double>::infinity();
    }
    return 0.0;
}

double SymmetricFunction::diagonal_value(double t, std::size_t m) const {
    std::vector<double> x(m, t);
    return value(x);
}

// ---------------------------------------------------------------- operator

Operator::Operator(OperatorSpec spec)
    : spec_(spec), sets_(spec.n, spec.K), function_(spec.family, spec.k) {
    if (spec_.beta < 0.0 || !std::isfinite(spec_.beta)) throw DomainError("beta must be finite and >= 0");
    function_.check_dimension(sets_.size());
}

void Operator::deform(std::span<const double> Lambda, std::span<double> out) const {
    if (spec_.beta == 0.0) {
        std::copy(Lambda.begin(), Lambda.end(), out.begin());
        return;
    }
    double total = 0.0;
    for (double v : Lambda) total += v;
    const double sigma1 = total / static_cast<double>(sets_.multiplicity());
    const double b = spec_.beta;
    for (std::size_t j = 0; j < Lambda.size(); ++j) out[j] = (1.0 + b) * Lambda[j] - b * sigma1;
}

double Operator::f_eval(std::span<const double> Lambda) const {
    if (Lambda.size() != N()) throw DomainError("f_eval: expected a vector of length N");
    auto& d = scratch(0);
    d.resize(N());
    deform(Lambda, d);
    return function_.value(d) + spec_.level_shift;
}

std::vector<double> Operator::f_grad(std::span<const double> Lambda) const {
    if (Lambda.size() != N()) throw DomainError("f_grad: expected a vector of length N");
    std::vector<double> d(N());
    deform(Lambda, d);
    std::vector<double> grad(N());
    function_.value_and_gradient(d, grad);
    return grad;
}

double Operator::f_hessian_action(std::span<const double> Lambda, std::span<const double> direction) const {
    if (Lambda.size() != N() || direction.size() != N()) throw DomainError("f_hessian_action: size mismatch");
    std::vector<double> d(N());
    std::vector<double> dir(N());
    deform(Lambda, d);
    deform(direction, dir);
    return function_.hessian_action(d, dir);
}

double Operator::margin(std::span<const double> Lambda) const {
    auto& d = scratch(0);
    d.resize(N());
    deform(Lambda, d);
    return function_.margin(d);
}

double Operator::composite_value(std::span<const double> lambda) const {
    auto& L = scratch(1);
    L.resize(N());
    lambda_map(lambda, sets_, L);
    return f_eval(L);
}

double Operator::composite_margin(std::span<const double> lambda) const {
    auto& L = scratch(1);
    L.resize(N());
    lambda_map(lambda, sets_, L);
    return margin(L);
}

double Operator::composite_value_and_gradient(std::span<const double> lambda, std::span<double> grad,
                                              std::span<double> f_coefficients) const {
    auto& L = scratch(1);
    auto& D = scratch(2);
    auto& g = scratch(3);
    L.resize(N());
    D.resize(N());
    g.resize(N());
    lambda_map(lambda, sets_, L);
    deform(L, D);
    const double value = function_.value_and_gradient(D, g) + spec_.level_shift;
    double total = 0.0;
    for (double v : g) total += v;
    const double b = spec_.beta;
    for (std::size_t a = 0; a < n(); ++a) {
        double s = 0.0;
        for (std::size_t j : sets_.sets_containing(static_cast<int>(a))) s += g[j];
        grad[a] = (1.0 + b) * s - b * total;
    }
    if (!f_coefficients.empty()) std::copy(g.begin(), g.end(), f_coefficients.begin());
    return value;
}

double Operator::diagonal_value(double t) const {
    std::vector<double> lambda(n(), t);
    return composite_value(lambda);
}

}  // namespace plpde
