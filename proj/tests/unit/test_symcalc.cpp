#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "plpde/errors.hpp"
#include "plpde/symcalc.hpp"

using namespace plpde;

namespace {

std::vector<std::vector<int>> family_sets(const IndexSetFamily& f) {
    std::vector<std::vector<int>> out;
    for (std::size_t j = 0; j < f.size(); ++j) out.emplace_back(f.set(j).begin(), f.set(j).end());
    return out;
}

}  // namespace

TEST(IndexSets, ThreeChooseTwoIsLexicographic) {
    const auto f = enumerate_index_sets(3, 2);
    EXPECT_EQ(f.size(), 3u);
    EXPECT_EQ(family_sets(f), (std::vector<std::vector<int>>{{0, 1}, {0, 2}, {1, 2}}));
}

TEST(IndexSets, FullSetIsSingleton) {
    const auto f = enumerate_index_sets(3, 3);
    EXPECT_EQ(family_sets(f), (std::vector<std::vector<int>>{{0, 1, 2}}));
}

TEST(IndexSets, MatchesBitmaskEnumerationAndMultiplicity) {
    for (int n = 1; n <= 9; ++n) {
        for (int K = 1; K <= n; ++K) {
            const auto f = enumerate_index_sets(n, K);
            EXPECT_EQ(family_sets(f), oracle::subsets(n, K)) << n << "," << K;
            EXPECT_DOUBLE_EQ(static_cast<double>(f.size()), binomial(n, K));
            for (int i = 0; i < n; ++i) EXPECT_EQ(f.sets_containing(i).size(), f.multiplicity());
        }
    }
    EXPECT_EQ(enumerate_index_sets(5, 2).multiplicity(), 4u);
}

TEST(IndexSets, RejectsOutOfRangeDimensions) {
    EXPECT_THROW(enumerate_index_sets(0, 1), DomainError);
    EXPECT_THROW(enumerate_index_sets(3, 4), DomainError);
    EXPECT_THROW(enumerate_index_sets(17, 1), DomainError);
}

TEST(LambdaMap, ExamplesAndComplement) {
    const auto f = enumerate_index_sets(3, 2);
    const std::vector<double> l{1, 2, 3};
    EXPECT_EQ(lambda_map(l, f), (std::vector<double>{3, 4, 5}));
    EXPECT_EQ(lambda_prime(l, f), (std::vector<double>{3, 2, 1}));
    EXPECT_EQ(lambda_prime(std::vector<double>{1, 1, 1}, f), (std::vector<double>{1, 1, 1}));
    EXPECT_EQ(lambda_map(std::vector<double>{0, 0, 0}, f), (std::vector<double>{0, 0, 0}));
    const auto L = lambda_map(l, f);
    const auto Lp = lambda_prime(l, f);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(L[j] + Lp[j], 6.0);
    EXPECT_THROW(lambda_map(std::vector<double>{1, 2}, f), DomainError);
}

TEST(LambdaMap, MatchesEnumerationOnRandomPoints) {
    std::mt19937_64 rng(11);
    for (int n = 1; n <= 8; ++n) {
        for (int K = 1; K <= n; ++K) {
            const auto f = enumerate_index_sets(n, K);
            for (int s = 0; s < 20; ++s) {
                const auto l = oracle::random_vector(static_cast<std::size_t>(n), rng, -3, 3);
                const auto L = lambda_map(l, f);
                const auto ref = oracle::partial_sums(l, K);
                const auto Lp = lambda_prime(l, f);
                const auto refp = oracle::complement_sums(l, K);
                for (std::size_t j = 0; j < L.size(); ++j) {
                    EXPECT_NEAR(L[j], ref[j], 1e-13);
                    EXPECT_NEAR(Lp[j], refp[j], 1e-13);
                }
            }
        }
    }
}

TEST(LambdaMap, PermutationPermutesPartialSums) {
    std::mt19937_64 rng(5);
    const auto f = enumerate_index_sets(5, 3);
    auto l = oracle::random_vector(5, rng, -1, 1);
    auto L = lambda_map(l, f);
    std::shuffle(l.begin(), l.end(), rng);
    auto L2 = lambda_map(l, f);
    std::sort(L.begin(), L.end());
    std::sort(L2.begin(), L2.end());
    for (std::size_t j = 0; j < L.size(); ++j) EXPECT_NEAR(L[j], L2[j], 1e-14);
}

TEST(SigmaK, Examples) {
    EXPECT_EQ(sigma_k(2, std::vector<double>{1, 2, 3}), 11.0);
    EXPECT_EQ(sigma_k(3, std::vector<double>{1, 1, 1}), 1.0);
    EXPECT_EQ(sigma_k(1, std::vector<double>{1.5, -2, 4}), 3.5);
    EXPECT_THROW(sigma_k(0, std::vector<double>{1, 2}), DomainError);
    EXPECT_THROW(sigma_k(3, std::vector<double>{1, 2}), DomainError);
}

TEST(SigmaK, MatchesSubsetProductsUpToDimensionTwelve) {
    std::mt19937_64 rng(3);
    for (int m = 1; m <= 12; ++m) {
        const auto v = oracle::random_vector(static_cast<std::size_t>(m), rng, -2, 2);
        for (int k = 1; k <= m; ++k) {
            const double ref = oracle::sigma_k(k, v);
            EXPECT_NEAR(sigma_k(k, v), ref, 1e-12 * (1 + std::abs(ref))) << m << "," << k;
        }
    }
}

TEST(SigmaK, PartialsMatchFiniteDifferences) {
    std::mt19937_64 rng(4);
    for (int m = 2; m <= 7; ++m) {
        const auto v = oracle::random_vector(static_cast<std::size_t>(m), rng, -1, 2);
        for (int k = 1; k <= m; ++k) {
            const auto p = sigma_k_partials(k, v);
            const auto g = oracle::gradient([k](const std::vector<double>& x) { return oracle::sigma_k(k, x); }, v);
            for (int i = 0; i < m; ++i) EXPECT_NEAR(p[static_cast<std::size_t>(i)], g[static_cast<std::size_t>(i)], 1e-6);
        }
    }
}

TEST(RhoK, ExamplesAndExtremes) {
    const std::vector<double> l{1, 2, 3};
    EXPECT_NEAR(rho_k(2, l).value, 60.0, 1e-12);
    EXPECT_TRUE(rho_k(2, l).in_domain);
    EXPECT_NEAR(rho_k(3, l).value, 6.0, 1e-12);  // ρ_n = σ_1
    EXPECT_NEAR(rho_k(1, l).value, 6.0, 1e-12);  // ρ_1 = σ_n
    EXPECT_FALSE(rho_k(2, std::vector<double>{-3, 1, 1}).in_domain);
    std::mt19937_64 rng(9);
    const auto v = oracle::random_vector(5, rng, 0.1, 2);
    const auto L = oracle::partial_sums(v, 3);
    EXPECT_NEAR(rho_k(3, v).value, oracle::sigma_k(static_cast<int>(L.size()), L), 1e-9 * rho_k(3, v).value);
}

TEST(Identities, PartitionAndColumnSumOnTenThousandPoints) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dim(1, 8);
    for (int s = 0; s < 10000; ++s) {
        const int n = dim(rng);
        const int K = std::uniform_int_distribution<int>(1, n)(rng);
        const auto f = enumerate_index_sets(n, K);
        const auto l = oracle::random_vector(static_cast<std::size_t>(n), rng, -5, 5);
        const double s1 = std::accumulate(l.begin(), l.end(), 0.0);
        const auto L = lambda_map(l, f);
        const auto Lp = lambda_prime(l, f);
        double col = 0.0;
        for (std::size_t j = 0; j < L.size(); ++j) {
            EXPECT_NEAR(L[j] + Lp[j], s1, 1e-12 * (1 + std::abs(s1)));
            col += L[j];
        }
        const double expected = static_cast<double>(f.size() * static_cast<std::size_t>(K)) / n * s1;
        EXPECT_NEAR(col, expected, 1e-12 * (1 + std::abs(expected)) * static_cast<double>(f.size()));
    }
}

TEST(Identities, CoDimensionOnePartialSumsAreEigenvaluesOfTraceMinusForm) {
    // For K = n − 1, Λ(λ(𝔤)) is the spectrum of (tr 𝔤) I − 𝔤.
    std::mt19937_64 rng(77);
    for (int n = 2; n <= 8; ++n) {
        const auto f = enumerate_index_sets(n, n - 1);
        for (int s = 0; s < 50; ++s) {
            const auto g = oracle::random_hermitian(n, rng);
            const auto lam = oracle::eigenvalues(g);
            auto L = lambda_map(lam, f);
            std::sort(L.begin(), L.end());
            const oracle::Matrix t = g.trace().real() * oracle::Matrix::Identity(n, n) - g;
            const auto ref = oracle::eigenvalues(t);
            for (int j = 0; j < n; ++j) EXPECT_NEAR(L[static_cast<std::size_t>(j)], ref[static_cast<std::size_t>(j)], 1e-12);
        }
    }
}

TEST(Families, ValueAndGradientExamples) {
    const SymmetricFunction lin(Family::linear, 1);
    std::vector<double> g(3);
    EXPECT_DOUBLE_EQ(lin.value_and_gradient(std::vector<double>{1, 2, 3}, g), 6.0);
    EXPECT_EQ(g, (std::vector<double>{1, 1, 1}));

    const SymmetricFunction s2(Family::sigma_root, 2);
    const std::vector<double> ones{1, 1, 1};
    EXPECT_NEAR(s2.value_and_gradient(ones, g), std::sqrt(3.0), 1e-15);
    const auto fd = oracle::gradient([&](const std::vector<double>& x) { return std::sqrt(oracle::sigma_k(2, x)); }, ones);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(g[static_cast<std::size_t>(i)], 1.0 / std::sqrt(3.0), 1e-12);
        EXPECT_NEAR(g[static_cast<std::size_t>(i)], fd[static_cast<std::size_t>(i)], 1e-8);
    }

    const SymmetricFunction lr(Family::log_rho, 0);
    EXPECT_NEAR(lr.value(std::vector<double>{1, 2, 3}), std::log(6.0), 1e-15);
}

TEST(Families, HessianActionExamples) {
    const SymmetricFunction lin(Family::linear, 1);
    EXPECT_EQ(lin.hessian_action(std::vector<double>{1, 2, 3}, std::vector<double>{1, -1, 4}), 0.0);
    const SymmetricFunction s2(Family::sigma_root, 2);
    const std::vector<double> ones{1, 1, 1}, d{1, -1, 0};
    const double h = s2.hessian_action(ones, d);
    const double fd = oracle::second_directional([](const std::vector<double>& x) { return std::sqrt(oracle::sigma_k(2, x)); }, ones, d);
    EXPECT_LT(h, 0.0);
    EXPECT_NEAR(h, fd, 1e-6);
    EXPECT_EQ(s2.hessian_action(ones, std::vector<double>{0, 0, 0}), 0.0);
}

TEST(Families, OutsideConeRaisesAdmissibilityError) {
    const SymmetricFunction s2(Family::sigma_root, 2);
    try {
        s2.value(std::vector<double>{-5, 1, 1});
        FAIL() << "expected AdmissibilityError";
    } catch (const AdmissibilityError& e) {
        EXPECT_FALSE(e.constraint().empty());
    }
    const SymmetricFunction lr(Family::log_rho, 0);
    EXPECT_THROW(lr.value(std::vector<double>{1, -1, 2}), AdmissibilityError);
}

TEST(Families, MarginEqualsTOnTheDiagonal) {
    for (auto [fam, k] : {std::pair{Family::sigma_root, 1}, std::pair{Family::sigma_root, 2}, std::pair{Family::sigma_root, 3},
                          std::pair{Family::log_rho, 0}, std::pair{Family::linear, 1}}) {
        const SymmetricFunction f(fam, k);
        EXPECT_NEAR(f.margin(std::vector<double>{0.7, 0.7, 0.7}), 0.7, 1e-12);
        EXPECT_LT(f.margin(std::vector<double>{-0.7, -0.7, -0.7}), 0.0);
    }
}

namespace {

struct FamilyCase {
    Family family;
    int k;
    std::size_t m;
};

class FamilyProperties : public ::testing::TestWithParam<FamilyCase> {};

std::vector<double> admissible_point(const SymmetricFunction& f, std::size_t m, std::mt19937_64& rng) {
    for (;;) {
        auto x = oracle::random_vector(m, rng, -1.0, 3.0);
        if (f.margin(x) > 1e-3) return x;
    }
}

}  // namespace

TEST_P(FamilyProperties, MonotoneConcaveAndGradientConsistentOnTenThousandSamples) {
    const auto c = GetParam();
    const SymmetricFunction f(c.family, c.k);
    std::mt19937_64 rng(1000 + static_cast<unsigned>(c.k) + 10 * static_cast<unsigned>(c.m));
    std::vector<double> g(c.m);
    int fd_checks = 0;
    for (int s = 0; s < 10000; ++s) {
        const auto a = admissible_point(f, c.m, rng);
        const auto b = admissible_point(f, c.m, rng);
        std::vector<double> mid(c.m);
        for (std::size_t i = 0; i < c.m; ++i) mid[i] = 0.5 * (a[i] + b[i]);
        const double fa = f.value_and_gradient(a, g);
        for (double gi : g) ASSERT_GE(gi, -1e-12);
        ASSERT_GE(f.value(mid), 0.5 * (fa + f.value(b)) - 1e-10);
        // homogeneous families: Σ f_i λ_i ≥ 0
        if (c.family == Family::sigma_root) {
            double dot = 0.0;
            for (std::size_t i = 0; i < c.m; ++i) dot += g[i] * a[i];
            ASSERT_GE(dot, -1e-10 * (1 + std::abs(fa)));
        }
        const auto d = oracle::random_vector(c.m, rng, -1, 1);
        ASSERT_LE(f.hessian_action(a, d), 1e-10);
        if (s % 100 == 0) {
            ++fd_checks;
            const auto fd = oracle::gradient([&](const std::vector<double>& x) { return f.value(x); }, a, 1e-7);
            for (std::size_t i = 0; i < c.m; ++i) EXPECT_NEAR(g[i], fd[i], 1e-6 * (1 + std::abs(g[i])));
        }
    }
    EXPECT_EQ(fd_checks, 100);
}

INSTANTIATE_TEST_SUITE_P(Catalogue, FamilyProperties,
                         ::testing::Values(FamilyCase{Family::sigma_root, 1, 4}, FamilyCase{Family::sigma_root, 2, 3},
                                           FamilyCase{Family::sigma_root, 2, 5}, FamilyCase{Family::sigma_root, 3, 4},
                                           FamilyCase{Family::sigma_root, 4, 4}, FamilyCase{Family::log_rho, 0, 3},
                                           FamilyCase{Family::linear, 1, 3}));

TEST(Operator, DeformationUsesPartitionIdentity) {
    OperatorSpec spec;
    spec.family = Family::sigma_root;
    spec.k = 2;
    spec.n = 3;
    spec.K = 2;
    spec.beta = 0.3;
    const Operator op(spec);
    const std::vector<double> lam{0.5, 1.0, 2.0};
    const auto L = lambda_map(lam, op.index_sets());
    const auto Lp = lambda_prime(lam, op.index_sets());
    std::vector<double> D(L.size()), ref(L.size());
    op.deform(L, D);
    for (std::size_t j = 0; j < L.size(); ++j) {
        ref[j] = L[j] - spec.beta * Lp[j];
        EXPECT_NEAR(D[j], ref[j], 1e-14);
    }
    EXPECT_NEAR(op.composite_value(lam), std::sqrt(oracle::sigma_k(2, ref)), 1e-13);
}

TEST(Operator, CompositeGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(8);
    for (auto [K, beta] : {std::pair{1, 0.0}, std::pair{2, 0.0}, std::pair{2, 0.4}, std::pair{3, 0.2}}) {
        OperatorSpec spec;
        spec.family = Family::sigma_root;
        spec.k = 2;
        spec.n = 4;
        spec.K = K;
        spec.beta = beta;
        const Operator op(spec);
        const auto lam = oracle::random_vector(4, rng, 0.5, 2.0);
        std::vector<double> g(4);
        std::vector<double> coeff(op.N());
        op.composite_value_and_gradient(lam, g, coeff);
        const auto fd = oracle::gradient([&](const std::vector<double>& x) { return op.composite_value(x); }, lam);
        for (std::size_t a = 0; a < 4; ++a) EXPECT_NEAR(g[a], fd[a], 1e-7);
        if (beta == 0.0) {
            // g_a = Σ_{I ∋ a} f_{Λ_I}
            for (int a = 0; a < 4; ++a) {
                double s = 0.0;
                for (std::size_t j : op.index_sets().sets_containing(a)) s += coeff[j];
                EXPECT_NEAR(g[static_cast<std::size_t>(a)], s, 1e-13);
            }
        }
    }
}
