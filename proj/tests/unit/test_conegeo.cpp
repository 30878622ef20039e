#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "plpde/conegeo.hpp"

using namespace plpde;

namespace {

Operator make_op(Family family, int k, int n, int K, double beta = 0.0) {
    OperatorSpec s;
    s.family = family;
    s.k = k;
    s.n = n;
    s.K = K;
    s.beta = beta;
    return Operator(s);
}

}  // namespace

TEST(ConeMembership, BoundaryOfGardingInteriorOfPartialCone) {
    const std::vector<double> l{-1, 2, 2};
    EXPECT_EQ(cone_membership(GardingCone{2, 3}, l), Membership::boundary);
    EXPECT_EQ(cone_membership(PartialCone{2, 3}, l), Membership::interior);
    EXPECT_EQ(cone_membership(GardingCone{3, 3}, l), Membership::outside);
    EXPECT_EQ(cone_membership(GardingCone{1, 3}, l), Membership::interior);
}

TEST(ConeMembership, MatchesDirectInequalitiesOnRandomPoints) {
    std::mt19937_64 rng(31);
    for (int s = 0; s < 2000; ++s) {
        const auto l = oracle::random_vector(4, rng, -2, 3);
        for (int k = 1; k <= 4; ++k) {
            bool inside = true;
            for (int j = 1; j <= k; ++j) inside = inside && oracle::sigma_k(j, l) > 1e-6;
            bool outside = false;
            for (int j = 1; j <= k; ++j) outside = outside || oracle::sigma_k(j, l) < -1e-6;
            const auto m = cone_membership(GardingCone{k, 4}, l);
            if (inside) EXPECT_EQ(m, Membership::interior);
            if (outside) EXPECT_EQ(m, Membership::outside);
        }
        for (int K = 1; K <= 4; ++K) {
            const auto L = oracle::partial_sums(l, K);
            const double lo = *std::min_element(L.begin(), L.end());
            const auto m = cone_membership(PartialCone{K, 4}, l);
            if (lo > 1e-6) EXPECT_EQ(m, Membership::interior);
            if (lo < -1e-6) EXPECT_EQ(m, Membership::outside);
        }
    }
}

TEST(ConeMembership, GardingConesAreNested) {
    std::mt19937_64 rng(32);
    for (int s = 0; s < 2000; ++s) {
        const auto l = oracle::random_vector(5, rng, -1, 3);
        for (int k = 2; k <= 5; ++k) {
            if (cone_membership(GardingCone{k, 5}, l) == Membership::interior) {
                EXPECT_EQ(cone_membership(GardingCone{k - 1, 5}, l), Membership::interior);
            }
        }
    }
}

TEST(ConeMembership, RejectsBadDimensions) {
    EXPECT_THROW(cone_membership(GardingCone{4, 3}, std::vector<double>{1, 1, 1}), DomainError);
    EXPECT_THROW(cone_membership(PartialCone{2, 4}, std::vector<double>{1, 1, 1}), DomainError);
    EXPECT_THROW(cone_membership(GardingCone{1, 1}, std::vector<double>{}), DomainError);
}

TEST(LevelSet, ProjectionLandsOnLevelWithUnitNormal) {
    const auto op = make_op(Family::sigma_root, 2, 3, 1);
    const LevelTarget target(op, ProbeSpace::lambda_space);
    std::mt19937_64 rng(5);
    for (int s = 0; s < 50; ++s) {
        const auto base = oracle::random_vector(3, rng, -2, 2);
        const auto p = project_to_level(target, 1.5, base);
        ASSERT_TRUE(p.has_value());
        EXPECT_NEAR(std::sqrt(oracle::sigma_k(2, p->point)), 1.5, 1e-10);
        double norm = 0.0;
        for (double v : p->normal) norm += v * v;
        EXPECT_NEAR(norm, 1.0, 1e-12);
        // the point differs from the base along the diagonal only
        const double tau = p->point[0] - base[0];
        for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p->point[i] - base[i], tau, 1e-10);
    }
}

TEST(LevelSet, SamplesAlongDirection) {
    const auto op = make_op(Family::sigma_root, 2, 3, 1);
    const std::vector<double> d{1, -1, 0};
    const auto samples = level_set_sample(op, 1.0, d, 4);
    ASSERT_EQ(samples.size(), 4u);
    for (const auto& s : samples) {
        ASSERT_TRUE(s.has_value());
        EXPECT_NEAR(op.function().value(s->point), 1.0, 1e-10);
    }
}

TEST(LevelSet, LevelOutsideRangeIsDomainError) {
    const auto op = make_op(Family::sigma_root, 2, 3, 1);
    const LevelTarget target(op, ProbeSpace::lambda_space);
    EXPECT_THROW(check_level(target, 0.0), DomainError);
    EXPECT_THROW(check_level(target, -1.0), DomainError);
    EXPECT_NO_THROW(check_level(target, 1.0));
}

TEST(RankProbe, SigmaKInDimensionsThreeToFive) {
    for (int m = 3; m <= 5; ++m) {
        for (int k = 1; k <= m; ++k) {
            const auto op = make_op(Family::sigma_root, k, m, 1);
            ProbeOptions o;
            o.space = ProbeSpace::eigenvalue_space;
            const auto cert = rank_probe(op, op.diagonal_value(1.0), o);
            EXPECT_TRUE(cert.conclusive);
            EXPECT_EQ(cert.estimated_rank, m - k + 1) << "m=" << m << " k=" << k;
        }
    }
}

TEST(RankProbe, LogRhoWithPairSums) {
    const auto op = make_op(Family::log_rho, 0, 3, 2);
    ProbeOptions o;
    o.space = ProbeSpace::eigenvalue_space;
    const auto cert = rank_probe(op, op.diagonal_value(1.0), o);
    EXPECT_EQ(cert.estimated_rank, 2);
}

TEST(RankProbe, TooSmallBudgetIsInconclusive) {
    const auto op = make_op(Family::sigma_root, 2, 4, 1);
    ProbeOptions o;
    o.ray_budget = 1;
    try {
        rank_probe(op, op.diagonal_value(1.0), o);
        FAIL() << "expected ProbeInconclusive";
    } catch (const ProbeInconclusive& e) {
        EXPECT_FALSE(e.certificate().conclusive);
        EXPECT_FALSE(e.certificate().inconclusive_reason.empty());
    }
}

TEST(RankProbe, CertificateIsDeterministic) {
    const auto op = make_op(Family::sigma_root, 2, 3, 2);
    const auto a = to_json(rank_probe(op, op.diagonal_value(1.0))).dump();
    const auto b = to_json(rank_probe(op, op.diagonal_value(1.0))).dump();
    EXPECT_EQ(a, b);
}

TEST(RankCondition, PartialSumsOfPairsInDimensionThree) {
    EXPECT_DOUBLE_EQ(rank_threshold(make_op(Family::sigma_root, 2, 3, 2).spec()), 2.0);
    EXPECT_TRUE(rank_condition_check(make_op(Family::sigma_root, 2, 3, 2)).passes);
    EXPECT_TRUE(rank_condition_check(make_op(Family::sigma_root, 1, 3, 2)).passes);
    EXPECT_FALSE(rank_condition_check(make_op(Family::sigma_root, 3, 3, 2)).passes);
    EXPECT_FALSE(rank_condition_check(make_op(Family::log_rho, 0, 3, 2)).passes);
}

TEST(RankCondition, FullPartialSumAlwaysPasses) {
    for (int n = 2; n <= 4; ++n) {
        const auto r = rank_condition_check(make_op(Family::linear, 1, n, n));
        EXPECT_TRUE(r.passes) << n;
        EXPECT_DOUBLE_EQ(r.threshold, 1.0);
    }
}

TEST(C1, TraceHasOneOverM) {
    for (int m = 2; m <= 6; ++m) {
        const auto op = make_op(Family::sigma_root, 1, m, 1);
        const auto samples = c1_samples(op, op.diagonal_value(1.0));
        const auto c = c1_estimate(m, samples);
        EXPECT_NEAR(c.value, 1.0 / m, 1e-12);
        EXPECT_FALSE(c.flagged);
    }
}

TEST(C1, MatchesSortedGradientRatioOracle) {
    const auto op = make_op(Family::sigma_root, 2, 4, 1);
    const auto samples = c1_samples(op, 1.0);
    ASSERT_FALSE(samples.empty());
    double ref = 1e300;
    for (const auto& s : samples) {
        auto g = s.gradient;
        std::sort(g.begin(), g.end());
        double total = 0.0, low = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            total += g[i];
            if (i < 2) low += g[i];  // m − r + 1 with r = 3
        }
        ref = std::min(ref, low / total);
    }
    const auto c = c1_estimate(3, samples);
    EXPECT_NEAR(c.raw_minimum, ref, 1e-14);
    EXPECT_GT(c.value, 0.0);
    EXPECT_THROW(c1_estimate(0, samples), DomainError);
}

TEST(C1, FlaggedWhenRankTooHigh) {
    // σ₂ in ℝ³ has rank 2: asking for rank 3 drives the bound to zero.
    const auto op = make_op(Family::sigma_root, 2, 3, 1);
    const auto c = c1_estimate(3, c1_samples(op, op.diagonal_value(1.0)));
    EXPECT_TRUE(c.flagged);
    EXPECT_EQ(c.value, 0.0);
}
