#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "plpde/barrier.hpp"
#include "plpde/errors.hpp"

using namespace plpde;
using std::numbers::pi;

TEST(Barrier, ExistsBelowFirstEigenvalueAndMatchesClosedForm) {
    const auto g = ModelGeometry::interval(-pi / 2, pi / 2, 2049);
    const auto r = barrier_solve(g, {1.0, 0.5});
    ASSERT_TRUE(r.exists);
    ASSERT_TRUE(r.h.has_value());
    EXPECT_GT(r.min_w, 0.0);
    for (std::size_t p = 0; p < g.point_count(); ++p) {
        EXPECT_NEAR(r.h->values[p], oracle::barrier_exact(g.coordinates(p)[0], pi / 2, 0.5), 1e-5);
    }
    EXPECT_EQ(r.h->values.front(), 0.0);
    EXPECT_EQ(r.h->values.back(), 0.0);
}

TEST(Barrier, AgreesWithDirectNewtonOnTheNonlinearEquation) {
    const int points = 16385;
    const auto g = ModelGeometry::interval(-pi / 2, pi / 2, points);
    const auto r = barrier_solve(g, {1.0, 0.5});
    ASSERT_TRUE(r.exists);
    const auto ref = oracle::barrier_newton(-pi / 2, pi / 2, points, 1.0, 0.5);
    double diff = 0.0;
    for (std::size_t p = 0; p < ref.size(); ++p) diff = std::max(diff, std::abs(r.h->values[p] - ref[p]));
    EXPECT_LE(diff, 1e-8);
}

TEST(Barrier, NonexistenceAtAndAboveFirstEigenvalue) {
    const auto g = ModelGeometry::interval(-pi / 2, pi / 2, 4097);
    for (double b : {1.0, 1.5, 4.0}) {
        const auto r = barrier_solve(g, {1.0, b});
        EXPECT_FALSE(r.exists) << b;
        EXPECT_FALSE(r.h.has_value());
        EXPECT_FALSE(r.reason.empty());
        EXPECT_FALSE(to_json(r).at("nonexistence").is_null());
    }
}

TEST(Barrier, RejectsBadInput) {
    EXPECT_THROW(barrier_solve(ModelGeometry::flat_torus(1, 8), {1.0, 0.5}), ConfigurationError);
    EXPECT_THROW(barrier_solve(ModelGeometry::interval(-1, 1, 65), {0.0, 0.5}), ConfigurationError);
}

TEST(Riccati, LogCosineResidualIsSecondOrder) {
    std::vector<double> res;
    for (int points : {1601, 3201, 6401}) {
        const auto g = ModelGeometry::interval(-pi / 2 + 0.05, pi / 2 - 0.05, points);
        const auto h = riccati_oracle(g);
        res.push_back(barrier_residual(h, {1.0, 1.0}));
    }
    EXPECT_NEAR(res[0] / res[1], 4.0, 0.8);
    EXPECT_NEAR(res[1] / res[2], 4.0, 0.8);
}

TEST(Riccati, TooCloseToPoleIsDomainError) {
    EXPECT_THROW(riccati_oracle(ModelGeometry::interval(-pi / 2 + 0.01, pi / 2 - 0.01, 101)), DomainError);
}
