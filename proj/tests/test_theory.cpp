#include "hdqc/theory.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace hdqc;
using hdqc::testing::random_spd;
using hdqc::testing::random_vector;

namespace {

PopulationModel scalar_pop(double mu_diff, double s1, double s2) {
    MatrixXd m1(1, 1), m2(1, 1);
    m1 << s1;
    m2 << s2;
    VectorXd mu2(1);
    mu2 << -mu_diff;  // mu12 = mu1 - mu2 = mu_diff
    return PopulationModel({VectorXd::Zero(1), mu2}, {m1, m2});
}

PopulationModel random_pop(Index p, Rng& rng, double mean_scale = 1.0) {
    return PopulationModel({random_vector(p, rng, mean_scale), random_vector(p, rng, mean_scale)},
                           {random_spd(p, rng), random_spd(p, rng)});
}

}  // namespace

TEST_CASE("population model validation") {
    SUBCASE("non-PD covariance is rejected") {
        MatrixXd bad(2, 2);
        bad << 1, 2, 2, 1;  // eigenvalues 3 and -1
        CHECK_THROWS_AS(PopulationModel({VectorXd::Zero(2), VectorXd::Zero(2)},
                                        {bad, MatrixXd::Identity(2, 2)}),
                        SingularPrecisionError);
    }
    SUBCASE("spectrum is descending and consistent with the trace") {
        Rng rng(501, 0);
        PopulationModel pop({random_vector(3, rng), random_vector(3, rng)},
                            {random_spd(3, rng), random_spd(3, rng)}, true);
        for (std::size_t i = 0; i < 2; ++i) {
            const auto& ev = pop.eigenvalues(i);
            for (Index j = 0; j + 1 < ev.size(); ++j) CHECK(ev[j] >= ev[j + 1]);
            CHECK(ev.sum() == doctest::Approx(pop.trace(i)).epsilon(1e-10));
            CHECK(ev.minCoeff() > 0);
        }
    }
}

TEST_CASE("delta for the canonical choices") {
    SUBCASE("choice I is the squared mean separation") {
        Rng rng(502, 0);
        const auto pop = random_pop(4, rng);
        CHECK(delta_choice(pop, Choice::I, 0) ==
              doctest::Approx(pop.mu12().squaredNorm()).epsilon(1e-13));
        CHECK(delta_choice(pop, Choice::I, 1) == delta_choice(pop, Choice::I, 0));
    }
    SUBCASE("equal means and equal specs vanish") {
        MatrixXd sigma(2, 2);
        sigma << 2, 0.5, 0.5, 1;
        PopulationModel pop({VectorXd::Ones(2), VectorXd::Ones(2)}, {sigma, sigma});
        for (const Choice c : {Choice::I, Choice::II, Choice::III, Choice::IV})
            CHECK(delta_choice(pop, c, 0) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("scalar choice IV case") {
        const auto pop = scalar_pop(0.0, 1.0, 2.0);
        CHECK(delta_choice(pop, Choice::IV, 0) ==
              doctest::Approx(0.5 - 1.0 + std::log(2.0)).epsilon(1e-12));
    }
}

TEST_CASE("generic delta agrees with the named forms") {
    Rng rng(503, 0);
    for (int rep = 0; rep < 20; ++rep) {
        const Index p = 2 + static_cast<Index>(rng.uniform() * 5);
        const auto pop = random_pop(p, rng);
        for (const Choice c : {Choice::I, Choice::II, Choice::III, Choice::IV}) {
            const auto s1 = oracle_spec(pop, c, 0);
            const auto s2 = oracle_spec(pop, c, 1);
            for (std::size_t i = 0; i < 2; ++i) {
                const double generic = delta_i(pop, s1, s2, i);
                const double named = delta_choice(pop, c, i);
                CHECK(generic == doctest::Approx(named).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("delta_iA") {
    SUBCASE("equal means vanish") {
        MatrixXd sigma(2, 2);
        sigma << 1, 0.2, 0.2, 1;
        PopulationModel pop({VectorXd::Ones(2), VectorXd::Ones(2)},
                            {sigma, MatrixXd::Identity(2, 2)});
        CHECK(delta_iA_choice(pop, Choice::IV, 0) == doctest::Approx(0.0));
    }
    SUBCASE("identity spec gives mu' Sigma mu") {
        VectorXd mu2(2);
        mu2 << -1, -1;  // mu12 = (1,1)
        MatrixXd sigma = VectorXd::LinSpaced(2, 1.0, 2.0).asDiagonal();
        PopulationModel pop({VectorXd::Zero(2), mu2},
                            {sigma, MatrixXd::Identity(2, 2)});
        CHECK(delta_iA_choice(pop, Choice::I, 0) == doctest::Approx(3.0));
    }
    SUBCASE("choice IV with equal covariances equals the Mahalanobis distance") {
        Rng rng(504, 0);
        const MatrixXd sigma = random_spd(3, rng);
        const VectorXd mu2 = random_vector(3, rng);
        PopulationModel pop({VectorXd::Zero(3), mu2}, {sigma, sigma});
        const VectorXd m12 = pop.mu12();
        const double md = m12.dot(pop.llt(0).solve(m12));
        CHECK(delta_iA_choice(pop, Choice::IV, 0) == doctest::Approx(md).epsilon(1e-10));
        CHECK(delta_choice(pop, Choice::IV, 0) == doctest::Approx(md).epsilon(1e-10));
    }
}

TEST_CASE("delta_small") {
    SUBCASE("isotropic hand case") {
        const Index p = 4;
        PopulationModel pop({VectorXd::Zero(p), VectorXd::Zero(p)},
                            {MatrixXd::Identity(p, p), MatrixXd::Identity(p, p)});
        // 2 sqrt(4/2 + 4/2 + 0) = 4
        CHECK(delta_small_choice(pop, Choice::I, 2, 2, 0) == doctest::Approx(4.0));
    }
    SUBCASE("monotone decreasing in the sample sizes") {
        Rng rng(505, 0);
        const auto pop = random_pop(3, rng, 0.0);
        double last = delta_small_choice(pop, Choice::I, 2, 2, 0);
        for (const Index n : {4, 8, 16, 64}) {
            const double now = delta_small_choice(pop, Choice::I, n, n, 0);
            CHECK(now < last);
            last = now;
        }
    }
    SUBCASE("named forms agree with the generic formula") {
        Rng rng(506, 0);
        for (int rep = 0; rep < 20; ++rep) {
            const auto pop = random_pop(3, rng);
            const Index n1 = 3 + static_cast<Index>(rng.uniform() * 6);
            const Index n2 = 3 + static_cast<Index>(rng.uniform() * 6);
            for (const Choice c : {Choice::I, Choice::II, Choice::III, Choice::IV}) {
                const auto s1 = oracle_spec(pop, c, 0);
                const auto s2 = oracle_spec(pop, c, 1);
                for (std::size_t i = 0; i < 2; ++i) {
                    const double generic = delta_small(pop, s1, s2, n1, n2, i);
                    const double named = delta_small_choice(pop, c, n1, n2, i);
                    CHECK(generic == doctest::Approx(named).epsilon(1e-10));
                }
            }
        }
    }
}

TEST_CASE("choice IV log term: factor route equals the eigenvalue route") {
    Rng rng(507, 0);
    const auto pop = [&] {
        auto p = random_pop(4, rng);
        p.ensure_spectrum();
        return p;
    }();
    const double factor_route = pop.log_det(1) - pop.log_det(0);
    const double eigen_route = (pop.eigenvalues(1).array().log() -
                                pop.eigenvalues(0).array().log()).sum();
    CHECK(factor_route == doctest::Approx(eigen_route).epsilon(1e-10));
}

TEST_CASE("asymptotic error") {
    CHECK(asymptotic_error(0.0, 1.0) == doctest::Approx(0.5));
    CHECK(asymptotic_error(1.6448536269514722, 1.0) == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(asymptotic_error(3.0, 1.0) == doctest::Approx(0.0013498980316301).epsilon(1e-9));
    CHECK_THROWS_AS(asymptotic_error(1.0, 0.0), ConfigError);
}

TEST_CASE("normal cdf reference points") {
    CHECK(norm_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(norm_cdf(-1.0) == doctest::Approx(0.15865525393145705).epsilon(1e-13));
    CHECK(norm_cdf(-2.0) == doctest::Approx(0.022750131948179195).epsilon(1e-13));
    CHECK(norm_cdf(1.0) + norm_cdf(-1.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("bayes error with a shared covariance") {
    SUBCASE("coincident means give one half") {
        PopulationModel pop({VectorXd::Ones(2), VectorXd::Ones(2)},
                            {MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)});
        CHECK(bayes_error_equal_cov(pop) == doctest::Approx(0.5));
    }
    SUBCASE("scalar separation two gives Phi(-1)") {
        const auto pop = scalar_pop(2.0, 1.0, 1.0);
        CHECK(bayes_error_equal_cov(pop) == doctest::Approx(norm_cdf(-1.0)).epsilon(1e-13));
    }
    SUBCASE("invariant under joint invertible linear maps") {
        Rng rng(508, 0);
        const Index p = 3;
        const MatrixXd sigma = random_spd(p, rng);
        const VectorXd mu2 = random_vector(p, rng);
        PopulationModel pop({VectorXd::Zero(p), mu2}, {sigma, sigma});
        const double base = bayes_error_equal_cov(pop);
        MatrixXd t(p, p);
        for (Index r = 0; r < p; ++r)
            for (Index c = 0; c < p; ++c) t(r, c) = rng.normal();
        t += 3.0 * MatrixXd::Identity(p, p);
        PopulationModel mapped({t * VectorXd::Zero(p), t * mu2},
                               {t * sigma * t.transpose(), t * sigma * t.transpose()});
        CHECK(bayes_error_equal_cov(mapped) == doctest::Approx(base).epsilon(1e-9));
    }
    SUBCASE("different covariances violate the precondition") {
        const auto pop = scalar_pop(1.0, 1.0, 2.0);
        CHECK_THROWS_AS(bayes_error_equal_cov(pop), ConfigError);
    }
}

TEST_CASE("bayes error with distinct Gaussian covariances") {
    SUBCASE("reduces to the shared-covariance value when they agree") {
        Rng rng(509, 0);
        const MatrixXd sigma = random_spd(3, rng);
        const VectorXd mu2 = random_vector(3, rng);
        PopulationModel pop({VectorXd::Zero(3), mu2}, {sigma, sigma});
        CHECK(bayes_error_unequal_cov_gaussian(pop, 0) ==
              doctest::Approx(bayes_error_equal_cov(pop)).epsilon(1e-10));
    }
    SUBCASE("scalar case lands on Phi(-log 2)") {
        const auto pop = scalar_pop(1.0, 1.0, 2.0);
        CHECK(bayes_error_unequal_cov_gaussian(pop, 0) ==
              doctest::Approx(norm_cdf(-std::log(2.0))).epsilon(1e-12));
        CHECK(bayes_error_unequal_cov_gaussian(pop, 0) == doctest::Approx(0.2441086).epsilon(1e-5));
    }
    SUBCASE("equal means leave the ratio undefined") {
        const auto pop = scalar_pop(0.0, 1.0, 2.0);
        CHECK_THROWS_AS(bayes_error_unequal_cov_gaussian(pop, 0), DegenerateDataError);
    }
}

TEST_CASE("sphericity") {
    CHECK(sphericity(MatrixXd(MatrixXd::Identity(4, 4))) == doctest::Approx(0.25));
    VectorXd spike(3);
    spike << 100.0, 1e-6, 1e-6;
    CHECK(sphericity(MatrixXd(spike.asDiagonal())) == doctest::Approx(1.0).epsilon(1e-6));
    VectorXd d(3);
    d << 1, 2, 3;
    CHECK(sphericity(MatrixXd(d.asDiagonal())) == doctest::Approx(14.0 / 36.0).epsilon(1e-13));
}

TEST_CASE("separation is nonnegative, strictly positive off the diagonal case") {
    Rng rng(510, 0);
    for (int rep = 0; rep < 100; ++rep) {
        const Index p = 2 + static_cast<Index>(rng.uniform() * 7);
        const auto pop = random_pop(p, rng);
        for (const Choice c : {Choice::I, Choice::II, Choice::III, Choice::IV}) {
            for (std::size_t i = 0; i < 2; ++i) {
                const double d = delta_choice(pop, c, i);
                CHECK(d >= -1e-10);
                if (pop.mu12().norm() > 1e-6) CHECK(d > 0);
            }
        }
    }
}

TEST_CASE("trace-matched populations order the scaled rule above the plain one") {
    Rng rng(511, 0);
    for (int rep = 0; rep < 30; ++rep) {
        const Index p = 3 + static_cast<Index>(rng.uniform() * 4);
        MatrixXd s1 = random_spd(p, rng);
        MatrixXd s2 = random_spd(p, rng);
        s2 *= s1.trace() / s2.trace();  // tr(S1) = tr(S2)
        PopulationModel pop({random_vector(p, rng), random_vector(p, rng)}, {s1, s2});
        const Index n1 = 4, n2 = 7;
        for (std::size_t i = 0; i < 2; ++i) {
            const double plain = delta_choice(pop, Choice::I, i) /
                                 delta_small_choice(pop, Choice::I, n1, n2, i);
            const double scaled = delta_choice(pop, Choice::II, i) /
                                  delta_small_choice(pop, Choice::II, n1, n2, i);
            CHECK(plain <= scaled + 1e-12);
        }
    }
}

TEST_CASE("theory_quantities bundles the per-class values") {
    Rng rng(512, 0);
    const MatrixXd sigma = random_spd(3, rng);
    const VectorXd mu2 = random_vector(3, rng);
    PopulationModel pop({VectorXd::Zero(3), mu2}, {sigma, sigma});
    const auto tq = theory_quantities(pop, Choice::I, 5, 8);
    CHECK(tq.delta.size() == 2);
    CHECK(tq.asymptotic_error[0] ==
          doctest::Approx(asymptotic_error(tq.delta[0], tq.delta_small[0])));
    REQUIRE(tq.mahalanobis.has_value());
    CHECK(*tq.bayes_error == doctest::Approx(norm_cdf(-std::sqrt(*tq.mahalanobis) / 2.0)));
}
