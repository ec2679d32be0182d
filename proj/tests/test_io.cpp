#include "hdqc/io.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

#include <charconv>
#include <sstream>

using namespace hdqc;

TEST_CASE("dataset csv round trip with header and label grouping") {
    const std::string text =
        "label,f1,f2\n"
        "b,1.5,2.5\n"
        "a,0.25,-1\n"
        "b,3,4\n"
        "a,1e-3,2e2\n";
    std::istringstream in(text);
    const Dataset d = io::read_dataset_csv(in);
    REQUIRE(d.labels == std::vector<std::string>{"b", "a"});  // order of first appearance
    REQUIRE(d.classes[0].rows() == 2);
    CHECK(d.classes[0](0, 0) == 1.5);
    CHECK(d.classes[1](1, 1) == 2e2);

    std::ostringstream out;
    io::write_dataset_csv(out, d);
    std::istringstream again(out.str());
    const Dataset d2 = io::read_dataset_csv(again);
    CHECK(d2.labels == d.labels);
    for (std::size_t c = 0; c < d.classes.size(); ++c)
        CHECK((d2.classes[c] - d.classes[c]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dataset csv error paths") {
    SUBCASE("bad number") {
        std::istringstream in("a,1,zap\na,1,2\n");
        CHECK_THROWS_AS(io::read_dataset_csv(in), io::ReadError);
    }
    SUBCASE("ragged row") {
        std::istringstream in("a,1,2\na,1\n");
        CHECK_THROWS_AS(io::read_dataset_csv(in), io::ReadError);
    }
    SUBCASE("class with a single sample") {
        std::istringstream in("a,1,2\na,2,3\nb,1,1\n");
        CHECK_THROWS_AS(io::read_dataset_csv(in), InsufficientSamplesError);
    }
}

TEST_CASE("format_double survives the round trip bit for bit") {
    Rng rng(801, 0);
    for (int rep = 0; rep < 2000; ++rep) {
        const double v = (rng.uniform() - 0.5) * std::pow(10.0, int(rng.uniform() * 40) - 20);
        const std::string s = io::format_double(v);
        double back = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), back);
        REQUIRE(res.ec == std::errc());
        CHECK(back == v);
    }
}

TEST_CASE("model json round trip is bit faithful for every spec form") {
    Rng rng(802, 0);
    const Index p = 4;
    Dataset d;
    d.labels = {"x", "y"};
    // strong diagonals keep the hard-thresholded covariance positive definite
    MatrixXd a(40, p), b(44, p);
    for (Index r = 0; r < 40; ++r)
        for (Index c = 0; c < p; ++c) a(r, c) = (1.0 + 0.5 * double(c)) * rng.normal();
    for (Index r = 0; r < 44; ++r)
        for (Index c = 0; c < p; ++c) b(r, c) = 0.5 + 1.3 * rng.normal();
    d.classes = {a, b};

    for (const Variant v : {Variant::dbda, Variant::gqda, Variant::dlda_bc, Variant::dqda_bc,
                            Variant::fs_dqda, Variant::sample_precision, Variant::thresholded}) {
        FitOptions options;
        options.gamma = 0.2;  // make fs select something on this data
        const auto model = fit(d, v, options);
        const auto j = io::model_to_json(model);
        const auto restored = io::model_from_json(io::json::parse(j.dump()));
        REQUIRE(restored.classes.size() == model.classes.size());
        CHECK(restored.variant == model.variant);
        CHECK(restored.include_log_det == model.include_log_det);
        CHECK(restored.selected == model.selected);
        for (std::size_t i = 0; i < model.classes.size(); ++i) {
            CHECK(restored.classes[i].label == model.classes[i].label);
            CHECK(restored.classes[i].n == model.classes[i].n);
            CHECK((restored.classes[i].mean - model.classes[i].mean).cwiseAbs().maxCoeff() == 0.0);
            CHECK(restored.classes[i].bias == model.classes[i].bias);
            CHECK(restored.classes[i].spec.log_det() == model.classes[i].spec.log_det());
        }
        // identical scores, bit for bit
        for (int rep = 0; rep < 10; ++rep) {
            const VectorXd x0 = hdqc::testing::random_vector(p, rng);
            for (std::size_t i = 0; i < model.classes.size(); ++i)
                CHECK(restored.score(i, x0) == model.score(i, x0));
        }
    }
}

TEST_CASE("scenario json") {
    SUBCASE("named id pulls catalog defaults") {
        const auto c = io::scenario_from_json(io::json::parse(R"({"id":"fig2c"})"));
        CHECK(c.n1 == 5);
        CHECK(c.n2 == 10);
        CHECK(c.cov2.kind == CovBuilder::Kind::scaled_power_decay);
        CHECK(c.cov2.factor == 1.5);
    }
    SUBCASE("fields override the defaults") {
        const auto c = io::scenario_from_json(io::json::parse(R"({
            "id": "sim5c", "grid": [64, 256], "reps": 100, "seed": 9,
            "family": {"kind": "student-t", "nu": 6}
        })"));
        CHECK(c.grid == std::vector<Index>{64, 256});
        CHECK(c.replications == 100);
        CHECK(c.seed == 9);
        CHECK(c.family.kind == DistFamily::Kind::student_t);
        CHECK(c.family.nu == 6.0);
    }
    SUBCASE("custom scenario from scratch") {
        const auto c = io::scenario_from_json(io::json::parse(R"({
            "id": "custom",
            "sample_size": {"rule": "fixed", "n1": 4, "n2": 6},
            "mean_rule": "last-sqrtp",
            "covariance": [{"kind": "power-decay"}, {"kind": "scaled-identity", "factor": 2.0}]
        })"));
        CHECK(c.size_rule == SampleSizeRule::fixed);
        CHECK(c.mean_rule == MeanRule::last_sqrtp_ones);
        CHECK(c.cov2.kind == CovBuilder::Kind::scaled_identity);
    }
    SUBCASE("bad fields are rejected") {
        CHECK_THROWS_AS(io::scenario_from_json(io::json::parse(R"({"id":"zzz"})")), ConfigError);
        CHECK_THROWS_AS(io::scenario_from_json(io::json::parse(
                            R"({"id":"custom","mean_rule":"whatever"})")),
                        io::ReadError);
    }
}

TEST_CASE("monte carlo csv layout") {
    MonteCarloReport report;
    report.seed = 17;
    MonteCarloRow row;
    row.scenario = "fig2c";
    row.p = 64;
    row.classifier = "II";
    row.replications = 100;
    row.e1 = 0.25;
    row.e2 = 0.15;
    row.ebar = 0.2;
    row.se = 0.03;
    row.failures = 0;
    row.phi_overlay = 0.21;
    report.rows.push_back(row);

    std::ostringstream out;
    io::write_monte_carlo_csv(out, report, "hdqc simulate test");
    const std::string text = out.str();
    CHECK(text.find("# hdqc simulate test\n") != std::string::npos);
    CHECK(text.find("# seed=17\n") != std::string::npos);
    CHECK(text.find("scenario,p,classifier,e1,e2,ebar,se,failures,phi_overlay\n") !=
          std::string::npos);
    CHECK(text.find("fig2c,64,II,0.25,0.15,0.2,0.03,0,0.21\n") != std::string::npos);
}

TEST_CASE("selection csv marks exactly the selected rows") {
    FeatureSelectionResult result;
    result.gamma = 0.5;
    result.threshold = 0.4;
    result.theta_hat = VectorXd(3);
    result.theta_hat << 0.1, 0.9, 0.2;
    result.selected = {1};
    result.p_star_hat = 1;
    std::ostringstream out;
    io::write_selection_csv(out, result, "prov");
    const std::string text = out.str();
    CHECK(text.find("j,theta_hat,selected\n") != std::string::npos);
    CHECK(text.find("0,0.1,0\n") != std::string::npos);
    CHECK(text.find("1,0.9,1\n") != std::string::npos);
    CHECK(text.find("2,0.2,0\n") != std::string::npos);
}

TEST_CASE("diagnose text carries the multiple-of-p annotations") {
    SparsityReport r;
    r.p = 100;
    r.n = {20, 30};
    r.delta_I_hat = 28.9;
    r.delta_II_hat = {1.0, 2.0};
    r.delta_sigma_hat = 500.0;
    r.trsq_hat = {5.0, 6.0};
    r.lambda_max_hat = {17.2, 20.4};
    r.conditions.defined = true;
    r.conditions.c1 = 0.362;
    r.conditions.c2 = 0.787;
    r.sphericity = {0.1, 0.2};
    std::ostringstream out;
    io::write_diagnose_text(out, r);
    const std::string text = out.str();
    CHECK(text.find("delta_I_hat=28.9 (=0.289p)") != std::string::npos);
    CHECK(text.find("delta_sigma_hat=500 (=5p)") != std::string::npos);
    CHECK(text.find("lambda_max_hat_1=17.2 (=0.172p)") != std::string::npos);
    CHECK(text.find("c1=0.362") != std::string::npos);
    CHECK(text.find("c2=0.787") != std::string::npos);
}

TEST_CASE("evaluation table renders k over N") {
    EvaluationReport report;
    report.labels = {"ALL", "AML"};
    report.class_sizes = {20, 14};
    ClassifierEvaluation ev;
    ev.variant = Variant::dbda;
    ev.errors_per_class = {1, 0};
    ev.total_errors = 1;
    ev.total = 34;
    report.results.push_back(ev);
    std::ostringstream out;
    io::write_evaluation_table(out, report);
    const std::string text = out.str();
    CHECK(text.find("1/20") != std::string::npos);
    CHECK(text.find("0/14") != std::string::npos);
    CHECK(text.find("1/34") != std::string::npos);
}
