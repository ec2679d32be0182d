#pragma once

#include "hdqc/discriminant.hpp"
#include "hdqc/random.hpp"
#include "hdqc/summaries.hpp"
#include "hdqc/theory.hpp"
#include "hdqc/types.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace hdqc {

enum class ScenarioId { fig1a, fig1b, fig2c, fig2d, sim5a, sim5b, sim5c, sim5d, custom };

inline const char* scenario_name(ScenarioId id) {
    switch (id) {
        case ScenarioId::fig1a: return "fig1a";
        case ScenarioId::fig1b: return "fig1b";
        case ScenarioId::fig2c: return "fig2c";
        case ScenarioId::fig2d: return "fig2d";
        case ScenarioId::sim5a: return "sim5a";
        case ScenarioId::sim5b: return "sim5b";
        case ScenarioId::sim5c: return "sim5c";
        case ScenarioId::sim5d: return "sim5d";
        case ScenarioId::custom: return "custom";
    }
    return "?";
}

inline ScenarioId parse_scenario(const std::string& name) {
    for (ScenarioId id : {ScenarioId::fig1a, ScenarioId::fig1b, ScenarioId::fig2c,
                          ScenarioId::fig2d, ScenarioId::sim5a, ScenarioId::sim5b,
                          ScenarioId::sim5c, ScenarioId::sim5d, ScenarioId::custom})
        if (name == scenario_name(id)) return id;
    throw ConfigError("unknown scenario: " + name);
}

enum class MeanRule { zero, first_p23_ones, last_p23_ones, last_sqrtp_ones };
enum class SampleSizeRule { fixed, log2_double, logsq_double };

struct CovBuilder {
    enum class Kind {
        power_decay,         // B1 (0.3^{|i-j|^{1/3}}) B1, unit average variance
        scaled_power_decay,  // factor times the above
        scaled_identity,     // factor * I
        tail_spiked,         // power_decay with the last ceil(sqrt p) variances doubled
    };
    Kind kind = Kind::power_decay;
    double factor = 1.0;
};

struct DistFamily {
    enum class Kind { gaussian, student_t };
    Kind kind = Kind::gaussian;
    double nu = 8.0;  // student_t degrees of freedom, > 2
};

struct ScenarioConfig {
    ScenarioId id = ScenarioId::custom;
    std::vector<Index> grid;
    SampleSizeRule size_rule = SampleSizeRule::fixed;
    Index n1 = 0, n2 = 0;  // used when size_rule == fixed
    MeanRule mean_rule = MeanRule::zero;
    CovBuilder cov1, cov2;
    DistFamily family;
    Index replications = 2000;
    std::uint64_t seed = 0;
    bool fixed_training = false;
};

inline Index ceil_sqrt(Index p) {
    return static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(p))));
}

/// The correlated base covariance: diagonal scaling
/// B1 = diag[{0.5 + j/(p+1)}^{1/2}] around the power-decay correlation core
/// 0.3^{|i-j|^{1/3}}. Its trace equals p by construction.
template <typename Scalar = double>
Matrix<Scalar> power_decay_covariance(Index p) {
    Vector<Scalar> b(p);
    for (Index j = 0; j < p; ++j)
        b[j] = std::sqrt(Scalar(0.5) + Scalar(j + 1) / Scalar(p + 1));
    Matrix<Scalar> out(p, p);
    for (Index c = 0; c < p; ++c) {
        out(c, c) = b[c] * b[c];
        for (Index r = c + 1; r < p; ++r) {
            const Scalar core =
                std::pow(Scalar(0.3), std::cbrt(Scalar(r - c)));
            out(r, c) = b[r] * b[c] * core;
            out(c, r) = out(r, c);
        }
    }
    return out;
}

template <typename Scalar = double>
Matrix<Scalar> build_covariance(const CovBuilder& builder, Index p) {
    if (p < 1) throw ConfigError("build_covariance: p must be positive");
    switch (builder.kind) {
        case CovBuilder::Kind::power_decay:
            return power_decay_covariance<Scalar>(p);
        case CovBuilder::Kind::scaled_power_decay:
            return Matrix<Scalar>(Scalar(builder.factor) * power_decay_covariance<Scalar>(p));
        case CovBuilder::Kind::scaled_identity:
            return Matrix<Scalar>(Scalar(builder.factor) *
                                  Matrix<Scalar>::Identity(p, p));
        case CovBuilder::Kind::tail_spiked: {
            Matrix<Scalar> base = power_decay_covariance<Scalar>(p);
            const Index p_star = ceil_sqrt(p);
            Vector<Scalar> b2 = Vector<Scalar>::Ones(p);
            b2.tail(p_star).setConstant(std::sqrt(Scalar(2)));
            return Matrix<Scalar>(b2.asDiagonal() * base * b2.asDiagonal());
        }
    }
    throw ConfigError("build_covariance: unknown builder");
}

inline Vector<double> mean_from_rule(MeanRule rule, Index p) {
    Vector<double> mu = Vector<double>::Zero(p);
    switch (rule) {
        case MeanRule::zero:
            break;
        case MeanRule::first_p23_ones: {
            const Index m = static_cast<Index>(std::ceil(std::pow(double(p), 2.0 / 3.0)));
            mu.head(std::min(m, p)).setOnes();
            break;
        }
        case MeanRule::last_p23_ones: {
            const Index m = static_cast<Index>(std::ceil(std::pow(double(p), 2.0 / 3.0)));
            mu.tail(std::min(m, p)).setOnes();
            break;
        }
        case MeanRule::last_sqrtp_ones:
            mu.tail(std::min(ceil_sqrt(p), p)).setOnes();
            break;
    }
    return mu;
}

inline std::pair<Index, Index> sample_sizes(const ScenarioConfig& config, Index p) {
    switch (config.size_rule) {
        case SampleSizeRule::fixed:
            if (config.n1 < 2 || config.n2 < 2)
                throw ConfigError("scenario: fixed sample sizes must be >= 2");
            return {config.n1, config.n2};
        case SampleSizeRule::log2_double: {
            const Index n1 = static_cast<Index>(std::llround(std::log2(double(p))));
            if (n1 < 2) throw ConfigError("scenario: p too small for the log2 size rule");
            return {n1, 2 * n1};
        }
        case SampleSizeRule::logsq_double: {
            const double lp = std::log(double(p));
            const Index n1 = static_cast<Index>(std::ceil(lp * lp));
            if (n1 < 2) throw ConfigError("scenario: p too small for the squared-log size rule");
            return {n1, 2 * n1};
        }
    }
    throw ConfigError("scenario: unknown sample size rule");
}

/// Catalog of the named two-class setups. The mean side always lives on
/// class 2 (class 1 is centered at the origin).
inline ScenarioConfig scenario_config(ScenarioId id) {
    ScenarioConfig c;
    c.id = id;
    switch (id) {
        case ScenarioId::fig1a:
            c.size_rule = SampleSizeRule::log2_double;
            c.mean_rule = MeanRule::first_p23_ones;
            c.cov1 = {CovBuilder::Kind::power_decay, 1.0};
            c.cov2 = {CovBuilder::Kind::power_decay, 1.0};
            break;
        case ScenarioId::fig1b:
            c.size_rule = SampleSizeRule::log2_double;
            c.mean_rule = MeanRule::last_p23_ones;
            c.cov1 = {CovBuilder::Kind::power_decay, 1.0};
            c.cov2 = {CovBuilder::Kind::power_decay, 1.0};
            break;
        case ScenarioId::fig2c:
            c.size_rule = SampleSizeRule::fixed;
            c.n1 = 5;
            c.n2 = 10;
            c.mean_rule = MeanRule::zero;
            c.cov1 = {CovBuilder::Kind::power_decay, 1.0};
            c.cov2 = {CovBuilder::Kind::scaled_power_decay, 1.5};
            break;
        case ScenarioId::fig2d:
            c.size_rule = SampleSizeRule::fixed;
            c.n1 = 5;
            c.n2 = 10;
            c.mean_rule = MeanRule::zero;
            c.cov1 = {CovBuilder::Kind::power_decay, 1.0};
            c.cov2 = {CovBuilder::Kind::scaled_identity, 1.2};
            break;
        case ScenarioId::sim5a:
            c.size_rule = SampleSizeRule::fixed;
            c.n1 = 10;
            c.n2 = 20;
            c.mean_rule = MeanRule::last_sqrtp_ones;
            c.cov1 = {CovBuilder::Kind::power_decay, 1.0};
            c.cov2 = {CovBuilder::Kind::power_decay, 1.0};
            break;
        case ScenarioId::sim5b:
            c.size_rule = SampleSizeRule::logsq_double;
            c.mean_rule = MeanRule::last_sqrtp_ones;
            c.cov1 = {CovBuilder::Kind::power_decay, 1.0};
            c.cov2 = {CovBuilder::Kind::power_decay, 1.0};
            break;
        case ScenarioId::sim5c:
            c.size_rule = SampleSizeRule::logsq_double;
            c.mean_rule = MeanRule::last_sqrtp_ones;
            c.cov1 = {CovBuilder::Kind::power_decay, 1.0};
            c.cov2 = {CovBuilder::Kind::tail_spiked, 1.0};
            break;
        case ScenarioId::sim5d:
            c.size_rule = SampleSizeRule::logsq_double;
            c.mean_rule = MeanRule::last_sqrtp_ones;
            c.cov1 = {CovBuilder::Kind::power_decay, 1.0};
            c.cov2 = {CovBuilder::Kind::tail_spiked, 1.0};
            c.family = {DistFamily::Kind::student_t, 8.0};
            break;
        case ScenarioId::custom:
            break;
    }
    return c;
}

/// Exact population parameters and sample sizes for one grid point.
struct ResolvedScenario {
    Index p = 0;
    Index n1 = 0, n2 = 0;
    PopulationModel pop{std::vector<VectorXd>{VectorXd::Zero(1), VectorXd::Zero(1)},
                        std::vector<MatrixXd>{MatrixXd::Identity(1, 1), MatrixXd::Identity(1, 1)}};
    DistFamily family;
    std::vector<Index> true_features;  // coordinates with population heterogeneity
    Index p_star = 0;
};

inline ResolvedScenario resolve_scenario(const ScenarioConfig& config, Index p) {
    ResolvedScenario out;
    out.p = p;
    auto [n1, n2] = sample_sizes(config, p);
    out.n1 = n1;
    out.n2 = n2;
    out.family = config.family;
    if (out.family.kind == DistFamily::Kind::student_t && !(out.family.nu > 2))
        throw ConfigError("scenario: student_t needs nu > 2 for a finite covariance");

    const VectorXd mu1 = VectorXd::Zero(p);
    const VectorXd mu2 = mean_from_rule(config.mean_rule, p);
    MatrixXd s1 = build_covariance(config.cov1, p);
    MatrixXd s2 = build_covariance(config.cov2, p);
    out.pop = PopulationModel({mu1, mu2}, {std::move(s1), std::move(s2)});

    const auto theta = theta_population<double>(mu1, mu2, out.pop.sigma_diag(0),
                                                out.pop.sigma_diag(1));
    for (Index j = 0; j < p; ++j)
        if (theta[j] > 0) out.true_features.push_back(j);
    out.p_star = static_cast<Index>(out.true_features.size());
    return out;
}

inline ResolvedScenario scenario_catalog(ScenarioId id, Index p) {
    return resolve_scenario(scenario_config(id), p);
}

/// Draws n rows from class i of the population. Gaussian rows are mu + L z;
/// student_t rows are mu + L' z sqrt(nu/w) with L' L'^T = Sigma (nu-2)/nu and
/// w ~ chi-square(nu), so the row covariance equals Sigma exactly.
inline MatrixXd sample_population(const PopulationModel& pop, std::size_t i, Index n,
                                  const DistFamily& family, Rng& rng) {
    const Index p = pop.dim();
    MatrixXd z(n, p);
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < p; ++c) z(r, c) = rng.normal();

    const auto& l = pop.llt(i).matrixL();
    MatrixXd x = z * l.transpose();
    if (family.kind == DistFamily::Kind::student_t) {
        const double nu = family.nu;
        const double shrink = std::sqrt((nu - 2.0) / nu);
        for (Index r = 0; r < n; ++r) {
            const double w = rng.chi_square(nu);
            x.row(r) *= shrink * std::sqrt(nu / w);
        }
    }
    x.rowwise() += pop.mu(i).transpose();
    return x;
}

/// What the Monte Carlo harness runs: either one of the known-covariance
/// precision choices or an estimated classifier variant.
struct ClassifierId {
    bool oracle = false;
    Choice choice = Choice::I;
    Variant variant = Variant::dbda;
    std::string name;
};

inline ClassifierId parse_classifier(const std::string& name) {
    ClassifierId id;
    id.name = name;
    if (name == "I" || name == "II" || name == "III" || name == "IV") {
        id.oracle = true;
        id.choice = name == "I"    ? Choice::I
                    : name == "II"  ? Choice::II
                    : name == "III" ? Choice::III
                                    : Choice::IV;
        return id;
    }
    id.variant = parse_variant(name);
    if (id.variant == Variant::oracle)
        throw ConfigError("use I, II, III or IV to request a known-covariance classifier");
    return id;
}

struct MonteCarloRow {
    std::string scenario;
    Index p = 0;
    std::string classifier;
    Index replications = 0;  // successful replications
    double e1 = 0, e2 = 0, ebar = 0;
    double se1 = 0, se2 = 0, se = 0;
    Index failures = 0;
    std::optional<double> phi_overlay;
};

struct MonteCarloReport {
    std::vector<MonteCarloRow> rows;
    std::uint64_t seed = 0;
    double wall_seconds = 0;  // informational; never serialized
};

struct MonteCarloOptions {
    int workers = 0;  // 0 = hardware concurrency
    bool with_overlay = false;
    FitOptions fit;
    TieBreak tie_break = TieBreak::lowest_index;
};

namespace detail {

inline std::uint64_t replication_stream(Index p, std::uint64_t r) {
    return (static_cast<std::uint64_t>(p) << 36) | r;
}

struct ReplicationCounts {
    std::vector<Index> errors1, errors2, failures;
    explicit ReplicationCounts(std::size_t k) : errors1(k, 0), errors2(k, 0), failures(k, 0) {}
    void merge(const ReplicationCounts& o) {
        for (std::size_t i = 0; i < errors1.size(); ++i) {
            errors1[i] += o.errors1[i];
            errors2[i] += o.errors2[i];
            failures[i] += o.failures[i];
        }
    }
};

}  // namespace detail

/// Error-rate experiment over the scenario grid. Every replication draws
/// fresh training sets and one fresh test point per class from its own
/// counter-based substream, so the report is bit-identical for a fixed seed
/// regardless of the worker count (the per-classifier tallies are integers
/// and merge order cannot change them).
inline MonteCarloReport run_monte_carlo(const ScenarioConfig& config,
                                        const std::vector<ClassifierId>& classifiers,
                                        const MonteCarloOptions& options = {}) {
    if (config.grid.empty()) throw ConfigError("run_monte_carlo: empty dimension grid");
    if (config.replications < 1) throw ConfigError("run_monte_carlo: need at least 1 replication");
    if (classifiers.empty()) throw ConfigError("run_monte_carlo: no classifiers requested");

    const auto t0 = std::chrono::steady_clock::now();
    MonteCarloReport report;
    report.seed = config.seed;

    int workers = options.workers > 0 ? options.workers
                                      : static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;

    for (const Index p : config.grid) {
        const ResolvedScenario rs = resolve_scenario(config, p);

        // Known-covariance precision specs are shared across replications.
        std::vector<std::vector<PrecisionSpec>> oracle_specs(classifiers.size());
        for (std::size_t c = 0; c < classifiers.size(); ++c)
            if (classifiers[c].oracle)
                for (std::size_t i = 0; i < 2; ++i)
                    oracle_specs[c].push_back(oracle_spec(rs.pop, classifiers[c].choice, i));

        std::optional<Dataset> fixed_train;
        if (config.fixed_training) {
            Rng rng(config.seed, detail::replication_stream(p, 0xFFFFFFFFFFULL));
            Dataset d;
            d.labels = {"1", "2"};
            d.classes.push_back(sample_population(rs.pop, 0, rs.n1, rs.family, rng));
            d.classes.push_back(sample_population(rs.pop, 1, rs.n2, rs.family, rng));
            fixed_train = std::move(d);
        }

        detail::ReplicationCounts totals(classifiers.size());
        std::atomic<Index> next{0};
        std::mutex merge_mutex;

        auto worker = [&]() {
            detail::ReplicationCounts local(classifiers.size());
            for (;;) {
                const Index r = next.fetch_add(1);
                if (r >= config.replications) break;
                Rng rng(config.seed, detail::replication_stream(p, static_cast<std::uint64_t>(r)));

                Dataset train;
                if (fixed_train) {
                    train = *fixed_train;
                } else {
                    train.labels = {"1", "2"};
                    train.classes.push_back(sample_population(rs.pop, 0, rs.n1, rs.family, rng));
                    train.classes.push_back(sample_population(rs.pop, 1, rs.n2, rs.family, rng));
                }
                const VectorXd x01 =
                    sample_population(rs.pop, 0, 1, rs.family, rng).row(0).transpose();
                const VectorXd x02 =
                    sample_population(rs.pop, 1, 1, rs.family, rng).row(0).transpose();

                std::vector<ClassSummary> summaries;
                std::vector<MatrixXd> centered;
                for (const auto& cls : train.classes) {
                    auto s = fit_class_summary(cls);
                    centered.push_back(cls.rowwise() - s.mean.transpose());
                    summaries.push_back(std::move(s));
                }

                for (std::size_t c = 0; c < classifiers.size(); ++c) {
                    try {
                        TrainedClassifier model;
                        if (classifiers[c].oracle) {
                            model.variant = Variant::oracle;
                            for (std::size_t i = 0; i < 2; ++i) {
                                ClassRule rule;
                                rule.mean = summaries[i].mean;
                                rule.n = summaries[i].n;
                                rule.spec = oracle_specs[c][i];
                                if (classifiers[c].choice == Choice::IV) {
                                    const auto& a = *rule.spec.as_full().precision;
                                    rule.bias = (centered[i] * a).cwiseProduct(centered[i]).sum() /
                                                (double(rule.n) * double(rule.n - 1));
                                } else {
                                    rule.bias = rule.spec.bias(summaries[i]);
                                }
                                model.classes.push_back(std::move(rule));
                            }
                        } else if (classifiers[c].variant == Variant::sample_precision ||
                                   classifiers[c].variant == Variant::thresholded) {
                            model = fit(train, classifiers[c].variant, options.fit);
                        } else {
                            model = fit_from_summaries(summaries, train.labels,
                                                       classifiers[c].variant, options.fit);
                        }
                        if (classify(x01, model, options.tie_break).cls != 0) ++local.errors1[c];
                        if (classify(x02, model, options.tie_break).cls != 1) ++local.errors2[c];
                    } catch (const Error&) {
                        ++local.failures[c];
                    }
                }
            }
            std::lock_guard<std::mutex> lock(merge_mutex);
            totals.merge(local);
        };

        std::vector<std::thread> pool;
        for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();

        for (std::size_t c = 0; c < classifiers.size(); ++c) {
            MonteCarloRow row;
            row.scenario = scenario_name(config.id);
            row.p = p;
            row.classifier = classifiers[c].name;
            row.failures = totals.failures[c];
            row.replications = config.replications - totals.failures[c];
            const double reps = double(row.replications);
            if (row.replications > 0) {
                row.e1 = double(totals.errors1[c]) / reps;
                row.e2 = double(totals.errors2[c]) / reps;
                row.ebar = (row.e1 + row.e2) / 2.0;
                row.se1 = std::sqrt(row.e1 * (1.0 - row.e1) / reps);
                row.se2 = std::sqrt(row.e2 * (1.0 - row.e2) / reps);
                row.se = std::sqrt(row.se1 * row.se1 + row.se2 * row.se2) / 2.0;
            }
            if (options.with_overlay) {
                std::optional<Choice> choice;
                if (classifiers[c].oracle)
                    choice = classifiers[c].choice;
                else if (classifiers[c].variant == Variant::dbda)
                    choice = Choice::I;
                else if (classifiers[c].variant == Variant::gqda)
                    choice = Choice::II;
                else if (classifiers[c].variant == Variant::dqda_bc)
                    choice = Choice::III;
                else if (classifiers[c].variant == Variant::sample_precision)
                    choice = Choice::IV;
                if (choice) {
                    const auto tq = theory_quantities(rs.pop, *choice, rs.n1, rs.n2);
                    row.phi_overlay = (tq.asymptotic_error[0] + tq.asymptotic_error[1]) / 2.0;
                }
            }
            report.rows.push_back(std::move(row));
        }
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace hdqc
