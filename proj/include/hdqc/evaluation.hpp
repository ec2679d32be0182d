#pragma once

#include "hdqc/discriminant.hpp"
#include "hdqc/summaries.hpp"
#include "hdqc/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace hdqc {

struct EvalOptions {
    std::vector<Variant> classifiers{Variant::dbda};
    FitOptions fit;
    bool paper_standardization = false;  // loocv: one cohort factor instead of per-fold factors
    TieBreak tie_break = TieBreak::lowest_index;
};

struct ClassifierEvaluation {
    Variant variant = Variant::dbda;
    bool failed = false;       // split evaluation: the single fit failed
    std::string error;
    Index fold_failures = 0;   // loocv: folds whose fit failed (excluded from totals)
    std::vector<Index> predicted;           // per evaluated sample, class index (-1 on failure)
    std::vector<bool> tie;
    std::vector<Index> errors_per_class;
    Index total_errors = 0;
    Index total = 0;
    std::vector<Index> selected_count;      // fs_dqda: per fit

    std::string fraction() const {
        return std::to_string(total_errors) + "/" + std::to_string(total);
    }
};

struct EvaluationReport {
    std::vector<std::string> labels;
    std::vector<Index> class_sizes;
    double standardization = 1.0;  // cohort factor (loocv default recomputes per fold)
    std::vector<ClassifierEvaluation> results;
};

namespace detail {

inline void scale_summary(ClassSummary& s, double factor) {
    s.mean /= factor;
    s.cov_diag /= factor * factor;
    s.trace /= factor * factor;
    if (s.cov) *s.cov /= factor * factor;
}

}  // namespace detail

/// Fits on the training cohort, scores the test cohort. The standardization
/// factor comes from the training samples only and is applied to both sides.
inline EvaluationReport evaluate_split(const Dataset& train, const Dataset& test,
                                       const EvalOptions& options) {
    train.validate();
    test.validate();
    if (train.dim() != test.dim()) throw DimensionError("evaluate_split: dimension mismatch");
    if (train.num_classes() != test.num_classes())
        throw DimensionError("evaluate_split: class count mismatch");

    const auto standardized = standardize_global(train);
    EvaluationReport report;
    report.labels = train.labels;
    report.standardization = standardized.factor;
    for (const auto& c : test.classes) report.class_sizes.push_back(c.rows());

    for (const Variant v : options.classifiers) {
        ClassifierEvaluation ev;
        ev.variant = v;
        ev.errors_per_class.assign(test.num_classes(), 0);
        try {
            const auto model = fit(standardized.data, v, options.fit);
            if (v == Variant::fs_dqda)
                ev.selected_count.push_back(static_cast<Index>(model.selected.size()));
            for (std::size_t cls = 0; cls < test.classes.size(); ++cls) {
                for (Index k = 0; k < test.classes[cls].rows(); ++k) {
                    const VectorXd x0 =
                        test.classes[cls].row(k).transpose() / standardized.factor;
                    const auto result = classify(x0, model, options.tie_break);
                    ev.predicted.push_back(result.cls);
                    ev.tie.push_back(result.tie);
                    ++ev.total;
                    if (result.cls != static_cast<Index>(cls)) {
                        ++ev.errors_per_class[cls];
                        ++ev.total_errors;
                    }
                }
            }
        } catch (const Error& e) {
            ev.failed = true;
            ev.error = e.what();
        }
        report.results.push_back(std::move(ev));
    }
    return report;
}

namespace detail {

/// Per-class running moments that support O(p) removal of one row
/// (Welford-style downdate). M2 holds coordinatewise sums of squared
/// deviations, so the fold variance is M2/(n-2) after removal.
struct ClassMoments {
    VectorXd mean;
    VectorXd m2;
    Index n = 0;

    static ClassMoments from_samples(const MatrixXd& samples) {
        ClassMoments m;
        m.n = samples.rows();
        m.mean = samples.colwise().mean();
        const MatrixXd centered = samples.rowwise() - m.mean.transpose();
        m.m2 = centered.colwise().squaredNorm().transpose();
        return m;
    }

    ClassSummary without_row(const VectorXd& x) const {
        if (n < 3)
            throw InsufficientSamplesError("loocv: class too small to hold out a sample");
        ClassSummary s;
        s.n = n - 1;
        s.mean = (double(n) * mean - x) / double(n - 1);
        const VectorXd m2_down =
            (m2.array() - (x - mean).array() * (x - s.mean).array()).max(0.0);
        s.cov_diag = m2_down / double(n - 2);
        s.trace = s.cov_diag.sum();
        return s;
    }

    ClassSummary as_summary() const {
        ClassSummary s;
        s.n = n;
        s.mean = mean;
        s.cov_diag = m2 / double(n - 1);
        s.trace = s.cov_diag.sum();
        return s;
    }
};

inline bool needs_full_cov(Variant v) {
    return v == Variant::sample_precision || v == Variant::thresholded;
}

/// Slow-path fold dataset for the variants that need full covariances.
inline Dataset fold_dataset(const Dataset& data, std::size_t held_class, Index held_row) {
    Dataset out;
    out.labels = data.labels;
    for (std::size_t c = 0; c < data.classes.size(); ++c) {
        if (c != held_class) {
            out.classes.push_back(data.classes[c]);
            continue;
        }
        const auto& m = data.classes[c];
        MatrixXd reduced(m.rows() - 1, m.cols());
        Index w = 0;
        for (Index r = 0; r < m.rows(); ++r)
            if (r != held_row) reduced.row(w++) = m.row(r);
        out.classes.push_back(std::move(reduced));
    }
    return out;
}

}  // namespace detail

/// Leave-one-out cross-validation. Every fold refits the class moments, the
/// feature selection, and (by default) the standardization factor from the
/// N-1 retained samples; paper_standardization instead freezes one cohort
/// factor up front. Diagonal-family classifiers run on O(p) downdated
/// moments; the matrix-inverting variants recompute their covariances per
/// fold.
inline EvaluationReport loocv(const Dataset& dataset, const EvalOptions& options) {
    dataset.validate();
    for (const auto& c : dataset.classes)
        if (c.rows() < 3)
            throw InsufficientSamplesError("loocv: every class needs at least 3 samples");

    EvaluationReport report;
    report.labels = dataset.labels;
    for (const auto& c : dataset.classes) report.class_sizes.push_back(c.rows());

    std::vector<detail::ClassMoments> moments;
    for (const auto& c : dataset.classes)
        moments.push_back(detail::ClassMoments::from_samples(c));

    std::vector<ClassSummary> cohort_summaries;
    for (const auto& m : moments) cohort_summaries.push_back(m.as_summary());
    const double cohort_factor = standardization_factor(cohort_summaries);
    report.standardization = cohort_factor;

    report.results.resize(options.classifiers.size());
    for (std::size_t v = 0; v < options.classifiers.size(); ++v) {
        report.results[v].variant = options.classifiers[v];
        report.results[v].errors_per_class.assign(dataset.num_classes(), 0);
    }

    for (std::size_t held_class = 0; held_class < dataset.classes.size(); ++held_class) {
        for (Index held_row = 0; held_row < dataset.classes[held_class].rows(); ++held_row) {
            const VectorXd x_raw = dataset.classes[held_class].row(held_row).transpose();

            std::vector<ClassSummary> fold_summaries;
            for (std::size_t c = 0; c < moments.size(); ++c)
                fold_summaries.push_back(c == held_class ? moments[c].without_row(x_raw)
                                                         : moments[c].as_summary());

            const double factor = options.paper_standardization
                                      ? cohort_factor
                                      : standardization_factor(fold_summaries);
            for (auto& s : fold_summaries) detail::scale_summary(s, factor);
            const VectorXd x0 = x_raw / factor;

            for (std::size_t v = 0; v < options.classifiers.size(); ++v) {
                auto& ev = report.results[v];
                try {
                    TrainedClassifier model;
                    if (detail::needs_full_cov(options.classifiers[v])) {
                        Dataset fold = detail::fold_dataset(dataset, held_class, held_row);
                        for (auto& cls : fold.classes) cls /= factor;
                        model = fit(fold, options.classifiers[v], options.fit);
                    } else {
                        model = fit_from_summaries(fold_summaries, dataset.labels,
                                                   options.classifiers[v], options.fit);
                    }
                    if (options.classifiers[v] == Variant::fs_dqda)
                        ev.selected_count.push_back(static_cast<Index>(model.selected.size()));
                    const auto result = classify(x0, model, options.tie_break);
                    ev.predicted.push_back(result.cls);
                    ev.tie.push_back(result.tie);
                    ++ev.total;
                    if (result.cls != static_cast<Index>(held_class)) {
                        ++ev.errors_per_class[held_class];
                        ++ev.total_errors;
                    }
                } catch (const Error&) {
                    ++ev.fold_failures;
                    ev.predicted.push_back(-1);
                    ev.tie.push_back(false);
                }
            }
        }
    }
    return report;
}

}  // namespace hdqc
