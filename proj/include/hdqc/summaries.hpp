#pragma once

#include "hdqc/types.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace hdqc {

/// Per-class sufficient statistics: sample mean, the diagonal of the sample
/// covariance, its trace, and the sample size. The full covariance matrix is
/// materialized only on request (classifiers that invert it need it; the
/// diagonal family never does, which keeps storage O(p)).
template <typename Scalar>
struct ClassSummaryT {
    Vector<Scalar> mean;
    Vector<Scalar> cov_diag;
    Scalar trace = 0;
    Index n = 0;
    std::optional<Matrix<Scalar>> cov;

    Index dim() const { return mean.size(); }
};

using ClassSummary = ClassSummaryT<double>;

enum class CovStorage { diagonal_only, full };

/// Column means and n-1-divisor covariance via the two-pass scheme: subtract
/// the mean first, then accumulate squares. One-pass formulas cancel badly
/// when p is much larger than n.
template <typename Derived>
ClassSummaryT<typename Derived::Scalar> fit_class_summary(
    const Eigen::MatrixBase<Derived>& samples, CovStorage store = CovStorage::diagonal_only) {
    using Scalar = typename Derived::Scalar;
    const Index n = samples.rows();
    const Index p = samples.cols();
    if (n < 2) throw InsufficientSamplesError("fit_class_summary: need at least 2 rows");
    if (p < 1) throw DimensionError("fit_class_summary: need at least 1 column");

    ClassSummaryT<Scalar> out;
    out.n = n;
    out.mean = samples.colwise().mean();
    const Matrix<Scalar> centered = samples.rowwise() - out.mean.transpose();
    out.cov_diag = centered.colwise().squaredNorm().transpose() / Scalar(n - 1);
    out.trace = out.cov_diag.sum();
    if (store == CovStorage::full) {
        Matrix<Scalar> c = centered.transpose() * centered / Scalar(n - 1);
        out.cov = std::move(c);
    }
    return out;
}

/// Labeled samples grouped by class, one n_i x p matrix per class.
template <typename Scalar>
struct DatasetT {
    std::vector<Matrix<Scalar>> classes;
    std::vector<std::string> labels;

    Index dim() const { return classes.empty() ? 0 : classes.front().cols(); }
    std::size_t num_classes() const { return classes.size(); }

    void validate() const {
        if (classes.empty()) throw DegenerateDataError("dataset: no classes");
        if (!labels.empty() && labels.size() != classes.size())
            throw DimensionError("dataset: label/class count mismatch");
        const Index p = classes.front().cols();
        for (std::size_t i = 0; i < classes.size(); ++i) {
            if (classes[i].cols() != p)
                throw DimensionError("dataset: class " + std::to_string(i) +
                                     " has mismatched dimension");
            if (classes[i].rows() < 2)
                throw InsufficientSamplesError("dataset: class " + std::to_string(i) +
                                               " has fewer than 2 samples");
        }
    }

    std::vector<ClassSummaryT<Scalar>> summaries(
        CovStorage store = CovStorage::diagonal_only) const {
        std::vector<ClassSummaryT<Scalar>> out;
        out.reserve(classes.size());
        for (const auto& c : classes) out.push_back(fit_class_summary(c, store));
        return out;
    }
};

using Dataset = DatasetT<double>;

/// Pooled diagonal variance with the observed n_i - 1 weights.
template <typename Scalar>
struct PooledDiagonalT {
    Vector<Scalar> values;
    std::vector<Index> weights;
};

using PooledDiagonal = PooledDiagonalT<double>;

/// values_j = sum_i (n_i - 1) s_{i(j)} / sum_i (n_i - 1).
template <typename Scalar>
PooledDiagonalT<Scalar> pooled_diagonal(const std::vector<ClassSummaryT<Scalar>>& summaries) {
    if (summaries.size() < 2)
        throw InsufficientSamplesError("pooled_diagonal: need at least 2 classes");
    const Index p = summaries.front().dim();
    PooledDiagonalT<Scalar> out;
    out.values = Vector<Scalar>::Zero(p);
    Scalar total = 0;
    for (const auto& s : summaries) {
        if (s.dim() != p) throw DimensionError("pooled_diagonal: mismatched dimensions");
        const Scalar w = Scalar(s.n - 1);
        out.values += w * s.cov_diag;
        out.weights.push_back(s.n - 1);
        total += w;
    }
    out.values /= total;
    return out;
}

template <typename Scalar>
struct StandardizedDatasetT {
    DatasetT<Scalar> data;
    Scalar factor = 1;
};

using StandardizedDataset = StandardizedDatasetT<double>;

/// Cohort standardization factor: { sum_l tr(S_l) / (l p) }^{1/2}. After
/// dividing every sample by it, the average class trace equals p.
template <typename Scalar>
Scalar standardization_factor(const std::vector<ClassSummaryT<Scalar>>& summaries) {
    if (summaries.empty()) throw DegenerateDataError("standardization_factor: no classes");
    const Index p = summaries.front().dim();
    Scalar total = 0;
    for (const auto& s : summaries) total += s.trace;
    if (!(total > 0)) throw DegenerateDataError("standardization_factor: all class traces are zero");
    return std::sqrt(total / (Scalar(summaries.size()) * Scalar(p)));
}

template <typename Scalar>
StandardizedDatasetT<Scalar> standardize_global(const DatasetT<Scalar>& dataset) {
    dataset.validate();
    const Scalar factor = standardization_factor(dataset.summaries());
    StandardizedDatasetT<Scalar> out;
    out.factor = factor;
    out.data.labels = dataset.labels;
    out.data.classes.reserve(dataset.classes.size());
    for (const auto& c : dataset.classes) out.data.classes.push_back(c / factor);
    return out;
}

}  // namespace hdqc
