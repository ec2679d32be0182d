#pragma once

#include "hdqc/summaries.hpp"
#include "hdqc/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace hdqc {

template <typename Scalar>
struct FeatureSelectionResultT {
    Vector<Scalar> theta_hat;
    Scalar threshold = 0;
    Scalar gamma = 0;
    std::vector<Index> selected;  // strictly increasing
    Index p_star_hat = 0;
};

using FeatureSelectionResult = FeatureSelectionResultT<double>;

namespace detail {

template <typename Scalar>
void check_positive_variance(const ClassSummaryT<Scalar>& s, Index j, std::size_t class_idx) {
    if (!(s.cov_diag[j] > 0))
        throw DegenerateDataError("theta_hat: class " + std::to_string(class_idx) +
                                  " coordinate " + std::to_string(j) +
                                  " has zero sample variance");
}

}  // namespace detail

/// Per-coordinate heterogeneity of two classes, combining the squared mean
/// difference with the variance ratio. Zero exactly when both moments agree.
template <typename Scalar>
Scalar theta_hat(const ClassSummaryT<Scalar>& s1, const ClassSummaryT<Scalar>& s2, Index j) {
    if (s1.dim() != s2.dim()) throw DimensionError("theta_hat: dimension mismatch");
    if (j < 0 || j >= s1.dim()) throw DimensionError("theta_hat: coordinate out of range");
    detail::check_positive_variance(s1, j, 0);
    detail::check_positive_variance(s2, j, 1);
    const Scalar d = s1.mean[j] - s2.mean[j];
    const Scalar d2 = d * d;
    Scalar t = (d2 + s1.cov_diag[j]) / (Scalar(2) * s2.cov_diag[j]);
    t += (d2 + s2.cov_diag[j]) / (Scalar(2) * s1.cov_diag[j]);
    t -= Scalar(1);
    return t;
}

/// k-class extension: sum over ordered pairs (i, i'), i != i', of
/// {(mean_i - mean_i')^2 + s_i} / {k(k-1) s_i'}, minus one. Reduces to the
/// two-class statistic bit for bit at k = 2.
template <typename Scalar>
Scalar theta_hat_multiclass(const std::vector<ClassSummaryT<Scalar>>& summaries, Index j) {
    const std::size_t k = summaries.size();
    if (k < 2) throw InsufficientSamplesError("theta_hat_multiclass: need at least 2 classes");
    const Index p = summaries.front().dim();
    for (std::size_t i = 0; i < k; ++i) {
        if (summaries[i].dim() != p)
            throw DimensionError("theta_hat_multiclass: dimension mismatch");
        detail::check_positive_variance(summaries[i], j, i);
    }
    const Scalar denom = Scalar(k) * Scalar(k - 1);
    Scalar t = 0;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t ip = 0; ip < k; ++ip) {
            if (ip == i) continue;
            const Scalar d = summaries[i].mean[j] - summaries[ip].mean[j];
            t += (d * d + summaries[i].cov_diag[j]) / (denom * summaries[ip].cov_diag[j]);
        }
    }
    t -= Scalar(1);
    return t;
}

/// Population-side counterpart, evaluated coordinate-wise from two mean
/// vectors and covariance diagonals. Used as ground truth in rate checks.
template <typename Scalar>
Vector<Scalar> theta_population(const Vector<Scalar>& mu1, const Vector<Scalar>& mu2,
                                const Vector<Scalar>& diag1, const Vector<Scalar>& diag2) {
    if (mu1.size() != mu2.size() || mu1.size() != diag1.size() || diag1.size() != diag2.size())
        throw DimensionError("theta_population: dimension mismatch");
    const auto d2 = (mu1 - mu2).array().square();
    return ((d2 + diag1.array()) / (2 * diag2.array()) +
            (d2 + diag2.array()) / (2 * diag1.array()) - 1)
        .matrix();
}

/// Threshold ((log p) / n_min)^{gamma/2}. Natural logarithm throughout.
template <typename Scalar>
Scalar selection_threshold(Scalar p, Scalar n_min, Scalar gamma) {
    if (!(gamma > 0 && gamma < 1))
        throw ConfigError("selection_threshold: gamma must lie in (0, 1)");
    if (!(p >= 1)) throw ConfigError("selection_threshold: p must be >= 1");
    if (!(n_min >= 2)) throw ConfigError("selection_threshold: n_min must be >= 2");
    return std::pow(std::log(p) / n_min, gamma / Scalar(2));
}

/// Keeps the coordinates whose heterogeneity statistic strictly exceeds the
/// threshold. Empty selections are legal; callers decide the fallback.
template <typename Scalar>
FeatureSelectionResultT<Scalar> select_features(const std::vector<ClassSummaryT<Scalar>>& summaries,
                                                Scalar gamma) {
    if (summaries.size() < 2)
        throw InsufficientSamplesError("select_features: need at least 2 classes");
    const Index p = summaries.front().dim();
    Index n_min = summaries.front().n;
    for (const auto& s : summaries) n_min = std::min(n_min, s.n);

    FeatureSelectionResultT<Scalar> out;
    out.gamma = gamma;
    out.threshold = selection_threshold<Scalar>(Scalar(p), Scalar(n_min), gamma);
    out.theta_hat.resize(p);
    if (summaries.size() == 2) {
        for (Index j = 0; j < p; ++j)
            out.theta_hat[j] = theta_hat(summaries[0], summaries[1], j);
    } else {
        for (Index j = 0; j < p; ++j) out.theta_hat[j] = theta_hat_multiclass(summaries, j);
    }
    for (Index j = 0; j < p; ++j)
        if (out.theta_hat[j] > out.threshold) out.selected.push_back(j);
    out.p_star_hat = static_cast<Index>(out.selected.size());
    return out;
}

/// max_j |theta_hat_j - theta_j| scaled by (n_min^{-1} log p)^{-1/2}; stays
/// bounded in p when the estimator converges at the stated rate.
template <typename Scalar>
Scalar deviation_statistic(const Vector<Scalar>& theta_hat_values,
                           const Vector<Scalar>& theta_true, Scalar n_min, Scalar p) {
    if (theta_hat_values.size() != theta_true.size())
        throw DimensionError("deviation_statistic: length mismatch");
    if (!(p > 1) || !(n_min >= 1))
        throw ConfigError("deviation_statistic: need p > 1 and n_min >= 1");
    const Scalar scale = std::sqrt(std::log(p) / n_min);
    return (theta_hat_values - theta_true).template lpNorm<Eigen::Infinity>() / scale;
}

}  // namespace hdqc
