#pragma once

#include "hdqc/summaries.hpp"
#include "hdqc/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace hdqc {

/// Hard-threshold level tau = M' (n^{-1} log p)^{1/2}.
template <typename Scalar>
struct ThresholdConfigT {
    Scalar constant = 2;  // M'

    Scalar tau(Index n, Index p) const {
        if (!(constant > 0)) throw ConfigError("threshold config: constant must be positive");
        return constant * std::sqrt(std::log(Scalar(p)) / Scalar(n));
    }
};

using ThresholdConfig = ThresholdConfigT<double>;

/// ||mean_1 - mean_2||^2 - tr(S_1)/n_1 - tr(S_2)/n_2. Unbiased for the
/// squared mean separation; may be negative on finite samples.
template <typename Scalar>
Scalar delta_I_hat(const ClassSummaryT<Scalar>& s1, const ClassSummaryT<Scalar>& s2) {
    if (s1.dim() != s2.dim()) throw DimensionError("delta_I_hat: dimension mismatch");
    return (s1.mean - s2.mean).squaredNorm() - s1.trace / Scalar(s1.n) - s2.trace / Scalar(s2.n);
}

template <typename Scalar>
Scalar delta_I_hat(const ClassSummaryT<Scalar>& s1, const ClassSummaryT<Scalar>& s2,
                   const Vector<Scalar>& mean_diff) {
    if (mean_diff.size() != s1.dim()) throw DimensionError("delta_I_hat: dimension mismatch");
    return mean_diff.squaredNorm() - s1.trace / Scalar(s1.n) - s2.trace / Scalar(s2.n);
}

/// Trace-normalized separation estimate for the scaled-identity classifier;
/// reduces to delta_I_hat when both traces equal p.
template <typename Scalar>
Scalar delta_II_hat(const ClassSummaryT<Scalar>& s_i, const ClassSummaryT<Scalar>& s_ip) {
    if (s_i.dim() != s_ip.dim()) throw DimensionError("delta_II_hat: dimension mismatch");
    if (!(s_i.trace > 0) || !(s_ip.trace > 0))
        throw DegenerateDataError("delta_II_hat: class traces must be positive");
    const Scalar p = Scalar(s_i.dim());
    const Scalar ti = s_i.trace;
    const Scalar tip = s_ip.trace;
    return (p / tip) *
           (delta_I_hat(s_i, s_ip) + ti - tip + tip * std::log(tip / ti));
}

/// Unbiased tr(Sigma^2) estimate built from disjoint within-class difference
/// pairs u_k = x_{2k} - x_{2k+1}: each cross term {(u_k' u_l)^2}/4 has
/// expectation tr(Sigma^2) for any distribution with finite fourth moments.
/// The systematic k < l design keeps the cost at O(n^2 p).
template <typename Derived>
typename Derived::Scalar trsq_hat(const Eigen::MatrixBase<Derived>& samples) {
    using Scalar = typename Derived::Scalar;
    const Index n = samples.rows();
    if (n < 4) throw InsufficientSamplesError("trsq_hat: need at least 4 samples");
    const Index m = n / 2;
    Matrix<Scalar> u(m, samples.cols());
    for (Index k = 0; k < m; ++k) u.row(k) = samples.row(2 * k) - samples.row(2 * k + 1);
    // Kahan-compensated accumulation over the pair terms.
    Scalar sum = 0, comp = 0;
    for (Index k = 0; k < m; ++k) {
        for (Index l = k + 1; l < m; ++l) {
            const Scalar dot = u.row(k).dot(u.row(l));
            const Scalar term = dot * dot / Scalar(4);
            const Scalar y = term - comp;
            const Scalar t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
    }
    return sum / (Scalar(m) * Scalar(m - 1) / Scalar(2));
}

/// tr(S_1 S_2) without materializing either covariance, via the cross Gram
/// matrix of centered rows.
template <typename Scalar>
Scalar trace_product_of_covariances(const Matrix<Scalar>& samples1, const Matrix<Scalar>& samples2) {
    if (samples1.cols() != samples2.cols())
        throw DimensionError("trace_product_of_covariances: dimension mismatch");
    const Index n1 = samples1.rows();
    const Index n2 = samples2.rows();
    if (n1 < 2 || n2 < 2)
        throw InsufficientSamplesError("trace_product_of_covariances: need 2 samples per class");
    const Matrix<Scalar> c1 = samples1.rowwise() - samples1.colwise().mean();
    const Matrix<Scalar> c2 = samples2.rowwise() - samples2.colwise().mean();
    const Matrix<Scalar> cross = c1 * c2.transpose();
    return cross.squaredNorm() / (Scalar(n1 - 1) * Scalar(n2 - 1));
}

/// tr(S^2) via the n x n dual Gram matrix; exceeds neither memory nor time
/// budgets at gene-expression scale.
template <typename Scalar>
Scalar trace_square_of_covariance(const Matrix<Scalar>& samples) {
    const Index n = samples.rows();
    if (n < 2) throw InsufficientSamplesError("trace_square_of_covariance: need 2 samples");
    const Matrix<Scalar> c = samples.rowwise() - samples.colwise().mean();
    const Matrix<Scalar> gram = c * c.transpose();
    return gram.squaredNorm() / (Scalar(n - 1) * Scalar(n - 1));
}

/// Estimate of the squared Frobenius distance between the two covariance
/// matrices: sum of per-class tr(Sigma^2) estimates minus 2 tr(S_1 S_2).
template <typename Scalar>
Scalar delta_sigma_hat(const Matrix<Scalar>& samples1, const Matrix<Scalar>& samples2) {
    if (samples1.rows() < 4 || samples2.rows() < 4)
        throw InsufficientSamplesError("delta_sigma_hat: need at least 4 samples per class");
    return trsq_hat(samples1) + trsq_hat(samples2) -
           Scalar(2) * trace_product_of_covariances(samples1, samples2);
}

/// Entrywise hard thresholding, diagonal included unless keep_diagonal.
template <typename Scalar>
Matrix<Scalar> threshold_operator(const Matrix<Scalar>& m, Scalar tau, bool keep_diagonal = false) {
    if (m.rows() != m.cols()) throw DimensionError("threshold_operator: matrix must be square");
    if (!m.isApprox(m.transpose()))
        throw DimensionError("threshold_operator: matrix must be symmetric");
    Matrix<Scalar> out = m;
    for (Index c = 0; c < m.cols(); ++c)
        for (Index r = 0; r < m.rows(); ++r)
            if (std::abs(out(r, c)) < tau && !(keep_diagonal && r == c)) out(r, c) = 0;
    return out;
}

/// Maximum column sum of |entries|^h for h in [0, 1), with 0^0 := 0. Counts
/// nonzeros per column at h = 0.
template <typename Scalar>
Scalar sparsity_measure(const Matrix<Scalar>& m, Scalar h) {
    if (!(h >= 0 && h < 1)) throw ConfigError("sparsity_measure: h must lie in [0, 1)");
    Scalar best = 0;
    for (Index c = 0; c < m.cols(); ++c) {
        Scalar col = 0;
        for (Index r = 0; r < m.rows(); ++r) {
            const Scalar a = std::abs(m(r, c));
            if (a > 0) col += std::pow(a, h);
        }
        best = std::max(best, col);
    }
    return best;
}

/// Largest-eigenvalue estimate with the HDLSS noise correction: the top dual
/// eigenvalue minus the residual trace spread over the remaining degrees of
/// freedom, floored at zero.
template <typename Scalar>
Scalar nr_max_eigenvalue(const Matrix<Scalar>& samples) {
    const Index n = samples.rows();
    if (n < 3) throw InsufficientSamplesError("nr_max_eigenvalue: need at least 3 samples");
    const Matrix<Scalar> c = samples.rowwise() - samples.colwise().mean();
    const Matrix<Scalar> dual = c * c.transpose() / Scalar(n - 1);
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(dual, Eigen::EigenvaluesOnly);
    const Scalar lambda1 = solver.eigenvalues().maxCoeff();
    const Scalar corrected = lambda1 - (dual.trace() - lambda1) / Scalar(n - 2);
    return std::max(corrected, Scalar(0));
}

template <typename Scalar>
struct ConditionDiagnosticsT {
    Scalar c1 = std::numeric_limits<Scalar>::quiet_NaN();
    Scalar c2 = std::numeric_limits<Scalar>::quiet_NaN();
    bool defined = false;
};

using ConditionDiagnostics = ConditionDiagnosticsT<double>;

/// C_1 = max W / (n_min delta^2), C_2 = max lambda / delta. Undefined (and
/// flagged, not fatal) when the separation estimate is nonpositive.
template <typename Scalar>
ConditionDiagnosticsT<Scalar> condition_diagnostics(const std::vector<Scalar>& trsq_hats,
                                                    const std::vector<Scalar>& lambda_hats,
                                                    Index n_min, Scalar delta_I) {
    if (trsq_hats.empty() || lambda_hats.empty())
        throw DimensionError("condition_diagnostics: empty inputs");
    ConditionDiagnosticsT<Scalar> out;
    if (!(delta_I > 0)) return out;
    const Scalar w = *std::max_element(trsq_hats.begin(), trsq_hats.end());
    const Scalar l = *std::max_element(lambda_hats.begin(), lambda_hats.end());
    out.c1 = w / (Scalar(n_min) * delta_I * delta_I);
    out.c2 = l / delta_I;
    out.defined = true;
    return out;
}

/// Everything the diagnose report prints for one pair of classes.
template <typename Scalar>
struct SparsityReportT {
    Index p = 0;
    std::vector<Index> n;
    Scalar delta_I_hat = 0;
    std::vector<Scalar> delta_II_hat;  // one per class (i against the other)
    Scalar delta_sigma_hat = 0;
    std::vector<Scalar> trsq_hat;       // W_i
    std::vector<Scalar> lambda_max_hat;
    ConditionDiagnosticsT<Scalar> conditions;
    std::vector<Scalar> sphericity;     // plug-in tr(S^2)/tr(S)^2
};

using SparsityReport = SparsityReportT<double>;

/// Assembles the scale-of-heterogeneity diagnostics for two classes of
/// (already standardized) samples.
template <typename Scalar>
SparsityReportT<Scalar> diagnose_pair(const Matrix<Scalar>& samples1,
                                      const Matrix<Scalar>& samples2) {
    if (samples1.cols() != samples2.cols())
        throw DimensionError("diagnose_pair: dimension mismatch");
    if (samples1.rows() < 4 || samples2.rows() < 4)
        throw InsufficientSamplesError("diagnose_pair: need at least 4 samples per class");

    SparsityReportT<Scalar> out;
    out.p = samples1.cols();
    out.n = {samples1.rows(), samples2.rows()};
    const auto s1 = fit_class_summary(samples1);
    const auto s2 = fit_class_summary(samples2);
    out.delta_I_hat = delta_I_hat(s1, s2);
    out.delta_II_hat = {delta_II_hat(s1, s2), delta_II_hat(s2, s1)};
    out.trsq_hat = {trsq_hat(samples1), trsq_hat(samples2)};
    out.delta_sigma_hat = out.trsq_hat[0] + out.trsq_hat[1] -
                          Scalar(2) * trace_product_of_covariances(samples1, samples2);
    out.lambda_max_hat = {nr_max_eigenvalue(samples1), nr_max_eigenvalue(samples2)};
    out.conditions = condition_diagnostics(out.trsq_hat, out.lambda_max_hat,
                                           std::min(samples1.rows(), samples2.rows()),
                                           out.delta_I_hat);
    const Scalar f1 = trace_square_of_covariance(samples1);
    const Scalar f2 = trace_square_of_covariance(samples2);
    out.sphericity = {f1 / (s1.trace * s1.trace), f2 / (s2.trace * s2.trace)};
    return out;
}

}  // namespace hdqc
