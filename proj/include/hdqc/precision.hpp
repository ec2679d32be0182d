#pragma once

#include "hdqc/summaries.hpp"
#include "hdqc/types.hpp"

#include <cmath>
#include <memory>
#include <utility>
#include <variant>
#include <vector>

namespace hdqc {

/// The matrix applied inside a quadratic discriminant score, stored in its
/// compact form. Full matrices are held behind a shared pointer so copies of
/// a spec (one per class rule, per replication) never duplicate p^2 storage.
template <typename Scalar>
class PrecisionSpecT {
  public:
    struct Identity {};
    struct ScaledIdentity {
        Scalar scale;
        Scalar log_det;  // p * log(scale)
        Index p;
    };
    struct Diagonal {
        Vector<Scalar> values;
        Scalar log_det;  // sum of log(values)
    };
    struct Full {
        std::shared_ptr<const Matrix<Scalar>> precision;
        Scalar log_det;
    };
    struct FeatureRestricted {
        std::vector<Index> indices;  // strictly increasing, into 0..p-1
        Vector<Scalar> values;       // diagonal over the restricted coordinates
        Scalar log_det;
    };

    static PrecisionSpecT identity() { return PrecisionSpecT(Identity{}); }

    static PrecisionSpecT scaled_identity(Scalar scale, Index p) {
        if (!(scale > 0)) throw SingularPrecisionError("scaled identity: scale must be positive");
        return PrecisionSpecT(ScaledIdentity{scale, Scalar(p) * std::log(scale), p});
    }

    static PrecisionSpecT diagonal(Vector<Scalar> values) {
        if (values.size() == 0 || !(values.minCoeff() > 0))
            throw SingularPrecisionError("diagonal precision: all values must be positive");
        const Scalar ld = values.array().log().sum();
        return PrecisionSpecT(Diagonal{std::move(values), ld});
    }

    /// Builds A = M^{-1} from an SPD matrix M through its Cholesky factor;
    /// the log-determinant comes from the factor, not from the inverse.
    static PrecisionSpecT full_from_covariance(const Matrix<Scalar>& spd) {
        if (spd.rows() != spd.cols())
            throw DimensionError("full precision: matrix must be square");
        Eigen::LLT<Matrix<Scalar>> llt(spd);
        if (llt.info() != Eigen::Success)
            throw SingularPrecisionError("full precision: matrix is not positive definite");
        const Scalar log_det_cov =
            Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
        Matrix<Scalar> inv = llt.solve(Matrix<Scalar>::Identity(spd.rows(), spd.cols()));
        inv = ((inv + inv.transpose()) / Scalar(2)).eval();
        return PrecisionSpecT(
            Full{std::make_shared<const Matrix<Scalar>>(std::move(inv)), -log_det_cov});
    }

    /// Rebuilds a spec from an already-computed precision matrix (model load).
    static PrecisionSpecT full_from_precision(Matrix<Scalar> precision, Scalar log_det) {
        if (precision.rows() != precision.cols())
            throw DimensionError("full precision: matrix must be square");
        return PrecisionSpecT(
            Full{std::make_shared<const Matrix<Scalar>>(std::move(precision)), log_det});
    }

    static PrecisionSpecT feature_restricted(std::vector<Index> indices, Vector<Scalar> values) {
        if (indices.empty()) throw ConfigError("feature-restricted precision: empty index set");
        if (static_cast<Index>(indices.size()) != values.size())
            throw DimensionError("feature-restricted precision: index/value size mismatch");
        for (std::size_t k = 0; k + 1 < indices.size(); ++k)
            if (indices[k] >= indices[k + 1])
                throw ConfigError("feature-restricted precision: indices must be strictly increasing");
        if (!(values.minCoeff() > 0))
            throw SingularPrecisionError("feature-restricted precision: values must be positive");
        const Scalar ld = values.array().log().sum();
        return PrecisionSpecT(FeatureRestricted{std::move(indices), std::move(values), ld});
    }

    bool is_identity() const { return std::holds_alternative<Identity>(node_); }
    bool is_scaled_identity() const { return std::holds_alternative<ScaledIdentity>(node_); }
    bool is_diagonal() const { return std::holds_alternative<Diagonal>(node_); }
    bool is_full() const { return std::holds_alternative<Full>(node_); }
    bool is_feature_restricted() const { return std::holds_alternative<FeatureRestricted>(node_); }

    const ScaledIdentity& as_scaled_identity() const { return std::get<ScaledIdentity>(node_); }
    const Diagonal& as_diagonal() const { return std::get<Diagonal>(node_); }
    const Full& as_full() const { return std::get<Full>(node_); }
    const FeatureRestricted& as_feature_restricted() const {
        return std::get<FeatureRestricted>(node_);
    }

    Scalar log_det() const {
        return std::visit(
            [](const auto& n) -> Scalar {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Identity>)
                    return 0;
                else
                    return n.log_det;
            },
            node_);
    }

    /// d' A d for a full-dimension difference vector d.
    Scalar quad(const Vector<Scalar>& d) const {
        return std::visit(
            [&](const auto& n) -> Scalar {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Identity>) {
                    return d.squaredNorm();
                } else if constexpr (std::is_same_v<T, ScaledIdentity>) {
                    return n.scale * d.squaredNorm();
                } else if constexpr (std::is_same_v<T, Diagonal>) {
                    if (n.values.size() != d.size())
                        throw DimensionError("precision quad: dimension mismatch");
                    return (d.array().square() * n.values.array()).sum();
                } else if constexpr (std::is_same_v<T, Full>) {
                    if (n.precision->rows() != d.size())
                        throw DimensionError("precision quad: dimension mismatch");
                    return d.dot(n.precision->template selfadjointView<Eigen::Lower>() * d);
                } else {
                    Scalar acc = 0;
                    for (std::size_t k = 0; k < n.indices.size(); ++k) {
                        const Scalar dj = d[n.indices[k]];
                        acc += dj * dj * n.values[static_cast<Index>(k)];
                    }
                    return acc;
                }
            },
            node_);
    }

    /// A v for a full-dimension vector (undefined for feature-restricted specs).
    Vector<Scalar> apply(const Vector<Scalar>& v) const {
        return std::visit(
            [&](const auto& n) -> Vector<Scalar> {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Identity>) {
                    return v;
                } else if constexpr (std::is_same_v<T, ScaledIdentity>) {
                    return n.scale * v;
                } else if constexpr (std::is_same_v<T, Diagonal>) {
                    return (n.values.array() * v.array()).matrix();
                } else if constexpr (std::is_same_v<T, Full>) {
                    return n.precision->template selfadjointView<Eigen::Lower>() * v;
                } else {
                    throw SingularPrecisionError(
                        "feature-restricted precision is singular on the full space");
                }
            },
            node_);
    }

    /// tr(S A) / n from a class summary. Full specs need the materialized
    /// covariance; the diagonal family only touches cov_diag.
    Scalar bias(const ClassSummaryT<Scalar>& s) const {
        return std::visit(
            [&](const auto& n) -> Scalar {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Identity>) {
                    return s.trace / Scalar(s.n);
                } else if constexpr (std::is_same_v<T, ScaledIdentity>) {
                    return n.scale * s.trace / Scalar(s.n);
                } else if constexpr (std::is_same_v<T, Diagonal>) {
                    return (s.cov_diag.array() * n.values.array()).sum() / Scalar(s.n);
                } else if constexpr (std::is_same_v<T, Full>) {
                    if (!s.cov)
                        throw DimensionError(
                            "precision bias: full spec needs the materialized covariance");
                    return s.cov->cwiseProduct(*n.precision).sum() / Scalar(s.n);
                } else {
                    Scalar acc = 0;
                    for (std::size_t k = 0; k < n.indices.size(); ++k)
                        acc += s.cov_diag[n.indices[k]] * n.values[static_cast<Index>(k)];
                    return acc / Scalar(s.n);
                }
            },
            node_);
    }

  private:
    using Node = std::variant<Identity, ScaledIdentity, Diagonal, Full, FeatureRestricted>;
    explicit PrecisionSpecT(Node node) : node_(std::move(node)) {}
    Node node_;
};

using PrecisionSpec = PrecisionSpecT<double>;

/// The bias-corrected quadratic score: (x0 - mean)' A (x0 - mean)
/// - tr(S A)/n - log|A|. The log term is dropped for the pooled linear
/// variant, where it is common to all classes and cancels in differences.
template <typename Scalar>
Scalar discriminant_score(const Vector<Scalar>& x0, const ClassSummaryT<Scalar>& summary,
                          const PrecisionSpecT<Scalar>& spec, bool include_log_det = true) {
    if (x0.size() != summary.dim())
        throw DimensionError("discriminant_score: dimension mismatch");
    if (!x0.allFinite()) throw DegenerateDataError("discriminant_score: non-finite input");
    const Vector<Scalar> d = x0 - summary.mean;
    Scalar score = spec.quad(d) - spec.bias(summary);
    if (include_log_det) score -= spec.log_det();
    return score;
}

}  // namespace hdqc
