#pragma once

#include "hdqc/precision.hpp"
#include "hdqc/types.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <vector>

namespace hdqc {

/// Standard normal CDF through the complementary error function; absolute
/// error well below 1e-12 over the whole line.
template <typename Scalar>
Scalar norm_cdf(Scalar x) {
    return Scalar(0.5) * std::erfc(-x / std::sqrt(Scalar(2)));
}

/// Known population parameters for a set of classes: means, SPD covariance
/// matrices, and the caches every theoretical quantity keeps reaching for
/// (Cholesky factors, log-determinants, traces, diagonals). The eigenvalue
/// spectrum is optional; nothing on the simulation path needs it and a dense
/// symmetric eigensolve at p in the thousands is not free.
template <typename Scalar>
class PopulationModelT {
  public:
    PopulationModelT(std::vector<Vector<Scalar>> mu, std::vector<Matrix<Scalar>> sigma,
                     bool with_spectrum = false)
        : mu_(std::move(mu)), sigma_(std::move(sigma)) {
        if (mu_.empty() || mu_.size() != sigma_.size())
            throw DimensionError("population model: need one mean per covariance");
        const Index p = mu_.front().size();
        for (std::size_t i = 0; i < mu_.size(); ++i) {
            if (mu_[i].size() != p || sigma_[i].rows() != p || sigma_[i].cols() != p)
                throw DimensionError("population model: dimension mismatch");
            llt_.emplace_back(sigma_[i]);
            if (llt_.back().info() != Eigen::Success)
                throw SingularPrecisionError("population model: covariance " +
                                             std::to_string(i) + " is not positive definite");
            log_det_.push_back(Scalar(2) *
                               llt_.back().matrixLLT().diagonal().array().log().sum());
            trace_.push_back(sigma_[i].trace());
            diag_.push_back(sigma_[i].diagonal());
        }
        if (with_spectrum) ensure_spectrum();
    }

    Index dim() const { return mu_.front().size(); }
    std::size_t num_classes() const { return mu_.size(); }

    const Vector<Scalar>& mu(std::size_t i) const { return mu_.at(i); }
    const Matrix<Scalar>& sigma(std::size_t i) const { return sigma_.at(i); }
    const Eigen::LLT<Matrix<Scalar>>& llt(std::size_t i) const { return llt_.at(i); }
    Scalar log_det(std::size_t i) const { return log_det_.at(i); }
    Scalar trace(std::size_t i) const { return trace_.at(i); }
    const Vector<Scalar>& sigma_diag(std::size_t i) const { return diag_.at(i); }

    Vector<Scalar> mu12() const {
        if (num_classes() < 2) throw DimensionError("population model: need two classes");
        return mu_[0] - mu_[1];
    }

    /// Computes and validates the eigen decompositions (descending order).
    void ensure_spectrum() {
        if (!eigenvalues_.empty()) return;
        for (std::size_t i = 0; i < sigma_.size(); ++i) {
            Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(sigma_[i],
                                                                 Eigen::EigenvaluesOnly);
            Vector<Scalar> ev = solver.eigenvalues().reverse();
            if (!(ev.minCoeff() > 0))
                throw SingularPrecisionError("population model: nonpositive eigenvalue");
            const Scalar sum = ev.sum();
            if (std::abs(sum - trace_[i]) > Scalar(1e-8) * std::abs(trace_[i]))
                throw DegenerateDataError("population model: eigenvalue sum disagrees with trace");
            eigenvalues_.push_back(std::move(ev));
        }
    }

    bool has_spectrum() const { return !eigenvalues_.empty(); }

    const Vector<Scalar>& eigenvalues(std::size_t i) const {
        if (eigenvalues_.empty())
            throw ConfigError("population model: spectrum not computed; call ensure_spectrum()");
        return eigenvalues_.at(i);
    }

  private:
    std::vector<Vector<Scalar>> mu_;
    std::vector<Matrix<Scalar>> sigma_;
    std::vector<Eigen::LLT<Matrix<Scalar>>> llt_;
    std::vector<Scalar> log_det_;
    std::vector<Scalar> trace_;
    std::vector<Vector<Scalar>> diag_;
    std::vector<Vector<Scalar>> eigenvalues_;
};

using PopulationModel = PopulationModelT<double>;

/// The four canonical precision choices.
enum class Choice { I, II, III, IV };

inline const char* choice_name(Choice c) {
    switch (c) {
        case Choice::I: return "I";
        case Choice::II: return "II";
        case Choice::III: return "III";
        case Choice::IV: return "IV";
    }
    return "?";
}

/// A_i built from the true covariance of class i.
template <typename Scalar>
PrecisionSpecT<Scalar> oracle_spec(const PopulationModelT<Scalar>& pop, Choice choice,
                                   std::size_t i) {
    const Index p = pop.dim();
    switch (choice) {
        case Choice::I:
            return PrecisionSpecT<Scalar>::identity();
        case Choice::II:
            return PrecisionSpecT<Scalar>::scaled_identity(Scalar(p) / pop.trace(i), p);
        case Choice::III:
            if (!(pop.sigma_diag(i).minCoeff() > 0))
                throw SingularPrecisionError("oracle spec III: nonpositive diagonal");
            return PrecisionSpecT<Scalar>::diagonal(pop.sigma_diag(i).cwiseInverse());
        case Choice::IV:
            return PrecisionSpecT<Scalar>::full_from_covariance(pop.sigma(i));
    }
    throw ConfigError("oracle_spec: unknown choice");
}

namespace detail {

/// tr(Sigma A) for a spec in compact form.
template <typename Scalar>
Scalar trace_sigma_spec(const PopulationModelT<Scalar>& pop, std::size_t i,
                        const PrecisionSpecT<Scalar>& a) {
    if (a.is_identity()) return pop.trace(i);
    if (a.is_scaled_identity()) return a.as_scaled_identity().scale * pop.trace(i);
    if (a.is_diagonal())
        return (pop.sigma_diag(i).array() * a.as_diagonal().values.array()).sum();
    if (a.is_full()) return pop.sigma(i).cwiseProduct(*a.as_full().precision).sum();
    throw SingularPrecisionError("feature-restricted specs have no population separation");
}

/// tr(Sigma_i A Sigma_j B) with A, B given in compact form.
template <typename Scalar>
Scalar trace_sandwich(const PopulationModelT<Scalar>& pop, std::size_t i,
                      const PrecisionSpecT<Scalar>& a, std::size_t j,
                      const PrecisionSpecT<Scalar>& b) {
    auto scale_cols = [](const Matrix<Scalar>& m, const PrecisionSpecT<Scalar>& s) {
        if (s.is_identity()) return m;
        if (s.is_scaled_identity()) return Matrix<Scalar>(s.as_scaled_identity().scale * m);
        if (s.is_diagonal())
            return Matrix<Scalar>(m * s.as_diagonal().values.asDiagonal());
        if (s.is_full()) return Matrix<Scalar>(m * (*s.as_full().precision));
        throw SingularPrecisionError("feature-restricted specs have no population separation");
    };
    const Matrix<Scalar> ma = scale_cols(pop.sigma(i), a);
    const Matrix<Scalar> mb = scale_cols(pop.sigma(j), b);
    return ma.cwiseProduct(mb.transpose()).sum();
}

}  // namespace detail

/// Expected score gap for class i against the other class (two classes):
/// mu12' A_{i'} mu12 + tr{Sigma_i (A_{i'} - A_i)} + log|A_{i'}^{-1} A_i|.
template <typename Scalar>
Scalar delta_i(const PopulationModelT<Scalar>& pop, const PrecisionSpecT<Scalar>& spec1,
               const PrecisionSpecT<Scalar>& spec2, std::size_t i) {
    if (pop.num_classes() != 2) throw DimensionError("delta_i: needs a two-class population");
    if (i > 1) throw DimensionError("delta_i: class index out of range");
    const auto& ai = (i == 0) ? spec1 : spec2;
    const auto& aip = (i == 0) ? spec2 : spec1;
    const Vector<Scalar> m12 = pop.mu12();
    return aip.quad(m12) + detail::trace_sigma_spec(pop, i, aip) -
           detail::trace_sigma_spec(pop, i, ai) + (ai.log_det() - aip.log_det());
}

/// mu12' A_{i'} Sigma_i A_{i'} mu12, the variance-driving quadratic form.
template <typename Scalar>
Scalar delta_iA(const PopulationModelT<Scalar>& pop, const PrecisionSpecT<Scalar>& spec1,
                const PrecisionSpecT<Scalar>& spec2, std::size_t i) {
    if (pop.num_classes() != 2) throw DimensionError("delta_iA: needs a two-class population");
    const auto& aip = (i == 0) ? spec2 : spec1;
    const Vector<Scalar> y = aip.apply(pop.mu12());
    return y.dot(pop.sigma(i) * y);
}

/// Asymptotic standard deviation of the score difference:
/// 2 { tr{(Sigma_i A_i)^2}/n_i + tr(Sigma_i A_{i'} Sigma_{i'} A_{i'})/n_{i'}
///     + delta_iA }^{1/2}, from the generic formula.
template <typename Scalar>
Scalar delta_small(const PopulationModelT<Scalar>& pop, const PrecisionSpecT<Scalar>& spec1,
                   const PrecisionSpecT<Scalar>& spec2, Index n1, Index n2, std::size_t i) {
    if (pop.num_classes() != 2) throw DimensionError("delta_small: needs a two-class population");
    if (n1 < 1 || n2 < 1) throw ConfigError("delta_small: sample sizes must be positive");
    const std::size_t ip = 1 - i;
    const auto& ai = (i == 0) ? spec1 : spec2;
    const auto& aip = (i == 0) ? spec2 : spec1;
    const Scalar ni = Scalar(i == 0 ? n1 : n2);
    const Scalar nip = Scalar(i == 0 ? n2 : n1);
    const Scalar own = detail::trace_sandwich(pop, i, ai, i, ai);
    const Scalar cross = detail::trace_sandwich(pop, i, aip, ip, aip);
    return Scalar(2) * std::sqrt(own / ni + cross / nip + delta_iA(pop, spec1, spec2, i));
}

// ---- Named forms for the four canonical choices. The scaled-identity form
// carries its own display with the (tr^2 ratio - 1) correction; tests check
// it against the generic route.

template <typename Scalar>
Scalar delta_choice(const PopulationModelT<Scalar>& pop, Choice choice, std::size_t i) {
    if (pop.num_classes() != 2) throw DimensionError("delta_choice: needs two classes");
    const std::size_t ip = 1 - i;
    const Vector<Scalar> m12 = pop.mu12();
    const Scalar p = Scalar(pop.dim());
    switch (choice) {
        case Choice::I:
            return m12.squaredNorm();
        case Choice::II: {
            const Scalar ti = pop.trace(i), tip = pop.trace(ip);
            return p * m12.squaredNorm() / tip + p * ti / tip - p + p * std::log(tip / ti);
        }
        case Choice::III: {
            const auto& di = pop.sigma_diag(i).array();
            const auto& dip = pop.sigma_diag(ip).array();
            return (m12.array().square() / dip + di / dip - 1 + (dip / di).log()).sum();
        }
        case Choice::IV: {
            const Vector<Scalar> y = pop.llt(ip).solve(m12);
            const Scalar quad = m12.dot(y);
            const Scalar tr = pop.llt(ip).solve(pop.sigma(i)).trace();
            return quad + tr - p + (pop.log_det(ip) - pop.log_det(i));
        }
    }
    throw ConfigError("delta_choice: unknown choice");
}

template <typename Scalar>
Scalar delta_iA_choice(const PopulationModelT<Scalar>& pop, Choice choice, std::size_t i) {
    const std::size_t ip = 1 - i;
    const Vector<Scalar> m12 = pop.mu12();
    switch (choice) {
        case Choice::I:
            return m12.dot(pop.sigma(i) * m12);
        case Choice::II: {
            const Scalar a = Scalar(pop.dim()) / pop.trace(ip);
            return a * a * m12.dot(pop.sigma(i) * m12);
        }
        case Choice::III: {
            const Vector<Scalar> y = (m12.array() / pop.sigma_diag(ip).array()).matrix();
            return y.dot(pop.sigma(i) * y);
        }
        case Choice::IV: {
            const Vector<Scalar> y = pop.llt(ip).solve(m12);
            return y.dot(pop.sigma(i) * y);
        }
    }
    throw ConfigError("delta_iA_choice: unknown choice");
}

template <typename Scalar>
Scalar delta_small_choice(const PopulationModelT<Scalar>& pop, Choice choice, Index n1, Index n2,
                          std::size_t i) {
    if (pop.num_classes() != 2) throw DimensionError("delta_small_choice: needs two classes");
    const std::size_t ip = 1 - i;
    const Scalar ni = Scalar(i == 0 ? n1 : n2);
    const Scalar nip = Scalar(i == 0 ? n2 : n1);
    const Vector<Scalar> m12 = pop.mu12();
    const Scalar p = Scalar(pop.dim());
    switch (choice) {
        case Choice::I: {
            const Scalar own = pop.sigma(i).squaredNorm();
            const Scalar cross = pop.sigma(i).cwiseProduct(pop.sigma(ip)).sum();
            return Scalar(2) * std::sqrt(own / ni + cross / nip + m12.dot(pop.sigma(i) * m12));
        }
        case Choice::II: {
            const Scalar ti = pop.trace(i), tip = pop.trace(ip);
            const Scalar d1 = delta_small_choice(pop, Choice::I, n1, n2, i);
            const Scalar correction =
                (pop.sigma(i).squaredNorm() / ni) * (tip * tip / (ti * ti) - 1);
            return (Scalar(2) * p / tip) * std::sqrt(d1 * d1 / Scalar(4) + correction);
        }
        case Choice::III: {
            const auto inv_di = pop.sigma_diag(i).cwiseInverse();
            const auto inv_dip = pop.sigma_diag(ip).cwiseInverse();
            const Matrix<Scalar> mi = pop.sigma(i) * inv_di.asDiagonal();
            const Scalar own = mi.cwiseProduct(mi.transpose()).sum();
            const Matrix<Scalar> ma = pop.sigma(i) * inv_dip.asDiagonal();
            const Matrix<Scalar> mb = pop.sigma(ip) * inv_dip.asDiagonal();
            const Scalar cross = ma.cwiseProduct(mb.transpose()).sum();
            const Vector<Scalar> y = (m12.array() * inv_dip.array()).matrix();
            return Scalar(2) * std::sqrt(own / ni + cross / nip + y.dot(pop.sigma(i) * y));
        }
        case Choice::IV: {
            const Scalar cross = pop.llt(ip).solve(pop.sigma(i)).trace();
            const Vector<Scalar> y = pop.llt(ip).solve(m12);
            return Scalar(2) *
                   std::sqrt(p / ni + cross / nip + y.dot(pop.sigma(i) * y));
        }
    }
    throw ConfigError("delta_small_choice: unknown choice");
}

/// Predicted error rate Phi(-delta / delta_small).
template <typename Scalar>
Scalar asymptotic_error(Scalar delta, Scalar delta_small_value) {
    if (!(delta_small_value > 0))
        throw ConfigError("asymptotic_error: delta_small must be positive");
    return norm_cdf(-delta / delta_small_value);
}

/// Phi(-sqrt(Delta_MD)/2) under a shared Gaussian covariance.
template <typename Scalar>
Scalar bayes_error_equal_cov(const PopulationModelT<Scalar>& pop) {
    if (pop.num_classes() != 2) throw DimensionError("bayes_error_equal_cov: needs two classes");
    if (((pop.sigma(0) - pop.sigma(1)).array().abs() > Scalar(1e-10)).any())
        throw ConfigError("bayes_error_equal_cov: covariances differ");
    const Vector<Scalar> m12 = pop.mu12();
    const Scalar mahalanobis = m12.dot(pop.llt(0).solve(m12));
    return norm_cdf(-std::sqrt(mahalanobis) / Scalar(2));
}

/// Phi(-Delta_IV / (2 sqrt(Delta_iA_IV))) for Gaussian classes with distinct
/// covariances.
template <typename Scalar>
Scalar bayes_error_unequal_cov_gaussian(const PopulationModelT<Scalar>& pop, std::size_t i) {
    const Scalar d = delta_choice(pop, Choice::IV, i);
    const Scalar da = delta_iA_choice(pop, Choice::IV, i);
    if (!(da > 0))
        throw DegenerateDataError("bayes_error_unequal_cov_gaussian: equal means, undefined ratio");
    return norm_cdf(-d / (Scalar(2) * std::sqrt(da)));
}

/// tr(Sigma^2)/tr(Sigma)^2; 1/p for isotropic matrices, near 1 when a single
/// eigenvalue dominates.
template <typename Scalar>
Scalar sphericity(const Matrix<Scalar>& sigma) {
    const Scalar tr = sigma.trace();
    return sigma.squaredNorm() / (tr * tr);
}

template <typename Scalar>
struct TheoryQuantitiesT {
    std::vector<Scalar> delta;
    std::vector<Scalar> delta_A;
    std::vector<Scalar> delta_small;
    std::vector<Scalar> asymptotic_error;
    std::optional<Scalar> mahalanobis;  // set when the covariances agree
    std::optional<Scalar> bayes_error;
};

using TheoryQuantities = TheoryQuantitiesT<double>;

template <typename Scalar>
TheoryQuantitiesT<Scalar> theory_quantities(const PopulationModelT<Scalar>& pop, Choice choice,
                                            Index n1, Index n2) {
    TheoryQuantitiesT<Scalar> out;
    for (std::size_t i = 0; i < 2; ++i) {
        out.delta.push_back(delta_choice(pop, choice, i));
        out.delta_A.push_back(delta_iA_choice(pop, choice, i));
        out.delta_small.push_back(delta_small_choice(pop, choice, n1, n2, i));
        out.asymptotic_error.push_back(asymptotic_error(out.delta[i], out.delta_small[i]));
    }
    if (!((pop.sigma(0) - pop.sigma(1)).array().abs() > Scalar(1e-10)).any()) {
        const Vector<Scalar> m12 = pop.mu12();
        out.mahalanobis = m12.dot(pop.llt(0).solve(m12));
        out.bayes_error = norm_cdf(-std::sqrt(*out.mahalanobis) / Scalar(2));
    }
    return out;
}

}  // namespace hdqc
