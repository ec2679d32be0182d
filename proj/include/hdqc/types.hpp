#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hdqc {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shape or dimension mismatch between inputs.
struct DimensionError : Error {
    using Error::Error;
};

/// Too few observations for the requested statistic or classifier.
struct InsufficientSamplesError : Error {
    using Error::Error;
};

/// Data itself is unusable: zero traces, zero-variance coordinates, non-finite entries.
struct DegenerateDataError : Error {
    using Error::Error;
};

/// A matrix that must be positive definite is not (Cholesky failed).
struct SingularPrecisionError : Error {
    using Error::Error;
};

/// Invalid parameter or configuration value.
struct ConfigError : Error {
    using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw DimensionError(msg);
}

}  // namespace detail

}  // namespace hdqc
