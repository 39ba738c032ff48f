#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace sfda {

/// Error families; the CLI maps them onto process exit codes.
enum class ErrorCode {
    Validation = 2,
    Convergence = 3,
    Io = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string tag, const std::string& message)
        : std::runtime_error(message), code_(code), tag_(std::move(tag)) {}

    ErrorCode code() const noexcept { return code_; }
    /// Short machine-readable identifier, e.g. "empty_class".
    const std::string& tag() const noexcept { return tag_; }

private:
    ErrorCode code_;
    std::string tag_;
};

class ValidationError : public Error {
public:
    ValidationError(std::string tag, const std::string& message)
        : Error(ErrorCode::Validation, std::move(tag), message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error(ErrorCode::Io, "io", message) {}
};

/// A class label in 1..K with no observations.
class EmptyClassError : public ValidationError {
public:
    explicit EmptyClassError(int label)
        : ValidationError("empty_class", "class " + std::to_string(label) + " has no observations"),
          label_(label) {}
    int label() const noexcept { return label_; }

private:
    int label_;
};

/// Iterative solver hit its cap. Carries the last iterate so callers can inspect it.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, int iterations, double residual,
                     Eigen::VectorXd last_iterate = {})
        : Error(ErrorCode::Convergence, "no_convergence",
                what + " did not converge after " + std::to_string(iterations) +
                    " iterations (residual " + std::to_string(residual) + ")"),
          iterations_(iterations),
          residual_(residual),
          last_(std::move(last_iterate)) {}

    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }
    const Eigen::VectorXd& last_iterate() const noexcept { return last_; }

private:
    int iterations_;
    double residual_;
    Eigen::VectorXd last_;
};

/// Numerically degenerate problem instance (zero objective, singular block, ...).
class DegenerateError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Gram matrix of the fitted components is too close to singular to invert.
class IllConditionedError : public DegenerateError {
public:
    explicit IllConditionedError(double condition)
        : DegenerateError("ill_conditioned_gram",
                          "component gram matrix is near singular (condition estimate " +
                              std::to_string(condition) + ")"),
          condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// Linear-constraint stack lost rank while extracting component `index` (1-based).
class RankError : public ValidationError {
public:
    RankError(int index, const std::string& message)
        : ValidationError("rank_deficient_constraints",
                          "component " + std::to_string(index) + ": " + message),
          index_(index) {}
    int index() const noexcept { return index_; }

private:
    int index_;
};

}  // namespace sfda
