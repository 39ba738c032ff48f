#pragma once

// Discriminant matrix, the nearest-mean rule under D-hat, and the
// known-parameter optimal rule with its two-class error formula.

#include "sfda/error.hpp"
#include "sfda/linalg.hpp"
#include "sfda/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace sfda {

inline constexpr double kMaxGramCondition = 1e12;

/// K-hat with entries alpha_i' Sigma alpha_j.
inline Matrix gram_matrix(const Matrix& components, const Matrix& sigma_hat) {
    if (components.cols() != sigma_hat.rows() || sigma_hat.rows() != sigma_hat.cols())
        throw ValidationError("shape", "components and covariance dimensions disagree");
    Matrix g = components * sigma_hat * components.transpose();
    detail::symmetrize(g);
    return g;
}

/// Inverse of a symmetric gram matrix, refusing near-singular ones.
inline Matrix checked_gram_inverse(const Matrix& gram) {
    if (gram.rows() != gram.cols() || gram.rows() == 0)
        throw ValidationError("shape", "gram matrix must be square and nonempty");
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    if (es.info() != Eigen::Success) throw IllConditionedError(std::numeric_limits<double>::infinity());
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kMaxGramCondition)
        throw IllConditionedError(lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity());
    Matrix inv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    detail::symmetrize(inv);
    return inv;
}

/// D-hat = A' K^-1 A.
inline Matrix discriminant_matrix(const Matrix& components, const Matrix& gram) {
    if (gram.rows() != components.rows())
        throw ValidationError("shape", "gram size does not match the number of components");
    Matrix d = components.transpose() * checked_gram_inverse(gram) * components;
    detail::symmetrize(d);
    return d;
}

/// Fills gram, discriminant and the prediction cache from components and
/// summaries.within_cov.
inline void build_discriminant(DiscriminantModel& m) {
    m.gram = gram_matrix(m.components, m.summaries.within_cov);
    m.gram_inverse = checked_gram_inverse(m.gram);
    m.discriminant = m.components.transpose() * m.gram_inverse * m.components;
    detail::symmetrize(m.discriminant);
}

/// Distances (x - xbar_i)' D (x - xbar_i) evaluated in the (K-1)-dim
/// projected space, which is equivalent and costs O(Kp).
inline Vector class_distances(const DiscriminantModel& m, const Vector& x) {
    if (x.size() != m.dim()) throw ValidationError("shape", "observation length does not match the model");
    if (!x.allFinite()) throw ValidationError("non_finite", "observation has non-finite entries");
    const int K = m.num_classes();
    Vector d(K);
    for (int i = 0; i < K; ++i) {
        const Vector y = m.components * (x - m.summaries.class_means.row(i).transpose());
        d[i] = y.dot(m.gram_inverse * y);
    }
    return d;
}

/// Index (1-based) of the smallest entry; the first one wins ties.
inline int argmin_label(const Vector& d) {
    int best = 0;
    for (int i = 1; i < d.size(); ++i)
        if (d[i] < d[best]) best = i;
    return best + 1;
}

inline int classify(const DiscriminantModel& m, const Vector& x) { return argmin_label(class_distances(m, x)); }

inline std::vector<int> predict(const DiscriminantModel& m, const Matrix& observations) {
    std::vector<int> out(static_cast<std::size_t>(observations.rows()));
    for (Eigen::Index i = 0; i < observations.rows(); ++i)
        out[static_cast<std::size_t>(i)] = classify(m, observations.row(i).transpose());
    return out;
}

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct OptimalRuleSpec {
    Matrix true_means;  // K x p
    Matrix true_cov;
    Matrix true_D;      // optional; filled by diagnostics
};

/// argmin_i (x - mu_i)' Sigma^-1 (x - mu_i), with the covariance factored once.
class OptimalRule {
public:
    explicit OptimalRule(const OptimalRuleSpec& spec) : means_(spec.true_means) {
        if (spec.true_cov.rows() != means_.cols() || spec.true_cov.cols() != means_.cols())
            throw ValidationError("shape", "covariance does not match the means");
        llt_.compute(spec.true_cov);
        if (llt_.info() != Eigen::Success)
            throw DegenerateError("singular_covariance", "true covariance is not positive definite");
    }

    int operator()(const Vector& x) const {
        if (x.size() != means_.cols()) throw ValidationError("shape", "observation length does not match");
        Vector d(means_.rows());
        for (Eigen::Index i = 0; i < means_.rows(); ++i) {
            const Vector w = llt_.matrixL().solve(x - means_.row(i).transpose());
            d[i] = w.squaredNorm();
        }
        return argmin_label(d);
    }

private:
    Matrix means_;
    Eigen::LLT<Matrix> llt_;
};

inline int optimal_classify(const OptimalRuleSpec& spec, const Vector& x) { return OptimalRule(spec)(x); }

/// Phi(-delta'D delta / (2 sqrt(delta'D Sigma D delta))): error of the rule
/// based on D for two equiprobable Gaussian classes with common Sigma.
inline double two_class_error(const Vector& delta, const Matrix& d, const Matrix& sigma) {
    const Vector dd = d * delta;
    const double denom_sq = dd.dot(sigma * dd);
    if (!(denom_sq > 0.0)) throw DegenerateError("zero_denominator", "delta' D Sigma D delta is not positive");
    return normal_cdf(-delta.dot(dd) / (2.0 * std::sqrt(denom_sq)));
}

}  // namespace sfda
