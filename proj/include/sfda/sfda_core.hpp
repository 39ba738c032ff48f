#pragma once

// Sequential extraction of sparse discriminant components. Component 1
// maximizes a'Ba over a'Sa + tau ||a||_lambda^2 <= 1; component i adds the
// equality constraints xi_j' a = 0 for j < i, where xi_j is B alpha_j after
// soft thresholding (or untouched, for the unthresholded variant).

#include "sfda/classifier.hpp"
#include "sfda/error.hpp"
#include "sfda/estimators.hpp"
#include "sfda/linalg.hpp"
#include "sfda/model.hpp"
#include "sfda/penalty_solver.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sfda {

namespace detail {

inline std::shared_ptr<const SpectralFactor> factor_or_new(const ClassSummaries& s,
                                                           std::shared_ptr<const SpectralFactor> factor) {
    if (factor) return factor;
    return std::make_shared<SpectralFactor>(s.within_cov);
}

inline void require_classes(const ClassSummaries& s) {
    if (s.num_classes() < 2) throw ValidationError("classes", "need at least two classes");
}

}  // namespace detail

inline Vector first_component(const ClassSummaries& s, const FitParams& params,
                              std::shared_ptr<const SpectralFactor> factor = nullptr) {
    params.validate();
    detail::require_classes(s);
    ConstraintSet cs{s.within_cov, params.penalty, Matrix(0, s.dim())};
    LinearMaxSolver solver(cs, detail::factor_or_new(s, std::move(factor)), params.solver);
    return maximize_rayleigh(s.between_cov, solver).alpha;
}

/// argmin_xi ||v - xi||^2 + kappa ||xi||_1 with v = B alpha, i.e. soft
/// thresholding of v at kappa / 2.
inline Vector threshold_constraint(const Matrix& b_hat, const Vector& alpha, double kappa) {
    if (!(kappa >= 0.0)) throw ValidationError("kappa", "kappa must be nonnegative");
    const Vector v = b_hat * alpha;
    const double t = 0.5 * kappa;
    return v.unaryExpr([t](double x) {
        const double a = std::abs(x);
        return a >= t ? std::copysign(a - t, x) : 0.0;
    });
}

/// The absolute threshold FitParams implies for constraint vector B alpha.
inline double effective_kappa(const FitParams& params, const Vector& b_alpha) {
    return params.kappa_scale == KappaScale::Absolute ? params.kappa : params.kappa * b_alpha.lpNorm<1>();
}

/// Constraint vector derived from alpha under the chosen variant.
inline Vector constraint_vector(const Matrix& b_hat, const Vector& alpha, const FitParams& params) {
    if (params.variant == Variant::Unthresholded) return b_hat * alpha;
    return threshold_constraint(b_hat, alpha, effective_kappa(params, b_hat * alpha));
}

/// Next component orthogonal to every row of `constraints`.
inline Vector next_component(const ClassSummaries& s, const Matrix& constraints, const FitParams& params,
                             std::shared_ptr<const SpectralFactor> factor = nullptr) {
    params.validate();
    detail::require_classes(s);
    const int index = static_cast<int>(constraints.rows()) + 1;
    if (constraints.cols() != s.dim()) throw ValidationError("shape", "constraint vectors must have length p");
    if (constraints.rows() >= s.dim())
        throw RankError(index, "more constraint vectors than dimensions");
    for (Eigen::Index j = 0; j < constraints.rows(); ++j)
        if (constraints.row(j).isZero(0.0))
            throw RankError(index, "constraint vector " + std::to_string(j + 1) + " is zero");
    if (linalg::row_rank(constraints) < constraints.rows())
        throw RankError(index, "constraint vectors are linearly dependent");
    ConstraintSet cs{s.within_cov, params.penalty, constraints};
    LinearMaxSolver solver(cs, detail::factor_or_new(s, std::move(factor)), params.solver);
    return maximize_rayleigh(s.between_cov, solver).alpha;
}

/// Completes a model whose first component is already known.
inline DiscriminantModel fit_from_first(const ClassSummaries& s, const Vector& alpha1, const FitParams& params,
                                        std::shared_ptr<const SpectralFactor> factor = nullptr) {
    params.validate();
    detail::require_classes(s);
    factor = detail::factor_or_new(s, std::move(factor));
    const int K = s.num_classes();
    const auto p = s.dim();
    DiscriminantModel m;
    m.params = params;
    m.summaries = s;
    m.components.resize(K - 1, p);
    m.constraints.resize(K - 2, p);
    m.components.row(0) = alpha1.transpose();
    for (int i = 1; i < K - 1; ++i) {
        m.constraints.row(i - 1) = constraint_vector(s.between_cov, m.components.row(i - 1).transpose(), params).transpose();
        m.components.row(i) = next_component(s, m.constraints.topRows(i), params, factor).transpose();
    }
    build_discriminant(m);
    return m;
}

inline DiscriminantModel fit(const ClassSummaries& s, const FitParams& params,
                             std::shared_ptr<const SpectralFactor> factor = nullptr) {
    factor = detail::factor_or_new(s, std::move(factor));
    return fit_from_first(s, first_component(s, params, factor), params, factor);
}

inline DiscriminantModel fit(const LabeledDataset& data, const FitParams& params) {
    params.validate();
    return fit(summarize(data), params);
}

/// Outcome of one fit within a batch; failures are kept rather than thrown.
struct FitOutcome {
    std::optional<DiscriminantModel> model;
    std::string error;
};

/// Fits every kappa in `kappas` for one (tau, lambda), computing the shared
/// first component once.
inline std::vector<FitOutcome> fit_kappa_path(const ClassSummaries& s, const FitParams& base,
                                              const std::vector<double>& kappas,
                                              std::shared_ptr<const SpectralFactor> factor = nullptr) {
    std::vector<FitOutcome> out(kappas.size());
    factor = detail::factor_or_new(s, std::move(factor));
    Vector alpha1;
    try {
        alpha1 = first_component(s, base, factor);
    } catch (const Error& e) {
        for (auto& o : out) o.error = e.what();
        return out;
    }
    for (std::size_t k = 0; k < kappas.size(); ++k) {
        FitParams params = base;
        params.kappa = kappas[k];
        try {
            out[k].model = fit_from_first(s, alpha1, params, factor);
        } catch (const Error& e) {
            out[k].error = e.what();
        }
    }
    return out;
}

}  // namespace sfda
