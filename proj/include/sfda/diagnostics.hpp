#pragma once

// Population-level objects for known (Sigma, means) and the empirical trend
// experiments built on them.

#include "sfda/classifier.hpp"
#include "sfda/error.hpp"
#include "sfda/estimators.hpp"
#include "sfda/linalg.hpp"
#include "sfda/parallel.hpp"
#include "sfda/sfda_core.hpp"
#include "sfda/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <vector>

namespace sfda {

struct TheoryContext {
    Matrix sigma;
    Matrix means;           // as given
    Matrix centered_means;  // rows sum to zero
    bool auto_centered = false;
    Matrix between;         // B = U U' / K from the centered means
    Matrix xi;              // Sigma^-1/2 B Sigma^-1/2
    Vector eigvals;         // leading K-1 eigenvalues of xi, descending
    Matrix components;      // (K-1) x p, alpha_k = Sigma^-1/2 gamma_k
    Matrix gammas;          // (K-1) x p, orthonormal eigenvectors of xi
    Matrix d;               // sum_k alpha_k alpha_k'
    double lambda_p = 0;    // max_k max(||alpha_k||_1, ||Sigma alpha_k||_1)

    int num_classes() const noexcept { return static_cast<int>(means.rows()); }
    Eigen::Index dim() const noexcept { return sigma.rows(); }
};

/// sqrt(K log p / n)
inline double rate_scale(int K, Eigen::Index p, Eigen::Index n) {
    return std::sqrt(K * std::log(static_cast<double>(p)) / static_cast<double>(n));
}

inline TheoryContext build_theory(const Matrix& sigma, const Matrix& means) {
    const auto p = sigma.rows();
    const auto K = static_cast<int>(means.rows());
    if (sigma.cols() != p || means.cols() != p) throw ValidationError("shape", "sigma and means disagree in p");
    if (K < 2) throw ValidationError("classes", "need at least two class means");
    if (p > 2000) throw ValidationError("shape", "dense theory objects are limited to p <= 2000");
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success) throw DegenerateError("singular_covariance", "sigma is not positive definite");

    TheoryContext ctx;
    ctx.sigma = sigma;
    ctx.means = means;
    const Eigen::RowVectorXd centre = means.colwise().mean();
    ctx.auto_centered = centre.cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, means.cwiseAbs().maxCoeff());
    ctx.centered_means = means.rowwise() - centre;
    ctx.between = ctx.centered_means.transpose() * ctx.centered_means / static_cast<double>(K);

    const Matrix inv_half = linalg::sym_power(sigma, -0.5);
    ctx.xi = inv_half * ctx.between * inv_half;
    detail::symmetrize(ctx.xi);
    const auto eig = linalg::eigen_descending(ctx.xi);
    const double tol = 1e-10 * std::max(1.0, eig.values.cwiseAbs().maxCoeff());
    if (eig.values[K - 2] <= tol)
        throw DegenerateError("rank", "fewer than K-1 positive eigenvalues in the between-class structure");
    ctx.eigvals = eig.values.head(K - 1);
    ctx.gammas.resize(K - 1, p);
    ctx.components.resize(K - 1, p);
    for (int k = 0; k < K - 1; ++k) {
        Vector a = inv_half * eig.vectors.col(k);
        linalg::fix_sign(a);
        ctx.components.row(k) = a.transpose();
        ctx.gammas.row(k) = (linalg::sym_power(sigma, 0.5) * a).transpose();
        ctx.lambda_p = std::max({ctx.lambda_p, a.lpNorm<1>(), (sigma * a).lpNorm<1>()});
    }
    ctx.d = ctx.components.transpose() * ctx.components;
    return ctx;
}

inline OptimalRuleSpec optimal_rule_spec(const TheoryContext& ctx) { return {ctx.means, ctx.sigma, ctx.d}; }

/// Conditional error of a two-class linear rule built from sample means and
/// D-hat, for Gaussian classes N(mu_i, Sigma) with equal priors.
inline double conditional_error_two_class(const Matrix& sigma, const Vector& mu1, const Vector& mu2,
                                          const Matrix& d_hat, const Vector& xbar1, const Vector& xbar2) {
    const Vector w = d_hat * (xbar2 - xbar1);  // D-hat delta-hat
    const double denom_sq = w.dot(sigma * w);
    if (!(denom_sq > 0.0)) throw DegenerateError("zero_denominator", "delta' D Sigma D delta is not positive");
    const double denom = 2.0 * std::sqrt(denom_sq);
    return 0.5 * normal_cdf(-w.dot(2.0 * mu2 - xbar1 - xbar2) / denom) +
           0.5 * normal_cdf(-w.dot(xbar1 + xbar2 - 2.0 * mu1) / denom);
}

inline double conditional_error_two_class(const TheoryContext& ctx, const DiscriminantModel& m) {
    if (ctx.num_classes() != 2 || m.num_classes() != 2)
        throw ValidationError("classes", "conditional error formula needs two classes");
    return conditional_error_two_class(ctx.sigma, ctx.means.row(0).transpose(), ctx.means.row(1).transpose(),
                                       m.discriminant, m.summaries.class_means.row(0).transpose(),
                                       m.summaries.class_means.row(1).transpose());
}

/// Error of the optimal rule for two classes.
inline double optimal_error_two_class(const TheoryContext& ctx) {
    if (ctx.num_classes() != 2) throw ValidationError("classes", "needs two classes");
    return two_class_error(ctx.means.row(1).transpose() - ctx.means.row(0).transpose(), ctx.d, ctx.sigma);
}

/// Gaussian classes sharing one covariance.
struct CommonCovModel {
    Matrix means;
    Matrix cov;
};

/// Three classes with means N(k, 1) on coordinates 1-10 (and 101-110 when
/// p >= 110), covariance blocks 0.6^|j-j'| sigma2 of size 100.
inline CommonCovModel sim2_like(int p, std::uint64_t mean_seed, double sigma2 = 1.0) {
    if (p < 10) throw ValidationError("shape", "need p >= 10");
    CommonCovModel m;
    m.means = Matrix::Zero(3, p);
    auto gen = rng::stream(mean_seed, rng::Purpose::Means);
    for (int k = 0; k < 3; ++k) {
        boost::random::normal_distribution<double> draw(k + 1.0, 1.0);
        for (int j = 0; j < p; ++j)
            if (j < 10 || (j >= 100 && j < 110)) m.means(k, j) = draw(gen);
    }
    m.cov = detail::block_cov(p, 100, [&](int a, int b) { return std::pow(0.6, std::abs(a - b)) * sigma2; });
    return m;
}

struct TrendConfig {
    std::vector<int> n_list{100, 400, 1600};
    int seeds = 20;
    std::uint64_t seed = 0;
    double tau_scale = 1.0;    // tau = tau_scale * s_n
    double lambda = 0.1;
    double kappa_scale = 0.1;  // kappa = kappa_scale * lambda_1(Xi) * Lambda_p * s_n (absolute)
    SolverConfig solver;
    int threads = 1;
};

inline FitParams trend_params(const TrendConfig& cfg, const TheoryContext& ctx, int n) {
    const double sn = rate_scale(ctx.num_classes(), ctx.dim(), n);
    FitParams params;
    params.penalty = {cfg.tau_scale * sn, cfg.lambda};
    params.kappa = cfg.kappa_scale * ctx.eigvals[0] * ctx.lambda_p * sn;
    params.kappa_scale = KappaScale::Absolute;
    params.solver = cfg.solver;
    return params;
}

struct ConsistencyRow {
    int n = 0;
    double s_n = 0;
    double lambda_p = 0;
    double median_alpha_error = 0;  // ||alpha-hat_1 - alpha_1||_2, sign aligned
    double median_q_error = 0;      // ||Q-hat_1 - Q_1|| operator norm
    int failures = 0;
};

inline double median(std::vector<double> v) {
    v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const auto h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// For each n, fits `seeds` datasets drawn from the model and reports median
/// distances of the first component and of the first constraint subspace.
inline std::vector<ConsistencyRow> consistency_experiment(const CommonCovModel& model, const TrendConfig& cfg) {
    const auto ctx = build_theory(model.cov, model.means);
    const Vector xi1 = ctx.between * ctx.components.row(0).transpose();
    const Matrix q1 = linalg::row_space_projector(xi1.transpose());
    const std::size_t nn = cfg.n_list.size(), ns = static_cast<std::size_t>(cfg.seeds);
    std::vector<double> alpha_err(nn * ns, std::numeric_limits<double>::quiet_NaN()), q_err = alpha_err;

    parallel_for(nn * ns, cfg.threads, [&](std::size_t cell) {
        const int n = cfg.n_list[cell / ns];
        auto gen = rng::stream(cfg.seed, rng::Purpose::Experiment, cell);
        try {
            const auto data = sample_gaussian_classes(model.means, model.cov, n, gen);
            const auto s = summarize(data);
            const auto params = trend_params(cfg, ctx, n);
            Vector a = first_component(s, params);
            if (a.dot(ctx.components.row(0).transpose()) < 0) a = -a;
            alpha_err[cell] = (a - ctx.components.row(0).transpose()).norm();
            const Vector xi_hat = threshold_constraint(s.between_cov, a, params.kappa);
            if (!xi_hat.isZero(0.0))
                q_err[cell] = linalg::sym_operator_norm(linalg::row_space_projector(xi_hat.transpose()) - q1);
        } catch (const Error&) {
        }
    });

    std::vector<ConsistencyRow> rows;
    for (std::size_t i = 0; i < nn; ++i) {
        ConsistencyRow r;
        r.n = cfg.n_list[i];
        r.s_n = rate_scale(ctx.num_classes(), ctx.dim(), r.n);
        r.lambda_p = ctx.lambda_p;
        std::vector<double> a(alpha_err.begin() + static_cast<long>(i * ns), alpha_err.begin() + static_cast<long>((i + 1) * ns));
        std::vector<double> q(q_err.begin() + static_cast<long>(i * ns), q_err.begin() + static_cast<long>((i + 1) * ns));
        r.failures = static_cast<int>(std::count_if(a.begin(), a.end(), [](double x) { return std::isnan(x); }));
        r.median_alpha_error = median(a);
        r.median_q_error = median(q);
        rows.push_back(r);
    }
    return rows;
}

struct OptimalityRow {
    int n = 0;
    double r_opt = 0;
    double median_excess = 0;  // median of R(X) / R_OPT - 1
    int failures = 0;
};

/// Two-class version: how far the fitted rule's conditional error is above
/// the optimal error, as n grows.
inline std::vector<OptimalityRow> optimality_experiment(const CommonCovModel& model, const TrendConfig& cfg) {
    if (model.means.rows() != 2) throw ValidationError("classes", "optimality experiment needs two classes");
    const auto ctx = build_theory(model.cov, model.means);
    const double r_opt = optimal_error_two_class(ctx);
    const std::size_t nn = cfg.n_list.size(), ns = static_cast<std::size_t>(cfg.seeds);
    std::vector<double> excess(nn * ns, std::numeric_limits<double>::quiet_NaN());
    parallel_for(nn * ns, cfg.threads, [&](std::size_t cell) {
        const int n = cfg.n_list[cell / ns];
        auto gen = rng::stream(cfg.seed, rng::Purpose::Experiment, cell);
        try {
            const auto data = sample_gaussian_classes(model.means, model.cov, n, gen);
            const auto m = fit(data, trend_params(cfg, ctx, n));
            excess[cell] = conditional_error_two_class(ctx, m) / r_opt - 1.0;
        } catch (const Error&) {
        }
    });
    std::vector<OptimalityRow> rows;
    for (std::size_t i = 0; i < nn; ++i) {
        OptimalityRow r;
        r.n = cfg.n_list[i];
        r.r_opt = r_opt;
        std::vector<double> e(excess.begin() + static_cast<long>(i * ns), excess.begin() + static_cast<long>((i + 1) * ns));
        r.failures = static_cast<int>(std::count_if(e.begin(), e.end(), [](double x) { return std::isnan(x); }));
        r.median_excess = median(e);
        rows.push_back(r);
    }
    return rows;
}

inline void write_consistency_csv(std::ostream& os, const std::vector<ConsistencyRow>& rows) {
    os << "n,s_n,lambda_p,median_alpha_error,median_q_error,failures\n";
    os.precision(10);
    for (const auto& r : rows)
        os << r.n << ',' << r.s_n << ',' << r.lambda_p << ',' << r.median_alpha_error << ',' << r.median_q_error << ','
           << r.failures << '\n';
}

inline void write_optimality_csv(std::ostream& os, const std::vector<OptimalityRow>& rows) {
    os << "n,r_opt,median_excess,failures\n";
    os.precision(10);
    for (const auto& r : rows) os << r.n << ',' << r.r_opt << ',' << r.median_excess << ',' << r.failures << '\n';
}

}  // namespace sfda
