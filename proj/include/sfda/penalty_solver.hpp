#pragma once

// Solver for the penalized Rayleigh-quotient problem
//
//     max  a' Pi a   s.t.  a' C a + tau * ||a||_lambda^2 <= 1,  L a = 0,
//
// with ||a||_lambda^2 = (1 - lambda) ||a||_2^2 + lambda ||a||_1^2. The outer
// loop is a minorize-maximize ascent: each step maximizes the linear
// objective (Pi a_prev)' a over the same feasible set. That inner linear
// maximization is reduced, via degree-2 homogeneity of the constraint
// functional q, to the unconstrained-in-scale problem
//
//     min  q(a) - 2 c' a   s.t.  L a = 0,
//
// whose minimizer is rescaled onto q = 1. The reduced problem is solved by
// ADMM (quadratic + equality block / squared-l1 block) and finished with an
// exact active-set solve whose KKT conditions are verified before use.

#include "sfda/error.hpp"
#include "sfda/linalg.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <vector>

namespace sfda {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct PenaltySpec {
    double tau = 0.0;
    double lambda = 0.0;

    void validate() const {
        if (!(tau >= 0.0) || !std::isfinite(tau))
            throw ValidationError("penalty", "tau must be finite and nonnegative");
        if (!(lambda >= 0.0 && lambda <= 1.0))
            throw ValidationError("penalty", "lambda must lie in [0, 1]");
    }
};

/// Feasible set {a : a'Ca + tau ||a||_lambda^2 <= 1, La = 0}. `linear` may have zero rows.
struct ConstraintSet {
    Matrix quad;
    PenaltySpec penalty;
    Matrix linear;

    Eigen::Index dim() const noexcept { return quad.rows(); }

    void validate() const {
        penalty.validate();
        if (quad.rows() != quad.cols() || quad.rows() == 0)
            throw ValidationError("shape", "quadratic block must be square and nonempty");
        if (linear.rows() > 0) {
            if (linear.cols() != quad.rows())
                throw ValidationError("shape", "linear constraints must have p columns");
            if (linear.rows() >= linear.cols())
                throw ValidationError("shape", "need fewer linear constraints than dimensions");
        }
    }
};

enum class InitStrategy { LeadingRidgeEigvec, GivenVector, UnitCoordinateOfMaxDiag };

struct SolverConfig {
    int max_outer_iters = 500;
    int max_inner_iters = 10000;
    double tol_outer = 1e-7;  // relative change of the objective
    double tol_inner = 1e-8;  // scaled primal/dual residual
    InitStrategy init = InitStrategy::LeadingRidgeEigvec;
    Vector initial;  // used with InitStrategy::GivenVector

    void validate() const {
        if (max_outer_iters < 1 || max_inner_iters < 1)
            throw ValidationError("solver_config", "iteration caps must be at least 1");
        if (!(tol_outer > 0.0) || !(tol_inner > 0.0))
            throw ValidationError("solver_config", "tolerances must be positive");
    }
};

/// (1 - lambda) ||a||_2^2 + lambda ||a||_1^2
inline double penalty_norm_sq(const Vector& alpha, double lambda) {
    const double l1 = alpha.lpNorm<1>();
    return (1.0 - lambda) * alpha.squaredNorm() + lambda * l1 * l1;
}

/// q(a) = a'Ca + tau ||a||_lambda^2; homogeneous of degree two.
inline double q_form(const Vector& alpha, const ConstraintSet& cs) {
    if (alpha.size() != cs.quad.rows())
        throw ValidationError("shape", "vector length does not match the quadratic block");
    return alpha.dot(cs.quad * alpha) + cs.penalty.tau * penalty_norm_sq(alpha, cs.penalty.lambda);
}

/// argmin_x 1/2 ||x - v||^2 + eta ||x||_1^2.
///
/// The minimizer soft-thresholds v at theta = 2 eta ||x||_1. With support the
/// k largest |v_i|, theta_k = 2 eta S_k / (1 + 2 eta k) where S_k is their sum;
/// the answer uses the largest k with |v|_(k) > theta_k.
inline Vector prox_sq_l1(const Vector& v, double eta) {
    if (!(eta > 0.0)) throw ValidationError("prox", "eta must be positive");
    const auto p = v.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::abs(v[a]) > std::abs(v[b]);
    });
    double prefix = 0.0;
    double theta = 0.0;
    for (Eigen::Index k = 0; k < p; ++k) {
        const double mag = std::abs(v[order[static_cast<std::size_t>(k)]]);
        const double next = prefix + mag;
        const double candidate = 2.0 * eta * next / (1.0 + 2.0 * eta * static_cast<double>(k + 1));
        if (mag <= candidate) break;
        prefix = next;
        theta = candidate;
    }
    if (prefix == 0.0) return Vector::Zero(p);
    Vector out(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        const double mag = std::abs(v[i]) - theta;
        out[i] = mag > 0.0 ? std::copysign(mag, v[i]) : 0.0;
    }
    return out;
}

/// Eigen-factorization of the PSD quadratic block, used to apply
/// (2C + a I)^{-1} for any shift a in O(p r) where r = rank(C).
class SpectralFactor {
public:
    explicit SpectralFactor(const Matrix& quad, double rel_cut = 1e-12) : dim_(quad.rows()) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(quad);
        if (es.info() != Eigen::Success)
            throw DegenerateError("eigen_failure", "eigendecomposition of the quadratic block failed");
        const Vector& ev = es.eigenvalues();
        const double top = std::max(ev.maxCoeff(), 0.0);
        const double cut = top > 0.0 ? rel_cut * top : 0.0;
        Eigen::Index r = 0;
        for (Eigen::Index i = 0; i < ev.size(); ++i)
            if (ev[i] > cut) ++r;
        basis_ = es.eigenvectors().rightCols(r);
        values_ = ev.tail(r);
        trace_ = values_.sum();
    }

    Eigen::Index dim() const noexcept { return dim_; }
    Eigen::Index rank() const noexcept { return values_.size(); }
    bool full_rank() const noexcept { return rank() == dim_; }
    double trace() const noexcept { return trace_; }
    const Matrix& basis() const noexcept { return basis_; }
    const Vector& values() const noexcept { return values_; }

    /// Can (2C + shift I) be inverted?
    bool invertible(double shift) const noexcept {
        return shift > 0.0 || (full_rank() && rank() > 0);
    }

    /// (2C + shift I)^{-1} x
    template <typename Derived>
    Matrix apply_inverse(const Eigen::MatrixBase<Derived>& x, double shift) const {
        const Matrix coeffs = basis_.transpose() * x;
        const Vector scale = (2.0 * values_.array() + shift).inverse().matrix();
        Matrix out = basis_ * (scale.asDiagonal() * coeffs);
        if (!full_rank()) out += (x - basis_ * coeffs) / shift;
        return out;
    }

private:
    Eigen::Index dim_;
    Matrix basis_;
    Vector values_;
    double trace_ = 0.0;
};

struct LinearMaxResult {
    Vector alpha;      // maximizer, on the boundary q = 1
    double value = 0;  // c' alpha
    int inner_iterations = 0;
    double residual = 0;
    bool exact = false;  // closed-form or KKT-verified active-set solution
};

/// Stateful solver for max c'a over the constraint set; successive calls
/// warm-start from the previous solution, which is what the outer ascent needs.
class LinearMaxSolver {
public:
    LinearMaxSolver(ConstraintSet cs, SolverConfig cfg)
        : LinearMaxSolver(std::move(cs), nullptr, std::move(cfg)) {}

    /// `factor` must factor cs.quad; pass one to share it across solves.
    LinearMaxSolver(ConstraintSet cs, std::shared_ptr<const SpectralFactor> factor, SolverConfig cfg)
        : cs_(std::move(cs)), cfg_(std::move(cfg)), factor_(std::move(factor)) {
        cs_.validate();
        cfg_.validate();
        if (!factor_) factor_ = std::make_shared<SpectralFactor>(cs_.quad);
        if (factor_->dim() != cs_.dim())
            throw ValidationError("shape", "spectral factor does not match the quadratic block");
        ridge_ = cs_.penalty.tau * (1.0 - cs_.penalty.lambda);
        sq_l1_ = cs_.penalty.tau * cs_.penalty.lambda;
        const auto m = cs_.linear.rows();
        if (m > 0) {
            if (linalg::row_rank(cs_.linear) < m)
                throw DegenerateError("constraint_rank", "linear constraint rows are linearly dependent");
            gram_llt_.compute(cs_.linear * cs_.linear.transpose());
        }
    }

    const ConstraintSet& constraints() const noexcept { return cs_; }
    const SolverConfig& config() const noexcept { return cfg_; }
    const SpectralFactor& factor() const noexcept { return *factor_; }
    const std::shared_ptr<const SpectralFactor>& shared_factor() const noexcept { return factor_; }

    /// Orthogonal projection onto null(L).
    Vector project_null(const Vector& x) const {
        if (cs_.linear.rows() == 0) return x;
        return x - cs_.linear.transpose() * gram_llt_.solve(cs_.linear * x);
    }

    void reset_warm_start() { warm_.reset(); }

    LinearMaxResult solve(const Vector& c) {
        const auto p = cs_.dim();
        if (c.size() != p) throw ValidationError("shape", "objective length does not match p");
        if (!c.allFinite()) throw ValidationError("non_finite", "objective has non-finite entries");
        const double cnorm = c.norm();
        if (cnorm == 0.0 || project_null(c).norm() <= 1e-12 * cnorm)
            throw DegenerateError("degenerate_objective",
                                  "objective vanishes on the null space of the linear constraints");

        LinearMaxResult res;
        Vector tilde;
        if (sq_l1_ == 0.0) {
            // No squared-l1 term: the reduced problem is a linear KKT system.
            if (!factor_->invertible(2.0 * ridge_))
                throw DegenerateError("unbounded",
                                      "quadratic block is singular and carries no ridge term");
            tilde = kkt_solve(2.0 * c, 2.0 * ridge_);
            res.exact = true;
        } else {
            tilde = admm(c, res);
        }
        finish(c, tilde, res);
        return res;
    }

private:
    struct WarmState {
        Vector direction;  // last normalized maximizer
        double scale = 0;  // c'alpha of that solve
        Vector u;
        double rho = 0;
    };

    // Solves (2C + shift I) a + L' nu = rhs, L a = 0.
    Vector kkt_solve(const Vector& rhs, double shift) {
        Vector y = factor_->apply_inverse(rhs, shift);
        if (cs_.linear.rows() == 0) return y;
        if (!schur_ || schur_->shift != shift) {
            Schur s;
            s.shift = shift;
            s.w = factor_->apply_inverse(cs_.linear.transpose(), shift);
            s.llt.compute(cs_.linear * s.w);
            schur_ = std::move(s);
        }
        const Vector nu = schur_->llt.solve(cs_.linear * y);
        return y - schur_->w * nu;
    }

    Vector admm(const Vector& c, LinearMaxResult& res) {
        const auto p = cs_.dim();
        const Vector b = 2.0 * c;
        const double bnorm = b.norm();
        double rho;
        Vector z, u;
        if (warm_ && c.dot(warm_->direction) > 0.0) {
            const double s = c.dot(warm_->direction);
            z = s * warm_->direction;
            u = warm_->u * (s / warm_->scale);
            rho = warm_->rho;
        } else {
            z = Vector::Zero(p);
            u = Vector::Zero(p);
            rho = std::max(2.0 * (factor_->trace() / static_cast<double>(p) + ridge_), 1e-6);
        }

        std::vector<signed char> pattern(static_cast<std::size_t>(p), 0), prev_pattern(pattern);
        int stable = 0;
        int last_polish = -1000;
        double residual = std::numeric_limits<double>::infinity();
        Vector alpha(p);
        for (int k = 1; k <= cfg_.max_inner_iters; ++k) {
            alpha = kkt_solve(b + rho * (z - u), 2.0 * ridge_ + rho);
            const Vector z_old = z;
            z = prox_sq_l1(alpha + u, sq_l1_ / rho);
            u += alpha - z;

            const double r = (alpha - z).norm() / std::max({alpha.norm(), z.norm(), 1e-300});
            const double s = rho * (z - z_old).norm() / std::max({rho * u.norm(), bnorm, 1e-300});
            residual = std::max(r, s);

            prev_pattern.swap(pattern);
            for (Eigen::Index i = 0; i < p; ++i)
                pattern[static_cast<std::size_t>(i)] = z[i] > 0 ? 1 : (z[i] < 0 ? -1 : 0);
            stable = (pattern == prev_pattern) ? stable + 1 : 0;

            const bool converged = residual < cfg_.tol_inner;
            if ((stable >= 3 && k - last_polish >= 10) || converged) {
                last_polish = k;
                if (auto exact = polish(c, pattern)) {
                    res.inner_iterations = k;
                    res.residual = residual;
                    res.exact = true;
                    remember(c, *exact, u, rho);
                    return *exact;
                }
            }
            if (converged) {
                res.inner_iterations = k;
                res.residual = residual;
                Vector out = restrict_feasible(z, pattern);
                remember(c, out, u, rho);
                return out;
            }
            if (k % 10 == 0) {
                if (r > 10.0 * s) {
                    rho *= 2.0;
                    u /= 2.0;
                } else if (s > 10.0 * r) {
                    rho /= 2.0;
                    u *= 2.0;
                }
            }
        }
        warm_.reset();
        throw ConvergenceError("squared-l1 linear maximization", cfg_.max_inner_iters, residual, z);
    }

    void remember(const Vector& c, const Vector& tilde, const Vector& u, double rho) {
        const double q = q_form(tilde, cs_);
        if (!(q > 0.0)) {
            warm_.reset();
            return;
        }
        WarmState w;
        w.direction = tilde / std::sqrt(q);
        w.scale = c.dot(w.direction);
        w.u = u;
        w.rho = rho;
        if (w.scale > 0.0)
            warm_ = std::move(w);
        else
            warm_.reset();
    }

    // Exact minimizer on the sign pattern of the ADMM iterate, if it passes the
    // full KKT check of the reduced problem.
    std::optional<Vector> polish(const Vector& c, const std::vector<signed char>& pattern) const {
        const auto p = cs_.dim();
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < p; ++i)
            if (pattern[static_cast<std::size_t>(i)] != 0) idx.push_back(i);
        const auto k = static_cast<Eigen::Index>(idx.size());
        const auto m = cs_.linear.rows();
        if (k == 0 || k <= m) return std::nullopt;

        Matrix h(k, k);
        Vector sgn(k), cs(k);
        for (Eigen::Index a = 0; a < k; ++a) {
            sgn[a] = pattern[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
            cs[a] = c[idx[static_cast<std::size_t>(a)]];
            for (Eigen::Index b2 = 0; b2 < k; ++b2)
                h(a, b2) = cs_.quad(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b2)]);
        }
        h.diagonal().array() += ridge_;
        h += sq_l1_ * sgn * sgn.transpose();
        Eigen::LLT<Matrix> llt(h);
        if (llt.info() != Eigen::Success) return std::nullopt;

        Vector nu = Vector::Zero(m);
        Vector alpha_s = llt.solve(cs);
        if (m > 0) {
            Matrix ls(m, k);
            for (Eigen::Index a = 0; a < k; ++a) ls.col(a) = cs_.linear.col(idx[static_cast<std::size_t>(a)]);
            const Matrix y = llt.solve(ls.transpose());
            Eigen::LLT<Matrix> g(ls * y);
            if (g.info() != Eigen::Success) return std::nullopt;
            nu = g.solve(ls * alpha_s);
            alpha_s -= y * nu;
        }
        for (Eigen::Index a = 0; a < k; ++a)
            if (!(alpha_s[a] * sgn[a] > 0.0)) return std::nullopt;

        Vector alpha = Vector::Zero(p);
        for (Eigen::Index a = 0; a < k; ++a) alpha[idx[static_cast<std::size_t>(a)]] = alpha_s[a];
        Vector grad = c - ridge_ * alpha;
        for (Eigen::Index a = 0; a < k; ++a)
            grad.noalias() -= cs_.quad.col(idx[static_cast<std::size_t>(a)]) * alpha_s[a];
        if (m > 0) grad.noalias() -= cs_.linear.transpose() * nu;
        const double bound = sq_l1_ * alpha.lpNorm<1>();
        const double slack = 1e-10 * std::max(bound, c.cwiseAbs().maxCoeff());
        for (Eigen::Index i = 0; i < p; ++i)
            if (pattern[static_cast<std::size_t>(i)] == 0 && std::abs(grad[i]) > bound + slack)
                return std::nullopt;
        return alpha;
    }

    // Moves a sparse iterate onto L a = 0 without leaving its support.
    Vector restrict_feasible(const Vector& z, const std::vector<signed char>& pattern) const {
        const auto m = cs_.linear.rows();
        if (m == 0) return z;
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < z.size(); ++i)
            if (pattern[static_cast<std::size_t>(i)] != 0) idx.push_back(i);
        const auto k = static_cast<Eigen::Index>(idx.size());
        Matrix ls(m, k);
        Vector zs(k);
        for (Eigen::Index a = 0; a < k; ++a) {
            ls.col(a) = cs_.linear.col(idx[static_cast<std::size_t>(a)]);
            zs[a] = z[idx[static_cast<std::size_t>(a)]];
        }
        Eigen::LLT<Matrix> g(ls * ls.transpose());
        if (k <= m || g.info() != Eigen::Success) return project_null(z);
        zs -= ls.transpose() * g.solve(ls * zs);
        Vector out = Vector::Zero(z.size());
        for (Eigen::Index a = 0; a < k; ++a) out[idx[static_cast<std::size_t>(a)]] = zs[a];
        return out;
    }

    void finish(const Vector& c, Vector tilde, LinearMaxResult& res) {
        if (cs_.linear.rows() > 0 && res.exact) {
            // Remove round-off drift from L a = 0 on the current support.
            std::vector<signed char> pattern(static_cast<std::size_t>(tilde.size()));
            for (Eigen::Index i = 0; i < tilde.size(); ++i)
                pattern[static_cast<std::size_t>(i)] = tilde[i] != 0.0 ? 1 : 0;
            tilde = restrict_feasible(tilde, pattern);
        }
        const double q = q_form(tilde, cs_);
        if (!(q > 0.0) || !std::isfinite(q))
            throw DegenerateError("degenerate_objective", "linear maximization returned a null direction");
        res.alpha = tilde / std::sqrt(q);
        res.value = c.dot(res.alpha);
    }

    struct Schur {
        double shift = 0;
        Matrix w;
        Eigen::LLT<Matrix> llt;
    };

    ConstraintSet cs_;
    SolverConfig cfg_;
    std::shared_ptr<const SpectralFactor> factor_;
    double ridge_ = 0;
    double sq_l1_ = 0;
    Eigen::LLT<Matrix> gram_llt_;
    std::optional<Schur> schur_;
    std::optional<WarmState> warm_;
};

/// Stateless form of LinearMaxSolver::solve.
inline LinearMaxResult solve_linear_max(const Vector& c, const ConstraintSet& cs, const SolverConfig& cfg) {
    LinearMaxSolver solver(cs, cfg);
    return solver.solve(c);
}

struct RayleighResult {
    Vector alpha;
    double value = 0;  // alpha' Pi alpha
    int iterations = 0;
    /// Objective after every outer step, including a final step that was not
    /// accepted because it failed to ascend.
    std::vector<double> trace;
};

namespace detail {

inline Vector ridge_leading_direction(const Matrix& pi, LinearMaxSolver& solver) {
    const auto& cs = solver.constraints();
    const auto p = cs.dim();
    Eigen::Index j = 0;
    pi.diagonal().maxCoeff(&j);
    Vector v = solver.project_null(pi.col(j));
    if (v.norm() == 0.0) v = solver.project_null(Vector::Ones(p));
    if (v.norm() == 0.0) return v;
    v.normalize();

    // Power iteration for the leading eigenvector of Pi on null(L) in the
    // metric of the ridge quadratic C + tau I (identity when that is singular).
    ConstraintSet ridge{cs.quad, {cs.penalty.tau, 0.0}, cs.linear};
    const bool metric = solver.factor().invertible(2.0 * cs.penalty.tau);
    std::optional<LinearMaxSolver> ridge_solver;
    if (metric) ridge_solver.emplace(ridge, solver.shared_factor(), solver.config());
    double prev = -1.0;
    for (int it = 0; it < 100; ++it) {
        const Vector c = pi * v;
        if (solver.project_null(c).norm() <= 1e-12 * std::max(c.norm(), 1e-300)) break;
        Vector next = metric ? ridge_solver->solve(c).alpha : solver.project_null(c);
        next.normalize();
        const double value = next.dot(pi * next);
        v = next;
        if (prev > 0.0 && std::abs(value - prev) <= 1e-10 * value) break;
        prev = value;
    }
    return v;
}

}  // namespace detail

/// Minorize-maximize ascent on a' Pi a over the penalized feasible set. The
/// sequence of objectives is nondecreasing when the inner solves are exact.
inline RayleighResult maximize_rayleigh(const Matrix& pi, LinearMaxSolver& solver) {
    const auto& cfg = solver.config();
    const auto p = solver.constraints().dim();
    if (pi.rows() != p || pi.cols() != p)
        throw ValidationError("shape", "objective matrix does not match the constraint set");

    Vector alpha;
    switch (cfg.init) {
        case InitStrategy::GivenVector:
            if (cfg.initial.size() != p)
                throw ValidationError("init", "initial vector has the wrong length");
            alpha = cfg.initial;
            break;
        case InitStrategy::UnitCoordinateOfMaxDiag: {
            Eigen::Index j = 0;
            pi.diagonal().maxCoeff(&j);
            alpha = Vector::Unit(p, j);
            break;
        }
        case InitStrategy::LeadingRidgeEigvec:
            alpha = detail::ridge_leading_direction(pi, solver);
            break;
    }
    Vector c = pi * alpha;
    const double scale = std::max(pi.cwiseAbs().maxCoeff(), 1e-300) * std::max(alpha.norm(), 1e-300);
    if (alpha.size() == 0 || c.norm() <= 1e-14 * scale || c.norm() == 0.0)
        throw DegenerateError("init", "initial vector lies in the null space of the objective matrix");

    solver.reset_warm_start();
    RayleighResult res;
    alpha = solver.solve(c).alpha;
    double value = alpha.dot(pi * alpha);
    res.trace.push_back(value);
    for (int it = 1; it <= cfg.max_outer_iters; ++it) {
        c = pi * alpha;
        const Vector next = solver.solve(c).alpha;
        const double next_value = next.dot(pi * next);
        res.trace.push_back(next_value);
        res.iterations = it;
        if (next_value < value) break;  // inexact step at the fixed point; keep the previous iterate
        const double change = (next_value - value) / std::max(std::abs(next_value), 1e-300);
        alpha = next;
        value = next_value;
        if (change < cfg.tol_outer) {
            linalg::fix_sign(alpha);
            res.alpha = std::move(alpha);
            res.value = value;
            return res;
        }
        if (it == cfg.max_outer_iters)
            throw ConvergenceError("penalized Rayleigh ascent", it, change, alpha);
    }
    linalg::fix_sign(alpha);
    res.alpha = std::move(alpha);
    res.value = value;
    return res;
}

inline RayleighResult maximize_rayleigh(const Matrix& pi, const ConstraintSet& cs, const SolverConfig& cfg) {
    LinearMaxSolver solver(cs, cfg);
    return maximize_rayleigh(pi, solver);
}

}  // namespace sfda
