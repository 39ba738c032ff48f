#pragma once

// Exhaustive stratified cross-validation over (tau, lambda, kappa factor).

#include "sfda/classifier.hpp"
#include "sfda/error.hpp"
#include "sfda/estimators.hpp"
#include "sfda/parallel.hpp"
#include "sfda/sfda_core.hpp"
#include "sfda/simgen.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

namespace sfda {

struct TuningGrid {
    std::vector<double> taus{0.5, 1.0, 5.0, 10.0};
    std::vector<double> lambdas{0.01, 0.05, 0.1, 0.2, 0.3, 0.4};
    std::vector<double> kappa_factors{0.0, 0.001, 0.01};
    int folds = 5;
    std::uint64_t seed = 0;

    void validate() const {
        if (taus.empty() || lambdas.empty() || kappa_factors.empty())
            throw ValidationError("grid", "every grid axis needs at least one value");
        for (double t : taus)
            if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("grid", "tau values must be nonnegative");
        for (double l : lambdas)
            if (!(l >= 0.0 && l <= 1.0)) throw ValidationError("grid", "lambda values must lie in [0, 1]");
        for (double k : kappa_factors)
            if (!(k >= 0.0) || !std::isfinite(k)) throw ValidationError("grid", "kappa factors must be nonnegative");
        if (folds < 2) throw ValidationError("grid", "need at least two folds");
    }

    std::size_t size() const { return taus.size() * lambdas.size() * kappa_factors.size(); }
};

struct CvRow {
    double tau = 0;
    double lambda = 0;
    double kappa_factor = 0;
    double mean_error = 0;  // NaN when some fold failed to fit
    double sd_error = 0;
    int failures = 0;
};

struct CvResult {
    FitParams best;
    std::size_t best_row = 0;
    std::vector<CvRow> table;
};

/// Fold index (0-based) per observation. Each class is shuffled and dealt
/// round-robin, continuing the deal across classes so fold sizes stay even.
inline std::vector<int> stratified_folds(const std::vector<int>& labels, int num_classes, int folds,
                                         std::uint64_t seed) {
    std::vector<std::vector<int>> members(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i] - 1)].push_back(static_cast<int>(i));
    std::vector<int> fold(labels.size(), -1);
    auto gen = rng::stream(seed, rng::Purpose::Folds);
    std::size_t deal = 0;
    for (int k = 0; k < num_classes; ++k) {
        auto& m = members[static_cast<std::size_t>(k)];
        if (static_cast<int>(m.size()) < folds)
            throw ValidationError("fold_size", "class " + std::to_string(k + 1) + " has " +
                                                   std::to_string(m.size()) + " observations, fewer than " +
                                                   std::to_string(folds) + " folds");
        const auto perm = rng::permutation(gen, static_cast<int>(m.size()));
        for (int idx : perm) fold[static_cast<std::size_t>(m[static_cast<std::size_t>(idx)])] = static_cast<int>(deal++ % static_cast<std::size_t>(folds));
    }
    return fold;
}

inline LabeledDataset subset(const LabeledDataset& data, const std::vector<int>& fold, int f, bool in_fold) {
    LabeledDataset out;
    out.num_classes = data.num_classes;
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < fold.size(); ++i)
        if ((fold[i] == f) == in_fold) rows.push_back(static_cast<Eigen::Index>(i));
    out.observations.resize(static_cast<Eigen::Index>(rows.size()), data.dim());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.observations.row(static_cast<Eigen::Index>(r)) = data.observations.row(rows[r]);
        out.labels.push_back(data.labels[static_cast<std::size_t>(rows[r])]);
    }
    return out;
}

/// Held-out error of every grid point on every fold; errors[point][fold] is
/// NaN when the fit failed. Points are ordered tau-major, then lambda, then kappa.
struct GridEvaluation {
    TuningGrid grid;
    Variant variant = Variant::Thresholded;
    std::vector<std::vector<double>> errors;
};

inline GridEvaluation evaluate_grid(const LabeledDataset& data, const TuningGrid& grid, Variant variant,
                                    const SolverConfig& solver = {}, int threads = 1) {
    grid.validate();
    validate(data);
    const auto fold = stratified_folds(data.labels, data.num_classes, grid.folds, grid.seed);
    const auto F = static_cast<std::size_t>(grid.folds);

    struct FoldData {
        ClassSummaries summaries;
        std::shared_ptr<const SpectralFactor> factor;
        LabeledDataset held_out;
    };
    std::vector<FoldData> folds(F);
    parallel_for(F, threads, [&](std::size_t f) {
        const auto train = subset(data, fold, static_cast<int>(f), false);
        folds[f].summaries = summarize(train);
        folds[f].factor = std::make_shared<SpectralFactor>(folds[f].summaries.within_cov);
        folds[f].held_out = subset(data, fold, static_cast<int>(f), true);
    });

    // Unthresholded fits do not depend on kappa, so only one column is fitted.
    const std::vector<double> kappas =
        variant == Variant::Unthresholded ? std::vector<double>{0.0} : grid.kappa_factors;
    const std::size_t nt = grid.taus.size(), nl = grid.lambdas.size(), nk = kappas.size();
    GridEvaluation ev;
    ev.grid = grid;
    ev.variant = variant;
    if (variant == Variant::Unthresholded) ev.grid.kappa_factors = {0.0};
    ev.errors.assign(nt * nl * nk, std::vector<double>(F, std::numeric_limits<double>::quiet_NaN()));

    parallel_for(nt * nl * F, threads, [&](std::size_t task) {
        const std::size_t f = task % F;
        const std::size_t tl = task / F;
        FitParams params;
        params.penalty = {grid.taus[tl / nl], grid.lambdas[tl % nl]};
        params.variant = variant;
        params.solver = solver;
        const auto path = fit_kappa_path(folds[f].summaries, params, kappas, folds[f].factor);
        for (std::size_t k = 0; k < nk; ++k) {
            if (!path[k].model) continue;
            const auto pred = predict(*path[k].model, folds[f].held_out.observations);
            ev.errors[tl * nk + k][f] = misclassification_rate(pred, folds[f].held_out.labels);
        }
    });
    return ev;
}

/// Keeps only kappa factor 0 and relabels the evaluation as unthresholded;
/// at zero threshold both variants fit identical models.
inline GridEvaluation unthresholded_view(const GridEvaluation& ev) {
    std::size_t zero = ev.grid.kappa_factors.size();
    for (std::size_t k = 0; k < ev.grid.kappa_factors.size(); ++k)
        if (ev.grid.kappa_factors[k] == 0.0) zero = k;
    if (zero == ev.grid.kappa_factors.size())
        throw ValidationError("grid", "grid has no zero kappa factor");
    GridEvaluation out;
    out.grid = ev.grid;
    out.grid.kappa_factors = {0.0};
    out.variant = Variant::Unthresholded;
    const std::size_t nk = ev.grid.kappa_factors.size();
    for (std::size_t tl = 0; tl < ev.errors.size() / nk; ++tl) out.errors.push_back(ev.errors[tl * nk + zero]);
    return out;
}

/// Summarizes an evaluation and picks the smallest mean error; ties go to
/// larger tau, then larger lambda, then larger kappa factor.
inline CvResult select(const GridEvaluation& ev, const SolverConfig& solver = {}) {
    const auto& g = ev.grid;
    const std::size_t nl = g.lambdas.size(), nk = g.kappa_factors.size();
    CvResult res;
    bool found = false;
    for (std::size_t i = 0; i < ev.errors.size(); ++i) {
        CvRow row;
        row.tau = g.taus[i / (nl * nk)];
        row.lambda = g.lambdas[(i / nk) % nl];
        row.kappa_factor = g.kappa_factors[i % nk];
        const auto& e = ev.errors[i];
        double sum = 0;
        for (double v : e) {
            if (std::isnan(v)) ++row.failures;
            sum += v;
        }
        const double n = static_cast<double>(e.size());
        row.mean_error = sum / n;
        double ss = 0;
        for (double v : e) ss += (v - row.mean_error) * (v - row.mean_error);
        row.sd_error = e.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
        res.table.push_back(row);
        if (row.failures) continue;
        if (!found) {
            res.best_row = i;
            found = true;
            continue;
        }
        const auto& b = res.table[res.best_row];
        const bool better = row.mean_error < b.mean_error ||
                            (row.mean_error == b.mean_error &&
                             std::tie(row.tau, row.lambda, row.kappa_factor) > std::tie(b.tau, b.lambda, b.kappa_factor));
        if (better) res.best_row = i;
    }
    if (!found) throw ValidationError("cv_failed", "no grid point could be fitted on every fold");
    const auto& b = res.table[res.best_row];
    res.best.penalty = {b.tau, b.lambda};
    res.best.kappa = b.kappa_factor;
    res.best.variant = ev.variant;
    res.best.solver = solver;
    return res;
}

inline CvResult cross_validate(const LabeledDataset& data, const TuningGrid& grid, Variant variant,
                               const SolverConfig& solver = {}, int threads = 1) {
    return select(evaluate_grid(data, grid, variant, solver, threads), solver);
}

inline void write_cv_table(std::ostream& os, const std::vector<CvRow>& table) {
    os << "tau,lambda,kappa_factor,mean_error,sd_error\n";
    os.precision(17);
    for (const auto& r : table)
        os << r.tau << ',' << r.lambda << ',' << r.kappa_factor << ',' << r.mean_error << ',' << r.sd_error << '\n';
}

}  // namespace sfda
