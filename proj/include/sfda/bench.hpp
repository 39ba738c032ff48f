#pragma once

// Replicated simulation benchmark: CV-tuned SFDA (both variants) against
// nearest-centroid and a fixed-ridge LDA baseline.

#include "sfda/classifier.hpp"
#include "sfda/estimators.hpp"
#include "sfda/model_selection.hpp"
#include "sfda/parallel.hpp"
#include "sfda/sfda_core.hpp"
#include "sfda/simgen.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace sfda {

/// Nearest class mean in Euclidean distance.
inline std::vector<int> nearest_centroid_predict(const ClassSummaries& s, const Matrix& x) {
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Vector d(s.num_classes());
        for (int k = 0; k < s.num_classes(); ++k) d[k] = (x.row(i) - s.class_means.row(k)).squaredNorm();
        out[static_cast<std::size_t>(i)] = argmin_label(d);
    }
    return out;
}

/// LDA with covariance S + ridge * (tr(S) / p) I.
inline std::vector<int> ridge_lda_predict(const ClassSummaries& s, const Matrix& x, double ridge = 1.0) {
    const auto p = s.dim();
    Matrix cov = s.within_cov;
    cov.diagonal().array() += ridge * s.within_cov.trace() / static_cast<double>(p);
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw DegenerateError("ridge_lda", "ridge covariance is not positive definite");
    const Matrix w = llt.solve(Matrix(s.class_means.transpose()));  // p x K
    // argmin (x-m)'W^-1(x-m) = argmin -2 x'W^-1 m + m'W^-1 m
    Vector offset(s.num_classes());
    for (int k = 0; k < s.num_classes(); ++k) offset[k] = s.class_means.row(k).dot(w.col(k));
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Vector d = offset - 2.0 * (x.row(i) * w).transpose();
        out[static_cast<std::size_t>(i)] = argmin_label(d);
    }
    return out;
}

inline constexpr std::array<const char*, 4> kBenchMethods{"sfda_threshold", "sfda_unthresholded",
                                                          "nearest_centroid", "ridge_lda"};

struct BenchConfig {
    SimScenario scenario;  // seed fields are replaced per replicate
    int reps = 10;
    std::uint64_t seed = 0;
    TuningGrid grid;
    SolverConfig solver;
    double ridge = 1.0;
    int threads = 1;
};

struct BenchReplicate {
    std::array<double, 4> errors{};  // test misclassification, fraction
    FitParams threshold_params;
    FitParams unthresholded_params;
};

struct BenchRow {
    SimModel model = SimModel::Sim1;
    double sigma2 = 1;
    std::vector<BenchReplicate> reps;

    /// Mean and sample SD in percent; NaN-free only if every replicate succeeded.
    std::pair<double, double> summary(std::size_t method) const {
        double sum = 0;
        for (const auto& r : reps) sum += r.errors[method];
        const double n = static_cast<double>(reps.size());
        const double mean = sum / n;
        double ss = 0;
        for (const auto& r : reps) ss += (r.errors[method] - mean) * (r.errors[method] - mean);
        const double sd = reps.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
        return {100.0 * mean, 100.0 * sd};
    }
};

inline BenchReplicate run_replicate(const BenchConfig& cfg, int rep) {
    SimScenario scn = cfg.scenario;
    const auto r = static_cast<std::uint64_t>(rep);
    scn.seed = rng::derive_seed(cfg.seed, rng::Purpose::Replicate, r);
    scn.mean_seed = rng::derive_seed(cfg.seed, rng::Purpose::Means, r);
    const auto data = simulate(scn);
    TuningGrid grid = cfg.grid;
    grid.seed = rng::derive_seed(cfg.seed, rng::Purpose::Folds, r);

    const auto ev = evaluate_grid(data.train, grid, Variant::Thresholded, cfg.solver, 1);
    const auto thr = select(ev, cfg.solver);
    const auto unt = select(unthresholded_view(ev), cfg.solver);

    const auto s = summarize(data.train);
    auto factor = std::make_shared<SpectralFactor>(s.within_cov);
    BenchReplicate out;
    out.threshold_params = thr.best;
    out.unthresholded_params = unt.best;
    const auto& test = data.test;
    out.errors[0] = misclassification_rate(predict(fit(s, thr.best, factor), test.observations), test.labels);
    out.errors[1] = misclassification_rate(predict(fit(s, unt.best, factor), test.observations), test.labels);
    out.errors[2] = misclassification_rate(nearest_centroid_predict(s, test.observations), test.labels);
    out.errors[3] = misclassification_rate(ridge_lda_predict(s, test.observations, cfg.ridge), test.labels);
    return out;
}

/// Replicates run concurrently (each single-threaded); results are stored by
/// replicate index, so the output does not depend on the thread count.
inline BenchRow run_bench(const BenchConfig& cfg) {
    cfg.scenario.validate();
    if (cfg.reps < 1) throw ValidationError("reps", "need at least one replicate");
    BenchRow row;
    row.model = cfg.scenario.model;
    row.sigma2 = cfg.scenario.sigma2;
    row.reps.resize(static_cast<std::size_t>(cfg.reps));
    parallel_for(row.reps.size(), cfg.threads,
                 [&](std::size_t r) { row.reps[r] = run_replicate(cfg, static_cast<int>(r)); });
    return row;
}

inline std::string format_cell(const std::pair<double, double>& ms) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f(%.2f)", ms.first, ms.second);
    return buf;
}

inline void write_bench_markdown(std::ostream& os, const std::vector<BenchRow>& rows) {
    os << "| scenario | sigma2 |";
    for (const char* m : kBenchMethods) os << ' ' << m << " |";
    os << "\n|---|---|";
    for (std::size_t i = 0; i < kBenchMethods.size(); ++i) os << "---|";
    os << '\n';
    for (const auto& r : rows) {
        os << "| " << to_string(r.model) << " | " << r.sigma2 << " |";
        for (std::size_t m = 0; m < kBenchMethods.size(); ++m) os << ' ' << format_cell(r.summary(m)) << " |";
        os << '\n';
    }
}

inline void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
    os << "scenario,sigma2,method,mean_pct,sd_pct,reps\n";
    os.precision(10);
    for (const auto& r : rows)
        for (std::size_t m = 0; m < kBenchMethods.size(); ++m) {
            const auto [mean, sd] = r.summary(m);
            os << to_string(r.model) << ',' << r.sigma2 << ',' << kBenchMethods[m] << ',' << mean << ',' << sd << ','
               << r.reps.size() << '\n';
        }
}

}  // namespace sfda
