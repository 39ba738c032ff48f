#pragma once

#include "sfda/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace sfda {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// n observations (rows) of dimension p with labels in 1..K.
struct LabeledDataset {
    Matrix observations;
    std::vector<int> labels;
    int num_classes = 0;

    Eigen::Index size() const noexcept { return observations.rows(); }
    Eigen::Index dim() const noexcept { return observations.cols(); }
};

/// Sample summaries: class means, counts, overall mean, pooled within-class
/// covariance (divisor n-K) and between-class covariance (divisor n).
struct ClassSummaries {
    Matrix class_means;  // K x p
    std::vector<int> counts;
    Vector overall_mean;
    Matrix within_cov;
    Matrix between_cov;

    int num_classes() const noexcept { return static_cast<int>(counts.size()); }
    Eigen::Index dim() const noexcept { return overall_mean.size(); }
    int total() const noexcept {
        int n = 0;
        for (int c : counts) n += c;
        return n;
    }
};

namespace detail {

inline void symmetrize(Matrix& m) { m = 0.5 * (m + m.transpose()).eval(); }

}  // namespace detail

/// Checks the dataset contract: labels dense in 1..K, every class populated,
/// n >= K + 1 and all entries finite. Throws ValidationError on violation.
inline void validate(const LabeledDataset& data) {
    const auto n = data.size();
    if (static_cast<Eigen::Index>(data.labels.size()) != n)
        throw ValidationError("shape", "label count " + std::to_string(data.labels.size()) +
                                           " does not match " + std::to_string(n) + " observations");
    if (data.num_classes < 1) throw ValidationError("shape", "number of classes must be positive");
    if (data.dim() < 1) throw ValidationError("shape", "observations have no features");
    std::vector<int> seen(static_cast<std::size_t>(data.num_classes), 0);
    for (int y : data.labels) {
        if (y < 1 || y > data.num_classes)
            throw ValidationError("label_range", "label " + std::to_string(y) + " outside 1.." +
                                                     std::to_string(data.num_classes));
        ++seen[static_cast<std::size_t>(y - 1)];
    }
    for (int k = 0; k < data.num_classes; ++k)
        if (seen[static_cast<std::size_t>(k)] == 0) throw EmptyClassError(k + 1);
    if (n <= data.num_classes)
        throw ValidationError("divisor", "need n > K for the within-class divisor n-K (n=" +
                                             std::to_string(n) + ", K=" +
                                             std::to_string(data.num_classes) + ")");
    if (!data.observations.allFinite())
        throw ValidationError("non_finite", "observations contain non-finite entries");
}

/// Builds a dataset taking K as the largest label, then validates it.
inline LabeledDataset make_dataset(Matrix observations, std::vector<int> labels) {
    LabeledDataset d;
    d.num_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
    d.observations = std::move(observations);
    d.labels = std::move(labels);
    validate(d);
    return d;
}

inline ClassSummaries summarize(const LabeledDataset& data) {
    validate(data);
    const int K = data.num_classes;
    const auto n = data.size();
    const auto p = data.dim();

    ClassSummaries s;
    s.counts.assign(static_cast<std::size_t>(K), 0);
    s.class_means = Matrix::Zero(K, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int k = data.labels[static_cast<std::size_t>(i)] - 1;
        s.class_means.row(k) += data.observations.row(i);
        ++s.counts[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < K; ++k) s.class_means.row(k) /= s.counts[static_cast<std::size_t>(k)];
    s.overall_mean = data.observations.colwise().mean().transpose();

    // Second pass: deviations about the class means.
    Matrix centered(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        centered.row(i) = data.observations.row(i) - s.class_means.row(data.labels[static_cast<std::size_t>(i)] - 1);
    s.within_cov = Matrix::Zero(p, p);
    s.within_cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
    s.within_cov.triangularView<Eigen::StrictlyUpper>() = s.within_cov.transpose();
    s.within_cov /= static_cast<double>(n - K);
    detail::symmetrize(s.within_cov);

    Matrix weighted(K, p);
    for (int k = 0; k < K; ++k)
        weighted.row(k) = std::sqrt(static_cast<double>(s.counts[static_cast<std::size_t>(k)])) *
                          (s.class_means.row(k) - s.overall_mean.transpose());
    s.between_cov = weighted.transpose() * weighted / static_cast<double>(n);
    detail::symmetrize(s.between_cov);
    return s;
}

/// Shifts every observation so the overall sample mean is zero.
inline LabeledDataset center_overall(const LabeledDataset& data) {
    validate(data);
    LabeledDataset out = data;
    const Eigen::RowVectorXd mean = data.observations.colwise().mean();
    out.observations.rowwise() -= mean;
    return out;
}

}  // namespace sfda
