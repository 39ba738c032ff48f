#pragma once

// Seeded generators for the three benchmark models and the train/test
// protocol (1500 observations, 3 classes, 150 train / 1350 test, p = 500).
//
// Randomness: every consumer draws from its own std::mt19937_64 stream keyed
// by (seed, purpose, index) through std::seed_seq, and Boost.Random
// distributions, whose output is specified independently of the standard
// library implementation.

#include "sfda/error.hpp"
#include "sfda/estimators.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace sfda {

namespace rng {

/// Stream identifiers. Append new purposes; never renumber.
enum class Purpose : std::uint32_t {
    Means = 1,
    Labels = 2,
    Noise = 3,
    Split = 4,
    Folds = 5,
    Replicate = 6,
    Experiment = 7,
};

inline std::mt19937_64 stream(std::uint64_t seed, Purpose purpose, std::uint64_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

/// Derives a child seed, e.g. one per benchmark replicate.
inline std::uint64_t derive_seed(std::uint64_t seed, Purpose purpose, std::uint64_t index) {
    auto gen = stream(seed, purpose, index);
    return gen();
}

inline Vector normal_vector(std::mt19937_64& gen, Eigen::Index n, double mean = 0.0, double sd = 1.0) {
    boost::random::normal_distribution<double> dist(mean, sd);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(gen);
    return v;
}

/// Fisher-Yates permutation of 0..n-1.
inline std::vector<int> permutation(std::mt19937_64& gen, int n) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
        boost::random::uniform_int_distribution<int> pick(0, i);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(gen))]);
    }
    return idx;
}

}  // namespace rng

enum class SimModel { Sim1, Sim2, Sim3 };

inline std::string to_string(SimModel m) {
    switch (m) {
        case SimModel::Sim1: return "sim1";
        case SimModel::Sim2: return "sim2";
        case SimModel::Sim3: return "sim3";
    }
    return "?";
}

inline SimModel parse_sim_model(const std::string& s) {
    if (s == "sim1" || s == "1") return SimModel::Sim1;
    if (s == "sim2" || s == "2") return SimModel::Sim2;
    if (s == "sim3" || s == "3") return SimModel::Sim3;
    throw ValidationError("scenario", "unknown simulation model '" + s + "'");
}

struct SimScenario {
    SimModel model = SimModel::Sim1;
    double sigma2 = 1.0;
    int p = 500;
    int n_total = 1500;
    int n_train = 150;
    std::uint64_t seed = 0;       // labels, noise and split
    std::uint64_t mean_seed = 0;  // class means (and Sim3's random diagonal)

    void validate() const {
        if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
            throw ValidationError("scenario", "sigma2 must be positive");
        if (n_train < 1 || n_train >= n_total)
            throw ValidationError("scenario", "need 0 < n_train < n_total");
        const int min_p = model == SimModel::Sim2 ? 110 : 30;
        if (p < min_p)
            throw ValidationError("scenario", to_string(model) + " needs p >= " + std::to_string(min_p));
    }
};

/// Ground truth of a generated dataset.
struct SimTruth {
    Matrix true_means;           // K x p
    std::vector<Matrix> covs;    // one entry when common, else one per class
    bool common_covariance = true;
    std::vector<int> signal_coords;  // 0-based coordinates where class means differ

    const Matrix& common_cov() const {
        if (!common_covariance)
            throw ValidationError("truth", "scenario has class-specific covariances");
        return covs.front();
    }
};

struct SimData {
    LabeledDataset train;
    LabeledDataset test;
    SimTruth truth;
};

namespace detail {

/// Block-diagonal covariance with equal-size blocks (the last may be partial).
template <typename Entry>
Matrix block_cov(int p, int block, Entry entry) {
    Matrix s = Matrix::Zero(p, p);
    for (int start = 0; start < p; start += block) {
        const int len = std::min(block, p - start);
        for (int a = 0; a < len; ++a)
            for (int b = 0; b < len; ++b) s(start + a, start + b) = entry(a, b);
    }
    return s;
}

/// Lower Cholesky factors of the diagonal blocks, so sampling costs O(p * block).
struct BlockSampler {
    int block = 1;
    std::vector<Matrix> factors;

    BlockSampler(const Matrix& cov, int block_size) : block(block_size) {
        const auto p = static_cast<int>(cov.rows());
        for (int start = 0; start < p; start += block) {
            const int len = std::min(block, p - start);
            Eigen::LLT<Matrix> llt(cov.block(start, start, len, len));
            if (llt.info() != Eigen::Success)
                throw ValidationError("covariance", "covariance block is not positive definite");
            factors.push_back(llt.matrixL());
        }
    }

    Vector draw(std::mt19937_64& gen, Eigen::Index p) const {
        const Vector z = rng::normal_vector(gen, p);
        Vector x(p);
        Eigen::Index start = 0;
        for (const auto& f : factors) {
            const auto len = f.rows();
            x.segment(start, len) = f * z.segment(start, len);
            start += len;
        }
        return x;
    }
};

}  // namespace detail

/// Splits the observations of (x, labels) into the first n_train indices of a
/// random permutation (train) and the rest (test); both keep original order.
inline std::pair<LabeledDataset, LabeledDataset> split_train_test(const Matrix& x, const std::vector<int>& labels,
                                                                  int num_classes, int n_train,
                                                                  std::mt19937_64& gen) {
    const int n = static_cast<int>(x.rows());
    auto perm = rng::permutation(gen, n);
    std::vector<int> train_idx(perm.begin(), perm.begin() + n_train);
    std::vector<int> test_idx(perm.begin() + n_train, perm.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    auto take = [&](const std::vector<int>& idx) {
        LabeledDataset d;
        d.num_classes = num_classes;
        d.observations.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            d.observations.row(static_cast<Eigen::Index>(r)) = x.row(idx[r]);
            d.labels.push_back(labels[static_cast<std::size_t>(idx[r])]);
        }
        return d;
    };
    return {take(train_idx), take(test_idx)};
}

inline SimData simulate(const SimScenario& scn) {
    scn.validate();
    constexpr int K = 3;
    const int p = scn.p;
    const double s2 = scn.sigma2;
    SimTruth truth;
    truth.true_means = Matrix::Zero(K, p);

    auto means_gen = rng::stream(scn.mean_seed, rng::Purpose::Means);
    std::vector<detail::BlockSampler> samplers;
    std::vector<int> sampler_of_class(K, 0);

    switch (scn.model) {
        case SimModel::Sim1: {
            // x_ij = mu_kj + Z_i + e_ij for j <= 30 (one Z_i per observation), mu_kj + e_ij beyond.
            boost::random::normal_distribution<double> m1(1.0, 0.8), m2(4.0, 0.8), m3(1.0, 0.8);
            for (int j = 0; j < std::min(20, p); ++j) truth.true_means(0, j) = m1(means_gen);
            for (int j = 20; j < std::min(30, p); ++j) truth.true_means(1, j) = m2(means_gen);
            for (int j = 30; j < std::min(50, p); ++j) truth.true_means(2, j) = m3(means_gen);
            for (int j = 0; j < std::min(50, p); ++j) truth.signal_coords.push_back(j);
            Matrix cov = s2 * Matrix::Identity(p, p);
            cov.topLeftCorner(30, 30).array() += 1.0;
            truth.covs.push_back(cov);
            break;
        }
        case SimModel::Sim2: {
            for (int k = 0; k < K; ++k) {
                boost::random::normal_distribution<double> m(k + 1.0, 1.0);
                for (int j = 0; j < p; ++j)
                    if (j < 10 || (j >= 100 && j < 110)) truth.true_means(k, j) = m(means_gen);
            }
            for (int j = 0; j < p; ++j)
                if (j < 10 || (j >= 100 && j < 110)) truth.signal_coords.push_back(j);
            truth.covs.push_back(detail::block_cov(
                p, 100, [&](int a, int b) { return std::pow(0.6, std::abs(a - b)) * s2; }));
            samplers.emplace_back(truth.covs.back(), 100);
            break;
        }
        case SimModel::Sim3: {
            truth.true_means.block(0, 0, 1, 10).setConstant(3.0);
            truth.true_means.block(1, 0, 1, 20).setConstant(2.0);
            truth.true_means.block(2, 0, 1, 30).setConstant(1.0);
            for (int j = 0; j < 30; ++j) truth.signal_coords.push_back(j);
            truth.common_covariance = false;
            boost::random::uniform_real_distribution<double> diag(0.5, 2.0);
            Vector d(p);
            for (int j = 0; j < p; ++j) d[j] = diag(means_gen) * s2;
            truth.covs.push_back(d.asDiagonal());
            truth.covs.push_back(detail::block_cov(
                p, 100, [&](int a, int b) { return std::pow(0.9, std::abs(a - b)) * s2; }));
            truth.covs.push_back(detail::block_cov(p, 100, [&](int a, int b) { return (a == b ? 1.0 : 0.6) * s2; }));
            samplers.emplace_back(truth.covs[0], 1);
            samplers.emplace_back(truth.covs[1], 100);
            samplers.emplace_back(truth.covs[2], 100);
            sampler_of_class = {0, 1, 2};
            break;
        }
    }

    auto label_gen = rng::stream(scn.seed, rng::Purpose::Labels);
    auto noise_gen = rng::stream(scn.seed, rng::Purpose::Noise);
    boost::random::uniform_int_distribution<int> pick(1, K);
    const int n = scn.n_total;
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& y : labels) y = pick(label_gen);

    Matrix x(n, p);
    for (int i = 0; i < n; ++i) {
        const int k = labels[static_cast<std::size_t>(i)] - 1;
        Vector row;
        if (scn.model == SimModel::Sim1) {
            boost::random::normal_distribution<double> shared(0.0, 1.0);
            const double z = shared(noise_gen);
            row = rng::normal_vector(noise_gen, p, 0.0, std::sqrt(s2));
            row.head(30).array() += z;
        } else {
            row = samplers[static_cast<std::size_t>(sampler_of_class[static_cast<std::size_t>(k)])].draw(noise_gen, p);
        }
        x.row(i) = (truth.true_means.row(k) + row.transpose());
    }

    auto split_gen = rng::stream(scn.seed, rng::Purpose::Split);
    auto [train, test] = split_train_test(x, labels, K, scn.n_train, split_gen);
    return {std::move(train), std::move(test), std::move(truth)};
}

/// Draws n observations with uniformly random labels from N(means_k, cov).
inline LabeledDataset sample_gaussian_classes(const Matrix& means, const Matrix& cov, int n, std::mt19937_64& gen) {
    const auto K = static_cast<int>(means.rows());
    const auto p = means.cols();
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw ValidationError("covariance", "covariance is not positive definite");
    const Matrix lower = llt.matrixL();
    boost::random::uniform_int_distribution<int> pick(1, K);
    LabeledDataset d;
    d.num_classes = K;
    d.observations.resize(n, p);
    d.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int y = pick(gen);
        d.labels[static_cast<std::size_t>(i)] = y;
        d.observations.row(i) = means.row(y - 1) + (lower * rng::normal_vector(gen, p)).transpose();
    }
    return d;
}

inline double misclassification_rate(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size())
        throw ValidationError("shape", "prediction and truth lengths differ");
    if (truth.empty()) return 0.0;
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) wrong += predicted[i] != truth[i];
    return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

}  // namespace sfda
