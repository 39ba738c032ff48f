#include "sfda/sfda_core.hpp"
#include "sfda/simgen.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

namespace {

using sfda::FitParams;
using sfda::Matrix;
using sfda::Vector;

// K Gaussian classes in R^p, identity-ish covariance, means spread by `sep`.
sfda::LabeledDataset gaussian_data(std::uint64_t seed, int K, int p, int n, double sep = 2.0) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> z;
    Matrix means(K, p);
    for (int k = 0; k < K; ++k)
        for (int j = 0; j < p; ++j) means(k, j) = sep * z(gen);
    const Matrix mix = Matrix::Identity(p, p) + 0.3 * oracle::random_psd(gen, p, p);
    sfda::LabeledDataset d;
    d.num_classes = K;
    d.observations.resize(n, p);
    for (int i = 0; i < n; ++i) {
        const int y = i % K + 1;
        d.labels.push_back(y);
        d.observations.row(i) = means.row(y - 1) + (mix * oracle::random_vector(gen, p)).transpose();
    }
    return d;
}

FitParams params(double tau, double lambda, double kappa = 0.0) {
    FitParams f;
    f.penalty = {tau, lambda};
    f.kappa = kappa;
    return f;
}

// Leading generalized eigenvectors of (B, S) from a dense solver, descending.
Matrix generalized_eigvecs(const Matrix& b, const Matrix& s, int count) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(b, s);
    Matrix out(count, b.rows());
    for (int k = 0; k < count; ++k) out.row(k) = es.eigenvectors().col(b.rows() - 1 - k).transpose();
    return out;
}

TEST(FirstComponent, TwoClassClosedForm) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = sfda::summarize(gaussian_data(seed, 2, 5, 80));
        const Vector a = sfda::first_component(s, params(0, 0));
        const Vector expected = s.within_cov.ldlt().solve(Vector(s.class_means.row(1) - s.class_means.row(0)));
        EXPECT_GE(sfda::linalg::abs_cosine(a, expected), 1 - 1e-6) << "seed " << seed;
    }
}

TEST(FirstComponent, ZeroBetweenScatterIsInitError) {
    Matrix x(4, 2);
    x << 0, 1, 2, 3, 0, 1, 2, 3;
    const auto s = sfda::summarize(sfda::make_dataset(x, {1, 1, 2, 2}));
    try {
        sfda::first_component(s, params(1, 0.1));
        FAIL() << "expected an init error";
    } catch (const sfda::DegenerateError& e) {
        EXPECT_EQ(e.tag(), "init");
    }
}

TEST(FirstComponent, SparseSupportOnSimulationOne) {
    int concentrated = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        sfda::SimScenario scn;
        scn.seed = seed;
        scn.mean_seed = seed + 100;
        const auto data = sfda::simulate(scn);
        const Vector a = sfda::first_component(sfda::summarize(data.train), params(10, 0.4));
        const double top = a.cwiseAbs().maxCoeff();
        bool inside = true;
        for (Eigen::Index j = 50; j < a.size(); ++j)
            if (std::abs(a[j]) > 1e-8 * top) inside = false;
        concentrated += inside;
    }
    EXPECT_GE(concentrated, 18);
}

TEST(ThresholdConstraint, Examples) {
    const Matrix b = Matrix::Identity(3, 3);
    Vector v(3);
    v << 3, -1, 0.2;
    EXPECT_TRUE(sfda::threshold_constraint(b, v, 0.0) == v);
    Vector expected(3);
    expected << 2.5, -0.5, 0;
    EXPECT_LE((sfda::threshold_constraint(b, v, 1.0) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ThresholdConstraint, AgreesWithSeparableLassoOracle) {
    std::mt19937_64 gen(5);
    const Matrix b = oracle::random_psd(gen, 6, 3);
    for (int trial = 0; trial < 20; ++trial) {
        const Vector alpha = oracle::random_vector(gen, 6);
        const Vector v = b * alpha;
        const double kappa = 0.3;
        const Vector xi = sfda::threshold_constraint(b, alpha, kappa);
        for (Eigen::Index l = 0; l < v.size(); ++l) {
            const double vl = v[l];
            // right derivative of (v - t)^2 + kappa |t|
            const double x = oracle::convex_min_by_derivative(
                [&](double t) { return 2 * (t - vl) + (t >= 0 ? kappa : -kappa); }, -10, 10);
            EXPECT_NEAR(xi[l], x, 1e-8);
        }
    }
}

TEST(NextComponent, MatchesGeneralizedEigenvectorsAtZeroPenalty) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = sfda::summarize(gaussian_data(seed, 3, 5, 150));
        const auto m = sfda::fit(s, params(0, 0, 0));
        const Matrix oracle_vecs = generalized_eigvecs(s.between_cov, s.within_cov, 2);
        for (int k = 0; k < 2; ++k)
            EXPECT_GE(sfda::linalg::abs_cosine(m.components.row(k).transpose(), oracle_vecs.row(k).transpose()),
                      1 - 1e-5)
                << "seed " << seed << " component " << k + 1;
    }
}

TEST(NextComponent, ZeroConstraintIsRankError) {
    const auto s = sfda::summarize(gaussian_data(1, 3, 5, 60));
    const Matrix zero = Matrix::Zero(1, 5);
    try {
        sfda::next_component(s, zero, params(1, 0.1));
        FAIL() << "expected a rank error";
    } catch (const sfda::RankError& e) {
        EXPECT_EQ(e.index(), 2);
    }
}

TEST(NextComponent, LargeThresholdAbortsFitWithIndex) {
    const auto s = sfda::summarize(gaussian_data(2, 3, 5, 60));
    auto f = params(1, 0.1, 1e9);
    f.kappa_scale = sfda::KappaScale::Absolute;
    try {
        sfda::fit(s, f);
        FAIL() << "expected a rank error";
    } catch (const sfda::RankError& e) {
        EXPECT_EQ(e.index(), 2);
    }
}

TEST(NextComponent, OrthogonalToConstraints) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = sfda::summarize(gaussian_data(seed, 4, 8, 120));
        const auto m = sfda::fit(s, params(0.5, 0.2, 0.01));
        for (int i = 1; i < 3; ++i)
            for (int j = 0; j < i; ++j) EXPECT_LE(std::abs(m.components.row(i).dot(m.constraints.row(j))), 1e-8);
    }
}

TEST(Fit, ComponentsAreOnTheConstraintSurface) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = sfda::summarize(gaussian_data(seed, 4, 12, 60));
        const auto f = params(0.7, 0.3, 0.001);
        const auto m = sfda::fit(s, f);
        sfda::ConstraintSet cs{s.within_cov, f.penalty, {}};
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(sfda::q_form(m.components.row(i).transpose(), cs), 1.0, 1e-6);
        EXPECT_LE((m.gram - m.gram.transpose()).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(m.discriminant).eigenvalues().minCoeff(),
                  -1e-10 * m.discriminant.norm());
    }
}

TEST(Fit, TwoClassModelShape) {
    const auto m = sfda::fit(gaussian_data(3, 2, 6, 50), params(0.5, 0.1));
    ASSERT_EQ(m.components.rows(), 1);
    EXPECT_EQ(m.constraints.rows(), 0);
    const Vector a = m.components.row(0).transpose();
    const Matrix expected = a * a.transpose() / m.gram(0, 0);
    EXPECT_LE((m.discriminant - expected).cwiseAbs().maxCoeff(), 1e-12 * expected.cwiseAbs().maxCoeff());
}

TEST(Fit, VariantsShareFirstComponent) {
    const auto s = sfda::summarize(gaussian_data(4, 3, 10, 90));
    auto thr = params(1, 0.2, 0.01);
    auto unt = thr;
    unt.variant = sfda::Variant::Unthresholded;
    const auto a = sfda::fit(s, thr), b = sfda::fit(s, unt);
    EXPECT_TRUE(a.components.row(0) == b.components.row(0));
}

TEST(Fit, KappaPathMatchesIndividualFits) {
    const auto s = sfda::summarize(gaussian_data(6, 3, 10, 90));
    const auto base = params(1, 0.2);
    const std::vector<double> kappas{0, 0.001, 0.01};
    const auto path = sfda::fit_kappa_path(s, base, kappas);
    for (std::size_t k = 0; k < kappas.size(); ++k) {
        ASSERT_TRUE(path[k].model.has_value()) << path[k].error;
        auto f = base;
        f.kappa = kappas[k];
        EXPECT_TRUE(path[k].model->components == sfda::fit(s, f).components);
    }
}

TEST(Fit, ShiftInvariantPredictions) {
    const auto train = gaussian_data(7, 3, 10, 120);
    const auto test = gaussian_data(8, 3, 10, 300);
    Vector shift(10);
    shift.setLinSpaced(-3, 4);
    auto train2 = train;
    auto test2 = test;
    train2.observations.rowwise() += shift.transpose();
    test2.observations.rowwise() += shift.transpose();
    const auto f = params(0.5, 0.1, 0.001);
    const auto p1 = sfda::predict(sfda::fit(train, f), test.observations);
    const auto p2 = sfda::predict(sfda::fit(train2, f), test2.observations);
    EXPECT_EQ(p1, p2);
}

}  // namespace
