#include "sfda/classifier.hpp"
#include "sfda/sfda_core.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

namespace {

using sfda::Matrix;
using sfda::Vector;

sfda::DiscriminantModel model_from(const Matrix& components, const Matrix& means, const Matrix& sigma) {
    sfda::DiscriminantModel m;
    m.components = components;
    m.summaries.class_means = means;
    m.summaries.counts.assign(static_cast<std::size_t>(means.rows()), 1);
    m.summaries.within_cov = sigma;
    sfda::build_discriminant(m);
    return m;
}

TEST(Gram, Examples) {
    Matrix a(1, 2);
    a << 1, 0;
    Matrix s(2, 2);
    s << 0.8, 0.1, 0.1, 2;
    EXPECT_DOUBLE_EQ(sfda::gram_matrix(a, s)(0, 0), 0.8);

    Matrix orth(2, 2);
    orth << 1, 0, 0, 1;
    const Matrix g = sfda::gram_matrix(orth, Vector(Vector::Ones(2)).asDiagonal());
    EXPECT_EQ(g(0, 1), 0.0);
    EXPECT_EQ(g(1, 0), 0.0);
}

TEST(Gram, MatchesTripleProducts) {
    std::mt19937_64 gen(1);
    const Matrix s = oracle::random_psd(gen, 7, 7);
    Matrix a(2, 7);
    a.row(0) = oracle::random_vector(gen, 7).transpose();
    a.row(1) = oracle::random_vector(gen, 7).transpose();
    const Matrix g = sfda::gram_matrix(a, s);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const double direct = a.row(i).dot(s * a.row(j).transpose());
            EXPECT_NEAR(g(i, j), direct, 1e-12 * std::abs(direct) + 1e-15);
        }
}

TEST(Discriminant, ReducedForms) {
    Matrix a(1, 3);
    a << 1, -2, 0.5;
    const Matrix d1 = sfda::discriminant_matrix(a, Matrix::Identity(1, 1));
    EXPECT_LE((d1 - a.transpose() * a).cwiseAbs().maxCoeff(), 1e-15);

    std::mt19937_64 gen(2);
    Matrix b(2, 4);
    b.row(0) = oracle::random_vector(gen, 4).transpose();
    b.row(1) = oracle::random_vector(gen, 4).transpose();
    const Matrix d2 = sfda::discriminant_matrix(b, Matrix::Identity(2, 2));
    const Matrix classic = b.row(0).transpose() * b.row(0) + b.row(1).transpose() * b.row(1);
    EXPECT_LE((d2 - classic).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Discriminant, PositiveSemidefiniteOnRandomDirections) {
    std::mt19937_64 gen(3);
    Matrix a(2, 6);
    a.row(0) = oracle::random_vector(gen, 6).transpose();
    a.row(1) = oracle::random_vector(gen, 6).transpose();
    const Matrix d = sfda::discriminant_matrix(a, sfda::gram_matrix(a, oracle::random_psd(gen, 6, 6)));
    for (int i = 0; i < 1000; ++i) {
        const Vector x = oracle::random_vector(gen, 6);
        EXPECT_GE(x.dot(d * x), -1e-10 * x.squaredNorm() * d.norm());
    }
}

TEST(Discriminant, NearSingularGramIsRejected) {
    Matrix a(2, 3);
    a << 1, 0, 0, 1, 1e-9, 0;
    Matrix g(2, 2);
    g << 1, 1, 1, 1 + 1e-14;
    try {
        sfda::discriminant_matrix(a, g);
        FAIL() << "expected an ill-conditioning error";
    } catch (const sfda::IllConditionedError& e) {
        EXPECT_EQ(e.tag(), "ill_conditioned_gram");
        EXPECT_GT(e.condition(), 1e12);
    }
}

TEST(Classify, ClassMeanMapsToItsClass) {
    Matrix means(3, 2);
    means << 0, 0, 3, 0, 0, 3;
    const auto m = model_from(Matrix::Identity(2, 2), means, Matrix::Identity(2, 2));
    EXPECT_EQ(sfda::classify(m, means.row(1).transpose()), 2);
    EXPECT_EQ(sfda::classify(m, means.row(2).transpose()), 3);
}

TEST(Classify, TieGoesToLowerIndex) {
    Matrix means(2, 2);
    means << -1, 0, 1, 0;
    Matrix a(1, 2);
    a << 1, 0;
    const auto m = model_from(a, means, Matrix::Identity(2, 2));
    EXPECT_EQ(sfda::classify(m, Vector::Zero(2)), 1);
    Vector x(2);
    x << 0, 5;
    EXPECT_EQ(sfda::classify(m, x), 1);
}

TEST(Classify, RejectsNonFiniteInput) {
    Matrix means(2, 1);
    means << 0, 1;
    const auto m = model_from(Matrix::Ones(1, 1), means, Matrix::Identity(1, 1));
    Vector x(1);
    x << std::nan("");
    EXPECT_THROW(sfda::classify(m, x), sfda::ValidationError);
}

TEST(Classify, DistancesMatchFullDiscriminantForm) {
    std::mt19937_64 gen(4);
    Matrix means(3, 5), a(2, 5);
    for (int k = 0; k < 3; ++k) means.row(k) = oracle::random_vector(gen, 5).transpose();
    for (int k = 0; k < 2; ++k) a.row(k) = oracle::random_vector(gen, 5).transpose();
    const auto m = model_from(a, means, oracle::random_psd(gen, 5, 5) + Matrix::Identity(5, 5));
    for (int t = 0; t < 100; ++t) {
        const Vector x = oracle::random_vector(gen, 5);
        const Vector d = sfda::class_distances(m, x);
        for (int k = 0; k < 3; ++k) {
            const Vector diff = x - means.row(k).transpose();
            const double full = diff.dot(m.discriminant * diff);
            EXPECT_NEAR(d[k], full, 1e-9 * (1 + full));
        }
    }
}

TEST(Classify, PermutationEquivariant) {
    std::mt19937_64 gen(5);
    Matrix means(3, 6), a(2, 6);
    for (int k = 0; k < 3; ++k) means.row(k) = oracle::random_vector(gen, 6).transpose();
    for (int k = 0; k < 2; ++k) a.row(k) = oracle::random_vector(gen, 6).transpose();
    const Matrix s = oracle::random_psd(gen, 6, 6) + Matrix::Identity(6, 6);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
    perm.indices() << 3, 0, 5, 1, 4, 2;
    const auto m1 = model_from(a, means, s);
    const auto m2 = model_from(a * perm, means * perm, perm.transpose() * s * perm);
    for (int t = 0; t < 200; ++t) {
        const Vector x = 2 * oracle::random_vector(gen, 6);
        EXPECT_EQ(sfda::classify(m1, x), sfda::classify(m2, perm.transpose() * x));
    }
}

TEST(NormalCdf, AgreesWithQuadrature) {
    for (double x : {-8.0, -5.0, -1.0, -0.3, 0.0, 0.7, 2.5}) {
        const double q = oracle::normal_cdf_quadrature(x);
        EXPECT_NEAR(sfda::normal_cdf(x), q, 1e-12 * std::max(q, 1e-300) + 1e-15) << x;
    }
}

TEST(TwoClassError, KnownValues) {
    // delta' Sigma^-1 delta = 4 with D = Sigma^-1 gives Phi(-1).
    Vector delta(2);
    delta << 2, 0;
    const Matrix id = Matrix::Identity(2, 2);
    EXPECT_NEAR(sfda::two_class_error(delta, id, id), 0.15865525393145707, 1e-12);
    delta << 10, 0;
    EXPECT_NEAR(sfda::two_class_error(delta, id, id), 2.866515718791939e-07, 1e-18);
    EXPECT_THROW(sfda::two_class_error(delta, Matrix::Zero(2, 2), id), sfda::DegenerateError);
}

TEST(TwoClassError, DecreasesWithSeparation) {
    const Matrix id = Matrix::Identity(3, 3);
    double prev = 1;
    for (double s = 0.5; s < 8; s += 0.5) {
        const double e = sfda::two_class_error(s * Vector::Unit(3, 0), id, id);
        EXPECT_LT(e, prev);
        prev = e;
    }
}

TEST(OptimalRule, Examples) {
    Matrix means(3, 2);
    means << 1, 0, -1, 0, 0, 2;
    sfda::OptimalRuleSpec spec{means, Matrix::Identity(2, 2), {}};
    EXPECT_EQ(sfda::optimal_classify(spec, means.row(2).transpose()), 3);
    sfda::OptimalRuleSpec two{means.topRows(2), Matrix::Identity(2, 2), {}};
    Vector mid(2);
    mid << 0, 1;
    EXPECT_EQ(sfda::optimal_classify(two, mid), 1);
    sfda::OptimalRuleSpec bad{means, Matrix::Zero(2, 2), {}};
    EXPECT_THROW(sfda::optimal_classify(bad, mid), sfda::DegenerateError);
}

TEST(OptimalRule, MonteCarloMatchesTwoClassFormula) {
    const int p = 10;
    std::mt19937_64 gen(6);
    Matrix means = Matrix::Zero(2, p);
    means(0, 0) = -0.9;
    means(1, 0) = 0.9;
    means(1, 1) = 0.4;
    Matrix sigma = 0.5 * Matrix::Identity(p, p) + 0.5 * oracle::random_psd(gen, p, p);
    const sfda::OptimalRule rule({means, sigma, {}});
    const Matrix lower = sigma.llt().matrixL();
    const int n = 200000;
    int wrong = 0;
    for (int i = 0; i < n; ++i) {
        const int y = i % 2;
        const Vector x = means.row(y).transpose() + lower * oracle::random_vector(gen, p);
        wrong += rule(x) != y + 1;
    }
    const Vector delta = (means.row(1) - means.row(0)).transpose();
    const double r = sfda::two_class_error(delta, sigma.inverse(), sigma);
    const double se = std::sqrt(r * (1 - r) / n);
    EXPECT_NEAR(static_cast<double>(wrong) / n, r, 3 * se);
}

}  // namespace
