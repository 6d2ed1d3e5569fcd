#include "alsi/similarity.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace alsi;
using alsi::testing::random_incidence;

namespace {

IncidenceMatrix incidence(Eigen::Index n, const std::vector<std::vector<double>>& columns) {
    IncidenceMatrix x;
    x.x = Matrix::Zero(n, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
        for (Eigen::Index i = 0; i < n; ++i) x.x(i, static_cast<Eigen::Index>(j)) = columns[j][static_cast<std::size_t>(i)];
        x.genes.push_back("t" + std::to_string(j + 1));
    }
    for (Eigen::Index i = 0; i < n; ++i) x.experiments.push_back("d" + std::to_string(i + 1));
    return x;
}

// Loop-count oracle for |t_i and t_j| / |t_i|.
double count_oracle(const Matrix& x, Eigen::Index i, Eigen::Index j) {
    int both = 0;
    int ni = 0;
    for (Eigen::Index k = 0; k < x.rows(); ++k) {
        ni += x(k, i) == 1.0;
        both += x(k, i) == 1.0 && x(k, j) == 1.0;
    }
    return static_cast<double>(both) / ni;
}

}  // namespace

TEST(AsymmetricSimilarity, TwoTermToy) {
    const auto x = incidence(3, {{1, 1, 0}, {1, 0, 0}});
    const AsymmetricSimilarity s = asymmetric_similarity(x);
    EXPECT_EQ(s.s(0, 1), 0.5);
    EXPECT_EQ(s.s(1, 0), 1.0);
    EXPECT_EQ(s.s(0, 0), 1.0);
    EXPECT_EQ(s.genes, x.genes);
}

TEST(AsymmetricSimilarity, IdenticalAndDisjoint) {
    const auto x = incidence(4, {{1, 0, 1, 0}, {1, 0, 1, 0}, {0, 1, 0, 1}});
    const Matrix s = asymmetric_similarity(x).s;
    EXPECT_EQ(s(0, 1), 1.0);
    EXPECT_EQ(s(1, 0), 1.0);
    EXPECT_EQ(s(0, 2), 0.0);
    EXPECT_EQ(s(2, 0), 0.0);
}

TEST(AsymmetricSimilarity, ZeroNormColumnNamed) {
    const auto x = incidence(2, {{1, 0}, {0, 0}});
    try {
        asymmetric_similarity(x);
        FAIL();
    } catch (const ContractViolation& e) {
        EXPECT_NE(std::string(e.what()).find("t2"), std::string::npos);
    }
}

TEST(AsymmetricSimilarity, MatchesCountOracleAndBounds) {
    Rng rng(31);
    for (int t = 0; t < 30; ++t) {
        const auto x = random_incidence(9, 15, rng);
        const Matrix s = asymmetric_similarity(x).s;
        for (Eigen::Index i = 0; i < s.rows(); ++i) {
            EXPECT_EQ(s(i, i), 1.0);
            EXPECT_LE(s.row(i).sum(), static_cast<double>(s.cols()));
            for (Eigen::Index j = 0; j < s.cols(); ++j) {
                EXPECT_EQ(s(i, j), count_oracle(x.x, i, j));
                EXPECT_GE(s(i, j), 0.0);
                EXPECT_LE(s(i, j), 1.0);
            }
        }
    }
}

TEST(AsymmetricSimilarity, ContainmentGivesExactlyOne) {
    Rng rng(32);
    for (int t = 0; t < 200; ++t) {
        const Eigen::Index n = 50;
        std::vector<double> outer(n, 0.0);
        std::vector<double> inner(n, 0.0);
        for (Eigen::Index k = 0; k < n; ++k) {
            if (rng.uniform() < 0.6) outer[static_cast<std::size_t>(k)] = 1.0;
            if (outer[static_cast<std::size_t>(k)] == 1.0 && rng.uniform() < 0.5) inner[static_cast<std::size_t>(k)] = 1.0;
        }
        outer[0] = inner[0] = 1.0;
        const Matrix s = asymmetric_similarity(incidence(n, {inner, outer})).s;
        EXPECT_EQ(s(0, 1), 1.0);
    }
}

TEST(AsymmetricSimilarity, InvariantUnderExperimentPermutation) {
    Rng rng(33);
    const auto x = random_incidence(12, 10, rng);
    auto y = x;
    std::vector<Eigen::Index> order(12);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (Eigen::Index i = 0; i < 12; ++i) y.x.row(i) = x.x.row(order[static_cast<std::size_t>(i)]);
    EXPECT_EQ(asymmetric_similarity(x).s, asymmetric_similarity(y).s);
}

TEST(SkewSplit, ToyAndExactReconstruction) {
    const auto x = incidence(3, {{1, 1, 0}, {1, 0, 0}});
    const SkewSplit sp = skew_split(asymmetric_similarity(x));
    EXPECT_EQ(sp.skew(0, 1), -0.25);
    EXPECT_EQ(sp.skew(1, 0), 0.25);

    Rng rng(34);
    const Matrix s = alsi::testing::uniform_matrix(7, 7, rng);
    const SkewSplit r = skew_split(s);
    EXPECT_LE((r.symmetric + r.skew - s).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(skew_split(Matrix(r.symmetric)).skew, Matrix::Zero(7, 7));
}

TEST(SkewSplit, NormDifferenceIdentity) {
    Rng rng(35);
    for (int t = 0; t < 100; ++t) {
        const auto x = random_incidence(10, 12, rng);
        const Matrix skew = skew_split(asymmetric_similarity(x)).skew;
        const Vector norms = column_norms(x.x);
        const Matrix inter = x.x.transpose() * x.x;
        for (Eigen::Index i = 0; i < 12; ++i)
            for (Eigen::Index j = 0; j < 12; ++j) {
                const double rhs = inter(i, j) * (norms(j) - norms(i)) / (2.0 * norms(i) * norms(j));
                EXPECT_NEAR(skew(i, j), rhs, 1e-12);
            }
    }
}

TEST(NormDiagnostics, ToyAndIdenticalColumns) {
    const auto x = incidence(3, {{1, 1, 0}, {1, 0, 0}});
    const NormDiagnostics d = norm_diagnostics(x, asymmetric_similarity(x), 4);
    EXPECT_EQ(d.norms, (std::vector<double>{2, 1}));
    EXPECT_DOUBLE_EQ(d.skew_max, 0.5);

    const auto same = incidence(3, {{1, 0, 1}, {1, 0, 1}, {1, 0, 1}});
    const NormDiagnostics e = norm_diagnostics(same, asymmetric_similarity(same), 5);
    int occupied = 0;
    for (auto c : e.histogram.counts) occupied += c > 0;
    EXPECT_EQ(occupied, 1);
    EXPECT_EQ(e.skew_max, 0.0);
    EXPECT_THROW(norm_diagnostics(same, asymmetric_similarity(same), 0), ContractViolation);
}

TEST(Baseline, EuclideanAndPearson) {
    const Matrix m = from_row_major(2, 3, {1, 0, 1, 0, 1, 0});
    const Matrix e = baseline_distances(m, BaselineKind::Euclidean);
    EXPECT_NEAR(e(0, 1), std::sqrt(2.0), 1e-15);
    EXPECT_EQ(e(0, 2), 0.0);
    const Matrix p = baseline_distances(m, BaselineKind::Pearson);
    EXPECT_NEAR(p(0, 1), 2.0, 1e-12);
    EXPECT_NEAR(p(0, 2), 0.0, 1e-12);
    EXPECT_EQ(p.diagonal(), Vector::Zero(3));
    EXPECT_TRUE(is_symmetric(p, 0.0));
}

TEST(Baseline, ZeroVarianceColumnWarns) {
    const Matrix m = from_row_major(3, 2, {1, 5, 2, 5, 3, 5});
    Warnings w;
    const Matrix p = baseline_distances(m, BaselineKind::Pearson, &w);
    EXPECT_EQ(p(0, 1), 1.0);
    EXPECT_EQ(w.size(), 1u);
}
