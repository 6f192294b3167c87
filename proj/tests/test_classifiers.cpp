#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "kneehar/classifiers/decision_tree.hpp"
#include "kneehar/classifiers/gradient_boosting.hpp"
#include "kneehar/classifiers/knn.hpp"
#include "kneehar/classifiers/naive_bayes.hpp"
#include "kneehar/classifiers/random_forest.hpp"
#include "oracles/oracles.hpp"

using namespace kneehar;
using namespace kneehar::ml;

namespace {

using Rows = std::vector<std::vector<double>>;

Matrix to_matrix(const Rows& rows) {
  Matrix m;
  for (const auto& r : rows) m.append_row(r);
  return m;
}

double training_accuracy(const Matrix& scores, const std::vector<int>& classes, const std::vector<int>& y) {
  const auto pred = labels_from_scores(scores, classes);
  double hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += pred[i] == y[i];
  return hits / static_cast<double>(y.size());
}

/// Two Gaussian blobs in d dimensions, centers 10 apart.
void clusters(std::mt19937_64& rng, std::size_t n_per, std::size_t d, Rows& X, std::vector<int>& y) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < n_per; ++i) {
      std::vector<double> r(d);
      for (auto& v : r) v = g(rng) + 10.0 * c;
      X.push_back(r);
      y.push_back(c);
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Shared helpers

TEST(Common, ArgmaxPrefersLowestIndexOnTies) {
  EXPECT_EQ(argmax(std::vector<double>{0.5, 0.5, 0.0}), 0u);
  EXPECT_EQ(argmax(std::vector<double>{0.1, 0.3, 0.3}), 1u);
}

TEST(Common, IndexClassesSortsLabels) {
  const auto ci = index_classes(std::vector<int>{2, 0, 2, 1});
  EXPECT_EQ(ci.classes, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(ci.index, (std::vector<std::size_t>{2, 0, 2, 1}));
}

TEST(Common, TrainingInputValidation) {
  EXPECT_THROW(NaiveBayes::fit(Matrix(0, 2), std::vector<int>{}, {}), DataError);
  EXPECT_THROW(NaiveBayes::fit(Matrix(2, 2), std::vector<int>{0}, {}), DataError);
}

// ---------------------------------------------------------------------------
// Naive Bayes

TEST(NaiveBayes, SymmetricMidpointIsEven) {
  const auto m = NaiveBayes::fit(to_matrix({{0}, {0}, {4}, {4}}), std::vector<int>{0, 0, 1, 1}, {1e-9});
  const auto s = m.predict_scores(to_matrix({{2}}));
  EXPECT_NEAR(s(0, 0), 0.5, 1e-9);
  EXPECT_NEAR(s(0, 1), 0.5, 1e-9);
}

TEST(NaiveBayes, LikelihoodDominance) {
  const auto m = NaiveBayes::fit(to_matrix({{0}, {1}, {10}, {11}}), std::vector<int>{0, 0, 1, 1}, {});
  const auto s = m.predict_scores(to_matrix({{0.5}}));
  EXPECT_EQ(labels_from_scores(s, m.classes())[0], 0);
}

TEST(NaiveBayes, ConstantFeatureWithSmoothingMatchesClosedForm) {
  const Rows X = {{1.0, 3.0}, {2.0, 3.0}, {4.0, 3.0}, {6.0, 3.0}, {7.5, 3.0}};
  const std::vector<int> y = {0, 0, 1, 1, 1};
  const auto m = NaiveBayes::fit(to_matrix(X), y, {1e-3});
  for (double q : {0.0, 2.5, 3.9, 5.0, 9.0}) {
    const std::vector<double> x = {q, 3.0};
    const auto s = m.predict_scores(to_matrix({x}));
    const auto want = oracle::gaussian_nb_posterior(X, y, 1e-3, x);
    EXPECT_NEAR(s(0, 0), want[0], 1e-9);
    EXPECT_NEAR(s(0, 1), want[1], 1e-9);
  }
}

TEST(NaiveBayes, ZeroVarianceWithoutSmoothingIsNumericalError) {
  EXPECT_THROW(NaiveBayes::fit(to_matrix({{1.0}, {1.0}, {2.0}, {2.0}}), std::vector<int>{0, 0, 1, 1}, {0.0}),
               NumericalError);
}

TEST(NaiveBayes, PosteriorsMatchClosedFormOnRandomData) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Rows X;
    std::vector<int> y;
    for (int i = 0; i < 30; ++i) {
      const int c = i % 3;
      X.push_back({g(rng) + c, 2.0 * g(rng) - c, g(rng) * 0.5});
      y.push_back(c);
    }
    const double smoothing = trial % 2 ? 1.87382e-4 : 1e-9;
    const auto m = NaiveBayes::fit(to_matrix(X), y, {smoothing});
    for (int q = 0; q < 10; ++q) {
      const std::vector<double> x = {g(rng), g(rng), g(rng)};
      const auto s = m.predict_scores(to_matrix({x}));
      const auto want = oracle::gaussian_nb_posterior(X, y, smoothing, x);
      for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(s(0, c), want[c], 1e-9);
    }
  }
}

// ---------------------------------------------------------------------------
// Decision tree

TEST(DecisionTree, FourPointExample) {
  const auto X = to_matrix({{0}, {1}, {2}, {3}});
  const std::vector<int> y = {0, 0, 1, 1};
  const auto m = DecisionTree::fit(X, y, {}, 0);
  const auto& root = m.tree().nodes()[0];
  EXPECT_EQ(root.feature, 0);
  EXPECT_GT(root.threshold, 1.0);
  EXPECT_LT(root.threshold, 2.0);
  EXPECT_EQ(training_accuracy(m.predict_scores(X), m.classes(), y), 1.0);
}

TEST(DecisionTree, PureInputIsOneLeaf) {
  const auto X = to_matrix({{0}, {5}, {9}});
  const auto m = DecisionTree::fit(X, std::vector<int>{2, 2, 2}, {}, 0);
  EXPECT_EQ(m.tree().nodes().size(), 1u);
  const auto s = m.predict_scores(to_matrix({{100}}));
  EXPECT_EQ(s(0, 0), 1.0);
}

TEST(DecisionTree, MinSamplesSplitForcesMajorityLeaf) {
  const auto X = to_matrix({{0}, {1}, {2}, {3}});
  DecisionTreeParams p;
  p.min_samples_split = 10;
  const auto m = DecisionTree::fit(X, std::vector<int>{0, 1, 1, 1}, p, 0);
  EXPECT_EQ(m.tree().nodes().size(), 1u);
  EXPECT_EQ(labels_from_scores(m.predict_scores(to_matrix({{0}})), m.classes())[0], 1);
}

TEST(DecisionTree, MatchesExhaustiveSplitOracle) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> n_dist(1, 8), d_dist(1, 2), value(0, 5), label(0, 2), leaf(1, 3),
      split(2, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(n_dist(rng));
    const auto d = static_cast<std::size_t>(d_dist(rng));
    Rows X(n, std::vector<double>(d));
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : X[i]) v = value(rng) * 0.5;
      y[i] = label(rng);
    }
    DecisionTreeParams p;
    p.min_samples_leaf = static_cast<std::size_t>(trial % 3 == 0 ? leaf(rng) : 1);
    p.min_samples_split = static_cast<std::size_t>(trial % 4 == 0 ? split(rng) : 2);
    const auto m = DecisionTree::fit(to_matrix(X), y, p, static_cast<std::uint64_t>(trial));
    const oracle::ExhaustiveTree want(X, y, p.min_samples_split, p.min_samples_leaf);
    const auto& got = m.tree().nodes();
    ASSERT_EQ(got.size(), want.nodes().size()) << "trial " << trial;
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_EQ(got[k].feature, want.nodes()[k].feature) << "trial " << trial << " node " << k;
      if (got[k].is_leaf()) {
        ASSERT_EQ(got[k].value.size(), want.nodes()[k].value.size());
        for (std::size_t c = 0; c < got[k].value.size(); ++c) {
          EXPECT_NEAR(got[k].value[c], want.nodes()[k].value[c], 1e-15);
        }
      } else {
        EXPECT_NEAR(got[k].threshold, want.nodes()[k].threshold, 1e-12) << "trial " << trial;
      }
    }
  }
}

TEST(DecisionTree, LeafConstraintIsRespected) {
  std::mt19937_64 rng(4);
  Rows X;
  std::vector<int> y;
  clusters(rng, 40, 3, X, y);
  DecisionTreeParams p;
  p.min_samples_leaf = 7;
  const auto Xm = to_matrix(X);
  const auto m = DecisionTree::fit(Xm, y, p, 1);
  std::vector<std::size_t> per_leaf(m.tree().nodes().size(), 0);
  for (std::size_t i = 0; i < Xm.rows(); ++i) ++per_leaf[m.tree().apply(Xm.row(i))];
  for (std::size_t k = 0; k < per_leaf.size(); ++k) {
    if (m.tree().nodes()[k].is_leaf()) {
      EXPECT_GE(per_leaf[k], 7u);
    }
  }
}

TEST(DecisionTree, MaxFeaturesResolution) {
  EXPECT_EQ(resolve_max_features(MaxFeatures::All, 80), 80u);
  EXPECT_EQ(resolve_max_features(MaxFeatures::Sqrt, 80), 8u);
  EXPECT_EQ(resolve_max_features(MaxFeatures::Log2, 80), 6u);
  EXPECT_EQ(resolve_max_features(MaxFeatures::Sqrt, 6), 2u);
  EXPECT_EQ(resolve_max_features(MaxFeatures::Log2, 6), 2u);
  EXPECT_EQ(resolve_max_features(MaxFeatures::Log2, 1), 1u);
  EXPECT_EQ(parse_max_features("auto"), MaxFeatures::Sqrt);
  EXPECT_THROW((void)parse_max_features("half"), UsageError);
}

TEST(DecisionTree, SubsampledFeaturesStillSeparateAndAreSeedStable) {
  std::mt19937_64 rng(8);
  Rows X;
  std::vector<int> y;
  clusters(rng, 30, 9, X, y);
  DecisionTreeParams p;
  p.max_features = MaxFeatures::Log2;
  const auto Xm = to_matrix(X);
  const auto a = DecisionTree::fit(Xm, y, p, 5);
  const auto b = DecisionTree::fit(Xm, y, p, 5);
  EXPECT_EQ(a.tree().nodes(), b.tree().nodes());
  EXPECT_EQ(training_accuracy(a.predict_scores(Xm), a.classes(), y), 1.0);
}

// ---------------------------------------------------------------------------
// Random forest

TEST(RandomForest, SingleTreeWithoutBootstrapEqualsDecisionTree) {
  std::mt19937_64 rng(12);
  Rows X;
  std::vector<int> y;
  clusters(rng, 25, 4, X, y);
  for (std::size_t i = 0; i < y.size(); i += 7) y[i] = 1 - y[i];  // some label noise
  const auto Xm = to_matrix(X);
  RandomForestParams rp;
  rp.n_estimators = 1;
  rp.bootstrap = false;
  rp.max_features = MaxFeatures::All;
  const auto forest = RandomForest::fit(Xm, y, rp, 3);
  const auto tree = DecisionTree::fit(Xm, y, {}, 3);
  EXPECT_EQ(forest.predict_scores(Xm), tree.predict_scores(Xm));
}

TEST(RandomForest, PureLabels) {
  const auto Xm = to_matrix({{1, 2}, {3, 4}, {5, 6}});
  RandomForestParams rp;
  rp.n_estimators = 4;
  const auto m = RandomForest::fit(Xm, std::vector<int>{1, 1, 1}, rp, 0);
  const auto s = m.predict_scores(to_matrix({{0, 0}}));
  EXPECT_EQ(s.cols(), 1u);
  EXPECT_EQ(s(0, 0), 1.0);
}

TEST(RandomForest, SeparatedClustersAgreeWithPerTreeMajority) {
  std::mt19937_64 rng(31);
  Rows X;
  std::vector<int> y;
  clusters(rng, 50, 5, X, y);
  const auto Xm = to_matrix(X);
  RandomForestParams rp;
  rp.n_estimators = 16;
  const auto m = RandomForest::fit(Xm, y, rp, 100);
  ASSERT_EQ(m.trees().size(), 16u);
  const auto scores = m.predict_scores(Xm);
  EXPECT_EQ(training_accuracy(scores, m.classes(), y), 1.0);
  // Recompute the forest average from the individual trees.
  for (std::size_t i = 0; i < Xm.rows(); ++i) {
    double votes1 = 0;
    for (const auto& t : m.trees()) votes1 += t.value(Xm.row(i))[1];
    EXPECT_NEAR(scores(i, 1), votes1 / 16.0, 1e-12);
  }
}

TEST(RandomForest, BootstrapMakesTreesDiffer) {
  std::mt19937_64 rng(2);
  Rows X;
  std::vector<int> y;
  clusters(rng, 30, 4, X, y);
  for (std::size_t i = 0; i < y.size(); i += 5) y[i] = 1 - y[i];
  RandomForestParams rp;
  rp.n_estimators = 5;
  const auto m = RandomForest::fit(to_matrix(X), y, rp, 7);
  std::set<std::size_t> sizes;
  for (const auto& t : m.trees()) sizes.insert(t.nodes().size());
  EXPECT_GT(sizes.size(), 1u);
}

// ---------------------------------------------------------------------------
// KNN

TEST(Knn, ExactTrainingPointWithK1) {
  const auto Xm = to_matrix({{0, 0}, {1, 1}, {5, 5}});
  const auto m = Knn::fit(Xm, std::vector<int>{0, 1, 2}, {1});
  const auto s = m.predict_scores(to_matrix({{1, 1}}));
  EXPECT_EQ(s(0, 1), 1.0);
  EXPECT_EQ(s(0, 0), 0.0);
}

TEST(Knn, VoteFractions) {
  const auto Xm = to_matrix({{0}, {1}, {2}, {50}, {60}});
  const auto m = Knn::fit(Xm, std::vector<int>{0, 0, 1, 2, 2}, {3});
  const auto s = m.predict_scores(to_matrix({{0.5}}));
  EXPECT_NEAR(s(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(s(0, 1), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(s(0, 2), 0.0);
  EXPECT_EQ(labels_from_scores(s, m.classes())[0], 0);
}

TEST(Knn, VoteTieGoesToLowerClassCode) {
  const auto Xm = to_matrix({{-1}, {1}, {-2}, {2}, {-3}, {3}});
  const auto m = Knn::fit(Xm, std::vector<int>{1, 0, 1, 0, 1, 0}, {6});
  EXPECT_EQ(labels_from_scores(m.predict_scores(to_matrix({{0}})), m.classes())[0], 0);
}

TEST(Knn, DistanceTieGoesToLowerIndex) {
  const auto Xm = to_matrix({{1}, {-1}, {1}});
  const auto m = Knn::fit(Xm, std::vector<int>{0, 1, 2}, {1});
  EXPECT_EQ(m.neighbors(std::vector<double>{0.0}), (std::vector<std::size_t>{0}));
  const auto m2 = Knn::fit(Xm, std::vector<int>{0, 1, 2}, {2});
  EXPECT_EQ(m2.neighbors(std::vector<double>{0.0}), (std::vector<std::size_t>{0, 1}));
}

TEST(Knn, TooManyNeighborsIsAnError) {
  EXPECT_THROW(Knn::fit(to_matrix({{0}, {1}}), std::vector<int>{0, 1}, {3}), DataError);
}

TEST(Knn, MatchesExhaustiveSearchOnRandomQueries) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> grid(0, 4);  // coarse grid creates distance ties
  Rows X(60, std::vector<double>(3));
  std::vector<int> y(60);
  for (std::size_t i = 0; i < X.size(); ++i) {
    for (auto& v : X[i]) v = grid(rng);
    y[i] = static_cast<int>(i % 3);
  }
  const std::vector<int> classes = {0, 1, 2};
  for (std::size_t k : {1u, 4u, 6u, 11u}) {
    const auto m = Knn::fit(to_matrix(X), y, {k});
    std::mt19937_64 qrng(k);
    for (int q = 0; q < 200; ++q) {
      std::vector<double> x(3);
      for (auto& v : x) v = grid(qrng) + (q % 2 ? 0.5 : 0.0);
      const auto s = m.predict_scores(to_matrix({x}));
      const auto want = oracle::brute_knn(X, y, classes, k, x);
      for (std::size_t c = 0; c < 3; ++c) ASSERT_NEAR(s(0, c), want[c], 1e-12) << "k=" << k << " q=" << q;
    }
  }
}

// ---------------------------------------------------------------------------
// Gradient boosting

TEST(GradientBoosting, ZeroLearningRateGivesPriors) {
  const auto Xm = to_matrix({{0}, {1}, {2}, {3}, {4}});
  GradientBoostingParams p;
  p.learning_rate = 0.0;
  p.n_estimators = 5;
  const auto m = GradientBoosting::fit(Xm, std::vector<int>{0, 1, 1, 1, 2}, p, 0);
  const auto s = m.predict_scores(to_matrix({{-10}, {2}, {99}}));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(s(i, 0), 0.2, 1e-12);
    EXPECT_NEAR(s(i, 1), 0.6, 1e-12);
    EXPECT_NEAR(s(i, 2), 0.2, 1e-12);
  }
  EXPECT_EQ(labels_from_scores(s, m.classes())[0], 1);
}

TEST(GradientBoosting, FourPointExampleDevianceNonIncreasing) {
  const auto Xm = to_matrix({{0}, {1}, {2}, {3}});
  const std::vector<int> y = {0, 0, 1, 1};
  GradientBoostingParams p;
  p.learning_rate = 0.1;
  p.max_depth = 1;
  p.n_estimators = 100;
  const auto m = GradientBoosting::fit(Xm, y, p, 0);
  EXPECT_EQ(training_accuracy(m.predict_scores(Xm), m.classes(), y), 1.0);
  const auto& dev = m.train_deviance();
  ASSERT_EQ(dev.size(), 100u);
  for (std::size_t s = 1; s < dev.size(); ++s) EXPECT_LE(dev[s], dev[s - 1]) << "stage " << s;
  EXPECT_LT(dev.back(), dev.front());
}

TEST(GradientBoosting, DevianceNonIncreasingOnRandomProblems) {
  std::mt19937_64 rng(44);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Rows X;
    std::vector<int> y;
    for (int i = 0; i < 60; ++i) {
      const int c = i % 3;
      X.push_back({g(rng) + c, g(rng) - 0.5 * c, g(rng)});
      y.push_back(c);
    }
    GradientBoostingParams p;
    p.learning_rate = 0.1 + 0.05 * trial;
    p.max_depth = 1 + static_cast<std::size_t>(trial % 4);
    p.n_estimators = 30;
    const auto m = GradientBoosting::fit(to_matrix(X), y, p, static_cast<std::uint64_t>(trial));
    const auto& dev = m.train_deviance();
    for (std::size_t s = 1; s < dev.size(); ++s) EXPECT_LE(dev[s], dev[s - 1] + 1e-12) << trial << "/" << s;
  }
}

TEST(GradientBoosting, RecordedDevianceMatchesPrediction) {
  std::mt19937_64 rng(5);
  Rows X;
  std::vector<int> y;
  clusters(rng, 20, 2, X, y);
  for (std::size_t i = 0; i < y.size(); i += 4) y[i] = 1 - y[i];
  const auto Xm = to_matrix(X);
  GradientBoostingParams p;
  p.n_estimators = 20;
  const auto m = GradientBoosting::fit(Xm, y, p, 1);
  const auto ci = index_classes(y);
  EXPECT_EQ(GradientBoosting::deviance(m.decision_function(Xm), ci.index), m.train_deviance().back());
}

TEST(GradientBoosting, SingleClassIsAnError) {
  EXPECT_THROW(GradientBoosting::fit(to_matrix({{0}, {1}}), std::vector<int>{1, 1}, {}, 0), DataError);
}

TEST(GradientBoosting, SubsampleIsSeedDeterministic) {
  std::mt19937_64 rng(9);
  Rows X;
  std::vector<int> y;
  clusters(rng, 40, 6, X, y);
  for (std::size_t i = 0; i < y.size(); i += 3) y[i] = 1 - y[i];
  const auto Xm = to_matrix(X);
  GradientBoostingParams p;
  p.learning_rate = 0.01;
  p.max_depth = 7;
  p.n_estimators = 50;
  p.subsample = 0.5;
  const auto a = GradientBoosting::fit(Xm, y, p, 100);
  const auto b = GradientBoosting::fit(Xm, y, p, 100);
  const auto c = GradientBoosting::fit(Xm, y, p, 101);
  EXPECT_EQ(a.predict_scores(Xm), b.predict_scores(Xm));
  EXPECT_FALSE(a.predict_scores(Xm) == c.predict_scores(Xm));
}

TEST(GradientBoosting, ParameterValidation) {
  GradientBoostingParams p;
  p.subsample = 0.0;
  EXPECT_THROW(p.validate(), UsageError);
  p.subsample = 1.5;
  EXPECT_THROW(p.validate(), UsageError);
  p = {};
  p.n_estimators = 0;
  EXPECT_THROW(p.validate(), UsageError);
}
