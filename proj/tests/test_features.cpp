#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "kneehar/features.hpp"
#include "oracles/oracles.hpp"
#include "test_util.hpp"

using namespace kneehar;
using testutil::rel_err;

namespace {

std::vector<double> random_window(std::mt19937_64& rng, std::size_t n = 80) {
  std::uniform_real_distribution<double> u(-20.0, 120.0);
  std::vector<double> w(n);
  for (auto& v : w) v = u(rng);
  return w;
}

void expect_matches_oracle(const std::vector<double>& w, MedianConvention median) {
  const auto f = extract_features(w, median);
  const auto o = oracle::brute_features(w, median == MedianConvention::LowerMiddle);
  EXPECT_EQ(f.min, o.min);
  EXPECT_EQ(f.max, o.max);
  EXPECT_LE(rel_err(f.mean, o.mean), 1e-9);
  EXPECT_LE(rel_err(f.median, o.median), 1e-9);
  EXPECT_LE(rel_err(f.std, o.std), 1e-9);
  EXPECT_LE(rel_err(f.mad, o.mad), 1e-9);
}

}  // namespace

TEST(Features, WorkedExampleOddLength) {
  const auto f = extract_features(std::vector<double>{1, 2, 3, 4, 5});
  EXPECT_EQ(f.min, 1.0);
  EXPECT_EQ(f.max, 5.0);
  EXPECT_DOUBLE_EQ(f.mean, 3.0);
  EXPECT_EQ(f.median, 3.0);
  EXPECT_NEAR(f.std, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(f.mad, 1.2, 1e-12);
}

TEST(Features, EvenLengthMedianConventions) {
  const std::vector<double> w = {0, 10};
  const auto f = extract_features(w);
  EXPECT_EQ(f.median, 5.0);
  EXPECT_EQ(f.mean, 5.0);
  EXPECT_EQ(f.std, 5.0);
  EXPECT_EQ(f.mad, 5.0);
  EXPECT_EQ(extract_features(w, MedianConvention::LowerMiddle).median, 0.0);
  EXPECT_EQ(extract_features(std::vector<double>{4, 1, 3, 2}, MedianConvention::LowerMiddle).median, 2.0);
}

TEST(Features, ConstantWindow) {
  for (double c : {0.0, 0.1, 37.25, -3.0}) {
    const auto f = extract_features(std::vector<double>(80, c));
    EXPECT_EQ(f.min, c);
    EXPECT_EQ(f.max, c);
    EXPECT_NEAR(f.mean, c, 1e-12);
    EXPECT_EQ(f.median, c);
    EXPECT_NEAR(f.std, 0.0, 1e-12);
    EXPECT_NEAR(f.mad, 0.0, 1e-12);
  }
}

TEST(Features, EmptyWindowIsAnError) {
  EXPECT_THROW((void)extract_features(std::vector<double>{}), DataError);
}

TEST(Features, MatchBruteForceOracleOnRandomWindows) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto w = random_window(rng);
    expect_matches_oracle(w, MedianConvention::Midpoint);
    expect_matches_oracle(w, MedianConvention::LowerMiddle);
  }
  // Odd lengths and heavy ties.
  std::uniform_int_distribution<int> small(0, 3);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> w(static_cast<std::size_t>(1 + i % 17));
    for (auto& v : w) v = small(rng);
    expect_matches_oracle(w, MedianConvention::Midpoint);
  }
}

TEST(Features, OrderingInvariants) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto f = extract_features(random_window(rng, static_cast<std::size_t>(1 + i % 100)));
    EXPECT_LE(f.min, f.median);
    EXPECT_LE(f.median, f.max);
    EXPECT_LE(f.min, f.mean);
    EXPECT_LE(f.mean, f.max);
    EXPECT_GE(f.std, 0.0);
    EXPECT_GE(f.mad, 0.0);
    EXPECT_LE(f.mad, f.std * (1.0 + 1e-12) + 1e-12);
  }
}

TEST(Features, ShiftEquivariance) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  for (int i = 0; i < 200; ++i) {
    const auto w = random_window(rng);
    const double c = shift(rng);
    auto shifted = w;
    for (auto& v : shifted) v += c;
    const auto a = extract_features(w);
    const auto b = extract_features(shifted);
    EXPECT_NEAR(b.min, a.min + c, 1e-9);
    EXPECT_NEAR(b.max, a.max + c, 1e-9);
    EXPECT_NEAR(b.mean, a.mean + c, 1e-9);
    EXPECT_NEAR(b.median, a.median + c, 1e-9);
    EXPECT_NEAR(b.std, a.std, 1e-9);
    EXPECT_NEAR(b.mad, a.mad, 1e-9);
  }
}

TEST(Features, ScaleEquivariance) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> scale(0.01, 20.0);
  for (int i = 0; i < 200; ++i) {
    const auto w = random_window(rng);
    const double s = scale(rng);
    auto scaled = w;
    for (auto& v : scaled) v *= s;
    const auto a = extract_features(w).as_array();
    const auto b = extract_features(scaled).as_array();
    for (std::size_t k = 0; k < 6; ++k) EXPECT_LE(rel_err(b[k], s * a[k]), 1e-9) << kFeatureNames[k];
  }
}

TEST(Featurize, ShapesAndProvenance) {
  const auto empty = featurize_all(std::vector<Window>{});
  EXPECT_EQ(empty.size(), 0u);
  EXPECT_EQ(empty.X.cols(), 6u);
  EXPECT_EQ(empty.column_names.size(), 6u);

  std::mt19937_64 rng(3);
  std::vector<Window> windows;
  for (int i = 0; i < 25; ++i) {
    windows.push_back({random_window(rng), kAllActivities[static_cast<std::size_t>(i % 3)], 100 + i, static_cast<std::size_t>(i)});
  }
  const auto m = featurize_all(windows);
  ASSERT_EQ(m.X.rows(), 25u);
  ASSERT_EQ(m.X.cols(), 6u);
  for (std::size_t i = 0; i < 25; ++i) {
    const auto f = extract_features(windows[i]).as_array();
    for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(m.X(i, k), f[k]);
    EXPECT_EQ(m.labels[i], activity_code(windows[i].label));
    EXPECT_EQ(m.subjects[i], windows[i].subject_id);
    EXPECT_EQ(m.offsets[i], windows[i].offset);
  }
  const auto raw = windows_to_matrix(windows);
  EXPECT_EQ(raw.X.cols(), 80u);
  const auto via_raw = featurize_matrix(raw);
  EXPECT_EQ(via_raw.X, m.X);
  EXPECT_EQ(via_raw.labels, m.labels);

  windows.back().values.pop_back();
  EXPECT_THROW((void)featurize_all(windows), DataError);
}

TEST(Featurize, SerializationIsStable) {
  std::mt19937_64 rng(5);
  std::vector<Window> windows;
  for (int i = 0; i < 10; ++i) windows.push_back({random_window(rng), Activity::Gait, 1, static_cast<std::size_t>(40 * i)});
  std::ostringstream a, b;
  write_labeled_matrix(a, featurize_all(windows));
  write_labeled_matrix(b, featurize_all(windows));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "subject,activity,offset,min,max,mean,median,std,mad");
}
