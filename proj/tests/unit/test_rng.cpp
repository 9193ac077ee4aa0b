#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "rfattn/geometry.hpp"
#include "rfattn/rng.hpp"

using namespace rfattn;

TEST(RngStream, SameIdentitySameSequence) {
  RngStream a(42, 3);
  RngStream b(42, 3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngStream, DifferentSeedsDiffer) {
  RngStream a(1);
  RngStream b(2);
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += a.next_u64() == b.next_u64();
  EXPECT_EQ(equal, 0);
}

TEST(RngStream, DeriveIgnoresConsumption) {
  RngStream a(9);
  const RngStream fresh = a.derive(StreamTag::kWeights, 5);
  for (int i = 0; i < 37; ++i) a.normal();
  RngStream later = a.derive(StreamTag::kWeights, 5);
  RngStream f = fresh;
  for (int i = 0; i < 20; ++i) EXPECT_EQ(f.next_u64(), later.next_u64());
}

TEST(RngStream, DerivedStreamsAreDistinct) {
  const RngStream root(7);
  std::set<std::uint64_t> firsts;
  for (auto tag : {StreamTag::kWeights, StreamTag::kTrainData, StreamTag::kTestData, StreamTag::kTarget}) {
    for (std::uint64_t i = 0; i < 50; ++i) firsts.insert(root.derive(tag, i).next_u64());
  }
  EXPECT_EQ(firsts.size(), 200u);
}

TEST(RngStream, UniformRangeAndMean) {
  RngStream s(3);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double v = s.uniform_open();
    ASSERT_GT(v, 0.0);
    ASSERT_LT(v, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(RngStream, NormalMoments) {
  RngStream s(5);
  const int n = 400000;
  double m1 = 0, m2 = 0, m4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    m1 += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  EXPECT_NEAR(m1, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(m2, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(m4, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(Sphere, UnitNormAndIsotropy) {
  RngStream s(11);
  const int d = 5;
  const int n = 100000;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = sample_sphere(s, d);
    ASSERT_NEAR(x.norm(), 1.0, 1e-14);
    mean += x;
    second += x * x.transpose();
  }
  mean /= n;
  second /= n;
  // Coordinates have variance 1/d; E[x x^T] = I/d.
  for (int i = 0; i < d; ++i) {
    EXPECT_NEAR(mean(i), 0.0, 4.0 / std::sqrt(d * static_cast<double>(n)));
    for (int j = 0; j < d; ++j) EXPECT_NEAR(second(i, j), i == j ? 1.0 / d : 0.0, 0.005);
  }
}

TEST(Sphere, DimensionOneIsSign) {
  RngStream s(1);
  int plus = 0;
  for (int i = 0; i < 2000; ++i) {
    const double v = sample_sphere(s, 1)(0);
    ASSERT_EQ(std::abs(v), 1.0);
    plus += v > 0;
  }
  EXPECT_NEAR(plus, 1000, 150);
}

TEST(Sphere, RejectsBadDimension) {
  RngStream s(1);
  EXPECT_THROW(sample_sphere(s, 0), InvalidDimension);
  EXPECT_THROW(sample_sequence(s, 3, 0), InvalidDimension);
}

TEST(TokenSequence, ValidatesInput) {
  Eigen::VectorXd x0 = Eigen::VectorXd::Unit(3, 0);
  Eigen::MatrixXd keys(2, 3);
  keys << 0, 1, 0, 0, 0, 1;
  EXPECT_NO_THROW(TokenSequence(x0, keys));
  EXPECT_THROW(TokenSequence(2.0 * x0, keys), DomainError);
  Eigen::MatrixXd bad = keys;
  bad(1, 2) = 0.5;
  EXPECT_THROW(TokenSequence(x0, bad), DomainError);
  EXPECT_THROW(TokenSequence(x0, Eigen::MatrixXd::Identity(2, 2)), ShapeError);
  EXPECT_THROW(TokenSequence(x0, Eigen::MatrixXd(0, 3)), InvalidDimension);
}

TEST(TokenSequence, AugmentedAndFlattenedLayout) {
  RngStream s(4);
  const TokenSequence x = sample_sequence(s, 3, 2);
  const Eigen::VectorXd q = x.augmented_query();
  EXPECT_EQ(q.size(), 4);
  EXPECT_EQ(q(3), 1.0);
  EXPECT_NEAR(q.squaredNorm(), 2.0, 1e-14);
  const Eigen::MatrixXd k = x.augmented_keys();
  EXPECT_EQ(k.rows(), 4);
  EXPECT_EQ(k.cols(), 2);
  EXPECT_EQ(k(3, 1), 1.0);
  EXPECT_EQ(k(1, 1), x.keys()(1, 1));
  const Eigen::VectorXd v = x.flattened();
  ASSERT_EQ(v.size(), 3 * 3 + 1);
  EXPECT_EQ(v(0), x.query()(0));
  EXPECT_EQ(v(3 + 2), x.keys()(0, 2));
  EXPECT_EQ(v(6 + 0), x.keys()(1, 0));
  EXPECT_EQ(v(9), 1.0);
  EXPECT_NEAR(v.squaredNorm(), 4.0, 1e-13);  // N + 2
}

TEST(TokenSequence, Permuted) {
  RngStream s(8);
  const TokenSequence x = sample_sequence(s, 2, 3);
  const std::vector<int> perm = {2, 0, 1};
  const TokenSequence y = x.permuted(perm);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(y.key(i), x.key(perm[i]));
  EXPECT_EQ(y.query(), x.query());
  EXPECT_THROW(x.permuted(std::vector<int>{0, 1}), ShapeError);
}

TEST(SampleBatch, DeterministicGivenStream) {
  RngStream a(100);
  RngStream b(100);
  const auto xa = sample_batch(a, 5, 4, 3);
  const auto xb = sample_batch(b, 5, 4, 3);
  ASSERT_EQ(xa.size(), 5u);
  for (std::size_t i = 0; i < xa.size(); ++i) {
    EXPECT_EQ(xa[i].query(), xb[i].query());
    EXPECT_EQ(xa[i].keys(), xb[i].keys());
  }
}
