#include <rsdm/suites.hpp>
#include <rsdm/verify.hpp>

#include <gtest/gtest.h>

using namespace rsdm;

TEST(Prop1, TargetArithmetic) {
  EXPECT_DOUBLE_EQ(expected_projection_ratio(20, 5), 20.0 / 380.0);
  EXPECT_NEAR(expected_projection_ratio(20, 5), 0.052632, 5e-7);
  EXPECT_DOUBLE_EQ(expected_projection_ratio(10, 10), 1.0);
}

TEST(Prop1, FullRankRatioIsOne) {
  Rng rng(1);
  const Matrix x = random_stiefel(8, 3, rng).matrix();
  const Matrix g = rng.gaussian(8, 3);
  for (auto sampler : {SamplerKind::HaarOrthogonal, SamplerKind::UniformPermutation}) {
    const auto rep = prop1_ratio(x, g, sampler, 8, 200, rng);
    EXPECT_DOUBLE_EQ(rep.target, 1.0);
    EXPECT_NEAR(rep.estimate, 1.0, 1e-12);
    EXPECT_LE(std::abs(rep.z_score), 4.0);
  }
}

TEST(Prop1, MonteCarloMatchesClosedForm) {
  Rng rng(2);
  const Matrix x = random_stiefel(10, 5, rng).matrix();
  const Matrix g = rng.gaussian(10, 5);
  for (auto sampler : {SamplerKind::HaarOrthogonal, SamplerKind::UniformPermutation}) {
    const auto rep = prop1_ratio(x, g, sampler, 4, 100000, rng);
    EXPECT_LE(std::abs(rep.z_score), 4.0) << to_string(sampler);
    EXPECT_GT(rep.std_error, 0.0);
    EXPECT_EQ(rep.trials, 100000);
    EXPECT_DOUBLE_EQ(rep.target, 12.0 / 90.0);
  }
}

TEST(Prop1, ThreadCountDoesNotChangeResult) {
  const Matrix x = [] {
    Rng r(3);
    return random_stiefel(12, 4, r).matrix();
  }();
  const Matrix g = Matrix::Ones(12, 4) + x * 0.5 + Matrix::Identity(12, 4);
  Rng a(9), b(9);
  const auto one = prop1_ratio(x, g, SamplerKind::HaarOrthogonal, 5, 4000, a, 1);
  const auto four = prop1_ratio(x, g, SamplerKind::HaarOrthogonal, 5, 4000, b, 4);
  EXPECT_EQ(one.estimate, four.estimate);
  EXPECT_EQ(one.std_error, four.std_error);
}

TEST(Prop1, Preconditions) {
  Rng rng(4);
  const Matrix x = random_stiefel(6, 2, rng).matrix();
  EXPECT_THROW(prop1_ratio(x, rng.gaussian(6, 2), SamplerKind::HaarOrthogonal, 3, 99, rng), std::invalid_argument);
  EXPECT_THROW(prop1_ratio(x, rng.gaussian(6, 2), SamplerKind::HaarOrthogonal, 1, 100, rng), DimensionError);
  EXPECT_THROW(prop1_ratio(x, x, SamplerKind::HaarOrthogonal, 3, 100, rng), NumericalError);
}

TEST(Lemma2, GEqualsXGivesZero) {
  Rng rng(5);
  const Matrix x = random_stiefel(9, 4, rng).matrix();
  const auto res = lemma2_check(x, x);
  EXPECT_NEAR(res.lhs, 0.0, 1e-28);
  EXPECT_NEAR(res.rhs, 0.0, 1e-28);
  EXPECT_TRUE(res.ok);
}

TEST(Lemma2, SquareCase) {
  // On O(n), ||skew(G X^T)|| = ||grad F(X)||, so the bound holds with a factor of two to spare.
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    const Matrix x = random_stiefel(7, 7, rng).matrix();
    const Matrix g = rng.gaussian(7, 7);
    const auto res = lemma2_check(x, g);
    EXPECT_TRUE(res.ok);
    EXPECT_NEAR(res.lhs, 2.0 * res.rhs, 1e-10 * std::max(1.0, res.lhs));
  }
}

TEST(Lemma2, RandomRectangular) {
  Rng rng(7);
  for (int t = 0; t < 1000; ++t) {
    const Matrix x = random_stiefel(30, 12, rng).matrix();
    const Matrix g = rng.gaussian(30, 12);
    const auto res = lemma2_check(x, g);
    ASSERT_TRUE(res.ok) << "trial " << t << " slack " << res.lhs - res.rhs;
  }
}

TEST(Prop2, FullRankFractionIsOne) {
  Rng rng(8);
  const Matrix x = random_stiefel(10, 5, rng).matrix();
  const auto rep = prop2_tail(x, rng.gaussian(10, 5), 10, 1000, rng);
  EXPECT_DOUBLE_EQ(rep.fraction, 1.0);
}

TEST(Prop2, LargeSubspaceFraction) {
  Rng rng(9);
  const Matrix x = random_stiefel(10, 5, rng).matrix();
  const auto rep = prop2_tail(x, rng.gaussian(10, 5), 8, 10000, rng);
  EXPECT_GE(rep.fraction, 0.5);
  EXPECT_GT(rep.std_error, 0.0);
}

TEST(Prop2, MedianNearMean) {
  Rng rng(10);
  const Matrix x = random_stiefel(10, 5, rng).matrix();
  const auto rep = prop2_tail(x, rng.gaussian(10, 5), 5, 10000, rng);
  const double rel = rep.median_ratio / rep.expected_ratio;
  EXPECT_GE(rel, 0.5);
  EXPECT_LE(rel, 2.0);
  EXPECT_THROW(prop2_tail(x, rng.gaussian(10, 5), 5, 999, rng), std::invalid_argument);
}

TEST(NormIdentity, AgreesAcrossSizes) {
  Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    const Index n = 1 + static_cast<Index>(rng.below(64));
    const Index p = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    const Matrix x = random_stiefel(n, p, rng).matrix();
    const auto id = full_grad_norm_identity(x, rng.gaussian(n, p));
    EXPECT_NEAR(id.dense, id.trace_form, 1e-10 * std::max(1.0, id.dense));
  }
}

TEST(NormIdentity, HandValues) {
  Rng rng(12);
  const Matrix x = random_stiefel(6, 2, rng).matrix();
  const auto zero = full_grad_norm_identity(x, x);
  EXPECT_NEAR(zero.dense, 0.0, 1e-28);
  EXPECT_NEAR(zero.trace_form, 0.0, 1e-14);
  Matrix e1 = Matrix::Zero(3, 1), e2 = Matrix::Zero(3, 1);
  e1(0) = 1.0;
  e2(1) = 1.0;
  const auto half = full_grad_norm_identity(e1, e2);
  EXPECT_DOUBLE_EQ(half.dense, 0.5);
  EXPECT_DOUBLE_EQ(half.trace_form, 0.5);
}

TEST(BlockEmbedding, IdentityRotationIsExact) {
  Rng rng(13);
  const Matrix x = random_stiefel(12, 4, rng).matrix();
  EXPECT_EQ(block_embedding_equivalence(sample_permutation_frame(12, 5, rng), Matrix::Identity(5, 5), x), 0.0);
  EXPECT_LE(block_embedding_equivalence(sample_haar_frame(12, 5, rng), Matrix::Identity(5, 5), x), 1e-14);
}

TEST(BlockEmbedding, RandomInstances) {
  Rng rng(14);
  for (auto sampler : {SamplerKind::UniformPermutation, SamplerKind::HaarOrthogonal}) {
    const double tol = sampler == SamplerKind::UniformPermutation ? 1e-12 : 1e-11;
    for (int t = 0; t < 100; ++t) {
      const Index n = 2 + static_cast<Index>(rng.below(63));
      const Index p = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
      const Index r = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
      const Matrix x = random_stiefel(n, p, rng).matrix();
      const Matrix y = qf(rng.gaussian(r, r));
      EXPECT_LE(block_embedding_equivalence(sample_frame(sampler, n, r, rng), y, x), tol) << n << "," << r;
    }
  }
}

TEST(BlockEmbedding, CompletionIsOrthogonal) {
  Rng rng(15);
  const Frame f = sample_haar_frame(10, 3, rng);
  const Matrix p = complete_frame(f);
  EXPECT_LE((p * p.transpose() - Matrix::Identity(10, 10)).norm(), 1e-12);
  EXPECT_EQ(p.topRows(3), f.rows());
  EXPECT_THROW(block_embedding_equivalence(Frame::identity(65), Matrix::Identity(65, 65), Matrix::Identity(65, 1)),
               DimensionError);
}

TEST(MonteCarloReport, ZScore) {
  const auto rep = make_report(0.5, 0.1, 100, 0.3);
  EXPECT_NEAR(rep.z_score, 2.0, 1e-12);
  EXPECT_EQ(make_report(1.0, 0.0, 100, 1.0).z_score, 0.0);
  EXPECT_GT(std::abs(make_report(1.1, 0.0, 100, 1.0).z_score), 1e9);
}

TEST(Suites, AllPassOnCorrectBuild) {
  SuiteOptions o;
  o.seed = 7;
  o.prop1_trials = 20000;
  const auto results = run_suite("all", o);
  EXPECT_EQ(results.size(), 4u + 8u + 4u + 3u + 2u);
  for (const auto& r : results) EXPECT_TRUE(r.pass) << r.suite << "/" << r.name << " " << r.detail;
}

TEST(Suites, Prop1ReportCarriesTarget) {
  SuiteOptions o;
  o.seed = 7;
  o.prop1_trials = 1000;
  bool found = false;
  for (const auto& r : run_suite("prop1", o)) {
    if (r.data["n"] == 20 && r.data["r"] == 5) {
      EXPECT_DOUBLE_EQ(r.data["target"].get<double>(), 20.0 / 380.0);
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(Suites, CorruptedGradientFails) {
  SuiteOptions o;
  o.gradient_offset = 1e-3;
  for (const auto& r : run_suite("gradients", o)) EXPECT_FALSE(r.pass) << r.name;
  EXPECT_THROW(run_suite("bogus", o), ConfigError);
}
