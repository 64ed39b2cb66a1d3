#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <utility>

#include <gtest/gtest.h>

#include "httn/metrics.hpp"
#include "metric_oracle.hpp"

using namespace httn;

namespace {

Vector random_scores(std::size_t l, std::mt19937_64& rng) {
  // coarse grid so ties occur often
  std::uniform_int_distribution<int> d(0, 6);
  Vector s(l);
  for (double& x : s) x = d(rng) / 6.0;
  return s;
}

Vector random_truth(std::size_t l, std::mt19937_64& rng) {
  Vector t(l);
  for (double& x : t) x = (rng() % 3 == 0) ? 1.0 : 0.0;
  return t;
}

}  // namespace

TEST(PrecisionAtK, SpecExamples) {
  const Vector scores{0.9, 0.8, 0.1, 0.05};
  EXPECT_EQ(precision_at_k(scores, Vector{1, 0, 1, 0}, 2), 0.5);
  for (std::size_t k = 1; k <= 4; ++k) {
    EXPECT_EQ(precision_at_k(scores, Vector{1, 1, 1, 1}, k), 1.0);
    EXPECT_EQ(precision_at_k(scores, Vector{0, 0, 0, 0}, k), 0.0);
  }
}

TEST(PrecisionAtK, TiesGoToLowerIndex) {
  EXPECT_EQ(rank_labels(Vector{0.5, 0.5, 0.9, 0.5}), (std::vector<std::size_t>{2, 0, 1, 3}));
  EXPECT_EQ(precision_at_k(Vector{0.5, 0.5}, Vector{1, 0}, 1), 1.0);
  EXPECT_EQ(precision_at_k(Vector{0.5, 0.5}, Vector{0, 1}, 1), 0.0);
}

TEST(PrecisionAtK, KOutOfRange) {
  EXPECT_THROW(precision_at_k(Vector{1, 2}, Vector{0, 1}, 0), std::invalid_argument);
  EXPECT_THROW(precision_at_k(Vector{1, 2}, Vector{0, 1}, 3), std::invalid_argument);
  EXPECT_THROW(ndcg_at_k(Vector{1, 2}, Vector{0, 1}, 3), std::invalid_argument);
  EXPECT_THROW(precision_at_k(Vector{1, 2}, Vector{0}, 1), ShapeError);
}

TEST(NdcgAtK, SpecExamples) {
  EXPECT_EQ(ndcg_at_k(Vector{0.9, 0.5, 0.1}, Vector{1, 0, 0}, 3), 1.0);
  EXPECT_NEAR(ndcg_at_k(Vector{0.9, 0.5, 0.1}, Vector{0, 1, 0}, 3), 1.0 / std::log2(3.0), 1e-15);
  EXPECT_NEAR(ndcg_at_k(Vector{0.9, 0.5, 0.1}, Vector{0, 1, 0}, 3), 0.6309, 1e-4);
  EXPECT_EQ(ndcg_at_k(Vector{0.9, 0.8, 0.7, 0.1}, Vector{1, 1, 1, 0}, 2), 1.0);
  EXPECT_EQ(ndcg_at_k(Vector{0.9, 0.8}, Vector{0, 0}, 2), 0.0);
}

TEST(RankingMetrics, MatchBruteForceOracle) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t l = 1 + rng() % 12;
    const Vector s = random_scores(l, rng), t = random_truth(l, rng);
    const std::size_t k = 1 + rng() % l;
    EXPECT_EQ(precision_at_k(s, t, k), oracle::precision(s, t, k));
    EXPECT_EQ(ndcg_at_k(s, t, k), oracle::ndcg(s, t, k));
  }
}

TEST(RankingMetrics, MonotoneTransformInvariance) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd(0.0, 3.0);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t l = 2 + rng() % 10;
    Vector logits(l), probs(l);
    for (std::size_t i = 0; i < l; ++i) {
      logits[i] = nd(rng);
      probs[i] = sigmoid(logits[i]);
    }
    const Vector t = random_truth(l, rng);
    for (std::size_t k = 1; k <= l; ++k) {
      EXPECT_EQ(precision_at_k(logits, t, k), precision_at_k(probs, t, k));
      EXPECT_EQ(ndcg_at_k(logits, t, k), ndcg_at_k(probs, t, k));
      const double n = ndcg_at_k(probs, t, k);
      EXPECT_GE(n, 0.0);
      EXPECT_LE(n, 1.0 + 1e-15);
    }
  }
}

TEST(F1, PerfectAndAllNegative) {
  const Matrix truth{{1, 0, 1}, {0, 1, 0}};
  const F1Result perfect = f1_scores(truth, truth);
  EXPECT_EQ(perfect.micro, 1.0);
  EXPECT_EQ(perfect.macro, 1.0);
  const F1Result none = f1_scores(Matrix(2, 3), truth);
  EXPECT_EQ(none.micro, 0.0);
  EXPECT_EQ(none.macro, 0.0);
}

TEST(F1, ThresholdIsStrict) {
  const Matrix probs{{0.5, 0.50001}};
  const Matrix truth{{1, 1}};
  const F1Result r = f1_scores(probs, truth);
  EXPECT_EQ(r.per_label[0].true_positives, 0u);
  EXPECT_EQ(r.per_label[1].true_positives, 1u);
}

TEST(F1, ZeroOverZeroIsZero) {
  const F1Result r = f1_scores(Matrix{{0.1}}, Matrix{{0.0}});
  EXPECT_EQ(r.per_label[0].precision, 0.0);
  EXPECT_EQ(r.per_label[0].recall, 0.0);
  EXPECT_EQ(r.per_label[0].f1, 0.0);
}

TEST(F1, MatchesPooledCountOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = rep == 0 ? 20 : 1 + rng() % 25, l = rep == 0 ? 6 : 1 + rng() % 8;
    Matrix probs(n, l), truth(n, l);
    for (double& x : probs.data()) x = u(rng);
    for (double& x : truth.data()) x = (rng() % 3 == 0) ? 1.0 : 0.0;
    const F1Result got = f1_scores(probs, truth);
    const oracle::F1 want = oracle::f1(probs, truth, 0.5);
    EXPECT_NEAR(got.micro, want.micro, 1e-12);
    EXPECT_NEAR(got.macro, want.macro, 1e-12);
  }
}

TEST(F1, MicroIsHarmonicOfPooledPrecisionRecall) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix probs(30, 5), truth(30, 5);
  for (double& x : probs.data()) x = u(rng);
  for (double& x : truth.data()) x = (rng() % 2) ? 1.0 : 0.0;
  const F1Result r = f1_scores(probs, truth);
  double tp = 0, fp = 0, fn = 0;
  for (const auto& s : r.per_label) {
    tp += static_cast<double>(s.true_positives);
    fp += static_cast<double>(s.false_positives);
    fn += static_cast<double>(s.false_negatives);
  }
  const double p = tp / (tp + fp), rc = tp / (tp + fn);
  EXPECT_NEAR(r.micro, 2 * p * rc / (p + rc), 1e-12);
}

TEST(F1, RejectsBadInput) {
  EXPECT_THROW(f1_scores(Matrix(2, 2), Matrix(2, 3)), ShapeError);
  EXPECT_THROW(f1_scores(Matrix(2, 2), Matrix(2, 2), 1.0), std::invalid_argument);
  EXPECT_THROW(f1_scores(Matrix(2, 2), Matrix(2, 2), 0.0), std::invalid_argument);
}

TEST(Evaluate, UniformProbabilitiesRankByIndex) {
  Matrix probs(2, 4);
  for (double& x : probs.data()) x = 0.5;
  const Matrix truth{{1, 0, 0, 0}, {0, 0, 0, 1}};
  const EvalReport r = evaluate_probabilities(probs, truth, {0, 1}, {2, 3});
  EXPECT_EQ(r.overall.precision_at[0], 0.5);
  EXPECT_EQ(r.overall.micro_f1, 0.0);
  EXPECT_EQ(r.tail.ranked_documents, 1u);
  EXPECT_EQ(r.tail.skipped_documents, 1u);
  EXPECT_EQ(r.tail.precision_at[0], 0.0);
}

TEST(Evaluate, SingleDocumentEqualsDirectMetrics) {
  const Vector s{0.9, 0.2, 0.7, 0.4, 0.6};
  const Vector t{0, 1, 1, 0, 1};
  const Matrix probs = Matrix::row_vector(s), truth = Matrix::row_vector(t);
  const EvalReport r = evaluate_probabilities(probs, truth, {0, 1, 2}, {3, 4});
  for (std::size_t q = 0; q < 3; ++q) {
    const std::size_t k = r.overall.ks[q];
    EXPECT_EQ(r.overall.precision_at[q], precision_at_k(s, t, k));
    EXPECT_EQ(r.overall.ndcg_at[q], ndcg_at_k(s, t, k));
  }
  EXPECT_EQ(r.overall.micro_f1, f1_scores(probs, truth).micro);
  EXPECT_EQ(r.per_label.size(), 5u);
}

TEST(Evaluate, KIsCappedPerSlice) {
  const Matrix probs{{0.9, 0.1, 0.8, 0.3}};
  const Matrix truth{{1, 0, 0, 1}};
  const EvalReport r = evaluate_probabilities(probs, truth, {0, 1, 2}, {3});
  EXPECT_EQ(r.tail.precision_at[2], 1.0);
  EXPECT_EQ(r.tail.ndcg_at[2], 1.0);
  EXPECT_EQ(r.head.precision_at[0], 1.0);
  EXPECT_NEAR(r.head.precision_at[1], 1.0 / 3.0, 1e-15);
}

TEST(Evaluate, ReportIsReproducibleAndBounded) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix probs(40, 7), truth(40, 7);
  for (double& x : probs.data()) x = u(rng);
  for (double& x : truth.data()) x = (rng() % 3 == 0) ? 1.0 : 0.0;
  const EvalReport a = evaluate_probabilities(probs, truth, {0, 1, 2, 3}, {4, 5, 6});
  const EvalReport b = evaluate_probabilities(probs, truth, {0, 1, 2, 3}, {4, 5, 6});
  std::ostringstream sa, sb;
  write_report_csv(sa, "m", a);
  write_report_csv(sb, "m", b);
  EXPECT_EQ(sa.str(), sb.str());
  for (const SliceReport* s : {&a.overall, &a.head, &a.tail}) {
    for (double v : s->precision_at) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
    for (double v : s->ndcg_at) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
    EXPECT_TRUE(s->micro_f1 >= 0.0 && s->micro_f1 <= 1.0);
    EXPECT_TRUE(s->macro_f1 >= 0.0 && s->macro_f1 <= 1.0);
  }
  std::ostringstream per;
  write_per_label_csv(per, a);
  const std::string text = per.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 8);
}

TEST(Evaluate, EmptyTestSetAndBadK) {
  EXPECT_THROW(evaluate_probabilities(Matrix(0, 3), Matrix(0, 3), {0}, {1}), DataError);
  EvalOptions opt;
  opt.ks = {0};
  EXPECT_THROW(evaluate_probabilities(Matrix(1, 3), Matrix(1, 3), {0}, {1}, opt), std::invalid_argument);
}
