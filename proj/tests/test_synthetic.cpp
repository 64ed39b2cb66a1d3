#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "httn/synthetic.hpp"

using namespace httn;

namespace {

bool same_corpus(const Corpus& a, const Corpus& b) {
  if (a.size() != b.size() || a.labels != b.labels || a.vocabulary.words() != b.vocabulary.words()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.documents[i].tokens != b.documents[i].tokens || a.documents[i].split != b.documents[i].split) return false;
  }
  return true;
}

// Share of tail-label training documents that also carry the partner label.
double partner_rate(const SyntheticCorpus& syn, std::size_t l_head) {
  std::size_t hit = 0, total = 0;
  for (std::size_t i : syn.corpus.indices(SplitTag::train)) {
    for (LabelId lab : syn.corpus.labels[i]) {
      if (lab < l_head) continue;
      ++total;
      hit += syn.corpus.has_label(i, syn.partners[lab - l_head]);
    }
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace

TEST(Zipf, SharesSumToOneAndDecrease) {
  const auto p = zipf_shares(40, 1.2);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    s += p[i];
    if (i) EXPECT_LT(p[i], p[i - 1]);
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_NEAR(p[0] / p[1], std::pow(2.0, 1.2), 1e-12);
}

TEST(Zipf, AllocationIsExact) {
  const auto counts = allocate_counts(zipf_shares(40, 1.2), 2000);
  std::size_t total = 0;
  for (std::size_t c : counts) {
    total += c;
    EXPECT_GE(c, 1u);
  }
  EXPECT_EQ(total, 2000u);
}

TEST(Synthesize, Deterministic) {
  SyntheticSpec spec;
  spec.train_documents = 300;
  spec.test_documents = 50;
  const auto a = synthesize_longtail(spec);
  const auto b = synthesize_longtail(spec);
  EXPECT_TRUE(same_corpus(a.corpus, b.corpus));
  EXPECT_EQ(a.partners, b.partners);
  spec.seed = 2;
  EXPECT_FALSE(same_corpus(a.corpus, synthesize_longtail(spec).corpus));
}

TEST(Synthesize, CountsFollowTargets) {
  SyntheticSpec spec;  // l=40, tail=10, Zipf 1.2, 2000 docs
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    spec.seed = seed;
    const auto syn = synthesize_longtail(spec);
    const auto freq = label_frequency(syn.corpus);
    for (std::size_t j = 0; j < spec.num_labels; ++j) {
      if (syn.target_counts[j] < 5.0) continue;
      EXPECT_NEAR(static_cast<double>(freq[j]), syn.target_counts[j], 0.2 * syn.target_counts[j])
          << "label " << j << " seed " << seed;
    }
  }
}

TEST(Synthesize, FrequencyRanksFollowZipfOrder) {
  SyntheticSpec spec;
  const auto syn = synthesize_longtail(spec);
  const auto freq = label_frequency(syn.corpus);
  // tail labels are the least frequent block, head label 0 the most frequent
  const std::size_t l_head = spec.head_labels();
  const std::size_t max_tail = *std::max_element(freq.begin() + static_cast<std::ptrdiff_t>(l_head), freq.end());
  const std::size_t min_head = *std::min_element(freq.begin(), freq.begin() + static_cast<std::ptrdiff_t>(l_head));
  EXPECT_GT(min_head, max_tail);
  EXPECT_EQ(std::max_element(freq.begin(), freq.end()) - freq.begin(), 0);
  const HeadTailSplit split = split_head_tail(syn.corpus, spec.tail_labels);
  for (LabelId z : split.tail_labels) EXPECT_GE(z, l_head);
  std::vector<std::size_t> sorted = freq;
  std::sort(sorted.rbegin(), sorted.rend());
  for (std::size_t i = 1; i < sorted.size(); ++i) EXPECT_LE(sorted[i], sorted[i - 1]);
}

TEST(Synthesize, FullCorrelationAlwaysCarriesPartner) {
  SyntheticSpec spec;
  spec.correlation = 1.0;
  const auto syn = synthesize_longtail(spec);
  EXPECT_EQ(partner_rate(syn, spec.head_labels()), 1.0);
}

TEST(Synthesize, ZeroCorrelationMatchesIndependentBaseline) {
  SyntheticSpec spec;
  spec.correlation = 0.0;
  spec.train_documents = 40000;
  spec.test_documents = 10;
  const auto syn = synthesize_longtail(spec);
  const auto p = zipf_shares(spec.num_labels, spec.zipf_exponent);
  double head_mass = 0.0;
  for (std::size_t j = 0; j < spec.head_labels(); ++j) head_mass += p[j];
  double expected = 0.0;
  for (LabelId partner : syn.partners) expected += spec.extra_label_rate * p[partner] / head_mass;
  expected /= static_cast<double>(syn.partners.size());
  EXPECT_NEAR(partner_rate(syn, spec.head_labels()), expected, 0.05);
}

TEST(Synthesize, EveryTrainingDocumentHasALabel) {
  const auto syn = synthesize_longtail(SyntheticSpec{});
  for (std::size_t i = 0; i < syn.corpus.size(); ++i) {
    EXPECT_FALSE(syn.corpus.labels[i].empty());
    EXPECT_FALSE(syn.corpus.documents[i].tokens.empty());
    for (TokenId t : syn.corpus.documents[i].tokens) EXPECT_LT(t, syn.corpus.vocabulary.size());
  }
  EXPECT_EQ(syn.corpus.indices(SplitTag::test).size(), 500u);
}

TEST(Synthesize, TailShots) {
  SyntheticSpec spec;
  spec.tail_shots = 1;
  spec.correlation = 0.6;
  const auto syn = synthesize_longtail(spec);
  const auto freq = label_frequency(syn.corpus);
  for (std::size_t z = spec.head_labels(); z < spec.num_labels; ++z) EXPECT_EQ(freq[z], 1u);
}

TEST(Synthesize, InfeasibleSpecRejected) {
  SyntheticSpec spec;
  spec.tail_labels = 40;
  EXPECT_THROW(synthesize_longtail(spec), std::invalid_argument);
  spec = {};
  spec.correlation = 1.5;
  EXPECT_THROW(synthesize_longtail(spec), std::invalid_argument);
  spec = {};
  spec.vocabulary_size = 100;
  EXPECT_THROW(synthesize_longtail(spec), std::invalid_argument);
}

TEST(Synthesize, EmbeddingsCoverVocabulary) {
  SyntheticSpec spec;
  const auto syn = synthesize_longtail(spec);
  const EmbeddingTable t = synthesize_embeddings(spec, 8);
  EXPECT_EQ(t.size(), syn.corpus.vocabulary.size());
  const Matrix m = t.matrix_for(syn.corpus.vocabulary);
  for (std::size_t i = 0; i < m.rows(); ++i) EXPECT_GT(norm(m.row(i)), 0.0);
}
