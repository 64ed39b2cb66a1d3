#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "httn/corpus.hpp"
#include "support.hpp"

using namespace httn;
using httn::test::TempDir;
using httn::test::write_file;

namespace {

// Training-only corpus from label sets; document i is the single token "d<i>".
Corpus corpus_from_labels(std::size_t l, const std::vector<std::vector<LabelId>>& labels) {
  Corpus c;
  c.num_labels = l;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Document d;
    d.id = i;
    d.tokens = {c.vocabulary.intern("d" + std::to_string(i))};
    c.documents.push_back(d);
    auto ls = labels[i];
    std::sort(ls.begin(), ls.end());
    c.labels.push_back(ls);
  }
  return c;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(LoadCorpus, CountsPreserved) {
  TempDir dir("corpus");
  write_file(dir / "d.txt", "The cat sat\ndogs BARK\nhello\n");
  write_file(dir / "l.txt", "3 4\n0 2\n1\n3 3\n");
  const Corpus c = load_corpus(dir / "d.txt", dir / "l.txt");
  EXPECT_EQ(c.size(), 3u);
  EXPECT_EQ(c.num_labels, 4u);
  EXPECT_EQ(c.labels[0], (std::vector<LabelId>{0, 2}));
  EXPECT_EQ(c.labels[2], (std::vector<LabelId>{3}));
  EXPECT_EQ(c.vocabulary.word(c.documents[1].tokens[1]), "bark");
}

TEST(LoadCorpus, LabelOutOfRangeReportsLine) {
  TempDir dir("corpus");
  write_file(dir / "d.txt", "a\nb\n");
  write_file(dir / "l.txt", "2 3\n0\n3\n");
  try {
    load_corpus(dir / "d.txt", dir / "l.txt");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(LoadCorpus, CountMismatch) {
  TempDir dir("corpus");
  write_file(dir / "d.txt", "a\nb\nc\n");
  write_file(dir / "l.txt", "2 3\n0\n1\n");
  EXPECT_THROW(load_corpus(dir / "d.txt", dir / "l.txt"), DataError);
}

TEST(LoadCorpus, MalformedLines) {
  TempDir dir("corpus");
  write_file(dir / "d.txt", "a\n\n");
  write_file(dir / "l.txt", "2 3\n0\n1\n");
  EXPECT_THROW(load_corpus(dir / "d.txt", dir / "l.txt"), ParseError);
  write_file(dir / "d.txt", "a\nb\n");
  write_file(dir / "l.txt", "2 3\n0\nx\n");
  EXPECT_THROW(load_corpus(dir / "d.txt", dir / "l.txt"), ParseError);
  write_file(dir / "l.txt", "2 3\n0\n\n");
  EXPECT_THROW(load_corpus(dir / "d.txt", dir / "l.txt"), ParseError);
  EXPECT_NO_THROW(load_corpus(dir / "d.txt", dir / "l.txt", SplitTag::test));
}

TEST(LoadCorpus, RoundTrip) {
  Corpus c = corpus_from_labels(5, {{0, 3}, {1}, {4, 2, 0}});
  c.documents[1].tokens.push_back(c.vocabulary.intern("extra"));
  TempDir dir("corpus");
  write_corpus(c, SplitTag::train, dir / "d.txt", dir / "l.txt");
  const Corpus back = load_corpus(dir / "d.txt", dir / "l.txt");
  EXPECT_EQ(back.label_matrix(), c.label_matrix());
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    ASSERT_EQ(back.documents[i].tokens.size(), c.documents[i].tokens.size());
    for (std::size_t t = 0; t < c.documents[i].tokens.size(); ++t) {
      EXPECT_EQ(back.vocabulary.word(back.documents[i].tokens[t]), c.vocabulary.word(c.documents[i].tokens[t]));
    }
  }
}

TEST(Embeddings, LoadAndOov) {
  TempDir dir("emb");
  write_file(dir / "e.txt", "cat 1 2 3\ndog 4 5 6\n");
  const EmbeddingTable t = load_embeddings(dir / "e.txt", 3);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.lookup("dog"), (Vector{4, 5, 6}));
  EXPECT_EQ(t.lookup("zebra"), (Vector{0, 0, 0}));
  EXPECT_TRUE(t.warnings.empty());
}

TEST(Embeddings, DuplicateLastWinsWithWarning) {
  TempDir dir("emb");
  write_file(dir / "e.txt", "cat 1 2 3\ncat 7 8 9\n");
  const EmbeddingTable t = load_embeddings(dir / "e.txt", 3);
  EXPECT_EQ(t.size(), 1u);
  EXPECT_EQ(t.lookup("cat"), (Vector{7, 8, 9}));
  EXPECT_EQ(t.warnings.size(), 1u);
}

TEST(Embeddings, WrongArityReportsLine) {
  TempDir dir("emb");
  write_file(dir / "e.txt", "cat 1 2 3\ndog 4 5\n");
  try {
    load_embeddings(dir / "e.txt", 3);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Embeddings, MatrixAlignsWithVocabulary) {
  EmbeddingTable t;
  t.dim = 2;
  t.insert("b", {1.0, 2.0});
  Vocabulary v;
  v.intern("a");
  v.intern("b");
  const Matrix m = t.matrix_for(v);
  EXPECT_EQ(m, (Matrix{{0.0, 0.0}, {1.0, 2.0}}));
}

TEST(LabelFrequency, HandCount) {
  const Corpus c = corpus_from_labels(3, {{0}, {0, 1}});
  EXPECT_EQ(label_frequency(c), (std::vector<std::size_t>{2, 1, 0}));
}

TEST(LabelFrequency, TrainingSplitOnly) {
  Corpus c = corpus_from_labels(2, {{0}, {1}, {1}});
  c.documents[2].split = SplitTag::test;
  EXPECT_EQ(label_frequency(c), (std::vector<std::size_t>{1, 1}));
}

TEST(SplitHeadTail, PaperConfigurations) {
  for (auto [l, l_tail] : {std::pair<std::size_t, std::size_t>{54, 18}, {103, 28}}) {
    std::vector<std::vector<LabelId>> labels;
    for (std::size_t j = 0; j < l; ++j)
      for (std::size_t k = 0; k <= j % 7; ++k) labels.push_back({j});
    const HeadTailSplit s = split_head_tail(corpus_from_labels(l, labels), l_tail);
    EXPECT_EQ(s.head_labels.size(), l - l_tail);
    EXPECT_EQ(s.tail_labels.size(), l_tail);
  }
}

TEST(SplitHeadTail, ZeroTailMeansAllHead) {
  const Corpus c = corpus_from_labels(3, {{0}, {1}, {2, 0}});
  const HeadTailSplit s = split_head_tail(c, 0);
  EXPECT_EQ(s.head_labels.size(), 3u);
  EXPECT_TRUE(s.tail_labels.empty());
  EXPECT_TRUE(s.tail_documents.empty());
}

TEST(SplitHeadTail, TooManyTailLabels) {
  const Corpus c = corpus_from_labels(3, {{0}, {1}, {2}});
  EXPECT_THROW(split_head_tail(c, 3), std::invalid_argument);
}

TEST(SplitHeadTail, TiesGoToTailByAscendingIndex) {
  // frequencies: 0->3, 1->1, 2->1, 3->1
  const Corpus c = corpus_from_labels(4, {{0}, {0}, {0, 1}, {2}, {3}});
  const HeadTailSplit s = split_head_tail(c, 2);
  EXPECT_EQ(s.tail_labels, (std::vector<LabelId>{1, 2}));
  EXPECT_EQ(s.head_labels, (std::vector<LabelId>{0, 3}));
}

TEST(SplitHeadTail, ZeroDocumentLabelsForcedIntoTail) {
  const Corpus c = corpus_from_labels(4, {{0}, {0}, {1}, {2}});
  const HeadTailSplit s = split_head_tail(c, 0);
  EXPECT_EQ(s.tail_labels, (std::vector<LabelId>{3}));
  EXPECT_EQ(s.zero_document_labels, (std::vector<LabelId>{3}));
}

TEST(SplitHeadTail, Invariants) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t l = 3 + rep % 9;
    std::uniform_int_distribution<std::size_t> pick(0, l - 1);
    std::vector<std::vector<LabelId>> labels(60);
    for (auto& ls : labels) {
      ls = {pick(rng) % (1 + pick(rng))};
      if (rng() % 3 == 0) ls.push_back(pick(rng));
      std::sort(ls.begin(), ls.end());
      ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
    }
    const Corpus c = corpus_from_labels(l, labels);
    const std::size_t l_tail = rep % l;
    const HeadTailSplit s = split_head_tail(c, l_tail);

    std::vector<LabelId> all = s.head_labels;
    all.insert(all.end(), s.tail_labels.begin(), s.tail_labels.end());
    std::sort(all.begin(), all.end());
    for (std::size_t j = 0; j < l; ++j) ASSERT_EQ(all[j], j);

    std::size_t min_head = SIZE_MAX, max_tail = 0;
    for (LabelId h : s.head_labels) min_head = std::min(min_head, s.frequency[h]);
    for (LabelId t : s.tail_labels) max_tail = std::max(max_tail, s.frequency[t]);
    if (!s.head_labels.empty() && !s.tail_labels.empty()) EXPECT_GE(min_head, max_tail);

    for (std::size_t i : s.tail_documents) {
      bool any = false;
      for (LabelId lab : c.labels[i]) any |= !s.is_head(lab);
      EXPECT_TRUE(any);
    }
    for (std::size_t i : s.head_documents) {
      bool any = false;
      for (LabelId lab : c.labels[i]) any |= s.is_head(lab);
      EXPECT_TRUE(any);
    }
    for (std::size_t i = 0; i < c.size(); ++i) {
      bool has_head = false, has_tail = false;
      for (LabelId lab : c.labels[i]) (s.is_head(lab) ? has_head : has_tail) = true;
      EXPECT_EQ(has_head, std::binary_search(s.head_documents.begin(), s.head_documents.end(), i));
      EXPECT_EQ(has_tail, std::binary_search(s.tail_documents.begin(), s.tail_documents.end(), i));
    }

    const HeadTailSplit again = split_head_tail(c, l_tail);
    EXPECT_EQ(again.head_labels, s.head_labels);
    EXPECT_EQ(again.tail_labels, s.tail_labels);
  }
}

TEST(SplitHeadTail, IgnoresTestDocuments) {
  Corpus c = corpus_from_labels(3, {{0}, {0}, {1}, {2}, {2}, {2}});
  const HeadTailSplit before = split_head_tail(c, 1);
  Corpus with_test = c;
  for (int k = 0; k < 5; ++k) {
    Document d;
    d.id = with_test.size();
    d.tokens = {0};
    d.split = SplitTag::test;
    with_test.documents.push_back(d);
    with_test.labels.push_back({1});
  }
  const HeadTailSplit after = split_head_tail(with_test, 1);
  EXPECT_EQ(after.tail_labels, before.tail_labels);
  EXPECT_EQ(after.head_labels, before.head_labels);
}

TEST(Cooccurrence, IdenticalAndComplementaryColumns) {
  const Corpus same = corpus_from_labels(2, {{0, 1}, {}, {0, 1}, {}});
  EXPECT_NEAR(label_cooccurrence(same)(0, 1), 1.0, 1e-15);
  const Corpus comp = corpus_from_labels(2, {{0}, {1}});
  EXPECT_NEAR(label_cooccurrence(comp)(0, 1), -1.0, 1e-15);
}

TEST(Cooccurrence, ConstantColumnIsZero) {
  const Corpus c = corpus_from_labels(3, {{0, 2}, {1, 2}, {2}});
  const Matrix m = label_cooccurrence(c);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(m(2, j), 0.0);
    EXPECT_EQ(m(j, 2), 0.0);
  }
  EXPECT_EQ(m(0, 0), 1.0);
}

TEST(Cooccurrence, MatchesPearsonOracle) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t l = 6;
    std::vector<std::vector<LabelId>> labels(40);
    for (auto& ls : labels)
      for (LabelId j = 0; j < l; ++j)
        if (rng() % 3 == 0) ls.push_back(j);
    const Corpus c = corpus_from_labels(l, labels);
    const Matrix m = label_cooccurrence(c);
    const Matrix y = c.label_matrix();
    for (std::size_t a = 0; a < l; ++a) {
      for (std::size_t b = 0; b < l; ++b) {
        const Vector ca = y.column(a), cb = y.column(b);
        EXPECT_NEAR(m(a, b), pearson(ca, cb), 1e-12);
        EXPECT_EQ(m(a, b), m(b, a));
        EXPECT_LE(std::abs(m(a, b)), 1.0);
      }
    }
  }
}
