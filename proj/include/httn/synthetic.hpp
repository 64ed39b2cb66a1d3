#ifndef HTTN_SYNTHETIC_HPP
#define HTTN_SYNTHETIC_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "httn/corpus.hpp"
#include "httn/rng.hpp"

namespace httn {

/// Generator settings for a long-tailed multi-label corpus.
///
/// Label i (0-based) is the primary label of a share of documents
/// proportional to (i+1)^-zipf_exponent, so label 0 is the most frequent.
/// The last `tail_labels` labels are the designated tail; each one has a
/// partner head label that it co-occurs with at rate `correlation`.
struct SyntheticSpec {
  std::size_t num_labels = 40;
  std::size_t tail_labels = 10;
  double zipf_exponent = 1.2;
  double correlation = 0.6;
  std::size_t train_documents = 2000;
  std::size_t test_documents = 500;
  std::size_t vocabulary_size = 600;
  std::size_t tokens_per_document = 20;
  std::uint64_t seed = 1;

  std::size_t signature_tokens = 4;  // planted tokens per label
  double signal_rate = 0.5;          // share of tokens drawn from label signatures
  double extra_label_rate = 0.5;     // chance of a second (head) label per document
  std::size_t tail_shots = 0;        // >0: every tail label gets exactly this many training documents

  std::size_t head_labels() const { return num_labels - tail_labels; }

  void validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("synthetic spec: " + msg); };
    if (num_labels == 0) fail("num_labels must be positive");
    if (tail_labels >= num_labels) fail("tail_labels must be smaller than num_labels");
    if (train_documents == 0 || test_documents == 0) fail("document counts must be positive");
    if (tokens_per_document == 0) fail("tokens_per_document must be positive");
    if (signature_tokens == 0) fail("signature_tokens must be positive");
    if (vocabulary_size <= num_labels * signature_tokens) {
      fail("vocabulary_size must exceed num_labels * signature_tokens = " +
           std::to_string(num_labels * signature_tokens));
    }
    if (!(correlation >= 0.0 && correlation <= 1.0)) fail("correlation must be in [0, 1]");
    if (!(signal_rate >= 0.0 && signal_rate <= 1.0)) fail("signal_rate must be in [0, 1]");
    if (!(extra_label_rate >= 0.0 && extra_label_rate <= 1.0)) fail("extra_label_rate must be in [0, 1]");
    if (!(zipf_exponent >= 0.0) || !std::isfinite(zipf_exponent)) fail("zipf_exponent must be >= 0");
    if (tail_shots * tail_labels > train_documents) fail("tail_shots * tail_labels exceeds train_documents");
    if (train_documents < num_labels) fail("need at least one training document per label");
  }
};

/// Zipf shares (i+1)^-s normalised to sum to 1.
inline std::vector<double> zipf_shares(std::size_t n, double exponent) {
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = std::pow(static_cast<double>(i + 1), -exponent);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& x : p) x /= total;
  return p;
}

/// Integer allocation of `total` items by largest remainder, each share
/// receiving at least `floor_count`.
inline std::vector<std::size_t> allocate_counts(const std::vector<double>& shares, std::size_t total,
                                                std::size_t floor_count = 1) {
  const std::size_t n = shares.size();
  std::vector<std::size_t> counts(n);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double exact = shares[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainders.emplace_back(exact - static_cast<double>(counts[i]), i);
    assigned += counts[i];
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < n; ++k, ++assigned) ++counts[remainders[k].second];
  for (std::size_t i = 0; i < n; ++i) {
    while (counts[i] < floor_count) {
      // take from the largest bucket
      const auto big = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      if (big == i || counts[big] <= floor_count) break;
      --counts[big];
      ++counts[i];
    }
  }
  return counts;
}

/// Expected per-label training counts implied by `spec` (primary share,
/// extra head labels and partner co-occurrence), used to judge how closely
/// a generated corpus follows its profile.
inline std::vector<double> synthetic_target_counts(const SyntheticSpec& spec, std::size_t n_docs,
                                                   const std::vector<LabelId>& partners) {
  const auto p = zipf_shares(spec.num_labels, spec.zipf_exponent);
  const std::size_t l_head = spec.head_labels();
  double head_mass = 0.0;
  for (std::size_t j = 0; j < l_head; ++j) head_mass += p[j];
  std::vector<double> target(spec.num_labels);
  for (std::size_t j = 0; j < spec.num_labels; ++j) {
    const double primary = p[j] * static_cast<double>(n_docs);
    target[j] = primary;
    if (j < l_head) target[j] += spec.extra_label_rate * static_cast<double>(n_docs) * p[j] / head_mass;
  }
  for (std::size_t z = l_head; z < spec.num_labels; ++z) target[partners[z - l_head]] += spec.correlation * target[z];
  return target;
}

/// Generated corpus plus the generator's ground truth.
struct SyntheticCorpus {
  Corpus corpus;
  std::vector<LabelId> partners;  // partner head label per tail label (index z - l_head)
  std::vector<double> target_counts;  // expected training counts per label
};

namespace detail {

inline void synth_split(const SyntheticSpec& spec, SplitTag tag, std::size_t n_docs,
                        const std::vector<LabelId>& partners, Corpus& corpus, Rng& rng) {
  const std::size_t l = spec.num_labels;
  const std::size_t l_head = spec.head_labels();
  const auto shares = zipf_shares(l, spec.zipf_exponent);

  std::vector<std::size_t> counts;
  if (tag == SplitTag::train && spec.tail_shots > 0) {
    std::vector<double> head_shares(shares.begin(), shares.begin() + static_cast<std::ptrdiff_t>(l_head));
    const double mass = std::accumulate(head_shares.begin(), head_shares.end(), 0.0);
    for (double& s : head_shares) s /= mass;
    counts = allocate_counts(head_shares, n_docs - spec.tail_shots * spec.tail_labels);
    counts.resize(l, spec.tail_shots);
  } else {
    counts = allocate_counts(shares, n_docs, tag == SplitTag::train ? 1 : 0);
  }

  std::vector<LabelId> primary;
  primary.reserve(n_docs);
  for (std::size_t j = 0; j < l; ++j) primary.insert(primary.end(), counts[j], j);
  std::shuffle(primary.begin(), primary.end(), rng);

  std::vector<std::vector<LabelId>> doc_labels(n_docs);
  for (std::size_t i = 0; i < n_docs; ++i) doc_labels[i] = {primary[i]};

  // Exactly round(correlation * n_z) documents of tail label z carry its
  // partner.
  if (l_head > 0) {
    std::vector<std::vector<std::size_t>> by_tail(spec.tail_labels);
    for (std::size_t i = 0; i < n_docs; ++i)
      if (primary[i] >= l_head) by_tail[primary[i] - l_head].push_back(i);
    for (std::size_t z = 0; z < spec.tail_labels; ++z) {
      const auto take = static_cast<std::size_t>(std::llround(spec.correlation * static_cast<double>(by_tail[z].size())));
      for (std::size_t k = 0; k < take; ++k) doc_labels[by_tail[z][k]].push_back(partners[z]);
    }
  }

  // Extra head labels: an exact Zipf allocation of round(rate * N) labels,
  // dealt to documents that do not already carry them.
  if (l_head > 0 && spec.extra_label_rate > 0.0) {
    std::vector<double> head_shares(shares.begin(), shares.begin() + static_cast<std::ptrdiff_t>(l_head));
    const double mass = std::accumulate(head_shares.begin(), head_shares.end(), 0.0);
    for (double& x : head_shares) x /= mass;
    const auto n_extra = static_cast<std::size_t>(std::llround(spec.extra_label_rate * static_cast<double>(n_docs)));
    const auto extra_counts = allocate_counts(head_shares, n_extra, 0);
    std::vector<LabelId> extras;
    for (std::size_t j = 0; j < l_head; ++j) extras.insert(extras.end(), extra_counts[j], j);
    std::shuffle(extras.begin(), extras.end(), rng);
    std::vector<std::size_t> order(n_docs);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<char> used(n_docs, 0);
    std::size_t cursor = 0;
    for (LabelId extra : extras) {
      while (cursor < n_docs && used[order[cursor]]) ++cursor;
      for (std::size_t k = cursor; k < n_docs; ++k) {
        const std::size_t doc = order[k];
        if (used[doc]) continue;
        auto& ls = doc_labels[doc];
        if (std::find(ls.begin(), ls.end(), extra) != ls.end()) continue;
        ls.push_back(extra);
        used[doc] = 1;
        break;
      }
    }
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t noise_begin = l * spec.signature_tokens;
  std::uniform_int_distribution<std::size_t> noise_pick(noise_begin, spec.vocabulary_size - 1);
  std::uniform_int_distribution<std::size_t> sig_pick(0, spec.signature_tokens - 1);
  const std::size_t lo = std::max<std::size_t>(1, spec.tokens_per_document / 2);
  const std::size_t hi = std::max(lo, spec.tokens_per_document + spec.tokens_per_document / 2);
  std::uniform_int_distribution<std::size_t> length_pick(lo, hi);

  for (std::size_t i = 0; i < n_docs; ++i) {
    std::vector<LabelId> ls = std::move(doc_labels[i]);
    std::sort(ls.begin(), ls.end());

    Document doc;
    doc.id = corpus.documents.size();
    doc.split = tag;
    const std::size_t len = length_pick(rng);
    std::uniform_int_distribution<std::size_t> label_pick(0, ls.size() - 1);
    doc.tokens.reserve(len);
    for (std::size_t q = 0; q < len; ++q) {
      std::size_t token = 0;
      if (unit(rng) < spec.signal_rate) {
        token = ls[label_pick(rng)] * spec.signature_tokens + sig_pick(rng);
      } else {
        token = noise_pick(rng);
      }
      doc.tokens.push_back(static_cast<TokenId>(token));
    }
    corpus.documents.push_back(std::move(doc));
    corpus.labels.push_back(std::move(ls));
  }
}

}  // namespace detail

inline std::string synthetic_word(const SyntheticSpec& spec, std::size_t token) {
  const std::size_t noise_begin = spec.num_labels * spec.signature_tokens;
  if (token < noise_begin) {
    return "l" + std::to_string(token / spec.signature_tokens) + "s" + std::to_string(token % spec.signature_tokens);
  }
  return "w" + std::to_string(token - noise_begin);
}

/// Generates training and test splits (test documents follow the same
/// label-conditional token distribution). Deterministic per `spec.seed`.
inline SyntheticCorpus synthesize_longtail(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticCorpus out;
  Corpus& corpus = out.corpus;
  corpus.num_labels = spec.num_labels;
  for (std::size_t t = 0; t < spec.vocabulary_size; ++t) corpus.vocabulary.intern(synthetic_word(spec, t));

  const std::size_t l_head = spec.head_labels();
  Rng partner_rng = make_rng(spec.seed, "synth/partners");
  if (l_head > 0) {
    std::uniform_int_distribution<std::size_t> pick(0, l_head - 1);
    for (std::size_t z = 0; z < spec.tail_labels; ++z) out.partners.push_back(pick(partner_rng));
  }
  Rng train_rng = make_rng(spec.seed, "synth/train");
  Rng test_rng = make_rng(spec.seed, "synth/test");
  detail::synth_split(spec, SplitTag::train, spec.train_documents, out.partners, corpus, train_rng);
  detail::synth_split(spec, SplitTag::test, spec.test_documents, out.partners, corpus, test_rng);
  out.target_counts = synthetic_target_counts(spec, spec.train_documents, out.partners);
  if (spec.tail_shots > 0) {
    for (std::size_t z = l_head; z < spec.num_labels; ++z) out.target_counts[z] = static_cast<double>(spec.tail_shots);
  }
  return out;
}

/// Gaussian word vectors for every vocabulary word, N(0, 1) per entry.
inline EmbeddingTable synthesize_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed) {
  EmbeddingTable table;
  table.dim = dim;
  Rng rng = make_rng(seed, "synth/embeddings");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& word : vocab.words()) {
    Vector v(dim);
    for (double& x : v) x = normal(rng);
    table.insert(word, std::move(v));
  }
  return table;
}

/// Word vectors with topical structure: every word shares a common offset
/// u_0 ~ N(0, I); signature tokens of label j add u_j + spread * noise around
/// a per-label direction u_j ~ N(0, I), other words add N(0, I) noise.
inline EmbeddingTable synthesize_embeddings(const SyntheticSpec& spec, std::size_t dim, double spread = 0.5) {
  EmbeddingTable table;
  table.dim = dim;
  Rng rng = make_rng(spec.seed, "synth/embeddings");
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector common(dim);
  for (double& x : common) x = normal(rng);
  std::vector<Vector> centers(spec.num_labels, Vector(dim));
  for (auto& c : centers)
    for (double& x : c) x = normal(rng);
  for (std::size_t t = 0; t < spec.vocabulary_size; ++t) {
    Vector v(dim);
    const bool signature = t < spec.num_labels * spec.signature_tokens;
    for (std::size_t i = 0; i < dim; ++i) {
      v[i] = common[i] + (signature ? centers[t / spec.signature_tokens][i] + spread * normal(rng) : normal(rng));
    }
    table.insert(synthetic_word(spec, t), std::move(v));
  }
  return table;
}

}  // namespace httn

#endif  // HTTN_SYNTHETIC_HPP
