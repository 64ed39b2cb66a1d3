#ifndef HTTN_PROTOTYPER_HPP
#define HTTN_PROTOTYPER_HPP

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "httn/corpus.hpp"
#include "httn/encoder.hpp"
#include "httn/matrix.hpp"
#include "httn/rng.hpp"

namespace httn {

struct Prototype {
  LabelId label = 0;
  Vector vector;
  std::size_t sample_size = 0;
};

/// label -> prototypes (S draws for head labels, one per draw for tail).
using PrototypeSet = std::map<LabelId, std::vector<Prototype>>;

/// Representations of the training documents, indexed by document index
/// (entries for test documents stay empty). The encoder is frozen here.
inline std::vector<Vector> encode_training_documents(const EncoderParams& encoder, const Corpus& corpus) {
  std::vector<Vector> reps(corpus.size());
  for (std::size_t i : corpus.indices(SplitTag::train)) reps[i] = encode(encoder, corpus.documents[i]).first;
  return reps;
}

inline Prototype make_prototype(std::span<const Vector> reprs, LabelId label) {
  if (reprs.empty()) throw std::invalid_argument("make_prototype: no representations for label " + std::to_string(label));
  Prototype p;
  p.label = label;
  p.sample_size = reprs.size();
  p.vector.assign(reprs.front().size(), 0.0);
  for (const auto& r : reprs) {
    if (r.size() != p.vector.size()) throw ShapeError("make_prototype: representation length mismatch");
    for (std::size_t j = 0; j < r.size(); ++j) p.vector[j] += r[j];
  }
  for (double& x : p.vector) x /= static_cast<double>(reprs.size());
  return p;
}

namespace detail {
inline Prototype sample_prototype(std::span<const std::size_t> docs, std::span<const Vector> reps, LabelId label,
                                  std::size_t t, Rng& rng) {
  std::vector<std::size_t> picked;
  std::sample(docs.begin(), docs.end(), std::back_inserter(picked), std::min(t, docs.size()), rng);
  std::vector<Vector> chosen;
  chosen.reserve(picked.size());
  for (std::size_t i : picked) chosen.push_back(reps[i]);
  return make_prototype(chosen, label);
}
}  // namespace detail

/// S prototypes for one label, each the mean of min(t, n_label) training
/// documents drawn uniformly without replacement. The draws use a stream
/// derived from (seed, label), independent of other labels.
inline std::vector<Prototype> sample_label_prototypes(const HeadTailSplit& split, std::span<const Vector> reps,
                                                      LabelId label, std::size_t t, std::size_t draws,
                                                      std::uint64_t seed) {
  if (t == 0) throw std::invalid_argument("sample_label_prototypes: t must be >= 1");
  const auto& docs = split.label_documents.at(label);
  if (docs.empty()) throw DataError("label " + std::to_string(label) + " has no training documents");
  Rng rng = make_rng(seed, "proto/head", label);
  std::vector<Prototype> out;
  out.reserve(draws);
  for (std::size_t s = 0; s < draws; ++s) out.push_back(detail::sample_prototype(docs, reps, label, t, rng));
  return out;
}

/// Exact mean over all of a label's training documents.
inline Prototype full_prototype(const HeadTailSplit& split, std::span<const Vector> reps, LabelId label) {
  const auto& docs = split.label_documents.at(label);
  if (docs.empty()) throw DataError("label " + std::to_string(label) + " has no training documents");
  std::vector<Vector> chosen;
  for (std::size_t i : docs) chosen.push_back(reps[i]);
  return make_prototype(chosen, label);
}

/// Exact head prototypes, in split.head_labels order.
inline std::vector<Vector> head_mean_prototypes(const HeadTailSplit& split, std::span<const Vector> reps) {
  std::vector<Vector> out;
  for (LabelId l : split.head_labels) out.push_back(full_prototype(split, reps, l).vector);
  return out;
}

struct TailPrototypes {
  std::vector<Prototype> prototypes;  // split.tail_labels order; empty vector for skipped labels
  std::vector<LabelId> skipped;       // tail labels without training documents
};

/// One prototype per tail label for draw `member`. A document carrying two
/// tail labels is eligible for both.
inline TailPrototypes build_tail_prototypes(const HeadTailSplit& split, std::span<const Vector> reps, std::size_t t,
                                            std::uint64_t seed, std::size_t member = 0) {
  if (t == 0) throw std::invalid_argument("build_tail_prototypes: t must be >= 1");
  TailPrototypes out;
  for (LabelId z : split.tail_labels) {
    const auto& docs = split.label_documents.at(z);
    if (docs.empty()) {
      out.skipped.push_back(z);
      out.prototypes.push_back(Prototype{z, {}, 0});
      continue;
    }
    Rng rng = make_rng(seed, "proto/tail", member, z);
    out.prototypes.push_back(detail::sample_prototype(docs, reps, z, t, rng));
  }
  if (!split.tail_labels.empty() && out.skipped.size() == split.tail_labels.size()) {
    throw DataError("build_tail_prototypes: no tail label has training documents");
  }
  return out;
}

}  // namespace httn

#endif  // HTTN_PROTOTYPER_HPP
