#ifndef HTTN_ENSEMBLE_HPP
#define HTTN_ENSEMBLE_HPP

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "httn/classifier.hpp"
#include "httn/prototyper.hpp"
#include "httn/transfer.hpp"

namespace httn {

enum class Aggregation { probability_mean, logit_mean };

inline const char* to_string(Aggregation a) { return a == Aggregation::probability_mean ? "prob" : "logit"; }
inline Aggregation aggregation_from_string(const std::string& s) {
  if (s == "prob") return Aggregation::probability_mean;
  if (s == "logit") return Aggregation::logit_mean;
  throw std::invalid_argument("unknown aggregation \"" + s + "\" (expected prob or logit)");
}

/// G HTTN classifiers sharing the encoder and M_head; they differ only in
/// the tail columns estimated from independent prototype draws.
struct EnsembleModel {
  std::vector<TailWeights> tails;
  std::vector<Matrix> members;  // assembled d x l classifiers
  Aggregation aggregation = Aggregation::probability_mean;

  std::size_t size() const noexcept { return members.size(); }
};

struct EnsembleOptions {
  std::size_t members = 1;  // G
  std::size_t t = 5;
  bool use_attention = true;
  AttentionScore score = AttentionScore::scaled_dot;
  std::uint64_t seed = 1;
};

/// Member g draws its tail prototypes from stream (seed, g).
inline EnsembleModel build_ensemble(const EnsembleOptions& options, const TransferMap& map, const HeadTailSplit& split,
                                    std::span<const Vector> reps, const Matrix& head_weights,
                                    const std::vector<Vector>& head_prototypes) {
  if (options.members == 0) throw ConfigError("ensemble size G must be >= 1");
  EnsembleModel model;
  for (std::size_t g = 0; g < options.members; ++g) {
    const TailPrototypes protos = build_tail_prototypes(split, reps, options.t, options.seed, g);
    TailWeights tail = estimate_tail_weights(map, protos, head_prototypes, options.use_attention, options.score, g);
    model.members.push_back(assemble_classifier(head_weights, tail.weights, split));
    model.tails.push_back(std::move(tail));
  }
  return model;
}

/// Per-label aggregate of the member outputs. Values are summed in sorted
/// order and clamped into the members' range, so the result does not depend
/// on member order and is exact when all members agree.
inline Vector predict_ensemble(const EnsembleModel& model, std::span<const double> r) {
  if (model.members.empty()) throw std::invalid_argument("predict_ensemble: empty ensemble");
  const std::size_t l = model.members.front().cols();
  std::vector<Vector> outputs;
  outputs.reserve(model.size());
  for (const auto& m : model.members) {
    if (m.cols() != l) throw ShapeError("predict_ensemble: members disagree on label count");
    outputs.push_back(model.aggregation == Aggregation::probability_mean ? predict(r, m) : vecmat(r, m));
  }
  Vector out(l);
  std::vector<double> column(model.size());
  for (std::size_t j = 0; j < l; ++j) {
    for (std::size_t g = 0; g < model.size(); ++g) column[g] = outputs[g][j];
    std::sort(column.begin(), column.end());
    double v = column.front();
    if (column.front() != column.back()) {
      double sum = 0.0;
      for (double x : column) sum += x;
      v = std::clamp(sum / static_cast<double>(column.size()), column.front(), column.back());
    }
    out[j] = model.aggregation == Aggregation::probability_mean ? v : sigmoid(v);
  }
  return out;
}

}  // namespace httn

#endif  // HTTN_ENSEMBLE_HPP
