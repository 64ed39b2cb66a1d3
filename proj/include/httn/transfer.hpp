#ifndef HTTN_TRANSFER_HPP
#define HTTN_TRANSFER_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "httn/adam.hpp"
#include "httn/classifier.hpp"
#include "httn/corpus.hpp"
#include "httn/matrix.hpp"
#include "httn/prototyper.hpp"
#include "httn/rng.hpp"

namespace httn {

enum class TransferMethod { ridge, gradient };
enum class AttentionScore { scaled_dot, cosine };

inline const char* to_string(TransferMethod m) { return m == TransferMethod::ridge ? "ridge" : "gradient"; }
inline TransferMethod transfer_method_from_string(const std::string& s) {
  if (s == "ridge") return TransferMethod::ridge;
  if (s == "gradient") return TransferMethod::gradient;
  throw std::invalid_argument("unknown transfer method \"" + s + "\" (expected ridge or gradient)");
}
inline const char* to_string(AttentionScore s) { return s == AttentionScore::scaled_dot ? "dot" : "cosine"; }
inline AttentionScore attention_score_from_string(const std::string& s) {
  if (s == "dot") return AttentionScore::scaled_dot;
  if (s == "cosine") return AttentionScore::cosine;
  throw std::invalid_argument("unknown attention score \"" + s + "\" (expected dot or cosine)");
}

/// A (few-shot prototype, many-shot classifier column) training pair.
struct TransferPair {
  Vector prototype;
  Vector weights;
};

struct TransferOptions {
  TransferMethod method = TransferMethod::ridge;
  double lambda = 1e-3;
  // gradient method only
  std::size_t iterations = 3000;
  double learning_rate = 1e-2;
};

struct TransferMap {
  Matrix weights;  // d x d
  double objective = 0.0;
  TransferMethod method = TransferMethod::ridge;
  double lambda = 0.0;
};

namespace detail {
inline std::size_t check_pairs(std::span<const TransferPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("fit_transfer: need at least one pair");
  const std::size_t d = pairs.front().prototype.size();
  if (d == 0) throw ShapeError("fit_transfer: empty prototype");
  for (const auto& p : pairs) {
    if (p.prototype.size() != d || p.weights.size() != d) {
      throw ShapeError("fit_transfer: pair of lengths (" + std::to_string(p.prototype.size()) + ", " +
                       std::to_string(p.weights.size()) + ") does not match d=" + std::to_string(d));
    }
  }
  return d;
}
}  // namespace detail

/// sum_pairs ||m - W p||^2 + lambda ||W||_F^2
inline double transfer_objective(std::span<const TransferPair> pairs, const Matrix& w, double lambda) {
  double total = 0.0;
  for (const auto& pr : pairs) {
    const Vector pred = matvec(w, pr.prototype);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double e = pr.weights[i] - pred[i];
      total += e * e;
    }
  }
  return total + lambda * dot(w.data(), w.data());
}

inline Matrix transfer_gradient(std::span<const TransferPair> pairs, const Matrix& w, double lambda) {
  Matrix g = w * (2.0 * lambda);
  for (const auto& pr : pairs) {
    Vector resid = matvec(w, pr.prototype);
    for (std::size_t i = 0; i < resid.size(); ++i) resid[i] -= pr.weights[i];
    add_outer(g, resid, pr.prototype, 2.0);
  }
  return g;
}

/// Fits W_transfer. Ridge solves (P^T P + lambda I) W^T = P^T M by
/// Cholesky; the gradient method runs Adam from W = 0 on the same
/// objective.
inline TransferMap fit_transfer(std::span<const TransferPair> pairs, const TransferOptions& options = {}) {
  const std::size_t d = detail::check_pairs(pairs);
  if (!(options.lambda >= 0.0)) throw std::invalid_argument("fit_transfer: lambda must be >= 0");
  TransferMap map;
  map.method = options.method;
  map.lambda = options.lambda;

  if (options.method == TransferMethod::ridge) {
    Matrix gram(d, d);
    Matrix cross(d, d);
    for (const auto& pr : pairs) {
      add_outer(gram, pr.prototype, pr.prototype);
      add_outer(cross, pr.prototype, pr.weights);
    }
    for (std::size_t i = 0; i < d; ++i) gram(i, i) += options.lambda;
    try {
      map.weights = transpose(cholesky_solve(gram, cross, 1e-10));
    } catch (const NumericError&) {
      if (options.lambda == 0.0) {
        throw NumericError(
            "fit_transfer: prototype system is singular (rank-deficient prototypes); use a nonzero ridge lambda");
      }
      throw;
    }
  } else {
    map.weights = Matrix(d, d);
    AdamState state(map.weights, AdamConfig{options.learning_rate});
    for (std::size_t it = 0; it < options.iterations; ++it) {
      adam_update(map.weights, transfer_gradient(pairs, map.weights, options.lambda), state);
    }
  }
  if (!all_finite(map.weights)) throw NumericError("fit_transfer: solution is not finite");
  map.objective = transfer_objective(pairs, map.weights, options.lambda);
  return map;
}

inline Vector apply_transfer(const TransferMap& map, std::span<const double> prototype) {
  return matvec(map.weights, prototype);
}

struct AttentionRecord {
  Vector scores;    // e_z, one per head label
  Vector weights;   // alpha_z = softmax(e_z)
  Vector attended;  // sum_j alpha_zj p_j
  Vector blended;   // (attended + p_tail) / 2
};

inline double attention_score(std::span<const double> a, std::span<const double> b, AttentionScore kind) {
  if (kind == AttentionScore::scaled_dot) return dot(a, b) / std::sqrt(static_cast<double>(a.size()));
  const double na = norm(a), nb = norm(b);
  return (na > 0.0 && nb > 0.0) ? dot(a, b) / (na * nb) : 0.0;
}

/// Softmax attention of a tail prototype over the head prototypes,
/// normalised over head labels.
inline AttentionRecord tail_attention(std::span<const double> tail, const std::vector<Vector>& heads,
                                      AttentionScore kind = AttentionScore::scaled_dot) {
  if (heads.empty()) throw std::invalid_argument("tail_attention: no head prototypes");
  AttentionRecord rec;
  rec.scores.reserve(heads.size());
  for (const auto& h : heads) {
    if (h.size() != tail.size()) throw ShapeError("tail_attention: prototype length mismatch");
    rec.scores.push_back(attention_score(tail, h, kind));
  }
  rec.weights = softmax(rec.scores);
  rec.attended.assign(tail.size(), 0.0);
  for (std::size_t j = 0; j < heads.size(); ++j)
    for (std::size_t i = 0; i < tail.size(); ++i) rec.attended[i] += rec.weights[j] * heads[j][i];
  rec.blended.resize(tail.size());
  for (std::size_t i = 0; i < tail.size(); ++i) rec.blended[i] = 0.5 * (rec.attended[i] + tail[i]);
  return rec;
}

struct TailWeights {
  Matrix weights;                        // d x l_tail, split.tail_labels order
  bool attention = false;
  std::size_t draw = 0;
  std::vector<AttentionRecord> records;  // per tail label when attention is on
};

/// Column z = W_transfer p, with p the tail prototype or, with attention,
/// its blend with the attended head prototypes. Tail labels without
/// training documents get a zero prototype.
inline TailWeights estimate_tail_weights(const TransferMap& map, const TailPrototypes& tail,
                                         const std::vector<Vector>& head_prototypes, bool use_attention,
                                         AttentionScore kind = AttentionScore::scaled_dot, std::size_t draw = 0) {
  const std::size_t d = map.weights.rows();
  TailWeights out;
  out.weights = Matrix(d, tail.prototypes.size());
  out.attention = use_attention;
  out.draw = draw;
  for (std::size_t z = 0; z < tail.prototypes.size(); ++z) {
    Vector p = tail.prototypes[z].vector;
    if (p.empty()) p.assign(d, 0.0);
    if (use_attention) {
      AttentionRecord rec = tail_attention(p, head_prototypes, kind);
      p = rec.blended;
      out.records.push_back(std::move(rec));
    }
    out.weights.set_column(z, apply_transfer(map, p));
  }
  return out;
}

/// Places head and tail columns at their global label indices.
inline Matrix assemble_classifier(const Matrix& head, const Matrix& tail, const HeadTailSplit& split) {
  if (head.cols() != split.head_labels.size()) {
    throw ShapeError("assemble_classifier: M_head has " + std::to_string(head.cols()) + " columns, split has " +
                     std::to_string(split.head_labels.size()) + " head labels");
  }
  if (tail.cols() != split.tail_labels.size()) {
    throw ShapeError("assemble_classifier: tail weights have " + std::to_string(tail.cols()) + " columns, split has " +
                     std::to_string(split.tail_labels.size()) + " tail labels");
  }
  if (!split.tail_labels.empty() && tail.rows() != head.rows()) {
    throw ShapeError("assemble_classifier: head " + head.shape() + " vs tail " + tail.shape());
  }
  Matrix m(head.rows(), split.num_labels());
  for (std::size_t j = 0; j < split.head_labels.size(); ++j) m.set_column(split.head_labels[j], head.column(j));
  for (std::size_t z = 0; z < split.tail_labels.size(); ++z) m.set_column(split.tail_labels[z], tail.column(z));
  return m;
}

struct FineTuneConfig {
  std::size_t epochs = 3;
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
};

struct FineTuneResult {
  Matrix weights;
  double loss_before = 0.0;
  std::vector<double> loss_trace;  // summed loss per epoch (during the epoch)
  double loss_after = 0.0;
};

/// Adam on the assembled classifier with the encoder frozen, over every
/// training document and every label.
inline FineTuneResult fine_tune(Matrix weights, const Corpus& corpus, std::span<const Vector> reps,
                                const FineTuneConfig& config) {
  const auto docs = corpus.indices(SplitTag::train);
  std::vector<Vector> train_reps, truth;
  std::vector<LabelId> labels(corpus.num_labels);
  std::iota(labels.begin(), labels.end(), 0);
  for (std::size_t i : docs) {
    train_reps.push_back(reps[i]);
    truth.push_back(detail::truth_row(corpus, i, labels));
  }
  FineTuneResult out;
  out.loss_before = dataset_loss(train_reps, truth, weights);
  Rng rng = make_rng(config.seed, "finetune/shuffle");
  auto [tuned, trace] = train_weights_frozen(train_reps, truth, std::move(weights), config.epochs, config.batch_size,
                                             config.learning_rate, rng);
  out.weights = std::move(tuned);
  out.loss_trace = std::move(trace);
  out.loss_after = dataset_loss(train_reps, truth, out.weights);
  return out;
}

}  // namespace httn

#endif  // HTTN_TRANSFER_HPP
