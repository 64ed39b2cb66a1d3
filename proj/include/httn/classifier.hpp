#ifndef HTTN_CLASSIFIER_HPP
#define HTTN_CLASSIFIER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "httn/adam.hpp"
#include "httn/corpus.hpp"
#include "httn/encoder.hpp"
#include "httn/matrix.hpp"
#include "httn/rng.hpp"

namespace httn {

/// Invalid training or pipeline configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  EncoderKind encoder = EncoderKind::meanpool;
  double clip_norm = 5.0;  // global gradient norm; <= 0 disables clipping
  std::size_t hidden = 16;       // LSTM state size k
  std::size_t output_dim = 32;   // representation size d
  bool train_embeddings = false;

  void validate() const {
    if (epochs == 0) throw ConfigError("epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (output_dim == 0) throw ConfigError("representation size d must be >= 1");
    if (encoder == EncoderKind::bilstm && hidden == 0) throw ConfigError("LSTM hidden size must be >= 1");
  }
};

/// Per-label probabilities sigmoid(r * weights).
inline Vector predict(std::span<const double> r, const Matrix& weights) {
  if (r.size() != weights.rows()) {
    throw ShapeError("predict: representation of length " + std::to_string(r.size()) + " vs weights " +
                     weights.shape());
  }
  return sigmoid(vecmat(r, weights));
}

constexpr double kProbabilityClip = 1e-12;

struct BceResult {
  double loss = 0.0;
  Matrix grad_logits;  // probs - truth
};

/// Summed binary cross-entropy over every (document, label) cell. The
/// gradient is with respect to the logits that produced `probs`.
inline BceResult bce_loss(const Matrix& probs, const Matrix& truth) {
  Matrix::require_same_shape(probs, truth, "bce_loss");
  BceResult out;
  out.grad_logits = Matrix(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs.data()[i], kProbabilityClip, 1.0 - kProbabilityClip);
    const double y = truth.data()[i];
    out.loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    out.grad_logits.data()[i] = probs.data()[i] - y;
  }
  return out;
}

/// Single-row form: returns the loss and writes probs - truth into `grad`.
inline double bce_loss_row(std::span<const double> probs, std::span<const double> truth, std::span<double> grad) {
  double loss = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const double p = std::clamp(probs[j], kProbabilityClip, 1.0 - kProbabilityClip);
    loss -= truth[j] * std::log(p) + (1.0 - truth[j]) * std::log(1.0 - p);
    grad[j] = probs[j] - truth[j];
  }
  return loss;
}

struct TrainResult {
  EncoderParams encoder;
  Matrix weights;                 // d x |labels|, columns in the requested label order
  std::vector<LabelId> labels;    // global id of each weight column
  std::vector<double> loss_trace; // summed loss per epoch
};

/// Classifier weights for all l labels, uniform in +-1/sqrt(d). Columns are
/// indexed by global label id so any label subset gets the same initial
/// columns.
inline Matrix init_classifier_weights(std::size_t d, std::size_t l, std::uint64_t seed) {
  Rng rng = make_rng(seed, "init/classifier");
  return detail::uniform_matrix(d, l, static_cast<double>(d), rng);
}

inline EncoderParams init_encoder(const Matrix& embeddings, const TrainConfig& config) {
  Rng rng = make_rng(config.seed, "init/encoder");
  EncoderParams p = config.encoder == EncoderKind::bilstm
                        ? init_bilstm_encoder(embeddings, config.hidden, config.output_dim, rng)
                        : init_meanpool_encoder(embeddings, config.output_dim, rng);
  p.train_embeddings = config.train_embeddings;
  return p;
}

namespace detail {

inline Vector truth_row(const Corpus& corpus, std::size_t doc, std::span<const LabelId> labels) {
  Vector y(labels.size(), 0.0);
  for (std::size_t j = 0; j < labels.size(); ++j) y[j] = corpus.has_label(doc, labels[j]) ? 1.0 : 0.0;
  return y;
}

inline void clip_global_norm(std::vector<Matrix*>& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const Matrix* g : grads)
    for (double x : g->data()) sq += x * x;
  const double total = std::sqrt(sq);
  if (total <= max_norm) return;
  const double scale = max_norm / total;
  for (Matrix* g : grads) *g *= scale;
}

}  // namespace detail

/// Jointly trains the encoder and a sigmoid classifier over `labels` on the
/// documents `doc_ids` with mini-batch Adam. Batch gradients are summed,
/// matching the summed loss. Labels are processed in ascending id order
/// internally so that any two runs over the same label set are bitwise
/// identical regardless of requested column order.
inline TrainResult train_classifier(const Corpus& corpus, const Matrix& embeddings,
                                    std::span<const std::size_t> doc_ids, std::span<const LabelId> labels,
                                    const TrainConfig& config) {
  config.validate();
  if (doc_ids.empty()) throw ConfigError("no training documents");
  if (labels.empty()) throw ConfigError("no labels to train");

  std::vector<LabelId> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end());

  EncoderParams encoder = init_encoder(embeddings, config);
  const Matrix all_weights = init_classifier_weights(config.output_dim, corpus.num_labels, config.seed);
  Matrix weights(config.output_dim, sorted.size());
  for (std::size_t j = 0; j < sorted.size(); ++j) weights.set_column(j, all_weights.column(sorted[j]));

  AdamConfig adam{config.learning_rate};
  auto params = encoder.parameters();
  std::vector<AdamState> encoder_state;
  for (const auto& p : params) encoder_state.emplace_back(*p.value, adam);
  AdamState weight_state(weights, adam);

  std::vector<Vector> truth;
  truth.reserve(doc_ids.size());
  for (std::size_t i : doc_ids) truth.push_back(detail::truth_row(corpus, i, sorted));

  TrainResult result;
  std::vector<std::size_t> order(doc_ids.size());
  Rng shuffle_rng = make_rng(config.seed, "train/shuffle");
  Vector grad_row(sorted.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      EncoderParams grads = encoder.zeros_like();
      Matrix d_weights(weights.rows(), weights.cols());
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t pos = order[b];
        auto [r, cache] = encode(encoder, corpus.documents[doc_ids[pos]]);
        const Vector probs = predict(r, weights);
        epoch_loss += bce_loss_row(probs, truth[pos], grad_row);
        add_outer(d_weights, r, grad_row);
        const Vector d_r = matvec(weights, grad_row);
        accumulate_encoder_gradients(encoder, cache, d_r, grads);
      }
      auto grad_params = grads.parameters();
      std::vector<Matrix*> all_grads;
      for (auto& g : grad_params) all_grads.push_back(g.value);
      all_grads.push_back(&d_weights);
      detail::clip_global_norm(all_grads, config.clip_norm);
      for (std::size_t p = 0; p < params.size(); ++p) adam_update(*params[p].value, *grad_params[p].value, encoder_state[p]);
      adam_update(weights, d_weights, weight_state);
    }
    if (!std::isfinite(epoch_loss)) {
      throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1));
    }
    result.loss_trace.push_back(epoch_loss);
  }

  // Reorder columns to the caller's label order.
  result.weights = Matrix(weights.rows(), labels.size());
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const auto at = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), labels[j]) - sorted.begin());
    result.weights.set_column(j, weights.column(at));
  }
  result.labels.assign(labels.begin(), labels.end());
  result.encoder = std::move(encoder);
  return result;
}

/// Stage 1: encoder and head classifier M_head (d x l_head, columns in
/// split.head_labels order) trained on D_head against head labels only.
inline TrainResult train_head(const Corpus& corpus, const Matrix& embeddings, const HeadTailSplit& split,
                              const TrainConfig& config) {
  config.validate();
  std::vector<LabelId> empty_heads;
  for (LabelId l : split.head_labels)
    if (split.label_documents.at(l).empty()) empty_heads.push_back(l);
  if (!empty_heads.empty()) {
    std::string msg = "head labels without training documents:";
    for (LabelId l : empty_heads) msg += " " + std::to_string(l);
    throw ConfigError(msg);
  }
  if (split.head_documents.empty()) throw ConfigError("D_head is empty");
  return train_classifier(corpus, embeddings, split.head_documents, split.head_labels, config);
}

/// Joint baseline: every training document, every label, columns in global
/// label order.
inline TrainResult train_joint(const Corpus& corpus, const Matrix& embeddings, const TrainConfig& config) {
  config.validate();
  const auto docs = corpus.indices(SplitTag::train);
  std::vector<LabelId> labels(corpus.num_labels);
  std::iota(labels.begin(), labels.end(), 0);
  return train_classifier(corpus, embeddings, docs, labels, config);
}

/// Adam on classifier weights only, with fixed representations. No gradient
/// clipping, so each column evolves independently of the others.
inline std::pair<Matrix, std::vector<double>> train_weights_frozen(const std::vector<Vector>& reps,
                                                                   const std::vector<Vector>& truth, Matrix weights,
                                                                   std::size_t epochs, std::size_t batch_size,
                                                                   double learning_rate, Rng& shuffle_rng) {
  if (reps.size() != truth.size()) throw ShapeError("train_weights_frozen: reps/truth count mismatch");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  AdamState state(weights, AdamConfig{learning_rate});
  std::vector<double> trace;
  std::vector<std::size_t> order(reps.size());
  Vector grad_row(weights.cols());
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      Matrix d_weights(weights.rows(), weights.cols());
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t pos = order[b];
        const Vector probs = predict(reps[pos], weights);
        epoch_loss += bce_loss_row(probs, truth[pos], grad_row);
        add_outer(d_weights, reps[pos], grad_row);
      }
      adam_update(weights, d_weights, state);
    }
    if (!std::isfinite(epoch_loss)) throw NumericError("fine-tuning diverged: non-finite loss");
    trace.push_back(epoch_loss);
  }
  return {std::move(weights), std::move(trace)};
}

/// Summed BCE of `weights` over fixed representations.
inline double dataset_loss(const std::vector<Vector>& reps, const std::vector<Vector>& truth, const Matrix& weights) {
  double loss = 0.0;
  Vector grad(weights.cols());
  for (std::size_t i = 0; i < reps.size(); ++i) loss += bce_loss_row(predict(reps[i], weights), truth[i], grad);
  return loss;
}

}  // namespace httn

#endif  // HTTN_CLASSIFIER_HPP
