#ifndef HTTN_ENCODER_HPP
#define HTTN_ENCODER_HPP

#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "httn/corpus.hpp"
#include "httn/matrix.hpp"
#include "httn/rng.hpp"

namespace httn {

enum class EncoderKind { bilstm, meanpool };

inline const char* to_string(EncoderKind k) { return k == EncoderKind::bilstm ? "bilstm" : "meanpool"; }
inline EncoderKind encoder_kind_from_string(const std::string& s) {
  if (s == "bilstm") return EncoderKind::bilstm;
  if (s == "meanpool") return EncoderKind::meanpool;
  throw std::invalid_argument("unknown encoder \"" + s + "\" (expected bilstm or meanpool)");
}

/// One LSTM direction. Gate rows are stacked [input; forget; output; candidate],
/// each block `hidden` rows tall.
struct LstmParams {
  Matrix input_weights;      // 4k x k_embed
  Matrix recurrent_weights;  // 4k x k
  Matrix bias;               // 4k x 1

  std::size_t hidden() const { return recurrent_weights.cols(); }
};

struct NamedParam {
  std::string name;
  Matrix* value;
};

/// Parameters of the semantic extractor. For the Bi-LSTM encoder,
/// `projection` is 2k x d; for the mean-pool encoder it is k_embed x d and
/// the LSTM/attention members are empty.
struct EncoderParams {
  EncoderKind kind = EncoderKind::meanpool;
  Matrix embeddings;  // V x k_embed, row per vocabulary entry
  bool train_embeddings = false;
  LstmParams forward;
  LstmParams backward;
  Matrix attention;   // 1 x 2k
  Matrix projection;

  std::size_t embed_dim() const { return embeddings.cols(); }
  std::size_t output_dim() const { return projection.cols(); }
  std::size_t hidden() const { return kind == EncoderKind::bilstm ? forward.hidden() : 0; }

  /// Trainable matrices in a fixed order (the order gradients, Adam state
  /// and checkpoints use).
  std::vector<NamedParam> parameters() {
    std::vector<NamedParam> out;
    if (kind == EncoderKind::bilstm) {
      out.push_back({"encoder/forward/input_weights", &forward.input_weights});
      out.push_back({"encoder/forward/recurrent_weights", &forward.recurrent_weights});
      out.push_back({"encoder/forward/bias", &forward.bias});
      out.push_back({"encoder/backward/input_weights", &backward.input_weights});
      out.push_back({"encoder/backward/recurrent_weights", &backward.recurrent_weights});
      out.push_back({"encoder/backward/bias", &backward.bias});
      out.push_back({"encoder/attention", &attention});
    }
    out.push_back({"encoder/projection", &projection});
    if (train_embeddings) out.push_back({"encoder/embeddings", &embeddings});
    return out;
  }

  /// Same structure with every trainable matrix zeroed. Frozen embeddings
  /// are left empty.
  EncoderParams zeros_like() const {
    EncoderParams g;
    g.kind = kind;
    g.train_embeddings = train_embeddings;
    auto zero = [](const Matrix& m) { return Matrix(m.rows(), m.cols()); };
    if (train_embeddings) g.embeddings = zero(embeddings);
    if (kind == EncoderKind::bilstm) {
      g.forward = {zero(forward.input_weights), zero(forward.recurrent_weights), zero(forward.bias)};
      g.backward = {zero(backward.input_weights), zero(backward.recurrent_weights), zero(backward.bias)};
      g.attention = zero(attention);
    }
    g.projection = zero(projection);
    return g;
  }
};

namespace detail {
inline Matrix uniform_matrix(std::size_t rows, std::size_t cols, double fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (double& x : m.data()) x = dist(rng);
  return m;
}

inline LstmParams init_lstm(std::size_t embed_dim, std::size_t hidden, Rng& rng) {
  const auto fan_in = static_cast<double>(hidden);
  LstmParams p;
  p.input_weights = uniform_matrix(4 * hidden, embed_dim, fan_in, rng);
  p.recurrent_weights = uniform_matrix(4 * hidden, hidden, fan_in, rng);
  p.bias = uniform_matrix(4 * hidden, 1, fan_in, rng);
  return p;
}
}  // namespace detail

/// Bi-LSTM + attention encoder with weights uniform in +-1/sqrt(fan_in).
inline EncoderParams init_bilstm_encoder(Matrix embeddings, std::size_t hidden, std::size_t output_dim, Rng& rng) {
  if (hidden == 0 || output_dim == 0 || embeddings.cols() == 0) throw std::invalid_argument("encoder dims must be positive");
  EncoderParams p;
  p.kind = EncoderKind::bilstm;
  p.forward = detail::init_lstm(embeddings.cols(), hidden, rng);
  p.backward = detail::init_lstm(embeddings.cols(), hidden, rng);
  p.attention = detail::uniform_matrix(1, 2 * hidden, static_cast<double>(2 * hidden), rng);
  p.projection = detail::uniform_matrix(2 * hidden, output_dim, static_cast<double>(2 * hidden), rng);
  p.embeddings = std::move(embeddings);
  return p;
}

inline EncoderParams init_meanpool_encoder(Matrix embeddings, std::size_t output_dim, Rng& rng) {
  if (output_dim == 0 || embeddings.cols() == 0) throw std::invalid_argument("encoder dims must be positive");
  EncoderParams p;
  p.kind = EncoderKind::meanpool;
  p.projection = detail::uniform_matrix(embeddings.cols(), output_dim, static_cast<double>(embeddings.cols()), rng);
  p.embeddings = std::move(embeddings);
  return p;
}

struct LstmStep {
  Vector input_gate, forget_gate, output_gate, candidate;
  Vector cell, cell_tanh, hidden;
};

/// Everything the backward pass needs from one encode call.
struct EncodeCache {
  EncoderKind kind = EncoderKind::meanpool;
  std::vector<TokenId> tokens;
  std::vector<LstmStep> forward_steps;   // indexed by position
  std::vector<LstmStep> backward_steps;  // indexed by position
  Matrix states;                         // n x 2k; row q = [h_fwd(q), h_bwd(q)]
  Vector attention_weights;              // length n, softmax over positions
  Vector context;                        // length 2k (bilstm) or k_embed (meanpool mean)
};

namespace detail {

inline LstmStep lstm_step(const LstmParams& p, std::span<const double> x, std::span<const double> h_prev,
                          std::span<const double> c_prev) {
  const std::size_t k = p.hidden();
  Vector pre = matvec(p.input_weights, x);
  const Vector rec = matvec(p.recurrent_weights, h_prev);
  for (std::size_t i = 0; i < 4 * k; ++i) pre[i] += rec[i] + p.bias(i, 0);
  LstmStep s;
  s.input_gate.resize(k);
  s.forget_gate.resize(k);
  s.output_gate.resize(k);
  s.candidate.resize(k);
  s.cell.resize(k);
  s.cell_tanh.resize(k);
  s.hidden.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    s.input_gate[j] = sigmoid(pre[j]);
    s.forget_gate[j] = sigmoid(pre[k + j]);
    s.output_gate[j] = sigmoid(pre[2 * k + j]);
    s.candidate[j] = std::tanh(pre[3 * k + j]);
    s.cell[j] = s.forget_gate[j] * c_prev[j] + s.input_gate[j] * s.candidate[j];
    s.cell_tanh[j] = std::tanh(s.cell[j]);
    s.hidden[j] = s.output_gate[j] * s.cell_tanh[j];
  }
  return s;
}

/// Runs one direction over `order` (positions in processing order).
inline std::vector<LstmStep> run_lstm(const LstmParams& p, const Matrix& embeddings, std::span<const TokenId> tokens,
                                      bool reverse) {
  const std::size_t n = tokens.size();
  const std::size_t k = p.hidden();
  std::vector<LstmStep> steps(n);
  Vector h(k, 0.0), c(k, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t q = reverse ? n - 1 - s : s;
    steps[q] = lstm_step(p, embeddings.row(tokens[q]), h, c);
    h = steps[q].hidden;
    c = steps[q].cell;
  }
  return steps;
}

/// Backprop through one direction. `d_hidden` is n x k (row per position),
/// gradients accumulate into `grads`; token-embedding gradients into
/// `d_embeddings` when non-null.
inline void backprop_lstm(const LstmParams& p, const Matrix& embeddings, std::span<const TokenId> tokens,
                          const std::vector<LstmStep>& steps, const Matrix& d_hidden, bool reverse, LstmParams& grads,
                          Matrix* d_embeddings) {
  const std::size_t n = tokens.size();
  const std::size_t k = p.hidden();
  Vector dh_next(k, 0.0), dc_next(k, 0.0), d_pre(4 * k);
  const Vector zeros(k, 0.0);
  for (std::size_t s = n; s-- > 0;) {
    const std::size_t q = reverse ? n - 1 - s : s;
    const bool has_prev = s > 0;
    const std::size_t q_prev = reverse ? q + 1 : q - 1;
    const LstmStep& st = steps[q];
    const std::span<const double> c_prev = has_prev ? std::span<const double>(steps[q_prev].cell) : zeros;
    const std::span<const double> h_prev = has_prev ? std::span<const double>(steps[q_prev].hidden) : zeros;

    for (std::size_t j = 0; j < k; ++j) {
      const double dh = d_hidden(q, j) + dh_next[j];
      const double d_out = dh * st.cell_tanh[j];
      const double dc = dc_next[j] + dh * st.output_gate[j] * (1.0 - st.cell_tanh[j] * st.cell_tanh[j]);
      const double d_in = dc * st.candidate[j];
      const double d_cand = dc * st.input_gate[j];
      const double d_forget = dc * c_prev[j];
      dc_next[j] = dc * st.forget_gate[j];
      d_pre[j] = d_in * st.input_gate[j] * (1.0 - st.input_gate[j]);
      d_pre[k + j] = d_forget * st.forget_gate[j] * (1.0 - st.forget_gate[j]);
      d_pre[2 * k + j] = d_out * st.output_gate[j] * (1.0 - st.output_gate[j]);
      d_pre[3 * k + j] = d_cand * (1.0 - st.candidate[j] * st.candidate[j]);
    }
    const auto x = embeddings.row(tokens[q]);
    add_outer(grads.input_weights, d_pre, x);
    add_outer(grads.recurrent_weights, d_pre, h_prev);
    for (std::size_t i = 0; i < 4 * k; ++i) grads.bias(i, 0) += d_pre[i];
    dh_next = vecmat(d_pre, p.recurrent_weights);
    if (d_embeddings) {
      const Vector dx = vecmat(d_pre, p.input_weights);
      auto row = d_embeddings->row(tokens[q]);
      for (std::size_t j = 0; j < dx.size(); ++j) row[j] += dx[j];
    }
  }
}

}  // namespace detail

/// Maps a token sequence to its d-dimensional representation.
///
/// Bi-LSTM: both directions start from zero states; the n x 2k state matrix
/// is pooled with softmax attention weights E = softmax(states * a^T) and the
/// pooled context is projected: r = (sum_q E_q states_q) * projection.
/// Mean-pool: r = mean(token embeddings) * projection.
inline std::pair<Vector, EncodeCache> encode(const EncoderParams& params, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw std::invalid_argument("encode: empty document");
  for (TokenId t : tokens) {
    if (t >= params.embeddings.rows()) {
      throw ShapeError("encode: token id " + std::to_string(t) + " outside embedding table of " +
                       std::to_string(params.embeddings.rows()) + " rows");
    }
  }
  EncodeCache cache;
  cache.kind = params.kind;
  cache.tokens.assign(tokens.begin(), tokens.end());
  const std::size_t n = tokens.size();

  if (params.kind == EncoderKind::meanpool) {
    Vector mean(params.embed_dim(), 0.0);
    for (TokenId t : tokens) {
      auto row = params.embeddings.row(t);
      for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += row[j];
    }
    for (double& x : mean) x /= static_cast<double>(n);
    Vector r = vecmat(mean, params.projection);
    cache.context = std::move(mean);
    return {std::move(r), std::move(cache)};
  }

  const std::size_t k = params.hidden();
  cache.forward_steps = detail::run_lstm(params.forward, params.embeddings, tokens, false);
  cache.backward_steps = detail::run_lstm(params.backward, params.embeddings, tokens, true);
  cache.states = Matrix(n, 2 * k);
  for (std::size_t q = 0; q < n; ++q) {
    auto row = cache.states.row(q);
    std::copy(cache.forward_steps[q].hidden.begin(), cache.forward_steps[q].hidden.end(), row.begin());
    std::copy(cache.backward_steps[q].hidden.begin(), cache.backward_steps[q].hidden.end(), row.begin() + static_cast<std::ptrdiff_t>(k));
  }
  const Vector scores = matvec(cache.states, params.attention.row(0));
  cache.attention_weights = softmax(scores);
  cache.context = vecmat(cache.attention_weights, cache.states);
  Vector r = vecmat(cache.context, params.projection);
  return {std::move(r), std::move(cache)};
}

inline std::pair<Vector, EncodeCache> encode(const EncoderParams& params, const Document& doc) {
  return encode(params, std::span<const TokenId>(doc.tokens));
}

/// Adds d(loss)/d(params) for one encode call to `grads` (shaped like
/// params.zeros_like()).
inline void accumulate_encoder_gradients(const EncoderParams& params, const EncodeCache& cache,
                                         std::span<const double> d_r, EncoderParams& grads) {
  if (cache.kind != params.kind) throw ShapeError("encode_backward: cache was produced by a different encoder kind");
  if (d_r.size() != params.output_dim()) {
    throw ShapeError("encode_backward: gradient length " + std::to_string(d_r.size()) + " != d=" +
                     std::to_string(params.output_dim()));
  }
  if (cache.context.size() != params.projection.rows()) throw ShapeError("encode_backward: cache/params mismatch");
  const std::size_t n = cache.tokens.size();

  add_outer(grads.projection, cache.context, d_r);
  const Vector d_context = matvec(params.projection, d_r);

  if (params.kind == EncoderKind::meanpool) {
    if (params.train_embeddings) {
      for (TokenId t : cache.tokens) {
        auto row = grads.embeddings.row(t);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += d_context[j] / static_cast<double>(n);
      }
    }
    return;
  }

  const std::size_t k = params.hidden();
  if (cache.states.rows() != n || cache.states.cols() != 2 * k) throw ShapeError("encode_backward: cache/params mismatch");
  // context = sum_q E_q states_q ; scores_q = attention . states_q
  Matrix d_states(n, 2 * k);
  Vector d_weights(n);
  for (std::size_t q = 0; q < n; ++q) {
    d_weights[q] = dot(d_context, cache.states.row(q));
    auto row = d_states.row(q);
    for (std::size_t j = 0; j < 2 * k; ++j) row[j] = cache.attention_weights[q] * d_context[j];
  }
  const double mean_dw = dot(cache.attention_weights, d_weights);
  const auto attn = params.attention.row(0);
  auto d_attn = grads.attention.row(0);
  for (std::size_t q = 0; q < n; ++q) {
    const double d_score = cache.attention_weights[q] * (d_weights[q] - mean_dw);
    auto state = cache.states.row(q);
    auto row = d_states.row(q);
    for (std::size_t j = 0; j < 2 * k; ++j) {
      d_attn[j] += d_score * state[j];
      row[j] += d_score * attn[j];
    }
  }

  Matrix d_fwd(n, k), d_bwd(n, k);
  for (std::size_t q = 0; q < n; ++q) {
    for (std::size_t j = 0; j < k; ++j) {
      d_fwd(q, j) = d_states(q, j);
      d_bwd(q, j) = d_states(q, k + j);
    }
  }
  Matrix* d_emb = params.train_embeddings ? &grads.embeddings : nullptr;
  detail::backprop_lstm(params.forward, params.embeddings, cache.tokens, cache.forward_steps, d_fwd, false,
                        grads.forward, d_emb);
  detail::backprop_lstm(params.backward, params.embeddings, cache.tokens, cache.backward_steps, d_bwd, true,
                        grads.backward, d_emb);
}

/// Gradients of a single encode call with respect to every trainable
/// parameter.
inline EncoderParams encode_backward(const EncoderParams& params, const EncodeCache& cache,
                                     std::span<const double> d_r) {
  EncoderParams grads = params.zeros_like();
  accumulate_encoder_gradients(params, cache, d_r, grads);
  return grads;
}

/// Encodes every listed document, in order.
inline std::vector<Vector> encode_all(const EncoderParams& params, const Corpus& corpus,
                                      std::span<const std::size_t> doc_ids) {
  std::vector<Vector> out;
  out.reserve(doc_ids.size());
  for (std::size_t i : doc_ids) out.push_back(encode(params, corpus.documents[i]).first);
  return out;
}

}  // namespace httn

#endif  // HTTN_ENCODER_HPP
