#ifndef HTTN_PIPELINE_HPP
#define HTTN_PIPELINE_HPP

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "httn/checkpoint.hpp"
#include "httn/classifier.hpp"
#include "httn/corpus.hpp"
#include "httn/encoder.hpp"
#include "httn/ensemble.hpp"
#include "httn/metrics.hpp"
#include "httn/prototyper.hpp"
#include "httn/synthetic.hpp"
#include "httn/transfer.hpp"

namespace httn {

namespace detail {
template <class Fn>
auto parse_enum(Fn fn, const std::string& v, const std::string& key) {
  try {
    return fn(v);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}
}  // namespace detail

/// Every knob of a pipeline run. Serialised as sorted `key=value` lines.
struct RunConfig {
  std::string train_documents;
  std::string train_labels;
  std::string test_documents;
  std::string test_labels;
  std::string embeddings;  // empty: seeded Gaussian vectors

  std::size_t tail_labels = 10;

  EncoderKind encoder = EncoderKind::meanpool;
  std::size_t embed_dim = 32;
  std::size_t hidden = 16;
  std::size_t output_dim = 32;
  bool train_embeddings = false;

  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;

  std::size_t t = 5;
  std::size_t samples = 30;  // S

  double lambda = 1e-3;
  TransferMethod method = TransferMethod::ridge;
  AttentionScore score = AttentionScore::scaled_dot;
  bool attention = true;

  std::size_t members = 1;  // G
  Aggregation aggregation = Aggregation::probability_mean;

  bool finetune = true;
  std::size_t finetune_epochs = 3;
  double finetune_learning_rate = 1e-4;

  std::vector<std::size_t> ks{1, 3, 5};
  double threshold = 0.5;

  std::uint64_t seed = 1;

  /// The paper-scale preset (k=300 embeddings and LSTM, d=128, Adam 1e-3).
  static RunConfig full_scale() {
    RunConfig c;
    c.encoder = EncoderKind::bilstm;
    c.embed_dim = 300;
    c.hidden = 300;
    c.output_dim = 128;
    c.learning_rate = 1e-3;
    c.t = 5;
    c.samples = 30;
    c.members = 30;
    return c;
  }

  template <class F>
  void visit(F&& f) {
    f("train_documents", train_documents);
    f("train_labels", train_labels);
    f("test_documents", test_documents);
    f("test_labels", test_labels);
    f("embeddings", embeddings);
    f("tail_labels", tail_labels);
    f("encoder", encoder);
    f("embed_dim", embed_dim);
    f("hidden", hidden);
    f("output_dim", output_dim);
    f("train_embeddings", train_embeddings);
    f("epochs", epochs);
    f("batch_size", batch_size);
    f("learning_rate", learning_rate);
    f("clip_norm", clip_norm);
    f("t", t);
    f("samples", samples);
    f("lambda", lambda);
    f("transfer_method", method);
    f("attention_score", score);
    f("attention", attention);
    f("members", members);
    f("aggregation", aggregation);
    f("finetune", finetune);
    f("finetune_epochs", finetune_epochs);
    f("finetune_learning_rate", finetune_learning_rate);
    f("ks", ks);
    f("threshold", threshold);
    f("seed", seed);
  }

  void set(const std::string& key, const std::string& value) {
    bool found = false;
    visit([&](const char* name, auto& field) {
      if (key == name) {
        assign(field, value, key);
        found = true;
      }
    });
    if (!found) throw ConfigError("unknown config key \"" + key + "\"");
  }

  std::string to_text() const {
    std::map<std::string, std::string> kv;
    const_cast<RunConfig*>(this)->visit([&](const char* name, auto& field) { kv[name] = render(field); });
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
  }

  /// Applies `key=value` lines; blank lines and `#` comments are ignored.
  void apply_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
      auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
  }

  static RunConfig from_text(const std::string& text) {
    RunConfig c;
    c.apply_text(text);
    return c;
  }

  void validate() const {
    if (embed_dim == 0 || output_dim == 0 || (encoder == EncoderKind::bilstm && hidden == 0)) {
      throw ConfigError("dimensions must be positive");
    }
    if (t == 0) throw ConfigError("t must be >= 1");
    if (samples == 0) throw ConfigError("samples (S) must be >= 1");
    if (members == 0) throw ConfigError("members (G) must be >= 1");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must be in (0, 1)");
    if (ks.empty()) throw ConfigError("ks must not be empty");
    for (std::size_t k : ks)
      if (k == 0) throw ConfigError("ks entries must be >= 1");
    train_config().validate();
  }

  TrainConfig train_config() const {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = batch_size;
    tc.learning_rate = learning_rate;
    tc.seed = derive_seed(seed, "stage/train");
    tc.encoder = encoder;
    tc.clip_norm = clip_norm;
    tc.hidden = hidden;
    tc.output_dim = output_dim;
    tc.train_embeddings = train_embeddings;
    return tc;
  }

  EvalOptions eval_options() const { return EvalOptions{ks, threshold}; }

 private:
  static void assign(std::string& f, const std::string& v, const std::string&) { f = v; }
  static void assign(bool& f, const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "on") f = true;
    else if (v == "false" || v == "0" || v == "off") f = false;
    else throw ConfigError(key + ": expected true/false, got \"" + v + "\"");
  }
  static void assign(std::size_t& f, const std::string& v, const std::string& key) {
    try {
      std::size_t pos = 0;
      f = std::stoull(v, &pos);
      if (pos != v.size() || v[0] == '-') throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected a non-negative integer, got \"" + v + "\"");
    }
  }
  static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seed is parsed as std::size_t");
  static void assign(double& f, const std::string& v, const std::string& key) {
    try {
      std::size_t pos = 0;
      f = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected a number, got \"" + v + "\"");
    }
  }
  static void assign(EncoderKind& f, const std::string& v, const std::string& key) { f = detail::parse_enum(encoder_kind_from_string, v, key); }
  static void assign(TransferMethod& f, const std::string& v, const std::string& key) { f = detail::parse_enum(transfer_method_from_string, v, key); }
  static void assign(AttentionScore& f, const std::string& v, const std::string& key) { f = detail::parse_enum(attention_score_from_string, v, key); }
  static void assign(Aggregation& f, const std::string& v, const std::string& key) { f = detail::parse_enum(aggregation_from_string, v, key); }
  static void assign(std::vector<std::size_t>& f, const std::string& v, const std::string& key) {
    f.clear();
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t x = 0;
      assign(x, item, key);
      f.push_back(x);
    }
  }

  static std::string render(const std::string& v) { return v; }
  static std::string render(bool v) { return v ? "true" : "false"; }
  static std::string render(std::size_t v) { return std::to_string(v); }
  static std::string render(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  }
  static std::string render(EncoderKind v) { return to_string(v); }
  static std::string render(TransferMethod v) { return to_string(v); }
  static std::string render(AttentionScore v) { return to_string(v); }
  static std::string render(Aggregation v) { return to_string(v); }
  static std::string render(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  }
};

/// Word-embedding matrix aligned with the corpus vocabulary.
inline Matrix embedding_matrix(const RunConfig& config, const Corpus& corpus, std::vector<std::string>* warnings = nullptr) {
  if (!config.embeddings.empty()) {
    EmbeddingTable table = load_embeddings(config.embeddings, config.embed_dim);
    if (warnings) warnings->insert(warnings->end(), table.warnings.begin(), table.warnings.end());
    return table.matrix_for(corpus.vocabulary);
  }
  return synthesize_embeddings(corpus.vocabulary, config.embed_dim, derive_seed(config.seed, "embeddings"))
      .matrix_for(corpus.vocabulary);
}

inline Corpus load_run_corpus(const RunConfig& config, bool with_test = true) {
  if (config.train_documents.empty() || config.train_labels.empty()) throw ConfigError("training corpus paths are required");
  Corpus corpus = load_corpus(config.train_documents, config.train_labels, SplitTag::train);
  if (with_test && !config.test_documents.empty()) {
    load_into(corpus, config.test_documents, config.test_labels, SplitTag::test);
  }
  return corpus;
}

struct StageOne {
  HeadTailSplit split;
  TrainResult head;
};

inline StageOne run_stage_one(const Corpus& corpus, const Matrix& embeddings, const RunConfig& config) {
  config.validate();
  if (config.tail_labels >= corpus.num_labels) {
    throw ConfigError("tail_labels=" + std::to_string(config.tail_labels) + " must be < l=" +
                      std::to_string(corpus.num_labels));
  }
  StageOne out;
  out.split = split_head_tail(corpus, config.tail_labels);
  out.head = train_head(corpus, embeddings, out.split, config.train_config());
  return out;
}

inline TrainResult run_joint(const Corpus& corpus, const Matrix& embeddings, const RunConfig& config) {
  config.validate();
  return train_joint(corpus, embeddings, config.train_config());
}

/// Stages 2 and 3 on top of a trained encoder and M_head.
struct HttnModel {
  TransferMap map;
  std::vector<Vector> head_prototypes;  // exact means, head order
  EnsembleModel ensemble;
  std::vector<std::vector<double>> finetune_traces;
};

/// One (prototype, column) pair per head label per draw: S draws of t
/// documents each.
inline std::vector<TransferPair> head_transfer_pairs(const HeadTailSplit& split, std::span<const Vector> reps,
                                                     const Matrix& head_weights, std::size_t t, std::size_t samples,
                                                     std::uint64_t seed) {
  std::vector<TransferPair> pairs;
  for (std::size_t j = 0; j < split.head_labels.size(); ++j) {
    const Vector column = head_weights.column(j);
    for (auto& p : sample_label_prototypes(split, reps, split.head_labels[j], t, samples, seed)) {
      pairs.push_back({std::move(p.vector), column});
    }
  }
  return pairs;
}

inline HttnModel build_tail(const Corpus& corpus, const HeadTailSplit& split, std::span<const Vector> reps,
                            const Matrix& head_weights, const RunConfig& config) {
  config.validate();
  HttnModel model;
  const auto pairs = head_transfer_pairs(split, reps, head_weights, config.t, config.samples,
                                         derive_seed(config.seed, "stage/proto"));
  TransferOptions topt;
  topt.method = config.method;
  topt.lambda = config.lambda;
  model.map = fit_transfer(pairs, topt);
  model.head_prototypes = head_mean_prototypes(split, reps);

  EnsembleOptions eopt;
  eopt.members = config.members;
  eopt.t = config.t;
  eopt.use_attention = config.attention;
  eopt.score = config.score;
  eopt.seed = derive_seed(config.seed, "stage/tail");
  model.ensemble = build_ensemble(eopt, model.map, split, reps, head_weights, model.head_prototypes);
  model.ensemble.aggregation = config.aggregation;

  if (config.finetune && config.finetune_epochs > 0) {
    FineTuneConfig fc;
    fc.epochs = config.finetune_epochs;
    fc.learning_rate = config.finetune_learning_rate;
    fc.batch_size = config.batch_size;
    fc.seed = derive_seed(config.seed, "stage/finetune");
    for (auto& member : model.ensemble.members) {
      FineTuneResult ft = fine_tune(member, corpus, reps, fc);
      member = std::move(ft.weights);
      model.finetune_traces.push_back(std::move(ft.loss_trace));
    }
  }
  return model;
}

inline Vector predict_model(const EnsembleModel& model, std::span<const double> r) {
  return model.size() == 1 ? predict(r, model.members.front()) : predict_ensemble(model, r);
}

inline EvalReport evaluate_model(const EncoderParams& encoder, const EnsembleModel& model, const Corpus& corpus,
                                 const HeadTailSplit& split, const EvalOptions& options) {
  return evaluate(encoder, [&](const Vector& r) { return predict_model(model, r); }, corpus, split, options);
}

inline EvalReport evaluate_weights(const EncoderParams& encoder, const Matrix& weights, const Corpus& corpus,
                                   const HeadTailSplit& split, const EvalOptions& options) {
  return evaluate(encoder, [&](const Vector& r) { return predict(r, weights); }, corpus, split, options);
}

// Checkpoint mapping --------------------------------------------------------

namespace detail {
inline Matrix ids_to_row(const std::vector<LabelId>& ids) {
  Matrix m(1, ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) m(0, i) = static_cast<double>(ids[i]);
  return m;
}
inline std::vector<LabelId> row_to_ids(const Matrix& m) {
  std::vector<LabelId> ids;
  for (double v : m.data()) ids.push_back(static_cast<LabelId>(v));
  return ids;
}
inline Matrix trace_row(const std::vector<double>& trace) { return Matrix::row_vector(trace); }
}  // namespace detail

inline void store_encoder(Checkpoint& ck, EncoderParams encoder) {
  ck.put("encoder/embeddings", encoder.embeddings);
  for (const auto& p : encoder.parameters())
    if (p.name != "encoder/embeddings") ck.put(p.name, *p.value);
}

inline EncoderParams load_encoder(const Checkpoint& ck) {
  EncoderParams e;
  e.kind = ck.has("encoder/attention") ? EncoderKind::bilstm : EncoderKind::meanpool;
  e.embeddings = ck.get("encoder/embeddings");
  if (e.kind == EncoderKind::bilstm) {
    e.forward = {ck.get("encoder/forward/input_weights"), ck.get("encoder/forward/recurrent_weights"),
                 ck.get("encoder/forward/bias")};
    e.backward = {ck.get("encoder/backward/input_weights"), ck.get("encoder/backward/recurrent_weights"),
                  ck.get("encoder/backward/bias")};
    e.attention = ck.get("encoder/attention");
  }
  e.projection = ck.get("encoder/projection");
  return e;
}

/// Encoder for `corpus`, whose vocabulary must be covered by the stored
/// embedding table.
inline EncoderParams load_encoder(const Checkpoint& ck, const Corpus& corpus) {
  EncoderParams e = load_encoder(ck);
  if (corpus.vocabulary.size() > e.embeddings.rows()) {
    throw DataError("corpus has " + std::to_string(corpus.vocabulary.size()) + " distinct words but the checkpoint embeds " +
                    std::to_string(e.embeddings.rows()) + " (train with the same corpus paths, including test files)");
  }
  return e;
}

inline void store_split(Checkpoint& ck, const HeadTailSplit& split) {
  ck.put("split/head_labels", detail::ids_to_row(split.head_labels));
  ck.put("split/tail_labels", detail::ids_to_row(split.tail_labels));
}

/// Recomputes the split from the corpus and checks it against the stored
/// label ids.
inline HeadTailSplit load_split(const Checkpoint& ck, const Corpus& corpus) {
  const auto head = detail::row_to_ids(ck.get("split/head_labels"));
  const auto tail = detail::row_to_ids(ck.get("split/tail_labels"));
  if (head.size() + tail.size() != corpus.num_labels) throw DataError("checkpoint label count does not match corpus");
  HeadTailSplit split = split_head_tail(corpus, tail.size());
  if (split.head_labels != head || split.tail_labels != tail) {
    throw DataError("checkpoint head/tail split does not match the corpus");
  }
  return split;
}

inline void store_model(Checkpoint& ck, const HttnModel& model) {
  ck.put("transfer/weights", model.map.weights);
  Matrix protos(model.head_prototypes.size(), model.map.weights.rows());
  for (std::size_t j = 0; j < model.head_prototypes.size(); ++j)
    std::copy(model.head_prototypes[j].begin(), model.head_prototypes[j].end(), protos.row(j).begin());
  ck.put("prototypes/head_mean", protos);
  ck.put("ensemble/size", Matrix(1, 1, static_cast<double>(model.ensemble.size())));
  for (std::size_t g = 0; g < model.ensemble.size(); ++g) {
    ck.put("ensemble/tail/" + std::to_string(g), model.ensemble.tails[g].weights);
    ck.put("ensemble/member/" + std::to_string(g), model.ensemble.members[g]);
  }
}

inline EnsembleModel load_ensemble(const Checkpoint& ck, Aggregation aggregation) {
  if (!ck.has("ensemble/size")) throw DataError("checkpoint has no tail classifiers (run build-tail first)");
  EnsembleModel model;
  model.aggregation = aggregation;
  const auto g_count = static_cast<std::size_t>(ck.get("ensemble/size")(0, 0));
  for (std::size_t g = 0; g < g_count; ++g) {
    TailWeights tw;
    tw.weights = ck.get("ensemble/tail/" + std::to_string(g));
    tw.draw = g;
    model.tails.push_back(std::move(tw));
    model.members.push_back(ck.get("ensemble/member/" + std::to_string(g)));
  }
  return model;
}

}  // namespace httn

#endif  // HTTN_PIPELINE_HPP
