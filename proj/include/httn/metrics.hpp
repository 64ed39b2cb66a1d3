#ifndef HTTN_METRICS_HPP
#define HTTN_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "httn/corpus.hpp"
#include "httn/encoder.hpp"
#include "httn/matrix.hpp"

namespace httn {

/// Label indices sorted by descending score; ties by ascending index.
inline std::vector<std::size_t> rank_labels(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

namespace detail {
inline void check_ranking_args(std::span<const double> scores, std::span<const double> truth, std::size_t k) {
  if (scores.size() != truth.size()) throw ShapeError("ranking metric: scores/truth length mismatch");
  if (k < 1 || k > scores.size()) {
    throw std::invalid_argument("ranking metric: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(scores.size()) + "]");
  }
}
}  // namespace detail

inline double precision_at_k(std::span<const double> scores, std::span<const double> truth, std::size_t k) {
  detail::check_ranking_args(scores, truth, k);
  const auto order = rank_labels(scores);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i) hits += truth[order[i]] > 0.5 ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

/// Binary-relevance nDCG@k; 0 when truth is empty.
inline double ndcg_at_k(std::span<const double> scores, std::span<const double> truth, std::size_t k) {
  detail::check_ranking_args(scores, truth, k);
  const auto order = rank_labels(scores);
  const auto positives = static_cast<std::size_t>(std::count_if(truth.begin(), truth.end(), [](double y) { return y > 0.5; }));
  if (positives == 0) return 0.0;
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double discount = 1.0 / std::log2(static_cast<double>(i) + 2.0);
    if (truth[order[i]] > 0.5) dcg += discount;
    if (i < positives) idcg += discount;
  }
  return dcg / idcg;
}

struct LabelStats {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::size_t support = 0;  // positives in the truth
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct F1Result {
  double micro = 0.0;
  double macro = 0.0;
  std::vector<LabelStats> per_label;
};

namespace detail {
inline double safe_ratio(double a, double b) { return b > 0.0 ? a / b : 0.0; }
inline double harmonic(double p, double r) { return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }
}  // namespace detail

/// Binarises at `threshold` (positive iff prob > threshold) and scores each
/// label in `labels` (all labels when empty). Micro-F1 pools counts over the
/// selected labels; macro-F1 averages their per-label F1.
inline F1Result f1_scores(const Matrix& probs, const Matrix& truth, double threshold = 0.5,
                          std::span<const LabelId> labels = {}) {
  Matrix::require_same_shape(probs, truth, "f1_scores");
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("f1_scores: threshold must be in (0, 1)");
  F1Result out;
  out.per_label.resize(probs.cols());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    for (std::size_t j = 0; j < probs.cols(); ++j) {
      const bool pred = probs(i, j) > threshold;
      const bool gold = truth(i, j) > 0.5;
      auto& s = out.per_label[j];
      if (gold) ++s.support;
      if (pred && gold) ++s.true_positives;
      if (pred && !gold) ++s.false_positives;
      if (!pred && gold) ++s.false_negatives;
    }
  }
  for (auto& s : out.per_label) {
    s.precision = detail::safe_ratio(static_cast<double>(s.true_positives),
                                     static_cast<double>(s.true_positives + s.false_positives));
    s.recall = detail::safe_ratio(static_cast<double>(s.true_positives),
                                  static_cast<double>(s.true_positives + s.false_negatives));
    s.f1 = detail::harmonic(s.precision, s.recall);
  }
  std::vector<LabelId> selected(labels.begin(), labels.end());
  if (labels.empty()) {
    selected.resize(probs.cols());
    std::iota(selected.begin(), selected.end(), 0);
  }
  if (selected.empty()) return out;
  double tp = 0, fp = 0, fn = 0, f1_sum = 0;
  for (LabelId j : selected) {
    const auto& s = out.per_label.at(j);
    tp += static_cast<double>(s.true_positives);
    fp += static_cast<double>(s.false_positives);
    fn += static_cast<double>(s.false_negatives);
    f1_sum += s.f1;
  }
  out.micro = detail::harmonic(detail::safe_ratio(tp, tp + fp), detail::safe_ratio(tp, tp + fn));
  out.macro = f1_sum / static_cast<double>(selected.size());
  return out;
}

/// Metrics for one label slice (overall, head or tail).
struct SliceReport {
  std::string name;
  std::vector<LabelId> labels;
  std::vector<std::size_t> ks;
  std::vector<double> precision_at;  // per k
  std::vector<double> ndcg_at;       // per k
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::size_t documents = 0;         // documents scored for F1
  std::size_t ranked_documents = 0;  // documents with non-empty truth in the slice
  std::size_t skipped_documents = 0;
};

struct EvalReport {
  SliceReport overall;
  SliceReport head;
  SliceReport tail;
  std::vector<LabelStats> per_label;  // length l
};

struct EvalOptions {
  std::vector<std::size_t> ks{1, 3, 5};
  double threshold = 0.5;
};

/// Ranking metrics are averaged over documents with at least one true label
/// in the slice; k is capped at the slice's label count. F1 uses every
/// document.
inline SliceReport evaluate_slice(const std::string& name, const Matrix& probs, const Matrix& truth,
                                  std::vector<LabelId> labels, const EvalOptions& options) {
  SliceReport s;
  s.name = name;
  s.labels = std::move(labels);
  s.ks = options.ks;
  s.precision_at.assign(s.ks.size(), 0.0);
  s.ndcg_at.assign(s.ks.size(), 0.0);
  s.documents = probs.rows();
  if (s.labels.empty()) return s;
  Vector scores(s.labels.size()), gold(s.labels.size());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    bool any = false;
    for (std::size_t j = 0; j < s.labels.size(); ++j) {
      scores[j] = probs(i, s.labels[j]);
      gold[j] = truth(i, s.labels[j]);
      any = any || gold[j] > 0.5;
    }
    if (!any) {
      ++s.skipped_documents;
      continue;
    }
    ++s.ranked_documents;
    for (std::size_t q = 0; q < s.ks.size(); ++q) {
      const std::size_t k = std::min(s.ks[q], s.labels.size());
      s.precision_at[q] += precision_at_k(scores, gold, k);
      s.ndcg_at[q] += ndcg_at_k(scores, gold, k);
    }
  }
  if (s.ranked_documents > 0) {
    for (auto& v : s.precision_at) v /= static_cast<double>(s.ranked_documents);
    for (auto& v : s.ndcg_at) v /= static_cast<double>(s.ranked_documents);
  }
  const F1Result f1 = f1_scores(probs, truth, options.threshold, s.labels);
  s.micro_f1 = f1.micro;
  s.macro_f1 = f1.macro;
  return s;
}

/// Full report from precomputed probabilities (N x l) and truth.
inline EvalReport evaluate_probabilities(const Matrix& probs, const Matrix& truth, const std::vector<LabelId>& head,
                                         const std::vector<LabelId>& tail, const EvalOptions& options = {}) {
  if (probs.rows() == 0) throw DataError("evaluate: empty test set");
  for (std::size_t k : options.ks)
    if (k == 0) throw std::invalid_argument("evaluate: k must be >= 1");
  std::vector<LabelId> all(probs.cols());
  std::iota(all.begin(), all.end(), 0);
  EvalReport report;
  report.overall = evaluate_slice("overall", probs, truth, all, options);
  report.head = evaluate_slice("head", probs, truth, head, options);
  report.tail = evaluate_slice("tail", probs, truth, tail, options);
  report.per_label = f1_scores(probs, truth, options.threshold).per_label;
  return report;
}

/// Scores every test document with `predictor(r) -> probabilities`.
template <class Predictor>
Matrix predict_split(const EncoderParams& encoder, const Corpus& corpus, SplitTag tag, Predictor&& predictor) {
  const auto ids = corpus.indices(tag);
  Matrix probs(ids.size(), corpus.num_labels);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const Vector rep = encode(encoder, corpus.documents[ids[r]]).first;
    const Vector p = predictor(rep);
    if (p.size() != corpus.num_labels) throw ShapeError("evaluate: predictor returned wrong label count");
    std::copy(p.begin(), p.end(), probs.row(r).begin());
  }
  return probs;
}

template <class Predictor>
EvalReport evaluate(const EncoderParams& encoder, Predictor&& predictor, const Corpus& corpus,
                    const HeadTailSplit& split, const EvalOptions& options = {}) {
  const Matrix probs = predict_split(encoder, corpus, SplitTag::test, predictor);
  if (probs.rows() == 0) throw DataError("evaluate: empty test set");
  return evaluate_probabilities(probs, corpus.label_matrix(SplitTag::test), split.head_labels, split.tail_labels,
                                options);
}

namespace detail {
inline std::string fixed(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}
}  // namespace detail

/// CSV rows: method,slice,metric,value
inline void write_report_csv(std::ostream& os, const std::string& method, const EvalReport& report,
                             bool header = true) {
  if (header) os << "method,slice,metric,value\n";
  for (const SliceReport* s : {&report.overall, &report.head, &report.tail}) {
    for (std::size_t q = 0; q < s->ks.size(); ++q)
      os << method << ',' << s->name << ",P@" << s->ks[q] << ',' << detail::fixed(s->precision_at[q], 6) << '\n';
    for (std::size_t q = 0; q < s->ks.size(); ++q)
      os << method << ',' << s->name << ",nDCG@" << s->ks[q] << ',' << detail::fixed(s->ndcg_at[q], 6) << '\n';
    os << method << ',' << s->name << ",micro_F1," << detail::fixed(s->micro_f1, 6) << '\n';
    os << method << ',' << s->name << ",macro_F1," << detail::fixed(s->macro_f1, 6) << '\n';
    os << method << ',' << s->name << ",ranked_documents," << s->ranked_documents << '\n';
  }
}

/// One row per label: label,slice,support,tp,fp,fn,precision,recall,f1
inline void write_per_label_csv(std::ostream& os, const EvalReport& report) {
  os << "label,slice,support,tp,fp,fn,precision,recall,f1\n";
  std::vector<std::string> slice(report.per_label.size(), "head");
  for (LabelId z : report.tail.labels) slice.at(z) = "tail";
  for (std::size_t j = 0; j < report.per_label.size(); ++j) {
    const auto& s = report.per_label[j];
    os << j << ',' << slice[j] << ',' << s.support << ',' << s.true_positives << ',' << s.false_positives << ','
       << s.false_negatives << ',' << detail::fixed(s.precision, 6) << ',' << detail::fixed(s.recall, 6) << ','
       << detail::fixed(s.f1, 6) << '\n';
  }
}

/// Fixed-width table: method, P@k..., nDCG@k (k > 1)..., F1 (micro).
inline void write_report_table(std::ostream& os, const std::vector<std::pair<std::string, SliceReport>>& rows) {
  if (rows.empty()) return;
  const auto& ks = rows.front().second.ks;
  os << std::left << std::setw(24) << "Method";
  for (std::size_t k : ks) os << std::right << std::setw(9) << ("P@" + std::to_string(k));
  for (std::size_t k : ks)
    if (k > 1) os << std::right << std::setw(9) << ("nDCG@" + std::to_string(k));
  os << std::right << std::setw(9) << "F1" << std::setw(10) << "macroF1" << '\n';
  for (const auto& [name, s] : rows) {
    os << std::left << std::setw(24) << name;
    for (std::size_t q = 0; q < s.ks.size(); ++q) os << std::right << std::setw(9) << detail::fixed(100.0 * s.precision_at[q], 2);
    for (std::size_t q = 0; q < s.ks.size(); ++q)
      if (s.ks[q] > 1) os << std::right << std::setw(9) << detail::fixed(100.0 * s.ndcg_at[q], 2);
    os << std::right << std::setw(9) << detail::fixed(100.0 * s.micro_f1, 2) << std::setw(10)
       << detail::fixed(100.0 * s.macro_f1, 2) << '\n';
  }
}

}  // namespace httn

#endif  // HTTN_METRICS_HPP
