#ifndef HTTN_CORPUS_HPP
#define HTTN_CORPUS_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "httn/matrix.hpp"

namespace httn {

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

enum class SplitTag : std::uint8_t { train, test };

using TokenId = std::uint32_t;
using LabelId = std::size_t;

struct Document {
  std::size_t id = 0;
  std::vector<TokenId> tokens;
  SplitTag split = SplitTag::train;
};

class Vocabulary {
 public:
  TokenId intern(const std::string& word) {
    auto [it, inserted] = index_.try_emplace(word, static_cast<TokenId>(words_.size()));
    if (inserted) words_.push_back(word);
    return it->second;
  }
  bool contains(const std::string& word) const { return index_.count(word) != 0; }
  TokenId at(const std::string& word) const { return index_.at(word); }
  const std::string& word(TokenId id) const { return words_.at(id); }
  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Documents with sparse label sets. `labels[i]` is the sorted set of
/// positive label ids of `documents[i]`.
struct Corpus {
  std::vector<Document> documents;
  std::vector<std::vector<LabelId>> labels;
  std::size_t num_labels = 0;
  Vocabulary vocabulary;

  std::size_t size() const noexcept { return documents.size(); }

  std::vector<std::size_t> indices(SplitTag tag) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < documents.size(); ++i)
      if (documents[i].split == tag) out.push_back(i);
    return out;
  }

  bool has_label(std::size_t doc, LabelId label) const {
    return std::binary_search(labels[doc].begin(), labels[doc].end(), label);
  }

  /// Dense N x l indicator matrix for the given split.
  Matrix label_matrix(SplitTag tag = SplitTag::train) const {
    const auto ids = indices(tag);
    Matrix y(ids.size(), num_labels);
    for (std::size_t r = 0; r < ids.size(); ++r)
      for (LabelId l : labels[ids[r]]) y(r, l) = 1.0;
    return y;
  }
};

namespace detail {
inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}
}  // namespace detail

/// Appends one documents/labels file pair to `corpus` under `tag`, growing
/// the vocabulary. The label count must agree with what is already loaded.
inline void load_into(Corpus& corpus, const std::filesystem::path& documents_path,
                      const std::filesystem::path& labels_path, SplitTag tag) {
  const auto doc_lines = detail::read_lines(documents_path);
  const auto label_lines = detail::read_lines(labels_path);
  const std::string doc_name = documents_path.string();
  const std::string label_name = labels_path.string();
  if (label_lines.empty()) throw ParseError(label_name, 1, "missing header \"N l\"");

  std::size_t n_docs = 0;
  std::size_t n_labels = 0;
  {
    std::istringstream header(label_lines[0]);
    std::string extra;
    if (!(header >> n_docs >> n_labels) || (header >> extra)) {
      throw ParseError(label_name, 1, "header must be \"N l\"");
    }
  }
  if (n_labels == 0) throw ParseError(label_name, 1, "label count must be positive");
  if (corpus.num_labels != 0 && corpus.num_labels != n_labels) {
    throw DataError(label_name + ": label count " + std::to_string(n_labels) + " disagrees with " +
                    std::to_string(corpus.num_labels) + " already loaded");
  }
  // A trailing empty line after the last document is tolerated.
  std::size_t doc_count = doc_lines.size();
  if (doc_count > 0 && doc_lines.back().find_first_not_of(" \t") == std::string::npos && doc_count == n_docs + 1)
    --doc_count;
  if (doc_count != n_docs) {
    throw DataError("document/label count mismatch: " + doc_name + " has " + std::to_string(doc_count) +
                    " documents, " + label_name + " declares " + std::to_string(n_docs));
  }
  if (label_lines.size() - 1 < n_docs) {
    throw DataError("document/label count mismatch: " + label_name + " has " +
                    std::to_string(label_lines.size() - 1) + " label lines, header declares " +
                    std::to_string(n_docs));
  }

  corpus.num_labels = n_labels;
  for (std::size_t i = 0; i < n_docs; ++i) {
    Document doc;
    doc.id = corpus.documents.size();
    doc.split = tag;
    std::istringstream words(doc_lines[i]);
    std::string word;
    while (words >> word) doc.tokens.push_back(corpus.vocabulary.intern(detail::lowercase(word)));
    if (doc.tokens.empty()) throw ParseError(doc_name, i + 1, "empty document");

    std::vector<LabelId> ids;
    std::istringstream label_stream(label_lines[i + 1]);
    std::string field;
    while (label_stream >> field) {
      std::size_t pos = 0;
      unsigned long long value = 0;
      try {
        value = std::stoull(field, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != field.size() || field[0] == '-') {
        throw ParseError(label_name, i + 2, "bad label id \"" + field + "\"");
      }
      if (value >= n_labels) {
        throw ParseError(label_name, i + 2,
                         "label id " + field + " out of range for " + std::to_string(n_labels) + " labels");
      }
      ids.push_back(static_cast<LabelId>(value));
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.empty() && tag == SplitTag::train) {
      throw ParseError(label_name, i + 2, "training document without labels");
    }
    corpus.documents.push_back(std::move(doc));
    corpus.labels.push_back(std::move(ids));
  }
}

inline Corpus load_corpus(const std::filesystem::path& documents_path, const std::filesystem::path& labels_path,
                          SplitTag tag = SplitTag::train) {
  Corpus corpus;
  load_into(corpus, documents_path, labels_path, tag);
  return corpus;
}

/// Writes the documents of one split in the documents/labels file format.
inline void write_corpus(const Corpus& corpus, SplitTag tag, const std::filesystem::path& documents_path,
                         const std::filesystem::path& labels_path) {
  const auto ids = corpus.indices(tag);
  std::ofstream docs(documents_path, std::ios::binary);
  std::ofstream labels(labels_path, std::ios::binary);
  if (!docs || !labels) throw DataError("cannot write corpus files");
  labels << ids.size() << ' ' << corpus.num_labels << '\n';
  for (std::size_t i : ids) {
    const auto& tokens = corpus.documents[i].tokens;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (t) docs << ' ';
      docs << corpus.vocabulary.word(tokens[t]);
    }
    docs << '\n';
    const auto& ls = corpus.labels[i];
    for (std::size_t t = 0; t < ls.size(); ++t) {
      if (t) labels << ' ';
      labels << ls[t];
    }
    labels << '\n';
  }
}

/// Word vectors keyed by word. Unknown words map to the zero vector.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, Vector> vectors;
  std::vector<std::string> order;
  std::vector<std::string> warnings;

  void insert(const std::string& word, Vector v) {
    if (v.size() != dim) throw ShapeError("embedding for \"" + word + "\" has wrong length");
    auto [it, inserted] = vectors.insert_or_assign(word, std::move(v));
    if (inserted) order.push_back(word);
  }

  Vector lookup(const std::string& word) const {
    auto it = vectors.find(word);
    return it == vectors.end() ? Vector(dim, 0.0) : it->second;
  }

  std::size_t size() const noexcept { return vectors.size(); }

  /// V x dim matrix whose row i is the vector of vocabulary word i.
  Matrix matrix_for(const Vocabulary& vocab) const {
    Matrix m(vocab.size(), dim);
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      auto it = vectors.find(vocab.word(static_cast<TokenId>(i)));
      if (it != vectors.end()) std::copy(it->second.begin(), it->second.end(), m.row(i).begin());
    }
    return m;
  }
};

inline EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t expected_dim) {
  const auto lines = detail::read_lines(path);
  EmbeddingTable table;
  table.dim = expected_dim;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::istringstream in(lines[i]);
    std::string word;
    if (!(in >> word)) continue;
    Vector v;
    std::string field;
    while (in >> field) {
      std::size_t pos = 0;
      double x = 0.0;
      try {
        x = std::stod(field, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != field.size() || !std::isfinite(x)) {
        throw ParseError(path.string(), i + 1, "bad number \"" + field + "\"");
      }
      v.push_back(x);
    }
    if (v.size() != expected_dim) {
      throw ParseError(path.string(), i + 1,
                       "expected " + std::to_string(expected_dim) + " values, found " + std::to_string(v.size()));
    }
    word = detail::lowercase(word);
    if (table.vectors.count(word)) {
      table.warnings.push_back(path.string() + ":" + std::to_string(i + 1) + ": duplicate word \"" + word +
                               "\", last occurrence wins");
    }
    table.insert(word, std::move(v));
  }
  return table;
}

inline void write_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  for (const auto& word : table.order) {
    out << word;
    for (double x : table.vectors.at(word)) out << ' ' << x;
    out << '\n';
  }
}

/// Per-label document counts over the training split.
inline std::vector<std::size_t> label_frequency(const Corpus& corpus) {
  std::vector<std::size_t> counts(corpus.num_labels, 0);
  for (std::size_t i : corpus.indices(SplitTag::train))
    for (LabelId l : corpus.labels[i]) ++counts[l];
  return counts;
}

struct HeadTailSplit {
  std::vector<LabelId> head_labels;  // descending frequency
  std::vector<LabelId> tail_labels;  // descending frequency
  std::vector<std::size_t> head_documents;  // D_head, ascending document index
  std::vector<std::size_t> tail_documents;  // D_tail, ascending document index
  std::vector<std::vector<std::size_t>> label_documents;  // training documents per label
  std::vector<std::size_t> frequency;
  std::vector<LabelId> zero_document_labels;  // forced into the tail

  std::size_t num_labels() const noexcept { return head_labels.size() + tail_labels.size(); }
  bool is_head(LabelId l) const {
    return std::find(head_labels.begin(), head_labels.end(), l) != head_labels.end();
  }
};

/// The `l_tail` least frequent training labels form the tail (frequency
/// ties go to the tail in ascending label order); the rest form the head.
/// Labels with no training documents always land in the tail.
inline HeadTailSplit split_head_tail(const Corpus& corpus, std::size_t l_tail) {
  const std::size_t l = corpus.num_labels;
  if (l_tail >= l) {
    throw std::invalid_argument("split_head_tail: l_tail=" + std::to_string(l_tail) + " must be < l=" +
                                std::to_string(l));
  }
  HeadTailSplit split;
  split.frequency = label_frequency(corpus);
  split.label_documents.assign(l, {});
  const auto train = corpus.indices(SplitTag::train);
  for (std::size_t i : train)
    for (LabelId lab : corpus.labels[i]) split.label_documents[lab].push_back(i);

  std::vector<LabelId> ascending(l);
  std::iota(ascending.begin(), ascending.end(), 0);
  std::stable_sort(ascending.begin(), ascending.end(),
                   [&](LabelId a, LabelId b) { return split.frequency[a] < split.frequency[b]; });
  for (LabelId lab : ascending)
    if (split.frequency[lab] == 0) split.zero_document_labels.push_back(lab);
  const std::size_t n_tail = std::max(l_tail, split.zero_document_labels.size());
  if (n_tail >= l) throw std::invalid_argument("split_head_tail: no label has training documents");

  std::vector<LabelId> tail(ascending.begin(), ascending.begin() + static_cast<std::ptrdiff_t>(n_tail));
  std::vector<LabelId> head(ascending.begin() + static_cast<std::ptrdiff_t>(n_tail), ascending.end());
  auto descending = [&](LabelId a, LabelId b) {
    if (split.frequency[a] != split.frequency[b]) return split.frequency[a] > split.frequency[b];
    return a < b;
  };
  std::sort(head.begin(), head.end(), descending);
  std::sort(tail.begin(), tail.end(), descending);
  split.head_labels = std::move(head);
  split.tail_labels = std::move(tail);

  std::vector<char> is_tail(l, 0);
  for (LabelId lab : split.tail_labels) is_tail[lab] = 1;
  for (std::size_t i : train) {
    bool any_head = false, any_tail = false;
    for (LabelId lab : corpus.labels[i]) (is_tail[lab] ? any_tail : any_head) = true;
    if (any_head) split.head_documents.push_back(i);
    if (any_tail) split.tail_documents.push_back(i);
  }
  return split;
}

/// Pearson correlation between label indicator columns over the training
/// split. Constant columns get an all-zero row and column.
inline Matrix label_cooccurrence(const Corpus& corpus) {
  const Matrix y = corpus.label_matrix(SplitTag::train);
  const std::size_t n = y.rows();
  const std::size_t l = y.cols();
  Matrix corr(l, l);
  if (n == 0) return corr;
  Vector mean(l, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < l; ++j) mean[j] += y(i, j);
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix centered(n, l);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < l; ++j) centered(i, j) = y(i, j) - mean[j];
  Matrix cov = matmul(transpose(centered), centered);
  for (std::size_t a = 0; a < l; ++a) {
    for (std::size_t b = 0; b < l; ++b) {
      const double denom = std::sqrt(cov(a, a) * cov(b, b));
      corr(a, b) = denom > 0.0 ? std::clamp(cov(a, b) / denom, -1.0, 1.0) : 0.0;
    }
    if (cov(a, a) > 0.0) corr(a, a) = 1.0;
  }
  return corr;
}

}  // namespace httn

#endif  // HTTN_CORPUS_HPP
