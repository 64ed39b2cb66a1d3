#ifndef HTTN_TESTS_SUPPORT_HPP
#define HTTN_TESTS_SUPPORT_HPP

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "httn/corpus.hpp"
#include "httn/matrix.hpp"

namespace httn::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (double& x : m.data()) x = n(rng);
  return m;
}

inline Vector random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vector v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("httn_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Corpus with one single-token training document per entry of `labels`;
// document i uses word "w<i>".
inline Corpus tiny_corpus(std::size_t l, const std::vector<std::vector<LabelId>>& labels) {
  Corpus c;
  c.num_labels = l;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Document d;
    d.id = i;
    d.tokens = {c.vocabulary.intern("w" + std::to_string(i))};
    c.documents.push_back(d);
    std::vector<LabelId> y = labels[i];
    std::sort(y.begin(), y.end());
    c.labels.push_back(y);
  }
  return c;
}

}  // namespace httn::test

#endif
