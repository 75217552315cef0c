#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace repoclass {

/// Dense word vectors keyed by token, rows in lexicographic token order so
/// index order doubles as the lexicographic tie-break.
class WordSpace {
 public:
  WordSpace() = default;
  WordSpace(std::size_t dimension,
            std::vector<std::pair<std::string, std::vector<double>>> rows);

  std::size_t size() const { return tokens_.size(); }
  std::size_t dimension() const { return dim_; }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::span<const double> row(std::size_t i) const {
    return std::span(data_).subspan(i * dim_, dim_);
  }
  std::optional<std::size_t> find(std::string_view token) const;

  /// Subset restricted to tokens accepted by `keep`.
  template <class Pred>
  WordSpace filter(Pred keep) const {
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    for (std::size_t i = 0; i < size(); ++i) {
      if (keep(tokens_[i])) rows.emplace_back(tokens_[i], std::vector<double>(row(i).begin(), row(i).end()));
    }
    return WordSpace(dim_, std::move(rows));
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> tokens_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace repoclass
