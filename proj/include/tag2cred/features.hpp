#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tag2cred/codebook.hpp"
#include "tag2cred/matrix.hpp"
#include "tag2cred/rng.hpp"
#include "tag2cred/urlkit.hpp"

namespace tag2cred::features {

/// Rows that belong to the training split. Fitting functions take only this
/// wrapper, so validation and test rows cannot be passed by accident.
template <class T>
class TrainOnly {
 public:
  explicit TrainOnly(std::span<const T> rows) : rows_(rows) {}
  std::span<const T> rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

 private:
  std::span<const T> rows_;
};

enum class Kind { TagMultihot, Tfidf, Embedding, Stacked };
std::string_view to_string(Kind k);

struct TagColumn {
  codebook::Field field;
  int label;
  bool operator==(const TagColumn&) const = default;
};

class TagIndex {
 public:
  TagIndex() = default;
  explicit TagIndex(std::vector<TagColumn> columns);

  std::size_t size() const { return columns_.size(); }
  const std::vector<TagColumn>& columns() const { return columns_; }
  /// -1 when the (field, label) pair is not indexed.
  int column(codebook::Field f, int label) const;
  std::string column_name(std::size_t j) const;  // "cta=Buy / invest / donate"
  /// SHA-256 over the ordered column names.
  std::string fingerprint() const;

  /// Restricts to the given fields, keeping canonical order. Throws EmptySubset.
  TagIndex restrict(std::span<const codebook::Field> fields) const;
  /// Indices of this index's columns that survive `restrict(fields)`.
  std::vector<std::uint32_t> columns_in(std::span<const codebook::Field> fields) const;

 private:
  std::vector<TagColumn> columns_;
};

/// Full vocabulary by default; `seen_only` keeps just the labels used in training.
/// Throws Error(EmptyTraining).
TagIndex fit_tag_index(TrainOnly<codebook::TagAssignment> train, bool seen_only = false);

/// Binary row over the index. Labels outside it are counted in `ignored`.
std::vector<double> tag_vector(const codebook::TagAssignment& a, const TagIndex& index, std::size_t* ignored = nullptr);
SparseMatrix tag_matrix(std::span<const codebook::TagAssignment> rows, const TagIndex& index);

/// Clears fields outside the subset. Throws Error(EmptySubset).
codebook::TagAssignment select_fields(const codebook::TagAssignment& a, std::span<const codebook::Field> fields);
/// Named subsets: all, theme, style (claim+cta+evidence), cta, no_cta, or a
/// '+'-separated field list such as "claim+cta".
std::vector<codebook::Field> parse_field_subset(std::string_view name);

struct TfidfConfig {
  std::size_t min_token_len = 2;
  std::size_t max_ngram = 2;
  std::size_t max_features = 50000;
};

/// Lowercase runs of letters/digits of at least min_token_len code points.
std::vector<std::string> tokenize(std::string_view text, std::size_t min_token_len = 2);

class TfidfModel {
 public:
  TfidfModel() = default;
  /// Throws Error(EmptyTraining).
  static TfidfModel fit(TrainOnly<urlkit::MaskedText> train, const TfidfConfig& config = {});

  SparseMatrix transform(std::span<const urlkit::MaskedText> texts) const;
  std::vector<std::pair<std::uint32_t, double>> transform_one(const urlkit::MaskedText& text) const;

  std::size_t size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<double>& idf() const { return idf_; }
  const TfidfConfig& config() const { return config_; }
  std::string fingerprint() const;

  nlohmann::json to_json() const;
  static TfidfModel from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> ngrams(const urlkit::MaskedText& text) const;
  TfidfConfig config_;
  std::vector<std::string> terms_;  // lexicographic
  std::vector<double> idf_;
  std::unordered_map<std::string, std::uint32_t> lookup_;
};

struct EmbeddingTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;
};

/// CSV: header "dim,<d>", then "id,v1,...,vd" rows. Throws
/// Error(MissingInput | DimensionMismatch | ParseFailure).
EmbeddingTable parse_embeddings(std::string_view csv);
EmbeddingTable load_embeddings(const std::string& path);
void write_embeddings(const std::string& path, const EmbeddingTable& table, std::span<const std::string> order);

/// Rows in `ids` order. Throws Error(MissingIds) naming the missing ids.
std::vector<std::vector<double>> gather_embeddings(const EmbeddingTable& table, std::span<const std::string> ids);

class Standardizer {
 public:
  static constexpr double kStdFloor = 1e-8;
  Standardizer() = default;
  /// Population mean and standard deviation per column.
  static Standardizer fit(TrainOnly<std::vector<double>> train);
  std::vector<double> apply(std::span<const double> row) const;
  SparseMatrix transform(std::span<const std::vector<double>> rows) const;

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return std_; }
  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);

 private:
  std::vector<double> mean_;
  std::vector<double> std_;
};

/// Flips each binary entry independently with probability q.
std::vector<double> flip_noise(std::span<const double> row, double q, Rng& rng);
/// Applies flip_noise to every row of a binary matrix (dense over its columns).
SparseMatrix flip_noise(const SparseMatrix& m, double q, Rng& rng);

}  // namespace tag2cred::features
