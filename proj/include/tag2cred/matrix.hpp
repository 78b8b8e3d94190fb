#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tag2cred {

/// Compressed sparse row matrix of doubles.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> indptr{0};
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  explicit SparseMatrix(std::size_t ncols = 0) : cols(ncols) {}

  /// Appends a row given (column, value) pairs; columns must be < cols.
  void push_row(std::span<const std::uint32_t> cols_idx, std::span<const double> vals);
  void push_dense_row(std::span<const double> dense);

  std::span<const std::uint32_t> row_indices(std::size_t r) const {
    return {indices.data() + indptr[r], indptr[r + 1] - indptr[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values.data() + indptr[r], indptr[r + 1] - indptr[r]};
  }
  double dot_row(std::size_t r, std::span<const double> w) const;
  std::vector<double> dense_row(std::size_t r) const;
  std::size_t nnz() const { return values.size(); }

  SparseMatrix select_rows(std::span<const std::size_t> rows_idx) const;
  /// Keeps the given columns, renumbered in the order given.
  SparseMatrix select_cols(std::span<const std::uint32_t> keep) const;
  /// Column-wise concatenation of matrices with equal row counts.
  static SparseMatrix hstack(std::span<const SparseMatrix* const> parts);

  bool operator==(const SparseMatrix&) const = default;
};

/// gzip-compressed column-sparse file plus "<path>.ids" with one row id per line.
void write_matrix(const std::string& path, const SparseMatrix& m, std::span<const std::string> ids);
struct LoadedMatrix {
  SparseMatrix matrix;
  std::vector<std::string> ids;
};
LoadedMatrix read_matrix(const std::string& path);

}  // namespace tag2cred
