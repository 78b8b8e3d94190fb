#include "tag2cred/matrix.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <zlib.h>

#include "tag2cred/error.hpp"
#include "tag2cred/io.hpp"

namespace tag2cred {

namespace {

constexpr char kMagic[8] = {'T', '2', 'C', 'C', 'S', 'C', '0', '1'};

template <class T>
void put(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

template <class T>
T take(std::string_view& buf) {
  if (buf.size() < sizeof(T)) throw Error(Errc::ParseFailure, "truncated matrix file");
  T v;
  std::memcpy(&v, buf.data(), sizeof(T));
  buf.remove_prefix(sizeof(T));
  return v;
}

std::string gzip(std::string_view raw) {
  z_stream zs{};
  // Level 6, gzip wrapper, no timestamp in header (deflateInit2 leaves mtime 0).
  if (deflateInit2(&zs, 6, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(Errc::Io, "deflateInit2 failed");
  }
  std::string out(deflateBound(&zs, static_cast<uLong>(raw.size())) + 32, '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(raw.data()));
  zs.avail_in = static_cast<uInt>(raw.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(Errc::Io, "deflate failed");
  out.resize(zs.total_out);
  return out;
}

std::string gunzip(std::string_view comp) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw Error(Errc::Io, "inflateInit2 failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(comp.data()));
  zs.avail_in = static_cast<uInt>(comp.size());
  std::string out;
  char chunk[1 << 15];
  int rc;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(chunk);
    zs.avail_out = sizeof chunk;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error(Errc::ParseFailure, "corrupt gzip matrix file");
    }
    out.append(chunk, sizeof chunk - zs.avail_out);
  } while (rc != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

}  // namespace

void SparseMatrix::push_row(std::span<const std::uint32_t> c, std::span<const double> v) {
  if (c.size() != v.size()) throw Error(Errc::LengthMismatch, "row indices vs values");
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (c[k] >= cols) throw Error(Errc::DimensionMismatch, "column " + std::to_string(c[k]) + " >= " + std::to_string(cols));
    if (v[k] == 0.0) continue;
    indices.push_back(c[k]);
    values.push_back(v[k]);
  }
  indptr.push_back(indices.size());
  ++rows;
}

void SparseMatrix::push_dense_row(std::span<const double> dense) {
  if (dense.size() != cols) throw Error(Errc::DimensionMismatch, "dense row width");
  for (std::size_t j = 0; j < dense.size(); ++j) {
    if (dense[j] != 0.0) {
      indices.push_back(static_cast<std::uint32_t>(j));
      values.push_back(dense[j]);
    }
  }
  indptr.push_back(indices.size());
  ++rows;
}

double SparseMatrix::dot_row(std::size_t r, std::span<const double> w) const {
  double s = 0.0;
  for (std::size_t k = indptr[r]; k < indptr[r + 1]; ++k) s += values[k] * w[indices[k]];
  return s;
}

std::vector<double> SparseMatrix::dense_row(std::size_t r) const {
  std::vector<double> out(cols, 0.0);
  for (std::size_t k = indptr[r]; k < indptr[r + 1]; ++k) out[indices[k]] = values[k];
  return out;
}

SparseMatrix SparseMatrix::select_rows(std::span<const std::size_t> rows_idx) const {
  SparseMatrix out(cols);
  for (auto r : rows_idx) {
    if (r >= rows) throw Error(Errc::DimensionMismatch, "row " + std::to_string(r));
    out.indices.insert(out.indices.end(), indices.begin() + static_cast<std::ptrdiff_t>(indptr[r]),
                       indices.begin() + static_cast<std::ptrdiff_t>(indptr[r + 1]));
    out.values.insert(out.values.end(), values.begin() + static_cast<std::ptrdiff_t>(indptr[r]),
                      values.begin() + static_cast<std::ptrdiff_t>(indptr[r + 1]));
    out.indptr.push_back(out.indices.size());
    ++out.rows;
  }
  return out;
}

SparseMatrix SparseMatrix::select_cols(std::span<const std::uint32_t> keep) const {
  std::vector<std::int64_t> remap(cols, -1);
  for (std::size_t j = 0; j < keep.size(); ++j) {
    if (keep[j] >= cols) throw Error(Errc::DimensionMismatch, "column " + std::to_string(keep[j]));
    remap[keep[j]] = static_cast<std::int64_t>(j);
  }
  SparseMatrix out(keep.size());
  std::vector<std::pair<std::uint32_t, double>> row;
  for (std::size_t r = 0; r < rows; ++r) {
    row.clear();
    for (std::size_t k = indptr[r]; k < indptr[r + 1]; ++k) {
      if (remap[indices[k]] >= 0) row.emplace_back(static_cast<std::uint32_t>(remap[indices[k]]), values[k]);
    }
    std::sort(row.begin(), row.end());
    for (const auto& [c, v] : row) {
      out.indices.push_back(c);
      out.values.push_back(v);
    }
    out.indptr.push_back(out.indices.size());
    ++out.rows;
  }
  return out;
}

SparseMatrix SparseMatrix::hstack(std::span<const SparseMatrix* const> parts) {
  if (parts.empty()) return SparseMatrix{};
  const std::size_t n = parts.front()->rows;
  std::size_t total = 0;
  for (const auto* p : parts) {
    if (p->rows != n) throw Error(Errc::DimensionMismatch, "hstack row counts differ");
    total += p->cols;
  }
  SparseMatrix out(total);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t offset = 0;
    for (const auto* p : parts) {
      for (std::size_t k = p->indptr[r]; k < p->indptr[r + 1]; ++k) {
        out.indices.push_back(static_cast<std::uint32_t>(p->indices[k] + offset));
        out.values.push_back(p->values[k]);
      }
      offset += p->cols;
    }
    out.indptr.push_back(out.indices.size());
    ++out.rows;
  }
  return out;
}

void write_matrix(const std::string& path, const SparseMatrix& m, std::span<const std::string> ids) {
  if (ids.size() != m.rows) throw Error(Errc::LengthMismatch, "ids vs matrix rows");
  // Transpose to column-major.
  std::vector<std::uint64_t> colptr(m.cols + 1, 0);
  for (auto c : m.indices) ++colptr[c + 1];
  std::partial_sum(colptr.begin(), colptr.end(), colptr.begin());
  std::vector<std::uint32_t> rowidx(m.nnz());
  std::vector<double> vals(m.nnz());
  std::vector<std::uint64_t> fill(colptr.begin(), colptr.end() - 1);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t k = m.indptr[r]; k < m.indptr[r + 1]; ++k) {
      const auto dst = fill[m.indices[k]]++;
      rowidx[dst] = static_cast<std::uint32_t>(r);
      vals[dst] = m.values[k];
    }
  }
  std::string raw(kMagic, sizeof kMagic);
  put<std::uint64_t>(raw, m.rows);
  put<std::uint64_t>(raw, m.cols);
  put<std::uint64_t>(raw, m.nnz());
  for (auto v : colptr) put(raw, v);
  for (auto v : rowidx) put(raw, v);
  for (auto v : vals) put(raw, v);
  io::write_file(path, gzip(raw));
  std::string sidecar;
  for (const auto& id : ids) {
    sidecar += id;
    sidecar += '\n';
  }
  io::write_file(path + ".ids", sidecar);
}

LoadedMatrix read_matrix(const std::string& path) {
  if (!io::file_exists(path)) throw Error(Errc::MissingInput, "matrix file not found: " + path);
  const std::string raw = gunzip(io::read_file(path));
  std::string_view buf(raw);
  if (buf.size() < sizeof kMagic || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    throw Error(Errc::SchemaVersionMismatch, path + ": not a tag2cred matrix (v01) file");
  }
  buf.remove_prefix(sizeof kMagic);
  const auto rows = take<std::uint64_t>(buf);
  const auto cols = take<std::uint64_t>(buf);
  const auto nnz = take<std::uint64_t>(buf);
  std::vector<std::uint64_t> colptr(cols + 1);
  for (auto& v : colptr) v = take<std::uint64_t>(buf);
  std::vector<std::uint32_t> rowidx(nnz);
  for (auto& v : rowidx) v = take<std::uint32_t>(buf);
  std::vector<double> vals(nnz);
  for (auto& v : vals) v = take<double>(buf);

  // Back to row-major.
  LoadedMatrix out;
  SparseMatrix& m = out.matrix;
  m.cols = cols;
  m.rows = rows;
  m.indptr.assign(rows + 1, 0);
  for (auto r : rowidx) ++m.indptr[r + 1];
  std::partial_sum(m.indptr.begin(), m.indptr.end(), m.indptr.begin());
  m.indices.resize(nnz);
  m.values.resize(nnz);
  std::vector<std::size_t> fill(m.indptr.begin(), m.indptr.end() - 1);
  for (std::size_t c = 0; c < cols; ++c) {
    for (auto k = colptr[c]; k < colptr[c + 1]; ++k) {
      const auto dst = fill[rowidx[k]]++;
      m.indices[dst] = static_cast<std::uint32_t>(c);
      m.values[dst] = vals[k];
    }
  }
  for (auto& line : io::split_lines(io::read_file(path + ".ids"))) {
    if (!line.empty()) out.ids.push_back(std::move(line));
  }
  if (out.ids.size() != rows) throw Error(Errc::ParseFailure, path + ".ids: row count mismatch");
  return out;
}

}  // namespace tag2cred
