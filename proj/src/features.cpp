#include "tag2cred/features.hpp"

#include <algorithm>
#include <cmath>

#include "tag2cred/error.hpp"
#include "tag2cred/hash.hpp"
#include "tag2cred/io.hpp"
#include "tag2cred/unicode.hpp"

namespace tag2cred::features {

using codebook::Field;

std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::TagMultihot: return "tag_multihot";
    case Kind::Tfidf: return "tfidf";
    case Kind::Embedding: return "embedding";
    case Kind::Stacked: return "stacked";
  }
  return "";
}

TagIndex::TagIndex(std::vector<TagColumn> columns) : columns_(std::move(columns)) {}

int TagIndex::column(Field f, int label) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].field == f && columns_[j].label == label) return static_cast<int>(j);
  }
  return -1;
}

std::string TagIndex::column_name(std::size_t j) const {
  const auto& c = columns_.at(j);
  return std::string(codebook::field_name(c.field)) + "=" +
         std::string(codebook::labels(c.field)[static_cast<std::size_t>(c.label)]);
}

std::string TagIndex::fingerprint() const {
  std::string s;
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    s += column_name(j);
    s += '\n';
  }
  return sha256_hex(s);
}

TagIndex TagIndex::restrict(std::span<const Field> fields) const {
  if (fields.empty()) throw Error(Errc::EmptySubset, "no fields selected");
  std::vector<TagColumn> keep;
  for (const auto& c : columns_) {
    if (std::find(fields.begin(), fields.end(), c.field) != fields.end()) keep.push_back(c);
  }
  return TagIndex(std::move(keep));
}

std::vector<std::uint32_t> TagIndex::columns_in(std::span<const Field> fields) const {
  if (fields.empty()) throw Error(Errc::EmptySubset, "no fields selected");
  std::vector<std::uint32_t> out;
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (std::find(fields.begin(), fields.end(), columns_[j].field) != fields.end()) {
      out.push_back(static_cast<std::uint32_t>(j));
    }
  }
  return out;
}

TagIndex fit_tag_index(TrainOnly<codebook::TagAssignment> train, bool seen_only) {
  if (train.size() == 0) throw Error(Errc::EmptyTraining, "tag index needs at least one training assignment");
  std::vector<TagColumn> cols;
  for (Field f : codebook::kAllFields) {
    const auto n = static_cast<int>(codebook::labels(f).size());
    for (int l = 0; l < n; ++l) {
      if (seen_only) {
        const bool seen = std::any_of(train.rows().begin(), train.rows().end(),
                                      [&](const codebook::TagAssignment& a) { return a.has(f, l); });
        if (!seen) continue;
      }
      cols.push_back({f, l});
    }
  }
  return TagIndex(std::move(cols));
}

std::vector<double> tag_vector(const codebook::TagAssignment& a, const TagIndex& index, std::size_t* ignored) {
  std::vector<double> row(index.size(), 0.0);
  std::size_t miss = 0;
  for (Field f : codebook::kAllFields) {
    for (int l : a[f]) {
      const int j = index.column(f, l);
      if (j < 0) {
        ++miss;
        continue;
      }
      row[static_cast<std::size_t>(j)] = 1.0;
    }
  }
  if (ignored) *ignored = miss;
  return row;
}

SparseMatrix tag_matrix(std::span<const codebook::TagAssignment> rows, const TagIndex& index) {
  SparseMatrix m(index.size());
  for (const auto& a : rows) m.push_dense_row(tag_vector(a, index));
  return m;
}

codebook::TagAssignment select_fields(const codebook::TagAssignment& a, std::span<const Field> fields) {
  if (fields.empty()) throw Error(Errc::EmptySubset, "no fields selected");
  codebook::TagAssignment out;
  for (Field f : fields) out[f] = a[f];
  return out;
}

std::vector<Field> parse_field_subset(std::string_view name) {
  if (name == "all") return {Field::Theme, Field::Claim, Field::Cta, Field::Evidence};
  if (name == "theme" || name == "theme_only") return {Field::Theme};
  if (name == "style" || name == "style_only") return {Field::Claim, Field::Cta, Field::Evidence};
  if (name == "cta" || name == "cta_only") return {Field::Cta};
  if (name == "no_cta" || name == "all_minus_cta") return {Field::Theme, Field::Claim, Field::Evidence};
  std::vector<Field> out;
  std::size_t start = 0;
  while (start <= name.size()) {
    auto end = name.find('+', start);
    if (end == std::string_view::npos) end = name.size();
    const auto piece = name.substr(start, end - start);
    if (!piece.empty()) {
      const auto f = codebook::parse_field(piece);
      if (!f) throw Error(Errc::ConfigInvalid, "unknown field \"" + std::string(piece) + "\" in subset " + std::string(name));
      if (std::find(out.begin(), out.end(), *f) == out.end()) out.push_back(*f);
    }
    start = end + 1;
  }
  if (out.empty()) throw Error(Errc::EmptySubset, "subset \"" + std::string(name) + "\" selects no fields");
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> tokenize(std::string_view text, std::size_t min_len) {
  std::vector<std::string> out;
  std::string cur;
  std::size_t cur_len = 0;
  auto flush = [&] {
    if (cur_len >= min_len && cur_len > 0) out.push_back(unicode::to_lower(cur));
    cur.clear();
    cur_len = 0;
  };
  for (char32_t cp : unicode::decode(text)) {
    if (unicode::is_alnum(cp)) {
      unicode::append_utf8(cur, cp);
      ++cur_len;
    } else {
      flush();
    }
  }
  flush();
  return out;
}

std::vector<std::string> TfidfModel::ngrams(const urlkit::MaskedText& text) const {
  const auto toks = tokenize(text.text(), config_.min_token_len);
  std::vector<std::string> out = toks;
  for (std::size_t n = 2; n <= config_.max_ngram; ++n) {
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
      std::string g = toks[i];
      for (std::size_t k = 1; k < n; ++k) {
        g += ' ';
        g += toks[i + k];
      }
      out.push_back(std::move(g));
    }
  }
  return out;
}

TfidfModel TfidfModel::fit(TrainOnly<urlkit::MaskedText> train, const TfidfConfig& config) {
  if (train.size() == 0) throw Error(Errc::EmptyTraining, "TF-IDF needs at least one training document");
  TfidfModel m;
  m.config_ = config;
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : train.rows()) {
    auto g = m.ngrams(doc);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    for (auto& t : g) ++df[t];
  }
  std::vector<std::pair<std::string, std::size_t>> terms(df.begin(), df.end());
  // Highest df first; ties lexicographic, so the cap is deterministic.
  std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (terms.size() > config.max_features) terms.resize(config.max_features);
  std::sort(terms.begin(), terms.end());
  const double n = static_cast<double>(train.size());
  for (auto& [t, d] : terms) {
    m.lookup_.emplace(t, static_cast<std::uint32_t>(m.terms_.size()));
    m.terms_.push_back(t);
    m.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(d))) + 1.0);
  }
  return m;
}

std::vector<std::pair<std::uint32_t, double>> TfidfModel::transform_one(const urlkit::MaskedText& text) const {
  std::map<std::uint32_t, double> tf;
  for (const auto& g : ngrams(text)) {
    if (const auto it = lookup_.find(g); it != lookup_.end()) tf[it->second] += 1.0;
  }
  std::vector<std::pair<std::uint32_t, double>> row;
  double norm = 0.0;
  for (const auto& [j, c] : tf) {
    const double w = c * idf_[j];
    row.emplace_back(j, w);
    norm += w * w;
  }
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (auto& e : row) e.second /= norm;
  }
  return row;
}

SparseMatrix TfidfModel::transform(std::span<const urlkit::MaskedText> texts) const {
  SparseMatrix m(terms_.size());
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  for (const auto& t : texts) {
    idx.clear();
    val.clear();
    for (const auto& [j, w] : transform_one(t)) {
      idx.push_back(j);
      val.push_back(w);
    }
    m.push_row(idx, val);
  }
  return m;
}

std::string TfidfModel::fingerprint() const {
  std::string s = "tfidf:" + std::to_string(config_.min_token_len) + ":" + std::to_string(config_.max_ngram) + "\n";
  for (std::size_t j = 0; j < terms_.size(); ++j) {
    s += terms_[j];
    s += '\t';
    s += io::fmt_double(idf_[j]);
    s += '\n';
  }
  return sha256_hex(s);
}

nlohmann::json TfidfModel::to_json() const {
  return {{"min_token_len", config_.min_token_len},
          {"max_ngram", config_.max_ngram},
          {"max_features", config_.max_features},
          {"terms", terms_},
          {"idf", idf_}};
}

TfidfModel TfidfModel::from_json(const nlohmann::json& j) {
  TfidfModel m;
  try {
    m.config_.min_token_len = j.at("min_token_len").get<std::size_t>();
    m.config_.max_ngram = j.at("max_ngram").get<std::size_t>();
    m.config_.max_features = j.at("max_features").get<std::size_t>();
    m.terms_ = j.at("terms").get<std::vector<std::string>>();
    m.idf_ = j.at("idf").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseFailure, std::string("tfidf model: ") + e.what());
  }
  if (m.terms_.size() != m.idf_.size()) throw Error(Errc::ParseFailure, "tfidf terms vs idf length");
  for (std::size_t k = 0; k < m.terms_.size(); ++k) m.lookup_.emplace(m.terms_[k], static_cast<std::uint32_t>(k));
  return m;
}

EmbeddingTable parse_embeddings(std::string_view csv) {
  const auto rows = io::parse_csv(csv);
  if (rows.empty() || rows[0].size() != 2 || rows[0][0] != "dim") {
    throw Error(Errc::ParseFailure, "embedding file must start with \"dim,<d>\"");
  }
  EmbeddingTable t;
  try {
    t.dim = static_cast<std::size_t>(std::stoul(rows[0][1]));
  } catch (const std::exception&) {
    throw Error(Errc::ParseFailure, "bad embedding dimension \"" + rows[0][1] + "\"");
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != t.dim + 1) {
      throw Error(Errc::DimensionMismatch, "row " + std::to_string(r + 1) + " (" + (row.empty() ? "" : row[0]) +
                                               ") has " + std::to_string(row.empty() ? 0 : row.size() - 1) +
                                               " values, header says " + std::to_string(t.dim));
    }
    std::vector<double> v(t.dim);
    for (std::size_t k = 0; k < t.dim; ++k) {
      try {
        std::size_t used = 0;
        v[k] = std::stod(row[k + 1], &used);
        if (used != row[k + 1].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw Error(Errc::ParseFailure, "row " + std::to_string(r + 1) + ": bad number \"" + row[k + 1] + "\"");
      }
      if (!std::isfinite(v[k])) throw Error(Errc::NonFinite, "embedding " + row[0]);
    }
    t.vectors[row[0]] = std::move(v);
  }
  return t;
}

EmbeddingTable load_embeddings(const std::string& path) {
  if (!io::file_exists(path)) throw Error(Errc::MissingInput, "embedding file not found: " + path);
  return parse_embeddings(io::read_file(path));
}

void write_embeddings(const std::string& path, const EmbeddingTable& table, std::span<const std::string> order) {
  std::string out = "dim," + std::to_string(table.dim) + "\n";
  for (const auto& id : order) {
    const auto& v = table.vectors.at(id);
    out += io::csv_escape(id);
    for (double x : v) {
      out += ',';
      out += io::fmt_double(x);
    }
    out += '\n';
  }
  io::write_file(path, out);
}

std::vector<std::vector<double>> gather_embeddings(const EmbeddingTable& table, std::span<const std::string> ids) {
  std::vector<std::vector<double>> out;
  out.reserve(ids.size());
  std::vector<std::string> missing;
  for (const auto& id : ids) {
    const auto it = table.vectors.find(id);
    if (it == table.vectors.end()) {
      missing.push_back(id);
      continue;
    }
    out.push_back(it->second);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t k = 0; k < missing.size() && k < 20; ++k) list += (k ? "," : "") + missing[k];
    if (missing.size() > 20) list += ",...";
    throw Error(Errc::MissingIds, std::to_string(missing.size()) + " ids without embeddings: " + list);
  }
  return out;
}

Standardizer Standardizer::fit(TrainOnly<std::vector<double>> train) {
  if (train.size() == 0) throw Error(Errc::EmptyTraining, "standardizer needs training rows");
  const std::size_t d = train.rows().front().size();
  Standardizer s;
  s.mean_.assign(d, 0.0);
  s.std_.assign(d, 0.0);
  for (const auto& r : train.rows()) {
    if (r.size() != d) throw Error(Errc::DimensionMismatch, "ragged training rows");
    for (std::size_t j = 0; j < d; ++j) s.mean_[j] += r[j];
  }
  const double n = static_cast<double>(train.size());
  for (auto& m : s.mean_) m /= n;
  for (const auto& r : train.rows()) {
    for (std::size_t j = 0; j < d; ++j) s.std_[j] += (r[j] - s.mean_[j]) * (r[j] - s.mean_[j]);
  }
  for (auto& v : s.std_) v = std::max(std::sqrt(v / n), kStdFloor);
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
  if (row.size() != mean_.size()) throw Error(Errc::DimensionMismatch, "row width vs standardizer");
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean_[j]) / std_[j];
  return out;
}

SparseMatrix Standardizer::transform(std::span<const std::vector<double>> rows) const {
  SparseMatrix m(mean_.size());
  for (const auto& r : rows) m.push_dense_row(apply(r));
  return m;
}

nlohmann::json Standardizer::to_json() const { return {{"mean", mean_}, {"std", std_}}; }

Standardizer Standardizer::from_json(const nlohmann::json& j) {
  Standardizer s;
  try {
    s.mean_ = j.at("mean").get<std::vector<double>>();
    s.std_ = j.at("std").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseFailure, std::string("standardizer: ") + e.what());
  }
  if (s.mean_.size() != s.std_.size()) throw Error(Errc::ParseFailure, "standardizer mean vs std length");
  return s;
}

std::vector<double> flip_noise(std::span<const double> row, double q, Rng& rng) {
  std::vector<double> out(row.begin(), row.end());
  if (q <= 0.0) return out;
  for (auto& v : out) {
    if (rng.uniform() < q) v = v != 0.0 ? 0.0 : 1.0;
  }
  return out;
}

SparseMatrix flip_noise(const SparseMatrix& m, double q, Rng& rng) {
  if (q <= 0.0) return m;
  SparseMatrix out(m.cols);
  for (std::size_t r = 0; r < m.rows; ++r) out.push_dense_row(flip_noise(m.dense_row(r), q, rng));
  return out;
}

}  // namespace tag2cred::features
