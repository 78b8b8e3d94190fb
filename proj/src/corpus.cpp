#include "tag2cred/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>
#include <unordered_set>

#include "tag2cred/error.hpp"
#include "tag2cred/hash.hpp"
#include "tag2cred/io.hpp"
#include "tag2cred/timeutil.hpp"
#include "tag2cred/unicode.hpp"
#include "tag2cred/urlkit.hpp"

namespace tag2cred::corpus {

namespace {

constexpr std::uint64_t kShingleSalt = 0x5348494e474c4533ULL;
constexpr std::uint64_t kGramSalt = 0x43484152353a3a31ULL;

std::string required_string(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) throw Error(Errc::MissingField, key);
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw Error(Errc::ParseFailure, std::string(key) + " must be a string");
}

std::uint64_t shingle_hash(std::span<const std::string_view> toks, std::size_t at) {
  std::uint64_t h = kShingleSalt;
  for (std::size_t k = 0; k < kShingleSize; ++k) h = hash_combine(h, hash64(toks[at + k]));
  return h;
}

std::uint64_t hash_sorted(std::span<const std::uint64_t> v, std::uint64_t salt) {
  std::uint64_t h = salt;
  for (auto x : v) h = hash_combine(h, x);
  return hash_combine(h, v.size());
}

std::uint64_t simhash_of(std::string_view canonical, std::uint64_t seed) {
  const auto cps = unicode::decode(canonical);
  std::array<int, 64> acc{};
  auto feed = [&](std::size_t begin, std::size_t len) {
    std::string gram;
    for (std::size_t k = begin; k < begin + len; ++k) unicode::append_utf8(gram, cps[k]);
    const std::uint64_t h = hash64(gram, seed ^ kGramSalt);
    for (int b = 0; b < 64; ++b) acc[static_cast<std::size_t>(b)] += (h >> b) & 1U ? 1 : -1;
  };
  if (cps.size() < kCharGram) {
    if (!cps.empty()) feed(0, cps.size());
  } else {
    for (std::size_t i = 0; i + kCharGram <= cps.size(); ++i) feed(i, kCharGram);
  }
  std::uint64_t sig = 0;
  for (int b = 0; b < 64; ++b) {
    if (acc[static_cast<std::size_t>(b)] > 0) sig |= std::uint64_t{1} << b;
  }
  return sig;
}

Fingerprints exact_part(std::string_view canonical, std::span<const std::string_view> toks) {
  Fingerprints fp;
  fp.canon_hash = hash64(canonical);
  std::vector<std::uint64_t> ts;
  ts.reserve(toks.size());
  for (auto t : toks) ts.push_back(hash64(t));
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  fp.tokenset_hash = hash_sorted(ts, 0x544f4b454e534554ULL);
  return fp;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  // `rank` gives scan order; the earliest root wins.
  bool unite(std::size_t a, std::size_t b, const std::vector<std::size_t>& rank) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank[b] < rank[a]) std::swap(a, b);
    parent[b] = a;
    return true;
  }
};

}  // namespace

RawMessage message_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::ParseFailure, "message is not an object");
  RawMessage m;
  m.id = required_string(j, "id");
  m.channel_id = required_string(j, "channel_id");
  const auto ts = j.find("timestamp");
  if (ts == j.end() || ts->is_null()) throw Error(Errc::MissingField, "timestamp");
  if (ts->is_number()) {
    const double v = ts->get<double>();
    if (!std::isfinite(v) || v < 0) throw Error(Errc::ParseFailure, m.id + ": negative timestamp");
    m.timestamp = static_cast<std::int64_t>(std::floor(v));
  } else if (ts->is_string()) {
    const auto parsed = parse_timestamp(ts->get<std::string>());
    if (!parsed) throw Error(Errc::ParseFailure, m.id + ": bad timestamp \"" + ts->get<std::string>() + "\"");
    m.timestamp = *parsed;
  } else {
    throw Error(Errc::ParseFailure, m.id + ": timestamp must be a number or string");
  }
  if (m.timestamp < 0) throw Error(Errc::ParseFailure, m.id + ": negative timestamp");
  if (const auto t = j.find("text"); t != j.end() && t->is_string()) m.text = t->get<std::string>();
  if (const auto f = j.find("fwd_id"); f != j.end() && !f->is_null()) {
    m.fwd_id = f->is_string() ? f->get<std::string>() : f->dump();
    if (m.fwd_id->empty()) m.fwd_id.reset();
  }
  return m;
}

nlohmann::json to_json(const RawMessage& m) {
  nlohmann::json j{{"id", m.id}, {"channel_id", m.channel_id}, {"timestamp", m.timestamp}, {"text", m.text}};
  if (m.fwd_id) j["fwd_id"] = *m.fwd_id;
  return j;
}

std::vector<RawMessage> load_messages(const std::string& path) {
  if (!io::file_exists(path)) throw Error(Errc::MissingInput, "messages file not found: " + path);
  std::vector<RawMessage> out;
  std::unordered_set<std::string> seen;
  io::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    try {
      out.push_back(message_from_json(j));
    } catch (const Error& e) {
      throw Error(e.code(), path + ":" + std::to_string(line) + ": " + e.what());
    }
    if (!seen.insert(out.back().id).second) {
      throw Error(Errc::ParseFailure, path + ":" + std::to_string(line) + ": duplicate id " + out.back().id);
    }
  });
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string stripped;
  stripped.reserve(text.size());
  for (char32_t cp : unicode::decode(text)) {
    if (!unicode::is_control_or_format(cp)) unicode::append_utf8(stripped, cp);
  }
  // NFKC after lowercasing again: some lowercase mappings leave NFKC.
  const std::string folded = unicode::nfkc(unicode::to_lower(unicode::nfkc(stripped)));
  std::string out;
  out.reserve(folded.size());
  bool pending_space = false;
  for (char32_t cp : unicode::decode(folded)) {
    if (unicode::is_space(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (unicode::is_control_or_format(cp)) continue;
    if (pending_space) out.push_back(' ');
    pending_space = false;
    unicode::append_utf8(out, cp);
  }
  return out;
}

std::vector<std::string_view> split_tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

bool is_low_information(std::string_view canonical, std::size_t min_tokens) {
  const auto masked = urlkit::mask_urls(canonical);
  std::size_t n = 0;
  for (auto tok : split_tokens(masked.text())) {
    if (tok == urlkit::kUrlToken) continue;
    const auto cps = unicode::decode(tok);
    if (std::any_of(cps.begin(), cps.end(), unicode::is_alnum)) ++n;
  }
  return n < min_tokens;
}

std::vector<std::uint64_t> shingle_set(std::string_view canonical) {
  const auto toks = split_tokens(canonical);
  std::vector<std::uint64_t> out;
  if (toks.size() < kShingleSize) return out;
  for (std::size_t i = 0; i + kShingleSize <= toks.size(); ++i) out.push_back(shingle_hash(toks, i));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Fingerprints compute_fingerprints(std::string_view canonical, std::size_t permutations, std::uint64_t seed) {
  const auto toks = split_tokens(canonical);
  if (toks.size() < kShingleSize) {
    throw Error(Errc::TooShort, std::to_string(toks.size()) + " tokens, need " + std::to_string(kShingleSize));
  }
  Fingerprints fp = exact_part(canonical, toks);
  const auto shingles = shingle_set(canonical);
  fp.shingle3_hash = hash_sorted(shingles, 0x5348494e474c4553ULL);
  fp.minhash_sig.assign(permutations, ~std::uint64_t{0});
  for (std::size_t p = 0; p < permutations; ++p) {
    const std::uint64_t key = mix64(hash_combine(seed, p));
    std::uint64_t m = ~std::uint64_t{0};
    for (auto x : shingles) m = std::min(m, mix64(x ^ key));
    fp.minhash_sig[p] = m;
  }
  fp.simhash = simhash_of(canonical, seed);
  return fp;
}

Fingerprints fingerprints_or_exact(std::string_view canonical, std::size_t permutations, std::uint64_t seed) {
  const auto toks = split_tokens(canonical);
  if (toks.size() >= kShingleSize) return compute_fingerprints(canonical, permutations, seed);
  Fingerprints fp = exact_part(canonical, toks);
  fp.exact_only = true;
  return fp;
}

double estimate_jaccard(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.empty()) return 0.0;
  std::size_t eq = 0;
  for (std::size_t i = 0; i < a.size(); ++i) eq += a[i] == b[i];
  return static_cast<double>(eq) / static_cast<double>(a.size());
}

int hamming(std::uint64_t a, std::uint64_t b) { return std::popcount(a ^ b); }

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::DimensionMismatch, "cosine of unequal vectors");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

std::string_view to_string(MergeReason r) {
  switch (r) {
    case MergeReason::Exact: return "exact";
    case MergeReason::MinHash: return "minhash";
    case MergeReason::SimHash: return "simhash";
    case MergeReason::Cosine: return "cosine";
  }
  return "";
}

ClusterResult cluster_near_duplicates(std::span<const ClusterView> msgs, std::span<const Fingerprints> fps,
                                      const EmbeddingMap* embeddings, const DedupThresholds& t) {
  const std::size_t n = msgs.size();
  if (fps.size() != n) throw Error(Errc::LengthMismatch, "fingerprints vs messages");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(msgs[a].timestamp, msgs[a].id) < std::tie(msgs[b].timestamp, msgs[b].id);
  });
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;

  UnionFind uf(n);
  ClusterResult res;

  // Exact keys.
  {
    std::array<std::unordered_map<std::uint64_t, std::size_t>, 3> first;
    for (std::size_t i : order) {
      const auto& f = fps[i];
      const std::array<std::uint64_t, 3> keys{f.canon_hash, f.tokenset_hash, f.shingle3_hash};
      for (std::size_t k = 0; k < 3; ++k) {
        if (k == 2 && f.exact_only) continue;
        auto [it, fresh] = first[k].emplace(keys[k], i);
        if (!fresh && uf.unite(it->second, i, rank)) res.edges.push_back({it->second, i, MergeReason::Exact});
      }
    }
  }

  const bool use_minhash = t.jaccard <= 1.0 && t.bands > 0 && t.rows > 0;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> lsh;
  std::array<std::unordered_map<std::uint16_t, std::vector<std::size_t>>, 4> blocks;
  std::vector<std::size_t> with_embedding;

  std::vector<std::size_t> cand;
  std::vector<std::uint8_t> mark(n, 0);
  for (std::size_t i : order) {
    const auto& fi = fps[i];
    const std::vector<double>* ei = nullptr;
    if (embeddings) {
      if (auto it = embeddings->find(std::string(msgs[i].id)); it != embeddings->end()) ei = &it->second;
    }
    cand.clear();
    auto push = [&](std::size_t j) {
      if (!mark[j]) {
        mark[j] = 1;
        cand.push_back(j);
      }
    };
    std::vector<std::uint64_t> band_keys;
    if (!fi.exact_only) {
      if (use_minhash && fi.minhash_sig.size() >= t.bands * t.rows) {
        for (std::size_t b = 0; b < t.bands; ++b) {
          std::uint64_t h = hash_combine(0x4c5348ULL, b);
          for (std::size_t r = 0; r < t.rows; ++r) h = hash_combine(h, fi.minhash_sig[b * t.rows + r]);
          band_keys.push_back(h);
          if (auto it = lsh.find(h); it != lsh.end()) {
            for (auto j : it->second) push(j);
          }
        }
      }
      if (t.hamming >= 0) {
        for (std::size_t b = 0; b < 4; ++b) {
          const auto key = static_cast<std::uint16_t>(fi.simhash >> (16 * b));
          if (auto it = blocks[b].find(key); it != blocks[b].end()) {
            for (auto j : it->second) push(j);
          }
        }
      }
    }
    if (ei) {
      for (auto j : with_embedding) push(j);
    }
    // Deterministic candidate order: scan order.
    std::sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
    for (auto j : cand) {
      mark[j] = 0;
      if (uf.find(j) == uf.find(i)) continue;
      const auto& fj = fps[j];
      std::optional<MergeReason> why;
      if (!fi.exact_only && !fj.exact_only) {
        if (use_minhash && estimate_jaccard(fi.minhash_sig, fj.minhash_sig) >= t.jaccard) {
          why = MergeReason::MinHash;
        } else if (hamming(fi.simhash, fj.simhash) <= t.hamming) {
          why = MergeReason::SimHash;
        }
      }
      if (!why && ei) {
        const auto it = embeddings->find(std::string(msgs[j].id));
        if (it != embeddings->end() && it->second.size() == ei->size() && cosine(*ei, it->second) >= t.cosine) {
          why = MergeReason::Cosine;
        }
      }
      if (why) {
        uf.unite(j, i, rank);
        res.edges.push_back({j, i, *why});
      }
    }
    if (!fi.exact_only) {
      for (auto h : band_keys) lsh[h].push_back(i);
      if (t.hamming >= 0) {
        for (std::size_t b = 0; b < 4; ++b) blocks[b][static_cast<std::uint16_t>(fi.simhash >> (16 * b))].push_back(i);
      }
    }
    if (ei) with_embedding.push_back(i);
  }

  res.cluster_of.resize(n);
  res.kept.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    res.cluster_of[i] = uf.find(i);
    if (res.cluster_of[i] == i) {
      res.kept[i] = true;
      ++res.cluster_count;
    }
  }
  return res;
}

std::vector<RawMessage> drop_forwarded_duplicates(std::span<const RawMessage> messages) {
  std::map<std::pair<std::string, std::string>, std::size_t> winner;
  std::vector<std::string> canon(messages.size());
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const auto& m = messages[i];
    if (!m.fwd_id) continue;
    canon[i] = normalize_text(m.text);
    auto [it, fresh] = winner.emplace(std::make_pair(*m.fwd_id, canon[i]), i);
    if (!fresh) {
      const auto& w = messages[it->second];
      if (std::tie(m.timestamp, m.id) < std::tie(w.timestamp, w.id)) it->second = i;
    }
  }
  std::vector<RawMessage> out;
  out.reserve(messages.size());
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const auto& m = messages[i];
    if (m.fwd_id && winner.at({*m.fwd_id, canon[i]}) != i) continue;
    out.push_back(m);
  }
  return out;
}

nlohmann::json to_json(const CleanMessage& m) {
  return {{"id", m.id},
          {"channel_id", m.channel_id},
          {"timestamp", m.timestamp},
          {"canonical_text", m.canonical_text},
          {"cluster_id", m.cluster_id},
          {"kept", m.kept}};
}

CleanMessage clean_from_json(const nlohmann::json& j) {
  CleanMessage m;
  try {
    m.id = j.at("id").get<std::string>();
    m.channel_id = j.at("channel_id").get<std::string>();
    m.timestamp = j.at("timestamp").get<std::int64_t>();
    m.canonical_text = j.at("canonical_text").get<std::string>();
    m.cluster_id = j.at("cluster_id").get<std::string>();
    m.kept = j.at("kept").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseFailure, std::string("clean message: ") + e.what());
  }
  return m;
}

}  // namespace tag2cred::corpus
