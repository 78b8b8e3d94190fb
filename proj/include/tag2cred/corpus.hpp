#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace tag2cred::corpus {

struct RawMessage {
  std::string id;
  std::string channel_id;
  std::int64_t timestamp = 0;
  std::string text;
  std::optional<std::string> fwd_id;
};

/// Accepts timestamp as epoch number or ISO-8601 string. Throws
/// Error(MissingField | ParseFailure).
RawMessage message_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RawMessage& m);
/// Throws Error(MissingInput | MalformedJson | ParseFailure) and rejects duplicate ids.
std::vector<RawMessage> load_messages(const std::string& path);

/// Strips control/format characters, applies NFKC and lowercasing, collapses
/// whitespace runs to one ASCII space and trims.
std::string normalize_text(std::string_view text);

/// Whitespace-separated pieces of a canonical string.
std::vector<std::string_view> split_tokens(std::string_view canonical);

/// True when the text, after URL masking, has fewer than `min_tokens` pieces
/// that carry a letter or digit.
bool is_low_information(std::string_view canonical, std::size_t min_tokens = 3);

struct Fingerprints {
  std::uint64_t canon_hash = 0;
  std::uint64_t tokenset_hash = 0;
  std::uint64_t shingle3_hash = 0;
  std::vector<std::uint64_t> minhash_sig;
  std::uint64_t simhash = 0;
  bool exact_only = false;  // fewer than 3 tokens: only canon/tokenset hashes are meaningful
};

inline constexpr std::size_t kShingleSize = 3;
inline constexpr std::size_t kCharGram = 5;

/// Throws Error(TooShort) below three tokens.
Fingerprints compute_fingerprints(std::string_view canonical, std::size_t permutations = 256, std::uint64_t seed = 0);
/// Like compute_fingerprints, but short texts get exact hashes only.
Fingerprints fingerprints_or_exact(std::string_view canonical, std::size_t permutations = 256,
                                   std::uint64_t seed = 0);

/// Sorted unique 3-token shingle hashes (the set MinHash is taken over).
std::vector<std::uint64_t> shingle_set(std::string_view canonical);

/// Throws Error(LengthMismatch).
double estimate_jaccard(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);
int hamming(std::uint64_t a, std::uint64_t b);

struct DedupThresholds {
  double jaccard = 0.85;
  int hamming = 3;
  double cosine = 0.95;
  std::size_t bands = 32;
  std::size_t rows = 8;
};

enum class MergeReason { Exact, MinHash, SimHash, Cosine };
std::string_view to_string(MergeReason r);

struct MergeEdge {
  std::size_t a;  // index of the earlier-scanned message
  std::size_t b;
  MergeReason reason;
};

struct ClusterView {
  std::string_view id;
  std::int64_t timestamp;
};

struct ClusterResult {
  std::vector<std::size_t> cluster_of;  // per input index: index of the representative
  std::vector<bool> kept;
  std::vector<MergeEdge> edges;
  std::size_t cluster_count = 0;
};

using EmbeddingMap = std::unordered_map<std::string, std::vector<double>>;

/// Exact-key merges, then a greedy (timestamp, id)-ordered pass over LSH and
/// SimHash-block candidates. The earliest member of a cluster is kept.
ClusterResult cluster_near_duplicates(std::span<const ClusterView> messages, std::span<const Fingerprints> fps,
                                      const EmbeddingMap* embeddings = nullptr, const DedupThresholds& t = {});

/// Among messages with the same (fwd_id, normalized text), keeps the earliest by
/// (timestamp, id). Messages without fwd_id always survive. Order is preserved.
std::vector<RawMessage> drop_forwarded_duplicates(std::span<const RawMessage> messages);

double cosine(std::span<const double> a, std::span<const double> b);

struct CleanMessage {
  std::string id;
  std::string channel_id;
  std::int64_t timestamp = 0;
  std::string canonical_text;
  std::string cluster_id;
  bool kept = false;
};

nlohmann::json to_json(const CleanMessage& m);
CleanMessage clean_from_json(const nlohmann::json& j);

}  // namespace tag2cred::corpus
