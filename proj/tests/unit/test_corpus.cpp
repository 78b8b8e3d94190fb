#include <doctest.h>

#include <algorithm>
#include <set>

#include "tag2cred/corpus.hpp"
#include "tag2cred/error.hpp"
#include "tag2cred/rng.hpp"

using namespace tag2cred;
using namespace tag2cred::corpus;

namespace {

double exact_jaccard(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  std::set<std::uint64_t> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::size_t inter = 0;
  for (auto x : sa) inter += sb.count(x);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

TEST_CASE("normalize_text examples") {
  CHECK(normalize_text("  Hello WORLD ") == "hello world");
  CHECK(normalize_text("") == "");
  CHECK(normalize_text("abc") == "abc");
  CHECK(normalize_text("a​b\tc\r\n d") == "ab c d");
  CHECK(normalize_text("ＡＢ") == "ab");  // fullwidth folds under NFKC
}

TEST_CASE("normalize_text is idempotent") {
  Rng rng(3);
  const char* pieces[] = {"A", "b", " ", "\t", " ", "​", "É", "é", "ﬁ", "Ⅰ", "x", "\x01"};
  for (int n = 0; n < 500; ++n) {
    std::string s;
    const auto len = rng.below(20);
    for (std::uint64_t i = 0; i < len; ++i) s += pieces[rng.below(std::size(pieces))];
    const auto once = normalize_text(s);
    CHECK(normalize_text(once) == once);
  }
}

TEST_CASE("is_low_information") {
  CHECK(is_low_information("ok"));
  CHECK_FALSE(is_low_information("join the whitelist now"));
  CHECK(is_low_information(""));
  CHECK(is_low_information("https://a.com/x https://b.org !!"));
  CHECK(is_low_information("!!! ??? ..."));
  CHECK_FALSE(is_low_information("ok", 1));
}

TEST_CASE("fingerprints") {
  const auto a = compute_fingerprints("the quick brown fox jumps");
  const auto b = compute_fingerprints("the quick brown fox jumps");
  CHECK(a.canon_hash == b.canon_hash);
  CHECK(a.minhash_sig == b.minhash_sig);
  CHECK(a.simhash == b.simhash);
  CHECK(a.minhash_sig.size() == 256);
  CHECK_THROWS_WITH_AS(compute_fingerprints("a b"), doctest::Contains("TooShort"), Error);
  CHECK(fingerprints_or_exact("a b").exact_only);

  // tokenset digest ignores order and repeats; shingle digest does not
  const auto c = compute_fingerprints("b a a c d");
  const auto d = compute_fingerprints("a b c d d");
  CHECK(c.tokenset_hash == d.tokenset_hash);
  CHECK(c.shingle3_hash != d.shingle3_hash);
}

TEST_CASE("minhash estimate for a b c d vs a b c e") {
  const auto s1 = shingle_set("a b c d");
  const auto s2 = shingle_set("a b c e");
  CHECK(exact_jaccard(s1, s2) == doctest::Approx(1.0 / 3.0));
  const auto f1 = compute_fingerprints("a b c d", 256, 11);
  const auto f2 = compute_fingerprints("a b c e", 256, 11);
  CHECK(std::abs(estimate_jaccard(f1.minhash_sig, f2.minhash_sig) - 1.0 / 3.0) <= 0.1);
  CHECK(estimate_jaccard(f1.minhash_sig, f1.minhash_sig) == 1.0);
  const auto f3 = compute_fingerprints("x y z w", 256, 11);
  CHECK(estimate_jaccard(f1.minhash_sig, f3.minhash_sig) < 0.05);
  std::vector<std::uint64_t> shorter(10);
  CHECK_THROWS_AS(estimate_jaccard(f1.minhash_sig, shorter), Error);
}

TEST_CASE("minhash is unbiased over seeds") {
  const std::string a = "alpha beta gamma delta epsilon zeta eta theta";
  const std::string b = "alpha beta gamma delta epsilon zeta iota kappa";
  const double J = exact_jaccard(shingle_set(a), shingle_set(b));
  double sum = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    sum += estimate_jaccard(compute_fingerprints(a, 256, s).minhash_sig, compute_fingerprints(b, 256, s).minhash_sig);
  }
  CHECK(std::abs(sum / 1000 - J) <= 0.02);
}

TEST_CASE("hamming and cosine") {
  CHECK(hamming(0, 0) == 0);
  CHECK(hamming(0b1011, 0b0001) == 2);
  CHECK(hamming(~0ULL, 0) == 64);
  const std::vector<double> x{1, 0}, y{0, 1}, z{2, 0};
  CHECK(cosine(x, y) == doctest::Approx(0.0));
  CHECK(cosine(x, z) == doctest::Approx(1.0));
}

namespace {

ClusterResult cluster_texts(const std::vector<std::string>& texts, const EmbeddingMap* emb = nullptr,
                            std::vector<std::string>* ids_out = nullptr) {
  static std::vector<std::string> ids;
  ids.clear();
  for (std::size_t i = 0; i < texts.size(); ++i) ids.push_back("m" + std::to_string(100 + i));
  std::vector<ClusterView> views;
  std::vector<Fingerprints> fps;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    views.push_back({ids[i], static_cast<std::int64_t>(i)});
    fps.push_back(fingerprints_or_exact(normalize_text(texts[i])));
  }
  if (ids_out) *ids_out = ids;
  return cluster_near_duplicates(views, fps, emb);
}

}  // namespace

TEST_CASE("cluster_near_duplicates basics") {
  SUBCASE("byte-identical texts merge") {
    const auto r = cluster_texts({"free tokens for everyone today", "free tokens for everyone today"});
    CHECK(r.cluster_of[0] == r.cluster_of[1]);
    CHECK(r.cluster_count == 1);
    CHECK(r.kept[0]);
    CHECK_FALSE(r.kept[1]);
    REQUIRE(r.edges.size() == 1);
    CHECK(r.edges[0].reason == MergeReason::Exact);
  }
  SUBCASE("all-unique texts stay singletons") {
    std::vector<std::string> t;
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
      std::string s;
      for (int k = 0; k < 12; ++k) s += "w" + std::to_string(rng.below(100000)) + " ";
      t.push_back(s);
    }
    const auto r = cluster_texts(t);
    CHECK(r.cluster_count == 50);
    CHECK(std::all_of(r.kept.begin(), r.kept.end(), [](bool k) { return k; }));
  }
  SUBCASE("near copy merges through minhash or simhash") {
    const auto r = cluster_texts({"one two three four five six seven eight nine ten eleven twelve thirteen fourteen",
                                  "one two three four five six seven eight nine ten eleven twelve thirteen fourteen x"});
    CHECK(r.cluster_of[1] == 0);
    CHECK(r.edges.at(0).reason != MergeReason::Exact);
  }
  SUBCASE("cosine criterion only with both vectors") {
    EmbeddingMap emb{{"m100", {1.0, 0.0}}, {"m101", {0.99, 0.01}}};
    const std::vector<std::string> t{"completely different words here now", "nothing alike in this other message"};
    const auto with = cluster_texts(t, &emb);
    CHECK(with.cluster_count == 1);
    CHECK(with.edges.at(0).reason == MergeReason::Cosine);
    EmbeddingMap partial{{"m100", {1.0, 0.0}}};
    CHECK(cluster_texts(t, &partial).cluster_count == 2);
  }
  SUBCASE("short texts dedup exactly") {
    const auto r = cluster_texts({"gm", "gm", "gn"});
    CHECK(r.cluster_of[1] == 0);
    CHECK(r.cluster_count == 2);
  }
}

TEST_CASE("representative is the earliest by (timestamp, id)") {
  std::vector<std::string> ids{"b", "a", "c"};
  std::vector<ClusterView> views{{ids[0], 5}, {ids[1], 5}, {ids[2], 1}};
  std::vector<Fingerprints> fps(3, compute_fingerprints("same text for all three"));
  const auto r = cluster_near_duplicates(views, fps);
  CHECK(r.cluster_of[0] == 2);
  CHECK(r.kept[2]);
  CHECK(std::count(r.kept.begin(), r.kept.end(), true) == 1);
}

TEST_CASE("clustering is deterministic") {
  std::vector<std::string> t;
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    std::string s;
    for (int k = 0; k < 10; ++k) s += "t" + std::to_string(rng.below(30)) + " ";
    t.push_back(s);
  }
  const auto a = cluster_texts(t);
  const auto b = cluster_texts(t);
  CHECK(a.cluster_of == b.cluster_of);
}

TEST_CASE("drop_forwarded_duplicates") {
  auto msg = [](std::string id, std::int64_t ts, std::string text, std::optional<std::string> fwd) {
    return RawMessage{std::move(id), "c", ts, std::move(text), std::move(fwd)};
  };
  SUBCASE("same fwd_id and text keeps the earlier") {
    std::vector<RawMessage> m{msg("x", 20, "Hello there", "src"), msg("y", 10, "hello  there", "src")};
    const auto out = drop_forwarded_duplicates(m);
    REQUIRE(out.size() == 1);
    CHECK(out[0].id == "y");
  }
  SUBCASE("same fwd_id, different text") {
    std::vector<RawMessage> m{msg("x", 1, "one", "src"), msg("y", 2, "two", "src")};
    CHECK(drop_forwarded_duplicates(m).size() == 2);
  }
  SUBCASE("no fwd_id") {
    std::vector<RawMessage> m{msg("x", 1, "same", std::nullopt), msg("y", 2, "same", std::nullopt)};
    CHECK(drop_forwarded_duplicates(m).size() == 2);
  }
}

TEST_CASE("message json") {
  const auto m = message_from_json(nlohmann::json::parse(
      R"({"id":"1","channel_id":"c","timestamp":"2025-05-05T00:00:00Z","text":"hi","fwd_id":"9"})"));
  CHECK(m.timestamp == 1746403200);
  CHECK(m.fwd_id == std::optional<std::string>("9"));
  const auto back = message_from_json(to_json(m));
  CHECK(back.id == m.id);
  CHECK(back.timestamp == m.timestamp);
  CHECK_THROWS_AS(message_from_json(nlohmann::json::parse(R"({"id":"1"})")), Error);
  CHECK_THROWS_WITH(load_messages("/nonexistent/messages.jsonl"), doctest::Contains("MissingInput"));

  CleanMessage c{"1", "c", 5, "hi there", "1", true};
  const auto c2 = clean_from_json(to_json(c));
  CHECK(c2.canonical_text == c.canonical_text);
  CHECK(c2.kept);
}
