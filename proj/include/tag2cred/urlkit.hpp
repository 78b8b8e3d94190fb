#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace tag2cred::net {
class HttpClient;
}

namespace tag2cred::urlkit {

/// Public-suffix rule table (publicsuffix.org format: one rule per line,
/// "//" comments, "*." wildcard and "!" exception rules).
class SuffixRules {
 public:
  static SuffixRules parse(std::string_view text);
  static SuffixRules load(const std::string& path);
  /// The subset shipped with the library (data/public_suffix_list.dat).
  static const SuffixRules& builtin();

  struct Match {
    std::size_t suffix_labels = 0;  // labels belonging to the public suffix
    bool known = false;             // false when only the implicit "*" rule matched
  };
  Match match(std::string_view host) const;

  /// Returns the registrable domain (suffix plus one label), or nullopt when the
  /// host has no label beyond a known suffix or the suffix is unknown.
  std::optional<std::string> registrable(std::string_view host) const;

  std::size_t size() const { return rules_.size() + wildcards_.size() + exceptions_.size(); }

 private:
  std::unordered_set<std::string> rules_;
  std::unordered_set<std::string> wildcards_;   // stored without the "*." prefix
  std::unordered_set<std::string> exceptions_;  // stored without the "!" prefix
};

struct UrlSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive byte offset
  std::string text;
};

/// Scheme URLs (http/https) and bare domains under a known public suffix with
/// optional path; non-overlapping, left to right.
std::vector<UrlSpan> extract_urls(std::string_view text, const SuffixRules& rules = SuffixRules::builtin());

inline constexpr std::string_view kUrlToken = "[URL]";

/// Text with every extracted URL replaced by "[URL]". Only mask_urls can produce
/// one, so feature code that takes a MaskedText cannot see raw URLs.
class MaskedText {
 public:
  const std::string& text() const noexcept { return text_; }
  std::size_t url_count() const noexcept { return url_count_; }

 private:
  friend MaskedText mask_urls(std::string_view, const SuffixRules&);
  MaskedText(std::string text, std::size_t n) : text_(std::move(text)), url_count_(n) {}
  std::string text_;
  std::size_t url_count_ = 0;
};

MaskedText mask_urls(std::string_view text, const SuffixRules& rules = SuffixRules::builtin());

/// Lowercased host of a URL or bare domain (scheme, userinfo, port, path stripped).
/// Throws Error(NoHostname).
std::string extract_host(std::string_view url);

struct DomainResult {
  std::string domain;
  std::optional<std::string> warning;  // set on UnknownSuffix fallback and similar
};

/// Registered domain of a URL: lowercase host, one leading "www." removed,
/// reduced to public suffix plus one label. Unknown suffixes fall back to the
/// last two labels with a warning. Throws Error(NoHostname).
DomainResult canonical_domain(std::string_view url, const SuffixRules& rules = SuffixRules::builtin());

/// One redirect hop. Returns nullopt when the URL does not redirect.
class RedirectResolver {
 public:
  virtual ~RedirectResolver() = default;
  virtual std::optional<std::string> next_hop(const std::string& url) = 0;
};

/// Offline shortener table. Each CSV row is `pattern,target`; a pattern is
/// matched against host+path with the scheme and a leading "www." dropped.
/// A trailing "*" makes the pattern a prefix match.
class FixtureResolver final : public RedirectResolver {
 public:
  FixtureResolver() = default;
  static FixtureResolver parse_csv(std::string_view text);
  static FixtureResolver load(const std::string& path);

  void add(std::string pattern, std::string target);
  std::optional<std::string> next_hop(const std::string& url) override;
  std::size_t size() const { return exact_.size() + prefixes_.size(); }

 private:
  std::unordered_map<std::string, std::string> exact_;
  std::vector<std::pair<std::string, std::string>> prefixes_;
};



/// Follows Location headers of HEAD responses.
class HttpHeadResolver final : public RedirectResolver {
 public:
  explicit HttpHeadResolver(std::shared_ptr<net::HttpClient> client) : client_(std::move(client)) {}
  std::optional<std::string> next_hop(const std::string& url) override;

 private:
  std::shared_ptr<net::HttpClient> client_;
};

struct ResolveResult {
  std::string url;
  int hops = 0;
  std::optional<std::string> warning;  // "RedirectLoop: ..." when a cycle or hop cap was hit
};

ResolveResult resolve_redirects(const std::string& url, RedirectResolver& resolver, int max_hops = 5);

struct ExtractedUrl {
  std::string raw;
  std::string resolved;
  std::string canonical_domain;
};

}  // namespace tag2cred::urlkit
