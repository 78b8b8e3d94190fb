#include "tag2cred/urlkit.hpp"

#include <algorithm>
#include <cctype>

#include "tag2cred/error.hpp"
#include "tag2cred/io.hpp"
#include "tag2cred/net.hpp"
#include "tag2cred/resources.hpp"

namespace tag2cred::urlkit {

namespace {

bool is_ascii_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

bool is_host_char(char c) { return is_ascii_alnum(c) || c == '-' || c == '.'; }

// A match may start at i only if the previous byte cannot continue a token,
// a path, an e-mail local part or a host.
bool at_boundary(std::string_view t, std::size_t i) {
  if (i == 0) return true;
  const char p = t[i - 1];
  if (static_cast<unsigned char>(p) >= 0x80) return true;
  return !(is_ascii_alnum(p) || p == '.' || p == '-' || p == '_' || p == '@' || p == '/' ||
           p == '%' || p == '+' || p == '=' || p == '&' || p == '#' || p == '~');
}

bool is_url_stop(char c) {
  return static_cast<unsigned char>(c) >= 0x80 || std::isspace(static_cast<unsigned char>(c)) ||
         c == '<' || c == '>' || c == '"' || c == '`' || c == '{' || c == '}' || c == '|' ||
         c == '\\' || c == '^';
}

bool is_trailing_punct(char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?': case ')': case ']':
    case '\'': case '*': case '(': case '[':
      return true;
    default:
      return false;
  }
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool iequals_prefix(std::string_view t, std::size_t i, std::string_view prefix) {
  if (t.size() - i < prefix.size()) return false;
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    if (std::tolower(static_cast<unsigned char>(t[i + k])) != prefix[k]) return false;
  }
  return true;
}

std::vector<std::string_view> split_labels(std::string_view host) {
  std::vector<std::string_view> labels;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = host.find('.', start);
    labels.push_back(host.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return labels;
}

std::string join_last(const std::vector<std::string_view>& labels, std::size_t n) {
  std::string out;
  for (std::size_t i = labels.size() - n; i < labels.size(); ++i) {
    if (!out.empty()) out.push_back('.');
    out += labels[i];
  }
  return out;
}

bool valid_label(std::string_view l) {
  if (l.empty() || l.size() > 63 || l.front() == '-' || l.back() == '-') return false;
  return std::all_of(l.begin(), l.end(), [](char c) { return is_ascii_alnum(c) || c == '-'; });
}

// Consumes a path/query tail starting at `i` up to a stop byte, then trims
// trailing punctuation.
std::size_t consume_tail(std::string_view t, std::size_t i, std::size_t min_end) {
  std::size_t j = i;
  while (j < t.size() && !is_url_stop(t[j])) ++j;
  while (j > min_end && is_trailing_punct(t[j - 1])) --j;
  return j;
}

std::optional<std::size_t> match_scheme_url(std::string_view t, std::size_t i) {
  std::size_t after = 0;
  if (iequals_prefix(t, i, "https://")) {
    after = i + 8;
  } else if (iequals_prefix(t, i, "http://")) {
    after = i + 7;
  } else {
    return std::nullopt;
  }
  if (after >= t.size() || !(is_ascii_alnum(t[after]) || t[after] == '[')) return std::nullopt;
  const std::size_t end = consume_tail(t, after, after + 1);
  return end;
}

std::optional<std::size_t> match_bare_domain(std::string_view t, std::size_t i, const SuffixRules& rules) {
  if (!is_ascii_alnum(t[i])) return std::nullopt;
  std::size_t j = i;
  while (j < t.size() && is_host_char(t[j])) ++j;
  std::size_t host_end = j;
  while (host_end > i && (t[host_end - 1] == '.' || t[host_end - 1] == '-')) --host_end;
  if (j < t.size() && (t[j] == '@' || t[j] == '_')) return std::nullopt;
  const std::string host = ascii_lower(t.substr(i, host_end - i));
  const auto labels = split_labels(host);
  if (labels.size() < 2) return std::nullopt;
  if (!std::all_of(labels.begin(), labels.end(), valid_label)) return std::nullopt;
  const auto& tld = labels.back();
  if (!std::any_of(tld.begin(), tld.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); })) {
    return std::nullopt;
  }
  if (!rules.registrable(host)) return std::nullopt;
  std::size_t end = host_end;
  if (host_end == j && j < t.size()) {
    std::size_t k = j;
    if (t[k] == ':' && k + 1 < t.size() && std::isdigit(static_cast<unsigned char>(t[k + 1]))) {
      ++k;
      while (k < t.size() && std::isdigit(static_cast<unsigned char>(t[k]))) ++k;
      if (k == t.size() || t[k] == '/' || is_url_stop(t[k])) end = k;
    }
    if (end < t.size() && t[end] == '/') end = consume_tail(t, end, end + 1);
  }
  return end;
}

bool is_ipv4(std::string_view host) {
  const auto labels = split_labels(host);
  if (labels.size() != 4) return false;
  return std::all_of(labels.begin(), labels.end(), [](std::string_view l) {
    return !l.empty() && l.size() <= 3 &&
           std::all_of(l.begin(), l.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  });
}

std::string fixture_key(std::string_view url) {
  std::string_view rest = url;
  const auto scheme = rest.find("://");
  if (scheme != std::string_view::npos) rest.remove_prefix(scheme + 3);
  const auto slash = rest.find_first_of("/?#");
  std::string host = ascii_lower(rest.substr(0, slash));
  std::string path = slash == std::string_view::npos ? std::string() : std::string(rest.substr(slash));
  if (host.rfind("www.", 0) == 0) host.erase(0, 4);
  if (!path.empty() && path.back() == '/') path.pop_back();
  return host + path;
}

}  // namespace

SuffixRules SuffixRules::parse(std::string_view text) {
  SuffixRules r;
  for (const auto& raw : io::split_lines(text)) {
    std::string_view line = raw;
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string_view::npos) continue;
    line.remove_prefix(start);
    if (line.rfind("//", 0) == 0) continue;
    const auto stop = line.find_first_of(" \t");
    std::string rule = ascii_lower(line.substr(0, stop));
    if (rule.empty()) continue;
    if (rule.front() == '!') {
      r.exceptions_.insert(rule.substr(1));
    } else if (rule.rfind("*.", 0) == 0) {
      r.wildcards_.insert(rule.substr(2));
    } else {
      r.rules_.insert(std::move(rule));
    }
  }
  return r;
}

SuffixRules SuffixRules::load(const std::string& path) { return parse(io::read_file(path)); }

const SuffixRules& SuffixRules::builtin() {
  static const SuffixRules rules = parse(resources::public_suffix_list());
  return rules;
}

SuffixRules::Match SuffixRules::match(std::string_view host) const {
  const auto labels = split_labels(host);
  std::size_t best = 0;
  std::size_t exception = 0;
  for (std::size_t n = 1; n <= labels.size(); ++n) {
    const std::string candidate = join_last(labels, n);
    if (exceptions_.count(candidate)) exception = n;
    if (rules_.count(candidate)) best = std::max(best, n);
    if (n >= 2 && wildcards_.count(join_last(labels, n - 1))) best = std::max(best, n);
  }
  if (exception > 0) return {exception - 1, true};
  if (best > 0) return {best, true};
  return {1, false};
}

std::optional<std::string> SuffixRules::registrable(std::string_view host) const {
  const Match m = match(host);
  if (!m.known) return std::nullopt;
  const auto labels = split_labels(host);
  if (labels.size() <= m.suffix_labels) return std::nullopt;
  return join_last(labels, m.suffix_labels + 1);
}

std::vector<UrlSpan> extract_urls(std::string_view text, const SuffixRules& rules) {
  std::vector<UrlSpan> spans;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!at_boundary(text, i) || !is_ascii_alnum(text[i])) {
      ++i;
      continue;
    }
    auto end = match_scheme_url(text, i);
    if (!end) end = match_bare_domain(text, i, rules);
    if (end && *end > i) {
      spans.push_back({i, *end, std::string(text.substr(i, *end - i))});
      i = *end;
    } else {
      ++i;
    }
  }
  return spans;
}

MaskedText mask_urls(std::string_view text, const SuffixRules& rules) {
  const auto spans = extract_urls(text, rules);
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  for (const auto& s : spans) {
    out.append(text.substr(pos, s.begin - pos));
    out.append(kUrlToken);
    pos = s.end;
  }
  out.append(text.substr(pos));
  return MaskedText(std::move(out), spans.size());
}

std::string extract_host(std::string_view url) {
  std::string_view rest = url;
  while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.front()))) rest.remove_prefix(1);
  const auto scheme = rest.find("://");
  if (scheme != std::string_view::npos) rest.remove_prefix(scheme + 3);
  const auto path = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, path);
  const auto at = authority.rfind('@');
  if (at != std::string_view::npos) authority.remove_prefix(at + 1);
  std::string_view host;
  if (!authority.empty() && authority.front() == '[') {
    const auto close = authority.find(']');
    host = authority.substr(1, close == std::string_view::npos ? std::string_view::npos : close - 1);
  } else {
    host = authority.substr(0, authority.find(':'));
  }
  while (!host.empty() && host.back() == '.') host.remove_suffix(1);
  if (host.empty()) throw Error(Errc::NoHostname, "no hostname in '" + std::string(url) + "'");
  return ascii_lower(host);
}

DomainResult canonical_domain(std::string_view url, const SuffixRules& rules) {
  std::string host = extract_host(url);
  if (is_ipv4(host) || host.find(':') != std::string::npos) {
    return {host, "ip-literal host '" + host + "' kept as-is"};
  }
  if (host.rfind("www.", 0) == 0) {
    const std::string rest = host.substr(4);
    const auto m = rules.match(rest);
    if (split_labels(rest).size() > m.suffix_labels) host = rest;
  }
  if (auto reg = rules.registrable(host)) return {*reg, std::nullopt};
  const auto m = rules.match(host);
  const auto labels = split_labels(host);
  if (m.known) return {host, "host '" + host + "' is itself a public suffix"};
  return {join_last(labels, std::min<std::size_t>(2, labels.size())),
          "UnknownSuffix: no public-suffix rule for '" + host + "', using last two labels"};
}

FixtureResolver FixtureResolver::parse_csv(std::string_view text) {
  FixtureResolver r;
  for (const auto& row : io::parse_csv(text)) {
    if (row.size() < 2 || row[0].empty() || row[0].front() == '#') continue;
    if (row[0] == "pattern" && row[1] == "target") continue;
    r.add(row[0], row[1]);
  }
  return r;
}

FixtureResolver FixtureResolver::load(const std::string& path) { return parse_csv(io::read_file(path)); }

void FixtureResolver::add(std::string pattern, std::string target) {
  if (!pattern.empty() && pattern.back() == '*') {
    pattern.pop_back();
    prefixes_.emplace_back(fixture_key(pattern), std::move(target));
  } else {
    exact_[fixture_key(pattern)] = std::move(target);
  }
}

std::optional<std::string> FixtureResolver::next_hop(const std::string& url) {
  const std::string key = fixture_key(url);
  if (auto it = exact_.find(key); it != exact_.end()) return it->second;
  for (const auto& [prefix, target] : prefixes_) {
    if (key.rfind(prefix, 0) == 0) return target;
  }
  return std::nullopt;
}

std::optional<std::string> HttpHeadResolver::next_hop(const std::string& url) {
  std::string absolute = url;
  if (absolute.find("://") == std::string::npos) absolute = "http://" + absolute;
  net::HttpResponse resp;
  try {
    resp = client_->head(absolute, {});
  } catch (const Error&) {
    return std::nullopt;
  }
  if (resp.status < 300 || resp.status >= 400) return std::nullopt;
  auto it = resp.headers.find("location");
  if (it == resp.headers.end() || it->second.empty()) return std::nullopt;
  std::string loc = it->second;
  if (loc.front() == '/') loc = net::split_url(absolute).origin + loc;
  return loc;
}

ResolveResult resolve_redirects(const std::string& url, RedirectResolver& resolver, int max_hops) {
  ResolveResult r{url, 0, std::nullopt};
  std::vector<std::string> seen{fixture_key(url)};
  while (true) {
    auto next = resolver.next_hop(r.url);
    if (!next) break;
    if (r.hops >= max_hops) {
      r.warning = "RedirectLoop: more than " + std::to_string(max_hops) + " hops from '" + url + "'";
      break;
    }
    const std::string key = fixture_key(*next);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
      r.warning = "RedirectLoop: cycle at '" + *next + "' while resolving '" + url + "'";
      break;
    }
    seen.push_back(key);
    r.url = std::move(*next);
    ++r.hops;
  }
  return r;
}

}  // namespace tag2cred::urlkit
