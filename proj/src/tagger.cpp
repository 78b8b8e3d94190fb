#include "tag2cred/tagger.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "tag2cred/error.hpp"
#include "tag2cred/io.hpp"
#include "tag2cred/resources.hpp"
#include "tag2cred/rng.hpp"

namespace tag2cred::tagger {

using codebook::Field;
using codebook::TagAssignment;

namespace {

struct KeywordRule {
  Field field;
  int label;
  std::vector<std::string_view> words;
};

// Version 1. Changing this table changes every mock-tagged artifact.
const std::vector<KeywordRule>& mock_rules() {
  static const std::vector<KeywordRule> rules{
      {Field::Theme, 0, {"crypto", "bitcoin", "btc", "token", "tokens", "trading", "coin", "stocks"}},
      {Field::Theme, 1, {"vaccine", "vaccines", "health", "covid", "doctor", "medicine", "virus"}},
      {Field::Theme, 2, {"election", "government", "president", "vote", "senator", "parliament"}},
      {Field::Theme, 3, {"police", "crime", "arrest", "arrested", "robbery", "safety"}},
      {Field::Theme, 4, {"news", "headline", "headlines", "bulletin"}},
      {Field::Theme, 5, {"software", "app", "technology", "device", "engineering", "ai"}},
      {Field::Theme, 6, {"fitness", "diet", "wellness", "lifestyle", "productivity"}},
      {Field::Theme, 7, {"casino", "betting", "bet", "jackpot", "gambling", "slots"}},
      {Field::Theme, 8, {"football", "league", "tournament", "championship", "sports"}},
      {Field::Claim, 1, {"announce", "announcing", "announcement", "launch", "launched", "released"}},
      {Field::Claim, 2, {"predict", "prediction", "forecast", "expect", "soon"}},
      {Field::Claim, 3, {"guaranteed", "guarantee", "profit", "profits", "100x", "giveaway"}},
      {Field::Claim, 4, {"limited", "hurry", "fomo", "last-chance", "spots"}},
      {Field::Claim, 5, {"misleading", "cherry-picked", "context"}},
      {Field::Claim, 6, {"fear", "panic", "danger", "terrifying", "outrage"}},
      {Field::Claim, 7, {"rumour", "rumor", "allegedly", "unconfirmed", "leaked"}},
      {Field::Claim, 8, {"think", "believe", "opinion", "imo"}},
      {Field::Claim, 9, {"confirmed", "official", "according"}},
      {Field::Cta, 0, {"share", "repost", "retweet", "like"}},
      {Field::Cta, 1, {"comment", "ask", "questions", "reply"}},
      {Field::Cta, 2, {"visit", "watch", "click"}},
      {Field::Cta, 3, {"buy", "invest", "donate", "purchase"}},
      {Field::Cta, 4, {"join", "subscribe", "follow"}},
      {Field::Cta, 5, {"attend", "livestream", "event"}},
      {Field::Evidence, 2, {"said", "says", "quote", "testimony"}},
      {Field::Evidence, 3, {"percent", "statistics", "stats", "%"}},
      {Field::Evidence, 4, {"chart", "graph", "diagram", "tradingview"}},
  };
  return rules;
}

std::string strip_token(std::string_view tok) {
  if (tok == urlkit::kUrlToken) return std::string(tok);
  std::size_t b = 0, e = tok.size();
  auto edge = [](unsigned char c) { return std::ispunct(c) && c != '%' && c != '-'; };
  while (b < e && edge(static_cast<unsigned char>(tok[b]))) ++b;
  while (e > b && edge(static_cast<unsigned char>(tok[e - 1]))) --e;
  std::string out(tok.substr(b, e - b));
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::optional<std::string> env_token(const std::string& name) {
  if (name.empty()) return std::nullopt;
  const char* v = std::getenv(name.c_str());
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

}  // namespace

std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "http") return Mode::Http;
  if (s == "file") return Mode::File;
  if (s == "mock") return Mode::Mock;
  return std::nullopt;
}

std::string build_prompt(const urlkit::MaskedText& masked) {
  std::string p(resources::codebook_prompt());
  if (!p.empty() && p.back() != '\n') p.push_back('\n');
  p += "\nMESSAGE:\n";
  p += masked.text();
  p += "\n";
  return p;
}

TagAssignment mock_tag(const urlkit::MaskedText& masked) {
  std::vector<std::string> toks;
  bool has_url = false;
  {
    const std::string& s = masked.text();
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      const std::size_t start = i;
      while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      if (i == start) continue;
      const std::string_view raw(s.data() + start, i - start);
      if (raw.find(urlkit::kUrlToken) != std::string_view::npos) has_url = true;
      toks.push_back(strip_token(raw));
    }
  }
  std::sort(toks.begin(), toks.end());
  auto present = [&](std::string_view w) { return std::binary_search(toks.begin(), toks.end(), w); };

  TagAssignment a;
  for (const auto& rule : mock_rules()) {
    if (std::any_of(rule.words.begin(), rule.words.end(), present)) a.add(rule.field, rule.label);
  }
  if (has_url) a.add(Field::Evidence, 1);

  auto& theme = a[Field::Theme];
  if (theme.size() > 2) theme.resize(2);
  if (theme.empty()) theme.push_back(codebook::label::kConversation);

  auto& claim = a[Field::Claim];
  if (a.has(Field::Claim, codebook::label::kVerifiable) &&
      (a.has(Field::Claim, codebook::label::kRumour) || a.has(Field::Claim, codebook::label::kAnnouncement))) {
    claim.erase(std::find(claim.begin(), claim.end(), codebook::label::kVerifiable));
  }
  if (claim.size() > 3) claim.resize(3);
  if (claim.empty()) claim.push_back(codebook::label::kNoSubstantiveClaim);

  if (a[Field::Cta].empty()) a[Field::Cta].push_back(codebook::label::kNoCta);
  if (a[Field::Evidence].empty()) a[Field::Evidence].push_back(codebook::label::kNoneEvidence);
  return a;
}

FileTagger FileTagger::parse(std::string_view jsonl) {
  FileTagger t;
  std::size_t line_no = 0;
  for (const auto& line : io::split_lines(jsonl)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(Errc::MalformedJson, "tag file line " + std::to_string(line_no));
    }
    const auto id_it = j.find("message_id");
    if (id_it == j.end() || !id_it->is_string()) {
      throw Error(Errc::MissingField, "message_id (tag file line " + std::to_string(line_no) + ")");
    }
    const std::string id = id_it->get<std::string>();
    try {
      t.tags_[id] = codebook::from_json(j);
    } catch (const Error& e) {
      t.broken_[id] = e.what();
    }
  }
  return t;
}

FileTagger FileTagger::load(const std::string& path) {
  if (!io::file_exists(path)) throw Error(Errc::MissingInput, "tag file not found: " + path);
  return parse(io::read_file(path));
}

TagAssignment FileTagger::tag(const std::string& message_id, const urlkit::MaskedText&) {
  if (const auto it = tags_.find(message_id); it != tags_.end()) return it->second;
  if (const auto it = broken_.find(message_id); it != broken_.end()) throw Error(Errc::InvalidOutput, it->second);
  throw Error(Errc::MissingTag, message_id);
}

HttpTagger::HttpTagger(TaggerConfig config, std::shared_ptr<net::HttpClient> client)
    : config_(std::move(config)), client_(std::move(client)) {
  if (config_.endpoint.empty()) throw Error(Errc::TaggerUnavailable, "http mode needs an endpoint");
  if (!client_) client_ = net::make_http_client(config_.timeout_seconds);
}

TagAssignment HttpTagger::tag(const std::string& message_id, const urlkit::MaskedText& masked) {
  const nlohmann::json request{{"prompt", build_prompt(masked)}, {"temperature", 0}};
  const std::string body = request.dump();
  net::Headers headers{{"Accept", "application/json"}};
  if (const auto tok = env_token(config_.auth_token_env)) {
    headers.emplace_back(config_.auth_header, config_.auth_header == "Authorization" ? "Bearer " + *tok : *tok);
  }
  Rng jitter(config_.seed, hash64(message_id));
  std::string last_error;
  bool any_response = false;
  const int attempts = 1 + std::max(0, config_.retries);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0 && config_.backoff_ms > 0) {
      const double ms = config_.backoff_ms * std::ldexp(1.0, attempt - 1) * (0.5 + jitter.uniform());
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
    }
    net::HttpResponse resp;
    try {
      resp = client_->post(config_.endpoint, body, "application/json", headers);
    } catch (const Error& e) {
      last_error = e.what();
      continue;
    }
    if (resp.status >= 500 || resp.status == 429) {
      last_error = "HTTP " + std::to_string(resp.status);
      continue;
    }
    any_response = true;
    if (resp.status < 200 || resp.status >= 300) {
      last_error = "HTTP " + std::to_string(resp.status);
      continue;
    }
    try {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(resp.body);
      } catch (const nlohmann::json::parse_error&) {
        return codebook::parse_tagger_output(resp.body);
      }
      if (j.is_object() && !j.contains("theme")) {
        for (const char* key : {"output", "text", "response", "completion"}) {
          if (const auto it = j.find(key); it != j.end() && it->is_string()) {
            return codebook::parse_tagger_output(it->get<std::string>());
          }
        }
      }
      return codebook::from_json(j);
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  throw Error(any_response ? Errc::InvalidOutput : Errc::TaggerUnavailable,
              message_id + " after " + std::to_string(attempts) + " attempts: " + last_error);
}

std::unique_ptr<Tagger> make_tagger(const TaggerConfig& config, std::shared_ptr<net::HttpClient> client) {
  switch (config.mode) {
    case Mode::Mock: return std::make_unique<MockTagger>();
    case Mode::File: return std::make_unique<FileTagger>(FileTagger::load(config.tag_file));
    case Mode::Http: return std::make_unique<HttpTagger>(config, std::move(client));
  }
  throw Error(Errc::ConfigInvalid, "unknown tagger mode");
}

TagOutcome tag_message(Tagger& tagger, const std::string& message_id, const urlkit::MaskedText& masked,
                       const codebook::ValidationOptions& opts) {
  TagOutcome out;
  out.message_id = message_id;
  try {
    TagAssignment a = tagger.tag(message_id, masked);
    out.violations = codebook::validate_assignment(a, opts);
    if (out.violations.empty()) {
      out.assignment = std::move(a);
    } else {
      out.error = "InvalidOutput: " + out.violations.front().rule + ": " + out.violations.front().detail;
    }
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

std::vector<TagOutcome> tag_all(Tagger& tagger, std::span<const TagRequest> requests, std::size_t max_in_flight,
                                const codebook::ValidationOptions& opts) {
  std::vector<TagOutcome> out(requests.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(max_in_flight, requests.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < requests.size(); ++i) {
      out[i] = tag_message(tagger, requests[i].message_id, requests[i].masked, opts);
    }
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < requests.size(); i = next++) {
        out[i] = tag_message(tagger, requests[i].message_id, requests[i].masked, opts);
      }
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace tag2cred::tagger
