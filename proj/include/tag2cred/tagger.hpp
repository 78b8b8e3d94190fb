#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tag2cred/codebook.hpp"
#include "tag2cred/net.hpp"
#include "tag2cred/urlkit.hpp"

namespace tag2cred::tagger {

enum class Mode { Http, File, Mock };
std::optional<Mode> parse_mode(std::string_view s);

struct TaggerConfig {
  Mode mode = Mode::Mock;
  std::string endpoint;                       // http
  std::string auth_header = "Authorization";  // http; value "Bearer <token>"
  std::string auth_token_env;                 // http
  std::string tag_file;                       // file
  int retries = 3;
  double timeout_seconds = 30.0;
  double backoff_ms = 250.0;
  std::size_t max_in_flight = 4;
  std::uint64_t seed = 0;  // backoff jitter
  codebook::ValidationOptions validation;
};

/// Codebook rules followed by the message block. Deterministic.
std::string build_prompt(const urlkit::MaskedText& masked);

inline constexpr int kMockRulesVersion = 1;

/// Frozen keyword rules (documented in README). Pure function of the text.
codebook::TagAssignment mock_tag(const urlkit::MaskedText& masked);

/// Produces one raw assignment; may throw. Implementations are thread-safe.
class Tagger {
 public:
  virtual ~Tagger() = default;
  virtual codebook::TagAssignment tag(const std::string& message_id, const urlkit::MaskedText& masked) = 0;
};

class MockTagger final : public Tagger {
 public:
  codebook::TagAssignment tag(const std::string&, const urlkit::MaskedText& masked) override { return mock_tag(masked); }
};

/// JSONL of {message_id, theme, claim_types, ctas, evidence}. Lines that fail to
/// parse are kept as errors and surface when that id is requested.
class FileTagger final : public Tagger {
 public:
  static FileTagger load(const std::string& path);
  static FileTagger parse(std::string_view jsonl);
  codebook::TagAssignment tag(const std::string& message_id, const urlkit::MaskedText&) override;
  std::size_t size() const { return tags_.size(); }

 private:
  std::unordered_map<std::string, codebook::TagAssignment> tags_;
  std::unordered_map<std::string, std::string> broken_;
};

/// POSTs {"prompt", "temperature": 0}; the response is either the schema object
/// or an object whose "output"/"text"/"response"/"completion" string holds it.
/// Transport and parse failures are retried with jittered exponential backoff.
class HttpTagger final : public Tagger {
 public:
  HttpTagger(TaggerConfig config, std::shared_ptr<net::HttpClient> client);
  codebook::TagAssignment tag(const std::string& message_id, const urlkit::MaskedText& masked) override;

 private:
  TaggerConfig config_;
  std::shared_ptr<net::HttpClient> client_;
};

std::unique_ptr<Tagger> make_tagger(const TaggerConfig& config, std::shared_ptr<net::HttpClient> client = nullptr);

struct TagOutcome {
  std::string message_id;
  std::optional<codebook::TagAssignment> assignment;  // set only when valid
  std::vector<codebook::Violation> violations;
  std::optional<std::string> error;
  bool quarantined() const { return !assignment.has_value(); }
};

/// Tags and validates; failures and invalid assignments are quarantined.
TagOutcome tag_message(Tagger& tagger, const std::string& message_id, const urlkit::MaskedText& masked,
                       const codebook::ValidationOptions& opts = {});

struct TagRequest {
  std::string message_id;
  urlkit::MaskedText masked;
};

/// Runs tag_message with at most `max_in_flight` concurrent calls; output order
/// follows the input.
std::vector<TagOutcome> tag_all(Tagger& tagger, std::span<const TagRequest> requests, std::size_t max_in_flight,
                                const codebook::ValidationOptions& opts = {});

}  // namespace tag2cred::tagger
