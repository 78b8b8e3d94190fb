#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tag2cred/net.hpp"

namespace tag2cred::supervision {

enum class Credibility { High = 0, Medium = 1, Low = 2 };
enum class Factual { VeryHigh = 0, High = 1, MostlyFactual = 2, Mixed = 3, Low = 4, VeryLow = 5 };

inline constexpr int kCredibilityLevels = 3;
inline constexpr int kFactualLevels = 6;

/// Case, whitespace and punctuation folded ("mostly-factual" -> MostlyFactual).
std::optional<Credibility> parse_credibility(std::string_view s);
std::optional<Factual> parse_factual(std::string_view s);
std::string_view to_string(Credibility c);
std::string_view to_string(Factual f);

struct MbfcRecord {
  std::string domain;
  Credibility credibility = Credibility::High;
  Factual factual = Factual::VeryHigh;
  std::string bias;
  std::string media_type;
  std::string country;
};

struct Rating {
  Credibility credibility;
  Factual factual;
  bool operator==(const Rating&) const = default;
};

struct AuditRecord {
  std::string kind;
  std::string domain;
  std::string detail;
};

struct MbfcDump {
  std::vector<MbfcRecord> records;
  std::vector<AuditRecord> skipped;
};

/// CSV with header domain,credibility,factual_reporting[,bias,media_type,country].
/// Rows with unknown categories are skipped with an UnknownCategory audit entry.
MbfcDump parse_mbfc_csv(std::string_view text);
MbfcDump load_mbfc_csv(const std::string& path);

/// Modal (credibility, factual) pair per domain; ties prefer the higher
/// credibility, then the higher factual rating. Domains are lowercased and
/// stripped of one leading "www.".
std::map<std::string, Rating> canonicalize_mbfc(std::span<const MbfcRecord> records);

struct RiskComponents {
  double r_c;
  double r_f;
};

RiskComponents risk_components(Credibility c, Factual f);
double domain_risk(double r_c, double r_f);

struct DomainRisk {
  std::string domain;
  double r_c = 0.0;
  double r_f = 0.0;
  double risk = 0.0;
};

using RiskMap = std::map<std::string, DomainRisk>;
RiskMap build_risk_map(const std::map<std::string, Rating>& ratings);

struct MessageRisk {
  double r_msg;
  std::string supervising_domain;
};

/// Max risk over rated domains; ties go to the lexicographically smallest
/// domain. nullopt when no domain is rated.
std::optional<MessageRisk> message_risk(std::span<const std::string> domains, const RiskMap& risk);

enum class Label { Negative = 0, Positive = 1, Unlabeled, NoRatedDomain };
std::string_view to_string(Label l);
std::optional<Label> parse_label(std::string_view s);

struct Thresholds {
  double tau_low = 0.3;
  double tau_high = 0.8;
};

/// Throws Error(BadThresholds) when tau_low >= tau_high.
Label assign_label(double r_msg, const Thresholds& t = {});

struct Supervision {
  std::string message_id;
  std::optional<double> r_msg;
  std::optional<std::string> supervising_domain;
  Label label = Label::NoRatedDomain;
};

Supervision supervise(const std::string& message_id, std::span<const std::string> domains, const RiskMap& risk,
                      const Thresholds& t = {});

struct RatingClientConfig {
  std::string base_url;
  std::string auth_header = "X-API-Key";
  std::string auth_token_env;  // name of the environment variable holding the token
  double timeout_seconds = 10.0;
};

/// GET {base_url}/ratings?domain=<domain>; the response is a JSON object with
/// domain, credibility and factual_reporting (bias, media_type, country optional).
/// Throws Error(NotFound | Transport | ParseFailure).
MbfcRecord fetch_rating(const std::string& domain, net::HttpClient& client, const RatingClientConfig& config);

}  // namespace tag2cred::supervision
