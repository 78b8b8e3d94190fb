#include "tag2cred/supervision.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdlib>
#include <tuple>

#include <json.hpp>

#include "tag2cred/error.hpp"
#include "tag2cred/io.hpp"

namespace tag2cred::supervision {

namespace {

std::string fold(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::string normalize_domain(std::string_view d) {
  std::string s;
  for (unsigned char c : d) {
    if (!std::isspace(c)) s.push_back(static_cast<char>(std::tolower(c)));
  }
  if (const auto p = s.find("://"); p != std::string::npos) s.erase(0, p + 3);
  if (const auto p = s.find_first_of("/?#"); p != std::string::npos) s.erase(p);
  while (!s.empty() && s.back() == '.') s.pop_back();
  if (s.rfind("www.", 0) == 0) s.erase(0, 4);
  return s;
}

std::string url_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '.' || c == '_' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 15]);
    }
  }
  return out;
}

}  // namespace

std::optional<Credibility> parse_credibility(std::string_view s) {
  std::string f = fold(s);
  if (f.size() > 11 && f.ends_with("credibility")) f.resize(f.size() - 11);
  if (f == "high") return Credibility::High;
  if (f == "medium") return Credibility::Medium;
  if (f == "low") return Credibility::Low;
  return std::nullopt;
}

std::optional<Factual> parse_factual(std::string_view s) {
  const std::string f = fold(s);
  if (f == "veryhigh") return Factual::VeryHigh;
  if (f == "high") return Factual::High;
  if (f == "mostlyfactual") return Factual::MostlyFactual;
  if (f == "mixed") return Factual::Mixed;
  if (f == "low") return Factual::Low;
  if (f == "verylow") return Factual::VeryLow;
  return std::nullopt;
}

std::string_view to_string(Credibility c) {
  static constexpr std::array<std::string_view, 3> k{"High", "Medium", "Low"};
  return k[static_cast<std::size_t>(c)];
}

std::string_view to_string(Factual f) {
  static constexpr std::array<std::string_view, 6> k{"VeryHigh", "High", "MostlyFactual", "Mixed", "Low", "VeryLow"};
  return k[static_cast<std::size_t>(f)];
}

MbfcDump parse_mbfc_csv(std::string_view text) {
  const auto rows = io::parse_csv(text);
  if (rows.empty()) throw Error(Errc::ParseFailure, "MBFC dump is empty");
  const auto& header = rows.front();
  auto col = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (fold(header[i]) == fold(name)) return i;
    }
    return std::nullopt;
  };
  const auto c_dom = col("domain");
  const auto c_cred = col("credibility");
  auto c_fact = col("factual_reporting");
  if (!c_fact) c_fact = col("factual");
  if (!c_dom || !c_cred || !c_fact) {
    throw Error(Errc::ParseFailure, "MBFC header must contain domain, credibility, factual_reporting");
  }
  const auto c_bias = col("bias");
  const auto c_media = col("media_type");
  const auto c_country = col("country");

  MbfcDump dump;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto get = [&](std::optional<std::size_t> c) -> std::string {
      return c && *c < row.size() ? row[*c] : std::string();
    };
    const std::string domain = normalize_domain(get(c_dom));
    if (domain.empty()) {
      dump.skipped.push_back({"ParseFailure", "", "row " + std::to_string(r + 1) + ": empty domain"});
      continue;
    }
    const auto cred = parse_credibility(get(c_cred));
    const auto fact = parse_factual(get(c_fact));
    if (!cred || !fact) {
      dump.skipped.push_back({"UnknownCategory", domain,
                              "credibility=\"" + get(c_cred) + "\" factual=\"" + get(c_fact) + "\""});
      continue;
    }
    dump.records.push_back({domain, *cred, *fact, get(c_bias), get(c_media), get(c_country)});
  }
  return dump;
}

MbfcDump load_mbfc_csv(const std::string& path) {
  if (!io::file_exists(path)) throw Error(Errc::MissingInput, "MBFC dump not found: " + path);
  return parse_mbfc_csv(io::read_file(path));
}

std::map<std::string, Rating> canonicalize_mbfc(std::span<const MbfcRecord> records) {
  // domain -> (credibility, factual) -> count
  std::map<std::string, std::map<std::pair<int, int>, int>> counts;
  for (const auto& r : records) {
    ++counts[normalize_domain(r.domain)][{static_cast<int>(r.credibility), static_cast<int>(r.factual)}];
  }
  std::map<std::string, Rating> out;
  for (const auto& [domain, pairs] : counts) {
    // Map order is ascending rank, i.e. best ratings first; strict > keeps the
    // first (best) pair among equal counts.
    std::pair<int, int> best{};
    int best_n = -1;
    for (const auto& [pair, n] : pairs) {
      if (n > best_n) {
        best = pair;
        best_n = n;
      }
    }
    out.emplace(domain, Rating{static_cast<Credibility>(best.first), static_cast<Factual>(best.second)});
  }
  return out;
}

RiskComponents risk_components(Credibility c, Factual f) {
  return {static_cast<double>(static_cast<int>(c)) / 2.0, static_cast<double>(static_cast<int>(f)) / 5.0};
}

double domain_risk(double r_c, double r_f) { return 1.0 - (1.0 - r_c) * (1.0 - r_f); }

RiskMap build_risk_map(const std::map<std::string, Rating>& ratings) {
  RiskMap out;
  for (const auto& [domain, rating] : ratings) {
    const auto rc = risk_components(rating.credibility, rating.factual);
    out.emplace(domain, DomainRisk{domain, rc.r_c, rc.r_f, domain_risk(rc.r_c, rc.r_f)});
  }
  return out;
}

std::optional<MessageRisk> message_risk(std::span<const std::string> domains, const RiskMap& risk) {
  std::optional<MessageRisk> best;
  for (const auto& d : domains) {
    const auto it = risk.find(d);
    if (it == risk.end()) continue;
    const double r = it->second.risk;
    if (!best || r > best->r_msg || (r == best->r_msg && d < best->supervising_domain)) {
      best = MessageRisk{r, d};
    }
  }
  return best;
}

std::string_view to_string(Label l) {
  switch (l) {
    case Label::Negative: return "0";
    case Label::Positive: return "1";
    case Label::Unlabeled: return "unlabeled";
    case Label::NoRatedDomain: return "no_rated_domain";
  }
  return "";
}

std::optional<Label> parse_label(std::string_view s) {
  if (s == "0") return Label::Negative;
  if (s == "1") return Label::Positive;
  if (s == "unlabeled") return Label::Unlabeled;
  if (s == "no_rated_domain") return Label::NoRatedDomain;
  return std::nullopt;
}

Label assign_label(double r_msg, const Thresholds& t) {
  if (!(t.tau_low < t.tau_high)) {
    throw Error(Errc::BadThresholds, "tau_low=" + io::fmt_double(t.tau_low) + " must be below tau_high=" +
                                         io::fmt_double(t.tau_high));
  }
  if (r_msg <= t.tau_low) return Label::Negative;
  if (r_msg >= t.tau_high) return Label::Positive;
  return Label::Unlabeled;
}

Supervision supervise(const std::string& message_id, std::span<const std::string> domains, const RiskMap& risk,
                      const Thresholds& t) {
  Supervision s;
  s.message_id = message_id;
  const auto mr = message_risk(domains, risk);
  if (!mr) {
    assign_label(0.0, t);  // still validates the thresholds
    s.label = Label::NoRatedDomain;
    return s;
  }
  s.r_msg = mr->r_msg;
  s.supervising_domain = mr->supervising_domain;
  s.label = assign_label(mr->r_msg, t);
  return s;
}

MbfcRecord fetch_rating(const std::string& domain, net::HttpClient& client, const RatingClientConfig& config) {
  std::string base = config.base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  net::Headers headers{{"Accept", "application/json"}};
  if (!config.auth_token_env.empty()) {
    if (const char* tok = std::getenv(config.auth_token_env.c_str())) headers.emplace_back(config.auth_header, tok);
  }
  const auto resp = client.get(base + "/ratings?domain=" + url_encode(domain), headers);
  if (resp.status == 404) throw Error(Errc::NotFound, domain);
  if (resp.status < 200 || resp.status >= 300) {
    throw Error(Errc::Transport, domain + ": HTTP " + std::to_string(resp.status));
  }
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(resp.body);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(Errc::ParseFailure, domain + ": body is not JSON");
  }
  auto str = [&](const char* key) -> std::optional<std::string> {
    if (!body.is_object()) return std::nullopt;
    const auto it = body.find(key);
    if (it == body.end() || !it->is_string()) return std::nullopt;
    return it->get<std::string>();
  };
  const auto cred_s = str("credibility");
  auto fact_s = str("factual_reporting");
  if (!fact_s) fact_s = str("factual");
  if (!cred_s || !fact_s) throw Error(Errc::ParseFailure, domain + ": missing credibility/factual_reporting");
  const auto cred = parse_credibility(*cred_s);
  const auto fact = parse_factual(*fact_s);
  if (!cred || !fact) {
    throw Error(Errc::ParseFailure, domain + ": unknown category \"" + *cred_s + "\"/\"" + *fact_s + "\"");
  }
  MbfcRecord rec;
  rec.domain = normalize_domain(str("domain").value_or(domain));
  rec.credibility = *cred;
  rec.factual = *fact;
  rec.bias = str("bias").value_or("");
  rec.media_type = str("media_type").value_or("");
  rec.country = str("country").value_or("");
  return rec;
}

}  // namespace tag2cred::supervision
