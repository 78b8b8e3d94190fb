#include "tag2cred/codebook.hpp"

#include <algorithm>
#include <cctype>

#include "tag2cred/error.hpp"
#include "tag2cred/hash.hpp"
#include "tag2cred/resources.hpp"

namespace tag2cred::codebook {

namespace {

std::string fold(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    if (std::isspace(c)) continue;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::vector<std::string> split_values(std::string_view s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ';' || s[i] == ',' || s[i] == '|' || s[i] == '\n') {
      std::string_view piece = s.substr(start, i - start);
      while (!piece.empty() && std::isspace(static_cast<unsigned char>(piece.front()))) piece.remove_prefix(1);
      while (!piece.empty() && std::isspace(static_cast<unsigned char>(piece.back()))) piece.remove_suffix(1);
      if (!piece.empty()) parts.emplace_back(piece);
      start = i + 1;
    }
  }
  return parts;
}

void push_label(TagAssignment& a, Field f, const std::string& text) {
  const auto idx = find_label(f, text);
  if (!idx) {
    throw Error(Errc::UnknownLabel, std::string(field_name(f)) + ": \"" + text + "\"");
  }
  a.add(f, *idx);
}

}  // namespace

std::span<const std::string_view> labels(Field f) {
  switch (f) {
    case Field::Theme: return kThemeLabels;
    case Field::Claim: return kClaimLabels;
    case Field::Cta: return kCtaLabels;
    case Field::Evidence: return kEvidenceLabels;
  }
  return {};
}

std::string_view field_name(Field f) {
  static constexpr std::array<std::string_view, kFieldCount> kNames{"theme", "claim", "cta", "evidence"};
  return kNames[static_cast<std::size_t>(f)];
}

std::string_view field_json_key(Field f) {
  static constexpr std::array<std::string_view, kFieldCount> kKeys{"theme", "claim_types", "ctas", "evidence"};
  return kKeys[static_cast<std::size_t>(f)];
}

std::optional<Field> parse_field(std::string_view name) {
  const std::string n = fold(name);
  for (Field f : kAllFields) {
    if (n == field_name(f) || n == field_json_key(f)) return f;
  }
  if (n == "claims" || n == "claim_type") return Field::Claim;
  if (n == "calltoaction") return Field::Cta;
  return std::nullopt;
}

std::size_t field_offset(Field f) {
  std::size_t off = 0;
  for (Field g : kAllFields) {
    if (g == f) break;
    off += labels(g).size();
  }
  return off;
}

std::optional<int> find_label(Field f, std::string_view text) {
  const std::string key = fold(text);
  const auto ls = labels(f);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    if (fold(ls[i]) == key) return static_cast<int>(i);
  }
  return std::nullopt;
}

bool TagAssignment::has(Field f, int label) const {
  const auto& v = (*this)[f];
  return std::binary_search(v.begin(), v.end(), label);
}

void TagAssignment::add(Field f, int label) {
  auto& v = (*this)[f];
  auto it = std::lower_bound(v.begin(), v.end(), label);
  if (it == v.end() || *it != label) v.insert(it, label);
}

TagAssignment make_assignment(std::initializer_list<std::string_view> theme,
                              std::initializer_list<std::string_view> claim,
                              std::initializer_list<std::string_view> cta,
                              std::initializer_list<std::string_view> evidence) {
  TagAssignment a;
  const std::array<std::initializer_list<std::string_view>, kFieldCount> all{theme, claim, cta, evidence};
  for (Field f : kAllFields) {
    for (auto s : all[static_cast<std::size_t>(f)]) push_label(a, f, std::string(s));
  }
  return a;
}

TagAssignment from_json(const nlohmann::json& obj) {
  if (!obj.is_object()) throw Error(Errc::MalformedJson, "tagger output is not a JSON object: " + obj.dump());
  TagAssignment a;
  for (Field f : kAllFields) {
    const std::string key(field_json_key(f));
    auto it = obj.find(key);
    if (it == obj.end() && f == Field::Claim) it = obj.find("claim");
    if (it == obj.end() && f == Field::Cta) it = obj.find("cta");
    if (it == obj.end()) throw Error(Errc::MissingField, key);
    if (it->is_string()) {
      for (const auto& piece : split_values(it->get<std::string>())) push_label(a, f, piece);
    } else if (it->is_array()) {
      for (const auto& el : *it) {
        if (!el.is_string()) throw Error(Errc::MalformedJson, key + ": non-string entry " + el.dump());
        for (const auto& piece : split_values(el.get<std::string>())) push_label(a, f, piece);
      }
    } else {
      throw Error(Errc::MalformedJson, key + ": expected string or list, got " + it->dump());
    }
  }
  return a;
}

TagAssignment parse_tagger_output(std::string_view json_text) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error&) {
    // LLMs often wrap the object in prose or code fences.
    const auto open = json_text.find('{');
    const auto close = json_text.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
      throw Error(Errc::MalformedJson, std::string(json_text.substr(0, 200)));
    }
    try {
      obj = nlohmann::json::parse(json_text.substr(open, close - open + 1));
    } catch (const nlohmann::json::parse_error&) {
      throw Error(Errc::MalformedJson, std::string(json_text.substr(0, 200)));
    }
  }
  return from_json(obj);
}

nlohmann::json to_json(const TagAssignment& a) {
  nlohmann::json obj = nlohmann::json::object();
  for (Field f : kAllFields) {
    nlohmann::json arr = nlohmann::json::array();
    for (int l : a[f]) arr.push_back(std::string(labels(f)[static_cast<std::size_t>(l)]));
    obj[std::string(field_json_key(f))] = std::move(arr);
  }
  return obj;
}

std::vector<Violation> validate_assignment(const TagAssignment& a, const ValidationOptions& opts) {
  std::vector<Violation> out;
  auto count = [&](Field f) { return a[f].size(); };
  auto name = [](Field f, int l) { return std::string(labels(f)[static_cast<std::size_t>(l)]); };

  if (count(Field::Theme) < 1 || count(Field::Theme) > 2) {
    out.push_back({"theme_cardinality", "theme needs 1-2 labels, got " + std::to_string(count(Field::Theme))});
  }
  if (count(Field::Claim) < 1 || count(Field::Claim) > 3) {
    out.push_back({"claim_cardinality", "claim needs 1-3 labels, got " + std::to_string(count(Field::Claim))});
  }
  if (count(Field::Cta) < 1) out.push_back({"cta_cardinality", "cta needs at least one label"});
  if (count(Field::Evidence) < 1) out.push_back({"evidence_cardinality", "evidence needs at least one label"});

  for (Field f : kAllFields) {
    for (int l : a[f]) {
      if (l < 0 || static_cast<std::size_t>(l) >= labels(f).size()) {
        out.push_back({"unknown_label", std::string(field_name(f)) + " index " + std::to_string(l)});
      }
    }
  }

  const bool verifiable = a.has(Field::Claim, label::kVerifiable);
  if (verifiable && a.has(Field::Claim, label::kRumour)) {
    out.push_back({"forbidden_pair", name(Field::Claim, label::kRumour) + " + " + name(Field::Claim, label::kVerifiable)});
  }
  if (verifiable && a.has(Field::Claim, label::kAnnouncement)) {
    out.push_back({"forbidden_pair",
                   name(Field::Claim, label::kAnnouncement) + " + " + name(Field::Claim, label::kVerifiable)});
  }
  if (a.has(Field::Claim, label::kNoSubstantiveClaim) && count(Field::Claim) > 1) {
    out.push_back({"forbidden_pair", name(Field::Claim, label::kNoSubstantiveClaim) + " + any other"});
  }
  if (a.has(Field::Cta, label::kNoCta) && count(Field::Cta) > 1) {
    out.push_back({"no_cta_exclusive", "No CTA combined with another CTA"});
  }
  if (opts.none_evidence_exclusive && a.has(Field::Evidence, label::kNoneEvidence) && count(Field::Evidence) > 1) {
    out.push_back({"none_evidence_exclusive", "None / assertion only combined with other evidence"});
  }
  return out;
}

AgreementReport agreement_f1(std::span<const TagAssignment> predicted, std::span<const TagAssignment> gold) {
  if (predicted.size() != gold.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(predicted.size()) + " predictions vs " +
                                          std::to_string(gold.size()) + " gold rows");
  }
  AgreementReport r;
  for (Field f : kAllFields) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const auto& p = predicted[i][f];
      const auto& g = gold[i][f];
      for (int l : p) (std::binary_search(g.begin(), g.end(), l) ? tp : fp)++;
      for (int l : g) {
        if (!std::binary_search(p.begin(), p.end(), l)) ++fn;
      }
    }
    const std::size_t denom = 2 * tp + fp + fn;
    r.field_f1[static_cast<std::size_t>(f)] = denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  double sum = 0.0;
  for (double v : r.field_f1) sum += v;
  r.overall = sum / static_cast<double>(kFieldCount);
  return r;
}

nlohmann::json vocabulary_document() { return nlohmann::json::parse(resources::vocabulary_json()); }

std::string vocabulary_fingerprint() {
  std::string listing;
  for (Field f : kAllFields) {
    for (auto l : labels(f)) {
      listing += field_name(f);
      listing += '\t';
      listing += l;
      listing += '\n';
    }
  }
  return sha256_hex(listing);
}

}  // namespace tag2cred::codebook
