#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace tag2cred::codebook {

enum class Field : std::size_t { Theme = 0, Claim = 1, Cta = 2, Evidence = 3 };
inline constexpr std::size_t kFieldCount = 4;
inline constexpr std::array<Field, kFieldCount> kAllFields{Field::Theme, Field::Claim, Field::Cta,
                                                           Field::Evidence};

inline constexpr std::array<std::string_view, 11> kThemeLabels{
    "Finance/Crypto",        "Public health & medicine", "Politics",
    "Crime & public safety", "News/Information",         "Technology",
    "Lifestyle & well-being", "Gaming/Gambling",         "Sports",
    "Conversation/Chat/Other", "Other (Theme)"};

inline constexpr std::array<std::string_view, 11> kClaimLabels{
    "No substantive claim",
    "Announcement",
    "Speculative forecast / prediction",
    "Promotional hype / exaggerated profit guarantee",
    "Scarcity/FOMO tactic",
    "Misleading context / cherry-picking",
    "Emotional appeal / fear-mongering",
    "Rumour / unverified report",
    "Opinion / subjective statement",
    "Verifiable factual statement",
    "Other (Claim type)"};

inline constexpr std::array<std::string_view, 7> kCtaLabels{
    "Share / repost / like",  "Engage/Ask questions", "Visit external link / watch video",
    "Buy / invest / donate",  "Join/Subscribe",       "Attend event / livestream",
    "No CTA"};

inline constexpr std::array<std::string_view, 6> kEvidenceLabels{
    "None / assertion only", "Link/URL",
    "Quotes/Testimony",      "Statistics",
    "Chart / price graph / TA diagram", "Other (Evidence)"};

inline constexpr std::size_t kVocabularySize =
    kThemeLabels.size() + kClaimLabels.size() + kCtaLabels.size() + kEvidenceLabels.size();
static_assert(kVocabularySize == 35);

// Frequently referenced labels (local indices within their field).
namespace label {
inline constexpr int kNoSubstantiveClaim = 0;
inline constexpr int kAnnouncement = 1;
inline constexpr int kRumour = 7;
inline constexpr int kVerifiable = 9;
inline constexpr int kNoCta = 6;
inline constexpr int kBuyInvest = 3;
inline constexpr int kNoneEvidence = 0;
inline constexpr int kConversation = 9;
}  // namespace label

std::span<const std::string_view> labels(Field f);
std::string_view field_name(Field f);      // "theme", "claim", "cta", "evidence"
std::string_view field_json_key(Field f);  // "theme", "claim_types", "ctas", "evidence"
std::optional<Field> parse_field(std::string_view name);
/// Offset of the field's first label in the 35-label global order.
std::size_t field_offset(Field f);

/// Case-insensitive lookup with all whitespace removed.
std::optional<int> find_label(Field f, std::string_view text);

/// Labels per field as sorted, unique local indices.
struct TagAssignment {
  std::array<std::vector<int>, kFieldCount> labels;

  std::vector<int>& operator[](Field f) { return labels[static_cast<std::size_t>(f)]; }
  const std::vector<int>& operator[](Field f) const { return labels[static_cast<std::size_t>(f)]; }
  bool has(Field f, int label) const;
  void add(Field f, int label);
  bool operator==(const TagAssignment&) const = default;
};

TagAssignment make_assignment(std::initializer_list<std::string_view> theme,
                              std::initializer_list<std::string_view> claim,
                              std::initializer_list<std::string_view> cta,
                              std::initializer_list<std::string_view> evidence);

/// Parses {"theme", "claim_types", "ctas", "evidence"}; each value a label
/// string, a list of strings, or a string delimited by ';', ',', '|' or newlines.
/// Throws Error(MalformedJson | MissingField | UnknownLabel).
TagAssignment parse_tagger_output(std::string_view json_text);
TagAssignment from_json(const nlohmann::json& obj);
nlohmann::json to_json(const TagAssignment& a);

struct Violation {
  std::string rule;
  std::string detail;
};

struct ValidationOptions {
  bool none_evidence_exclusive = true;
};

std::vector<Violation> validate_assignment(const TagAssignment& a, const ValidationOptions& opts = {});

struct AgreementReport {
  std::array<double, kFieldCount> field_f1{};
  double overall = 0.0;
};

/// Micro-averaged F1 per field over (message, label) indicator pairs; overall
/// is the unweighted mean of the four. Throws Error(LengthMismatch).
AgreementReport agreement_f1(std::span<const TagAssignment> predicted, std::span<const TagAssignment> gold);

/// Versioned vocabulary document (resources/vocabulary.v1.json).
nlohmann::json vocabulary_document();
/// SHA-256 of the ordered "field\tlabel" listing.
std::string vocabulary_fingerprint();

}  // namespace tag2cred::codebook
