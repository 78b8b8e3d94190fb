#include <doctest.h>

#include <fstream>
#include <string>

#include "tag2cred/codebook.hpp"
#include "tag2cred/error.hpp"

using namespace tag2cred;
using namespace tag2cred::codebook;

namespace {

std::vector<nlohmann::json> gold_lines() {
  std::ifstream in(T2C_FIXTURES "/gold_rows.jsonl");
  std::vector<nlohmann::json> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

std::size_t total_labels(const TagAssignment& a) {
  std::size_t n = 0;
  for (const auto& v : a.labels) n += v.size();
  return n;
}

}  // namespace

TEST_CASE("vocabulary shape") {
  CHECK(labels(Field::Theme).size() == 11);
  CHECK(labels(Field::Claim).size() == 11);
  CHECK(labels(Field::Cta).size() == 7);
  CHECK(labels(Field::Evidence).size() == 6);
  CHECK(field_offset(Field::Theme) == 0);
  CHECK(field_offset(Field::Claim) == 11);
  CHECK(field_offset(Field::Cta) == 22);
  CHECK(field_offset(Field::Evidence) == 29);
  CHECK(parse_field("claim") == Field::Claim);
  CHECK(field_json_key(Field::Cta) == "ctas");
  CHECK(labels(Field::Claim)[label::kRumour] == "Rumour / unverified report");
  CHECK(labels(Field::Theme)[label::kConversation] == "Conversation/Chat/Other");
}

TEST_CASE("vocabulary fingerprint is pinned") {
  // Any edit to label text or order changes this and invalidates stored tags.
  CHECK(vocabulary_fingerprint() == "c55a14aa51e2c0c0ff78d3b13b29a1831081c51f27344d0805f62ea73423bbf3");
  const auto doc = vocabulary_document();
  CHECK(doc.at("version") == 1);
  REQUIRE(doc.at("fields").size() == kFieldCount);
  for (std::size_t i = 0; i < kFieldCount; ++i) {
    const auto& entry = doc.at("fields")[i];
    CHECK(entry.at("field") == field_name(kAllFields[i]));
    const auto ls = labels(kAllFields[i]);
    REQUIRE(entry.at("labels").size() == ls.size());
    for (std::size_t j = 0; j < ls.size(); ++j) CHECK(entry.at("labels")[j] == ls[j]);
  }
}

TEST_CASE("find_label ignores case and whitespace") {
  CHECK(find_label(Field::Cta, "buy/invest/donate") == label::kBuyInvest);
  CHECK(find_label(Field::Cta, "  NO   cta ") == label::kNoCta);
  CHECK_FALSE(find_label(Field::Cta, "Buy"));
}

TEST_CASE("gold rows parse and validate") {
  const auto rows = gold_lines();
  REQUIRE(rows.size() == 5);
  std::vector<TagAssignment> parsed;
  for (const auto& r : rows) {
    const auto a = from_json(r);
    CHECK(validate_assignment(a).empty());
    CHECK(from_json(to_json(a)) == a);
    CHECK(parse_tagger_output(r.dump()) == a);
    parsed.push_back(a);
  }
  CHECK(total_labels(parsed[0]) == 7);
  CHECK(parsed[0] == make_assignment({"Finance/Crypto"}, {"Scarcity/FOMO tactic", "Verifiable factual statement"},
                                     {"Join/Subscribe", "Visit external link / watch video"},
                                     {"Link/URL", "Statistics"}));
  CHECK(parsed[1].has(Field::Evidence, 4));
  CHECK(parsed[2].has(Field::Claim, label::kRumour));
  CHECK(total_labels(parsed[3]) == 4);
  CHECK(parsed[4].has(Field::Cta, label::kNoCta));
}

TEST_CASE("parse_tagger_output delimiters and errors") {
  const auto a = parse_tagger_output(
      R"({"theme":"Technology | Politics","claim_types":"Announcement\nOpinion / subjective statement","ctas":"No CTA","evidence":"Link/URL,Statistics"})");
  CHECK(a[Field::Theme] == std::vector<int>{2, 5});
  CHECK(a[Field::Claim].size() == 2);
  CHECK(a[Field::Evidence] == std::vector<int>{1, 3});
  CHECK_THROWS_WITH(parse_tagger_output("{not json"), doctest::Contains("MalformedJson"));
  CHECK_THROWS_WITH(parse_tagger_output(R"({"theme":"Technology","claim_types":"Announcement","ctas":"No CTA"})"),
                    doctest::Contains("MissingField"));
  CHECK_THROWS_WITH(
      parse_tagger_output(R"({"theme":"Astrology","claim_types":"Announcement","ctas":"No CTA","evidence":"Link/URL"})"),
      doctest::Contains("UnknownLabel"));
}

TEST_CASE("validation rules") {
  auto rules_of = [](const TagAssignment& a, ValidationOptions o = {}) {
    std::vector<std::string> r;
    for (const auto& v : validate_assignment(a, o)) r.push_back(v.rule);
    return r;
  };
  const auto ok = make_assignment({"Technology"}, {"Announcement"}, {"No CTA"}, {"None / assertion only"});
  CHECK(rules_of(ok).empty());

  auto three_themes = ok;
  three_themes[Field::Theme] = {0, 1, 2};
  CHECK(rules_of(three_themes) == std::vector<std::string>{"theme_cardinality"});

  auto four_claims = ok;
  four_claims[Field::Claim] = {2, 3, 4, 5};
  CHECK(rules_of(four_claims) == std::vector<std::string>{"claim_cardinality"});

  auto empty_cta = ok;
  empty_cta[Field::Cta].clear();
  CHECK(rules_of(empty_cta) == std::vector<std::string>{"cta_cardinality"});

  const auto rumour_verified = make_assignment({"Politics"}, {"Rumour / unverified report", "Verifiable factual statement"},
                                               {"Share / repost / like"}, {"Link/URL"});
  CHECK(rules_of(rumour_verified) == std::vector<std::string>{"forbidden_pair"});
  const auto announce_verified =
      make_assignment({"Politics"}, {"Announcement", "Verifiable factual statement"}, {"No CTA"}, {"Link/URL"});
  CHECK(rules_of(announce_verified) == std::vector<std::string>{"forbidden_pair"});
  const auto nosubst_plus =
      make_assignment({"Politics"}, {"No substantive claim", "Opinion / subjective statement"}, {"No CTA"}, {"Link/URL"});
  CHECK(rules_of(nosubst_plus) == std::vector<std::string>{"forbidden_pair"});

  const auto nocta_plus = make_assignment({"Sports"}, {"Announcement"}, {"No CTA", "Join/Subscribe"}, {"Link/URL"});
  CHECK(rules_of(nocta_plus) == std::vector<std::string>{"no_cta_exclusive"});

  const auto none_plus =
      make_assignment({"Sports"}, {"Announcement"}, {"Join/Subscribe"}, {"None / assertion only", "Link/URL"});
  CHECK(rules_of(none_plus) == std::vector<std::string>{"none_evidence_exclusive"});
  CHECK(rules_of(none_plus, {false}).empty());

  TagAssignment bad_index = ok;
  bad_index[Field::Cta] = {42};
  CHECK(rules_of(bad_index) == std::vector<std::string>{"unknown_label"});
}

TEST_CASE("agreement_f1 against hand counts") {
  // message 1: theme gold {0} pred {0,1}; message 2: theme gold {2} pred {2}
  // theme: tp 2, fp 1, fn 0 -> F1 = 4/5
  auto g1 = make_assignment({"Finance/Crypto"}, {"Announcement"}, {"No CTA"}, {"Link/URL"});
  auto p1 = make_assignment({"Finance/Crypto", "Public health & medicine"}, {"Announcement"}, {"No CTA"}, {"Link/URL"});
  // claim: tp 1, fp 1, fn 1 -> 1/2; cta: tp 1, fn 1 ... set below
  auto g2 = make_assignment({"Politics"}, {"Rumour / unverified report"}, {"Visit external link / watch video"},
                            {"Link/URL", "Statistics"});
  auto p2 = make_assignment({"Politics"}, {"Opinion / subjective statement"}, {"Share / repost / like"}, {"Link/URL"});
  const std::vector<TagAssignment> pred{p1, p2}, gold{g1, g2};
  const auto r = agreement_f1(pred, gold);
  CHECK(r.field_f1[0] == doctest::Approx(0.8));
  CHECK(r.field_f1[1] == doctest::Approx(0.5));   // tp 1, fp 1, fn 1
  CHECK(r.field_f1[2] == doctest::Approx(0.5));   // tp 1, fp 1, fn 1
  CHECK(r.field_f1[3] == doctest::Approx(0.8));   // tp 2, fp 0, fn 1
  CHECK(r.overall == doctest::Approx((0.8 + 0.5 + 0.5 + 0.8) / 4));

  const auto self = agreement_f1(gold, gold);
  CHECK(self.overall == 1.0);
  CHECK_THROWS_AS(agreement_f1(std::span(pred).first(1), gold), Error);
}
