#include <doctest.h>

#include <httplib.h>

#include <cstdlib>
#include <thread>

#include "tag2cred/error.hpp"
#include "tag2cred/net.hpp"
#include "tag2cred/supervision.hpp"

using namespace tag2cred;
using namespace tag2cred::supervision;

TEST_CASE("risk components and closed form") {
  const auto rc = risk_components(Credibility::Medium, Factual::Mixed);
  CHECK(rc.r_c == 0.5);
  CHECK(rc.r_f == doctest::Approx(0.6));
  const double R = domain_risk(rc.r_c, rc.r_f);
  CHECK(R == doctest::Approx(0.8));
  CHECK(assign_label(R) == Label::Positive);

  CHECK(domain_risk(0, 0) == 0.0);
  CHECK(domain_risk(1, 0) == 1.0);
  CHECK(domain_risk(0, 1) == 1.0);
  for (int c = 0; c < kCredibilityLevels; ++c) {
    for (int f = 0; f < kFactualLevels; ++f) {
      const auto x = risk_components(static_cast<Credibility>(c), static_cast<Factual>(f));
      const double r = domain_risk(x.r_c, x.r_f);
      CHECK(r >= 0.0);
      CHECK(r <= 1.0);
      CHECK((r == 0.0) == (c == 0 && f == 0));
      if (f + 1 < kFactualLevels) {
        const auto y = risk_components(static_cast<Credibility>(c), static_cast<Factual>(f + 1));
        CHECK(domain_risk(y.r_c, y.r_f) >= r);
      }
    }
  }
}

TEST_CASE("assign_label boundaries") {
  CHECK(assign_label(0.3) == Label::Negative);
  CHECK(assign_label(0.0) == Label::Negative);
  CHECK(assign_label(0.31) == Label::Unlabeled);
  CHECK(assign_label(0.79) == Label::Unlabeled);
  CHECK(assign_label(0.8) == Label::Positive);
  CHECK(assign_label(1.0) == Label::Positive);
  CHECK_THROWS_WITH_AS(assign_label(0.5, {0.8, 0.3}), doctest::Contains("BadThresholds"), Error);
  CHECK_THROWS_AS(assign_label(0.5, {0.5, 0.5}), Error);
}

TEST_CASE("category parsing folds case and punctuation") {
  CHECK(parse_credibility("HIGH") == Credibility::High);
  CHECK(parse_credibility(" medium ") == Credibility::Medium);
  CHECK(parse_factual("mostly-factual") == Factual::MostlyFactual);
  CHECK(parse_factual("Very High") == Factual::VeryHigh);
  CHECK(parse_factual("very_low") == Factual::VeryLow);
  CHECK_FALSE(parse_credibility("Satire"));
  CHECK(parse_label("1") == Label::Positive);
}

TEST_CASE("mbfc dump parsing and modal pair") {
  const auto dump = load_mbfc_csv(T2C_FIXTURES "/mbfc_small.csv");
  CHECK(dump.records.size() == 6);
  REQUIRE(dump.skipped.size() == 1);
  CHECK(dump.skipped[0].kind == "UnknownCategory");
  CHECK(dump.skipped[0].domain == "spoof.info");

  const auto ratings = canonicalize_mbfc(dump.records);
  CHECK(ratings.size() == 3);
  CHECK(ratings.at("example.com") == Rating{Credibility::High, Factual::VeryHigh});
  // one vote each: the higher credibility wins
  CHECK(ratings.at("tie.org") == Rating{Credibility::High, Factual::MostlyFactual});

  std::vector<MbfcRecord> recs{{"a.com", Credibility::Low, Factual::Low, "", "", ""},
                               {"a.com", Credibility::Low, Factual::Mixed, "", "", ""}};
  CHECK(canonicalize_mbfc(recs).at("a.com").factual == Factual::Mixed);
  CHECK_THROWS_WITH(load_mbfc_csv("/nonexistent/mbfc.csv"), doctest::Contains("MissingInput"));
}

TEST_CASE("message risk and supervision") {
  RiskMap risk;
  auto add = [&](std::string d, Credibility c, Factual f) {
    const auto x = risk_components(c, f);
    risk[d] = DomainRisk{d, x.r_c, x.r_f, domain_risk(x.r_c, x.r_f)};
  };
  add("b.com", Credibility::Low, Factual::Low);
  add("a.com", Credibility::Low, Factual::Mixed);
  add("z.com", Credibility::Low, Factual::Low);
  add("safe.org", Credibility::High, Factual::VeryHigh);

  const std::vector<std::string> ds{"z.com", "unrated.io", "b.com", "safe.org"};
  const auto m = message_risk(ds, risk);
  REQUIRE(m);
  CHECK(m->r_msg == 1.0);
  CHECK(m->supervising_domain == "b.com");  // tie on 1.0 goes to the smaller name

  const std::vector<std::string> none{"unrated.io"};
  CHECK_FALSE(message_risk(none, risk));
  const auto s = supervise("m1", none, risk);
  CHECK(s.label == Label::NoRatedDomain);
  CHECK_FALSE(s.r_msg);

  const std::vector<std::string> safe{"safe.org"};
  CHECK(supervise("m2", safe, risk).label == Label::Negative);
  CHECK_THROWS_AS(supervise("m3", none, risk, {0.9, 0.1}), Error);
}

TEST_CASE("fetch_rating against a local server") {
  httplib::Server srv;
  std::string seen_key;
  srv.Get("/ratings", [&](const httplib::Request& req, httplib::Response& res) {
    seen_key = req.get_header_value("X-API-Key");
    const auto d = req.get_param_value("domain");
    if (d == "good.com") {
      res.set_content(R"({"domain":"good.com","credibility":"High","factual_reporting":"Mostly Factual"})",
                      "application/json");
    } else if (d == "broken.com") {
      res.set_content("<html>", "text/html");
    } else if (d == "weird.com") {
      res.set_content(R"({"credibility":"Satire","factual_reporting":"High"})", "application/json");
    } else {
      res.status = 404;
    }
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  setenv("T2C_TEST_MBFC_TOKEN", "sekrit", 1);
  RatingClientConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/";
  cfg.auth_token_env = "T2C_TEST_MBFC_TOKEN";
  auto client = net::make_http_client(5.0);

  const auto rec = fetch_rating("good.com", *client, cfg);
  CHECK(rec.credibility == Credibility::High);
  CHECK(rec.factual == Factual::MostlyFactual);
  CHECK(seen_key == "sekrit");
  CHECK_THROWS_WITH(fetch_rating("missing.com", *client, cfg), doctest::Contains("NotFound"));
  CHECK_THROWS_WITH(fetch_rating("broken.com", *client, cfg), doctest::Contains("ParseFailure"));
  CHECK_THROWS_WITH(fetch_rating("weird.com", *client, cfg), doctest::Contains("ParseFailure"));

  srv.stop();
  th.join();

  CHECK_THROWS_WITH(fetch_rating("good.com", *client, cfg), doctest::Contains("Transport"));
}
