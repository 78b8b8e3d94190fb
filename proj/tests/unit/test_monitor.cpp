#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "tag2cred/error.hpp"
#include "tag2cred/monitor.hpp"
#include "tag2cred/rng.hpp"
#include "tag2cred/synth.hpp"
#include "tag2cred/timeutil.hpp"

using namespace tag2cred;
using namespace tag2cred::monitor;
using codebook::Field;
namespace cb = codebook;

namespace {

ScoredMessage msg(std::size_t i, double p, cb::TagAssignment a, std::int64_t ts = 1746403200) {
  ScoredMessage m;
  char buf[16];
  std::snprintf(buf, sizeof buf, "m%05zu", i);
  m.id = buf;
  m.channel_id = "c";
  m.timestamp = ts;
  m.assignment = std::move(a);
  m.p_hat = p;
  return m;
}

cb::TagAssignment simple(std::string_view theme, std::string_view cta) {
  return cb::make_assignment({theme}, {"Announcement"}, {cta}, {"None / assertion only"});
}

// Tail of 100 (p = 0.99) and rest of 1900 (p = 0.1). Buy is in 50% of the
// tail and 5% of the rest; themes split 30/70 in both groups.
std::vector<ScoredMessage> planted() {
  std::vector<ScoredMessage> out;
  for (std::size_t i = 0; i < 2000; ++i) {
    const bool tail = i < 100;
    const std::size_t j = tail ? i : i - 100;
    const bool buy = tail ? j < 50 : j < 95;
    const bool politics = tail ? j % 10 < 3 : j % 10 < 3;
    out.push_back(msg(i, tail ? 0.99 : 0.1, simple(politics ? "Politics" : "Technology",
                                                     buy ? "Buy / invest / donate" : "Share / repost / like")));
  }
  return out;
}

const EnrichmentRow& row_for(const std::vector<EnrichmentRow>& rows, Field f, int label) {
  for (const auto& r : rows) {
    if (r.tag.field == f && r.tag.label == label) return r;
  }
  throw std::runtime_error("row not found");
}

// Informative-prior log-odds written out directly from the definition.
double oracle_z(double yt, double nt, double yr, double nr, double a0) {
  const double at = a0 * (yt + yr) / (nt + nr);
  const double d = std::log((yt + at) / (nt + a0 - yt - at)) - std::log((yr + at) / (nr + a0 - yr - at));
  return d / std::sqrt(1.0 / (yt + at) + 1.0 / (yr + at));
}

}  // namespace

TEST_CASE("risk mass and shares") {
  std::vector<ScoredMessage> ms;
  for (std::size_t i = 0; i < 4; ++i) ms.push_back(msg(i, 1.0, simple(i < 2 ? "Politics" : "Sports", "No CTA")));
  const Tag politics{Field::Theme, 2};
  CHECK(risk_mass(ms) == 4.0);
  CHECK(risk_share(ms, politics) == vol_share(ms, politics));

  std::vector<ScoredMessage> two{msg(0, 0.5, simple("Politics", "No CTA")), msg(1, 1.5, simple("Sports", "No CTA"))};
  CHECK(risk_share(two, politics) == doctest::Approx(0.25));
  CHECK_THROWS_AS(vol_share(std::span<const ScoredMessage>{}, politics), Error);
  std::vector<ScoredMessage> zero{msg(0, 0.0, simple("Politics", "No CTA"))};
  CHECK(risk_mass(zero) == 0.0);
  CHECK_THROWS_AS(risk_share(zero, politics), Error);

  // partition vs overlap
  double theme_sum = 0;
  for (const auto& r : share_table(ms)) {
    if (r.tag.field == Field::Theme) theme_sum += r.vol_share;
  }
  CHECK(theme_sum == doctest::Approx(1.0));
  std::vector<ScoredMessage> multi{
      msg(0, 1.0, cb::make_assignment({"Politics", "Sports"}, {"Announcement"}, {"No CTA"}, {"Link/URL"}))};
  double multi_sum = 0;
  for (const auto& r : share_table(multi)) {
    if (r.tag.field == Field::Theme) multi_sum += r.vol_share;
  }
  CHECK(multi_sum > 1.0);
  CHECK(all_tags().size() == 35);
  CHECK(all_tags()[25].name() == "cta=Buy / invest / donate");
}

TEST_CASE("high-risk tail") {
  std::vector<ScoredMessage> ms;
  Rng rng(1);
  for (std::size_t i = 0; i < 100; ++i) ms.push_back(msg(i, rng.uniform(), simple("Politics", "No CTA")));
  const auto t = high_risk_tail(ms, 0.05);
  CHECK(t.members.size() == 5);
  for (std::size_t i = 0; i < ms.size(); ++i) {
    CHECK(t.in_tail[i] == (std::find(t.members.begin(), t.members.end(), i) != t.members.end()));
    if (t.in_tail[i]) CHECK(ms[i].p_hat >= t.threshold);
    if (!t.in_tail[i]) CHECK(ms[i].p_hat <= t.threshold);
  }
  for (std::size_t n : {1u, 19u, 20u, 21u, 999u, 1001u}) {
    std::vector<ScoredMessage> eq;
    for (std::size_t i = 0; i < n; ++i) eq.push_back(msg(n - i, 0.5, simple("Politics", "No CTA")));
    const auto te = high_risk_tail(eq, 0.05);
    REQUIRE(te.members.size() == static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n))));
    // equal scores: the smallest ids, which sit at the end of this list
    for (auto k : te.members) CHECK(k >= n - te.members.size());
  }
  CHECK_THROWS_AS(high_risk_tail(std::span<const ScoredMessage>{}, 0.05), Error);
  CHECK_THROWS_AS(high_risk_tail(ms, 0.0), Error);
}

TEST_CASE("planted enrichment") {
  const auto ms = planted();
  const auto tail = high_risk_tail(ms, 0.05);
  REQUIRE(tail.members.size() == 100);
  const auto rows = enrichment(ms, tail);
  const auto& buy = row_for(rows, Field::Cta, cb::label::kBuyInvest);
  CHECK(buy.z > 3.0);
  CHECK(buy.tail_count == 50);
  CHECK(buy.rest_count == 95);
  CHECK(buy.z == doctest::Approx(oracle_z(50, 100, 95, 1900, 0.01 * 2000)));
  const auto& politics = row_for(rows, Field::Theme, 2);
  CHECK(std::abs(politics.z) < 0.5);
  CHECK(buy.lift == doctest::Approx(0.5 / (145.0 / 2000.0)));
  CHECK((buy.delta > 0) == (buy.z > 0));
}

TEST_CASE("log-odds properties") {
  const std::vector<double> tail{30, 10, 0, 5}, rest{100, 300, 40, 60};
  const auto fwd = log_odds_z(Field::Evidence, tail, rest);
  const auto rev = log_odds_z(Field::Evidence, rest, tail);
  for (const auto& r : fwd) {
    const auto& s = row_for(rev, Field::Evidence, r.tag.label);
    CHECK(r.z == doctest::Approx(-s.z));
    CHECK(r.z == doctest::Approx(r.delta / std::sqrt(r.variance)));
  }
  for (std::size_t i = 1; i < fwd.size(); ++i) CHECK(fwd[i - 1].z >= fwd[i].z);

  // proportions converge -> z shrinks
  double prev = 1e9;
  for (double eps : {0.2, 0.1, 0.05, 0.0}) {
    const std::vector<double> t2{100 * (0.5 + eps), 100 * (0.5 - eps)}, r2{1000 * 0.5, 1000 * 0.5};
    const double z = std::abs(log_odds_z(Field::Cta, t2, r2)[0].z);
    CHECK(z < prev);
    prev = z;
  }
  CHECK(prev < 1e-9);
}

TEST_CASE("tail lift") {
  std::vector<ScoredMessage> ms;
  for (std::size_t i = 0; i < 100; ++i) {
    ms.push_back(msg(i, i < 5 ? 0.9 : 0.1, simple("Politics", i < 5 ? "Buy / invest / donate" : "No CTA")));
  }
  const auto tail = high_risk_tail(ms, 0.05);
  CHECK(tail_lift(ms, tail, {Field::Cta, cb::label::kBuyInvest}) == doctest::Approx(20.0));
  CHECK(tail_lift(ms, tail, {Field::Theme, 2}) == doctest::Approx(1.0));
  CHECK_THROWS_WITH(tail_lift(ms, tail, {Field::Theme, 0}), doctest::Contains("ZeroShare"));
}

TEST_CASE("prototypes") {
  std::vector<ScoredMessage> same;
  for (std::size_t i = 0; i < 10; ++i) same.push_back(msg(i, 0.5, simple("Sports", "No CTA")));
  const auto t = build_prototypes(same, high_risk_tail(same, 0.1));
  CHECK(t.prototypes.size() == 1);
  CHECK(t.coverage.at(0) == 1.0);
  CHECK(t.prototypes[0].key ==
        "theme=Sports | claim=Announcement | cta=No CTA | evidence=None / assertion only");

  const auto ms = planted();
  const auto pt = build_prototypes(ms, high_risk_tail(ms, 0.05));
  CHECK(pt.prototypes.size() == 4);
  for (std::size_t i = 1; i < pt.prototypes.size(); ++i) CHECK(pt.prototypes[i - 1].count >= pt.prototypes[i].count);
  CHECK(pt.coverage.back() == doctest::Approx(1.0));
  CHECK(pt.tail_coverage.back() == doctest::Approx(1.0));
  std::size_t total = 0;
  for (const auto& p : pt.prototypes) total += p.count;
  CHECK(total == ms.size());
  CHECK(prototype_key(ms[pt.prototypes.size()].assignment) == pt.prototypes[pt.prototype_of[pt.prototypes.size()]].key);
}

TEST_CASE("k-means and silhouette") {
  SUBCASE("one-hot points, k clusters") {
    std::vector<std::vector<double>> pts;
    for (std::size_t i = 0; i < 6; ++i) {
      std::vector<double> v(6, 0.0);
      v[i] = 1.0;
      pts.push_back(v);
    }
    const auto r = kmeans(pts, 6, 0, 10, 100, 1e-6);
    CHECK(r.inertia == doctest::Approx(0.0));
    std::set<std::size_t> used(r.assignment.begin(), r.assignment.end());
    CHECK(used.size() == 6);
  }
  SUBCASE("two blobs") {
    Rng rng(3);
    std::vector<std::vector<double>> pts;
    std::vector<std::size_t> truth;
    for (std::size_t i = 0; i < 60; ++i) {
      const double cx = i < 30 ? 0.0 : 5.0;
      pts.push_back({cx + 0.3 * rng.normal(), cx + 0.3 * rng.normal()});
      truth.push_back(i < 30 ? 0 : 1);
    }
    const auto r = kmeans(pts, 2, 1, 10, 100, 1e-6);
    for (std::size_t i = 0; i < 60; ++i) CHECK((r.assignment[i] == r.assignment[0]) == (truth[i] == 0));
    CHECK(silhouette(pts, r.assignment) > 0.5);
    CHECK(kmeans(pts, 2, 1, 10, 100, 1e-6).assignment == r.assignment);
  }
  const std::vector<std::vector<double>> one{{0.0}, {1.0}};
  CHECK(silhouette(one, std::vector<std::size_t>{0, 0}) == 0.0);
}

TEST_CASE("families") {
  // 30 distinct prototypes from random valid assignments
  Rng rng(5);
  std::vector<ScoredMessage> ms;
  for (std::size_t i = 0; i < 3000; ++i) ms.push_back(msg(i, rng.uniform(), synth::random_assignment(rng)));
  const auto pt = build_prototypes(ms, high_risk_tail(ms, 0.05));
  REQUIRE(pt.prototypes.size() >= 25);
  FamilyOptions fo;
  fo.seed = 2;
  const auto f = cluster_families(pt.prototypes, fo);
  CHECK(f.family_of.size() == pt.prototypes.size());
  std::vector<std::size_t> sizes(26, 0);
  for (auto x : f.family_of) {
    REQUIRE(x >= 1);
    REQUIRE(x <= 25);
    ++sizes[x];
  }
  for (std::size_t k = 2; k <= 25; ++k) CHECK(sizes[k - 1] >= sizes[k]);
  CHECK(f.vocabulary.size() == 35);
  CHECK(f.vocabulary.front() == "theme:Finance/Crypto");
  CHECK(cluster_families(pt.prototypes, fo).family_of == f.family_of);
  CHECK(f.silhouette >= -1.0);
  CHECK(f.silhouette <= 1.0);

  const std::vector<Prototype> few(pt.prototypes.begin(), pt.prototypes.begin() + 5);
  CHECK_THROWS_WITH(cluster_families(few, fo), doctest::Contains("TooFewPrototypes"));
}

TEST_CASE("jensen-shannon divergence") {
  const std::vector<double> p{1, 2, 3}, q{3, 2, 1};
  CHECK(jsd(p, p) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(jsd(p, std::vector<double>{2, 4, 6}) <= 1e-12);
  CHECK(jsd(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == doctest::Approx(std::log(2.0)));
  CHECK(jsd(p, q) == doctest::Approx(jsd(q, p)));
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> a(5), b(5);
    for (auto& v : a) v = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
    for (auto& v : b) v = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
    a[0] += 1e-3;
    b[1] += 1e-3;
    const double d = jsd(a, b);
    CHECK(d >= 0.0);
    CHECK(d <= std::log(2.0));
  }
  CHECK_THROWS_AS(jsd(p, std::vector<double>{1, 2}), Error);
}

TEST_CASE("weekly drift filters small weeks") {
  std::vector<WeekCounts> w{{"2025-W19", {100, 100}, 200}, {"2025-W20", {10, 10}, 20}, {"2025-W21", {100, 100}, 200},
                            {"2025-W22", {200, 0}, 200}};
  const auto d = weekly_js_drift(w);
  REQUIRE(d.size() == 2);
  CHECK(d[0].from_week == "2025-W19");
  CHECK(d[0].to_week == "2025-W21");
  CHECK(d[0].jsd == doctest::Approx(0.0));
  CHECK(d[1].jsd > 0.0);
}

TEST_CASE("peak to median") {
  CHECK(peak_to_median(std::vector<double>{0.08, 0.08, 0.24}) == doctest::Approx(3.0));
  CHECK(peak_to_median(std::vector<double>{0.1, 0.1, 0.1, 0.1}) == doctest::Approx(1.0));
  CHECK(peak_to_median(std::vector<double>{0.0817, 0.05, 0.235, 0.09, 0.07}) == doctest::Approx(0.235 / 0.0817));
  CHECK(0.235 / 0.0817 == doctest::Approx(2.876).epsilon(0.001));
  CHECK(peak_to_median(std::vector<double>{1, 2, 3, 10}) == doctest::Approx(4.0));  // midpoint median 2.5
  CHECK_THROWS_WITH(peak_to_median(std::vector<double>{0, 0, 1}), doctest::Contains("ZeroMedian"));
  CHECK_THROWS_WITH(peak_to_median(std::vector<double>{1, 1}), doctest::Contains("EmptySet"));
}

TEST_CASE("run_monitor on a synthetic window") {
  synth::SynthConfig cfg;
  cfg.n_messages = 6000;
  cfg.seed = 4;
  const auto c = synth::generate(cfg);
  std::unordered_map<std::string, double> p;
  for (const auto& t : c.truth) p[t.id] = t.p;
  std::vector<ScoredMessage> ms;
  for (std::size_t i = 0; i < c.messages.size(); ++i) {
    const auto& m = c.messages[i];
    ScoredMessage s;
    s.id = m.id;
    s.channel_id = m.channel_id;
    s.timestamp = m.timestamp;
    s.assignment = c.tags[i];
    s.p_hat = p.count(m.id) ? p[m.id] : 0.5;
    ms.push_back(s);
  }
  MonitorOptions o;
  o.model_id = "truth";
  const auto r = run_monitor(ms, o);
  CHECK(r.n == ms.size());
  CHECK(r.tail.members.size() == static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(ms.size()))));
  CHECK(r.families.has_value());
  CHECK(r.retained_weeks.size() >= 3);
  CHECK(r.drift.size() == r.retained_weeks.size() - 1);
  REQUIRE_FALSE(r.bursts.empty());
  // planted burst: Buy / invest is boosted in one week
  bool buy_found = false;
  for (std::size_t i = 0; i < std::min<std::size_t>(3, r.bursts.size()); ++i) {
    buy_found |= r.bursts[i].tag.field == Field::Cta && r.bursts[i].tag.label == cb::label::kBuyInvest;
  }
  CHECK(buy_found);

  const auto again = run_monitor(ms, o);
  CHECK(enrichment_csv(again) == enrichment_csv(r));
  CHECK(prototype_csv(again) == prototype_csv(r));
  CHECK(family_csv(again) == family_csv(r));
  CHECK(drift_csv(again) == drift_csv(r));
  const auto js = summary_json(r, o);
  CHECK(js.at("model_id") == "truth");
  CHECK(js.at("tail_size") == r.tail.members.size());

  const auto rt = scored_from_json(to_json(ms[0]));
  CHECK(rt.id == ms[0].id);
  CHECK(rt.week == iso_week_key(ms[0].timestamp));
  CHECK(rt.assignment == ms[0].assignment);
  auto bad = to_json(ms[0]);
  bad["p_hat"] = 1.5;
  CHECK_THROWS_AS(scored_from_json(bad), Error);
}

TEST_CASE("iso week keys") {
  // expected values from an independent calendar implementation
  CHECK(iso_week_key(1746403200) == "2025-W19");
  CHECK(iso_week_key(1747007999) == "2025-W19");
  CHECK(iso_week_key(1747008000) == "2025-W20");
  CHECK(iso_week_key(1735516800) == "2025-W01");
  CHECK(iso_week_key(1609675200) == "2020-W53");
  CHECK(week_start(1747007999) == 1746403200);
}
