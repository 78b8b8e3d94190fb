#include <doctest.h>

#include <algorithm>
#include <set>
#include <unordered_map>

#include "tag2cred/error.hpp"
#include "tag2cred/eval.hpp"
#include "tag2cred/synth.hpp"

using namespace tag2cred;
using namespace tag2cred::eval;

namespace {

std::set<std::string> groups_of(const std::vector<std::string>& g, const std::vector<std::size_t>& rows) {
  std::set<std::string> out;
  for (auto i : rows) out.insert(g[i]);
  return out;
}

bool disjoint(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::none_of(a.begin(), a.end(), [&](const std::string& x) { return b.count(x) > 0; });
}

struct Bundle {
  std::vector<std::string> ids, domains, channels;
  std::vector<int> y;
  std::vector<codebook::TagAssignment> tags;
  Labeled view() const { return {ids, y, domains, channels}; }
};

Bundle synth_bundle(std::size_t n, synth::Signal signal, std::uint64_t seed) {
  synth::SynthConfig cfg;
  cfg.n_messages = n;
  cfg.signal = signal;
  cfg.seed = seed;
  const auto c = synth::generate(cfg);
  std::unordered_map<std::string, std::size_t> at;
  for (std::size_t i = 0; i < c.messages.size(); ++i) at[c.messages[i].id] = i;
  Bundle b;
  for (const auto& t : c.truth) {
    if (t.domain.empty()) continue;
    const auto i = at.at(t.id);
    b.ids.push_back(t.id);
    b.domains.push_back(t.domain);
    b.channels.push_back(c.messages[i].channel_id);
    b.y.push_back(t.y);
    b.tags.push_back(c.tags[i]);
  }
  return b;
}

}  // namespace

TEST_CASE("domain-disjoint split") {
  std::vector<std::string> doms;
  for (int d = 0; d < 10; ++d) {
    for (int k = 0; k < 5 + d; ++k) doms.push_back("d" + std::to_string(d) + ".com");
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = domain_disjoint_split(doms, seed);
    const auto te = groups_of(doms, s.test), tr = groups_of(doms, s.train), va = groups_of(doms, s.val);
    CHECK(te.size() == 2);
    CHECK(disjoint(te, tr));
    CHECK(disjoint(te, va));
    CHECK(disjoint(tr, va));
    CHECK(s.train.size() + s.val.size() + s.test.size() == doms.size());
    CHECK(std::is_sorted(s.test.begin(), s.test.end()));
  }
  const auto a = domain_disjoint_split(doms, 3), b = domain_disjoint_split(doms, 3);
  CHECK(a.test == b.test);
  CHECK(a.val == b.val);
  const std::vector<std::string> four{"a", "b", "c", "d"};
  CHECK_THROWS_WITH(domain_disjoint_split(four, 0), doctest::Contains("TooFewDomains"));
}

TEST_CASE("channel-disjoint split") {
  SUBCASE("identical mixes tie, candidate 0 wins") {
    std::vector<std::string> ch;
    std::vector<int> y;
    for (int c = 0; c < 10; ++c) {
      for (int k = 0; k < 4; ++k) {
        ch.push_back("c" + std::to_string(c));
        y.push_back(k % 2);
      }
    }
    const auto s = channel_disjoint_split(ch, y, 1);
    CHECK(s.candidate == 0);
    CHECK(disjoint(groups_of(ch, s.test), groups_of(ch, s.train)));
  }
  SUBCASE("all-positive channel stays out of test") {
    std::vector<std::string> ch;
    std::vector<int> y;
    for (int c = 0; c < 6; ++c) {
      for (int k = 0; k < 10; ++k) {
        ch.push_back("c" + std::to_string(c));
        y.push_back(c == 0 ? 1 : k % 2);
      }
    }
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto s = channel_disjoint_split(ch, y, seed);
      CHECK(groups_of(ch, s.test).count("c0") == 0);
      const auto again = channel_disjoint_split(ch, y, seed);
      CHECK(again.test == s.test);
      CHECK(again.candidate == s.candidate);
    }
  }
  const std::vector<std::string> few{"a", "b", "c", "d"};
  CHECK_THROWS_WITH(channel_disjoint_split(few, std::vector<int>{0, 1, 0, 1}, 0), doctest::Contains("TooFewChannels"));
}

TEST_CASE("synthetic experiment: AUC, shuffled control, determinism") {
  const auto b = synth_bundle(4000, synth::Signal::AllFields, 3);
  ExperimentConfig cfg;
  cfg.seeds = {0, 1, 2};
  const auto r = run_experiment(b.view(), tag_features(b.tags, features::parse_field_subset("all")), cfg, "tags");
  CHECK(r.report.per_seed.size() == 3);
  CHECK(r.report.roc_auc.mean >= 0.95);
  CHECK(r.report.roc_auc.std <= 0.03);
  CHECK(r.predictions.size() == 3);

  const auto r2 = run_experiment(b.view(), tag_features(b.tags, features::parse_field_subset("all")), cfg, "tags");
  const std::vector<MetricsReport> a1{r.report}, a2{r2.report};
  CHECK(report_csv(a1) == report_csv(a2));
  CHECK(predictions_jsonl(r.predictions) == predictions_jsonl(r2.predictions));

  auto shuffled = b;
  Rng rng(99);
  rng.shuffle(std::span<int>(shuffled.y));
  const auto null = run_experiment(shuffled.view(), tag_features(shuffled.tags, features::parse_field_subset("all")), cfg);
  CHECK(null.report.roc_auc.mean >= 0.45);
  CHECK(null.report.roc_auc.mean <= 0.55);
}

TEST_CASE("cta-only generator ablation") {
  const auto b = synth_bundle(4000, synth::Signal::CtaOnly, 5);
  ExperimentConfig cfg;
  cfg.seeds = {0, 1};
  const std::vector<std::string> subsets{"all", "cta", "theme"};
  const auto rows = ablation_suite(b.view(), b.tags, subsets, cfg);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].subset == "all");
  CHECK(std::abs(rows[1].report.roc_auc.mean - rows[0].report.roc_auc.mean) <= 0.02);
  CHECK(std::abs(rows[2].report.roc_auc.mean - 0.5) <= 0.05);

  const std::vector<std::string> one{"style"};
  CHECK(ablation_suite(b.view(), b.tags, one, cfg).size() == 1);
  CHECK(default_ablation_subsets() == std::vector<std::string>{"all", "theme", "style", "cta", "no_cta"});
}

TEST_CASE("noise stress degrades") {
  const auto b = synth_bundle(4000, synth::Signal::AllFields, 7);
  ExperimentConfig cfg;
  const std::vector<double> rates{0.0, 0.1, 0.3};
  const auto pts = noise_stress(b.view(), b.tags, rates, cfg, 0);
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].metrics.macro_f1 > pts[1].metrics.macro_f1);
  CHECK(pts[1].metrics.macro_f1 > pts[2].metrics.macro_f1);
  CHECK(pts[0].metrics.n_test == pts[2].metrics.n_test);
}

TEST_CASE("stacked experiment") {
  const auto b = synth_bundle(3000, synth::Signal::AllFields, 9);
  ExperimentConfig cfg;
  cfg.seeds = {0, 1};
  std::vector<FeatureBuilder> bases{tag_features(b.tags, features::parse_field_subset("all")),
                                    tag_features(b.tags, features::parse_field_subset("cta"))};
  const std::vector<std::string> ids{"tags", "cta"};
  const auto s = run_stacked(b.view(), bases, ids, cfg);
  CHECK(s.report.name == "stacked");
  CHECK(s.report.roc_auc.mean >= 0.95);
  CHECK(s.models.at(0).base_ids == ids);
}

TEST_CASE("aggregate uses population std") {
  MetricsReport r;
  r.per_seed.resize(2);
  r.per_seed[0].roc_auc = 0.8;
  r.per_seed[1].roc_auc = 0.9;
  aggregate(r);
  CHECK(r.roc_auc.mean == doctest::Approx(0.85));
  CHECK(r.roc_auc.std == doctest::Approx(0.05));
  const auto j = to_json(r);
  CHECK(j.contains("per_seed"));
}
