#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tag2cred/codebook.hpp"

namespace tag2cred::monitor {

struct ScoredMessage {
  std::string id;
  std::string channel_id;
  std::int64_t timestamp = 0;
  std::string week;  // ISO week key, derived from timestamp when empty
  codebook::TagAssignment assignment;
  double p_hat = 0.0;
};

ScoredMessage scored_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScoredMessage& m);

struct Tag {
  codebook::Field field;
  int label;
  std::string name() const;  // "cta=Buy / invest / donate"
};
std::vector<Tag> all_tags();

double risk_mass(std::span<const ScoredMessage> msgs);
/// Throw Error(EmptySet) when the set is empty (or, for risk_share, has zero mass).
double risk_share(std::span<const ScoredMessage> msgs, const Tag& t);
double vol_share(std::span<const ScoredMessage> msgs, const Tag& t);

struct ShareRow {
  Tag tag;
  std::size_t count = 0;
  double mass = 0.0;
  double vol_share = 0.0;
  double risk_share = 0.0;
};
std::vector<ShareRow> share_table(std::span<const ScoredMessage> msgs);

struct Tail {
  std::vector<std::size_t> members;  // indices into the message list
  std::vector<bool> in_tail;
  double threshold = 0.0;
};

/// The ceil(frac * n) highest-p_hat messages; ties broken by ascending id.
/// Throws Error(EmptySet).
Tail high_risk_tail(std::span<const ScoredMessage> msgs, double frac = 0.05);

struct EnrichmentRow {
  Tag tag;
  double tail_count = 0, rest_count = 0;
  double delta = 0, variance = 0, z = 0;
  double lift = 0;  // filled by enrichment()
};

/// Log-odds with an informative Dirichlet prior within one field, rows sorted by
/// z descending. `alpha0` defaults to 0.01 x the field's total count.
std::vector<EnrichmentRow> log_odds_z(codebook::Field field, std::span<const double> tail_counts,
                                      std::span<const double> rest_counts, std::optional<double> alpha0 = {});

/// P(tag | tail) / P(tag | all). Throws Error(ZeroShare | EmptySet).
double tail_lift(std::span<const ScoredMessage> msgs, const Tail& tail, const Tag& t);

/// All four fields; rows grouped by field in codebook order, then z descending.
std::vector<EnrichmentRow> enrichment(std::span<const ScoredMessage> msgs, const Tail& tail,
                                      double alpha0_scale = 0.01);

struct Prototype {
  std::string key;
  codebook::TagAssignment assignment;
  std::size_t count = 0;
  std::size_t tail_count = 0;
  double tail_lift = 0.0;  // share of tail / share of all
};

std::string prototype_key(const codebook::TagAssignment& a);

struct PrototypeTable {
  std::vector<Prototype> prototypes;  // count descending, key ascending
  std::vector<double> coverage;       // cumulative message share of the top-k
  std::vector<double> tail_coverage;  // cumulative tail share of the top-k
  std::vector<std::size_t> prototype_of;  // per message
};

PrototypeTable build_prototypes(std::span<const ScoredMessage> msgs, const Tail& tail);

struct FamilyOptions {
  std::size_t k = 25;
  std::uint64_t seed = 0;
  int restarts = 10;
  int max_iter = 100;
  double tol = 1e-6;
};

struct Families {
  std::vector<std::size_t> family_of;  // per prototype, 1..k
  std::vector<std::vector<double>> centroids;
  double inertia = 0.0;
  double silhouette = 0.0;
  std::vector<std::string> vocabulary;  // token per TF-IDF column
};

/// TF-IDF over "field:label" tokens, k-means++ restarts. Throws Error(TooFewPrototypes).
Families cluster_families(std::span<const Prototype> prototypes, const FamilyOptions& opts = {});

/// Euclidean k-means primitives, exposed for testing.
struct KMeansResult {
  std::vector<std::size_t> assignment;  // 0-based
  std::vector<std::vector<double>> centroids;
  double inertia = 0.0;
};
KMeansResult kmeans(std::span<const std::vector<double>> points, std::size_t k, std::uint64_t seed, int restarts,
                    int max_iter, double tol);
double silhouette(std::span<const std::vector<double>> points, std::span<const std::size_t> assignment);

/// JSD in nats; inputs are normalized internally. Throws Error(LengthMismatch).
double jsd(std::span<const double> p, std::span<const double> q);

struct WeekCounts {
  std::string week;
  std::vector<double> counts;  // per category
  double total = 0;            // messages in the week
};

struct DriftPoint {
  std::string from_week, to_week;
  double jsd = 0;
};

/// Consecutive retained weeks (total >= min_week_count).
std::vector<DriftPoint> weekly_js_drift(std::span<const WeekCounts> weeks, double min_week_count = 200);

/// max / median (midpoint for even counts). Throws Error(ZeroMedian), or
/// Error(EmptySet) with fewer than three weeks.
double peak_to_median(std::span<const double> shares);

struct BurstRow {
  Tag tag;
  std::vector<double> shares;  // per retained week
  double peak = 0, median = 0, ratio = 0;
  std::string peak_week;
};

struct MonitorOptions {
  double tail_frac = 0.05;
  double alpha0_scale = 0.01;
  std::size_t k = 25;
  double min_week_count = 200;
  bool risk_mass_shares = false;  // burst numerator: counts (default) or risk mass
  std::uint64_t seed = 0;
  std::string model_id;
};

struct MonitorReport {
  std::size_t n = 0;
  double mass = 0;
  Tail tail;
  std::vector<ShareRow> shares;
  std::vector<EnrichmentRow> enrichment;
  PrototypeTable prototypes;
  std::optional<Families> families;  // absent when fewer than k prototypes
  std::vector<std::string> retained_weeks;
  std::vector<DriftPoint> drift;
  std::vector<BurstRow> bursts;
};

MonitorReport run_monitor(std::span<const ScoredMessage> msgs, const MonitorOptions& opts);

std::string enrichment_csv(const MonitorReport& r);
std::string prototype_csv(const MonitorReport& r);
std::string family_csv(const MonitorReport& r);
std::string drift_csv(const MonitorReport& r);
nlohmann::json summary_json(const MonitorReport& r, const MonitorOptions& opts);

}  // namespace tag2cred::monitor
