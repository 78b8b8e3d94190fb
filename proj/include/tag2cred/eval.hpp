#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tag2cred/codebook.hpp"
#include "tag2cred/features.hpp"
#include "tag2cred/learn.hpp"
#include "tag2cred/matrix.hpp"

namespace tag2cred::eval {

enum class GroupKind { Domain, Channel };
std::string_view to_string(GroupKind g);

struct Split {
  std::vector<std::size_t> train, val, test;  // row indices, ascending
  GroupKind group_kind = GroupKind::Domain;
  std::uint64_t seed = 0;
  double test_frac = 0.2;
  double val_frac = 0.2;
  std::size_t candidate = 0;  // chosen candidate (channel splits)
};

/// Groups shuffled by seed; round(test_frac * G) (at least 1) groups go to test,
/// round(val_frac * rest) (at least 1) to validation. Throws Error(TooFewDomains).
Split domain_disjoint_split(std::span<const std::string> domains, std::uint64_t seed, double test_frac = 0.2,
                            double val_frac = 0.2);

/// Best of `candidates` channel partitions by |pos_rate(test) - pos_rate(all)|;
/// ties keep the earliest candidate. Throws Error(TooFewChannels).
Split channel_disjoint_split(std::span<const std::string> channels, std::span<const int> labels, std::uint64_t seed,
                             double test_frac = 0.2, double val_frac = 0.2, std::size_t candidates = 50);

struct SplitFeatures {
  SparseMatrix train, val, test;
  learn::FeatureSpace space;
};

/// Builds per-split matrices; fitting must use only split.train rows.
using FeatureBuilder = std::function<SplitFeatures(const Split&, std::uint64_t seed)>;

/// Multi-hot tags restricted to `fields`, with optional bit-flip noise applied to
/// all three splits.
FeatureBuilder tag_features(std::span<const codebook::TagAssignment> tags, std::vector<codebook::Field> fields,
                            double noise_rate = 0.0, bool seen_only = false);
FeatureBuilder tfidf_features(std::span<const urlkit::MaskedText> texts, features::TfidfConfig config = {});
FeatureBuilder embedding_features(std::span<const std::vector<double>> rows);

struct SeedMetrics {
  std::uint64_t seed = 0;
  double accuracy = 0, roc_auc = 0, macro_f1 = 0, brier = 0, ece = 0;
  double auc_raw = 0;  // before calibration
  double threshold = 0.5;
  double C = 0.0;
  std::size_t n_train = 0, n_val = 0, n_test = 0;
};

struct Aggregate {
  double mean = 0, std = 0;  // population std
};

struct MetricsReport {
  std::string name;
  std::vector<SeedMetrics> per_seed;
  Aggregate accuracy, roc_auc, macro_f1, brier, ece;
};

void aggregate(MetricsReport& r);

struct SeedPredictions {
  std::uint64_t seed = 0;
  std::vector<std::string> ids;
  std::vector<double> probs;
  std::vector<int> preds;
  std::vector<int> labels;
};

struct Labeled {
  std::span<const std::string> ids;
  std::span<const int> labels;
  std::span<const std::string> domains;   // supervising domain per row
  std::span<const std::string> channels;
};

struct ExperimentConfig {
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  GroupKind group_kind = GroupKind::Domain;
  double test_frac = 0.2;
  double val_frac = 0.2;
  std::size_t channel_candidates = 50;
  learn::ProtocolOptions protocol;
};

Split make_split(const Labeled& data, const ExperimentConfig& cfg, std::uint64_t seed);
SeedMetrics test_metrics(std::span<const double> test_probs, std::span<const double> test_raw,
                         std::span<const int> preds, std::span<const int> labels);

struct ExperimentResult {
  MetricsReport report;
  std::vector<SeedPredictions> predictions;
  std::vector<learn::TrainedModel> models;  // one per seed
};

/// For each seed: split, build features, full protocol, test metrics.
ExperimentResult run_experiment(const Labeled& data, const FeatureBuilder& builder, const ExperimentConfig& cfg,
                                const std::string& name = "");

struct StackingOptions {
  double meta_C = 1.0;
  int oof_folds = 5;
  bool calibrated_inputs = false;
};

/// Base models through the full protocol; the meta model is fit on out-of-fold
/// (domain-grouped) train probabilities and then calibrated and thresholded on
/// validation like any base model.
ExperimentResult run_stacked(const Labeled& data, std::span<const FeatureBuilder> bases,
                             std::span<const std::string> base_ids, const ExperimentConfig& cfg,
                             const StackingOptions& sopts = {}, const std::string& name = "stacked");

struct AblationRow {
  std::string subset;
  MetricsReport report;
};

std::vector<AblationRow> ablation_suite(const Labeled& data, std::span<const codebook::TagAssignment> tags,
                                         std::span<const std::string> subsets, const ExperimentConfig& cfg);
/// The five standard subsets: all, theme, style, cta, no_cta.
std::vector<std::string> default_ablation_subsets();

struct NoisePoint {
  double rate = 0;
  SeedMetrics metrics;
};

/// One seeded split; each rate flips tag bits in train, val and test features.
std::vector<NoisePoint> noise_stress(const Labeled& data, std::span<const codebook::TagAssignment> tags,
                                     std::span<const double> rates, const ExperimentConfig& cfg, std::uint64_t seed);

nlohmann::json to_json(const MetricsReport& r);
std::string report_csv(std::span<const MetricsReport> rows);
std::string predictions_jsonl(std::span<const SeedPredictions> preds);

}  // namespace tag2cred::eval
