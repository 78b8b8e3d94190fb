#include "tag2cred/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "tag2cred/error.hpp"
#include "tag2cred/hash.hpp"
#include "tag2cred/io.hpp"
#include "tag2cred/metrics.hpp"
#include "tag2cred/rng.hpp"

namespace tag2cred::eval {

namespace {

std::vector<std::string> unique_sorted(std::span<const std::string> v) {
  std::vector<std::string> u(v.begin(), v.end());
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  return u;
}

std::size_t count_for(double frac, std::size_t n) {
  const auto k = static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
  return std::max<std::size_t>(1, k);
}

// Assigns rows to splits from a shuffled group order.
Split assign(std::span<const std::string> keys, const std::vector<std::string>& shuffled, double test_frac,
             double val_frac) {
  const std::size_t g = shuffled.size();
  const std::size_t n_test = std::min(count_for(test_frac, g), g - 2);
  const std::size_t n_val = std::min(count_for(val_frac, g - n_test), g - n_test - 1);
  std::map<std::string, int> part;
  for (std::size_t k = 0; k < g; ++k) part[shuffled[k]] = k < n_test ? 2 : (k < n_test + n_val ? 1 : 0);
  Split s;
  s.test_frac = test_frac;
  s.val_frac = val_frac;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    switch (part.at(keys[i])) {
      case 0: s.train.push_back(i); break;
      case 1: s.val.push_back(i); break;
      default: s.test.push_back(i); break;
    }
  }
  return s;
}

template <class T>
std::vector<T> gather(std::span<const T> all, std::span<const std::size_t> rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(all[r]);
  return out;
}

std::vector<int> gather_labels(std::span<const int> y, std::span<const std::size_t> rows) {
  return gather<int>(y, rows);
}

Aggregate agg(const std::vector<SeedMetrics>& v, double SeedMetrics::*field) {
  Aggregate a;
  if (v.empty()) return a;
  for (const auto& s : v) a.mean += s.*field;
  a.mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (const auto& s : v) ss += (s.*field - a.mean) * (s.*field - a.mean);
  a.std = std::sqrt(ss / static_cast<double>(v.size()));
  return a;
}

double logit(double p) {
  p = std::clamp(p, 1e-15, 1.0 - 1e-15);
  return std::log(p / (1.0 - p));
}

}  // namespace

std::string_view to_string(GroupKind g) { return g == GroupKind::Domain ? "domain" : "channel"; }

Split domain_disjoint_split(std::span<const std::string> domains, std::uint64_t seed, double test_frac,
                            double val_frac) {
  auto groups = unique_sorted(domains);
  if (groups.size() < 5) {
    throw Error(Errc::TooFewDomains, std::to_string(groups.size()) + " supervising domains, need at least 5");
  }
  Rng rng(seed, 0x444f4dULL);
  rng.shuffle(std::span<std::string>(groups));
  Split s = assign(domains, groups, test_frac, val_frac);
  s.group_kind = GroupKind::Domain;
  s.seed = seed;
  return s;
}

Split channel_disjoint_split(std::span<const std::string> channels, std::span<const int> labels, std::uint64_t seed,
                             double test_frac, double val_frac, std::size_t candidates) {
  if (channels.size() != labels.size()) throw Error(Errc::LengthMismatch, "channels vs labels");
  const auto groups = unique_sorted(channels);
  if (groups.size() < 5) {
    throw Error(Errc::TooFewChannels, std::to_string(groups.size()) + " channels, need at least 5");
  }
  double pos_all = 0.0;
  for (int v : labels) pos_all += v;
  pos_all /= static_cast<double>(std::max<std::size_t>(labels.size(), 1));

  Split best;
  double best_gap = 0.0;
  for (std::size_t c = 0; c < std::max<std::size_t>(candidates, 1); ++c) {
    auto order = groups;
    Rng rng(seed, hash_combine(0x43484eULL, c));
    rng.shuffle(std::span<std::string>(order));
    Split s = assign(channels, order, test_frac, val_frac);
    double pos = 0.0;
    for (auto i : s.test) pos += labels[i];
    const double gap = s.test.empty() ? 1.0 : std::abs(pos / static_cast<double>(s.test.size()) - pos_all);
    if (c == 0 || gap < best_gap) {
      best = std::move(s);
      best_gap = gap;
      best.candidate = c;
    }
  }
  best.group_kind = GroupKind::Channel;
  best.seed = seed;
  return best;
}

FeatureBuilder tag_features(std::span<const codebook::TagAssignment> tags, std::vector<codebook::Field> fields,
                            double noise_rate, bool seen_only) {
  return [tags, fields = std::move(fields), noise_rate, seen_only](const Split& s, std::uint64_t seed) {
    const auto train_rows = gather<codebook::TagAssignment>(tags, s.train);
    const auto index =
        features::fit_tag_index(features::TrainOnly<codebook::TagAssignment>(train_rows), seen_only).restrict(fields);
    SplitFeatures out;
    out.train = features::tag_matrix(train_rows, index);
    out.val = features::tag_matrix(gather<codebook::TagAssignment>(tags, s.val), index);
    out.test = features::tag_matrix(gather<codebook::TagAssignment>(tags, s.test), index);
    if (noise_rate > 0.0) {
      const std::uint64_t stream = hash64(io::fmt_double(noise_rate), 0x4e4f495345ULL);
      Rng r_train(seed, stream), r_val(seed, stream + 1), r_test(seed, stream + 2);
      out.train = features::flip_noise(out.train, noise_rate, r_train);
      out.val = features::flip_noise(out.val, noise_rate, r_val);
      out.test = features::flip_noise(out.test, noise_rate, r_test);
    }
    out.space = {features::Kind::TagMultihot, index.size(), index.fingerprint()};
    return out;
  };
}

FeatureBuilder tfidf_features(std::span<const urlkit::MaskedText> texts, features::TfidfConfig config) {
  return [texts, config](const Split& s, std::uint64_t) {
    const auto train_rows = gather<urlkit::MaskedText>(texts, s.train);
    const auto model = features::TfidfModel::fit(features::TrainOnly<urlkit::MaskedText>(train_rows), config);
    SplitFeatures out;
    out.train = model.transform(train_rows);
    out.val = model.transform(gather<urlkit::MaskedText>(texts, s.val));
    out.test = model.transform(gather<urlkit::MaskedText>(texts, s.test));
    out.space = {features::Kind::Tfidf, model.size(), model.fingerprint()};
    return out;
  };
}

FeatureBuilder embedding_features(std::span<const std::vector<double>> rows) {
  return [rows](const Split& s, std::uint64_t) {
    const auto train_rows = gather<std::vector<double>>(rows, s.train);
    const auto st = features::Standardizer::fit(features::TrainOnly<std::vector<double>>(train_rows));
    SplitFeatures out;
    out.train = st.transform(train_rows);
    out.val = st.transform(gather<std::vector<double>>(rows, s.val));
    out.test = st.transform(gather<std::vector<double>>(rows, s.test));
    const std::size_t d = st.mean().size();
    out.space = {features::Kind::Embedding, d, sha256_hex("embedding:" + std::to_string(d))};
    return out;
  };
}

void aggregate(MetricsReport& r) {
  r.accuracy = agg(r.per_seed, &SeedMetrics::accuracy);
  r.roc_auc = agg(r.per_seed, &SeedMetrics::roc_auc);
  r.macro_f1 = agg(r.per_seed, &SeedMetrics::macro_f1);
  r.brier = agg(r.per_seed, &SeedMetrics::brier);
  r.ece = agg(r.per_seed, &SeedMetrics::ece);
}

Split make_split(const Labeled& d, const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.group_kind == GroupKind::Domain) return domain_disjoint_split(d.domains, seed, cfg.test_frac, cfg.val_frac);
  return channel_disjoint_split(d.channels, d.labels, seed, cfg.test_frac, cfg.val_frac, cfg.channel_candidates);
}

SeedMetrics test_metrics(std::span<const double> probs, std::span<const double> raw, std::span<const int> preds,
                         std::span<const int> labels) {
  SeedMetrics m;
  m.accuracy = metrics::accuracy(preds, labels);
  m.roc_auc = metrics::roc_auc(probs, labels);
  m.auc_raw = metrics::roc_auc(raw, labels);
  m.macro_f1 = metrics::macro_f1(preds, labels);
  m.brier = metrics::brier(probs, labels);
  m.ece = metrics::ece(probs, labels, 15);
  m.n_test = labels.size();
  return m;
}

namespace {

SeedMetrics finish_seed(const Split& s, const learn::ProtocolOutput& po, std::span<const int> ytest,
                        std::uint64_t seed) {
  SeedMetrics m = test_metrics(po.test_probs, po.test_raw, po.test_preds, ytest);
  m.seed = seed;
  m.threshold = po.trained.threshold;
  m.C = po.trained.model.C;
  m.n_train = s.train.size();
  m.n_val = s.val.size();
  return m;
}

SeedPredictions seed_predictions(const Labeled& d, const Split& s, const learn::ProtocolOutput& po,
                                 std::uint64_t seed) {
  SeedPredictions p;
  p.seed = seed;
  p.ids = gather<std::string>(d.ids, s.test);
  p.probs = po.test_probs;
  p.preds = po.test_preds;
  p.labels = gather_labels(d.labels, s.test);
  return p;
}

}  // namespace

ExperimentResult run_experiment(const Labeled& d, const FeatureBuilder& builder, const ExperimentConfig& cfg,
                                const std::string& name) {
  ExperimentResult res;
  res.report.name = name;
  for (auto seed : cfg.seeds) {
    const Split s = make_split(d, cfg, seed);
    SplitFeatures f = builder(s, seed);
    const auto ytr = gather_labels(d.labels, s.train);
    const auto yva = gather_labels(d.labels, s.val);
    const auto yte = gather_labels(d.labels, s.test);
    learn::ProtocolOptions po_opts = cfg.protocol;
    po_opts.train.seed = seed;
    const auto po = learn::full_protocol({&f.train, ytr}, {&f.val, yva}, {&f.test, yte}, f.space, po_opts);
    res.report.per_seed.push_back(finish_seed(s, po, yte, seed));
    res.predictions.push_back(seed_predictions(d, s, po, seed));
    res.models.push_back(po.trained);
  }
  aggregate(res.report);
  return res;
}

ExperimentResult run_stacked(const Labeled& d, std::span<const FeatureBuilder> bases,
                             std::span<const std::string> base_ids, const ExperimentConfig& cfg,
                             const StackingOptions& sopts, const std::string& name) {
  if (bases.size() != base_ids.size() || bases.empty()) throw Error(Errc::ConfigInvalid, "stacking needs named bases");
  ExperimentResult res;
  res.report.name = name;
  const std::vector<std::string> ids(base_ids.begin(), base_ids.end());
  const auto meta_space = learn::stacked_space(ids);
  for (auto seed : cfg.seeds) {
    const Split s = make_split(d, cfg, seed);
    const auto ytr = gather_labels(d.labels, s.train);
    const auto yva = gather_labels(d.labels, s.val);
    const auto yte = gather_labels(d.labels, s.test);
    const auto groups = gather<std::string>(cfg.group_kind == GroupKind::Domain ? d.domains : d.channels, s.train);
    std::vector<std::vector<double>> tr_cols, va_cols, te_cols;
    for (const auto& b : bases) {
      SplitFeatures f = b(s, seed);
      learn::ProtocolOptions po_opts = cfg.protocol;
      po_opts.train.seed = seed;
      const auto po = learn::full_protocol({&f.train, ytr}, {&f.val, yva}, {&f.test, yte}, f.space, po_opts);
      learn::TrainOptions o = po_opts.train;
      o.C = po.trained.model.C;
      auto oof = learn::out_of_fold_probs(f.train, ytr, groups, o, sopts.oof_folds, seed, cfg.protocol.balanced);
      auto va = po.val_raw;
      auto te = po.test_raw;
      if (sopts.calibrated_inputs) {
        for (auto* col : {&oof, &va, &te}) {
          for (auto& p : *col) p = po.trained.platt.apply(logit(p));
        }
      }
      tr_cols.push_back(std::move(oof));
      va_cols.push_back(std::move(va));
      te_cols.push_back(std::move(te));
    }
    const SparseMatrix Xtr = learn::probability_matrix(tr_cols);
    const SparseMatrix Xva = learn::probability_matrix(va_cols);
    const SparseMatrix Xte = learn::probability_matrix(te_cols);
    learn::ProtocolOptions meta = cfg.protocol;
    meta.C_grid = {sopts.meta_C};
    meta.train.seed = seed;
    auto po = learn::full_protocol({&Xtr, ytr}, {&Xva, yva}, {&Xte, yte}, meta_space, meta);
    po.trained.base_ids = ids;
    res.report.per_seed.push_back(finish_seed(s, po, yte, seed));
    res.predictions.push_back(seed_predictions(d, s, po, seed));
    res.models.push_back(po.trained);
  }
  aggregate(res.report);
  return res;
}

std::vector<std::string> default_ablation_subsets() { return {"all", "theme", "style", "cta", "no_cta"}; }

std::vector<AblationRow> ablation_suite(const Labeled& d, std::span<const codebook::TagAssignment> tags,
                                         std::span<const std::string> subsets, const ExperimentConfig& cfg) {
  std::vector<AblationRow> rows;
  for (const auto& name : subsets) {
    const auto fields = features::parse_field_subset(name);
    auto r = run_experiment(d, tag_features(tags, fields), cfg, name);
    rows.push_back({name, std::move(r.report)});
  }
  return rows;
}

std::vector<NoisePoint> noise_stress(const Labeled& d, std::span<const codebook::TagAssignment> tags,
                                     std::span<const double> rates, const ExperimentConfig& cfg, std::uint64_t seed) {
  const Split s = make_split(d, cfg, seed);
  const auto ytr = gather_labels(d.labels, s.train);
  const auto yva = gather_labels(d.labels, s.val);
  const auto yte = gather_labels(d.labels, s.test);
  std::vector<NoisePoint> out;
  for (double q : rates) {
    if (!(q >= 0.0 && q <= 1.0)) throw Error(Errc::ConfigInvalid, "noise rate outside [0,1]");
    const auto builder = tag_features(tags, {codebook::kAllFields.begin(), codebook::kAllFields.end()}, q);
    SplitFeatures f = builder(s, seed);
    learn::ProtocolOptions po_opts = cfg.protocol;
    po_opts.train.seed = seed;
    const auto po = learn::full_protocol({&f.train, ytr}, {&f.val, yva}, {&f.test, yte}, f.space, po_opts);
    out.push_back({q, finish_seed(s, po, yte, seed)});
  }
  return out;
}

nlohmann::json to_json(const MetricsReport& r) {
  auto a = [](const Aggregate& x) { return nlohmann::json{{"mean", x.mean}, {"std", x.std}}; };
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& s : r.per_seed) {
    seeds.push_back({{"seed", s.seed},
                     {"accuracy", s.accuracy},
                     {"roc_auc", s.roc_auc},
                     {"roc_auc_uncalibrated", s.auc_raw},
                     {"macro_f1", s.macro_f1},
                     {"brier", s.brier},
                     {"ece", s.ece},
                     {"threshold", s.threshold},
                     {"C", s.C},
                     {"n_train", s.n_train},
                     {"n_val", s.n_val},
                     {"n_test", s.n_test}});
  }
  return {{"name", r.name},
          {"accuracy", a(r.accuracy)},
          {"roc_auc", a(r.roc_auc)},
          {"macro_f1", a(r.macro_f1)},
          {"brier", a(r.brier)},
          {"ece", a(r.ece)},
          {"per_seed", seeds}};
}

std::string report_csv(std::span<const MetricsReport> rows) {
  auto cell = [](const Aggregate& a) { return io::fmt_fixed(a.mean, 3) + "±" + io::fmt_fixed(a.std, 3); };
  std::string out = io::csv_row({"model", "Acc", "AUC", "Macro-F1", "Brier", "ECE"});
  for (const auto& r : rows) {
    out += io::csv_row({r.name, cell(r.accuracy), cell(r.roc_auc), cell(r.macro_f1), cell(r.brier), cell(r.ece)});
  }
  return out;
}

std::string predictions_jsonl(std::span<const SeedPredictions> preds) {
  std::string out;
  for (const auto& p : preds) {
    for (std::size_t i = 0; i < p.ids.size(); ++i) {
      out += nlohmann::json{{"seed", p.seed}, {"message_id", p.ids[i]}, {"p_hat", p.probs[i]},
                            {"pred", p.preds[i]}, {"label", p.labels[i]}}
                 .dump();
      out += '\n';
    }
  }
  return out;
}

}  // namespace tag2cred::eval
