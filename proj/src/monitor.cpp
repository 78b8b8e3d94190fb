#include "tag2cred/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "tag2cred/error.hpp"
#include "tag2cred/io.hpp"
#include "tag2cred/rng.hpp"
#include "tag2cred/timeutil.hpp"

namespace tag2cred::monitor {

using codebook::Field;

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

std::size_t tag_count(std::span<const ScoredMessage> msgs, const Tag& t) {
  std::size_t n = 0;
  for (const auto& m : msgs) n += m.assignment.has(t.field, t.label);
  return n;
}

}  // namespace

ScoredMessage scored_from_json(const nlohmann::json& j) {
  ScoredMessage m;
  try {
    m.id = j.at("message_id").get<std::string>();
    m.channel_id = j.value("channel_id", "");
    m.timestamp = j.at("timestamp").get<std::int64_t>();
    m.week = j.value("week", "");
    m.p_hat = j.at("p_hat").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseFailure, std::string("scored message: ") + e.what());
  }
  if (!(m.p_hat >= 0.0 && m.p_hat <= 1.0)) throw Error(Errc::ParseFailure, m.id + ": p_hat outside [0,1]");
  if (m.week.empty()) m.week = iso_week_key(m.timestamp);
  m.assignment = codebook::from_json(j);
  return m;
}

nlohmann::json to_json(const ScoredMessage& m) {
  nlohmann::json j = codebook::to_json(m.assignment);
  j["message_id"] = m.id;
  j["channel_id"] = m.channel_id;
  j["timestamp"] = m.timestamp;
  j["week"] = m.week;
  j["p_hat"] = m.p_hat;
  return j;
}

std::string Tag::name() const {
  return std::string(codebook::field_name(field)) + "=" +
         std::string(codebook::labels(field)[static_cast<std::size_t>(label)]);
}

std::vector<Tag> all_tags() {
  std::vector<Tag> out;
  for (Field f : codebook::kAllFields) {
    for (std::size_t l = 0; l < codebook::labels(f).size(); ++l) out.push_back({f, static_cast<int>(l)});
  }
  return out;
}

double risk_mass(std::span<const ScoredMessage> msgs) {
  double s = 0.0;
  for (const auto& m : msgs) s += m.p_hat;
  return s;
}

double risk_share(std::span<const ScoredMessage> msgs, const Tag& t) {
  const double total = risk_mass(msgs);
  if (msgs.empty() || total <= 0.0) throw Error(Errc::EmptySet, "risk share over a set with zero risk mass");
  double s = 0.0;
  for (const auto& m : msgs) {
    if (m.assignment.has(t.field, t.label)) s += m.p_hat;
  }
  return s / total;
}

double vol_share(std::span<const ScoredMessage> msgs, const Tag& t) {
  if (msgs.empty()) throw Error(Errc::EmptySet, "volume share over an empty set");
  return static_cast<double>(tag_count(msgs, t)) / static_cast<double>(msgs.size());
}

std::vector<ShareRow> share_table(std::span<const ScoredMessage> msgs) {
  if (msgs.empty()) throw Error(Errc::EmptySet, "share table over an empty set");
  const double total = risk_mass(msgs);
  std::vector<ShareRow> rows;
  for (const auto& t : all_tags()) {
    ShareRow r{t};
    for (const auto& m : msgs) {
      if (m.assignment.has(t.field, t.label)) {
        ++r.count;
        r.mass += m.p_hat;
      }
    }
    r.vol_share = static_cast<double>(r.count) / static_cast<double>(msgs.size());
    r.risk_share = total > 0.0 ? r.mass / total : 0.0;
    rows.push_back(r);
  }
  return rows;
}

Tail high_risk_tail(std::span<const ScoredMessage> msgs, double frac) {
  if (msgs.empty()) throw Error(Errc::EmptySet, "tail of an empty set");
  if (!(frac > 0.0 && frac < 1.0)) throw Error(Errc::ConfigInvalid, "tail fraction must lie in (0,1)");
  const std::size_t n = msgs.size();
  // ceil with a guard against frac * n landing a hair above an integer.
  const double raw = frac * static_cast<double>(n);
  std::size_t k = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  k = std::clamp<std::size_t>(k, 1, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (msgs[a].p_hat != msgs[b].p_hat) return msgs[a].p_hat > msgs[b].p_hat;
    return msgs[a].id < msgs[b].id;
  });
  Tail t;
  t.members.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(t.members.begin(), t.members.end());
  t.in_tail.assign(n, false);
  t.threshold = std::numeric_limits<double>::infinity();
  for (auto i : t.members) {
    t.in_tail[i] = true;
    t.threshold = std::min(t.threshold, msgs[i].p_hat);
  }
  return t;
}

std::vector<EnrichmentRow> log_odds_z(Field field, std::span<const double> yh, std::span<const double> yr,
                                      std::optional<double> alpha0) {
  if (yh.size() != yr.size()) throw Error(Errc::LengthMismatch, "tail vs rest counts");
  const double nh = std::accumulate(yh.begin(), yh.end(), 0.0);
  const double nr = std::accumulate(yr.begin(), yr.end(), 0.0);
  const double total = nh + nr;
  const double a0 = alpha0.value_or(0.01 * total);
  std::vector<EnrichmentRow> rows;
  for (std::size_t t = 0; t < yh.size(); ++t) {
    EnrichmentRow r{{field, static_cast<int>(t)}, yh[t], yr[t]};
    const double share = total > 0.0 ? (yh[t] + yr[t]) / total : 1.0 / static_cast<double>(yh.size());
    const double at = a0 * share;
    if (at <= 0.0) {
      // Tag absent everywhere (or no prior): no evidence either way.
      rows.push_back(r);
      continue;
    }
    r.delta = std::log((yh[t] + at) / (nh + a0 - yh[t] - at)) - std::log((yr[t] + at) / (nr + a0 - yr[t] - at));
    r.variance = 1.0 / (yh[t] + at) + 1.0 / (yr[t] + at);
    r.z = r.delta / std::sqrt(r.variance);
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.z > b.z; });
  return rows;
}

double tail_lift(std::span<const ScoredMessage> msgs, const Tail& tail, const Tag& t) {
  if (msgs.empty() || tail.members.empty()) throw Error(Errc::EmptySet, "tail lift needs messages and a tail");
  const auto all = tag_count(msgs, t);
  if (all == 0) throw Error(Errc::ZeroShare, t.name() + " never occurs");
  std::size_t in = 0;
  for (auto i : tail.members) in += msgs[i].assignment.has(t.field, t.label);
  const double p_tail = static_cast<double>(in) / static_cast<double>(tail.members.size());
  const double p_all = static_cast<double>(all) / static_cast<double>(msgs.size());
  return p_tail / p_all;
}

std::vector<EnrichmentRow> enrichment(std::span<const ScoredMessage> msgs, const Tail& tail, double alpha0_scale) {
  std::vector<EnrichmentRow> out;
  for (Field f : codebook::kAllFields) {
    const std::size_t L = codebook::labels(f).size();
    std::vector<double> yh(L, 0.0), yr(L, 0.0);
    for (std::size_t i = 0; i < msgs.size(); ++i) {
      for (int l : msgs[i].assignment[f]) (tail.in_tail[i] ? yh : yr)[static_cast<std::size_t>(l)] += 1.0;
    }
    const double total = std::accumulate(yh.begin(), yh.end(), 0.0) + std::accumulate(yr.begin(), yr.end(), 0.0);
    auto rows = log_odds_z(f, yh, yr, alpha0_scale * total);
    for (auto& r : rows) {
      r.lift = r.tail_count + r.rest_count > 0 ? tail_lift(msgs, tail, r.tag) : 0.0;
      out.push_back(r);
    }
  }
  return out;
}

std::string prototype_key(const codebook::TagAssignment& a) {
  std::string key;
  for (Field f : codebook::kAllFields) {
    if (!key.empty()) key += " | ";
    key += codebook::field_name(f);
    key += '=';
    bool first = true;
    for (int l : a[f]) {
      if (!first) key += ';';
      key += codebook::labels(f)[static_cast<std::size_t>(l)];
      first = false;
    }
  }
  return key;
}

PrototypeTable build_prototypes(std::span<const ScoredMessage> msgs, const Tail& tail) {
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<Prototype> protos;
  std::vector<std::size_t> raw_of(msgs.size());
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    const auto key = prototype_key(msgs[i].assignment);
    auto [it, fresh] = slot.emplace(key, protos.size());
    if (fresh) protos.push_back({key, msgs[i].assignment});
    auto& p = protos[it->second];
    ++p.count;
    if (!tail.in_tail.empty() && tail.in_tail[i]) ++p.tail_count;
    raw_of[i] = it->second;
  }
  std::vector<std::size_t> order(protos.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return protos[a].count != protos[b].count ? protos[a].count > protos[b].count : protos[a].key < protos[b].key;
  });
  std::vector<std::size_t> new_pos(protos.size());
  PrototypeTable t;
  const double n = static_cast<double>(msgs.size());
  const double nt = static_cast<double>(tail.members.size());
  double cum = 0, cum_tail = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    new_pos[order[r]] = r;
    Prototype p = protos[order[r]];
    p.tail_lift = nt > 0 ? (static_cast<double>(p.tail_count) / nt) / (static_cast<double>(p.count) / n) : 0.0;
    cum += static_cast<double>(p.count);
    cum_tail += static_cast<double>(p.tail_count);
    t.coverage.push_back(cum / n);
    t.tail_coverage.push_back(nt > 0 ? cum_tail / nt : 0.0);
    t.prototypes.push_back(std::move(p));
  }
  t.prototype_of.resize(msgs.size());
  for (std::size_t i = 0; i < msgs.size(); ++i) t.prototype_of[i] = new_pos[raw_of[i]];
  return t;
}

KMeansResult kmeans(std::span<const std::vector<double>> pts, std::size_t k, std::uint64_t seed, int restarts,
                    int max_iter, double tol) {
  const std::size_t n = pts.size();
  if (k == 0 || n < k) throw Error(Errc::TooFewPrototypes, std::to_string(n) + " points for k=" + std::to_string(k));
  const std::size_t d = pts.front().size();
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int rs = 0; rs < std::max(1, restarts); ++rs) {
    Rng rng(seed, static_cast<std::uint64_t>(rs));
    // k-means++ seeding.
    std::vector<std::vector<double>> cent;
    cent.push_back(pts[rng.below(n)]);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(pts[i], cent[0]);
    while (cent.size() < k) {
      const double sum = std::accumulate(d2.begin(), d2.end(), 0.0);
      std::size_t pick = 0;
      if (sum <= 0.0) {
        pick = rng.below(n);
      } else {
        double r = rng.uniform() * sum;
        for (pick = 0; pick + 1 < n; ++pick) {
          if (d2[pick] > 0.0 && r < d2[pick]) break;
          r -= d2[pick];
        }
        while (d2[pick] <= 0.0 && pick > 0) --pick;  // guard against rounding at the end
      }
      cent.push_back(pts[pick]);
      for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(pts[i], cent.back()));
    }
    std::vector<std::size_t> asg(n, 0);
    double inertia = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
      double cur = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
          const double dd = sq_dist(pts[i], cent[c]);
          if (dd < bd) {
            bd = dd;
            asg[i] = c;
          }
        }
        cur += bd;
      }
      std::vector<std::vector<double>> next(k, std::vector<double>(d, 0.0));
      std::vector<std::size_t> cnt(k, 0);
      for (std::size_t i = 0; i < n; ++i) {
        ++cnt[asg[i]];
        for (std::size_t j = 0; j < d; ++j) next[asg[i]][j] += pts[i][j];
      }
      for (std::size_t c = 0; c < k; ++c) {
        if (cnt[c] == 0) {
          next[c] = cent[c];  // keep an emptied centroid in place
          continue;
        }
        for (auto& v : next[c]) v /= static_cast<double>(cnt[c]);
      }
      cent = std::move(next);
      const bool done = std::isfinite(inertia) && (inertia - cur) <= tol * std::max(inertia, 1e-300);
      inertia = cur;
      if (done || cur == 0.0) break;
    }
    // Final inertia against the last centroids.
    double fin = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dd = sq_dist(pts[i], cent[c]);
        if (dd < bd) {
          bd = dd;
          asg[i] = c;
        }
      }
      fin += bd;
    }
    if (fin < best.inertia) {
      best.inertia = fin;
      best.assignment = asg;
      best.centroids = cent;
    }
  }
  return best;
}

double silhouette(std::span<const std::vector<double>> pts, std::span<const std::size_t> asg) {
  const std::size_t n = pts.size();
  if (n < 2) return 0.0;
  const std::size_t k = *std::max_element(asg.begin(), asg.end()) + 1;
  std::vector<std::size_t> size(k, 0);
  for (auto a : asg) ++size[a];
  std::size_t used = 0;
  for (auto s : size) used += s > 0;
  if (used < 2) return 0.0;
  double total = 0.0;
  std::vector<double> sum(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sum[asg[j]] += std::sqrt(sq_dist(pts[i], pts[j]));
    }
    if (size[asg[i]] <= 1) continue;  // singleton clusters score 0
    const double a = sum[asg[i]] / static_cast<double>(size[asg[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c != asg[i] && size[c] > 0) b = std::min(b, sum[c] / static_cast<double>(size[c]));
    }
    const double m = std::max(a, b);
    total += m > 0.0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(n);
}

Families cluster_families(std::span<const Prototype> protos, const FamilyOptions& opts) {
  if (protos.size() < opts.k) {
    throw Error(Errc::TooFewPrototypes, std::to_string(protos.size()) + " prototypes for k=" + std::to_string(opts.k));
  }
  Families fam;
  std::vector<std::vector<std::uint32_t>> docs;
  std::vector<std::size_t> df;
  std::map<std::string, std::uint32_t> vocab;
  // Namespaced tokens, vocabulary in codebook order.
  for (Field f : codebook::kAllFields) {
    for (auto l : codebook::labels(f)) {
      const std::string tok = std::string(codebook::field_name(f)) + ":" + std::string(l);
      vocab.emplace(tok, static_cast<std::uint32_t>(fam.vocabulary.size()));
      fam.vocabulary.push_back(tok);
    }
  }
  df.assign(fam.vocabulary.size(), 0);
  for (const auto& p : protos) {
    std::vector<std::uint32_t> doc;
    for (Field f : codebook::kAllFields) {
      for (int l : p.assignment[f]) doc.push_back(static_cast<std::uint32_t>(codebook::field_offset(f) + static_cast<std::size_t>(l)));
    }
    for (auto c : doc) ++df[c];
    docs.push_back(std::move(doc));
  }
  const double N = static_cast<double>(protos.size());
  std::vector<std::vector<double>> pts;
  for (const auto& doc : docs) {
    std::vector<double> v(fam.vocabulary.size(), 0.0);
    double norm = 0.0;
    for (auto c : doc) {
      v[c] = std::log((1.0 + N) / (1.0 + static_cast<double>(df[c]))) + 1.0;
      norm += v[c] * v[c];
    }
    if (norm > 0) {
      norm = std::sqrt(norm);
      for (auto& x : v) x /= norm;
    }
    pts.push_back(std::move(v));
  }
  auto km = kmeans(pts, opts.k, opts.seed, opts.restarts, opts.max_iter, opts.tol);
  // Number families by size, then by first member, so ids are stable to read.
  std::vector<std::size_t> size(opts.k, 0), first(opts.k, protos.size());
  for (std::size_t i = 0; i < km.assignment.size(); ++i) {
    ++size[km.assignment[i]];
    first[km.assignment[i]] = std::min(first[km.assignment[i]], i);
  }
  std::vector<std::size_t> order(opts.k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return size[a] != size[b] ? size[a] > size[b] : first[a] < first[b];
  });
  std::vector<std::size_t> rename(opts.k);
  for (std::size_t r = 0; r < order.size(); ++r) rename[order[r]] = r;
  fam.family_of.resize(km.assignment.size());
  for (std::size_t i = 0; i < km.assignment.size(); ++i) fam.family_of[i] = rename[km.assignment[i]] + 1;
  fam.centroids.resize(opts.k);
  for (std::size_t c = 0; c < opts.k; ++c) fam.centroids[rename[c]] = km.centroids[c];
  fam.inertia = km.inertia;
  fam.silhouette = silhouette(pts, km.assignment);
  return fam;
}

double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error(Errc::LengthMismatch, "distribution sizes differ");
  const double sp = std::accumulate(p.begin(), p.end(), 0.0);
  const double sq = std::accumulate(q.begin(), q.end(), 0.0);
  if (sp <= 0.0 || sq <= 0.0) throw Error(Errc::EmptySet, "empty distribution");
  double out = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = p[i] / sp, b = q[i] / sq, m = 0.5 * (a + b);
    if (a > 0) out += 0.5 * a * std::log(a / m);
    if (b > 0) out += 0.5 * b * std::log(b / m);
  }
  return std::clamp(out, 0.0, std::log(2.0));
}

std::vector<DriftPoint> weekly_js_drift(std::span<const WeekCounts> weeks, double min_week_count) {
  std::vector<DriftPoint> out;
  const WeekCounts* prev = nullptr;
  for (const auto& w : weeks) {
    if (w.total < min_week_count) continue;
    if (prev) out.push_back({prev->week, w.week, jsd(prev->counts, w.counts)});
    prev = &w;
  }
  return out;
}

double peak_to_median(std::span<const double> shares) {
  if (shares.size() < 3) throw Error(Errc::EmptySet, "peak-to-median needs at least 3 weeks");
  std::vector<double> s(shares.begin(), shares.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  const double median = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
  if (median <= 0.0) throw Error(Errc::ZeroMedian, "median weekly share is 0");
  return s.back() / median;
}

MonitorReport run_monitor(std::span<const ScoredMessage> msgs, const MonitorOptions& opts) {
  MonitorReport r;
  r.n = msgs.size();
  r.mass = risk_mass(msgs);
  r.tail = high_risk_tail(msgs, opts.tail_frac);
  r.shares = share_table(msgs);
  r.enrichment = enrichment(msgs, r.tail, opts.alpha0_scale);
  r.prototypes = build_prototypes(msgs, r.tail);
  if (r.prototypes.prototypes.size() >= opts.k) {
    FamilyOptions fo;
    fo.k = opts.k;
    fo.seed = opts.seed;
    r.families = cluster_families(r.prototypes.prototypes, fo);
  }

  // Weekly series, weeks in key order (ISO keys sort chronologically).
  std::map<std::string, std::vector<std::size_t>> by_week;
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    by_week[msgs[i].week.empty() ? iso_week_key(msgs[i].timestamp) : msgs[i].week].push_back(i);
  }
  const std::size_t cats = r.families ? opts.k : r.prototypes.prototypes.size();
  std::vector<WeekCounts> weeks;
  for (const auto& [wk, idx] : by_week) {
    WeekCounts w{wk, std::vector<double>(cats, 0.0), static_cast<double>(idx.size())};
    for (auto i : idx) {
      const auto p = r.prototypes.prototype_of[i];
      const auto c = r.families ? r.families->family_of[p] - 1 : p;
      w.counts[c] += 1.0;
    }
    weeks.push_back(std::move(w));
    if (static_cast<double>(idx.size()) >= opts.min_week_count) r.retained_weeks.push_back(wk);
  }
  r.drift = weekly_js_drift(weeks, opts.min_week_count);

  if (r.retained_weeks.size() >= 3) {
    for (const auto& t : all_tags()) {
      BurstRow b;
      b.tag = t;
      for (const auto& wk : r.retained_weeks) {
        double num = 0.0, den = 0.0;
        for (auto i : by_week[wk]) {
          const double w = opts.risk_mass_shares ? msgs[i].p_hat : 1.0;
          den += w;
          if (msgs[i].assignment.has(t.field, t.label)) num += w;
        }
        b.shares.push_back(den > 0 ? num / den : 0.0);
      }
      try {
        b.ratio = peak_to_median(b.shares);
      } catch (const Error& e) {
        if (e.code() != Errc::ZeroMedian) throw;
        continue;
      }
      const auto it = std::max_element(b.shares.begin(), b.shares.end());
      b.peak = *it;
      b.median = b.peak / b.ratio;
      b.peak_week = r.retained_weeks[static_cast<std::size_t>(it - b.shares.begin())];
      r.bursts.push_back(std::move(b));
    }
    std::stable_sort(r.bursts.begin(), r.bursts.end(), [](const auto& a, const auto& b) { return a.ratio > b.ratio; });
  }
  return r;
}

std::string enrichment_csv(const MonitorReport& r) {
  std::string out = io::csv_row({"field", "tag", "tail_count", "rest_count", "delta", "variance", "z", "lift"});
  for (const auto& e : r.enrichment) {
    out += io::csv_row({std::string(codebook::field_name(e.tag.field)),
                        std::string(codebook::labels(e.tag.field)[static_cast<std::size_t>(e.tag.label)]),
                        io::fmt_double(e.tail_count), io::fmt_double(e.rest_count), io::fmt_double(e.delta),
                        io::fmt_double(e.variance), io::fmt_double(e.z), io::fmt_double(e.lift)});
  }
  return out;
}

std::string prototype_csv(const MonitorReport& r) {
  std::string out = io::csv_row({"rank", "prototype", "count", "tail_count", "tail_lift", "coverage", "tail_coverage",
                                 "family"});
  const auto& t = r.prototypes;
  for (std::size_t i = 0; i < t.prototypes.size(); ++i) {
    const auto& p = t.prototypes[i];
    out += io::csv_row({std::to_string(i + 1), p.key, std::to_string(p.count), std::to_string(p.tail_count),
                        io::fmt_double(p.tail_lift), io::fmt_double(t.coverage[i]),
                        io::fmt_double(t.tail_coverage[i]),
                        r.families ? std::to_string(r.families->family_of[i]) : std::string()});
  }
  return out;
}

std::string family_csv(const MonitorReport& r) {
  std::string out = io::csv_row({"family", "prototypes", "messages", "tail_messages", "members"});
  if (!r.families) return out;
  const std::size_t k = r.families->centroids.size();
  for (std::size_t f = 1; f <= k; ++f) {
    std::size_t np = 0, nm = 0, nt = 0;
    std::string members;
    for (std::size_t i = 0; i < r.prototypes.prototypes.size(); ++i) {
      if (r.families->family_of[i] != f) continue;
      ++np;
      nm += r.prototypes.prototypes[i].count;
      nt += r.prototypes.prototypes[i].tail_count;
      if (np <= 5) members += (members.empty() ? "" : " || ") + r.prototypes.prototypes[i].key;
    }
    out += io::csv_row({std::to_string(f), std::to_string(np), std::to_string(nm), std::to_string(nt), members});
  }
  return out;
}

std::string drift_csv(const MonitorReport& r) {
  std::string out = io::csv_row({"series", "week", "from_week", "value", "tag", "peak_to_median"});
  for (const auto& d : r.drift) out += io::csv_row({"js_drift", d.to_week, d.from_week, io::fmt_double(d.jsd), "", ""});
  for (const auto& b : r.bursts) {
    for (std::size_t w = 0; w < b.shares.size(); ++w) {
      out += io::csv_row({"weekly_share", r.retained_weeks[w], "", io::fmt_double(b.shares[w]), b.tag.name(),
                          io::fmt_double(b.ratio)});
    }
  }
  return out;
}

nlohmann::json summary_json(const MonitorReport& r, const MonitorOptions& opts) {
  nlohmann::json top = nlohmann::json::array();
  for (const auto& e : r.enrichment) {
    if (e.z > 0) top.push_back({{"tag", e.tag.name()}, {"z", e.z}, {"lift", e.lift}});
  }
  std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) { return a["z"].template get<double>() > b["z"].template get<double>(); });
  if (top.size() > 10) top.erase(top.begin() + 10, top.end());
  auto cov = [&](std::size_t k) {
    const auto& c = r.prototypes.coverage;
    return c.empty() ? 0.0 : c[std::min(k, c.size()) - 1];
  };
  double max_drift = 0.0;
  for (const auto& d : r.drift) max_drift = std::max(max_drift, d.jsd);
  nlohmann::json bursts = nlohmann::json::array();
  for (std::size_t i = 0; i < r.bursts.size() && i < 10; ++i) {
    const auto& b = r.bursts[i];
    bursts.push_back({{"tag", b.tag.name()}, {"peak", b.peak}, {"median", b.median}, {"ratio", b.ratio},
                      {"peak_week", b.peak_week}});
  }
  return {{"model_id", opts.model_id},
          {"messages", r.n},
          {"risk_mass", r.mass},
          {"tail_frac", opts.tail_frac},
          {"tail_size", r.tail.members.size()},
          {"tail_threshold", r.tail.threshold},
          {"top_enriched", top},
          {"prototypes", r.prototypes.prototypes.size()},
          {"coverage_top10", cov(10)},
          {"coverage_top50", cov(50)},
          {"families_k", r.families ? opts.k : 0},
          {"silhouette", r.families ? r.families->silhouette : 0.0},
          {"retained_weeks", r.retained_weeks},
          {"max_weekly_drift", max_drift},
          {"bursts", bursts}};
}

}  // namespace tag2cred::monitor
