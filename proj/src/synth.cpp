#include "tag2cred/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tag2cred/error.hpp"
#include "tag2cred/io.hpp"
#include "tag2cred/learn.hpp"
#include "tag2cred/metrics.hpp"
#include "tag2cred/rng.hpp"
#include "tag2cred/supervision.hpp"

namespace tag2cred::synth {

using codebook::Field;
using codebook::TagAssignment;

namespace {

constexpr std::int64_t kWeek = 7 * 86400;

// One or more trigger words per label; empty lists contribute nothing.
const std::vector<std::vector<std::string>>& words(Field f) {
  static const std::vector<std::vector<std::string>> theme{
      {"crypto", "bitcoin", "token", "trading"}, {"vaccine", "health", "doctor"}, {"election", "government", "vote"},
      {"police", "crime", "arrest"},           {"news", "headline", "bulletin"},  {"software", "app", "technology"},
      {"fitness", "diet", "wellness"},         {"casino", "betting", "jackpot"},  {"football", "league", "tournament"},
      {"chat", "hello", "morning"},            {"misc", "random"}};
  static const std::vector<std::vector<std::string>> claim{
      {},
      {"announce", "launch", "released"},
      {"predict", "forecast", "soon"},
      {"guaranteed", "profit", "100x"},
      {"limited", "hurry", "fomo"},
      {"misleading", "context"},
      {"fear", "panic", "danger"},
      {"rumour", "allegedly", "leaked"},
      {"think", "believe", "imo"},
      {"confirmed", "official", "according"},
      {"anyway", "whatever"}};
  static const std::vector<std::vector<std::string>> cta{{"share", "repost", "like"}, {"comment", "ask", "reply"},
                                                         {"visit", "watch", "click"}, {"buy", "invest", "donate"},
                                                         {"join", "subscribe", "follow"}, {"attend", "livestream"},
                                                         {}};
  static const std::vector<std::vector<std::string>> evidence{
      {}, {}, {"said", "quote", "testimony"}, {"percent", "statistics"}, {"chart", "graph"}, {"attachment"}};
  switch (f) {
    case Field::Theme: return theme;
    case Field::Claim: return claim;
    case Field::Cta: return cta;
    case Field::Evidence: return evidence;
  }
  return theme;
}

const std::vector<std::string>& filler() {
  static const std::vector<std::string> w = [] {
    const char* a[] = {"ka", "lo", "mi", "ru", "te", "sa", "vo", "ne", "pi", "da", "zu", "fe", "gorn", "bel", "trax"};
    const char* b[] = {"len", "mar", "sto", "vik", "dul", "ren", "pas", "tor", "mek", "lin", "qua", "bex"};
    std::vector<std::string> out;
    for (auto x : a)
      for (auto y : b) out.push_back(std::string(x) + y);
    return out;
  }();
  return w;
}

void pick_distinct(Rng& rng, std::vector<int>& into, const std::vector<int>& pool, std::size_t k) {
  std::vector<int> p = pool;
  rng.shuffle(std::span<int>(p));
  into.assign(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(std::min(k, p.size())));
  std::sort(into.begin(), into.end());
}

std::vector<int> range(int lo, int hi) {
  std::vector<int> r;
  for (int i = lo; i < hi; ++i) r.push_back(i);
  return r;
}

struct DomainSpec {
  std::string name;
  supervision::Credibility c;
  supervision::Factual f;
  double risk;
};

const char* kCredText[] = {"High Credibility", "Medium Credibility", "Low Credibility"};
const char* kFactText[] = {"Very High", "High", "Mostly Factual", "Mixed", "Low", "Very Low"};

}  // namespace

TagAssignment random_assignment(Rng& rng) {
  TagAssignment a;
  auto& th = a[Field::Theme];
  th.push_back(static_cast<int>(rng.below(codebook::kThemeLabels.size())));
  if (rng.bernoulli(0.25)) {
    int second;
    do second = static_cast<int>(rng.below(codebook::kThemeLabels.size()));
    while (second == th[0]);
    th.push_back(second);
    std::sort(th.begin(), th.end());
  }
  if (rng.bernoulli(0.15)) {
    a[Field::Claim] = {codebook::label::kNoSubstantiveClaim};
  } else {
    const double u = rng.uniform();
    const std::size_t k = 1 + (u < 0.35) + (u < 0.10);
    for (;;) {
      pick_distinct(rng, a[Field::Claim], range(1, 11), k);
      const auto& c = a[Field::Claim];
      auto has = [&](int l) { return std::binary_search(c.begin(), c.end(), l); };
      if (has(codebook::label::kVerifiable) && (has(codebook::label::kRumour) || has(codebook::label::kAnnouncement)))
        continue;
      break;
    }
  }
  if (rng.bernoulli(0.35)) {
    a[Field::Cta] = {codebook::label::kNoCta};
  } else {
    pick_distinct(rng, a[Field::Cta], range(0, 6), rng.bernoulli(0.25) ? 2 : 1);
  }
  if (rng.bernoulli(0.35)) {
    a[Field::Evidence] = {codebook::label::kNoneEvidence};
  } else {
    pick_distinct(rng, a[Field::Evidence], range(1, 6), rng.bernoulli(0.25) ? 2 : 1);
  }
  return a;
}

double true_logit(const TagAssignment& a, const std::vector<double>& beta, double intercept) {
  double z = intercept;
  for (Field f : codebook::kAllFields) {
    for (int l : a[f]) z += beta[codebook::field_offset(f) + static_cast<std::size_t>(l)];
  }
  return z;
}

SynthCorpus generate(const SynthConfig& cfg) {
  if (cfg.n_messages == 0 || cfg.n_channels < 2 || cfg.n_domains < 10 || cfg.weeks < 1) {
    throw Error(Errc::ConfigInvalid, "synthetic corpus needs messages, >= 2 channels, >= 10 domains, >= 1 week");
  }
  SynthCorpus out;
  Rng rng_beta(cfg.seed, 0xbe7a);
  out.beta.assign(codebook::kVocabularySize, 0.0);
  for (std::size_t j = 0; j < out.beta.size(); ++j) {
    const double b = cfg.signal_scale * rng_beta.normal();
    const bool is_cta = j >= codebook::field_offset(Field::Cta) && j < codebook::field_offset(Field::Evidence);
    if (cfg.signal == Signal::AllFields || is_cta) out.beta[j] = b;
  }

  // Domains: 40% high risk, 45% low risk, rest mid risk (never labelled).
  using supervision::Credibility;
  using supervision::Factual;
  Rng rng_dom(cfg.seed, 0xd0a1);
  const char* tlds[] = {"com", "org", "net", "co.uk", "info", "com.au"};
  std::vector<DomainSpec> high, low, mid;
  for (std::size_t k = 0; k < cfg.n_domains; ++k) {
    const auto& fw = filler();
    DomainSpec d;
    d.name = fw[rng_dom.below(fw.size())] + std::to_string(k) + "." + tlds[rng_dom.below(6)];
    const double bucket = static_cast<double>(k) / static_cast<double>(cfg.n_domains);
    if (bucket < 0.40) {
      if (rng_dom.bernoulli(0.6)) {
        d.c = Credibility::Low;
        d.f = static_cast<Factual>(rng_dom.below(6));
      } else {
        d.c = Credibility::Medium;
        d.f = static_cast<Factual>(3 + rng_dom.below(3));
      }
    } else if (bucket < 0.85) {
      d.c = Credibility::High;
      d.f = static_cast<Factual>(rng_dom.below(2));
    } else {
      static const std::pair<Credibility, Factual> mids[] = {{Credibility::High, Factual::MostlyFactual},
                                                             {Credibility::High, Factual::Mixed},
                                                             {Credibility::Medium, Factual::VeryHigh},
                                                             {Credibility::Medium, Factual::High},
                                                             {Credibility::Medium, Factual::MostlyFactual}};
      std::tie(d.c, d.f) = mids[rng_dom.below(5)];
    }
    const auto rc = supervision::risk_components(d.c, d.f);
    d.risk = supervision::domain_risk(rc.r_c, rc.r_f);
    (bucket < 0.40 ? high : bucket < 0.85 ? low : mid).push_back(d);
  }

  std::string csv = "domain,credibility,factual_reporting,bias,media_type,country\n";
  auto row = [&](const std::string& dom, const DomainSpec& d) {
    csv += io::csv_row({dom, kCredText[static_cast<int>(d.c)], kFactText[static_cast<int>(d.f)], "", "Website", ""});
  };
  for (const auto* pool : {&high, &low, &mid}) {
    for (const auto& d : *pool) {
      row(d.name, d);
      if (rng_dom.bernoulli(0.1)) {
        // A spelling variant repeating the rating plus one conflicting row: the mode stays put.
        std::string variant = "WWW." + d.name;
        for (auto& ch : variant) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        row(variant, d);
        DomainSpec other = d;
        other.c = d.c == Credibility::High ? Credibility::Low : Credibility::High;
        row(d.name, other);
      }
    }
  }
  csv += "satire-example.com,Satire,Mixed,,Website,\n";
  out.mbfc_csv = std::move(csv);

  // Originals.
  const std::size_t n = cfg.n_messages;
  Rng rng(cfg.seed, 0x5e55);
  std::vector<std::int64_t> ts(n);
  std::vector<TagAssignment> tags(n);
  for (std::size_t i = 0; i < n; ++i) {
    ts[i] = cfg.start + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(cfg.weeks) * kWeek));
    tags[i] = random_assignment(rng);
    if (cfg.burst_week >= 0 && (ts[i] - cfg.start) / kWeek == cfg.burst_week && rng.bernoulli(cfg.burst_boost)) {
      auto& c = tags[i][Field::Cta];
      if (c.size() == 1 && c[0] == codebook::label::kNoCta) c.clear();
      if (c.size() == 2) c.pop_back();
      tags[i].add(Field::Cta, codebook::label::kBuyInvest);
    }
  }
  std::vector<double> lin(n);
  for (std::size_t i = 0; i < n; ++i) lin[i] = true_logit(tags[i], out.beta, 0.0);
  // Intercept by bisection so the mean probability hits the target rate.
  double lo = -60, hi = 60;
  for (int it = 0; it < 200; ++it) {
    const double mid_b = 0.5 * (lo + hi);
    double s = 0;
    for (double z : lin) s += learn::sigmoid(z + mid_b);
    (s / static_cast<double>(n) < cfg.positive_rate ? lo : hi) = mid_b;
  }
  out.intercept = 0.5 * (lo + hi);

  auto url_for = [&](const std::string& dom) {
    switch (rng.below(3)) {
      case 0: return "https://" + dom + "/p/" + std::to_string(rng.below(100000));
      case 1: return "http://www." + dom + "/a?id=" + std::to_string(rng.below(100000));
      default: return "https://m." + dom + "/x" + std::to_string(rng.below(1000));
    }
  };
  auto pick = [&](const std::vector<DomainSpec>& pool) -> const DomainSpec& { return pool[rng.below(pool.size())]; };

  Rng rng_emb_w(cfg.seed, 0xe3b1);
  std::vector<std::vector<double>> W(cfg.emb_dim, std::vector<double>(codebook::kVocabularySize));
  for (auto& r : W)
    for (auto& v : r) v = rng_emb_w.normal();
  out.embeddings.dim = cfg.emb_dim;

  const int width = 6;
  auto pad = [&](char prefix, std::size_t i) {
    std::string s = std::to_string(i);
    return std::string(1, prefix) + std::string(s.size() < width ? width - s.size() : 0, '0') + s;
  };

  for (std::size_t i = 0; i < n; ++i) {
    Truth t;
    t.id = pad('m', i);
    t.p = learn::sigmoid(lin[i] + out.intercept);
    t.y = rng.bernoulli(t.p) ? 1 : 0;

    std::vector<std::string> tokens;
    for (Field f : codebook::kAllFields) {
      for (int l : tags[i][f]) {
        const auto& ws = words(f)[static_cast<std::size_t>(l)];
        if (!ws.empty()) tokens.push_back(ws[rng.below(ws.size())]);
      }
    }
    const std::size_t nf = 10 + rng.below(5);
    for (std::size_t k = 0; k < nf; ++k) tokens.push_back(filler()[rng.below(filler().size())]);
    rng.shuffle(std::span<std::string>(tokens));

    std::vector<const DomainSpec*> linked;
    const double u = rng.uniform();
    if (u < cfg.no_url_frac) {
    } else if (u < cfg.no_url_frac + cfg.fuzzy_frac) {
      linked.push_back(&pick(mid));
    } else {
      linked.push_back(&pick(t.y ? high : low));
      if (rng.bernoulli(0.2)) linked.push_back(&pick(low));
    }
    for (const auto* d : linked) {
      tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(rng.below(tokens.size() + 1)), url_for(d->name));
    }
    // Supervising domain: highest risk, ties to the smallest name.
    const DomainSpec* sup = nullptr;
    for (const auto* d : linked) {
      if (!sup || d->risk > sup->risk || (d->risk == sup->risk && d->name < sup->name)) sup = d;
    }
    if (sup) t.domain = sup->name;

    std::string text;
    for (const auto& tok : tokens) text += (text.empty() ? "" : " ") + tok;
    corpus::RawMessage m{t.id, pad('c', rng.below(cfg.n_channels)), ts[i], text, std::nullopt};

    std::vector<double> x(codebook::kVocabularySize, 0.0);
    for (Field f : codebook::kAllFields)
      for (int l : tags[i][f]) x[codebook::field_offset(f) + static_cast<std::size_t>(l)] = 1.0;
    std::vector<double> e(cfg.emb_dim);
    for (std::size_t r = 0; r < cfg.emb_dim; ++r) {
      double s = 0;
      for (std::size_t j = 0; j < x.size(); ++j) s += W[r][j] * x[j];
      e[r] = s + cfg.emb_noise * rng.normal();
    }
    out.embeddings.vectors[m.id] = e;
    out.messages.push_back(std::move(m));
    out.tags.push_back(tags[i]);
    out.truth.push_back(std::move(t));
  }

  // Planted copies: verbatim reposts (case changed), near copies (one extra word), forwards.
  std::size_t copy_no = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    if (u >= cfg.dup_frac + cfg.forward_frac) continue;
    corpus::RawMessage c = out.messages[i];
    c.id = pad('d', copy_no++);
    c.timestamp = std::min(c.timestamp + static_cast<std::int64_t>(1 + rng.below(2 * 86400)),
                           cfg.start + static_cast<std::int64_t>(cfg.weeks) * kWeek - 1);
    c.channel_id = pad('c', rng.below(cfg.n_channels));
    if (u < cfg.dup_frac / 2) {
      for (auto& ch : c.text) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    } else if (u < cfg.dup_frac) {
      c.text += " " + filler()[rng.below(filler().size())];
    } else {
      c.fwd_id = out.messages[i].id;
    }
    const bool forwarded = c.fwd_id.has_value();
    out.embeddings.vectors[c.id] = out.embeddings.vectors[out.messages[i].id];
    out.tags.push_back(out.tags[i]);
    out.messages.push_back(c);
    if (forwarded) {
      // A second forward of the same source: the pair shares (fwd_id, text).
      c.id = pad('d', copy_no++);
      c.channel_id = pad('c', rng.below(cfg.n_channels));
      c.timestamp = std::min(c.timestamp + 3600, cfg.start + static_cast<std::int64_t>(cfg.weeks) * kWeek - 1);
      out.embeddings.vectors[c.id] = out.embeddings.vectors[out.messages[i].id];
      out.tags.push_back(out.tags[i]);
      out.messages.push_back(std::move(c));
    }
  }
  return out;
}

void write_corpus(const SynthCorpus& c, const std::string& dir) {
  io::ensure_dir(dir);
  std::vector<nlohmann::json> msgs, tags;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < c.messages.size(); ++i) {
    msgs.push_back(corpus::to_json(c.messages[i]));
    auto t = codebook::to_json(c.tags[i]);
    t["message_id"] = c.messages[i].id;
    tags.push_back(std::move(t));
    order.push_back(c.messages[i].id);
  }
  io::write_file(dir + "/messages.jsonl", io::to_jsonl(msgs));
  io::write_file(dir + "/tags.jsonl", io::to_jsonl(tags));
  io::write_file(dir + "/mbfc.csv", c.mbfc_csv);
  features::write_embeddings(dir + "/embeddings.csv", c.embeddings, order);
}

double bayes_auc(const SynthCorpus& c) {
  std::vector<double> p;
  std::vector<int> y;
  for (const auto& t : c.truth) {
    p.push_back(t.p);
    y.push_back(t.y);
  }
  return metrics::roc_auc(p, y);
}

}  // namespace tag2cred::synth
