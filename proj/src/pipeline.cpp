#include "tag2cred/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <unordered_map>

#include "tag2cred/codebook.hpp"
#include "tag2cred/corpus.hpp"
#include "tag2cred/eval.hpp"
#include "tag2cred/features.hpp"
#include "tag2cred/hash.hpp"
#include "tag2cred/io.hpp"
#include "tag2cred/learn.hpp"
#include "tag2cred/matrix.hpp"
#include "tag2cred/metrics.hpp"
#include "tag2cred/monitor.hpp"
#include "tag2cred/net.hpp"
#include "tag2cred/supervision.hpp"
#include "tag2cred/synth.hpp"
#include "tag2cred/tagger.hpp"
#include "tag2cred/timeutil.hpp"
#include "tag2cred/urlkit.hpp"

namespace tag2cred::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using codebook::TagAssignment;

std::string interpolate(std::string_view s, const std::function<std::optional<std::string>(const std::string&)>& env) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '$' && i + 1 < s.size() && s[i + 1] == '{') {
      const auto close = s.find('}', i + 2);
      if (close == std::string_view::npos) throw Error(Errc::ConfigInvalid, "unterminated ${ in \"" + std::string(s) + "\"");
      const std::string name(s.substr(i + 2, close - i - 2));
      if (name.empty()) throw Error(Errc::ConfigInvalid, "empty ${} reference");
      const auto v = env(name);
      if (!v) throw Error(Errc::ConfigInvalid, "environment variable " + name + " is not set");
      out += *v;
      i = close + 1;
    } else {
      out += s[i++];
    }
  }
  return out;
}

std::string interpolate(std::string_view s) {
  return interpolate(s, [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  });
}

json default_config() {
  return json{
      {"schema_version", kSchemaVersion},
      {"seed", 0},
      {"out_dir", "out"},
      {"paths",
       {{"messages", ""}, {"mbfc", ""}, {"suffix_rules", ""}, {"redirects", ""}, {"embeddings", ""}, {"tag_file", ""}}},
      {"ingest", {{"min_tokens", 3}}},
      {"dedup",
       {{"jaccard", 0.85},
        {"hamming", 3},
        {"cosine", 0.95},
        {"permutations", 256},
        {"bands", 32},
        {"rows", 8},
        {"use_embeddings", false}}},
      {"urls", {{"resolve", "none"}, {"max_hops", 5}, {"timeout_seconds", 10.0}}},
      {"supervision", {{"tau_low", 0.3}, {"tau_high", 0.8}}},
      {"tagger",
       {{"mode", "mock"},
        {"endpoint", ""},
        {"auth_header", "Authorization"},
        {"auth_token_env", ""},
        {"retries", 3},
        {"timeout_seconds", 30.0},
        {"backoff_ms", 250.0},
        {"max_in_flight", 4},
        {"none_evidence_exclusive", true}}},
      {"features", {{"tfidf_min_token_len", 2}, {"tfidf_max_ngram", 2}, {"tfidf_max_features", 50000}}},
      {"training",
       {{"C_grid", {0.1, 1.0, 10.0}},
        {"balanced", true},
        {"grad_tol", 1e-6},
        {"max_iter", 1000},
        {"meta_C", 1.0},
        {"oof_folds", 5}}},
      {"evaluation",
       {{"seeds", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}},
        {"group", "domain"},
        {"test_frac", 0.2},
        {"val_frac", 0.2},
        {"channel_candidates", 50},
        {"models", {"tags", "tfidf", "embedding", "stacked"}}}},
      {"ablation", {{"subsets", {"all", "theme", "style", "cta", "no_cta"}}}},
      {"stress", {{"rates", {0.0, 0.05, 0.1, 0.2, 0.3}}}},
      {"monitor",
       {{"model", "stacked"},
        {"tail_frac", 0.05},
        {"k", 25},
        {"alpha0_scale", 0.01},
        {"min_week_count", 200},
        {"risk_mass_shares", false}}},
  };
}

namespace {

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

void merge_into(json& base, const json& user, const std::string& where) {
  if (!user.is_object()) throw Error(Errc::ConfigInvalid, where + " must be an object");
  for (const auto& [k, v] : user.items()) {
    const std::string key = where + "/" + k;
    if (!base.contains(k)) throw Error(Errc::ConfigInvalid, "unknown config key " + key);
    auto& slot = base[k];
    if (!same_kind(slot, v)) {
      throw Error(Errc::ConfigInvalid, key + " expects " + std::string(slot.type_name()) + ", got " + v.type_name());
    }
    if (slot.is_object()) {
      merge_into(slot, v, key);
    } else {
      slot = v;
    }
  }
}

}  // namespace

const json& PipelineConfig::at(const std::string& pointer) const {
  try {
    return snapshot.at(json::json_pointer(pointer));
  } catch (const json::exception&) {
    throw Error(Errc::ConfigInvalid, "missing config value " + pointer);
  }
}

std::string PipelineConfig::str(const std::string& pointer) const { return interpolate(at(pointer).get<std::string>()); }

std::string PipelineConfig::path(const std::string& key) const {
  const std::string p = str("/paths/" + key);
  if (p.empty()) return p;
  const fs::path fp(p);
  return fp.is_absolute() ? p : (fs::path(base_dir) / fp).lexically_normal().string();
}

PipelineConfig config_from_json(const json& user, const std::string& base_dir, const Overrides& o) {
  PipelineConfig c;
  c.snapshot = default_config();
  if (!user.is_null()) merge_into(c.snapshot, user, "");
  if (c.snapshot["schema_version"].get<int>() != kSchemaVersion) {
    throw Error(Errc::SchemaVersionMismatch, "config schema_version " + c.snapshot["schema_version"].dump() +
                                                 ", expected " + std::to_string(kSchemaVersion));
  }
  if (o.seed) c.snapshot["seed"] = *o.seed;
  if (o.out_dir) c.snapshot["out_dir"] = *o.out_dir;
  const auto& s = c.snapshot["seed"];
  if (!s.is_number_integer() || s.get<std::int64_t>() < 0) throw Error(Errc::ConfigInvalid, "/seed must be a non-negative integer");
  c.seed = s.get<std::uint64_t>();
  c.base_dir = base_dir.empty() ? "." : base_dir;
  c.out_dir = interpolate(c.snapshot["out_dir"].get<std::string>());
  {
    const fs::path od(c.out_dir);
    if (!od.is_absolute() && !o.out_dir) c.out_dir = (fs::path(c.base_dir) / od).lexically_normal().string();
  }
  c.threads = o.threads.value_or(1);
  if (c.threads == 0) throw Error(Errc::ConfigInvalid, "--threads must be at least 1");
  json hashed = c.snapshot;
  hashed.erase("out_dir");
  c.hash = sha256_hex(hashed.dump());

  const double lo = c.at("/supervision/tau_low").get<double>(), hi = c.at("/supervision/tau_high").get<double>();
  if (!(lo >= 0 && lo < hi && hi <= 1)) throw Error(Errc::BadThresholds, "need 0 <= tau_low < tau_high <= 1");
  if (c.at("/training/C_grid").empty()) throw Error(Errc::ConfigInvalid, "/training/C_grid is empty");
  for (const auto& v : c.at("/training/C_grid")) {
    if (!v.is_number() || v.get<double>() <= 0) throw Error(Errc::ConfigInvalid, "/training/C_grid values must be > 0");
  }
  const auto g = c.at("/evaluation/group").get<std::string>();
  if (g != "domain" && g != "channel") throw Error(Errc::ConfigInvalid, "/evaluation/group must be domain or channel");
  if (!tagger::parse_mode(c.at("/tagger/mode").get<std::string>())) {
    throw Error(Errc::ConfigInvalid, "/tagger/mode must be http, file or mock");
  }
  const auto mm = c.at("/monitor/model").get<std::string>();
  if (mm != "tags" && mm != "tfidf" && mm != "embedding" && mm != "stacked") {
    throw Error(Errc::ConfigInvalid, "/monitor/model must be tags, tfidf, embedding or stacked");
  }
  const auto rs = c.at("/urls/resolve").get<std::string>();
  if (rs != "none" && rs != "fixture" && rs != "http") throw Error(Errc::ConfigInvalid, "/urls/resolve must be none, fixture or http");
  return c;
}

PipelineConfig load_config(const std::string& path, const Overrides& o) {
  if (!io::file_exists(path)) throw Error(Errc::MissingInput, "config file not found: " + path);
  json user;
  try {
    user = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(Errc::ConfigInvalid, path + ": " + e.what());
  }
  return config_from_json(user, fs::path(path).parent_path().string(), o);
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"ingest",   "dedup",    "urls",  "supervise", "tag",     "featurize",
                                              "train",    "evaluate", "ablate", "stress",    "monitor", "report"};
  return names;
}

int exit_code(Errc e) {
  switch (e) {
    case Errc::ConfigInvalid:
    case Errc::BadThresholds: return 2;
    case Errc::MissingInput: return 3;
    case Errc::SchemaVersionMismatch: return 4;
    case Errc::Io:
    case Errc::Transport:
    case Errc::TaggerUnavailable: return 1;
    default: return 5;
  }
}

namespace {

// --- stage bookkeeping -----------------------------------------------------

class StageRun {
 public:
  StageRun(const PipelineConfig& cfg, std::string stage) : cfg_(cfg), stage_(std::move(stage)) {
    io::ensure_dir(cfg_.out_dir);
  }

  std::string artifact(const std::string& name) const { return (fs::path(cfg_.out_dir) / name).string(); }

  // Checks the upstream manifest and returns the path of one of its outputs.
  void upstream(const std::string& stage) {
    const auto mpath = artifact("manifest_" + stage + ".json");
    if (!io::file_exists(mpath)) {
      throw Error(Errc::MissingInput, "expected " + mpath + "; run the " + stage + " stage first");
    }
    const auto text = io::read_file(mpath);
    json m;
    try {
      m = json::parse(text);
    } catch (const json::parse_error&) {
      throw Error(Errc::SchemaVersionMismatch, mpath + " is not a manifest");
    }
    if (!m.contains("schema_version") || m["schema_version"] != kSchemaVersion) {
      throw Error(Errc::SchemaVersionMismatch, mpath + " has schema_version " + m.value("schema_version", json()).dump() +
                                                   ", expected " + std::to_string(kSchemaVersion));
    }
    upstream_[stage] = {{"manifest_sha256", sha256_hex(text)}, {"config_hash", m.value("config_hash", "")}};
  }

  std::string upstream_file(const std::string& stage, const std::string& name) {
    if (!upstream_.contains(stage)) upstream(stage);
    const auto p = artifact(name);
    if (!io::file_exists(p)) throw Error(Errc::MissingInput, "expected " + p + " from the " + stage + " stage");
    return p;
  }

  bool has_upstream(const std::string& stage) const {
    return io::file_exists(artifact("manifest_" + stage + ".json"));
  }

  std::string input(const std::string& key, bool required = true) {
    const auto p = cfg_.path(key);
    if (p.empty()) {
      if (required) throw Error(Errc::MissingInput, "config /paths/" + key + " is not set");
      return p;
    }
    if (!io::file_exists(p)) throw Error(Errc::MissingInput, key + " file not found: " + p);
    inputs_.push_back({{"key", key}, {"path", cfg_.at("/paths/" + key)}, {"sha256", sha256_hex(io::read_file(p))}});
    return p;
  }

  void output(const std::string& name, std::string_view content) {
    io::write_file(artifact(name), content);
    outputs_.push_back({{"file", name}, {"sha256", sha256_hex(content)}});
  }

  void output_file(const std::string& name) {
    outputs_.push_back({{"file", name}, {"sha256", sha256_hex(io::read_file(artifact(name)))}});
  }

  void finish() {
    json snap = cfg_.snapshot;
    snap.erase("out_dir");
    output("config_" + stage_ + ".json", snap.dump(2) + "\n");
    json m{{"schema_version", kSchemaVersion}, {"stage", stage_},     {"config_hash", cfg_.hash},
           {"seed", cfg_.seed},                 {"upstream", upstream_}, {"inputs", inputs_},
           {"outputs", outputs_}};
    io::write_file(artifact("manifest_" + stage_ + ".json"), m.dump(2) + "\n");
  }

  const PipelineConfig& cfg() const { return cfg_; }

 private:
  const PipelineConfig& cfg_;
  std::string stage_;
  json upstream_ = json::object();
  json inputs_ = json::array();
  json outputs_ = json::array();
};

std::vector<json> read_jsonl(const std::string& path) {
  std::vector<json> rows;
  io::for_each_jsonl(path, [&](const json& j, std::size_t) { rows.push_back(j); });
  return rows;
}

json stamped(json j, const PipelineConfig& cfg) {
  j["schema_version"] = kSchemaVersion;
  j["config_hash"] = cfg.hash;
  return j;
}

const urlkit::SuffixRules& suffix_rules(StageRun& run) {
  static std::map<std::string, urlkit::SuffixRules> cache;
  const auto p = run.input("suffix_rules", false);
  if (p.empty()) return urlkit::SuffixRules::builtin();
  auto it = cache.find(p);
  if (it == cache.end()) it = cache.emplace(p, urlkit::SuffixRules::load(p)).first;
  return it->second;
}

// --- ingest / dedup / urls -------------------------------------------------

void stage_ingest(const PipelineConfig& cfg) {
  StageRun run(cfg, "ingest");
  const auto raw = corpus::load_messages(run.input("messages"));
  const auto kept = corpus::drop_forwarded_duplicates(raw);
  std::set<std::string> kept_ids;
  for (const auto& m : kept) kept_ids.insert(m.id);
  const auto min_tokens = cfg.at("/ingest/min_tokens").get<std::size_t>();

  std::vector<json> rows, audit;
  for (const auto& m : raw) {
    if (!kept_ids.count(m.id)) {
      audit.push_back({{"message_id", m.id}, {"reason", "forwarded_duplicate"}});
      continue;
    }
    const auto canon = corpus::normalize_text(m.text);
    if (canon.empty() || corpus::is_low_information(canon, min_tokens)) {
      audit.push_back({{"message_id", m.id}, {"reason", canon.empty() ? "empty" : "low_information"}});
      continue;
    }
    json j = corpus::to_json(m);
    j["canonical_text"] = canon;
    rows.push_back(std::move(j));
  }
  run.output("ingest.jsonl", io::to_jsonl(rows));
  run.output("ingest_audit.jsonl", io::to_jsonl(audit));
  run.finish();
}

void stage_dedup(const PipelineConfig& cfg) {
  StageRun run(cfg, "dedup");
  const auto rows = read_jsonl(run.upstream_file("ingest", "ingest.jsonl"));
  const auto P = cfg.at("/dedup/permutations").get<std::size_t>();
  corpus::DedupThresholds t;
  t.jaccard = cfg.at("/dedup/jaccard").get<double>();
  t.hamming = cfg.at("/dedup/hamming").get<int>();
  t.cosine = cfg.at("/dedup/cosine").get<double>();
  t.bands = cfg.at("/dedup/bands").get<std::size_t>();
  t.rows = cfg.at("/dedup/rows").get<std::size_t>();
  if (t.bands * t.rows != P) throw Error(Errc::ConfigInvalid, "dedup bands * rows must equal permutations");

  std::vector<corpus::RawMessage> msgs;
  std::vector<std::string> canon;
  for (const auto& j : rows) {
    msgs.push_back(corpus::message_from_json(j));
    canon.push_back(j.at("canonical_text").get<std::string>());
  }
  std::vector<corpus::ClusterView> views;
  std::vector<corpus::Fingerprints> fps;
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    views.push_back({msgs[i].id, msgs[i].timestamp});
    fps.push_back(corpus::fingerprints_or_exact(canon[i], P, cfg.seed));
  }
  std::optional<corpus::EmbeddingMap> emb;
  if (cfg.at("/dedup/use_embeddings").get<bool>()) {
    auto table = features::load_embeddings(run.input("embeddings"));
    emb.emplace();
    for (const auto& m : msgs) {
      auto it = table.vectors.find(m.id);
      if (it != table.vectors.end()) (*emb)[m.id] = it->second;
    }
  }
  const auto res = corpus::cluster_near_duplicates(views, fps, emb ? &*emb : nullptr, t);

  std::vector<json> out;
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    corpus::CleanMessage c{msgs[i].id, msgs[i].channel_id, msgs[i].timestamp, canon[i],
                           msgs[res.cluster_of[i]].id, static_cast<bool>(res.kept[i])};
    out.push_back(corpus::to_json(c));
  }
  // Audit: one row per multi-member cluster, edges as a>b:reason.
  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < msgs.size(); ++i) members[res.cluster_of[i]].push_back(i);
  std::map<std::size_t, std::string> edges;
  for (const auto& e : res.edges) {
    auto& s = edges[res.cluster_of[e.a]];
    if (!s.empty()) s += ';';
    s += msgs[e.a].id + ">" + msgs[e.b].id + ":" + std::string(corpus::to_string(e.reason));
  }
  std::string csv = io::csv_row({"cluster_id", "members", "edges"});
  for (const auto& [rep, idx] : members) {
    if (idx.size() < 2) continue;
    std::string ids;
    for (auto i : idx) ids += (ids.empty() ? "" : ";") + msgs[i].id;
    csv += io::csv_row({msgs[rep].id, ids, edges[rep]});
  }
  run.output("clean.jsonl", io::to_jsonl(out));
  run.output("clusters.csv", csv);
  run.finish();
}

void stage_urls(const PipelineConfig& cfg) {
  StageRun run(cfg, "urls");
  const auto ingest = read_jsonl(run.upstream_file("ingest", "ingest.jsonl"));
  const auto clean = read_jsonl(run.upstream_file("dedup", "clean.jsonl"));
  const auto& rules = suffix_rules(run);
  const auto mode = cfg.at("/urls/resolve").get<std::string>();
  const int max_hops = cfg.at("/urls/max_hops").get<int>();
  std::unique_ptr<urlkit::RedirectResolver> resolver;
  if (mode == "fixture") {
    resolver = std::make_unique<urlkit::FixtureResolver>(urlkit::FixtureResolver::load(run.input("redirects")));
  } else if (mode == "http") {
    resolver = std::make_unique<urlkit::HttpHeadResolver>(
        net::make_http_client(cfg.at("/urls/timeout_seconds").get<double>()));
  }

  std::unordered_map<std::string, std::string> raw_text;
  for (const auto& j : ingest) raw_text[j.at("id").get<std::string>()] = j.at("text").get<std::string>();

  std::vector<json> out, audit;
  for (const auto& j : clean) {
    const auto c = corpus::clean_from_json(j);
    if (!c.kept) continue;
    const auto& text = raw_text.at(c.id);
    json urls = json::array();
    std::set<std::string> domains;
    for (const auto& u : urlkit::extract_urls(text, rules)) {
      std::string resolved = u.text;
      if (resolver) {
        const auto r = urlkit::resolve_redirects(u.text, *resolver, max_hops);
        resolved = r.url;
        if (r.warning) audit.push_back({{"message_id", c.id}, {"url", u.text}, {"warning", *r.warning}});
      }
      try {
        const auto d = urlkit::canonical_domain(resolved, rules);
        if (d.warning) audit.push_back({{"message_id", c.id}, {"url", resolved}, {"warning", *d.warning}});
        domains.insert(d.domain);
        urls.push_back({{"raw", u.text}, {"resolved", resolved}, {"canonical_domain", d.domain}});
      } catch (const Error& e) {
        audit.push_back({{"message_id", c.id}, {"url", resolved}, {"warning", e.what()}});
      }
    }
    const auto masked = urlkit::mask_urls(c.canonical_text, rules);
    out.push_back({{"message_id", c.id},
                   {"masked_text", masked.text()},
                   {"url_count", masked.url_count()},
                   {"urls", urls},
                   {"domains", std::vector<std::string>(domains.begin(), domains.end())}});
  }
  run.output("urls.jsonl", io::to_jsonl(out));
  run.output("url_audit.jsonl", io::to_jsonl(audit));
  run.finish();
}

// --- supervise / tag -------------------------------------------------------

void stage_supervise(const PipelineConfig& cfg) {
  StageRun run(cfg, "supervise");
  const auto urls = read_jsonl(run.upstream_file("urls", "urls.jsonl"));
  const auto dump = supervision::load_mbfc_csv(run.input("mbfc"));
  const auto ratings = supervision::canonicalize_mbfc(dump.records);
  const auto risk = supervision::build_risk_map(ratings);
  const supervision::Thresholds t{cfg.at("/supervision/tau_low").get<double>(),
                                  cfg.at("/supervision/tau_high").get<double>()};

  std::string csv = io::csv_row({"domain", "credibility", "factual_reporting", "r_c", "r_f", "risk"});
  for (const auto& [d, r] : risk) {
    const auto& rt = ratings.at(d);
    csv += io::csv_row({d, std::string(supervision::to_string(rt.credibility)),
                        std::string(supervision::to_string(rt.factual)), io::fmt_double(r.r_c), io::fmt_double(r.r_f),
                        io::fmt_double(r.risk)});
  }
  std::vector<json> audit;
  for (const auto& a : dump.skipped) audit.push_back({{"kind", a.kind}, {"domain", a.domain}, {"detail", a.detail}});

  std::vector<json> out;
  std::map<std::string, std::size_t> counts;
  for (const auto& j : urls) {
    const auto domains = j.at("domains").get<std::vector<std::string>>();
    const auto s = supervision::supervise(j.at("message_id").get<std::string>(), domains, risk, t);
    ++counts[std::string(supervision::to_string(s.label))];
    out.push_back({{"message_id", s.message_id},
                   {"R_msg", s.r_msg ? json(*s.r_msg) : json()},
                   {"supervising_domain", s.supervising_domain ? json(*s.supervising_domain) : json()},
                   {"label", supervision::to_string(s.label)}});
  }
  run.output("domain_risk.csv", csv);
  run.output("mbfc_audit.jsonl", io::to_jsonl(audit));
  run.output("supervision.jsonl", io::to_jsonl(out));
  run.output("supervision_summary.json", stamped({{"labels", counts}, {"rated_domains", risk.size()}}, cfg).dump(2) + "\n");
  run.finish();
}

tagger::TaggerConfig tagger_config(const PipelineConfig& cfg, StageRun& run) {
  tagger::TaggerConfig t;
  t.mode = *tagger::parse_mode(cfg.at("/tagger/mode").get<std::string>());
  t.endpoint = cfg.str("/tagger/endpoint");
  t.auth_header = cfg.str("/tagger/auth_header");
  t.auth_token_env = cfg.str("/tagger/auth_token_env");
  t.retries = cfg.at("/tagger/retries").get<int>();
  t.timeout_seconds = cfg.at("/tagger/timeout_seconds").get<double>();
  t.backoff_ms = cfg.at("/tagger/backoff_ms").get<double>();
  t.max_in_flight = std::min(cfg.at("/tagger/max_in_flight").get<std::size_t>(), cfg.threads);
  t.seed = cfg.seed;
  t.validation.none_evidence_exclusive = cfg.at("/tagger/none_evidence_exclusive").get<bool>();
  if (t.mode == tagger::Mode::File) t.tag_file = run.input("tag_file");
  if (t.mode == tagger::Mode::Http && t.endpoint.empty()) throw Error(Errc::ConfigInvalid, "/tagger/endpoint is empty");
  return t;
}

void stage_tag(const PipelineConfig& cfg) {
  StageRun run(cfg, "tag");
  const auto urls = read_jsonl(run.upstream_file("urls", "urls.jsonl"));
  const auto tc = tagger_config(cfg, run);
  auto tg = tagger::make_tagger(tc, tc.mode == tagger::Mode::Http ? net::make_http_client(tc.timeout_seconds) : nullptr);
  std::vector<tagger::TagRequest> reqs;
  for (const auto& j : urls) {
    reqs.push_back({j.at("message_id").get<std::string>(), urlkit::mask_urls(j.at("masked_text").get<std::string>())});
  }
  const auto outcomes = tagger::tag_all(*tg, reqs, std::max<std::size_t>(1, tc.max_in_flight), tc.validation);
  std::vector<json> tags, quarantine;
  for (const auto& o : outcomes) {
    if (o.assignment) {
      json j = codebook::to_json(*o.assignment);
      j["message_id"] = o.message_id;
      tags.push_back(std::move(j));
    } else {
      json v = json::array();
      for (const auto& x : o.violations) v.push_back({{"rule", x.rule}, {"detail", x.detail}});
      quarantine.push_back({{"message_id", o.message_id}, {"error", o.error.value_or("")}, {"violations", v}});
    }
  }
  run.output("tags.jsonl", io::to_jsonl(tags));
  run.output("tag_quarantine.jsonl", io::to_jsonl(quarantine));
  run.output("tag_summary.json", stamped({{"mode", cfg.at("/tagger/mode")},
                                          {"mock_rules_version", tagger::kMockRulesVersion},
                                          {"tagged", tags.size()},
                                          {"quarantined", quarantine.size()}},
                                         cfg)
                                         .dump(2) +
                                     "\n");
  run.finish();
}

// --- dataset ---------------------------------------------------------------

struct Row {
  std::string id, channel, domain, masked;
  std::int64_t timestamp = 0;
  int label = -1;  // -1: not in the labelled set
  TagAssignment tags;
};

// Kept, validly tagged messages in clean order; labelled ones carry label/domain.
std::vector<Row> joined_rows(StageRun& run) {
  const auto clean = read_jsonl(run.upstream_file("dedup", "clean.jsonl"));
  const auto urls = read_jsonl(run.upstream_file("urls", "urls.jsonl"));
  const auto tags = read_jsonl(run.upstream_file("tag", "tags.jsonl"));
  const auto sup = read_jsonl(run.upstream_file("supervise", "supervision.jsonl"));
  std::unordered_map<std::string, std::string> masked;
  for (const auto& j : urls) masked[j.at("message_id").get<std::string>()] = j.at("masked_text").get<std::string>();
  std::unordered_map<std::string, TagAssignment> tag_of;
  for (const auto& j : tags) tag_of[j.at("message_id").get<std::string>()] = codebook::from_json(j);
  std::unordered_map<std::string, std::pair<int, std::string>> label_of;
  for (const auto& j : sup) {
    const auto l = supervision::parse_label(j.at("label").get<std::string>());
    if (l == supervision::Label::Positive || l == supervision::Label::Negative) {
      label_of[j.at("message_id").get<std::string>()] = {l == supervision::Label::Positive ? 1 : 0,
                                                         j.at("supervising_domain").get<std::string>()};
    }
  }
  std::vector<Row> rows;
  for (const auto& j : clean) {
    const auto c = corpus::clean_from_json(j);
    if (!c.kept) continue;
    auto t = tag_of.find(c.id);
    auto m = masked.find(c.id);
    if (t == tag_of.end() || m == masked.end()) continue;
    Row r{c.id, c.channel_id, "", m->second, c.timestamp, -1, t->second};
    if (auto l = label_of.find(c.id); l != label_of.end()) {
      r.label = l->second.first;
      r.domain = l->second.second;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

json row_json(const Row& r) {
  json j = codebook::to_json(r.tags);
  j["message_id"] = r.id;
  j["channel_id"] = r.channel;
  j["timestamp"] = r.timestamp;
  j["label"] = r.label;
  j["domain"] = r.domain;
  j["masked_text"] = r.masked;
  return j;
}

Row row_from_json(const json& j) {
  Row r;
  r.id = j.at("message_id").get<std::string>();
  r.channel = j.at("channel_id").get<std::string>();
  r.timestamp = j.at("timestamp").get<std::int64_t>();
  r.label = j.at("label").get<int>();
  r.domain = j.at("domain").get<std::string>();
  r.masked = j.at("masked_text").get<std::string>();
  r.tags = codebook::from_json(j);
  return r;
}

struct Dataset {
  std::vector<std::string> ids, domains, channels;
  std::vector<int> labels;
  std::vector<TagAssignment> tags;
  std::vector<urlkit::MaskedText> masked;
  std::vector<std::vector<double>> embeddings;  // empty when not configured

  eval::Labeled labeled() const { return {ids, labels, domains, channels}; }
};

Dataset load_dataset(StageRun& run) {
  Dataset d;
  for (const auto& j : read_jsonl(run.upstream_file("featurize", "dataset.jsonl"))) {
    auto r = row_from_json(j);
    d.ids.push_back(r.id);
    d.domains.push_back(r.domain);
    d.channels.push_back(r.channel);
    d.labels.push_back(r.label);
    d.tags.push_back(r.tags);
    d.masked.push_back(urlkit::mask_urls(r.masked));
  }
  const auto ep = run.artifact("features_embedding.t2cm");
  if (io::file_exists(ep)) {
    const auto lm = read_matrix(ep);
    if (lm.ids != d.ids) throw Error(Errc::SchemaVersionMismatch, ep + " rows do not match dataset.jsonl");
    for (std::size_t i = 0; i < lm.matrix.rows; ++i) d.embeddings.push_back(lm.matrix.dense_row(i));
  }
  return d;
}

void stage_featurize(const PipelineConfig& cfg) {
  StageRun run(cfg, "featurize");
  std::vector<Row> rows;
  for (auto& r : joined_rows(run)) {
    if (r.label >= 0) rows.push_back(std::move(r));
  }
  if (rows.empty()) throw Error(Errc::EmptyTraining, "no labelled, validly tagged messages");
  std::vector<json> out;
  std::vector<std::string> ids;
  std::vector<TagAssignment> tags;
  for (const auto& r : rows) {
    out.push_back(row_json(r));
    ids.push_back(r.id);
    tags.push_back(r.tags);
  }
  run.output("dataset.jsonl", io::to_jsonl(out));
  // The full codebook index is fixed, so it carries no information from any split.
  const auto index = features::fit_tag_index(features::TrainOnly<TagAssignment>(tags));
  write_matrix(run.artifact("features_tags.t2cm"), features::tag_matrix(tags, index), ids);
  run.output_file("features_tags.t2cm");
  run.output_file("features_tags.t2cm.ids");
  const auto ep = cfg.path("embeddings");
  if (!ep.empty()) {
    const auto table = features::load_embeddings(run.input("embeddings"));
    const auto vecs = features::gather_embeddings(table, ids);
    SparseMatrix m(table.dim);
    for (const auto& v : vecs) m.push_dense_row(v);
    write_matrix(run.artifact("features_embedding.t2cm"), m, ids);
    run.output_file("features_embedding.t2cm");
    run.output_file("features_embedding.t2cm.ids");
  }
  std::size_t pos = 0;
  for (const auto& r : rows) pos += r.label == 1;
  run.output("featurize_summary.json",
             stamped({{"rows", rows.size()},
                      {"positives", pos},
                      {"tag_index_fingerprint", index.fingerprint()},
                      {"embeddings", !ep.empty()}},
                     cfg)
                     .dump(2) +
                 "\n");
  run.finish();
}

// --- training / evaluation helpers ----------------------------------------

eval::ExperimentConfig experiment_config(const PipelineConfig& cfg) {
  eval::ExperimentConfig e;
  e.seeds = cfg.at("/evaluation/seeds").get<std::vector<std::uint64_t>>();
  if (e.seeds.empty()) throw Error(Errc::ConfigInvalid, "/evaluation/seeds is empty");
  e.group_kind = cfg.at("/evaluation/group").get<std::string>() == "domain" ? eval::GroupKind::Domain
                                                                             : eval::GroupKind::Channel;
  e.test_frac = cfg.at("/evaluation/test_frac").get<double>();
  e.val_frac = cfg.at("/evaluation/val_frac").get<double>();
  e.channel_candidates = cfg.at("/evaluation/channel_candidates").get<std::size_t>();
  e.protocol.C_grid = cfg.at("/training/C_grid").get<std::vector<double>>();
  e.protocol.balanced = cfg.at("/training/balanced").get<bool>();
  e.protocol.train.grad_tol = cfg.at("/training/grad_tol").get<double>();
  e.protocol.train.max_iter = cfg.at("/training/max_iter").get<int>();
  return e;
}

features::TfidfConfig tfidf_config(const PipelineConfig& cfg) {
  features::TfidfConfig t;
  t.min_token_len = cfg.at("/features/tfidf_min_token_len").get<std::size_t>();
  t.max_ngram = cfg.at("/features/tfidf_max_ngram").get<std::size_t>();
  t.max_features = cfg.at("/features/tfidf_max_features").get<std::size_t>();
  return t;
}

eval::StackingOptions stacking_options(const PipelineConfig& cfg) {
  eval::StackingOptions s;
  s.meta_C = cfg.at("/training/meta_C").get<double>();
  s.oof_folds = cfg.at("/training/oof_folds").get<int>();
  return s;
}

std::vector<std::string> base_ids(const Dataset& d) {
  std::vector<std::string> ids{"tags", "tfidf"};
  if (!d.embeddings.empty()) ids.push_back("embedding");
  return ids;
}

eval::FeatureBuilder builder_for(const std::string& id, const Dataset& d, const PipelineConfig& cfg) {
  if (id == "tags") return eval::tag_features(d.tags, {codebook::kAllFields.begin(), codebook::kAllFields.end()});
  if (id == "tfidf") return eval::tfidf_features(d.masked, tfidf_config(cfg));
  if (id == "embedding") return eval::embedding_features(d.embeddings);
  throw Error(Errc::ConfigInvalid, "unknown base model " + id);
}

// A fitted featurizer plus model, enough to score any tagged message.
struct Deployed {
  std::string id;
  features::TagIndex index;
  features::TfidfModel tfidf;
  features::Standardizer standardizer;
  learn::TrainedModel trained;
};

template <class T>
std::vector<T> pick(std::span<const T> v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

struct ScoreInput {
  std::span<const TagAssignment> tags;
  std::span<const urlkit::MaskedText> masked;
  std::span<const std::vector<double>> embeddings;
};

SparseMatrix featurize_rows(const Deployed& m, const ScoreInput& in) {
  if (m.id == "tags") return features::tag_matrix(in.tags, m.index);
  if (m.id == "tfidf") return m.tfidf.transform(in.masked);
  return m.standardizer.transform(in.embeddings);
}

void fit_featurizer(Deployed& m, const ScoreInput& train, const PipelineConfig& cfg) {
  if (m.id == "tags") {
    m.index = features::fit_tag_index(features::TrainOnly<TagAssignment>(train.tags));
  } else if (m.id == "tfidf") {
    m.tfidf = features::TfidfModel::fit(features::TrainOnly<urlkit::MaskedText>(train.masked), tfidf_config(cfg));
  } else {
    m.standardizer = features::Standardizer::fit(features::TrainOnly<std::vector<double>>(train.embeddings));
  }
}

learn::FeatureSpace space_of(const Deployed& m) {
  if (m.id == "tags") return {features::Kind::TagMultihot, m.index.size(), m.index.fingerprint()};
  if (m.id == "tfidf") return {features::Kind::Tfidf, m.tfidf.size(), m.tfidf.fingerprint()};
  const auto d = m.standardizer.mean().size();
  return {features::Kind::Embedding, d, sha256_hex("embedding:" + std::to_string(d))};
}

json deployed_json(const Deployed& m) {
  json f;
  if (m.id == "tags") {
    json cols = json::array();
    for (const auto& c : m.index.columns()) cols.push_back({codebook::field_name(c.field), c.label});
    f = {{"columns", cols}, {"fingerprint", m.index.fingerprint()}};
  } else if (m.id == "tfidf") {
    f = m.tfidf.to_json();
  } else {
    f = m.standardizer.to_json();
  }
  return {{"id", m.id}, {"featurizer", f}, {"model", learn::to_json(m.trained)}};
}

Deployed deployed_from_json(const json& j) {
  Deployed m;
  m.id = j.at("id").get<std::string>();
  const auto& f = j.at("featurizer");
  if (m.id == "tags") {
    std::vector<features::TagColumn> cols;
    for (const auto& c : f.at("columns")) {
      const auto field = codebook::parse_field(c.at(0).get<std::string>());
      if (!field) throw Error(Errc::SchemaVersionMismatch, "unknown field in tag index");
      cols.push_back({*field, c.at(1).get<int>()});
    }
    m.index = features::TagIndex(std::move(cols));
    if (m.index.fingerprint() != f.at("fingerprint").get<std::string>()) {
      throw Error(Errc::FeatureSpaceMismatch, "tag index fingerprint changed");
    }
  } else if (m.id == "tfidf") {
    m.tfidf = features::TfidfModel::from_json(f);
  } else {
    m.standardizer = features::Standardizer::from_json(f);
  }
  m.trained = learn::trained_from_json(j.at("model"));
  return m;
}

std::vector<double> raw_probs(const Deployed& m, const ScoreInput& in) {
  const auto X = featurize_rows(m, in);
  return learn::predict_proba(m.trained.model, X, space_of(m));
}

std::vector<double> calibrated(const learn::TrainedModel& t, const SparseMatrix& X) {
  return t.platt.apply(learn::decision_function(t.model, X, t.model.space));
}

json split_metrics(std::span<const double> probs, std::span<const double> raw, std::span<const int> y, double thr) {
  const auto preds = learn::apply_threshold(probs, thr);
  const auto m = eval::test_metrics(probs, raw, preds, y);
  return {{"accuracy", m.accuracy}, {"roc_auc", m.roc_auc}, {"roc_auc_uncalibrated", m.auc_raw},
          {"macro_f1", m.macro_f1}, {"brier", m.brier},     {"ece", m.ece},
          {"n", y.size()}};
}

void stage_train(const PipelineConfig& cfg) {
  StageRun run(cfg, "train");
  const Dataset d = load_dataset(run);
  const auto ec = experiment_config(cfg);
  const auto split = eval::make_split(d.labeled(), ec, cfg.seed);
  const auto ytr = pick<int>(d.labels, split.train);
  const auto yva = pick<int>(d.labels, split.val);
  const auto yte = pick<int>(d.labels, split.test);
  auto part = [&](std::span<const std::size_t> idx, std::vector<TagAssignment>& t,
                  std::vector<urlkit::MaskedText>& mt, std::vector<std::vector<double>>& e) {
    t = pick<TagAssignment>(d.tags, idx);
    mt = pick<urlkit::MaskedText>(d.masked, idx);
    if (!d.embeddings.empty()) e = pick<std::vector<double>>(d.embeddings, idx);
    return ScoreInput{t, mt, e};
  };
  std::vector<TagAssignment> t_tr, t_va, t_te;
  std::vector<urlkit::MaskedText> m_tr, m_va, m_te;
  std::vector<std::vector<double>> e_tr, e_va, e_te;
  const auto in_tr = part(split.train, t_tr, m_tr, e_tr);
  const auto in_va = part(split.val, t_va, m_va, e_va);
  const auto in_te = part(split.test, t_te, m_te, e_te);
  const auto groups = pick<std::string>(ec.group_kind == eval::GroupKind::Domain ? d.domains : d.channels, split.train);
  const auto sopts = stacking_options(cfg);

  json report{{"seed", cfg.seed},
              {"split", {{"group", eval::to_string(split.group_kind)},
                         {"train", split.train.size()},
                         {"val", split.val.size()},
                         {"test", split.test.size()}}}};
  std::vector<std::string> ids = base_ids(d);
  std::vector<std::vector<double>> oof_cols, va_cols, te_cols;
  for (const auto& id : ids) {
    Deployed m;
    m.id = id;
    fit_featurizer(m, in_tr, cfg);
    const auto Xtr = featurize_rows(m, in_tr), Xva = featurize_rows(m, in_va), Xte = featurize_rows(m, in_te);
    auto po_opts = ec.protocol;
    po_opts.train.seed = cfg.seed;
    const auto po = learn::full_protocol({&Xtr, ytr}, {&Xva, yva}, {&Xte, yte}, space_of(m), po_opts);
    m.trained = po.trained;
    report["models"][id] = split_metrics(po.test_probs, po.test_raw, yte, po.trained.threshold);
    report["models"][id]["C"] = po.trained.model.C;
    run.output("model_" + id + ".json", stamped(deployed_json(m), cfg).dump(2) + "\n");

    auto o = po_opts.train;
    o.C = po.trained.model.C;
    oof_cols.push_back(learn::out_of_fold_probs(Xtr, ytr, groups, o, sopts.oof_folds, cfg.seed, ec.protocol.balanced));
    va_cols.push_back(po.val_raw);
    te_cols.push_back(po.test_raw);
  }
  const auto Xtr = learn::probability_matrix(oof_cols), Xva = learn::probability_matrix(va_cols),
             Xte = learn::probability_matrix(te_cols);
  auto meta = ec.protocol;
  meta.C_grid = {sopts.meta_C};
  meta.train.seed = cfg.seed;
  auto po = learn::full_protocol({&Xtr, ytr}, {&Xva, yva}, {&Xte, yte}, learn::stacked_space(ids), meta);
  po.trained.base_ids = ids;
  report["models"]["stacked"] = split_metrics(po.test_probs, po.test_raw, yte, po.trained.threshold);
  run.output("model_stacked.json", stamped({{"id", "stacked"}, {"bases", ids}, {"model", learn::to_json(po.trained)}}, cfg).dump(2) + "\n");
  run.output("train_report.json", stamped(report, cfg).dump(2) + "\n");
  run.finish();
}

void write_reports(StageRun& run, const std::string& stem, const std::vector<eval::MetricsReport>& reports,
                   const json& extra) {
  json j = extra;
  j["models"] = json::array();
  for (const auto& r : reports) j["models"].push_back(eval::to_json(r));
  run.output(stem + ".json", stamped(j, run.cfg()).dump(2) + "\n");
  run.output(stem + ".csv", eval::report_csv(reports));
}

void stage_evaluate(const PipelineConfig& cfg) {
  StageRun run(cfg, "evaluate");
  const Dataset d = load_dataset(run);
  const auto ec = experiment_config(cfg);
  std::vector<eval::MetricsReport> reports;
  json skipped = json::array();
  for (const auto& name : cfg.at("/evaluation/models").get<std::vector<std::string>>()) {
    eval::ExperimentResult res;
    if (name == "embedding" && d.embeddings.empty()) {
      skipped.push_back({{"model", name}, {"reason", "no embeddings configured"}});
      continue;
    }
    if (name == "stacked") {
      const auto ids = base_ids(d);
      std::vector<eval::FeatureBuilder> bases;
      for (const auto& id : ids) bases.push_back(builder_for(id, d, cfg));
      res = eval::run_stacked(d.labeled(), bases, ids, ec, stacking_options(cfg), name);
    } else {
      res = eval::run_experiment(d.labeled(), builder_for(name, d, cfg), ec, name);
    }
    run.output("predictions_" + name + ".jsonl", eval::predictions_jsonl(res.predictions));
    reports.push_back(std::move(res.report));
  }
  write_reports(run, "evaluation", reports, {{"skipped", skipped}});
  run.finish();
}

void stage_ablate(const PipelineConfig& cfg) {
  StageRun run(cfg, "ablate");
  const Dataset d = load_dataset(run);
  const auto subsets = cfg.at("/ablation/subsets").get<std::vector<std::string>>();
  const auto rows = eval::ablation_suite(d.labeled(), d.tags, subsets, experiment_config(cfg));
  std::vector<eval::MetricsReport> reports;
  for (const auto& r : rows) reports.push_back(r.report);
  write_reports(run, "ablation", reports, json::object());
  run.finish();
}

void stage_stress(const PipelineConfig& cfg) {
  StageRun run(cfg, "stress");
  const Dataset d = load_dataset(run);
  const auto rates = cfg.at("/stress/rates").get<std::vector<double>>();
  const auto pts = eval::noise_stress(d.labeled(), d.tags, rates, experiment_config(cfg), cfg.seed);
  std::string csv = io::csv_row({"flip_rate", "Acc", "AUC", "Macro-F1", "Brier", "ECE"});
  json arr = json::array();
  for (const auto& p : pts) {
    const auto& m = p.metrics;
    csv += io::csv_row({io::fmt_double(p.rate), io::fmt_fixed(m.accuracy, 3), io::fmt_fixed(m.roc_auc, 3),
                        io::fmt_fixed(m.macro_f1, 3), io::fmt_fixed(m.brier, 3), io::fmt_fixed(m.ece, 3)});
    arr.push_back({{"flip_rate", p.rate},   {"accuracy", m.accuracy}, {"roc_auc", m.roc_auc},
                   {"macro_f1", m.macro_f1}, {"brier", m.brier},       {"ece", m.ece}});
  }
  run.output("stress.csv", csv);
  run.output("stress.json", stamped({{"seed", cfg.seed}, {"points", arr}}, cfg).dump(2) + "\n");
  run.finish();
}

// --- monitor / report ------------------------------------------------------

void stage_monitor(const PipelineConfig& cfg) {
  StageRun run(cfg, "monitor");
  const auto model_name = cfg.at("/monitor/model").get<std::string>();
  const auto rows = joined_rows(run);
  if (rows.empty()) throw Error(Errc::EmptySet, "no tagged messages to monitor");

  std::vector<TagAssignment> tags;
  std::vector<urlkit::MaskedText> masked;
  std::vector<std::vector<double>> emb;
  for (const auto& r : rows) {
    tags.push_back(r.tags);
    masked.push_back(urlkit::mask_urls(r.masked));
  }
  auto load_model = [&](const std::string& id) {
    const auto p = run.upstream_file("train", "model_" + id + ".json");
    const auto j = json::parse(io::read_file(p));
    if (j.value("schema_version", 0) != kSchemaVersion) throw Error(Errc::SchemaVersionMismatch, p);
    return j;
  };
  auto need_embeddings = [&] {
    if (!emb.empty()) return;
    const auto table = features::load_embeddings(run.input("embeddings"));
    std::vector<std::string> ids;
    for (const auto& r : rows) ids.push_back(r.id);
    emb = features::gather_embeddings(table, ids);
  };

  std::vector<double> p_hat;
  if (model_name == "stacked") {
    const auto j = load_model("stacked");
    const auto meta = learn::trained_from_json(j.at("model"));
    std::vector<std::vector<double>> cols;
    for (const auto& id : j.at("bases").get<std::vector<std::string>>()) {
      if (id == "embedding") need_embeddings();
      const auto m = deployed_from_json(load_model(id));
      cols.push_back(raw_probs(m, {tags, masked, emb}));
    }
    p_hat = calibrated(meta, learn::probability_matrix(cols));
  } else {
    if (model_name == "embedding") need_embeddings();
    const auto m = deployed_from_json(load_model(model_name));
    p_hat = calibrated(m.trained, featurize_rows(m, {tags, masked, emb}));
  }

  std::vector<monitor::ScoredMessage> scored;
  std::vector<json> scored_rows;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    monitor::ScoredMessage s{rows[i].id, rows[i].channel, rows[i].timestamp, iso_week_key(rows[i].timestamp),
                             rows[i].tags, p_hat[i]};
    scored_rows.push_back(monitor::to_json(s));
    scored.push_back(std::move(s));
  }
  monitor::MonitorOptions mo;
  mo.tail_frac = cfg.at("/monitor/tail_frac").get<double>();
  mo.alpha0_scale = cfg.at("/monitor/alpha0_scale").get<double>();
  mo.k = cfg.at("/monitor/k").get<std::size_t>();
  mo.min_week_count = cfg.at("/monitor/min_week_count").get<double>();
  mo.risk_mass_shares = cfg.at("/monitor/risk_mass_shares").get<bool>();
  mo.seed = cfg.seed;
  mo.model_id = model_name;
  const auto rep = monitor::run_monitor(scored, mo);

  std::string shares = io::csv_row({"field", "tag", "count", "risk_mass", "vol_share", "risk_share"});
  for (const auto& s : rep.shares) {
    shares += io::csv_row({std::string(codebook::field_name(s.tag.field)),
                           std::string(codebook::labels(s.tag.field)[static_cast<std::size_t>(s.tag.label)]),
                           std::to_string(s.count), io::fmt_double(s.mass), io::fmt_double(s.vol_share),
                           io::fmt_double(s.risk_share)});
  }
  run.output("scored.jsonl", io::to_jsonl(scored_rows));
  run.output("monitor_shares.csv", shares);
  run.output("monitor_enrichment.csv", monitor::enrichment_csv(rep));
  run.output("monitor_prototypes.csv", monitor::prototype_csv(rep));
  run.output("monitor_families.csv", monitor::family_csv(rep));
  run.output("monitor_drift.csv", monitor::drift_csv(rep));
  run.output("monitor_summary.json", stamped(monitor::summary_json(rep, mo), cfg).dump(2) + "\n");
  run.finish();
}

std::string md_table(const std::string& csv) {
  const auto rows = io::parse_csv(csv);
  if (rows.empty()) return "";
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out += "|";
    for (const auto& c : rows[r]) out += " " + c + " |";
    out += "\n";
    if (r == 0) {
      out += "|";
      for (std::size_t c = 0; c < rows[0].size(); ++c) out += "---|";
      out += "\n";
    }
  }
  return out;
}

void stage_report(const PipelineConfig& cfg) {
  StageRun run(cfg, "report");
  std::string md = "# tag2cred run report\n\nconfig hash: `" + cfg.hash + "`\n\n";
  md += "## Evaluation (mean±std over seeds)\n\n" + md_table(io::read_file(run.upstream_file("evaluate", "evaluation.csv")));
  if (run.has_upstream("ablate")) {
    md += "\n## Tag-field ablation\n\n" + md_table(io::read_file(run.upstream_file("ablate", "ablation.csv")));
  }
  if (run.has_upstream("stress")) {
    md += "\n## Tagger-noise stress\n\n" + md_table(io::read_file(run.upstream_file("stress", "stress.csv")));
  }
  if (run.has_upstream("monitor")) {
    const auto s = json::parse(io::read_file(run.upstream_file("monitor", "monitor_summary.json")));
    md += "\n## Monitoring (" + s.value("model_id", "") + " scores)\n\n";
    md += "- messages: " + s["messages"].dump() + ", risk mass: " + io::fmt_fixed(s["risk_mass"].get<double>(), 2) + "\n";
    md += "- tail size: " + s["tail_size"].dump() + " (threshold " + io::fmt_fixed(s["tail_threshold"].get<double>(), 3) + ")\n";
    md += "- prototypes: " + s["prototypes"].dump() + ", top-10 coverage " +
          io::fmt_fixed(s["coverage_top10"].get<double>(), 3) + "\n";
    md += "- max weekly drift (JSD, nats): " + io::fmt_fixed(s["max_weekly_drift"].get<double>(), 4) + "\n";
    md += "\nTop enriched tags in the tail:\n\n| tag | z | lift |\n|---|---|---|\n";
    for (const auto& t : s["top_enriched"]) {
      md += "| " + t["tag"].get<std::string>() + " | " + io::fmt_fixed(t["z"].get<double>(), 2) + " | " +
            io::fmt_fixed(t["lift"].get<double>(), 2) + " |\n";
    }
  }
  run.output("report.md", md);
  run.finish();
}

}  // namespace

void run_stage(const std::string& stage, const PipelineConfig& cfg) {
  static const std::map<std::string, void (*)(const PipelineConfig&)> table{
      {"ingest", stage_ingest},     {"dedup", stage_dedup},       {"urls", stage_urls},
      {"supervise", stage_supervise}, {"tag", stage_tag},         {"featurize", stage_featurize},
      {"train", stage_train},       {"evaluate", stage_evaluate}, {"ablate", stage_ablate},
      {"stress", stage_stress},     {"monitor", stage_monitor},   {"report", stage_report}};
  const auto it = table.find(stage);
  if (it == table.end()) throw Error(Errc::ConfigInvalid, "unknown stage " + stage);
  it->second(cfg);
}

PipelineConfig run_demo(const DemoOptions& opts) {
  const fs::path root(opts.out_dir);
  synth::SynthConfig sc;
  sc.seed = opts.seed;
  sc.n_messages = opts.messages;
  const auto corpus = synth::generate(sc);
  synth::write_corpus(corpus, (root / "input").string());
  const json user{{"seed", opts.seed},
                  {"out_dir", "artifacts"},
                  {"paths",
                   {{"messages", "input/messages.jsonl"},
                    {"mbfc", "input/mbfc.csv"},
                    {"embeddings", "input/embeddings.csv"},
                    {"tag_file", "input/tags.jsonl"}}},
                  {"tagger", {{"mode", "file"}}}};
  io::write_file((root / "config.json").string(), user.dump(2) + "\n");
  Overrides o;
  o.threads = opts.threads;
  auto cfg = load_config((root / "config.json").string(), o);
  for (const auto& s : stage_names()) run_stage(s, cfg);
  return cfg;
}

}  // namespace tag2cred::pipeline
