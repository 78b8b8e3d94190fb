#pragma once

// Seeded synthetic corpus: tags drive the label through a known logistic model,
// the label picks the risk class of the linked domain.

#include <cstdint>
#include <string>
#include <vector>

#include "tag2cred/codebook.hpp"
#include "tag2cred/corpus.hpp"
#include "tag2cred/features.hpp"

namespace tag2cred::synth {

enum class Signal { AllFields, CtaOnly };

struct SynthConfig {
  std::size_t n_messages = 5000;
  std::size_t n_channels = 40;
  std::size_t n_domains = 200;
  Signal signal = Signal::AllFields;
  std::uint64_t seed = 0;
  int weeks = 12;
  std::int64_t start = 1746403200;  // Monday 2025-05-05 00:00 UTC
  double positive_rate = 0.4;
  double signal_scale = 4.5;
  double fuzzy_frac = 0.05;     // messages linking a mid-risk domain only
  double no_url_frac = 0.02;
  double dup_frac = 0.03;       // extra verbatim copies in other channels
  double forward_frac = 0.02;   // forwarded copies (fwd_id set)
  std::size_t emb_dim = 16;
  double emb_noise = 0.5;
  int burst_week = 5;           // week index with boosted Buy / invest share; < 0 disables
  double burst_boost = 0.25;
};

// Ground truth for one originally generated message (copies are not listed).
struct Truth {
  std::string id;
  double p = 0.0;
  int y = 0;
  std::string domain;  // supervising domain by construction (empty if none)
};

struct SynthCorpus {
  std::vector<corpus::RawMessage> messages;
  std::vector<codebook::TagAssignment> tags;  // parallel to messages
  std::string mbfc_csv;
  features::EmbeddingTable embeddings;
  std::vector<Truth> truth;
  std::vector<double> beta;  // per codebook column
  double intercept = 0.0;
};

double true_logit(const codebook::TagAssignment& a, const std::vector<double>& beta, double intercept);

SynthCorpus generate(const SynthConfig& cfg);

// Random assignment that passes default validation.
codebook::TagAssignment random_assignment(Rng& rng);

// Files: messages.jsonl, mbfc.csv, tags.jsonl, embeddings.csv.
void write_corpus(const SynthCorpus& c, const std::string& dir);

// AUC of the generating probabilities against the realised labels.
double bayes_auc(const SynthCorpus& c);

}  // namespace tag2cred::synth
