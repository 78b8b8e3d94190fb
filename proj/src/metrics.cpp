#include "tag2cred/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "tag2cred/error.hpp"

namespace tag2cred::metrics {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw Error(Errc::LengthMismatch, std::to_string(a) + " vs " + std::to_string(b));
}

double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

Confusion confusion(std::span<const int> preds, std::span<const int> labels) {
  check_lengths(preds.size(), labels.size());
  Confusion c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] != 0;
    const bool y = labels[i] != 0;
    if (p && y) ++c.tp;
    else if (p) ++c.fp;
    else if (y) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double accuracy(std::span<const int> preds, std::span<const int> labels) {
  const auto c = confusion(preds, labels);
  const std::size_t n = c.tp + c.fp + c.fn + c.tn;
  return n == 0 ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
}

double macro_f1(const Confusion& c) {
  // F1 of class 0 swaps the roles of fp and fn (tn acts as tp).
  return 0.5 * (f1(c.tp, c.fp, c.fn) + f1(c.tn, c.fn, c.fp));
}

double macro_f1(std::span<const int> preds, std::span<const int> labels) { return macro_f1(confusion(preds, labels)); }

double roc_auc(std::span<const double> probs, std::span<const int> labels) {
  check_lengths(probs.size(), labels.size());
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] < probs[b]; });
  std::uint64_t npos = 0, nneg = 0, twice = 0;  // twice = 2*wins + ties
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::uint64_t gp = 0, gn = 0;
    while (j < order.size() && probs[order[j]] == probs[order[i]]) {
      (labels[order[j]] != 0 ? gp : gn)++;
      ++j;
    }
    twice += 2 * gp * nneg + gp * gn;
    npos += gp;
    nneg += gn;
    i = j;
  }
  if (npos == 0 || nneg == 0) throw Error(Errc::SingleClass, "AUC needs both classes");
  return static_cast<double>(twice) / (2.0 * static_cast<double>(npos) * static_cast<double>(nneg));
}

double brier(std::span<const double> probs, std::span<const int> labels) {
  check_lengths(probs.size(), labels.size());
  if (probs.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double d = probs[i] - (labels[i] != 0 ? 1.0 : 0.0);
    s += d * d;
  }
  return s / static_cast<double>(probs.size());
}

std::size_t ece_bin(double p, std::size_t bins) {
  const double b = std::ceil(p * static_cast<double>(bins)) - 1.0;
  if (!(b > 0.0)) return 0;
  return std::min(bins - 1, static_cast<std::size_t>(b));
}

double ece(std::span<const double> probs, std::span<const int> labels, std::size_t bins) {
  check_lengths(probs.size(), labels.size());
  if (probs.empty()) return 0.0;
  std::vector<double> conf(bins, 0.0), acc(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const auto b = ece_bin(probs[i], bins);
    conf[b] += probs[i];
    acc[b] += labels[i] != 0 ? 1.0 : 0.0;
    ++count[b];
  }
  double e = 0.0;
  const double n = static_cast<double>(probs.size());
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double nb = static_cast<double>(count[b]);
    e += (nb / n) * std::abs(acc[b] / nb - conf[b] / nb);
  }
  return e;
}

}  // namespace tag2cred::metrics
