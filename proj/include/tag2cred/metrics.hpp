#pragma once

#include <cstddef>
#include <span>

namespace tag2cred::metrics {

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Throws Error(LengthMismatch).
Confusion confusion(std::span<const int> preds, std::span<const int> labels);

double accuracy(std::span<const int> preds, std::span<const int> labels);
/// Mean of per-class F1. A class absent from both predictions and labels scores
/// 1; any other zero denominator scores 0.
double macro_f1(std::span<const int> preds, std::span<const int> labels);
double macro_f1(const Confusion& c);

/// Exact ties-as-half AUC. Throws Error(SingleClass).
double roc_auc(std::span<const double> probs, std::span<const int> labels);
double brier(std::span<const double> probs, std::span<const int> labels);
/// Equal-width right-closed bins; p = 0 falls in the first bin.
double ece(std::span<const double> probs, std::span<const int> labels, std::size_t bins = 15);
std::size_t ece_bin(double p, std::size_t bins);

}  // namespace tag2cred::metrics
