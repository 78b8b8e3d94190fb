#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tag2cred/features.hpp"
#include "tag2cred/matrix.hpp"

namespace tag2cred::learn {

double sigmoid(double z);

/// w_c = n / (2 n_c). Throws Error(SingleClass).
std::array<double, 2> balanced_weights(std::span<const int> labels);

struct FeatureSpace {
  features::Kind kind = features::Kind::TagMultihot;
  std::size_t dim = 0;
  std::string hash;
  bool operator==(const FeatureSpace&) const = default;
};

struct TrainOptions {
  double C = 1.0;
  std::array<double, 2> class_weights{1.0, 1.0};
  double grad_tol = 1e-6;
  int max_iter = 1000;
  int history = 10;  // L-BFGS memory
  std::uint64_t seed = 0;
};

struct LogRegModel {
  std::vector<double> weights;
  double bias = 0.0;
  double C = 1.0;
  std::array<double, 2> class_weights{1.0, 1.0};
  FeatureSpace space;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> loss_history;  // objective after each accepted step, starting at w = 0
};

/// Objective (1/n) sum_i cw_{y_i} logloss_i + ||w||^2 / (2 C n); bias unpenalized.
/// `grad` (size d + 1, bias last) is filled when non-null.
double objective(const SparseMatrix& X, std::span<const int> y, std::span<const double> params, double C,
                 const std::array<double, 2>& class_weights, std::vector<double>* grad);

/// L-BFGS with Armijo backtracking; stops when max |grad| <= grad_tol or after
/// max_iter iterations (model.converged = false). Throws Error(NonFinite | LengthMismatch).
LogRegModel train_logreg(const SparseMatrix& X, std::span<const int> y, const TrainOptions& opts,
                         const FeatureSpace& space = {});

/// Raw scores X w + b. Throws Error(FeatureSpaceMismatch) when `space` differs.
std::vector<double> decision_function(const LogRegModel& m, const SparseMatrix& X, const FeatureSpace& space);
std::vector<double> predict_proba(const LogRegModel& m, const SparseMatrix& X, const FeatureSpace& space);

struct PlattCalibrator {
  double A = -1.0;
  double B = 0.0;
  double apply(double score) const;
  std::vector<double> apply(std::span<const double> scores) const;
};

/// Newton fit on smoothed targets. Throws Error(SingleClass).
PlattCalibrator fit_platt(std::span<const double> scores, std::span<const int> labels);

/// Threshold grid {0.05, 0.10, ..., 0.95}.
std::vector<double> threshold_grid();
struct ThresholdChoice {
  double threshold = 0.5;
  double macro_f1 = 0.0;
};
/// Maximizes macro-F1 of (p >= t); ties go to the smallest t.
ThresholdChoice sweep_threshold(std::span<const double> probs, std::span<const int> labels);
std::vector<int> apply_threshold(std::span<const double> probs, double t);

struct SplitData {
  const SparseMatrix* X = nullptr;
  std::span<const int> y;
};

struct ProtocolOptions {
  std::vector<double> C_grid{0.1, 1.0, 10.0};
  TrainOptions train;  // C and class_weights are overwritten
  bool balanced = true;
};

struct TrainedModel {
  LogRegModel model;
  PlattCalibrator platt;
  double threshold = 0.5;
  double val_macro_f1 = 0.0;           // calibrated, at the final threshold
  std::vector<double> C_scores;        // pre-calibration val macro-F1 per grid C
  std::vector<std::string> base_ids;   // for stacked models
};

struct ProtocolOutput {
  TrainedModel trained;
  std::vector<double> val_raw;      // uncalibrated validation probabilities
  std::vector<double> test_raw;     // uncalibrated test probabilities
  std::vector<double> test_probs;   // calibrated
  std::vector<int> test_preds;
};

/// C selected by validation macro-F1 at the swept threshold (pre-calibration);
/// Platt fit on validation scores; threshold re-swept on calibrated validation
/// probabilities; test scored with calibrated probabilities.
ProtocolOutput full_protocol(const SplitData& train, const SplitData& val, const SplitData& test,
                             const FeatureSpace& space, const ProtocolOptions& opts = {});

/// Out-of-fold probabilities: folds assigned by group (all rows of a group share
/// a fold), `folds` groups-shuffled by seed. Rows keep their order.
std::vector<double> out_of_fold_probs(const SparseMatrix& X, std::span<const int> y,
                                      std::span<const std::string> groups, const TrainOptions& opts, int folds,
                                      std::uint64_t seed, bool balanced = true);

/// Stacks base probability columns into a matrix with one column per base.
SparseMatrix probability_matrix(std::span<const std::vector<double>> columns);
FeatureSpace stacked_space(std::span<const std::string> base_ids);

/// Meta logistic regression on base probability columns (C fixed, balanced).
LogRegModel train_stacked(const SparseMatrix& base_probs, std::span<const int> y, std::uint64_t seed,
                          const FeatureSpace& space, double C = 1.0);

nlohmann::json to_json(const TrainedModel& m);
TrainedModel trained_from_json(const nlohmann::json& j);

}  // namespace tag2cred::learn
