#include "tag2cred/learn.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

#include "tag2cred/error.hpp"
#include "tag2cred/metrics.hpp"
#include "tag2cred/rng.hpp"

namespace tag2cred::learn {

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

void check_inputs(const SparseMatrix& X, std::span<const int> y) {
  if (X.rows != y.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(X.rows) + " rows vs " + std::to_string(y.size()) + " labels");
  }
  for (double v : X.values) {
    if (!std::isfinite(v)) throw Error(Errc::NonFinite, "feature matrix contains a non-finite value");
  }
  for (int v : y) {
    if (v != 0 && v != 1) throw Error(Errc::NonFinite, "labels must be 0 or 1");
  }
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::array<double, 2> balanced_weights(std::span<const int> labels) {
  std::size_t n1 = 0;
  for (int v : labels) n1 += v != 0;
  const std::size_t n = labels.size();
  const std::size_t n0 = n - n1;
  if (n0 == 0 || n1 == 0) throw Error(Errc::SingleClass, "balanced weights need both classes");
  return {static_cast<double>(n) / (2.0 * static_cast<double>(n0)),
          static_cast<double>(n) / (2.0 * static_cast<double>(n1))};
}

double objective(const SparseMatrix& X, std::span<const int> y, std::span<const double> params, double C,
                 const std::array<double, 2>& cw, std::vector<double>* grad) {
  const std::size_t d = X.cols;
  const double n = static_cast<double>(std::max<std::size_t>(X.rows, 1));
  const std::span<const double> w = params.first(d);
  const double b = params[d];
  if (grad) grad->assign(d + 1, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < X.rows; ++i) {
    const double z = X.dot_row(i, w) + b;
    const double s = cw[static_cast<std::size_t>(y[i])];
    loss += s * (softplus(z) - (y[i] ? z : 0.0));
    if (grad) {
      const double r = s * (sigmoid(z) - static_cast<double>(y[i]));
      for (std::size_t k = X.indptr[i]; k < X.indptr[i + 1]; ++k) (*grad)[X.indices[k]] += r * X.values[k];
      (*grad)[d] += r;
    }
  }
  const double reg = 1.0 / (C * n);
  double sq = 0.0;
  for (std::size_t j = 0; j < d; ++j) sq += w[j] * w[j];
  if (grad) {
    for (std::size_t j = 0; j < d; ++j) (*grad)[j] = (*grad)[j] / n + reg * w[j];
    (*grad)[d] /= n;
  }
  return loss / n + 0.5 * reg * sq;
}

LogRegModel train_logreg(const SparseMatrix& X, std::span<const int> y, const TrainOptions& opts,
                         const FeatureSpace& space) {
  check_inputs(X, y);
  if (!(opts.C > 0.0) || !std::isfinite(opts.C)) throw Error(Errc::ConfigInvalid, "C must be positive");
  const std::size_t p = X.cols + 1;
  LogRegModel m;
  m.C = opts.C;
  m.class_weights = opts.class_weights;
  m.space = space;
  if (m.space.dim == 0) m.space.dim = X.cols;
  m.seed = opts.seed;

  std::vector<double> x(p, 0.0), g, x_new(p), g_new, dir(p);
  double f = objective(X, y, x, opts.C, opts.class_weights, &g);
  m.loss_history.push_back(f);
  std::deque<std::vector<double>> S, Yv;
  std::deque<double> rho;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    if (max_abs(g) <= opts.grad_tol) {
      m.converged = true;
      break;
    }
    // Two-loop recursion.
    for (std::size_t k = 0; k < p; ++k) dir[k] = -g[k];
    std::vector<double> alpha(S.size());
    for (std::size_t k = S.size(); k-- > 0;) {
      alpha[k] = rho[k] * dot(S[k], dir);
      for (std::size_t j = 0; j < p; ++j) dir[j] -= alpha[k] * Yv[k][j];
    }
    if (!S.empty()) {
      const double gamma = dot(S.back(), Yv.back()) / dot(Yv.back(), Yv.back());
      for (auto& v : dir) v *= gamma;
    } else {
      const double gn = std::sqrt(dot(g, g));
      if (gn > 1.0) {
        for (auto& v : dir) v /= gn;
      }
    }
    for (std::size_t k = 0; k < S.size(); ++k) {
      const double beta = rho[k] * dot(Yv[k], dir);
      for (std::size_t j = 0; j < p; ++j) dir[j] += S[k][j] * (alpha[k] - beta);
    }
    double gd = dot(g, dir);
    if (!(gd < 0.0)) {
      S.clear();
      Yv.clear();
      rho.clear();
      for (std::size_t k = 0; k < p; ++k) dir[k] = -g[k];
      gd = -dot(g, g);
    }
    // Armijo backtracking.
    double step = 1.0;
    bool accepted = false;
    double f_new = f;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t k = 0; k < p; ++k) x_new[k] = x[k] + step * dir[k];
      f_new = objective(X, y, x_new, opts.C, opts.class_weights, &g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * gd) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no representable decrease left
    std::vector<double> s(p), yy(p);
    for (std::size_t k = 0; k < p; ++k) {
      s[k] = x_new[k] - x[k];
      yy[k] = g_new[k] - g[k];
    }
    const double sy = dot(s, yy);
    if (sy > 1e-16) {
      S.push_back(std::move(s));
      Yv.push_back(std::move(yy));
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > opts.history) {
        S.pop_front();
        Yv.pop_front();
        rho.pop_front();
      }
    }
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    m.loss_history.push_back(f);
  }
  if (!m.converged && max_abs(g) <= opts.grad_tol) m.converged = true;
  m.iterations = it;
  m.grad_norm = max_abs(g);
  m.weights.assign(x.begin(), x.end() - 1);
  m.bias = x.back();
  for (double v : m.weights) {
    if (!std::isfinite(v)) throw Error(Errc::NonFinite, "training diverged");
  }
  return m;
}

std::vector<double> decision_function(const LogRegModel& m, const SparseMatrix& X, const FeatureSpace& space) {
  if (!(space == m.space)) {
    throw Error(Errc::FeatureSpaceMismatch, "model trained on " + std::string(features::to_string(m.space.kind)) +
                                                "/" + std::to_string(m.space.dim) + "/" + m.space.hash.substr(0, 12) +
                                                ", got " + std::string(features::to_string(space.kind)) + "/" +
                                                std::to_string(space.dim) + "/" + space.hash.substr(0, 12));
  }
  if (X.cols != m.weights.size()) {
    throw Error(Errc::FeatureSpaceMismatch, "matrix has " + std::to_string(X.cols) + " columns, model " +
                                                std::to_string(m.weights.size()));
  }
  std::vector<double> out(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) out[i] = X.dot_row(i, m.weights) + m.bias;
  return out;
}

std::vector<double> predict_proba(const LogRegModel& m, const SparseMatrix& X, const FeatureSpace& space) {
  auto s = decision_function(m, X, space);
  for (auto& v : s) v = sigmoid(v);
  return s;
}

double PlattCalibrator::apply(double s) const { return sigmoid(-(A * s + B)); }

std::vector<double> PlattCalibrator::apply(std::span<const double> scores) const {
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = apply(scores[i]);
  return out;
}

PlattCalibrator fit_platt(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(Errc::LengthMismatch, "scores vs labels");
  double np = 0, nn = 0;
  for (int v : labels) (v ? np : nn) += 1.0;
  if (np == 0 || nn == 0) throw Error(Errc::SingleClass, "Platt scaling needs both classes in validation");
  const double hi = (np + 1.0) / (np + 2.0);
  const double lo = 1.0 / (nn + 2.0);
  const std::size_t n = scores.size();
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = labels[i] ? hi : lo;

  auto nll = [&](double A, double B) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = scores[i] * A + B;
      f += z >= 0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };

  double A = 0.0, B = std::log((nn + 1.0) / (np + 1.0));
  double f = nll(A, B);
  const double tol = 1e-10 * static_cast<double>(n) + 1e-12;
  for (int it = 0; it < 200; ++it) {
    double h11 = 1e-12, h22 = 1e-12, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = scores[i] * A + B;
      double p, q;  // p = P(y = 1)
      if (z >= 0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += scores[i] * scores[i] * d2;
      h22 += d2;
      h21 += scores[i] * d2;
      const double d1 = t[i] - p;
      g1 += scores[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < tol && std::abs(g2) < tol) break;
    const double det = h11 * h22 - h21 * h21;
    const double dA = -(h22 * g1 - h21 * g2) / det;
    const double dB = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    bool moved = false;
    while (step >= 1e-12) {
      const double nA = A + step * dA, nB = B + step * dB;
      const double nf = nll(nA, nB);
      if (nf < f + 1e-4 * step * gd) {
        A = nA;
        B = nB;
        f = nf;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) break;
  }
  return {A, B};
}

std::vector<double> threshold_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 19; ++k) g.push_back(static_cast<double>(k) / 20.0);
  return g;
}

std::vector<int> apply_threshold(std::span<const double> probs, double t) {
  std::vector<int> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] >= t ? 1 : 0;
  return out;
}

ThresholdChoice sweep_threshold(std::span<const double> probs, std::span<const int> labels) {
  ThresholdChoice best{0.0, -1.0};
  for (double t : threshold_grid()) {
    const double f = metrics::macro_f1(apply_threshold(probs, t), labels);
    if (f > best.macro_f1) best = {t, f};
  }
  return best;
}

ProtocolOutput full_protocol(const SplitData& train, const SplitData& val, const SplitData& test,
                             const FeatureSpace& space, const ProtocolOptions& opts) {
  if (opts.C_grid.empty()) throw Error(Errc::ConfigInvalid, "empty C grid");
  TrainOptions to = opts.train;
  to.class_weights = opts.balanced ? balanced_weights(train.y) : std::array<double, 2>{1.0, 1.0};

  ProtocolOutput out;
  std::optional<LogRegModel> best;
  double best_f1 = -1.0;
  for (double C : opts.C_grid) {
    to.C = C;
    LogRegModel m = train_logreg(*train.X, train.y, to, space);
    const auto vp = predict_proba(m, *val.X, m.space);
    const double f = sweep_threshold(vp, val.y).macro_f1;
    out.trained.C_scores.push_back(f);
    if (f > best_f1) {
      best_f1 = f;
      best = std::move(m);
      out.val_raw = vp;
    }
  }
  auto& tm = out.trained;
  tm.model = std::move(*best);
  const auto val_scores = decision_function(tm.model, *val.X, tm.model.space);
  tm.platt = fit_platt(val_scores, val.y);
  const auto val_cal = tm.platt.apply(val_scores);
  const auto choice = sweep_threshold(val_cal, val.y);
  tm.threshold = choice.threshold;
  tm.val_macro_f1 = choice.macro_f1;

  const auto test_scores = decision_function(tm.model, *test.X, tm.model.space);
  out.test_raw.resize(test_scores.size());
  for (std::size_t i = 0; i < test_scores.size(); ++i) out.test_raw[i] = sigmoid(test_scores[i]);
  out.test_probs = tm.platt.apply(test_scores);
  out.test_preds = apply_threshold(out.test_probs, tm.threshold);
  return out;
}

std::vector<double> out_of_fold_probs(const SparseMatrix& X, std::span<const int> y,
                                      std::span<const std::string> groups, const TrainOptions& opts, int folds,
                                      std::uint64_t seed, bool balanced) {
  if (groups.size() != X.rows) throw Error(Errc::LengthMismatch, "groups vs rows");
  if (folds < 2) throw Error(Errc::ConfigInvalid, "need at least two folds");
  std::vector<std::string> uniq(groups.begin(), groups.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  Rng rng(seed, 0x4f4f46ULL);
  rng.shuffle(std::span<std::string>(uniq));
  std::map<std::string, int> fold_of;
  for (std::size_t k = 0; k < uniq.size(); ++k) fold_of[uniq[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));

  std::vector<double> out(X.rows, 0.0);
  double base_rate = 0.0;
  for (int v : y) base_rate += v;
  base_rate /= static_cast<double>(std::max<std::size_t>(y.size(), 1));
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> tr, ho;
    for (std::size_t i = 0; i < X.rows; ++i) (fold_of[groups[i]] == f ? ho : tr).push_back(i);
    if (ho.empty()) continue;
    std::vector<int> ytr;
    for (auto i : tr) ytr.push_back(y[i]);
    const bool both = std::find(ytr.begin(), ytr.end(), 0) != ytr.end() &&
                      std::find(ytr.begin(), ytr.end(), 1) != ytr.end();
    if (!both) {
      for (auto i : ho) out[i] = base_rate;
      continue;
    }
    TrainOptions o = opts;
    o.class_weights = balanced ? balanced_weights(ytr) : std::array<double, 2>{1.0, 1.0};
    const SparseMatrix Xtr = X.select_rows(tr);
    const LogRegModel m = train_logreg(Xtr, ytr, o);
    const SparseMatrix Xho = X.select_rows(ho);
    const auto p = predict_proba(m, Xho, m.space);
    for (std::size_t k = 0; k < ho.size(); ++k) out[ho[k]] = p[k];
  }
  return out;
}

SparseMatrix probability_matrix(std::span<const std::vector<double>> columns) {
  SparseMatrix m(columns.size());
  if (columns.empty()) return m;
  const std::size_t n = columns.front().size();
  std::vector<double> row(columns.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c].size() != n) throw Error(Errc::LengthMismatch, "base probability columns differ in length");
      row[c] = columns[c][i];
    }
    m.push_dense_row(row);
  }
  return m;
}

FeatureSpace stacked_space(std::span<const std::string> base_ids) {
  std::string s = "stacked";
  for (const auto& id : base_ids) s += "\n" + id;
  return {features::Kind::Stacked, base_ids.size(), sha256_hex(s)};
}

LogRegModel train_stacked(const SparseMatrix& base_probs, std::span<const int> y, std::uint64_t seed,
                          const FeatureSpace& space, double C) {
  for (double v : base_probs.values) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::NonFinite, "base probabilities must lie in [0,1]");
  }
  TrainOptions o;
  o.C = C;
  o.seed = seed;
  o.class_weights = balanced_weights(y);
  return train_logreg(base_probs, y, o, space);
}

nlohmann::json to_json(const TrainedModel& t) {
  const auto& m = t.model;
  return {{"schema_version", 1},
          {"kind", std::string(features::to_string(m.space.kind))},
          {"dim", m.space.dim},
          {"feature_hash", m.space.hash},
          {"weights", m.weights},
          {"bias", m.bias},
          {"C", m.C},
          {"class_weights", m.class_weights},
          {"converged", m.converged},
          {"iterations", m.iterations},
          {"seed", m.seed},
          {"platt", {{"A", t.platt.A}, {"B", t.platt.B}}},
          {"threshold", t.threshold},
          {"val_macro_f1", t.val_macro_f1},
          {"C_scores", t.C_scores},
          {"base_ids", t.base_ids}};
}

TrainedModel trained_from_json(const nlohmann::json& j) {
  TrainedModel t;
  try {
    if (j.at("schema_version").get<int>() != 1) {
      throw Error(Errc::SchemaVersionMismatch, "model schema_version " + j.at("schema_version").dump());
    }
    const std::string kind = j.at("kind").get<std::string>();
    bool found = false;
    for (auto k : {features::Kind::TagMultihot, features::Kind::Tfidf, features::Kind::Embedding,
                   features::Kind::Stacked}) {
      if (features::to_string(k) == kind) {
        t.model.space.kind = k;
        found = true;
      }
    }
    if (!found) throw Error(Errc::ParseFailure, "unknown model kind " + kind);
    t.model.space.dim = j.at("dim").get<std::size_t>();
    t.model.space.hash = j.at("feature_hash").get<std::string>();
    t.model.weights = j.at("weights").get<std::vector<double>>();
    t.model.bias = j.at("bias").get<double>();
    t.model.C = j.at("C").get<double>();
    t.model.class_weights = j.at("class_weights").get<std::array<double, 2>>();
    t.model.converged = j.at("converged").get<bool>();
    t.model.iterations = j.at("iterations").get<int>();
    t.model.seed = j.at("seed").get<std::uint64_t>();
    t.platt.A = j.at("platt").at("A").get<double>();
    t.platt.B = j.at("platt").at("B").get<double>();
    t.threshold = j.at("threshold").get<double>();
    t.val_macro_f1 = j.at("val_macro_f1").get<double>();
    t.C_scores = j.at("C_scores").get<std::vector<double>>();
    t.base_ids = j.at("base_ids").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseFailure, std::string("model artifact: ") + e.what());
  }
  return t;
}

}  // namespace tag2cred::learn
