#include <doctest.h>

#include <cmath>

#include "tag2cred/error.hpp"
#include "tag2cred/learn.hpp"
#include "tag2cred/metrics.hpp"
#include "tag2cred/rng.hpp"

using namespace tag2cred;
using namespace tag2cred::learn;

namespace {

struct Data {
  SparseMatrix X;
  std::vector<int> y;
};

// y ~ Bernoulli(sigmoid(w.x + b)) with Gaussian x.
Data logistic_data(std::size_t n, std::vector<double> w, double b, std::uint64_t seed) {
  Rng rng(seed);
  Data d{SparseMatrix(w.size()), {}};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(w.size());
    double z = b;
    for (std::size_t j = 0; j < w.size(); ++j) {
      x[j] = rng.normal();
      z += w[j] * x[j];
    }
    d.X.push_dense_row(x);
    d.y.push_back(rng.bernoulli(sigmoid(z)) ? 1 : 0);
  }
  return d;
}

std::vector<double> params_of(const LogRegModel& m) {
  auto p = m.weights;
  p.push_back(m.bias);
  return p;
}

}  // namespace

TEST_CASE("balanced weights") {
  const std::vector<int> half{0, 1, 0, 1};
  CHECK(balanced_weights(half) == std::array<double, 2>{1.0, 1.0});
  std::vector<int> y(100, 0);
  for (int i = 0; i < 25; ++i) y[i] = 1;
  const auto w = balanced_weights(y);
  CHECK(w[1] == doctest::Approx(2.0));
  CHECK(w[0] == doctest::Approx(100.0 / 150.0));
  CHECK_THROWS_WITH(balanced_weights(std::vector<int>{1, 1}), doctest::Contains("SingleClass"));
}

TEST_CASE("sigmoid") {
  CHECK(sigmoid(0) == 0.5);
  CHECK(sigmoid(800) == 1.0);
  CHECK(sigmoid(-800) >= 0.0);
  CHECK(std::isfinite(sigmoid(-800)));
  CHECK(sigmoid(2) + sigmoid(-2) == doctest::Approx(1.0));
}

TEST_CASE("gradient matches central differences") {
  const auto d = logistic_data(80, {1.0, -2.0, 0.5}, 0.3, 1);
  const std::array<double, 2> cw{0.8, 1.3};
  Rng rng(2);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> p(4);
    for (auto& v : p) v = rng.normal();
    std::vector<double> g;
    objective(d.X, d.y, p, 0.7, cw, &g);
    REQUIRE(g.size() == 4);
    for (std::size_t j = 0; j < 4; ++j) {
      const double h = 1e-5;
      auto hi = p, lo = p;
      hi[j] += h;
      lo[j] -= h;
      const double fd = (objective(d.X, d.y, hi, 0.7, cw, nullptr) - objective(d.X, d.y, lo, 0.7, cw, nullptr)) / (2 * h);
      CHECK(std::abs(fd - g[j]) <= 1e-5);
    }
  }
}

TEST_CASE("training converges and the loss never increases") {
  const auto d = logistic_data(500, {1.5, -1.0, 0.0, 2.0}, -0.5, 3);
  TrainOptions o;
  o.C = 1.0;
  o.grad_tol = 1e-8;
  const auto m = train_logreg(d.X, d.y, o);
  CHECK(m.converged);
  for (std::size_t i = 1; i < m.loss_history.size(); ++i) CHECK(m.loss_history[i] <= m.loss_history[i - 1] + 1e-15);
  std::vector<double> g;
  objective(d.X, d.y, params_of(m), o.C, o.class_weights, &g);
  for (double v : g) CHECK(std::abs(v) <= 1e-6);
  CHECK(m.weights[0] > 0.8);
  CHECK(m.weights[1] < -0.5);

  const auto again = train_logreg(d.X, d.y, o);
  CHECK(again.weights == m.weights);
}

TEST_CASE("separable 1-D data and a constant column") {
  SparseMatrix X(2);
  std::vector<int> y;
  for (int i = -10; i <= 10; ++i) {
    if (i == 0) continue;
    X.push_dense_row(std::vector<double>{static_cast<double>(i), 1.0});
    y.push_back(i > 0 ? 1 : 0);
  }
  TrainOptions o;
  o.C = 1e4;
  o.max_iter = 5000;
  const auto m = train_logreg(X, y, o);
  const auto p = predict_proba(m, X, m.space);
  CHECK(metrics::accuracy(apply_threshold(p, 0.5), y) == 1.0);

  // constant column: the bias absorbs it, the penalty drives its weight to 0
  o.C = 1.0;
  o.grad_tol = 1e-10;
  const auto c = train_logreg(X, y, o);
  CHECK(std::abs(c.weights[1]) <= 1e-6);
}

TEST_CASE("prediction and feature-space guard") {
  LogRegModel m;
  m.weights = {0.0, 0.0};
  SparseMatrix X(2);
  X.push_dense_row(std::vector<double>{3.0, -1.0});
  CHECK(predict_proba(m, X, {})[0] == 0.5);
  m.weights = {0.05, 0.0};
  CHECK(predict_proba(m, X, {})[0] == doctest::Approx(sigmoid(0.15)));

  m.space = FeatureSpace{features::Kind::Tfidf, 2, "abc"};
  CHECK_THROWS_WITH(predict_proba(m, X, FeatureSpace{features::Kind::Tfidf, 2, "xyz"}),
                    doctest::Contains("FeatureSpaceMismatch"));
  CHECK_NOTHROW(predict_proba(m, X, m.space));
  const std::vector<int> short_y{1};
  SparseMatrix two(2);
  two.push_dense_row(std::vector<double>{1, 1});
  two.push_dense_row(std::vector<double>{1, 0});
  CHECK_THROWS_AS(train_logreg(two, short_y, {}), Error);
}

TEST_CASE("platt scaling") {
  SUBCASE("recovers the generator") {
    Rng rng(7);
    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < 20000; ++i) {
      const double v = rng.uniform(-2.0, 3.0);
      s.push_back(v);
      y.push_back(rng.bernoulli(sigmoid(2 * v - 1)) ? 1 : 0);
    }
    const auto pl = fit_platt(s, y);
    // calibrated p = 1/(1+exp(A s + B)), so the generator means A = -2, B = 1
    CHECK(pl.A == doctest::Approx(-2.0).epsilon(0.1));
    CHECK(pl.B == doctest::Approx(1.0).epsilon(0.1));
  }
  SUBCASE("already calibrated scores stay near identity") {
    Rng rng(8);
    std::vector<double> logit, y_s;
    std::vector<int> y;
    for (int i = 0; i < 10000; ++i) {
      const double z = rng.uniform(-3.0, 3.0);
      logit.push_back(z);
      y.push_back(rng.bernoulli(sigmoid(z)) ? 1 : 0);
    }
    const auto pl = fit_platt(logit, y);
    for (double z = -2.0; z <= 2.0; z += 0.25) CHECK(std::abs(pl.apply(z) - sigmoid(z)) <= 0.03);
  }
  SUBCASE("no signal gives the base rate") {
    Rng rng(9);
    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < 10000; ++i) {
      s.push_back(rng.normal());
      y.push_back(rng.bernoulli(0.3) ? 1 : 0);
    }
    const auto pl = fit_platt(s, y);
    for (double v : {-2.0, 0.0, 2.0}) CHECK(std::abs(pl.apply(v) - 0.3) <= 0.05);
  }
  SUBCASE("monotone and order preserving") {
    const std::vector<double> s{-1, 0, 1, 2};
    const std::vector<int> y{0, 0, 1, 1};
    const auto pl = fit_platt(s, y);
    const auto p = pl.apply(s);
    for (std::size_t i = 1; i < p.size(); ++i) CHECK(p[i] > p[i - 1]);
    CHECK_THROWS_AS(fit_platt(s, std::vector<int>{0, 0, 0, 0}), Error);
  }
}

TEST_CASE("threshold sweep") {
  const auto grid = threshold_grid();
  CHECK(grid.size() == 19);
  CHECK(grid.front() == doctest::Approx(0.05));
  CHECK(grid.back() == doctest::Approx(0.95));

  const std::vector<double> sep{0.9, 0.9, 0.1, 0.1};
  const std::vector<int> y{1, 1, 0, 0};
  const auto c = sweep_threshold(sep, y);
  CHECK(c.threshold == doctest::Approx(0.15));
  CHECK(c.macro_f1 == 1.0);

  const std::vector<double> any{0.2, 0.7, 0.4};
  const std::vector<int> ones{1, 1, 1};
  CHECK(sweep_threshold(any, ones).threshold == doctest::Approx(0.05));

  const std::vector<double> exact{1, 1, 0, 0};
  const auto e = sweep_threshold(exact, y);
  CHECK(e.macro_f1 == 1.0);
  CHECK(apply_threshold(exact, 0.5) == y);
  CHECK(apply_threshold(std::vector<double>{0.5}, 0.5) == std::vector<int>{1});
}

TEST_CASE("stacking") {
  Rng rng(11);
  const std::size_t n = 4000;
  std::vector<int> y(n);
  std::vector<double> perfect(n), weak1(n), weak2(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.bernoulli(0.5) ? 1 : 0;
    perfect[i] = y[i] ? 0.9 : 0.1;
    weak1[i] = sigmoid(0.8 * (2 * y[i] - 1) + rng.normal());
    weak2[i] = sigmoid(0.8 * (2 * y[i] - 1) + rng.normal());
  }
  const std::vector<std::string> ids1{"p"}, ids2{"a", "b"};

  {
    const std::vector<std::vector<double>> cols{perfect};
    const auto P = probability_matrix(cols);
    const auto m = train_stacked(P, y, 0, stacked_space(ids1));
    CHECK(std::abs(metrics::roc_auc(predict_proba(m, P, stacked_space(ids1)), y) - metrics::roc_auc(perfect, y)) <= 1e-6);
  }
  {
    const std::vector<std::vector<double>> cols{weak1, weak1};
    const auto P = probability_matrix(cols);
    const auto m = train_stacked(P, y, 0, stacked_space(ids2));
    CHECK(metrics::roc_auc(predict_proba(m, P, stacked_space(ids2)), y) ==
          doctest::Approx(metrics::roc_auc(weak1, y)).epsilon(1e-9));
  }
  {
    const double a1 = metrics::roc_auc(weak1, y), a2 = metrics::roc_auc(weak2, y);
    CHECK(a1 == doctest::Approx(0.7).epsilon(0.1));
    const std::vector<std::vector<double>> cols{weak1, weak2};
    const auto P = probability_matrix(cols);
    const auto m = train_stacked(P, y, 0, stacked_space(ids2));
    const double s = metrics::roc_auc(predict_proba(m, P, stacked_space(ids2)), y);
    CHECK(s > a1);
    CHECK(s > a2);
  }
}

TEST_CASE("full protocol") {
  const std::vector<double> w{1.5, -1.0, 2.0, 0.0, 0.7};
  const auto tr = logistic_data(3000, w, -0.4, 21);
  const auto va = logistic_data(5000, w, -0.4, 22);
  const auto te = logistic_data(5000, w, -0.4, 23);
  const auto out = full_protocol({&tr.X, tr.y}, {&va.X, va.y}, {&te.X, te.y}, {});
  CHECK(out.trained.C_scores.size() == 3);
  CHECK(out.test_probs.size() == 5000);
  CHECK(out.trained.threshold >= 0.05);
  const double test_f1 = metrics::macro_f1(out.test_preds, te.y);
  CHECK(std::abs(test_f1 - out.trained.val_macro_f1) <= 0.05);
  // Platt is monotone, so ranking quality survives calibration
  CHECK(metrics::roc_auc(out.test_probs, te.y) == doctest::Approx(metrics::roc_auc(out.test_raw, te.y)));

  const auto back = trained_from_json(to_json(out.trained));
  CHECK(back.model.weights == out.trained.model.weights);
  CHECK(back.threshold == out.trained.threshold);
  CHECK(back.platt.A == out.trained.platt.A);

  auto shuffled = tr.y;
  Rng rng(5);
  rng.shuffle(std::span<int>(shuffled));
  auto vshuf = va.y;
  rng.shuffle(std::span<int>(vshuf));
  auto tshuf = te.y;
  rng.shuffle(std::span<int>(tshuf));
  const auto null = full_protocol({&tr.X, shuffled}, {&va.X, vshuf}, {&te.X, tshuf}, {});
  const double auc = metrics::roc_auc(null.test_raw, tshuf);
  CHECK(auc >= 0.45);
  CHECK(auc <= 0.55);
}

TEST_CASE("out-of-fold probabilities respect groups") {
  const auto d = logistic_data(300, {2.0, -1.0}, 0.0, 31);
  std::vector<std::string> groups;
  for (std::size_t i = 0; i < 300; ++i) groups.push_back("g" + std::to_string(i % 17));
  const auto p = out_of_fold_probs(d.X, d.y, groups, {}, 5, 1);
  CHECK(p.size() == 300);
  CHECK(metrics::roc_auc(p, d.y) > 0.75);
  CHECK(out_of_fold_probs(d.X, d.y, groups, {}, 5, 1) == p);
}
