#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "tag2cred/error.hpp"
#include "tag2cred/features.hpp"

using namespace tag2cred;
using namespace tag2cred::features;
using codebook::Field;
namespace cb = codebook;

namespace {

cb::TagAssignment row1() {
  return cb::make_assignment({"Finance/Crypto"}, {"Scarcity/FOMO tactic", "Verifiable factual statement"},
                             {"Join/Subscribe", "Visit external link / watch video"}, {"Link/URL", "Statistics"});
}
cb::TagAssignment row4() {
  return cb::make_assignment({"Conversation/Chat/Other"}, {"No substantive claim"}, {"Engage/Ask questions"},
                             {"None / assertion only"});
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("tag index") {
  // row 1 carries 7 labels; the second row adds exactly 3 more
  const std::vector<cb::TagAssignment> train{
      row1(), cb::make_assignment({"Finance/Crypto"}, {"Announcement"}, {"No CTA"}, {"None / assertion only"})};
  const auto full = fit_tag_index(TrainOnly<cb::TagAssignment>(train));
  CHECK(full.size() == 35);
  CHECK(full.column(Field::Cta, 0) == 22);
  CHECK(full.column_name(22) == "cta=Share / repost / like");
  const auto seen = fit_tag_index(TrainOnly<cb::TagAssignment>(train), true);
  CHECK(seen.size() == 10);
  CHECK(seen.column(Field::Theme, 1) == -1);
  CHECK(seen.fingerprint() != full.fingerprint());
  CHECK_THROWS_WITH(fit_tag_index(TrainOnly<cb::TagAssignment>(std::span<const cb::TagAssignment>{})),
                    doctest::Contains("EmptyTraining"));

  const std::vector<Field> cta{Field::Cta};
  const auto r = full.restrict(cta);
  CHECK(r.size() == 7);
  CHECK(full.columns_in(cta).front() == 22);
  CHECK_THROWS_WITH(full.restrict(std::span<const Field>{}), doctest::Contains("EmptySubset"));
}

TEST_CASE("tag_vector") {
  const std::vector<cb::TagAssignment> train{row1()};
  const auto full = fit_tag_index(TrainOnly<cb::TagAssignment>(train));
  const auto v4 = tag_vector(row4(), full);
  CHECK(v4.size() == 35);
  CHECK(sum(v4) == 4);
  // the gold row has one theme and two labels in each other field
  CHECK(sum(tag_vector(row1(), full)) == 7);
  for (double x : v4) CHECK((x == 0.0 || x == 1.0));

  const auto seen = fit_tag_index(TrainOnly<cb::TagAssignment>(train), true);
  std::size_t ignored = 0;
  const auto v = tag_vector(row4(), seen, &ignored);
  CHECK(sum(v) == 0);
  CHECK(ignored == 4);

  const std::vector<cb::TagAssignment> rows{row1(), row4()};
  const auto m = tag_matrix(rows, full);
  CHECK(m.rows == 2);
  CHECK(m.nnz() == 11);
  CHECK(m.dense_row(1) == v4);
}

TEST_CASE("select_fields and named subsets") {
  const std::vector<Field> cta{Field::Cta};
  const auto s = select_fields(row1(), cta);
  CHECK(s[Field::Theme].empty());
  CHECK(s[Field::Cta] == row1()[Field::Cta]);
  CHECK_THROWS_AS(select_fields(row1(), std::span<const Field>{}), Error);

  CHECK(parse_field_subset("all").size() == 4);
  CHECK(parse_field_subset("theme") == std::vector<Field>{Field::Theme});
  CHECK(parse_field_subset("style") == std::vector<Field>{Field::Claim, Field::Cta, Field::Evidence});
  CHECK(parse_field_subset("no_cta") == std::vector<Field>{Field::Theme, Field::Claim, Field::Evidence});
  CHECK(parse_field_subset("cta+claim") == std::vector<Field>{Field::Claim, Field::Cta});
  CHECK_THROWS_AS(parse_field_subset("bogus"), Error);
}

TEST_CASE("tfidf") {
  CHECK(tokenize("Hello, [URL] x y2k") == std::vector<std::string>{"hello", "url", "y2k"});
  CHECK(tokenize("a b", 1).size() == 2);

  const std::vector<urlkit::MaskedText> docs{urlkit::mask_urls("a a b")};
  TfidfConfig cfg;
  cfg.min_token_len = 1;
  cfg.max_ngram = 1;
  const auto m = TfidfModel::fit(TrainOnly<urlkit::MaskedText>(docs), cfg);
  const auto row = m.transform_one(docs[0]);
  REQUIRE(row.size() == 2);
  CHECK(row[0].second / row[1].second == doctest::Approx(2.0));
  CHECK(row[0].second * row[0].second + row[1].second * row[1].second == doctest::Approx(1.0));

  const std::vector<urlkit::MaskedText> corpus{urlkit::mask_urls("buy tokens now"), urlkit::mask_urls("buy a car"),
                                              urlkit::mask_urls("tokens tokens moon")};
  const auto t = TfidfModel::fit(TrainOnly<urlkit::MaskedText>(corpus));
  CHECK(std::is_sorted(t.terms().begin(), t.terms().end()));
  // idf: ln((1+n)/(1+df)) + 1
  const auto it = std::find(t.terms().begin(), t.terms().end(), "buy");
  REQUIRE(it != t.terms().end());
  CHECK(t.idf()[it - t.terms().begin()] == doctest::Approx(std::log(4.0 / 3.0) + 1.0));
  CHECK(std::find(t.terms().begin(), t.terms().end(), "buy tokens") != t.terms().end());
  CHECK(t.transform_one(urlkit::mask_urls("zzz qqq")).empty());

  const auto back = TfidfModel::from_json(t.to_json());
  CHECK(back.fingerprint() == t.fingerprint());
  CHECK(back.transform(corpus) == t.transform(corpus));

  TfidfConfig capped;
  capped.max_features = 2;
  const auto c = TfidfModel::fit(TrainOnly<urlkit::MaskedText>(corpus), capped);
  CHECK(c.size() == 2);
  CHECK_THROWS_AS(TfidfModel::fit(TrainOnly<urlkit::MaskedText>(std::span<const urlkit::MaskedText>{})), Error);
}

TEST_CASE("standardizer") {
  const std::vector<std::vector<double>> train{{1, 5}, {3, 5}};
  const auto s = Standardizer::fit(TrainOnly<std::vector<double>>(train));
  CHECK(s.mean() == std::vector<double>{2, 5});
  CHECK(s.stddev()[0] == doctest::Approx(1.0));
  CHECK(s.stddev()[1] == Standardizer::kStdFloor);
  const auto z = s.apply(train[0]);
  CHECK(z[0] == doctest::Approx(-1.0));
  CHECK(z[1] == 0.0);
  CHECK(std::isfinite(s.apply(std::vector<double>{0, 6})[1]));
  CHECK_THROWS_AS(s.apply(std::vector<double>{1.0}), Error);
  const auto back = Standardizer::from_json(s.to_json());
  CHECK(back.mean() == s.mean());
}

TEST_CASE("embeddings") {
  const auto t = parse_embeddings("dim,2\na,1,2\nb,3,4\n");
  CHECK(t.dim == 2);
  const std::vector<std::string> ids{"b", "a"};
  const auto g = gather_embeddings(t, ids);
  CHECK(g[0] == std::vector<double>{3, 4});
  const std::vector<std::string> missing{"a", "zz"};
  CHECK_THROWS_WITH(gather_embeddings(t, missing), doctest::Contains("zz"));
  CHECK_THROWS_WITH(parse_embeddings("dim,2\na,1,2,3\n"), doctest::Contains("DimensionMismatch"));
  CHECK_THROWS_WITH(load_embeddings("/nonexistent/e.csv"), doctest::Contains("MissingInput"));

  const auto dir = std::filesystem::temp_directory_path() / "t2c_emb_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "e.csv").string();
  const std::vector<std::string> order{"a", "b"};
  write_embeddings(path, t, order);
  const auto r = load_embeddings(path);
  CHECK(r.vectors.at("b") == t.vectors.at("b"));
}

TEST_CASE("flip_noise") {
  const std::vector<double> x{1, 0, 1, 0, 0};
  Rng r0(1), r1(1);
  CHECK(flip_noise(x, 0.0, r0) == x);
  const auto all = flip_noise(x, 1.0, r1);
  for (std::size_t j = 0; j < x.size(); ++j) CHECK(all[j] == 1.0 - x[j]);

  Rng r(5);
  const std::vector<double> zeros(1000, 0.0);
  std::size_t flipped = 0;
  for (int rep = 0; rep < 100; ++rep) flipped += static_cast<std::size_t>(sum(flip_noise(zeros, 0.1, r)));
  // 100k Bernoulli(0.1) draws: sd ~ 95
  CHECK(std::abs(static_cast<double>(flipped) - 10000.0) < 500.0);

  SparseMatrix m(3);
  m.push_dense_row(std::vector<double>{1, 0, 1});
  Rng rm(2);
  const auto flipped_m = flip_noise(m, 1.0, rm);
  CHECK(flipped_m.dense_row(0) == std::vector<double>{0, 1, 0});
}
