#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <set>

#include "hostpred/error.hpp"
#include "hostpred/evaluation.hpp"
#include "hostpred/random.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace hostpred;
using namespace hostpred::eval;

namespace {

ConfusionMatrix from_counts(const oracle::Counts& counts) {
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < counts.size(); ++i) cm.classes.push_back("c" + std::to_string(i));
  for (const auto& row : counts) {
    for (auto v : row) cm.counts.push_back(v);
  }
  return cm;
}

oracle::Counts random_counts(Rng& rng, std::size_t classes, int max_count) {
  oracle::Counts c(classes, std::vector<long long>(classes));
  for (auto& row : c) {
    for (auto& v : row) v = static_cast<long long>(rng.below(static_cast<std::uint64_t>(max_count) + 1));
  }
  return c;
}

std::vector<std::size_t> repeated(const std::vector<std::size_t>& counts) {
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < counts.size(); ++c) labels.insert(labels.end(), counts[c], c);
  return labels;
}

// Fake learner that records every split it is handed.
class RecordingFactory : public ModelFactory {
 public:
  explicit RecordingFactory(const CvData& data) : data_(data) {}

  std::vector<std::size_t> fit_predict(std::span<const std::size_t> train,
                                       std::span<const std::size_t> test, const HyperParams& hyper,
                                       std::uint64_t) override {
    std::set<std::string> train_ids;
    for (auto r : train) train_ids.insert(data_.ids[r]);
    for (auto r : test) {
      if (train_ids.count(data_.ids[r])) leaked = true;
    }
    sizes.emplace_back(train.size(), test.size());
    // Grid point "good" = 1 returns the truth, otherwise class 0 everywhere.
    std::vector<std::size_t> out;
    for (auto r : test) out.push_back(hyper.at("good") > 0.5 ? data_.labels[r] : 0);
    return out;
  }

  bool leaked = false;
  std::vector<std::pair<std::size_t, std::size_t>> sizes;

 private:
  const CvData& data_;
};

CvData balanced_data(std::size_t per_class, std::size_t classes) {
  CvData d;
  for (std::size_t c = 0; c < classes; ++c) d.classes.push_back("k" + std::to_string(c));
  for (std::size_t i = 0; i < per_class * classes; ++i) {
    d.ids.push_back("seq" + std::to_string(i));
    d.labels.push_back(i % classes);
  }
  return d;
}

}  // namespace

TEST_CASE("stratified_kfold examples") {
  const auto labels = repeated({6, 3});
  const auto folds = stratified_kfold(labels, 3, 1);
  for (std::size_t f = 0; f < 3; ++f) {
    std::size_t a = 0, b = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (folds[i] == f) (labels[i] == 0 ? a : b)++;
    }
    CHECK(a == 2);
    CHECK(b == 1);
  }
  CHECK(folds == stratified_kfold(labels, 3, 1));
  CHECK(test_util::kind_of([] { stratified_kfold(std::vector<std::size_t>{0, 0}, 3, 1); }) ==
        ErrorKind::class_too_small);
}

TEST_CASE("stratified_kfold balance property") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.below(6);
    const std::size_t classes = 2 + rng.below(3);
    std::vector<std::size_t> counts;
    for (std::size_t c = 0; c < classes; ++c) counts.push_back(k + rng.below(40));
    auto labels = repeated(counts);
    rng.shuffle(std::span<std::size_t>(labels));
    const auto folds = stratified_kfold(labels, k, trial);
    REQUIRE(folds.size() == labels.size());
    std::vector<std::size_t> totals(k, 0);
    for (std::size_t c = 0; c < classes; ++c) {
      std::vector<std::size_t> per_fold(k, 0);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        REQUIRE(folds[i] < k);
        if (labels[i] == c) ++per_fold[folds[i]];
      }
      const auto [lo, hi] = std::minmax_element(per_fold.begin(), per_fold.end());
      CHECK(*hi - *lo <= 1);
      for (std::size_t f = 0; f < k; ++f) totals[f] += per_fold[f];
    }
    const auto [lo, hi] = std::minmax_element(totals.begin(), totals.end());
    CHECK(*hi - *lo <= 1);
  }
}

TEST_CASE("confusion examples") {
  const std::vector<std::string> classes{"A", "B", "C"};
  auto cm = confusion(std::vector<std::string>{"A", "B", "C"}, {"A", "B", "C"}, classes);
  CHECK(cm.counts == std::vector<std::int64_t>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  cm = confusion(std::vector<std::string>{"A", "A"}, {"B", "B"}, classes);
  CHECK(cm.at(0, 1) == 2);
  CHECK(cm.total() == 2);
  CHECK(test_util::kind_of([&] { confusion(std::vector<std::string>{"A"}, {"A", "B"}, classes); }) ==
        ErrorKind::length_mismatch);
  CHECK(test_util::kind_of([&] { confusion(std::vector<std::string>{"A"}, {"Z"}, classes); }) ==
        ErrorKind::unknown_label);

  cm = from_counts({{2, 2}, {0, 0}});
  CHECK(cm.row_normalized() == std::vector<double>{0.5, 0.5, 0.0, 0.0});
}

TEST_CASE("per-class metric examples") {
  auto m = per_class_metrics(from_counts({{3, 0, 0}, {0, 4, 0}, {0, 0, 5}}));
  for (const auto& c : m) {
    CHECK(c.f1 == 1.0);
    CHECK(c.mcc == 1.0);
  }

  // Class 0: TP=1, FP=1, FN=1.
  m = per_class_metrics(from_counts({{1, 1}, {1, 0}}));
  CHECK(m[0].precision == 0.5);
  CHECK(m[0].sensitivity == 0.5);
  CHECK(m[0].f1 == 0.5);

  // Constant predictor: only column 1 is non-zero.
  m = per_class_metrics(from_counts({{0, 4, 0}, {0, 5, 0}, {0, 3, 0}}));
  CHECK(m[1].mcc == 0.0);
  CHECK(m[0].f1 == 0.0);
}

TEST_CASE("overall metric examples") {
  auto o = overall_metrics(from_counts({{3, 0, 0}, {0, 4, 0}, {0, 0, 5}}));
  CHECK(o.f1 == 1.0);
  CHECK(std::abs(o.mcc - 1.0) <= 1e-12);

  o = overall_metrics(from_counts({{5, 2, 1}, {1, 6, 2}, {0, 1, 7}}));
  CHECK(std::abs(o.mcc - 0.5849790269022775) <= 1e-12);
  CHECK(std::abs(o.f1 - 0.7195767195767195) <= 1e-12);

  o = overall_metrics(from_counts({{9, 0}, {0, 0}}));
  CHECK(o.mcc == 0.0);
}

TEST_CASE("metrics agree with the literal formulas") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto counts = random_counts(rng, 2 + rng.below(5), trial % 3 == 0 ? 2 : 30);
    const auto cm = from_counts(counts);
    const auto m = per_class_metrics(cm);
    const auto o = overall_metrics(cm);
    double f1_sum = 0.0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
      CHECK(std::abs(m[c].f1 - oracle::f1(counts, c)) <= 1e-12);
      CHECK(std::abs(m[c].mcc - oracle::mcc(counts, c)) <= 1e-12);
      CHECK(m[c].mcc >= -1.0);
      CHECK(m[c].mcc <= 1.0);
      f1_sum += m[c].f1;
    }
    CHECK(std::abs(o.f1 - f1_sum / static_cast<double>(counts.size())) <= 1e-12);
    CHECK(std::abs(o.f1 - oracle::overall_f1(counts)) <= 1e-12);
    CHECK(std::abs(o.mcc - oracle::overall_mcc(counts)) <= 1e-12);
  }
}

TEST_CASE("two-class overall MCC equals the binary MCC") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto counts = random_counts(rng, 2, 50);
    const double tn = static_cast<double>(counts[0][0]), fp = static_cast<double>(counts[0][1]);
    const double fn = static_cast<double>(counts[1][0]), tp = static_cast<double>(counts[1][1]);
    CHECK(std::abs(overall_metrics(from_counts(counts)).mcc - oracle::binary_mcc(tp, tn, fp, fn)) <= 1e-12);
  }
}

TEST_CASE("metrics are invariant under class permutation") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + rng.below(3);
    const auto counts = random_counts(rng, n, 20);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    oracle::Counts permuted(n, std::vector<long long>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) permuted[perm[i]][perm[j]] = counts[i][j];
    }
    const auto a = overall_metrics(from_counts(counts));
    const auto b = overall_metrics(from_counts(permuted));
    CHECK(std::abs(a.f1 - b.f1) <= 1e-12);
    CHECK(std::abs(a.mcc - b.mcc) <= 1e-12);
    const auto pa = per_class_metrics(from_counts(counts));
    const auto pb = per_class_metrics(from_counts(permuted));
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(pa[i].mcc - pb[perm[i]].mcc) <= 1e-12);
  }
}

TEST_CASE("metrics report JSON") {
  auto cm = from_counts({{5, 2, 1}, {1, 6, 2}, {0, 1, 7}});
  const auto j = nlohmann::json::parse(format_report(make_report(cm), {{"fold", "1"}}));
  CHECK(j["classes"].size() == 3);
  CHECK(j["per_class"]["c0"]["tp"] == 5);
  CHECK(j["confusion"][2][2] == 7);
  CHECK(j["total"] == 25);
  CHECK(j["meta"]["fold"] == "1");
  CHECK(std::abs(j["overall"]["mcc"].get<double>() - 0.5849790269022775) <= 1e-12);
}

TEST_CASE("nested_cv split sizes and no leakage") {
  const auto data = balanced_data(200, 3);
  RecordingFactory factory(data);
  const std::vector<HyperParams> grid{{{"good", 0.0}}, {{"good", 1.0}}};
  const auto res = nested_cv(data, factory, grid, {6, 5, 11});
  REQUIRE(res.folds.size() == 6);
  for (const auto& f : res.folds) {
    CHECK(f.n_test == 100);
    CHECK(f.n_train == 400);
    CHECK(f.n_val == 100);
    CHECK(f.chosen == 1);
    CHECK(std::abs(f.report.overall.mcc - 1.0) <= 1e-12);
  }
  CHECK_FALSE(factory.leaked);
  // 6 outer x (2 grid points x 5 inner + 1 refit).
  CHECK(factory.sizes.size() == 66);
  CHECK(res.aggregate.confusion.total() == 600);
  CHECK(std::abs(res.test_fraction - 1.0 / 6.0) < 1e-12);
  CHECK(std::abs(res.train_fraction + res.val_fraction + res.test_fraction - 1.0) < 1e-12);

  std::vector<std::size_t> seen;
  for (const auto& f : res.folds) seen.insert(seen.end(), f.test_rows.begin(), f.test_rows.end());
  std::sort(seen.begin(), seen.end());
  std::vector<std::size_t> all(600);
  std::iota(all.begin(), all.end(), 0);
  CHECK(seen == all);
}

TEST_CASE("nested_cv with a single grid point and determinism") {
  const auto data = balanced_data(20, 2);
  RecordingFactory f1(data), f2(data);
  const std::vector<HyperParams> grid{{{"good", 0.0}}};
  const auto a = nested_cv(data, f1, grid, {3, 2, 5});
  const auto b = nested_cv(data, f2, grid, {3, 2, 5});
  REQUIRE(a.folds.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.folds[i].chosen == 0);
    CHECK(a.folds[i].test_rows == b.folds[i].test_rows);
    CHECK(format_report(a.folds[i].report) == format_report(b.folds[i].report));
  }
}

TEST_CASE("nested_cv errors") {
  auto data = balanced_data(20, 2);
  RecordingFactory factory(data);
  CHECK(test_util::kind_of([&] { nested_cv(data, factory, {}, {3, 2, 1}); }) == ErrorKind::empty_grid);
  // The same id on two records ends up on both sides of some split.
  data.ids[1] = data.ids[0];
  CHECK(test_util::kind_of([&] { nested_cv(data, factory, {{{"good", 1.0}}}, {3, 2, 1}); }) ==
        ErrorKind::leakage);
}

TEST_CASE("disagreement bands") {
  auto rows = [](std::vector<std::string> predicted) {
    std::vector<PredictionRow> out;
    const std::vector<std::string> truth{"a", "a", "b"};
    for (std::size_t i = 0; i < 3; ++i) out.push_back({"s" + std::to_string(i), truth[i], predicted[i]});
    return out;
  };
  // s0 always right, s1 wrong in 2 of 4, s2 always wrong.
  const auto r = disagreement({rows({"a", "b", "a"}), rows({"a", "b", "a"}), rows({"a", "a", "a"}),
                               rows({"a", "a", "a"})});
  REQUIRE(r.records.size() == 3);
  CHECK(r.records[0].rate() == 0.0);
  CHECK(band_of(r.records[0]) == Band::none);
  CHECK(r.records[1].rate() == 0.5);
  CHECK(band_of(r.records[1]) == Band::majority);
  CHECK(r.records[2].rate() == 1.0);
  CHECK(band_of(r.records[2]) == Band::all);
  CHECK(r.histogram == std::array<std::size_t, 4>{1, 0, 1, 1});
  CHECK(band_of({"x", 1, 3}) == Band::minority);

  auto short_rows = rows({"a", "a", "a"});
  short_rows.pop_back();
  CHECK(test_util::kind_of([&] { disagreement({rows({"a", "a", "a"}), short_rows}); }) ==
        ErrorKind::id_set_mismatch);
}

TEST_CASE("prediction CSV round trip") {
  const std::vector<PredictionRow> rows{{"s1", "human", "avian"}, {"s2", "swine", "swine"}};
  const auto text = format_predictions(rows);
  CHECK(text == "id,true,predicted\ns1,human,avian\ns2,swine,swine\n");
  const auto back = parse_predictions(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].predicted == "avian");
  CHECK(test_util::kind_of([] { parse_predictions("a,b\n"); }) == ErrorKind::malformed_dataset);
}
