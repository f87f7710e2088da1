#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "hostpred/baseline.hpp"
#include "hostpred/error.hpp"
#include "hostpred/random.hpp"
#include "test_util.hpp"

using namespace hostpred;
using namespace hostpred::baseline;

namespace {

std::vector<std::size_t> labels_with_counts(const std::vector<std::size_t>& counts, Rng& rng) {
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < counts.size(); ++c) labels.insert(labels.end(), counts[c], c);
  rng.shuffle(std::span<std::size_t>(labels));
  return labels;
}

std::vector<std::size_t> class_counts(const std::vector<std::size_t>& labels,
                                      const std::vector<std::size_t>& idx, std::size_t classes) {
  std::vector<std::size_t> n(classes, 0);
  for (auto i : idx) ++n[labels[i]];
  return n;
}

// Two clusters at (+-2, +-2) with points within 0.5 of the centre.
void clusters(Matrix& x, std::vector<std::size_t>& y, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  x = Matrix(n, 2);
  y.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % 2;
    const double centre = c ? 2.0 : -2.0;
    x(i, 0) = centre + rng.uniform(-0.5, 0.5);
    x(i, 1) = centre + rng.uniform(-0.5, 0.5);
    y.push_back(c);
  }
}

}  // namespace

TEST_CASE("random_undersample equalises counts to the minority") {
  Rng rng(1);
  const auto labels = labels_with_counts({100, 40, 40}, rng);
  const auto idx = random_undersample(labels, 3, 7);
  CHECK(class_counts(labels, idx, 3) == std::vector<std::size_t>{40, 40, 40});
  CHECK(std::is_sorted(idx.begin(), idx.end()));
  CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
  CHECK(idx == random_undersample(labels, 3, 7));
  CHECK(idx != random_undersample(labels, 3, 8));
}

TEST_CASE("random_undersample on balanced input keeps everything") {
  Rng rng(2);
  const auto labels = labels_with_counts({10, 10}, rng);
  const auto idx = random_undersample(labels, 2, 3);
  CHECK(idx.size() == 20);
  CHECK(class_counts(labels, idx, 2) == std::vector<std::size_t>{10, 10});
}

TEST_CASE("random_undersample errors on an empty class") {
  const std::vector<std::size_t> labels{0, 0, 2};
  CHECK(test_util::kind_of([&] { random_undersample(labels, 3, 1); }) == ErrorKind::empty_class);
}

TEST_CASE("softmax separates two clusters") {
  Matrix x;
  std::vector<std::size_t> y;
  clusters(x, y, 60, 4);
  const auto model = train_softmax(x, y, {"a", "b"}, {});
  CHECK(predict(model, x) == y);
}

TEST_CASE("softmax with a huge l2 drives weights to zero") {
  Matrix x;
  std::vector<std::size_t> y;
  clusters(x, y, 40, 5);
  SoftmaxConfig cfg;
  cfg.l2 = 1e6;
  const auto model = train_softmax(x, y, {"a", "b"}, cfg);
  for (double w : model.weights.data()) CHECK(std::abs(w) < 1e-3);
}

TEST_CASE("softmax with zero learning rate keeps the initial weights") {
  Matrix x;
  std::vector<std::size_t> y;
  clusters(x, y, 40, 6);
  SoftmaxConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 5;
  const auto a = train_softmax(x, y, {"a", "b"}, cfg);
  cfg.epochs = 1;
  const auto b = train_softmax(x, y, {"a", "b"}, cfg);
  CHECK(a.weights == b.weights);
  CHECK(a.bias == b.bias);
}

TEST_CASE("softmax loss is non-increasing at a small learning rate") {
  Rng rng(10);
  Matrix x(50, 6);
  std::vector<std::size_t> y;
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t j = 0; j < 6; ++j) x(i, j) = rng.normal();
    y.push_back(rng.below(3));
  }
  SoftmaxConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 200;
  std::vector<SoftmaxEpoch> hist;
  train_softmax(x, y, {"a", "b", "c"}, cfg, &hist);
  REQUIRE(hist.size() == 200);
  for (std::size_t e = 1; e < hist.size(); ++e) CHECK(hist[e].loss <= hist[e - 1].loss + 1e-15);
  CHECK(std::isnan(hist[0].val_loss));
}

TEST_CASE("softmax reports validation metrics when given a validation set") {
  Matrix x, xv;
  std::vector<std::size_t> y, yv;
  clusters(x, y, 40, 1);
  clusters(xv, yv, 10, 2);
  std::vector<SoftmaxEpoch> hist;
  train_softmax(x, y, {"a", "b"}, {}, &hist, {&xv, yv});
  CHECK(hist.back().val_accuracy == 1.0);
  CHECK(std::isfinite(hist.back().val_loss));
}

TEST_CASE("softmax errors") {
  Matrix x(3, 2);
  std::vector<std::size_t> y{0, 1};
  CHECK(test_util::kind_of([&] { train_softmax(x, y, {"a", "b"}, {}); }) == ErrorKind::dimension_mismatch);
  Matrix empty(0, 2);
  CHECK(test_util::kind_of([&] { train_softmax(empty, {}, {"a", "b"}, {}); }) == ErrorKind::empty_input);
  std::vector<std::size_t> bad{0, 1, 2};
  CHECK(test_util::kind_of([&] { train_softmax(x, bad, {"a", "b"}, {}); }) == ErrorKind::label_out_of_range);
}

TEST_CASE("linear model JSON round trip") {
  Matrix x;
  std::vector<std::size_t> y;
  clusters(x, y, 20, 3);
  const auto m = train_softmax(x, y, {"a", "b"}, {});
  const auto back = parse_linear_model(format_linear_model(m));
  CHECK(back.classes == m.classes);
  CHECK(back.weights == m.weights);
  CHECK(back.bias == m.bias);
  CHECK(back.feature_mean == m.feature_mean);
  CHECK(predict_proba(back, x) == predict_proba(m, x));
}

TEST_CASE("feature CSV export") {
  FeatureTable t;
  t.ids = {"a", "b"};
  t.labels = {"human", "avian"};
  t.rows = {{1.0, 2.5, -3.0}, {0.1, 1e-12, 123456789.0123}};
  const auto text = format_features(t);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  CHECK(text.rfind("id,label,f0,f1,f2\n", 0) == 0);

  const auto back = parse_features(text);
  CHECK(back.ids == t.ids);
  CHECK(back.labels == t.labels);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(std::abs(back.rows[r][c] - t.rows[r][c]) <= 1e-9 * std::abs(t.rows[r][c]));
    }
  }

  Rng rng(6);
  FeatureTable big;
  for (int r = 0; r < 30; ++r) {
    big.ids.push_back("s" + std::to_string(r));
    big.labels.push_back("x");
    std::vector<double> row;
    for (int c = 0; c < 50; ++c) row.push_back(rng.normal() * std::pow(10.0, rng.uniform(-6, 6)));
    big.rows.push_back(row);
  }
  const auto dir = test_util::temp_dir("baseline");
  export_features(big, dir / "f.csv");
  const auto in = import_features(dir / "f.csv");
  REQUIRE(in.rows.size() == 30);
  for (std::size_t r = 0; r < 30; ++r) {
    for (std::size_t c = 0; c < 50; ++c) {
      CHECK(std::abs(in.rows[r][c] - big.rows[r][c]) <= 1e-9 * std::abs(big.rows[r][c]));
    }
  }

  FeatureTable ragged = t;
  ragged.rows[1].pop_back();
  CHECK(test_util::kind_of([&] { format_features(ragged); }) == ErrorKind::ragged_matrix);
  CHECK(test_util::kind_of([] { parse_features("id,label,f0\na,x,1,2\n"); }) == ErrorKind::ragged_matrix);
}
