#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "gradcheck.hpp"
#include "hostpred/error.hpp"
#include "hostpred/neural.hpp"
#include "hostpred/random.hpp"
#include "test_util.hpp"

using namespace hostpred;
using namespace hostpred::nn;

namespace {

TokenBatch batch_of(std::vector<std::vector<ngram::TokenId>> rows) {
  std::vector<ngram::EncodedSentence> s;
  for (auto& r : rows) s.push_back({r, r.size()});
  return make_batch(s);
}

LabeledBatch random_labeled(const gradcheck::Setup& s, std::size_t rows, std::uint64_t seed) {
  Rng rng(seed);
  gradcheck::Setup big = s;
  big.batch = rows;
  LabeledBatch out{gradcheck::random_batch(big, rng), {}};
  for (std::size_t r = 0; r < rows; ++r) out.labels.push_back(rng.below(s.arch.num_classes));
  return out;
}

std::size_t index_of(const CnnModel& m, const std::string& name) {
  for (std::size_t i = 0; i < m.tensors().size(); ++i) {
    if (m.tensors()[i].name == name) return i;
  }
  FAIL("no tensor " << name);
  return 0;
}

}  // namespace

TEST_CASE("init_model shapes") {
  TrainConfig cfg;
  cfg.embedding_dim = 16;
  Architecture arch;
  const auto m = init_model(cfg, arch, 100, 20);
  CHECK(m.conv_width() == 18);
  CHECK(m.tensor("embedding").shape == std::vector<std::size_t>{100, 16});
  CHECK(m.tensor("conv.weight").shape == std::vector<std::size_t>{3, 16, 256});
  CHECK(m.tensor("fc1.weight").shape == std::vector<std::size_t>{128, 256});
  CHECK(m.tensor("fc4.weight").shape == std::vector<std::size_t>{3, 32});
  for (std::size_t k = 0; k < 16; ++k) CHECK(m.tensor("embedding").values[k] == 0.0);

  std::vector<std::string> names;
  for (const auto& t : m.tensors()) names.push_back(t.name);
  CHECK(names == std::vector<std::string>{"embedding", "conv.weight", "conv.bias", "bn.gamma", "bn.beta",
                                          "bn.running_mean", "bn.running_var", "fc1.weight", "fc1.bias",
                                          "fc2.weight", "fc2.bias", "fc3.weight", "fc3.bias", "fc4.weight",
                                          "fc4.bias"});
}

TEST_CASE("init_model is deterministic per seed") {
  TrainConfig cfg;
  cfg.embedding_dim = 8;
  Architecture arch;
  arch.filters = 16;
  CHECK(init_model(cfg, arch, 50, 12) == init_model(cfg, arch, 50, 12));
  TrainConfig other = cfg;
  other.seed = 2;
  CHECK_FALSE(init_model(cfg, arch, 50, 12) == init_model(other, arch, 50, 12));
}

TEST_CASE("init_model errors") {
  TrainConfig cfg;
  Architecture arch;
  arch.ngram = 6;
  CHECK(test_util::kind_of([&] { init_model(cfg, arch, 50, 12); }) == ErrorKind::unsupported_gram);
  arch.ngram = 3;
  CHECK(test_util::kind_of([&] { init_model(cfg, arch, 50, 2); }) == ErrorKind::invalid_dimensions);
  CHECK(test_util::kind_of([&] { init_model(cfg, arch, 1, 12); }) == ErrorKind::invalid_dimensions);
}

TEST_CASE("forward produces distributions") {
  auto s = gradcheck::small_setup();
  for (auto mode : {InputMode::embedding, InputMode::encoding}) {
    s.arch.mode = mode;
    const auto m = init_model(s.cfg, s.arch, s.vocab_size, s.target_len);
    const auto data = random_labeled(s, 40, 77);
    const auto p = forward(m, data.tokens);
    REQUIRE(p.rows() == 40);
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double sum = 0.0;
      for (double v : p.row(r)) sum += v;
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
    const auto pad = forward(m, batch_of({std::vector<ngram::TokenId>(s.target_len, 0)}));
    for (double v : pad.data()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("forward is batch independent in eval mode") {
  auto s = gradcheck::small_setup();
  const auto m = init_model(s.cfg, s.arch, s.vocab_size, s.target_len);
  const auto data = random_labeled(s, 8, 5);
  const auto all = forward(m, data.tokens);
  for (std::size_t r = 0; r < 8; ++r) {
    const std::vector<std::size_t> one{r};
    const auto single = forward(m, select_rows(data.tokens, one));
    for (std::size_t c = 0; c < 3; ++c) CHECK(single(0, c) == all(r, c));
  }
}

TEST_CASE("forward rejects a length mismatch") {
  auto s = gradcheck::small_setup();
  const auto m = init_model(s.cfg, s.arch, s.vocab_size, s.target_len);
  CHECK(test_util::kind_of([&] { forward(m, batch_of({{2, 3, 4}})); }) == ErrorKind::length_mismatch);
}

TEST_CASE("uniform logits give ln 3") {
  auto s = gradcheck::small_setup();
  auto m = init_model(s.cfg, s.arch, s.vocab_size, s.target_len);
  for (auto* name : {"fc4.weight", "fc4.bias"}) {
    for (double& v : m.tensors()[index_of(m, name)].values) v = 0.0;
  }
  const auto data = random_labeled(s, 10, 1);
  Rng rng(1);
  CHECK(loss_and_backward(m, data.tokens, data.labels, rng).loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(evaluate(m, data).first == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("loss_and_backward rejects bad labels") {
  auto s = gradcheck::small_setup();
  const auto m = init_model(s.cfg, s.arch, s.vocab_size, s.target_len);
  auto data = random_labeled(s, 4, 1);
  data.labels[2] = 3;
  Rng rng(1);
  CHECK(test_util::kind_of([&] { loss_and_backward(m, data.tokens, data.labels, rng); }) ==
        ErrorKind::label_out_of_range);
}

TEST_CASE("analytic gradients match finite differences") {
  auto s = gradcheck::small_setup();
  for (auto mode : {InputMode::embedding, InputMode::encoding}) {
    s.arch.mode = mode;
    const auto m = init_model(s.cfg, s.arch, s.vocab_size, s.target_len);
    CHECK(m.parameter_count() <= 5000);
    std::size_t kinks = 0, compared = 0;
    for (std::uint64_t b = 0; b < 10; ++b) {
      const auto r = gradcheck::check(m, s, 500 + b);
      INFO("batch " << b << " worst " << r.worst_tensor);
      CHECK(r.max_rel_error < 1e-4);
      CHECK(r.max_kink_rel_error < 1e-4);
      CHECK(r.pad_row_zero);
      kinks += r.kinks;
      compared += r.compared;
    }
    // Kinks are rare; a systematic disagreement would show up as many.
    CHECK(kinks * 100 < compared);
  }
}

TEST_CASE("gradients of a trained model match finite differences") {
  auto s = gradcheck::small_setup();
  auto m = init_model(s.cfg, s.arch, s.vocab_size, s.target_len);
  const auto data = random_labeled(s, 60, 8);
  TrainConfig tc = s.cfg;
  tc.epochs = 5;
  tc.batch_size = 10;
  tc.learning_rate = 0.05;
  m = fit(std::move(m), data, {}, tc).model;
  for (std::uint64_t b = 0; b < 3; ++b) {
    const auto r = gradcheck::check(m, s, 900 + b);
    CHECK(r.max_rel_error < 1e-4);
    CHECK(r.max_kink_rel_error < 1e-4);
  }
}

TEST_CASE("batch-norm normalisation") {
  auto s = gradcheck::small_setup();
  auto m = init_model(s.cfg, s.arch, s.vocab_size, s.target_len);
  const auto data = random_labeled(s, 32, 3);

  // Exact relation: normalised variance = var / (var + eps) per channel.
  auto check_channels = [&](double tol_mean, bool unit_variance) {
    const auto z = batchnorm_normalized(m, data.tokens);
    for (std::size_t f = 0; f < z.cols(); ++f) {
      double mean = 0.0, var = 0.0;
      for (std::size_t r = 0; r < z.rows(); ++r) mean += z(r, f);
      mean /= static_cast<double>(z.rows());
      for (std::size_t r = 0; r < z.rows(); ++r) var += (z(r, f) - mean) * (z(r, f) - mean);
      var /= static_cast<double>(z.rows());
      CHECK(std::abs(mean) <= tol_mean);
      if (unit_variance) CHECK(std::abs(var - 1.0) <= 1e-4);
      else CHECK(var < 1.0);
    }
  };
  check_channels(1e-6, false);

  // With pre-activation variance well above eps the normalised channels have
  // unit variance to 1e-4.
  for (double& w : m.tensors()[index_of(m, "conv.weight")].values) w *= 30.0;
  check_channels(1e-6, true);
}

TEST_CASE("fit with zero learning rate leaves trainable weights unchanged") {
  auto s = gradcheck::small_setup();
  const auto m = init_model(s.cfg, s.arch, s.vocab_size, s.target_len);
  TrainConfig tc = s.cfg;
  tc.learning_rate = 0.0;
  tc.epochs = 3;
  tc.batch_size = 8;
  const auto out = fit(m, random_labeled(s, 30, 2), random_labeled(s, 10, 3), tc);
  for (std::size_t t = 0; t < m.tensors().size(); ++t) {
    if (m.is_trainable(t)) CHECK(out.model.tensors()[t].values == m.tensors()[t].values);
  }
  CHECK(out.history.size() == 3);
}

TEST_CASE("fit is deterministic and keeps the PAD row at zero") {
  auto s = gradcheck::small_setup();
  const auto m = init_model(s.cfg, s.arch, s.vocab_size, s.target_len);
  TrainConfig tc = s.cfg;
  tc.epochs = 4;
  tc.batch_size = 7;
  tc.learning_rate = 0.1;
  const auto train = random_labeled(s, 40, 12);
  const auto val = random_labeled(s, 12, 13);
  for (auto opt : {Optimizer::sgd_momentum, Optimizer::adam}) {
    tc.optimizer = opt;
    const auto a = fit(m, train, val, tc);
    const auto b = fit(m, train, val, tc);
    CHECK(a.model == b.model);
    CHECK(format_history(a.history) == format_history(b.history));
    CHECK_FALSE(a.model == m);
    const auto& emb = a.model.tensor("embedding").values;
    for (std::size_t k = 0; k < a.model.embedding_dim(); ++k) CHECK(emb[k] == 0.0);
    // Running statistics moved away from their initial values.
    CHECK(a.model.tensor("bn.running_mean").values != m.tensor("bn.running_mean").values);
  }
}

TEST_CASE("fit errors") {
  auto s = gradcheck::small_setup();
  const auto m = init_model(s.cfg, s.arch, s.vocab_size, s.target_len);
  CHECK(test_util::kind_of([&] { fit(m, {}, {}, s.cfg); }) == ErrorKind::empty_training_set);
}

TEST_CASE("predict: argmax ties toward the smaller index, repeatable, empty input") {
  const std::vector<double> a{0.2, 0.5, 0.3}, b{0.5, 0.5, 0.0};
  CHECK(argmax(a) == 1);
  CHECK(argmax(b) == 0);

  auto s = gradcheck::small_setup();
  const auto m = init_model(s.cfg, s.arch, s.vocab_size, s.target_len);
  const auto data = random_labeled(s, 20, 4);
  const auto p1 = predict(m, data.tokens);
  const auto p2 = predict(m, data.tokens);
  CHECK(p1.labels == p2.labels);
  CHECK(p1.probabilities == p2.probabilities);

  TokenBatch empty;
  empty.cols = s.target_len;
  CHECK(predict(m, empty).labels.empty());
}

TEST_CASE("checkpoint round trip") {
  auto s = gradcheck::small_setup();
  for (auto mode : {InputMode::embedding, InputMode::encoding}) {
    s.arch.mode = mode;
    const auto m = init_model(s.cfg, s.arch, s.vocab_size, s.target_len);
    std::stringstream buf;
    write_checkpoint(m, buf);
    const std::string bytes = buf.str();
    CHECK(bytes.substr(0, 8) == "HPCNNCKP");
    std::stringstream in(bytes);
    const auto back = read_checkpoint(in);
    CHECK(back == m);
    CHECK(back.architecture().fc_widths == s.arch.fc_widths);

    std::stringstream again;
    write_checkpoint(back, again);
    CHECK(again.str() == bytes);

    std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
    CHECK(test_util::kind_of([&] { read_checkpoint(truncated); }) == ErrorKind::bad_checkpoint);
    std::string wrong = bytes;
    wrong[0] = 'X';
    std::stringstream bad(wrong);
    CHECK(test_util::kind_of([&] { read_checkpoint(bad); }) == ErrorKind::bad_checkpoint);
  }
}

TEST_CASE("checkpoint header layout") {
  auto s = gradcheck::small_setup();
  const auto m = init_model(s.cfg, s.arch, s.vocab_size, s.target_len);
  std::stringstream buf;
  write_checkpoint(m, buf);
  const std::string b = buf.str();
  auto u32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[off + static_cast<std::size_t>(i)]);
    return v;
  };
  CHECK(u32(8) == 1);                      // version
  CHECK(u32(12) == 0);                     // embedding mode
  CHECK(u32(16) == 3);                     // n
  CHECK(u32(20) == s.cfg.embedding_dim);   // N
  CHECK(u32(24) == s.target_len);
  CHECK(u32(28) == s.vocab_size);
}

TEST_CASE("history CSV") {
  std::vector<EpochRecord> h{{1, 1.5, 0.25, 1.25, 0.5}};
  CHECK(format_history(h) == "epoch,train_loss,train_acc,val_loss,val_acc\n1,1.5,0.25,1.25,0.5\n");
}
