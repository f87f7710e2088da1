#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <utility>
#include <span>
#include <string>
#include <vector>

#include "hostpred/matrix.hpp"
#include "hostpred/ngram.hpp"
#include "hostpred/random.hpp"

namespace hostpred::nn {

enum class InputMode : std::uint32_t { embedding = 0, encoding = 1 };
enum class Optimizer { sgd_momentum, adam };

struct Architecture {
  InputMode mode = InputMode::embedding;
  int ngram = 3;
  std::size_t filters = 256;
  std::vector<std::size_t> fc_widths = {128, 64, 32};
  std::size_t num_classes = 3;
  double dropout = 0.2;
  double bn_momentum = 0.9;
};

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 128;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  Optimizer optimizer = Optimizer::sgd_momentum;
  double momentum = 0.9;
  std::size_t embedding_dim = 64;
};

inline constexpr double kBatchNormEpsilon = 1e-5;

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
};

// Embedding (or raw id encoding) -> conv -> batch-norm -> ReLU -> dropout ->
// global max-pool -> fully connected stack with ReLU -> softmax.
//
// The convolution is "valid": width target_len - ngram + 1.
class CnnModel {
 public:
  const Architecture& architecture() const noexcept { return arch_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t target_len() const noexcept { return target_len_; }
  std::size_t embedding_dim() const noexcept { return embedding_dim_; }
  std::size_t input_channels() const noexcept;
  std::size_t conv_width() const noexcept { return target_len_ - arch_.ngram + 1; }

  // Trainable tensors followed by the batch-norm running statistics, in
  // checkpoint order.
  std::vector<Tensor>& tensors() noexcept { return tensors_; }
  const std::vector<Tensor>& tensors() const noexcept { return tensors_; }
  const Tensor& tensor(std::string_view name) const;
  Tensor& tensor(std::string_view name);
  bool is_trainable(std::size_t tensor_index) const;
  std::size_t parameter_count() const;

  bool operator==(const CnnModel& other) const;

 private:
  friend CnnModel init_model(const TrainConfig&, const Architecture&, std::size_t, std::size_t);
  friend CnnModel read_checkpoint(std::istream&);

  Architecture arch_;
  std::size_t vocab_size_ = 0;
  std::size_t target_len_ = 0;
  std::size_t embedding_dim_ = 0;
  std::vector<Tensor> tensors_;
};

// vocab_size counts PAD and UNK. Throws Error{unsupported_gram} outside 3..5
// and Error{invalid_dimensions} for shapes that cannot be built.
CnnModel init_model(const TrainConfig& cfg, const Architecture& arch, std::size_t vocab_size,
                    std::size_t target_len);

// Rows of equal-length id sequences.
struct TokenBatch {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<ngram::TokenId> ids;

  std::span<const ngram::TokenId> row(std::size_t r) const {
    return {ids.data() + r * cols, cols};
  }
};

TokenBatch make_batch(const std::vector<ngram::EncodedSentence>& sentences);
TokenBatch select_rows(const TokenBatch& batch, std::span<const std::size_t> rows);

// Eval-mode class probabilities, B x num_classes.
Matrix forward(const CnnModel& model, const TokenBatch& batch);

struct Gradients {
  std::vector<std::vector<double>> values;  // parallel to model.tensors()
};

struct LossResult {
  double loss = 0.0;
  std::size_t correct = 0;
  Gradients grads;
  std::vector<double> batch_mean;  // per filter, for the running statistics
  std::vector<double> batch_var;
};

// Training-mode pass: batch statistics and dropout drawn from `dropout_rng`.
// Batch-norm running statistics are not touched. Mean cross-entropy.
LossResult loss_and_backward(const CnnModel& model, const TokenBatch& batch,
                             std::span<const std::size_t> labels, Rng& dropout_rng);

// Normalised conv pre-activations (before scale/shift) of a training-mode
// pass, B*W x filters. Exposed for batch-norm checks.
Matrix batchnorm_normalized(const CnnModel& model, const TokenBatch& batch);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;  // NaN without a validation set
  double val_acc = 0.0;
};

struct LabeledBatch {
  TokenBatch tokens;
  std::vector<std::size_t> labels;
};

struct FitResult {
  CnnModel model;
  std::vector<EpochRecord> history;
};

FitResult fit(CnnModel model, const LabeledBatch& train, const LabeledBatch& val,
              const TrainConfig& cfg);

struct Prediction {
  std::vector<std::size_t> labels;
  Matrix probabilities;
};

// Argmax with ties toward the smaller class index.
std::size_t argmax(std::span<const double> row);
Prediction predict(const CnnModel& model, const TokenBatch& batch);

// Mean cross-entropy and accuracy in eval mode.
std::pair<double, double> evaluate(const CnnModel& model, const LabeledBatch& data);

void write_checkpoint(const CnnModel& model, std::ostream& out);
CnnModel read_checkpoint(std::istream& in);
void save_checkpoint(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_checkpoint(const std::filesystem::path& path);

std::string format_history(const std::vector<EpochRecord>& history);

}  // namespace hostpred::nn
