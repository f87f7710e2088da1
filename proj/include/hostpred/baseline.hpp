#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hostpred/matrix.hpp"

namespace hostpred::baseline {

// Indices (ascending) of a subset in which every class keeps exactly as many
// records as the smallest class. Labels are class indices in [0, num_classes).
std::vector<std::size_t> random_undersample(std::span<const std::size_t> labels,
                                            std::size_t num_classes, std::uint64_t seed);

struct SoftmaxConfig {
  double l2 = 1e-4;
  double learning_rate = 0.5;
  std::size_t epochs = 300;
  std::uint64_t seed = 1;
  bool standardize = true;
};

// Multinomial logistic regression on (optionally) standardised features.
struct LinearModel {
  Matrix weights;  // C x F
  std::vector<double> bias;
  std::vector<std::string> classes;
  std::vector<double> feature_mean;   // empty when not standardised
  std::vector<double> feature_scale;

  std::size_t num_classes() const noexcept { return weights.rows(); }
  std::size_t num_features() const noexcept { return weights.cols(); }
};

struct SoftmaxEpoch {
  std::size_t epoch = 0;
  double loss = 0.0;  // regularised objective before the step
  double accuracy = 0.0;
  double val_loss = 0.0;  // NaN without a validation set
  double val_accuracy = 0.0;
};

struct ValidationSet {
  const Matrix* features = nullptr;
  std::span<const std::size_t> labels;
};

// Full-batch proximal gradient descent; the L2 term is applied as a
// shrinkage step so any l2 >= 0 stays stable.
LinearModel train_softmax(const Matrix& features, std::span<const std::size_t> labels,
                          const std::vector<std::string>& classes, const SoftmaxConfig& cfg,
                          std::vector<SoftmaxEpoch>* history = nullptr,
                          const ValidationSet& val = {});

Matrix predict_proba(const LinearModel& model, const Matrix& features);
std::vector<std::size_t> predict(const LinearModel& model, const Matrix& features);

// Mean cross-entropy (without the L2 term).
double cross_entropy(const LinearModel& model, const Matrix& features,
                     std::span<const std::size_t> labels);

std::string format_linear_model(const LinearModel& model);
LinearModel parse_linear_model(std::string_view json_text);

// Feature CSV: header "id,label,f0,...,fK", values with 10 significant digits.
struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;

  std::size_t width() const noexcept { return rows.empty() ? 0 : rows.front().size(); }
  Matrix to_matrix() const;
};

std::string format_number(double value);
std::string format_features(const FeatureTable& table);
FeatureTable parse_features(std::string_view text);
void export_features(const FeatureTable& table, const std::filesystem::path& path);
FeatureTable import_features(const std::filesystem::path& path);

}  // namespace hostpred::baseline
