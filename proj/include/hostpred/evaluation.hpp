#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hostpred::eval {

// Seeded shuffle per class, then round-robin dealing. The dealing position
// carries over from one class to the next, so total fold sizes also differ
// by at most one. Classes are visited in index order.
std::vector<std::size_t> stratified_kfold(std::span<const std::size_t> labels, std::size_t k,
                                          std::uint64_t seed);

struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::int64_t> counts;  // C x C, row = truth, column = prediction

  std::size_t num_classes() const noexcept { return classes.size(); }
  std::int64_t at(std::size_t truth, std::size_t predicted) const {
    return counts[truth * classes.size() + predicted];
  }
  std::int64_t total() const;
  // Each row divided by its sum; all-zero rows stay zero.
  std::vector<double> row_normalized() const;
};

ConfusionMatrix confusion(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                          const std::vector<std::string>& classes);
ConfusionMatrix confusion(const std::vector<std::string>& y_true,
                          const std::vector<std::string>& y_pred,
                          const std::vector<std::string>& classes);

struct ClassMetrics {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0;
  double sensitivity = 0.0;
  double f1 = 0.0;
  double mcc = 0.0;
};

// One-vs-all per class. A zero denominator gives 0.
std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm);

struct OverallMetrics {
  double f1 = 0.0;   // unweighted mean of per-class F1
  double mcc = 0.0;  // multiclass (Gorodkin) MCC
};

OverallMetrics overall_metrics(const ConfusionMatrix& cm);

struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  OverallMetrics overall;
  ConfusionMatrix confusion;
};

MetricsReport make_report(const ConfusionMatrix& cm);
// JSON document; see README for the layout.
std::string format_report(const MetricsReport& report, const std::map<std::string, std::string>& extra = {});

// ----------------------------------------------------------------------------
// Nested cross-validation

using HyperParams = std::map<std::string, double>;

// What nested_cv needs from a learner: train on `train` rows and return
// predicted class indices for `test` rows. Rows index the caller's dataset.
class ModelFactory {
 public:
  virtual ~ModelFactory() = default;
  virtual std::vector<std::size_t> fit_predict(std::span<const std::size_t> train,
                                               std::span<const std::size_t> test,
                                               const HyperParams& hyper, std::uint64_t seed) = 0;
};

struct CvData {
  std::vector<std::string> ids;
  std::vector<std::size_t> labels;
  std::vector<std::string> classes;
};

struct OuterFold {
  std::size_t index = 0;
  std::size_t chosen = 0;  // index into the grid
  HyperParams hyper;
  std::vector<double> inner_mean_mcc;  // one per grid point
  std::size_t n_train = 0;  // inner training rows (per inner fold)
  std::size_t n_val = 0;    // inner validation rows (per inner fold)
  std::size_t n_test = 0;
  std::vector<std::size_t> test_rows;
  std::vector<std::size_t> predictions;  // parallel to test_rows
  MetricsReport report;
};

struct NestedCvResult {
  std::vector<OuterFold> folds;
  MetricsReport aggregate;  // pooled over all outer test folds
  // Fractions of the whole dataset, averaged over folds.
  double train_fraction = 0.0;
  double val_fraction = 0.0;
  double test_fraction = 0.0;
};

struct NestedCvConfig {
  std::size_t k_outer = 6;
  std::size_t k_inner = 5;
  std::uint64_t seed = 1;
};

// Inner k_inner-fold CV picks the grid point with the best mean overall MCC
// (first one on ties); it is then refit on the whole outer-training split and
// scored once on the outer test fold. Throws Error{leakage} if any split
// shares ids between its sides.
NestedCvResult nested_cv(const CvData& data, ModelFactory& factory,
                         const std::vector<HyperParams>& grid, const NestedCvConfig& cfg);

// ----------------------------------------------------------------------------
// Disagreement across models

struct PredictionRow {
  std::string id;
  std::string truth;
  std::string predicted;
};

std::vector<PredictionRow> parse_predictions(std::string_view csv_text);
std::string format_predictions(const std::vector<PredictionRow>& rows);

struct DisagreementRecord {
  std::string id;
  std::size_t errors = 0;  // E_i
  std::size_t models = 0;  // N
  double rate() const noexcept {
    return models == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(models);
  }
};

enum class Band { none, minority, majority, all };  // 0, (0,0.5), [0.5,1), 1
Band band_of(const DisagreementRecord& record) noexcept;
std::string_view to_string(Band band) noexcept;

struct DisagreementReport {
  std::vector<DisagreementRecord> records;  // in the first model's id order
  std::array<std::size_t, 4> histogram{};   // indexed by Band
};

// Throws Error{id_set_mismatch} when the models do not cover the same ids or
// disagree on the true label of an id.
DisagreementReport disagreement(const std::vector<std::vector<PredictionRow>>& per_model);
std::string format_disagreement(const DisagreementReport& report);

}  // namespace hostpred::eval
