#include "hostpred/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "hostpred/error.hpp"
#include "hostpred/random.hpp"
#include "io_util.hpp"

namespace hostpred::baseline {

std::vector<std::size_t> random_undersample(std::span<const std::size_t> labels,
                                            std::size_t num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw Error(ErrorKind::invalid_argument, "undersampling needs >= 2 classes");
  std::vector<std::vector<std::size_t>> members(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw Error(ErrorKind::label_out_of_range, "label " + std::to_string(labels[i]) + " out of range");
    }
    members[labels[i]].push_back(i);
  }
  std::size_t minority = std::numeric_limits<std::size_t>::max();
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (members[c].empty()) {
      throw Error(ErrorKind::empty_class, "class " + std::to_string(c) + " has no records");
    }
    minority = std::min(minority, members[c].size());
  }

  std::vector<std::size_t> selected;
  selected.reserve(minority * num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    Rng rng(mix_seed(seed, c));
    auto& m = members[c];
    rng.shuffle(std::span<std::size_t>(m));
    selected.insert(selected.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(minority));
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

// ---------------------------------------------------------------------------

namespace {

// Logits for one standardised row.
void row_logits(const LinearModel& m, std::span<const double> x, std::vector<double>& z) {
  const std::size_t C = m.num_classes(), F = m.num_features();
  z.assign(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double s = m.bias[c];
    auto w = m.weights.row(c);
    for (std::size_t f = 0; f < F; ++f) s += w[f] * x[f];
    z[c] = s;
  }
}

void softmax_inplace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

Matrix standardized(const LinearModel& m, const Matrix& features) {
  if (features.cols() != m.num_features()) {
    throw Error(ErrorKind::dimension_mismatch, "feature width " + std::to_string(features.cols()) +
                                                   " != model width " +
                                                   std::to_string(m.num_features()));
  }
  Matrix x = features;
  if (m.feature_mean.empty()) return x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    for (std::size_t f = 0; f < row.size(); ++f) {
      row[f] = (row[f] - m.feature_mean[f]) * m.feature_scale[f];
    }
  }
  return x;
}

std::size_t argmax_of(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

LinearModel train_softmax(const Matrix& features, std::span<const std::size_t> labels,
                          const std::vector<std::string>& classes, const SoftmaxConfig& cfg,
                          std::vector<SoftmaxEpoch>* history, const ValidationSet& val) {
  const std::size_t n = features.rows(), F = features.cols(), C = classes.size();
  if (n == 0 || F == 0) throw Error(ErrorKind::empty_input, "no training data for the softmax model");
  if (labels.size() != n) {
    throw Error(ErrorKind::dimension_mismatch, "label count does not match the feature rows");
  }
  if (C < 2) throw Error(ErrorKind::invalid_argument, "softmax regression needs >= 2 classes");
  for (auto y : labels) {
    if (y >= C) throw Error(ErrorKind::label_out_of_range, "label " + std::to_string(y) + " out of range");
  }
  if (!(cfg.l2 >= 0.0) || !(cfg.learning_rate >= 0.0)) {
    throw Error(ErrorKind::invalid_config, "l2 and learning rate must be non-negative");
  }

  LinearModel m;
  m.classes = classes;
  m.weights = Matrix(C, F);
  m.bias.assign(C, 0.0);
  if (cfg.standardize) {
    m.feature_mean.assign(F, 0.0);
    m.feature_scale.assign(F, 1.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t f = 0; f < F; ++f) m.feature_mean[f] += features(r, f);
    }
    for (double& v : m.feature_mean) v /= static_cast<double>(n);
    std::vector<double> var(F, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t f = 0; f < F; ++f) {
        const double d = features(r, f) - m.feature_mean[f];
        var[f] += d * d;
      }
    }
    for (std::size_t f = 0; f < F; ++f) {
      const double sd = std::sqrt(var[f] / static_cast<double>(n));
      m.feature_scale[f] = sd > 1e-12 ? 1.0 / sd : 1.0;
    }
  }
  Rng rng(mix_seed(cfg.seed, 0));
  const double a = 0.01;
  for (double& w : m.weights.data()) w = rng.uniform(-a, a);

  const Matrix x = standardized(m, features);
  std::vector<double> z;
  Matrix grad(C, F);
  std::vector<double> grad_b(C);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double shrink = 1.0 / (1.0 + cfg.learning_rate * cfg.l2);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::fill(grad.data().begin(), grad.data().end(), 0.0);
    std::fill(grad_b.begin(), grad_b.end(), 0.0);
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t r = 0; r < n; ++r) {
      auto row = x.row(r);
      row_logits(m, row, z);
      softmax_inplace(z);
      loss -= std::log(std::max(z[labels[r]], std::numeric_limits<double>::min()));
      if (argmax_of(z) == labels[r]) ++correct;
      z[labels[r]] -= 1.0;
      for (std::size_t c = 0; c < C; ++c) {
        const double d = z[c] * inv_n;
        grad_b[c] += d;
        auto g = grad.row(c);
        for (std::size_t f = 0; f < F; ++f) g[f] += d * row[f];
      }
    }
    double penalty = 0.0;
    for (double w : m.weights.data()) penalty += w * w;
    if (history) {
      SoftmaxEpoch rec{epoch, loss * inv_n + 0.5 * cfg.l2 * penalty,
                       static_cast<double>(correct) * inv_n, std::nan(""), std::nan("")};
      if (val.features != nullptr && val.features->rows() > 0) {
        rec.val_loss = cross_entropy(m, *val.features, val.labels);
        const auto preds = predict(m, *val.features);
        std::size_t hits = 0;
        for (std::size_t r = 0; r < preds.size(); ++r) hits += preds[r] == val.labels[r] ? 1 : 0;
        rec.val_accuracy = static_cast<double>(hits) / static_cast<double>(preds.size());
      }
      history->push_back(rec);
    }
    // Gradient step on the data term, then the L2 proximal map.
    auto w = m.weights.data();
    auto g = grad.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = (w[i] - cfg.learning_rate * g[i]) * shrink;
    for (std::size_t c = 0; c < C; ++c) m.bias[c] -= cfg.learning_rate * grad_b[c];
  }
  return m;
}

Matrix predict_proba(const LinearModel& model, const Matrix& features) {
  const Matrix x = standardized(model, features);
  Matrix out(x.rows(), model.num_classes());
  std::vector<double> z;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    row_logits(model, x.row(r), z);
    softmax_inplace(z);
    std::copy(z.begin(), z.end(), out.row(r).begin());
  }
  return out;
}

std::vector<std::size_t> predict(const LinearModel& model, const Matrix& features) {
  const Matrix p = predict_proba(model, features);
  std::vector<std::size_t> labels;
  labels.reserve(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    auto row = p.row(r);
    labels.push_back(argmax_of(std::vector<double>(row.begin(), row.end())));
  }
  return labels;
}

double cross_entropy(const LinearModel& model, const Matrix& features,
                     std::span<const std::size_t> labels) {
  const Matrix p = predict_proba(model, features);
  if (labels.size() != p.rows()) throw Error(ErrorKind::dimension_mismatch, "label count mismatch");
  double loss = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    loss -= std::log(std::max(p(r, labels[r]), std::numeric_limits<double>::min()));
  }
  return p.rows() == 0 ? 0.0 : loss / static_cast<double>(p.rows());
}

std::string format_linear_model(const LinearModel& model) {
  nlohmann::json j;
  j["format"] = "hostpred-linear-model";
  j["version"] = 1;
  j["classes"] = model.classes;
  j["num_features"] = model.num_features();
  std::vector<std::vector<double>> w;
  for (std::size_t c = 0; c < model.num_classes(); ++c) {
    auto row = model.weights.row(c);
    w.emplace_back(row.begin(), row.end());
  }
  j["weights"] = w;
  j["bias"] = model.bias;
  j["feature_mean"] = model.feature_mean;
  j["feature_scale"] = model.feature_scale;
  return j.dump(1) + "\n";
}

LinearModel parse_linear_model(std::string_view json_text) {
  try {
    auto j = nlohmann::json::parse(json_text);
    if (j.at("format") != "hostpred-linear-model") {
      throw Error(ErrorKind::malformed_dataset, "not a linear model document");
    }
    LinearModel m;
    m.classes = j.at("classes").get<std::vector<std::string>>();
    const auto F = j.at("num_features").get<std::size_t>();
    auto w = j.at("weights").get<std::vector<std::vector<double>>>();
    m.weights = Matrix(w.size(), F);
    for (std::size_t c = 0; c < w.size(); ++c) {
      if (w[c].size() != F) throw Error(ErrorKind::ragged_matrix, "ragged weight matrix");
      std::copy(w[c].begin(), w[c].end(), m.weights.row(c).begin());
    }
    m.bias = j.at("bias").get<std::vector<double>>();
    m.feature_mean = j.at("feature_mean").get<std::vector<double>>();
    m.feature_scale = j.at("feature_scale").get<std::vector<double>>();
    if (m.bias.size() != w.size() || m.classes.size() != w.size() ||
        (!m.feature_mean.empty() && (m.feature_mean.size() != F || m.feature_scale.size() != F))) {
      throw Error(ErrorKind::dimension_mismatch, "linear model fields disagree in size");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::malformed_dataset, std::string("linear model JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Feature CSV

Matrix FeatureTable::to_matrix() const {
  Matrix m(rows.size(), width());
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  return m;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  return buf;
}

std::string format_features(const FeatureTable& table) {
  if (table.ids.size() != table.rows.size() || table.labels.size() != table.rows.size()) {
    throw Error(ErrorKind::dimension_mismatch, "ids, labels and rows differ in count");
  }
  const std::size_t width = table.width();
  for (const auto& row : table.rows) {
    if (row.size() != width) throw Error(ErrorKind::ragged_matrix, "feature rows differ in length");
  }
  std::string out = "id,label";
  for (std::size_t f = 0; f < width; ++f) out += ",f" + std::to_string(f);
  out += '\n';
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (const auto* field : {&table.ids[r], &table.labels[r]}) {
      if (field->find_first_of(",\n\r") != std::string::npos) {
        throw Error(ErrorKind::invalid_argument, "CSV field contains a comma or newline: " + *field);
      }
    }
    out += table.ids[r];
    out += ',';
    out += table.labels[r];
    for (double v : table.rows[r]) {
      out += ',';
      out += format_number(v);
    }
    out += '\n';
  }
  return out;
}

FeatureTable parse_features(std::string_view text) {
  auto lines = detail::split_lines(text);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorKind::malformed_dataset, "feature CSV is empty");
  auto header = detail::split(lines[0], ',');
  if (header.size() < 2 || header[0] != "id" || header[1] != "label") {
    throw Error(ErrorKind::malformed_dataset, "feature CSV header must start with id,label");
  }
  const std::size_t width = header.size() - 2;
  FeatureTable table;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto fields = detail::split(lines[i], ',');
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::ragged_matrix, "feature CSV line " + std::to_string(i + 1) + " has " +
                                                std::to_string(fields.size()) + " fields, expected " +
                                                std::to_string(header.size()));
    }
    table.ids.emplace_back(fields[0]);
    table.labels.emplace_back(fields[1]);
    std::vector<double> row(width);
    for (std::size_t f = 0; f < width; ++f) {
      if (fields[f + 2] == "nan") {
        row[f] = std::numeric_limits<double>::quiet_NaN();
      } else if (!detail::parse_double(fields[f + 2], row[f])) {
        throw Error(ErrorKind::non_numeric_score, "feature CSV line " + std::to_string(i + 1) +
                                                      ": bad number '" + std::string(fields[f + 2]) + "'");
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void export_features(const FeatureTable& table, const std::filesystem::path& path) {
  detail::write_file(path, format_features(table));
}

FeatureTable import_features(const std::filesystem::path& path) {
  return parse_features(detail::read_file(path));
}

}  // namespace hostpred::baseline
