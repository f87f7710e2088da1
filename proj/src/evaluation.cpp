#include "hostpred/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "hostpred/error.hpp"
#include "hostpred/random.hpp"
#include "io_util.hpp"

namespace hostpred::eval {

std::vector<std::size_t> stratified_kfold(std::span<const std::size_t> labels, std::size_t k,
                                          std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::invalid_argument, "k-fold needs k >= 2");
  std::size_t num_classes = 0;
  for (auto y : labels) num_classes = std::max(num_classes, y + 1);
  std::vector<std::vector<std::size_t>> members(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);

  std::vector<std::size_t> fold(labels.size(), 0);
  std::size_t next = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& m = members[c];
    if (m.empty()) continue;
    if (m.size() < k) {
      throw Error(ErrorKind::class_too_small, "class " + std::to_string(c) + " has " +
                                                  std::to_string(m.size()) + " records, fewer than k = " +
                                                  std::to_string(k));
    }
    Rng rng(mix_seed(seed, c));
    rng.shuffle(std::span<std::size_t>(m));
    for (auto idx : m) {
      fold[idx] = next;
      next = (next + 1) % k;
    }
  }
  return fold;
}

// ---------------------------------------------------------------------------
// Confusion matrix and metrics

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::vector<double> ConfusionMatrix::row_normalized() const {
  const std::size_t C = num_classes();
  std::vector<double> out(C * C, 0.0);
  for (std::size_t i = 0; i < C; ++i) {
    std::int64_t row = 0;
    for (std::size_t j = 0; j < C; ++j) row += at(i, j);
    if (row == 0) continue;
    for (std::size_t j = 0; j < C; ++j) out[i * C + j] = static_cast<double>(at(i, j)) / static_cast<double>(row);
  }
  return out;
}

ConfusionMatrix confusion(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                          const std::vector<std::string>& classes) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorKind::length_mismatch, "truth has " + std::to_string(y_true.size()) +
                                                " labels, predictions have " +
                                                std::to_string(y_pred.size()));
  }
  const std::size_t C = classes.size();
  ConfusionMatrix cm{classes, std::vector<std::int64_t>(C * C, 0)};
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] >= C || y_pred[i] >= C) {
      throw Error(ErrorKind::unknown_label, "label index outside the class list");
    }
    ++cm.counts[y_true[i] * C + y_pred[i]];
  }
  return cm;
}

ConfusionMatrix confusion(const std::vector<std::string>& y_true,
                          const std::vector<std::string>& y_pred,
                          const std::vector<std::string>& classes) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < classes.size(); ++c) index.emplace(classes[c], c);
  auto lookup = [&](const std::string& label) {
    auto it = index.find(label);
    if (it == index.end()) throw Error(ErrorKind::unknown_label, "unknown label '" + label + "'");
    return it->second;
  };
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorKind::length_mismatch, "truth and prediction lengths differ");
  }
  std::vector<std::size_t> t, p;
  for (const auto& s : y_true) t.push_back(lookup(s));
  for (const auto& s : y_pred) p.push_back(lookup(s));
  return confusion(t, p, classes);
}

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm) {
  const std::size_t C = cm.num_classes();
  const std::int64_t total = cm.total();
  std::vector<ClassMetrics> out(C);
  for (std::size_t i = 0; i < C; ++i) {
    auto& m = out[i];
    m.tp = cm.at(i, i);
    for (std::size_t j = 0; j < C; ++j) {
      if (j == i) continue;
      m.fn += cm.at(i, j);
      m.fp += cm.at(j, i);
    }
    m.tn = total - m.tp - m.fn - m.fp;
    const auto tp = static_cast<double>(m.tp), fp = static_cast<double>(m.fp);
    const auto fn = static_cast<double>(m.fn), tn = static_cast<double>(m.tn);
    m.precision = safe_div(tp, tp + fp);
    m.sensitivity = safe_div(tp, tp + fn);
    m.f1 = safe_div(2.0 * m.precision * m.sensitivity, m.precision + m.sensitivity);
    m.mcc = safe_div(tp * tn - fp * fn, std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)));
  }
  return out;
}

OverallMetrics overall_metrics(const ConfusionMatrix& cm) {
  const std::size_t C = cm.num_classes();
  OverallMetrics out;
  if (C == 0) return out;
  const auto per_class = per_class_metrics(cm);
  for (const auto& m : per_class) out.f1 += m.f1;
  out.f1 /= static_cast<double>(C);

  double c = 0.0, s = 0.0, pt = 0.0, pp = 0.0, tt = 0.0;
  for (std::size_t i = 0; i < C; ++i) {
    double t_i = 0.0, p_i = 0.0;
    for (std::size_t j = 0; j < C; ++j) {
      t_i += static_cast<double>(cm.at(i, j));
      p_i += static_cast<double>(cm.at(j, i));
    }
    c += static_cast<double>(cm.at(i, i));
    s += t_i;
    pt += p_i * t_i;
    pp += p_i * p_i;
    tt += t_i * t_i;
  }
  out.mcc = safe_div(c * s - pt, std::sqrt(s * s - pp) * std::sqrt(s * s - tt));
  return out;
}

MetricsReport make_report(const ConfusionMatrix& cm) {
  return {per_class_metrics(cm), overall_metrics(cm), cm};
}

namespace {

nlohmann::json report_json(const MetricsReport& report) {
  nlohmann::json j;
  const auto& cm = report.confusion;
  const std::size_t C = cm.num_classes();
  j["classes"] = cm.classes;
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t i = 0; i < C; ++i) {
    const auto& m = report.per_class[i];
    per_class[cm.classes[i]] = {{"f1", m.f1},
                                {"mcc", m.mcc},
                                {"precision", m.precision},
                                {"sensitivity", m.sensitivity},
                                {"tp", m.tp},
                                {"fp", m.fp},
                                {"fn", m.fn},
                                {"tn", m.tn}};
  }
  j["per_class"] = per_class;
  j["overall"] = {{"f1", report.overall.f1}, {"mcc", report.overall.mcc}};
  auto rows = nlohmann::json::array();
  auto norm_rows = nlohmann::json::array();
  const auto norm = cm.row_normalized();
  for (std::size_t i = 0; i < C; ++i) {
    rows.push_back(std::vector<std::int64_t>(cm.counts.begin() + static_cast<std::ptrdiff_t>(i * C),
                                             cm.counts.begin() + static_cast<std::ptrdiff_t>((i + 1) * C)));
    norm_rows.push_back(std::vector<double>(norm.begin() + static_cast<std::ptrdiff_t>(i * C),
                                            norm.begin() + static_cast<std::ptrdiff_t>((i + 1) * C)));
  }
  j["confusion"] = rows;
  j["confusion_normalized"] = norm_rows;
  j["total"] = cm.total();
  return j;
}

}  // namespace

std::string format_report(const MetricsReport& report, const std::map<std::string, std::string>& extra) {
  auto j = report_json(report);
  if (!extra.empty()) j["meta"] = extra;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Nested CV

namespace {

void check_disjoint(const CvData& data, std::span<const std::size_t> a,
                    std::span<const std::size_t> b, const std::string& where) {
  std::unordered_set<std::string_view> ids;
  for (auto r : a) ids.insert(data.ids[r]);
  for (auto r : b) {
    if (ids.contains(data.ids[r])) {
      throw Error(ErrorKind::leakage, where + ": id '" + data.ids[r] + "' on both sides of the split");
    }
  }
}

std::vector<std::size_t> run_factory(ModelFactory& factory, std::span<const std::size_t> train,
                                     std::span<const std::size_t> test, const HyperParams& hyper,
                                     std::uint64_t seed, const std::string& where) {
  try {
    auto preds = factory.fit_predict(train, test, hyper, seed);
    if (preds.size() != test.size()) {
      throw Error(ErrorKind::internal, "model returned " + std::to_string(preds.size()) +
                                           " predictions for " + std::to_string(test.size()) + " rows");
    }
    return preds;
  } catch (const Error& e) {
    throw Error(e.kind(), where + ": " + e.what());
  }
}

}  // namespace

NestedCvResult nested_cv(const CvData& data, ModelFactory& factory,
                         const std::vector<HyperParams>& grid, const NestedCvConfig& cfg) {
  if (grid.empty()) throw Error(ErrorKind::empty_grid, "hyperparameter grid is empty");
  if (data.ids.size() != data.labels.size()) {
    throw Error(ErrorKind::length_mismatch, "ids and labels differ in count");
  }
  const std::size_t N = data.labels.size();
  if (N == 0) throw Error(ErrorKind::empty_input, "no records to cross-validate");
  for (auto y : data.labels) {
    if (y >= data.classes.size()) throw Error(ErrorKind::unknown_label, "label index out of range");
  }

  const auto outer = stratified_kfold(data.labels, cfg.k_outer, mix_seed(cfg.seed, 0));
  NestedCvResult result;
  std::vector<std::size_t> all_truth, all_pred;
  double train_frac = 0.0, val_frac = 0.0, test_frac = 0.0;
  std::size_t inner_count = 0;

  for (std::size_t o = 0; o < cfg.k_outer; ++o) {
    const std::string where = "outer fold " + std::to_string(o);
    std::vector<std::size_t> train, test;
    for (std::size_t r = 0; r < N; ++r) (outer[r] == o ? test : train).push_back(r);
    check_disjoint(data, train, test, where);

    std::vector<std::size_t> train_labels;
    for (auto r : train) train_labels.push_back(data.labels[r]);
    std::vector<std::size_t> inner;
    try {
      inner = stratified_kfold(train_labels, cfg.k_inner, mix_seed(cfg.seed, 1 + o));
    } catch (const Error& e) {
      throw Error(e.kind(), where + ": " + e.what());
    }

    OuterFold fold;
    fold.index = o;
    fold.inner_mean_mcc.assign(grid.size(), 0.0);
    for (std::size_t i = 0; i < cfg.k_inner; ++i) {
      const std::string inner_where = where + ", inner fold " + std::to_string(i);
      std::vector<std::size_t> itrain, ival;
      for (std::size_t p = 0; p < train.size(); ++p) (inner[p] == i ? ival : itrain).push_back(train[p]);
      check_disjoint(data, itrain, ival, inner_where);
      check_disjoint(data, itrain, test, inner_where);
      check_disjoint(data, ival, test, inner_where);
      fold.n_train += itrain.size();
      fold.n_val += ival.size();
      train_frac += static_cast<double>(itrain.size()) / static_cast<double>(N);
      val_frac += static_cast<double>(ival.size()) / static_cast<double>(N);
      ++inner_count;

      std::vector<std::size_t> truth;
      for (auto r : ival) truth.push_back(data.labels[r]);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto seed = mix_seed(cfg.seed, 1000 + (o * cfg.k_inner + i) * grid.size() + g);
        auto preds = run_factory(factory, itrain, ival, grid[g], seed, inner_where);
        fold.inner_mean_mcc[g] += overall_metrics(confusion(truth, preds, data.classes)).mcc;
      }
    }
    for (double& v : fold.inner_mean_mcc) v /= static_cast<double>(cfg.k_inner);
    fold.n_train /= cfg.k_inner;
    fold.n_val /= cfg.k_inner;
    fold.chosen = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
      if (fold.inner_mean_mcc[g] > fold.inner_mean_mcc[fold.chosen]) fold.chosen = g;
    }
    fold.hyper = grid[fold.chosen];

    fold.predictions = run_factory(factory, train, test, fold.hyper, mix_seed(cfg.seed, 500 + o), where);
    fold.test_rows = test;
    fold.n_test = test.size();
    test_frac += static_cast<double>(test.size()) / static_cast<double>(N);
    std::vector<std::size_t> truth;
    for (auto r : test) truth.push_back(data.labels[r]);
    fold.report = make_report(confusion(truth, fold.predictions, data.classes));
    all_truth.insert(all_truth.end(), truth.begin(), truth.end());
    all_pred.insert(all_pred.end(), fold.predictions.begin(), fold.predictions.end());
    result.folds.push_back(std::move(fold));
  }

  // Every record is tested exactly once.
  std::vector<std::size_t> seen(N, 0);
  for (const auto& f : result.folds) {
    for (auto r : f.test_rows) ++seen[r];
  }
  if (std::any_of(seen.begin(), seen.end(), [](std::size_t s) { return s != 1; })) {
    throw Error(ErrorKind::leakage, "outer test folds do not partition the dataset");
  }

  result.aggregate = make_report(confusion(all_truth, all_pred, data.classes));
  result.train_fraction = train_frac / static_cast<double>(inner_count);
  result.val_fraction = val_frac / static_cast<double>(inner_count);
  result.test_fraction = test_frac / static_cast<double>(cfg.k_outer);
  return result;
}

// ---------------------------------------------------------------------------
// Disagreement

std::vector<PredictionRow> parse_predictions(std::string_view csv_text) {
  auto lines = detail::split_lines(csv_text);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || detail::trim(lines[0]) != "id,true,predicted") {
    throw Error(ErrorKind::malformed_dataset, "prediction CSV must start with id,true,predicted");
  }
  std::vector<PredictionRow> rows;
  std::unordered_set<std::string> ids;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto f = detail::split(lines[i], ',');
    if (f.size() != 3) {
      throw Error(ErrorKind::malformed_dataset,
                  "prediction CSV line " + std::to_string(i + 1) + ": expected 3 fields");
    }
    PredictionRow row{std::string(f[0]), std::string(f[1]), std::string(f[2])};
    if (!ids.insert(row.id).second) {
      throw Error(ErrorKind::malformed_dataset, "duplicate id '" + row.id + "' in prediction CSV");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_predictions(const std::vector<PredictionRow>& rows) {
  std::string out = "id,true,predicted\n";
  for (const auto& r : rows) out += r.id + "," + r.truth + "," + r.predicted + "\n";
  return out;
}

Band band_of(const DisagreementRecord& record) noexcept {
  if (record.errors == 0) return Band::none;
  if (record.errors >= record.models) return Band::all;
  // rate < 0.5  <=>  2 * errors < models, kept in integers.
  return 2 * record.errors < record.models ? Band::minority : Band::majority;
}

std::string_view to_string(Band band) noexcept {
  switch (band) {
    case Band::none: return "0";
    case Band::minority: return "(0,0.5)";
    case Band::majority: return "[0.5,1)";
    case Band::all: return "1";
  }
  return "?";
}

DisagreementReport disagreement(const std::vector<std::vector<PredictionRow>>& per_model) {
  if (per_model.empty()) throw Error(ErrorKind::empty_input, "no prediction sets");
  const auto& first = per_model.front();
  std::unordered_map<std::string_view, std::size_t> position;
  for (std::size_t i = 0; i < first.size(); ++i) position.emplace(first[i].id, i);

  DisagreementReport report;
  report.records.resize(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    report.records[i].id = first[i].id;
    report.records[i].models = per_model.size();
  }
  for (std::size_t m = 0; m < per_model.size(); ++m) {
    const auto& rows = per_model[m];
    if (rows.size() != first.size()) {
      throw Error(ErrorKind::id_set_mismatch, "model " + std::to_string(m) + " covers " +
                                                  std::to_string(rows.size()) + " ids, model 0 covers " +
                                                  std::to_string(first.size()));
    }
    for (const auto& row : rows) {
      auto it = position.find(row.id);
      if (it == position.end()) {
        throw Error(ErrorKind::id_set_mismatch,
                    "id '" + row.id + "' of model " + std::to_string(m) + " is missing from model 0");
      }
      if (first[it->second].truth != row.truth) {
        throw Error(ErrorKind::id_set_mismatch, "models disagree on the true label of '" + row.id + "'");
      }
      if (row.predicted != row.truth) ++report.records[it->second].errors;
    }
  }
  for (const auto& r : report.records) ++report.histogram[static_cast<std::size_t>(band_of(r))];
  return report;
}

std::string format_disagreement(const DisagreementReport& report) {
  nlohmann::json j;
  const auto n = report.records.size();
  j["sequences"] = n;
  j["models"] = report.records.empty() ? 0 : report.records.front().models;
  auto bands = nlohmann::json::array();
  for (std::size_t b = 0; b < 4; ++b) {
    bands.push_back({{"band", std::string(to_string(static_cast<Band>(b)))},
                     {"count", report.histogram[b]},
                     {"fraction", n == 0 ? 0.0 : static_cast<double>(report.histogram[b]) /
                                                     static_cast<double>(n)}});
  }
  j["histogram"] = bands;
  auto records = nlohmann::json::array();
  for (const auto& r : report.records) {
    records.push_back({{"id", r.id},
                       {"errors", r.errors},
                       {"models", r.models},
                       {"rate", r.rate()},
                       {"band", std::string(to_string(band_of(r)))}});
  }
  j["records"] = records;
  return j.dump(2) + "\n";
}

}  // namespace hostpred::eval
