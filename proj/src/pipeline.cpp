#include "hostpred/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "hostpred/error.hpp"
#include "hostpred/evaluation.hpp"
#include "hostpred/log.hpp"
#include "hostpred/ngram.hpp"
#include "hostpred/pssm.hpp"
#include "hostpred/random.hpp"
#include "hostpred/synthetic.hpp"
#include "io_util.hpp"

namespace hostpred::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// Seed streams derived from the one top-level seed.
enum SeedStream : std::uint64_t {
  kSplitStream = 11,
  kModelStream = 12,
  kUndersampleStream = 13,
  kCvStream = 14,
};

FeatureScheme parse_scheme(std::string_view name) {
  if (name == "eg") return FeatureScheme::eg;
  if (name == "gdpc") return FeatureScheme::gdpc;
  if (name == "er") return FeatureScheme::er;
  if (name == "ngram-enc") return FeatureScheme::ngram_enc;
  if (name == "ngram-emb") return FeatureScheme::ngram_emb;
  throw Error(ErrorKind::invalid_config, "unknown scheme '" + std::string(name) +
                                             "' (expected eg, gdpc, er, ngram-enc, ngram-emb)");
}

std::string_view to_string(FeatureScheme scheme) noexcept {
  switch (scheme) {
    case FeatureScheme::eg: return "eg";
    case FeatureScheme::gdpc: return "gdpc";
    case FeatureScheme::er: return "er";
    case FeatureScheme::ngram_enc: return "ngram-enc";
    case FeatureScheme::ngram_emb: return "ngram-emb";
  }
  return "?";
}

bool is_pssm_scheme(FeatureScheme scheme) noexcept {
  return scheme == FeatureScheme::eg || scheme == FeatureScheme::gdpc || scheme == FeatureScheme::er;
}

namespace {

pssm::Scheme to_pssm(FeatureScheme s) {
  switch (s) {
    case FeatureScheme::eg: return pssm::Scheme::eg;
    case FeatureScheme::gdpc: return pssm::Scheme::gdpc;
    default: return pssm::Scheme::er;
  }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out, std::vector<std::string>& seen) {
  seen.emplace_back(key);
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void reject_unknown(const json& obj, const std::vector<std::string>& known, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw Error(ErrorKind::invalid_config, "unknown key '" + it.key() + "' in " + where);
    }
  }
}

nn::Optimizer parse_optimizer(const std::string& name) {
  if (name == "sgdm") return nn::Optimizer::sgd_momentum;
  if (name == "adam") return nn::Optimizer::adam;
  throw Error(ErrorKind::invalid_config, "unknown optimizer '" + name + "' (expected sgdm, adam)");
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  RunConfig cfg;
  try {
    const json j = json::parse(json_text);
    if (!j.is_object()) throw Error(ErrorKind::invalid_config, "run configuration must be a JSON object");
    std::vector<std::string> known;
    std::string s;
    auto path_field = [&](const char* key, fs::path& out) {
      known.emplace_back(key);
      if (j.contains(key)) out = j.at(key).get<std::string>();
    };
    path_field("fasta", cfg.fasta);
    path_field("dataset", cfg.dataset);
    path_field("pssm_dir", cfg.pssm_dir);
    path_field("features", cfg.features);
    path_field("output_dir", cfg.output_dir);
    known.emplace_back("scheme");
    if (j.contains("scheme")) cfg.scheme = parse_scheme(j.at("scheme").get<std::string>());
    read_field(j, "ngram", cfg.ngram, known);
    read_field(j, "seed", cfg.seed, known);
    read_field(j, "val_fraction", cfg.val_fraction, known);
    read_field(j, "undersample", cfg.undersample, known);

    known.emplace_back("cv");
    if (j.contains("cv")) {
      const auto& cv = j.at("cv");
      std::vector<std::string> cv_known;
      read_field(cv, "k_outer", cfg.cv.k_outer, cv_known);
      read_field(cv, "k_inner", cfg.cv.k_inner, cv_known);
      reject_unknown(cv, cv_known, "cv");
    }
    known.emplace_back("cnn");
    if (j.contains("cnn")) {
      const auto& c = j.at("cnn");
      std::vector<std::string> k;
      read_field(c, "embedding_dim", cfg.cnn.embedding_dim, k);
      read_field(c, "batch_size", cfg.cnn.batch_size, k);
      read_field(c, "epochs", cfg.cnn.epochs, k);
      read_field(c, "learning_rate", cfg.cnn.learning_rate, k);
      read_field(c, "momentum", cfg.cnn.momentum, k);
      read_field(c, "filters", cfg.arch.filters, k);
      read_field(c, "fc_widths", cfg.arch.fc_widths, k);
      read_field(c, "dropout", cfg.arch.dropout, k);
      k.emplace_back("optimizer");
      if (c.contains("optimizer")) cfg.cnn.optimizer = parse_optimizer(c.at("optimizer").get<std::string>());
      reject_unknown(c, k, "cnn");
    }
    known.emplace_back("softmax");
    if (j.contains("softmax")) {
      const auto& c = j.at("softmax");
      std::vector<std::string> k;
      read_field(c, "l2", cfg.softmax.l2, k);
      read_field(c, "learning_rate", cfg.softmax.learning_rate, k);
      read_field(c, "epochs", cfg.softmax.epochs, k);
      read_field(c, "standardize", cfg.softmax.standardize, k);
      reject_unknown(c, k, "softmax");
    }
    read_field(j, "grid", cfg.grid, known);
    reject_unknown(j, known, "run configuration");
  } catch (const json::exception& e) {
    throw Error(ErrorKind::invalid_config, std::string("run configuration: ") + e.what());
  }
  return cfg;
}

std::string format_run_config(const RunConfig& cfg) {
  json j;
  j["fasta"] = cfg.fasta.string();
  j["dataset"] = cfg.dataset.string();
  j["pssm_dir"] = cfg.pssm_dir.string();
  j["features"] = cfg.features.string();
  j["output_dir"] = cfg.output_dir.string();
  j["scheme"] = std::string(to_string(cfg.scheme));
  j["ngram"] = cfg.ngram;
  j["seed"] = cfg.seed;
  j["val_fraction"] = cfg.val_fraction;
  j["undersample"] = cfg.undersample;
  j["cv"] = {{"k_outer", cfg.cv.k_outer}, {"k_inner", cfg.cv.k_inner}};
  j["cnn"] = {{"embedding_dim", cfg.cnn.embedding_dim},
              {"batch_size", cfg.cnn.batch_size},
              {"epochs", cfg.cnn.epochs},
              {"learning_rate", cfg.cnn.learning_rate},
              {"momentum", cfg.cnn.momentum},
              {"optimizer", cfg.cnn.optimizer == nn::Optimizer::adam ? "adam" : "sgdm"},
              {"filters", cfg.arch.filters},
              {"fc_widths", cfg.arch.fc_widths},
              {"dropout", cfg.arch.dropout}};
  j["softmax"] = {{"l2", cfg.softmax.l2},
                  {"learning_rate", cfg.softmax.learning_rate},
                  {"epochs", cfg.softmax.epochs},
                  {"standardize", cfg.softmax.standardize}};
  j["grid"] = cfg.grid;
  return j.dump(2) + "\n";
}

void validate(const RunConfig& cfg) {
  ngram::check_gram(cfg.ngram);
  if (cfg.cv.k_outer < 2 || cfg.cv.k_inner < 2) {
    throw Error(ErrorKind::invalid_config, "k_outer and k_inner must be >= 2");
  }
  if (!(cfg.val_fraction >= 0.0 && cfg.val_fraction < 1.0)) {
    throw Error(ErrorKind::invalid_config, "val_fraction must be in [0, 1)");
  }
  if (cfg.cnn.batch_size == 0 || cfg.cnn.epochs == 0 || cfg.cnn.embedding_dim == 0 ||
      !(cfg.cnn.learning_rate >= 0.0)) {
    throw Error(ErrorKind::invalid_config, "cnn batch_size, epochs and embedding_dim must be positive");
  }
  if (cfg.softmax.epochs == 0) throw Error(ErrorKind::invalid_config, "softmax epochs must be positive");
}

namespace {

void require_path(const fs::path& p, const char* what) {
  if (p.empty()) throw Error(ErrorKind::invalid_config, std::string("missing '") + what + "' path");
  if (!fs::exists(p)) throw Error(ErrorKind::io_failure, std::string(what) + " not found: " + p.string());
}

std::string seed_string(std::uint64_t seed) { return std::to_string(seed); }

// ---------------------------------------------------------------------------
// Feature preparation

struct PssmFeatures {
  std::vector<std::size_t> rows;  // dataset rows that produced a vector
  Matrix values;
};

PssmFeatures pssm_features_for(const seqio::Dataset& ds, const RunConfig& cfg, std::size_t* skipped) {
  const auto scheme = to_pssm(cfg.scheme);
  PssmFeatures out;
  std::vector<std::vector<double>> rows;

  if (!cfg.features.empty()) {
    require_path(cfg.features, "features");
    const auto table = baseline::import_features(cfg.features);
    if (table.width() != pssm::dimension(scheme)) {
      throw Error(ErrorKind::dimension_mismatch, "feature file has " + std::to_string(table.width()) +
                                                     " columns, scheme " +
                                                     std::string(pssm::to_string(scheme)) + " needs " +
                                                     std::to_string(pssm::dimension(scheme)));
    }
    std::unordered_map<std::string_view, std::size_t> by_id;
    for (std::size_t i = 0; i < table.ids.size(); ++i) by_id.emplace(table.ids[i], i);
    for (std::size_t r = 0; r < ds.size(); ++r) {
      auto it = by_id.find(ds.records[r].id);
      if (it == by_id.end()) {
        log_warning("no feature row for '" + ds.records[r].id + "', skipped");
        if (skipped) ++*skipped;
        continue;
      }
      out.rows.push_back(r);
      rows.push_back(table.rows[it->second]);
    }
  } else {
    require_path(cfg.pssm_dir, "pssm_dir");
    for (std::size_t r = 0; r < ds.size(); ++r) {
      const auto& rec = ds.records[r];
      const fs::path path = cfg.pssm_dir / (rec.id + ".pssm");
      pssm::Pssm raw;
      try {
        raw = pssm::read_pssm_file(path);
      } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
      }
      if (raw.residues != rec.residues) {
        throw Error(ErrorKind::length_mismatch,
                    path.string() + ": PSSM query sequence does not match record '" + rec.id + "'");
      }
      try {
        rows.push_back(pssm::features_from_pssm(raw, scheme).values);
        out.rows.push_back(r);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::sequence_too_short) throw;
        log_warning("'" + rec.id + "' skipped: " + e.what());
        if (skipped) ++*skipped;
      }
    }
  }
  out.values = Matrix(rows.size(), pssm::dimension(scheme));
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), out.values.row(i).begin());
  return out;
}

// Rows with at least n residues, and their n-gram token lists.
struct Tokenized {
  std::vector<std::size_t> rows;
  std::vector<std::vector<std::string>> tokens;
};

Tokenized tokenize_dataset(const seqio::Dataset& ds, int n, std::size_t* skipped) {
  Tokenized out;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const auto& rec = ds.records[r];
    if (rec.residues.size() < static_cast<std::size_t>(n)) {
      log_warning("'" + rec.id + "' skipped: shorter than n = " + std::to_string(n));
      if (skipped) ++*skipped;
      continue;
    }
    out.rows.push_back(r);
    out.tokens.push_back(ngram::tokenize_ngrams(rec.residues, n));
  }
  return out;
}

// Vocabulary and target length fitted on `fit_rows`; returns padded batches.
struct TextEncoder {
  ngram::Vocabulary vocab;
  std::size_t target = 0;

  static TextEncoder fit(const std::vector<std::vector<std::string>>& tokens,
                         std::span<const std::size_t> fit_rows, int n) {
    std::vector<std::vector<std::string>> corpus;
    corpus.reserve(fit_rows.size());
    for (auto r : fit_rows) corpus.push_back(tokens[r]);
    TextEncoder enc;
    enc.vocab = ngram::build_vocab(corpus, n);
    std::vector<ngram::EncodedSentence> encoded;
    for (const auto& t : corpus) encoded.push_back(ngram::encode(t, enc.vocab));
    enc.target = ngram::target_length(encoded);
    if (enc.target < static_cast<std::size_t>(n)) enc.target = static_cast<std::size_t>(n);
    return enc;
  }

  nn::TokenBatch batch(const std::vector<std::vector<std::string>>& tokens,
                       std::span<const std::size_t> rows) const {
    std::vector<ngram::EncodedSentence> s;
    s.reserve(rows.size());
    for (auto r : rows) s.push_back(ngram::pad_or_truncate(ngram::encode(tokens[r], vocab), target));
    nn::TokenBatch b = nn::make_batch(s);
    b.cols = target;
    return b;
  }
};

void apply_hyper(const eval::HyperParams& hyper, nn::TrainConfig& cnn, nn::Architecture& arch,
                 baseline::SoftmaxConfig& softmax, bool is_cnn) {
  for (const auto& [key, value] : hyper) {
    auto as_size = [&] {
      if (!(value >= 1.0) || value != std::floor(value)) {
        throw Error(ErrorKind::invalid_config, "grid value for '" + key + "' must be a positive integer");
      }
      return static_cast<std::size_t>(value);
    };
    if (is_cnn) {
      if (key == "learning_rate") cnn.learning_rate = value;
      else if (key == "epochs") cnn.epochs = as_size();
      else if (key == "batch_size") cnn.batch_size = as_size();
      else if (key == "embedding_dim") cnn.embedding_dim = as_size();
      else if (key == "momentum") cnn.momentum = value;
      else if (key == "filters") arch.filters = as_size();
      else if (key == "dropout") arch.dropout = value;
      else throw Error(ErrorKind::invalid_config, "grid key '" + key + "' does not apply to the CNN");
    } else {
      if (key == "learning_rate") softmax.learning_rate = value;
      else if (key == "epochs") softmax.epochs = as_size();
      else if (key == "l2") softmax.l2 = value;
      else throw Error(ErrorKind::invalid_config, "grid key '" + key + "' does not apply to softmax");
    }
  }
}

nn::Architecture arch_for(const RunConfig& cfg, std::size_t num_classes) {
  nn::Architecture arch = cfg.arch;
  arch.mode = cfg.scheme == FeatureScheme::ngram_enc ? nn::InputMode::encoding : nn::InputMode::embedding;
  arch.ngram = cfg.ngram;
  arch.num_classes = num_classes;
  return arch;
}

// Train rows and validation rows for a single stratified hold-out split.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(
    std::span<const std::size_t> labels, double val_fraction, std::uint64_t seed) {
  std::vector<std::size_t> train, val;
  if (val_fraction <= 0.0) {
    train.resize(labels.size());
    std::iota(train.begin(), train.end(), std::size_t{0});
    return {train, val};
  }
  const auto k = static_cast<std::size_t>(std::max(2.0, std::round(1.0 / val_fraction)));
  const auto fold = eval::stratified_kfold(labels, k, seed);
  for (std::size_t i = 0; i < labels.size(); ++i) (fold[i] == 0 ? val : train).push_back(i);
  return {train, val};
}

std::vector<std::size_t> maybe_undersample(const RunConfig& cfg, std::vector<std::size_t> rows,
                                           std::span<const std::size_t> labels, std::size_t num_classes,
                                           std::uint64_t seed) {
  if (!cfg.undersample) return rows;
  std::vector<std::size_t> sub_labels;
  for (auto r : rows) sub_labels.push_back(labels[r]);
  const auto keep = baseline::random_undersample(sub_labels, num_classes, seed);
  std::vector<std::size_t> out;
  for (auto k : keep) out.push_back(rows[k]);
  return out;
}

class CnnFactory : public eval::ModelFactory {
 public:
  CnnFactory(const RunConfig& cfg, const Tokenized& tokens, std::vector<std::size_t> labels,
             std::size_t num_classes)
      : cfg_(cfg), tokens_(tokens), labels_(std::move(labels)), num_classes_(num_classes) {}

  std::vector<std::size_t> fit_predict(std::span<const std::size_t> train,
                                       std::span<const std::size_t> test,
                                       const eval::HyperParams& hyper, std::uint64_t seed) override {
    nn::TrainConfig tc = cfg_.cnn;
    nn::Architecture arch = arch_for(cfg_, num_classes_);
    baseline::SoftmaxConfig unused;
    apply_hyper(hyper, tc, arch, unused, true);
    tc.seed = mix_seed(seed, kModelStream);

    auto rows = maybe_undersample(cfg_, {train.begin(), train.end()}, labels_, num_classes_,
                                  mix_seed(seed, kUndersampleStream));
    const auto enc = TextEncoder::fit(tokens_.tokens, rows, cfg_.ngram);
    nn::LabeledBatch tr{enc.batch(tokens_.tokens, rows), {}};
    for (auto r : rows) tr.labels.push_back(labels_[r]);
    auto model = nn::init_model(tc, arch, enc.vocab.id_space(), enc.target);
    auto fitted = nn::fit(std::move(model), tr, nn::LabeledBatch{}, tc);
    return nn::predict(fitted.model, enc.batch(tokens_.tokens, test)).labels;
  }

 private:
  const RunConfig& cfg_;
  const Tokenized& tokens_;
  std::vector<std::size_t> labels_;
  std::size_t num_classes_;
};

class SoftmaxFactory : public eval::ModelFactory {
 public:
  SoftmaxFactory(const RunConfig& cfg, const Matrix& features, std::vector<std::size_t> labels,
                 std::vector<std::string> classes)
      : cfg_(cfg), features_(features), labels_(std::move(labels)), classes_(std::move(classes)) {}

  std::vector<std::size_t> fit_predict(std::span<const std::size_t> train,
                                       std::span<const std::size_t> test,
                                       const eval::HyperParams& hyper, std::uint64_t seed) override {
    nn::TrainConfig unused_cnn;
    nn::Architecture unused_arch;
    baseline::SoftmaxConfig sc = cfg_.softmax;
    apply_hyper(hyper, unused_cnn, unused_arch, sc, false);
    sc.seed = mix_seed(seed, kModelStream);
    auto rows = maybe_undersample(cfg_, {train.begin(), train.end()}, labels_, classes_.size(),
                                  mix_seed(seed, kUndersampleStream));
    Matrix x = gather(rows);
    std::vector<std::size_t> y;
    for (auto r : rows) y.push_back(labels_[r]);
    const auto model = baseline::train_softmax(x, y, classes_, sc);
    return baseline::predict(model, gather(test));
  }

 private:
  Matrix gather(std::span<const std::size_t> rows) const {
    Matrix m(rows.size(), features_.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto src = features_.row(rows[i]);
      std::copy(src.begin(), src.end(), m.row(i).begin());
    }
    return m;
  }

  const RunConfig& cfg_;
  const Matrix& features_;
  std::vector<std::size_t> labels_;
  std::vector<std::string> classes_;
};

}  // namespace

// ---------------------------------------------------------------------------
// curate

CurateSummary run_curate(const fs::path& fasta, const fs::path& out, const seqio::HeaderFormat& format) {
  require_path(fasta, "fasta");
  CurateSummary summary;
  const auto entries = seqio::read_fasta_file(fasta, format);
  const auto ds = seqio::curate(entries, &summary.stats);
  seqio::write_tsv(ds, out);
  return summary;
}

// ---------------------------------------------------------------------------
// features

FeaturesSummary run_features(const RunConfig& cfg, const fs::path& out) {
  validate(cfg);
  require_path(cfg.dataset, "dataset");
  const auto ds = seqio::read_tsv(cfg.dataset);
  FeaturesSummary summary;
  summary.output = out.empty() ? cfg.output_dir / "features.csv" : out;

  baseline::FeatureTable table;
  if (is_pssm_scheme(cfg.scheme)) {
    auto feats = pssm_features_for(ds, cfg, &summary.skipped);
    for (std::size_t i = 0; i < feats.rows.size(); ++i) {
      const auto& rec = ds.records[feats.rows[i]];
      table.ids.push_back(rec.id);
      table.labels.push_back(rec.host);
      auto row = feats.values.row(i);
      table.rows.emplace_back(row.begin(), row.end());
    }
  } else {
    // Exported encodings use a vocabulary over the whole file; eval refits
    // the vocabulary inside every training split instead.
    const auto tok = tokenize_dataset(ds, cfg.ngram, &summary.skipped);
    if (tok.rows.empty()) throw Error(ErrorKind::empty_input, "no sequence is long enough to tokenize");
    std::vector<std::size_t> all(tok.rows.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto enc = TextEncoder::fit(tok.tokens, all, cfg.ngram);
    const auto batch = enc.batch(tok.tokens, all);
    for (std::size_t i = 0; i < tok.rows.size(); ++i) {
      const auto& rec = ds.records[tok.rows[i]];
      table.ids.push_back(rec.id);
      table.labels.push_back(rec.host);
      auto ids = batch.row(i);
      table.rows.emplace_back(ids.begin(), ids.end());
    }
    ngram::write_vocab(enc.vocab, summary.output.parent_path() / "vocab.tsv");
  }
  baseline::export_features(table, summary.output);
  summary.written = table.rows.size();
  summary.columns = table.width() + 2;
  return summary;
}

// ---------------------------------------------------------------------------
// train

TrainSummary run_train(const RunConfig& cfg) {
  validate(cfg);
  require_path(cfg.dataset, "dataset");
  const auto ds = seqio::read_tsv(cfg.dataset);
  if (ds.classes.size() < 2) throw Error(ErrorKind::invalid_config, "training needs at least two classes");
  const auto all_labels = ds.label_indices();
  fs::create_directories(cfg.output_dir);
  TrainSummary summary;
  json meta;
  meta["seed"] = cfg.seed;
  meta["scheme"] = std::string(to_string(cfg.scheme));
  meta["classes"] = ds.classes;

  if (is_pssm_scheme(cfg.scheme)) {
    const auto feats = pssm_features_for(ds, cfg, nullptr);
    std::vector<std::size_t> labels;
    for (auto r : feats.rows) labels.push_back(all_labels[r]);
    auto [train, val] = holdout_split(labels, cfg.val_fraction, mix_seed(cfg.seed, kSplitStream));
    train = maybe_undersample(cfg, train, labels, ds.classes.size(), mix_seed(cfg.seed, kUndersampleStream));
    auto gather = [&](const std::vector<std::size_t>& rows, Matrix& x, std::vector<std::size_t>& y) {
      x = Matrix(rows.size(), feats.values.cols());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = feats.values.row(rows[i]);
        std::copy(src.begin(), src.end(), x.row(i).begin());
        y.push_back(labels[rows[i]]);
      }
    };
    Matrix xt, xv;
    std::vector<std::size_t> yt, yv;
    gather(train, xt, yt);
    gather(val, xv, yv);
    baseline::SoftmaxConfig sc = cfg.softmax;
    sc.seed = mix_seed(cfg.seed, kModelStream);
    std::vector<baseline::SoftmaxEpoch> hist;
    const auto model = baseline::train_softmax(xt, yt, ds.classes, sc, &hist, {&xv, yv});
    detail::write_file(cfg.output_dir / "linear_model.json", baseline::format_linear_model(model));
    std::vector<nn::EpochRecord> rows;
    for (const auto& h : hist) rows.push_back({h.epoch, h.loss, h.accuracy, h.val_loss, h.val_accuracy});
    detail::write_file(cfg.output_dir / "history.csv", nn::format_history(rows));
    summary.train_rows = train.size();
    summary.val_rows = val.size();
    summary.epochs = hist.size();
    if (!val.empty()) {
      const auto preds = baseline::predict(model, xv);
      std::size_t hits = 0;
      for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == yv[i] ? 1 : 0;
      summary.final_val_acc = static_cast<double>(hits) / static_cast<double>(preds.size());
    } else {
      summary.final_val_acc = std::nan("");
    }
    meta["model"] = "softmax";
  } else {
    const auto tok = tokenize_dataset(ds, cfg.ngram, nullptr);
    std::vector<std::size_t> labels;
    for (auto r : tok.rows) labels.push_back(all_labels[r]);
    auto [train, val] = holdout_split(labels, cfg.val_fraction, mix_seed(cfg.seed, kSplitStream));
    train = maybe_undersample(cfg, train, labels, ds.classes.size(), mix_seed(cfg.seed, kUndersampleStream));
    const auto enc = TextEncoder::fit(tok.tokens, train, cfg.ngram);
    nn::LabeledBatch tr{enc.batch(tok.tokens, train), {}};
    nn::LabeledBatch va{enc.batch(tok.tokens, val), {}};
    for (auto r : train) tr.labels.push_back(labels[r]);
    for (auto r : val) va.labels.push_back(labels[r]);
    nn::TrainConfig tc = cfg.cnn;
    tc.seed = mix_seed(cfg.seed, kModelStream);
    auto model = nn::init_model(tc, arch_for(cfg, ds.classes.size()), enc.vocab.id_space(), enc.target);
    auto fitted = nn::fit(std::move(model), tr, va, tc);
    nn::save_checkpoint(fitted.model, cfg.output_dir / "model.ckpt");
    ngram::write_vocab(enc.vocab, cfg.output_dir / "vocab.tsv");
    detail::write_file(cfg.output_dir / "history.csv", nn::format_history(fitted.history));
    summary.train_rows = train.size();
    summary.val_rows = val.size();
    summary.epochs = fitted.history.size();
    summary.final_val_acc = fitted.history.back().val_acc;
    meta["model"] = "cnn";
    meta["target_len"] = enc.target;
    meta["vocab_size"] = enc.vocab.id_space();
    meta["parameters"] = fitted.model.parameter_count();
  }
  meta["train_rows"] = summary.train_rows;
  meta["val_rows"] = summary.val_rows;
  meta["final_val_acc"] = std::isnan(summary.final_val_acc) ? json(nullptr) : json(summary.final_val_acc);
  meta["config"] = json::parse(format_run_config(cfg));
  detail::write_file(cfg.output_dir / "train_summary.json", meta.dump(2) + "\n");
  return summary;
}

// ---------------------------------------------------------------------------
// eval

EvalSummary run_eval(const RunConfig& cfg) {
  validate(cfg);
  require_path(cfg.dataset, "dataset");
  const auto ds = seqio::read_tsv(cfg.dataset);
  const auto all_labels = ds.label_indices();
  std::vector<eval::HyperParams> grid = cfg.grid;
  if (grid.empty()) grid.emplace_back();

  eval::CvData data;
  data.classes = ds.classes;
  std::unique_ptr<eval::ModelFactory> factory;
  PssmFeatures feats;
  Tokenized tok;
  std::vector<std::size_t> rows;
  if (is_pssm_scheme(cfg.scheme)) {
    feats = pssm_features_for(ds, cfg, nullptr);
    rows = feats.rows;
  } else {
    tok = tokenize_dataset(ds, cfg.ngram, nullptr);
    rows = tok.rows;
  }
  for (auto r : rows) {
    data.ids.push_back(ds.records[r].id);
    data.labels.push_back(all_labels[r]);
  }
  if (is_pssm_scheme(cfg.scheme)) {
    factory = std::make_unique<SoftmaxFactory>(cfg, feats.values, data.labels, data.classes);
  } else {
    factory = std::make_unique<CnnFactory>(cfg, tok, data.labels, data.classes.size());
  }

  eval::NestedCvConfig cv{cfg.cv.k_outer, cfg.cv.k_inner, mix_seed(cfg.seed, kCvStream)};
  const auto result = eval::nested_cv(data, *factory, grid, cv);

  fs::create_directories(cfg.output_dir);
  std::vector<eval::PredictionRow> predictions;
  for (const auto& fold : result.folds) {
    std::map<std::string, std::string> extra{{"seed", seed_string(cfg.seed)},
                                             {"fold", std::to_string(fold.index + 1)},
                                             {"scheme", std::string(to_string(cfg.scheme))},
                                             {"n_train", std::to_string(fold.n_train)},
                                             {"n_val", std::to_string(fold.n_val)},
                                             {"n_test", std::to_string(fold.n_test)},
                                             {"hyper", json(fold.hyper).dump()}};
    detail::write_file(cfg.output_dir / ("fold_" + std::to_string(fold.index + 1) + ".json"),
                       eval::format_report(fold.report, extra));
    for (std::size_t i = 0; i < fold.test_rows.size(); ++i) {
      const auto r = fold.test_rows[i];
      predictions.push_back({data.ids[r], data.classes[data.labels[r]], data.classes[fold.predictions[i]]});
    }
  }
  std::map<std::string, std::string> extra{{"seed", seed_string(cfg.seed)},
                                           {"scheme", std::string(to_string(cfg.scheme))},
                                           {"folds", std::to_string(result.folds.size())},
                                           {"train_fraction", baseline::format_number(result.train_fraction)},
                                           {"val_fraction", baseline::format_number(result.val_fraction)},
                                           {"test_fraction", baseline::format_number(result.test_fraction)}};
  detail::write_file(cfg.output_dir / "aggregate.json", eval::format_report(result.aggregate, extra));
  detail::write_file(cfg.output_dir / "predictions.csv", eval::format_predictions(predictions));

  EvalSummary summary;
  summary.folds = result.folds.size();
  summary.train_fraction = result.train_fraction;
  summary.val_fraction = result.val_fraction;
  summary.test_fraction = result.test_fraction;
  summary.overall_f1 = result.aggregate.overall.f1;
  summary.overall_mcc = result.aggregate.overall.mcc;
  return summary;
}

// ---------------------------------------------------------------------------
// integrate

IntegrateSummary run_integrate(const std::vector<fs::path>& prediction_files, const fs::path& report_out) {
  if (prediction_files.empty()) throw Error(ErrorKind::invalid_config, "no prediction files given");
  std::vector<std::vector<eval::PredictionRow>> per_model;
  for (const auto& p : prediction_files) {
    require_path(p, "prediction file");
    try {
      per_model.push_back(eval::parse_predictions(detail::read_file(p)));
    } catch (const Error& e) {
      throw Error(e.kind(), p.string() + ": " + e.what());
    }
  }
  const auto report = eval::disagreement(per_model);
  detail::write_file(report_out, eval::format_disagreement(report));
  IntegrateSummary s;
  s.sequences = report.records.size();
  s.models = per_model.size();
  s.histogram = report.histogram;
  return s;
}

// ---------------------------------------------------------------------------
// synthesize

SynthesizeSummary run_synthesize(const fs::path& out_dir, std::size_t per_class, std::uint64_t seed) {
  if (per_class == 0) throw Error(ErrorKind::invalid_config, "per_class must be positive");
  const auto set = synth::generate(synth::default_specs(), per_class, seed);
  fs::create_directories(out_dir / "pssm");
  std::vector<seqio::FastaEntry> entries;
  for (std::size_t i = 0; i < set.dataset.size(); ++i) {
    const auto& r = set.dataset.records[i];
    entries.push_back({r.id, r.host, r.residues});
    detail::write_file(out_dir / "pssm" / (r.id + ".pssm"), pssm::format_pssm(set.raw_pssms[i]));
  }
  detail::write_file(out_dir / "sequences.fasta", seqio::format_fasta(entries));
  seqio::write_tsv(set.dataset, out_dir / "dataset.tsv");
  return {set.dataset.size()};
}

}  // namespace hostpred::pipeline
