#include "hostpred/hostpred.h"

#include <cctype>
#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "hostpred/error.hpp"
#include "hostpred/evaluation.hpp"
#include "hostpred/log.hpp"
#include "hostpred/neural.hpp"
#include "hostpred/ngram.hpp"
#include "hostpred/pipeline.hpp"
#include "hostpred/pssm.hpp"
#include "hostpred/seqio.hpp"

using namespace hostpred;

struct hp_dataset {
  seqio::Dataset data;
};

struct hp_model {
  nn::CnnModel model;
  ngram::Vocabulary vocab;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_last_kind;

hp_status to_status(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::invalid_argument: return HP_E_INVALID_ARGUMENT;
    case ErrorCategory::parse: return HP_E_PARSE;
    case ErrorCategory::io: return HP_E_IO;
    case ErrorCategory::precondition: return HP_E_PRECONDITION;
    case ErrorCategory::validation: return HP_E_VALIDATION;
    case ErrorCategory::internal: return HP_E_INTERNAL;
  }
  return HP_E_INTERNAL;
}

hp_status fail(hp_status status, std::string kind, std::string message) {
  g_last_kind = std::move(kind);
  g_last_error = std::move(message);
  return status;
}

template <typename F>
hp_status guarded(F&& body) {
  try {
    body();
    return HP_OK;
  } catch (const Error& e) {
    return fail(to_status(e.category()), std::string(to_string(e.kind())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(HP_E_INTERNAL, "OutOfMemory", "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(HP_E_IO, "IoFailure", e.what());
  } catch (const std::exception& e) {
    return fail(HP_E_INTERNAL, "Internal", e.what());
  } catch (...) {
    return fail(HP_E_INTERNAL, "Internal", "unknown failure");
  }
}

hp_status null_argument(const char* name) {
  return fail(HP_E_INVALID_ARGUMENT, "NullArgument", std::string(name) + " must not be NULL");
}

seqio::HeaderFormat header_format(const hp_fasta_options* o) {
  seqio::HeaderFormat f;
  if (o) {
    f.delimiter = o->delimiter;
    f.host_field = o->host_field;
  }
  return f;
}

void copy_stats(const seqio::CurationStats& s, hp_curation_stats* out) {
  if (!out) return;
  out->parsed = s.parsed;
  out->kept = s.kept;
  out->dropped = s.dropped();
  out->invalid = s.invalid;
  out->unlabeled = s.unlabeled;
  out->duplicates = s.dedup.duplicates;
  out->cross_host = s.dedup.cross_host;
  out->duplicate_ids = s.dedup.duplicate_ids;
}

pssm::Scheme to_scheme(hp_scheme s) {
  switch (s) {
    case HP_SCHEME_EG: return pssm::Scheme::eg;
    case HP_SCHEME_GDPC: return pssm::Scheme::gdpc;
    case HP_SCHEME_ER: return pssm::Scheme::er;
  }
  throw Error(ErrorKind::invalid_config, "unknown scheme " + std::to_string(static_cast<int>(s)));
}

pipeline::RunConfig config_from(const char* json) {
  return pipeline::parse_run_config(json);
}

}  // namespace

extern "C" {

const char* hp_version(void) { return "0.1.0"; }

const char* hp_status_name(hp_status status) {
  switch (status) {
    case HP_OK: return "HP_OK";
    case HP_E_INVALID_ARGUMENT: return "HP_E_INVALID_ARGUMENT";
    case HP_E_PARSE: return "HP_E_PARSE";
    case HP_E_IO: return "HP_E_IO";
    case HP_E_PRECONDITION: return "HP_E_PRECONDITION";
    case HP_E_VALIDATION: return "HP_E_VALIDATION";
    case HP_E_INTERNAL: return "HP_E_INTERNAL";
  }
  return "HP_E_UNKNOWN";
}

const char* hp_last_error(void) { return g_last_error.c_str(); }
const char* hp_last_error_kind(void) { return g_last_kind.c_str(); }

void hp_set_log_handler(hp_log_fn fn, void* user) {
  if (!fn) {
    set_log_handler({});
    return;
  }
  set_log_handler([fn, user](LogLevel level, std::string_view msg) {
    const std::string text(msg);
    fn(level == LogLevel::warning ? HP_LOG_WARNING : HP_LOG_INFO, text.c_str(), user);
  });
}

hp_fasta_options hp_fasta_options_default(void) {
  const seqio::HeaderFormat f;
  return {f.delimiter, f.host_field};
}

hp_status hp_validate_sequence(const char* residues, int* accepted, size_t* bad_index) {
  if (!residues) return null_argument("residues");
  if (!accepted) return null_argument("accepted");
  return guarded([&] {
    const auto r = seqio::validate_sequence(residues);
    *accepted = r ? 0 : 1;
    if (bad_index) {
      *bad_index = !r ? 0 : r->reason == seqio::RejectReason::empty ? static_cast<size_t>(-1) : r->index;
    }
  });
}

hp_status hp_dataset_curate(const char* fasta_text, const hp_fasta_options* options, hp_dataset** out,
                            hp_curation_stats* stats) {
  if (!fasta_text) return null_argument("fasta_text");
  if (!out) return null_argument("out");
  return guarded([&] {
    seqio::CurationStats s;
    auto ds = seqio::curate(seqio::parse_fasta(fasta_text, header_format(options)), &s);
    *out = new hp_dataset{std::move(ds)};
    copy_stats(s, stats);
  });
}

hp_status hp_dataset_load(const char* tsv_path, hp_dataset** out) {
  if (!tsv_path) return null_argument("tsv_path");
  if (!out) return null_argument("out");
  return guarded([&] { *out = new hp_dataset{seqio::read_tsv(tsv_path)}; });
}

hp_status hp_dataset_save(const hp_dataset* dataset, const char* tsv_path) {
  if (!dataset) return null_argument("dataset");
  if (!tsv_path) return null_argument("tsv_path");
  return guarded([&] { seqio::write_tsv(dataset->data, tsv_path); });
}

size_t hp_dataset_size(const hp_dataset* dataset) { return dataset ? dataset->data.size() : 0; }

size_t hp_dataset_num_classes(const hp_dataset* dataset) {
  return dataset ? dataset->data.classes.size() : 0;
}

const char* hp_dataset_class(const hp_dataset* dataset, size_t index) {
  if (!dataset || index >= dataset->data.classes.size()) return nullptr;
  return dataset->data.classes[index].c_str();
}

hp_status hp_dataset_record(const hp_dataset* dataset, size_t index, const char** id, const char** host,
                            const char** residues) {
  if (!dataset) return null_argument("dataset");
  if (index >= dataset->data.size()) {
    return fail(HP_E_INVALID_ARGUMENT, "IndexOutOfRange", "record index " + std::to_string(index) +
                                                              " out of range");
  }
  const auto& r = dataset->data.records[index];
  if (id) *id = r.id.c_str();
  if (host) *host = r.host.c_str();
  if (residues) *residues = r.residues.c_str();
  return HP_OK;
}

void hp_dataset_free(hp_dataset* dataset) { delete dataset; }

size_t hp_scheme_dimension(hp_scheme scheme) {
  switch (scheme) {
    case HP_SCHEME_EG:
    case HP_SCHEME_GDPC:
    case HP_SCHEME_ER:
      return pssm::dimension(to_scheme(scheme));
  }
  return 0;
}

hp_status hp_pssm_features(const char* pssm_text, hp_scheme scheme, double* out, size_t out_len) {
  if (!pssm_text) return null_argument("pssm_text");
  if (!out) return null_argument("out");
  return guarded([&] {
    const auto s = to_scheme(scheme);
    if (out_len < pssm::dimension(s)) {
      throw Error(ErrorKind::dimension_mismatch, "output buffer holds " + std::to_string(out_len) +
                                                     " values, need " + std::to_string(pssm::dimension(s)));
    }
    const auto fv = pssm::features_from_pssm(pssm::parse_pssm(pssm_text), s);
    std::memcpy(out, fv.values.data(), fv.values.size() * sizeof(double));
  });
}

hp_status hp_metrics(const int64_t* counts, size_t num_classes, double* per_class_f1, double* per_class_mcc,
                     double* overall_f1, double* overall_mcc) {
  if (!counts) return null_argument("counts");
  return guarded([&] {
    if (num_classes < 2) throw Error(ErrorKind::invalid_dimensions, "need at least two classes");
    eval::ConfusionMatrix cm;
    for (size_t i = 0; i < num_classes; ++i) cm.classes.push_back(std::to_string(i));
    cm.counts.assign(num_classes * num_classes, 0);
    for (size_t i = 0; i < num_classes * num_classes; ++i) {
      if (counts[i] < 0) throw Error(ErrorKind::invalid_dimensions, "confusion counts must be non-negative");
      cm.counts[i] = counts[i];
    }
    const auto per = eval::per_class_metrics(cm);
    const auto all = eval::overall_metrics(cm);
    for (size_t i = 0; i < num_classes; ++i) {
      if (per_class_f1) per_class_f1[i] = per[i].f1;
      if (per_class_mcc) per_class_mcc[i] = per[i].mcc;
    }
    if (overall_f1) *overall_f1 = all.f1;
    if (overall_mcc) *overall_mcc = all.mcc;
  });
}

hp_status hp_model_load(const char* checkpoint_path, const char* vocab_path, hp_model** out) {
  if (!checkpoint_path) return null_argument("checkpoint_path");
  if (!vocab_path) return null_argument("vocab_path");
  if (!out) return null_argument("out");
  return guarded([&] {
    auto model = nn::load_checkpoint(checkpoint_path);
    auto vocab = ngram::read_vocab(vocab_path);
    if (vocab.id_space() != model.vocab_size() || vocab.n() != model.architecture().ngram) {
      throw Error(ErrorKind::bad_checkpoint, "vocabulary does not match the checkpoint");
    }
    *out = new hp_model{std::move(model), std::move(vocab)};
  });
}

size_t hp_model_num_classes(const hp_model* model) {
  return model ? model->model.architecture().num_classes : 0;
}

hp_status hp_model_predict(const hp_model* model, const char* residues, double* probs, size_t probs_len,
                           size_t* label) {
  if (!model) return null_argument("model");
  if (!residues) return null_argument("residues");
  if (!probs) return null_argument("probs");
  return guarded([&] {
    const auto classes = model->model.architecture().num_classes;
    if (probs_len < classes) {
      throw Error(ErrorKind::dimension_mismatch, "probability buffer too small");
    }
    std::string upper(residues);
    for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (const auto bad = seqio::validate_sequence(upper)) {
      throw Error(ErrorKind::empty_sequence, "sequence rejected by validation");
    }
    const int n = model->vocab.n();
    if (upper.size() < static_cast<std::size_t>(n)) {
      throw Error(ErrorKind::sequence_too_short, "sequence shorter than n = " + std::to_string(n));
    }
    const auto enc = ngram::pad_or_truncate(ngram::encode(ngram::tokenize_ngrams(upper, n), model->vocab),
                                            model->model.target_len());
    const auto pred = nn::predict(model->model, nn::make_batch({enc}));
    for (size_t c = 0; c < classes; ++c) probs[c] = pred.probabilities(0, c);
    if (label) *label = pred.labels[0];
  });
}

void hp_model_free(hp_model* model) { delete model; }

hp_status hp_run_curate(const char* fasta_path, const char* dataset_out, const hp_fasta_options* options,
                        hp_curation_stats* stats) {
  if (!fasta_path) return null_argument("fasta_path");
  if (!dataset_out) return null_argument("dataset_out");
  return guarded([&] {
    const auto s = pipeline::run_curate(fasta_path, dataset_out, header_format(options));
    copy_stats(s.stats, stats);
  });
}

hp_status hp_run_features(const char* config_json, const char* out_path, hp_features_summary* summary) {
  if (!config_json) return null_argument("config_json");
  return guarded([&] {
    const auto s = pipeline::run_features(config_from(config_json),
                                          out_path ? std::filesystem::path(out_path) : std::filesystem::path{});
    if (summary) *summary = {s.written, s.skipped, s.columns};
  });
}

hp_status hp_run_train(const char* config_json, hp_train_summary* summary) {
  if (!config_json) return null_argument("config_json");
  return guarded([&] {
    const auto s = pipeline::run_train(config_from(config_json));
    if (summary) *summary = {s.train_rows, s.val_rows, s.epochs, s.final_val_acc};
  });
}

hp_status hp_run_eval(const char* config_json, hp_eval_summary* summary) {
  if (!config_json) return null_argument("config_json");
  return guarded([&] {
    const auto s = pipeline::run_eval(config_from(config_json));
    if (summary) {
      *summary = {s.folds, s.train_fraction, s.val_fraction, s.test_fraction, s.overall_f1, s.overall_mcc};
    }
  });
}

hp_status hp_run_integrate(const char* const* prediction_paths, size_t count, const char* report_out,
                           hp_integrate_summary* summary) {
  if (!prediction_paths && count > 0) return null_argument("prediction_paths");
  if (!report_out) return null_argument("report_out");
  return guarded([&] {
    std::vector<std::filesystem::path> paths;
    for (size_t i = 0; i < count; ++i) {
      if (!prediction_paths[i]) throw Error(ErrorKind::invalid_config, "prediction path is NULL");
      paths.emplace_back(prediction_paths[i]);
    }
    const auto s = pipeline::run_integrate(paths, report_out);
    if (summary) {
      summary->sequences = s.sequences;
      summary->models = s.models;
      for (size_t b = 0; b < 4; ++b) summary->histogram[b] = s.histogram[b];
    }
  });
}

hp_status hp_run_synthesize(const char* out_dir, size_t per_class, uint64_t seed, size_t* records) {
  if (!out_dir) return null_argument("out_dir");
  return guarded([&] {
    const auto s = pipeline::run_synthesize(out_dir, per_class, seed);
    if (records) *records = s.records;
  });
}

}  // extern "C"
