#include <cmath>
#include <iostream>
#include <mutex>
#include <utility>

#include "hostpred/error.hpp"
#include "hostpred/log.hpp"
#include "hostpred/random.hpp"

namespace hostpred {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::malformed_header: return "MalformedHeader";
    case ErrorKind::empty_sequence: return "EmptySequence";
    case ErrorKind::malformed_dataset: return "MalformedDataset";
    case ErrorKind::malformed_row: return "MalformedRow";
    case ErrorKind::non_numeric_score: return "NonNumericScore";
    case ErrorKind::empty_matrix: return "EmptyMatrix";
    case ErrorKind::missing_column_labels: return "MissingColumnLabels";
    case ErrorKind::sequence_too_short: return "SequenceTooShort";
    case ErrorKind::unsupported_gram: return "UnsupportedGram";
    case ErrorKind::empty_corpus: return "EmptyCorpus";
    case ErrorKind::empty_input: return "EmptyInput";
    case ErrorKind::invalid_dimensions: return "InvalidDimensions";
    case ErrorKind::length_mismatch: return "LengthMismatch";
    case ErrorKind::label_out_of_range: return "LabelOutOfRange";
    case ErrorKind::empty_training_set: return "EmptyTrainingSet";
    case ErrorKind::bad_checkpoint: return "BadCheckpoint";
    case ErrorKind::empty_class: return "EmptyClass";
    case ErrorKind::dimension_mismatch: return "DimensionMismatch";
    case ErrorKind::ragged_matrix: return "RaggedMatrix";
    case ErrorKind::class_too_small: return "ClassTooSmall";
    case ErrorKind::unknown_label: return "UnknownLabel";
    case ErrorKind::id_set_mismatch: return "IdSetMismatch";
    case ErrorKind::empty_grid: return "EmptyGrid";
    case ErrorKind::leakage: return "Leakage";
    case ErrorKind::motif_too_long: return "MotifTooLong";
    case ErrorKind::invalid_spec: return "InvalidSpec";
    case ErrorKind::io_failure: return "IoFailure";
    case ErrorKind::invalid_config: return "InvalidConfig";
    case ErrorKind::invalid_argument: return "InvalidArgument";
    case ErrorKind::internal: return "Internal";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::malformed_header:
    case ErrorKind::empty_sequence:
    case ErrorKind::malformed_dataset:
    case ErrorKind::malformed_row:
    case ErrorKind::non_numeric_score:
    case ErrorKind::empty_matrix:
    case ErrorKind::missing_column_labels:
    case ErrorKind::ragged_matrix:
    case ErrorKind::bad_checkpoint:
      return ErrorCategory::parse;
    case ErrorKind::io_failure:
      return ErrorCategory::io;
    case ErrorKind::sequence_too_short:
    case ErrorKind::empty_corpus:
    case ErrorKind::empty_input:
    case ErrorKind::empty_training_set:
    case ErrorKind::empty_class:
    case ErrorKind::class_too_small:
    case ErrorKind::motif_too_long:
      return ErrorCategory::precondition;
    case ErrorKind::leakage:
      return ErrorCategory::validation;
    case ErrorKind::internal:
      return ErrorCategory::internal;
    default:
      return ErrorCategory::invalid_argument;
  }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  // Lemire-style rejection on the low end of the range.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t r = engine_();
    if (r >= threshold) return r % bound;
  }
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

namespace {

std::mutex g_log_mutex;
LogHandler g_log_handler;

}  // namespace

void set_log_handler(LogHandler handler) {
  std::lock_guard lock(g_log_mutex);
  g_log_handler = std::move(handler);
}

void log_message(LogLevel level, std::string_view message) {
  std::lock_guard lock(g_log_mutex);
  if (g_log_handler) {
    g_log_handler(level, message);
    return;
  }
  std::cerr << (level == LogLevel::warning ? "warning: " : "") << message << '\n';
}

}  // namespace hostpred
