#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hostpred {

// Broad failure classes; each maps onto one hp_status code of the C API.
enum class ErrorCategory {
  invalid_argument,
  parse,
  io,
  precondition,
  validation,
  internal,
};

enum class ErrorKind {
  // seqio
  malformed_header,
  empty_sequence,
  malformed_dataset,
  // pssm_features
  malformed_row,
  non_numeric_score,
  empty_matrix,
  missing_column_labels,
  sequence_too_short,
  // ngram_text
  unsupported_gram,
  empty_corpus,
  empty_input,
  // neural
  invalid_dimensions,
  length_mismatch,
  label_out_of_range,
  empty_training_set,
  bad_checkpoint,
  // baseline_ml
  empty_class,
  dimension_mismatch,
  ragged_matrix,
  // evaluation
  class_too_small,
  unknown_label,
  id_set_mismatch,
  empty_grid,
  leakage,
  // synthetic_data
  motif_too_long,
  invalid_spec,
  // shared
  io_failure,
  invalid_config,
  invalid_argument,
  internal,
};

std::string_view to_string(ErrorKind kind) noexcept;
ErrorCategory category_of(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace hostpred
