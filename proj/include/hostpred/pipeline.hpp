#pragma once

// Orchestration behind the CLI subcommands. Every entry point is driven by a
// JSON run configuration (see README) and writes its artifacts to disk.

#include <cstddef>
#include <cstdint>
#include <array>
#include <filesystem>
#include <map>
#include <string_view>
#include <string>
#include <vector>

#include "hostpred/neural.hpp"
#include "hostpred/baseline.hpp"
#include "hostpred/seqio.hpp"

namespace hostpred::pipeline {

enum class FeatureScheme { eg, gdpc, er, ngram_enc, ngram_emb };

FeatureScheme parse_scheme(std::string_view name);
std::string_view to_string(FeatureScheme scheme) noexcept;
bool is_pssm_scheme(FeatureScheme scheme) noexcept;

struct CvParams {
  std::size_t k_outer = 6;
  std::size_t k_inner = 5;
};

struct RunConfig {
  std::filesystem::path fasta;
  std::filesystem::path dataset;
  std::filesystem::path pssm_dir;
  std::filesystem::path features;  // precomputed feature CSV (PSSM schemes)
  std::filesystem::path output_dir = "out";
  FeatureScheme scheme = FeatureScheme::ngram_emb;
  int ngram = 3;
  std::uint64_t seed = 42;
  CvParams cv;
  nn::TrainConfig cnn;
  nn::Architecture arch;
  baseline::SoftmaxConfig softmax;
  // Grid points searched in the inner CV loop. Keys override cnn/softmax
  // fields by name (learning_rate, epochs, l2, ...). Empty = one default point.
  std::vector<std::map<std::string, double>> grid;
  double val_fraction = 0.2;
  bool undersample = false;
};

// Reads a JSON document; unknown keys are rejected. Relative paths resolve
// against the current directory.
RunConfig parse_run_config(std::string_view json_text);
std::string format_run_config(const RunConfig& cfg);
void validate(const RunConfig& cfg);

struct CurateSummary {
  seqio::CurationStats stats;
};

CurateSummary run_curate(const std::filesystem::path& fasta, const std::filesystem::path& out,
                         const seqio::HeaderFormat& format);

struct FeaturesSummary {
  std::size_t written = 0;
  std::size_t skipped = 0;
  std::size_t columns = 0;
  std::filesystem::path output;
};

// Writes output_dir/features.csv (or `out` when non-empty).
FeaturesSummary run_features(const RunConfig& cfg, const std::filesystem::path& out = {});

struct TrainSummary {
  std::size_t train_rows = 0;
  std::size_t val_rows = 0;
  std::size_t epochs = 0;
  double final_val_acc = 0.0;
};

TrainSummary run_train(const RunConfig& cfg);

struct EvalSummary {
  std::size_t folds = 0;
  double train_fraction = 0.0;
  double val_fraction = 0.0;
  double test_fraction = 0.0;
  double overall_f1 = 0.0;
  double overall_mcc = 0.0;
};

EvalSummary run_eval(const RunConfig& cfg);

struct IntegrateSummary {
  std::size_t sequences = 0;
  std::size_t models = 0;
  std::array<std::size_t, 4> histogram{};
};

IntegrateSummary run_integrate(const std::vector<std::filesystem::path>& prediction_files,
                               const std::filesystem::path& report_out);

struct SynthesizeSummary {
  std::size_t records = 0;
};

// Writes sequences.fasta, dataset.tsv and pssm/<id>.pssm under `out_dir`.
SynthesizeSummary run_synthesize(const std::filesystem::path& out_dir, std::size_t per_class,
                                 std::uint64_t seed);

}  // namespace hostpred::pipeline
