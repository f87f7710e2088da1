// hostpred command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hostpred/hostpred.h"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitValidation = 3;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int report(hp_status status) {
  if (status == HP_OK) return kExitOk;
  std::cerr << "error [" << hp_last_error_kind() << "]: " << hp_last_error() << "\n";
  return status == HP_E_VALIDATION || status == HP_E_INTERNAL ? kExitValidation : kExitInput;
}

void log_to_stderr(hp_log_level level, const char* message, void*) {
  std::cerr << (level == HP_LOG_WARNING ? "warning: " : "") << message << "\n";
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file: " + path);
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw InputError("config file is not a JSON object: " + path);
    return j;
  } catch (const json::parse_error& e) {
    throw InputError("config file " + path + ": " + e.what());
  }
}

// Options shared by features/train/eval. Anything set on the command line
// overrides the config file.
struct RunFlags {
  std::string config;
  std::optional<std::string> dataset, pssm_dir, features, output_dir, scheme;
  std::optional<int> ngram;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, k_outer, k_inner;
  std::optional<double> learning_rate;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config, "JSON run configuration");
    cmd->add_option("--dataset", dataset, "curated dataset TSV");
    cmd->add_option("--pssm-dir", pssm_dir, "directory of <id>.pssm files");
    cmd->add_option("--features", features, "precomputed PSSM feature CSV");
    cmd->add_option("-o,--output-dir", output_dir, "output directory");
    cmd->add_option("--scheme", scheme, "eg | gdpc | er | ngram-enc | ngram-emb");
    cmd->add_option("-n,--ngram", ngram, "n-gram size (3-5)");
    cmd->add_option("--seed", seed, "top-level random seed");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--learning-rate", learning_rate, "learning rate");
    cmd->add_option("--k-outer", k_outer, "outer CV folds");
    cmd->add_option("--k-inner", k_inner, "inner CV folds");
  }

  std::string merged(bool softmax_epochs) const {
    json j = load_config(config);
    auto set = [&](const char* key, const auto& value) {
      if (value) j[key] = *value;
    };
    set("dataset", dataset);
    set("pssm_dir", pssm_dir);
    set("features", features);
    set("output_dir", output_dir);
    set("scheme", scheme);
    set("ngram", ngram);
    set("seed", seed);
    const std::string scheme_name = j.value("scheme", std::string("ngram-emb"));
    const bool pssm = scheme_name == "eg" || scheme_name == "gdpc" || scheme_name == "er";
    const char* block = pssm && softmax_epochs ? "softmax" : "cnn";
    if (epochs) j[block]["epochs"] = *epochs;
    if (learning_rate) j[block]["learning_rate"] = *learning_rate;
    if (k_outer) j["cv"]["k_outer"] = *k_outer;
    if (k_inner) j["cv"]["k_inner"] = *k_inner;
    return j.dump();
  }
};

std::string percent(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * f);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Influenza host prediction from protein sequences"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(hp_version()));

  // curate
  auto* curate = app.add_subcommand("curate", "parse, validate and deduplicate a FASTA file");
  std::string fasta_in, dataset_out;
  char delimiter = hp_fasta_options_default().delimiter;
  int host_field = hp_fasta_options_default().host_field;
  curate->add_option("fasta", fasta_in, "input FASTA")->required();
  curate->add_option("dataset", dataset_out, "output dataset TSV")->required();
  curate->add_option("--delimiter", delimiter, "header field separator");
  curate->add_option("--host-field", host_field, "header field holding the host (negative counts from the end)");

  // features
  auto* features = app.add_subcommand("features", "extract PSSM or n-gram features to CSV");
  RunFlags feature_flags;
  feature_flags.attach(features);
  std::string csv_out;
  features->add_option("--out", csv_out, "output CSV (default <output-dir>/features.csv)");

  auto* train = app.add_subcommand("train", "train the CNN or the softmax baseline");
  RunFlags train_flags;
  train_flags.attach(train);

  auto* evaluate = app.add_subcommand("eval", "nested cross-validation with per-fold reports");
  RunFlags eval_flags;
  eval_flags.attach(evaluate);

  auto* integrate = app.add_subcommand("integrate", "disagreement analysis across prediction files");
  std::vector<std::string> prediction_files;
  std::string report_out;
  integrate->add_option("predictions", prediction_files, "prediction CSVs (id,true,predicted)")->required();
  integrate->add_option("-o,--out", report_out, "report JSON")->required();

  auto* synth = app.add_subcommand("synth", "write a synthetic motif dataset");
  std::string synth_dir;
  std::size_t per_class = 100;
  std::uint64_t synth_seed = 1;
  synth->add_option("out_dir", synth_dir, "output directory")->required();
  synth->add_option("--per-class", per_class, "records per class");
  synth->add_option("--seed", synth_seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  hp_set_log_handler(log_to_stderr, nullptr);

  try {
    if (*curate) {
      if (!std::filesystem::exists(fasta_in)) throw InputError("input file not found: " + fasta_in);
      hp_fasta_options opts{delimiter, host_field};
      hp_curation_stats stats{};
      if (const auto s = hp_run_curate(fasta_in.c_str(), dataset_out.c_str(), &opts, &stats)) return report(s);
      std::cout << "kept=" << stats.kept << " dropped=" << stats.dropped << "\n";
      std::cout << "invalid=" << stats.invalid << " unlabeled=" << stats.unlabeled
                << " duplicates=" << stats.duplicates << " cross_host=" << stats.cross_host
                << " duplicate_ids=" << stats.duplicate_ids << "\n";
      return kExitOk;
    }
    if (*features) {
      const auto cfg = feature_flags.merged(false);
      hp_features_summary summary{};
      if (const auto s = hp_run_features(cfg.c_str(), csv_out.empty() ? nullptr : csv_out.c_str(), &summary)) {
        return report(s);
      }
      std::cout << "rows=" << summary.written << " skipped=" << summary.skipped
                << " columns=" << summary.columns << "\n";
      return kExitOk;
    }
    if (*train) {
      const auto cfg = train_flags.merged(true);
      hp_train_summary summary{};
      if (const auto s = hp_run_train(cfg.c_str(), &summary)) return report(s);
      std::cout << "train=" << summary.train_rows << " val=" << summary.val_rows
                << " epochs=" << summary.epochs << " val_acc=" << summary.final_val_acc << "\n";
      return kExitOk;
    }
    if (*evaluate) {
      const auto cfg = eval_flags.merged(true);
      hp_eval_summary summary{};
      if (const auto s = hp_run_eval(cfg.c_str(), &summary)) return report(s);
      std::cout << "folds=" << summary.folds << " split train/val/test = " << percent(summary.train_fraction)
                << " / " << percent(summary.val_fraction) << " / " << percent(summary.test_fraction) << "\n";
      std::cout << "overall_f1=" << summary.overall_f1 << " overall_mcc=" << summary.overall_mcc << "\n";
      return kExitOk;
    }
    if (*integrate) {
      std::vector<const char*> paths;
      for (const auto& p : prediction_files) paths.push_back(p.c_str());
      hp_integrate_summary summary{};
      if (const auto s = hp_run_integrate(paths.data(), paths.size(), report_out.c_str(), &summary)) {
        return report(s);
      }
      const char* bands[] = {"0", "(0,0.5)", "[0.5,1)", "1"};
      std::cout << "sequences=" << summary.sequences << " models=" << summary.models << "\n";
      for (int b = 0; b < 4; ++b) std::cout << "rate " << bands[b] << ": " << summary.histogram[b] << "\n";
      return kExitOk;
    }
    if (*synth) {
      std::size_t records = 0;
      if (const auto s = hp_run_synthesize(synth_dir.c_str(), per_class, synth_seed, &records)) return report(s);
      std::cout << "records=" << records << "\n";
      return kExitOk;
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
