#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hostpred/pssm.hpp"
#include "hostpred/seqio.hpp"

namespace hostpred::synth {

struct MotifSpec {
  std::string label;
  std::string motif;
  std::size_t min_length = 40;
  std::size_t max_length = 60;
  // Sampling weights over seqio::kAminoAcids; all-equal when left empty.
  std::vector<double> background;
  std::uint64_t seed = 0;  // mixed into this class's stream
};

struct SyntheticSet {
  seqio::Dataset dataset;
  std::vector<std::size_t> motif_positions;  // parallel to dataset.records
  // Raw integer-valued PSSMs. Motif rows carry a class-dependent bias.
  std::vector<pssm::Pssm> raw_pssms;
  // group_columns(sigmoid_normalize(raw)), one per record.
  std::vector<pssm::GroupedPssm> grouped;
};

// Three classes with distinct 5-residue motifs, used by tests and the CLI.
std::vector<MotifSpec> default_specs();

// per_class records per spec; records are emitted class by class.
SyntheticSet generate(const std::vector<MotifSpec>& specs, std::size_t per_class,
                      std::uint64_t seed);

}  // namespace hostpred::synth
