#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hostpred/matrix.hpp"

namespace hostpred::pssm {

inline constexpr std::size_t kNumGroups = 10;

// Residue groups G1..G10 by functional/structural similarity.
inline constexpr std::array<std::string_view, kNumGroups> kResidueGroups = {
    "FYW", "ML", "IV", "ATS", "NH", "QED", "RK", "C", "G", "P"};

// Group index of an amino-acid letter, or -1 if it belongs to none.
int group_of(char residue) noexcept;

struct Pssm {
  std::string residues;               // query sequence, length L
  Matrix scores;                      // L x 20
  std::array<char, 20> column_order;  // residue letter of each column
};

struct GroupedPssm {
  std::string residues;  // length L
  Matrix scores;         // L x 10
};

enum class Scheme { eg, gdpc, er };

inline constexpr std::size_t dimension(Scheme scheme) noexcept {
  return scheme == Scheme::er ? 910 : 100;
}
std::string_view to_string(Scheme scheme) noexcept;

struct FeatureVector {
  Scheme scheme;
  std::vector<double> values;
};

// Reads PSI-BLAST ascii-pssm output. Keeps the 20 log-odds columns and ignores
// the percentage and information columns.
Pssm parse_pssm(std::string_view text);
Pssm read_pssm_file(const std::filesystem::path& path);

// Writes the ascii-pssm layout that parse_pssm reads.
std::string format_pssm(const Pssm& pssm);

// Element-wise 1/(1+exp(-p)).
Pssm sigmoid_normalize(const Pssm& m);

// Averages the 20 columns into the 10 residue groups.
GroupedPssm group_columns(const Pssm& m);

// Row-and-column grouping, 10x10 flattened with the row group outer.
// E(Gi,Gj) sums column j over rows whose residue is in Gi and divides by the
// group size |Gi| (not by the number of such rows).
FeatureVector eg_pssm(const GroupedPssm& g);

// Grouped dipeptide composition; needs L >= 2.
FeatureVector gdpc_pssm(const GroupedPssm& g);

// Gapped pseudo-composition for gaps t = 1..9 plus per-column variances;
// needs L >= 10. Layout: entry (t-1)*100 + i*10 + j holds M(i,j,t) for
// zero-based groups i, j; entries 900..909 hold T(i).
FeatureVector er_pssm(const GroupedPssm& g);

FeatureVector encode(const GroupedPssm& g, Scheme scheme);

// Full path from a raw PSSM: sigmoid, grouping, encoding.
FeatureVector features_from_pssm(const Pssm& raw, Scheme scheme);

}  // namespace hostpred::pssm
