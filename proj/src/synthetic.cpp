#include "hostpred/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "hostpred/error.hpp"
#include "hostpred/random.hpp"

namespace hostpred::synth {

namespace {

constexpr double kScoreSpread = 2.0;   // sd of background log-odds
constexpr double kMotifBias = 5.0;     // added to the class's favoured group on motif rows
constexpr double kSelfScore = 4.0;     // added to a row's own residue column
constexpr double kScoreClip = 9.0;

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t p = haystack.find(needle); p != std::string_view::npos; p = haystack.find(needle, p + 1)) ++n;
  return n;
}

void check_specs(const std::vector<MotifSpec>& specs) {
  if (specs.size() < 2) throw Error(ErrorKind::invalid_spec, "need at least two motif specs");
  std::set<std::string> labels, motifs;
  for (const auto& s : specs) {
    if (s.label.empty() || !labels.insert(s.label).second) {
      throw Error(ErrorKind::invalid_spec, "labels must be non-empty and distinct");
    }
    if (s.motif.empty() || !motifs.insert(s.motif).second) {
      throw Error(ErrorKind::invalid_spec, "motifs must be non-empty and distinct");
    }
    if (seqio::validate_sequence(s.motif)) {
      throw Error(ErrorKind::invalid_spec, "motif '" + s.motif + "' uses letters outside the alphabet");
    }
    if (s.min_length > s.max_length) {
      throw Error(ErrorKind::invalid_spec, "min_length exceeds max_length for '" + s.label + "'");
    }
    if (s.motif.size() > s.min_length) {
      throw Error(ErrorKind::motif_too_long, "motif '" + s.motif + "' is longer than the minimum length " +
                                                 std::to_string(s.min_length));
    }
    if (!s.background.empty()) {
      if (s.background.size() != seqio::kAminoAcids.size() ||
          std::any_of(s.background.begin(), s.background.end(), [](double w) { return !(w >= 0.0); })) {
        throw Error(ErrorKind::invalid_spec, "background needs 20 non-negative weights");
      }
      double total = 0.0;
      for (double w : s.background) total += w;
      if (!(total > 0.0)) throw Error(ErrorKind::invalid_spec, "background weights sum to zero");
    }
  }
  for (const auto& a : specs) {
    for (const auto& b : specs) {
      if (&a != &b && b.motif.find(a.motif) != std::string::npos) {
        throw Error(ErrorKind::invalid_spec, "motif '" + a.motif + "' occurs inside '" + b.motif + "'");
      }
    }
  }
}

char sample_residue(const std::vector<double>& cumulative, Rng& rng) {
  if (cumulative.empty()) return seqio::kAminoAcids[rng.below(seqio::kAminoAcids.size())];
  const double u = rng.uniform() * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), 19);
  return seqio::kAminoAcids[idx];
}

pssm::Pssm synthetic_pssm(const std::string& residues, std::size_t motif_pos, std::size_t motif_len,
                          std::size_t class_index, Rng& rng) {
  pssm::Pssm p;
  p.residues = residues;
  std::copy(seqio::kAminoAcids.begin(), seqio::kAminoAcids.end(), p.column_order.begin());
  p.scores = Matrix(residues.size(), 20);
  const int favoured = static_cast<int>((class_index * 3) % pssm::kNumGroups);
  const int disfavoured = static_cast<int>((class_index * 3 + 5) % pssm::kNumGroups);
  for (std::size_t i = 0; i < residues.size(); ++i) {
    const bool motif_row = i >= motif_pos && i < motif_pos + motif_len;
    for (std::size_t c = 0; c < 20; ++c) {
      const char col = p.column_order[c];
      double v = kScoreSpread * rng.normal();
      if (col == residues[i]) v += kSelfScore;
      if (motif_row) {
        const int g = pssm::group_of(col);
        if (g == favoured) v += kMotifBias;
        if (g == disfavoured) v -= kMotifBias;
      }
      p.scores(i, c) = std::clamp(std::round(v), -kScoreClip, kScoreClip) + 0.0;  // no negative zero
    }
  }
  return p;
}

}  // namespace

std::vector<MotifSpec> default_specs() {
  return {
      {"avian", "WCHWM", 46, 50, {}, 0},
      {"human", "YCPKW", 46, 50, {}, 0},
      {"swine", "MWQCF", 46, 50, {}, 0},
  };
}

SyntheticSet generate(const std::vector<MotifSpec>& specs, std::size_t per_class, std::uint64_t seed) {
  check_specs(specs);
  SyntheticSet out;
  std::vector<seqio::SequenceRecord> records;
  std::unordered_set<std::string> seen;

  for (std::size_t c = 0; c < specs.size(); ++c) {
    const auto& spec = specs[c];
    Rng rng(mix_seed(seed, mix_seed(spec.seed, c)));
    std::vector<double> cumulative;
    if (!spec.background.empty()) {
      double acc = 0.0;
      for (double w : spec.background) cumulative.push_back(acc += w);
    }
    for (std::size_t k = 0; k < per_class; ++k) {
      std::string residues;
      std::size_t pos = 0;
      for (std::size_t attempt = 0;; ++attempt) {
        if (attempt == 10000) {
          throw Error(ErrorKind::invalid_spec, "cannot place motif '" + spec.motif + "' uniquely");
        }
        const std::size_t len = spec.min_length + rng.below(spec.max_length - spec.min_length + 1);
        residues.resize(len);
        for (char& r : residues) r = sample_residue(cumulative, rng);
        pos = rng.below(len - spec.motif.size() + 1);
        residues.replace(pos, spec.motif.size(), spec.motif);
        bool ok = count_occurrences(residues, spec.motif) == 1 && !seen.contains(residues);
        for (const auto& other : specs) {
          if (&other != &spec && residues.find(other.motif) != std::string::npos) ok = false;
        }
        if (ok) break;
      }
      seen.insert(residues);
      records.push_back({"syn_" + spec.label + "_" + std::to_string(k), spec.label, residues});
      out.motif_positions.push_back(pos);
      out.raw_pssms.push_back(synthetic_pssm(residues, pos, spec.motif.size(), c, rng));
      out.grouped.push_back(pssm::group_columns(pssm::sigmoid_normalize(out.raw_pssms.back())));
    }
  }
  out.dataset = seqio::make_dataset(std::move(records));
  return out;
}

}  // namespace hostpred::synth
