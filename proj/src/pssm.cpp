#include "hostpred/pssm.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>

#include "hostpred/error.hpp"
#include "hostpred/seqio.hpp"
#include "io_util.hpp"

namespace hostpred::pssm {

int group_of(char residue) noexcept {
  for (std::size_t g = 0; g < kNumGroups; ++g) {
    if (kResidueGroups[g].find(residue) != std::string_view::npos) return static_cast<int>(g);
  }
  return -1;
}

std::string_view to_string(Scheme scheme) noexcept {
  switch (scheme) {
    case Scheme::eg: return "eg";
    case Scheme::gdpc: return "gdpc";
    case Scheme::er: return "er";
  }
  return "?";
}

namespace {

bool is_label_line(const std::vector<std::string_view>& tokens) {
  if (tokens.size() < 20) return false;
  for (auto t : tokens) {
    if (t.size() != 1 || !std::isalpha(static_cast<unsigned char>(t[0]))) return false;
  }
  return true;
}

bool is_position_line(const std::vector<std::string_view>& tokens) {
  std::size_t index = 0;
  return !tokens.empty() && detail::parse_size(tokens[0], index);
}

}  // namespace

Pssm parse_pssm(std::string_view text) {
  Pssm out;
  bool have_labels = false;
  std::vector<double> values;
  std::size_t rows = 0;
  bool in_body = false;

  for (std::string_view line : detail::split_lines(text)) {
    auto tokens = detail::split_whitespace(line);
    if (!have_labels) {
      if (is_label_line(tokens)) {
        for (std::size_t c = 0; c < 20; ++c) {
          out.column_order[c] = static_cast<char>(std::toupper(static_cast<unsigned char>(tokens[c][0])));
        }
        have_labels = true;
      }
      continue;
    }
    if (tokens.empty()) {
      if (in_body) break;  // blank line ends the matrix
      continue;
    }
    if (!is_position_line(tokens)) {
      if (in_body) break;  // footer
      continue;
    }
    in_body = true;
    const std::size_t position = rows + 1;
    // index, residue, 20 log-odds, then optionally 20 percentages + 2 reals.
    if (tokens.size() != 22 && tokens.size() != 44) {
      throw Error(ErrorKind::malformed_row,
                  "PSSM position " + std::to_string(position) + ": expected 44 columns, found " +
                      std::to_string(tokens.size()));
    }
    if (tokens[1].size() != 1) {
      throw Error(ErrorKind::malformed_row,
                  "PSSM position " + std::to_string(position) + ": bad residue column");
    }
    out.residues.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(tokens[1][0]))));
    for (std::size_t c = 0; c < 20; ++c) {
      double v = 0.0;
      if (!detail::parse_double(tokens[2 + c], v) || !std::isfinite(v)) {
        throw Error(ErrorKind::non_numeric_score, "PSSM position " + std::to_string(position) +
                                                      ": non-numeric score '" +
                                                      std::string(tokens[2 + c]) + "'");
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (!have_labels) {
    throw Error(ErrorKind::missing_column_labels, "PSSM has no residue column-label line");
  }
  if (rows == 0) throw Error(ErrorKind::empty_matrix, "PSSM has no position rows");

  out.scores = Matrix(rows, 20);
  std::copy(values.begin(), values.end(), out.scores.data().begin());
  return out;
}

Pssm read_pssm_file(const std::filesystem::path& path) {
  return parse_pssm(detail::read_file(path));
}

std::string format_pssm(const Pssm& pssm) {
  std::string out =
      "\nLast position-specific scoring matrix computed, weighted observed percentages rounded "
      "down, information per position, and relative weight of gapless real matches to "
      "pseudocounts\n           ";
  for (int copy = 0; copy < 2; ++copy) {
    for (char c : pssm.column_order) {
      out += "   ";
      out += c;
    }
  }
  out += '\n';
  char buf[64];
  for (std::size_t i = 0; i < pssm.scores.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%5zu %c  ", i + 1, pssm.residues[i]);
    out += buf;
    for (std::size_t c = 0; c < 20; ++c) {
      std::snprintf(buf, sizeof buf, " %3.0f", pssm.scores(i, c));
      out += buf;
    }
    out += ' ';
    for (std::size_t c = 0; c < 20; ++c) out += "   0";
    out += "  0.00 0.00\n";
  }
  out +=
      "\n                      K         Lambda\n"
      "Standard Ungapped    0.1360     0.3176\n"
      "Standard Gapped      0.0410     0.2670\n"
      "PSI Ungapped         0.1398     0.3177\n"
      "PSI Gapped           0.0410     0.2670\n";
  return out;
}

Pssm sigmoid_normalize(const Pssm& m) {
  Pssm out = m;
  for (double& v : out.scores.data()) v = 1.0 / (1.0 + std::exp(-v));
  return out;
}

GroupedPssm group_columns(const Pssm& m) {
  std::array<int, 20> column_group{};
  std::array<double, kNumGroups> group_size{};
  for (std::size_t c = 0; c < 20; ++c) {
    column_group[c] = group_of(m.column_order[c]);
    if (column_group[c] >= 0) group_size[static_cast<std::size_t>(column_group[c])] += 1.0;
  }
  for (std::size_t g = 0; g < kNumGroups; ++g) {
    if (group_size[g] == 0.0) {
      throw Error(ErrorKind::missing_column_labels,
                  "PSSM columns do not cover residue group G" + std::to_string(g + 1));
    }
  }

  GroupedPssm out;
  out.residues = m.residues;
  out.scores = Matrix(m.scores.rows(), kNumGroups);
  for (std::size_t i = 0; i < m.scores.rows(); ++i) {
    for (std::size_t c = 0; c < 20; ++c) {
      if (column_group[c] >= 0) out.scores(i, static_cast<std::size_t>(column_group[c])) += m.scores(i, c);
    }
    for (std::size_t g = 0; g < kNumGroups; ++g) out.scores(i, g) /= group_size[g];
  }
  return out;
}

namespace {

void require_length(const GroupedPssm& g, std::size_t min_len, Scheme scheme) {
  if (g.scores.rows() < min_len) {
    throw Error(ErrorKind::sequence_too_short,
                std::string(to_string(scheme)) + " encoding needs L >= " + std::to_string(min_len) +
                    ", got L = " + std::to_string(g.scores.rows()));
  }
}

}  // namespace

FeatureVector eg_pssm(const GroupedPssm& g) {
  require_length(g, 1, Scheme::eg);
  FeatureVector out{Scheme::eg, std::vector<double>(100, 0.0)};
  for (std::size_t k = 0; k < g.scores.rows(); ++k) {
    const int row_group = k < g.residues.size() ? group_of(g.residues[k]) : -1;
    if (row_group < 0) continue;
    const auto gi = static_cast<std::size_t>(row_group);
    for (std::size_t j = 0; j < kNumGroups; ++j) out.values[gi * kNumGroups + j] += g.scores(k, j);
  }
  for (std::size_t gi = 0; gi < kNumGroups; ++gi) {
    const auto size = static_cast<double>(kResidueGroups[gi].size());
    for (std::size_t j = 0; j < kNumGroups; ++j) out.values[gi * kNumGroups + j] /= size;
  }
  return out;
}

FeatureVector gdpc_pssm(const GroupedPssm& g) {
  require_length(g, 2, Scheme::gdpc);
  const std::size_t L = g.scores.rows();
  FeatureVector out{Scheme::gdpc, std::vector<double>(100, 0.0)};
  for (std::size_t k = 0; k + 1 < L; ++k) {
    auto cur = g.scores.row(k);
    auto next = g.scores.row(k + 1);
    for (std::size_t i = 0; i < kNumGroups; ++i) {
      for (std::size_t j = 0; j < kNumGroups; ++j) out.values[i * kNumGroups + j] += cur[i] * next[j];
    }
  }
  const double scale = 1.0 / static_cast<double>(L - 1);
  for (double& v : out.values) v *= scale;
  return out;
}

FeatureVector er_pssm(const GroupedPssm& g) {
  require_length(g, 10, Scheme::er);
  const std::size_t L = g.scores.rows();
  FeatureVector out{Scheme::er, std::vector<double>(910, 0.0)};
  for (std::size_t t = 1; t <= 9; ++t) {
    double* block = out.values.data() + (t - 1) * 100;
    for (std::size_t k = 0; k + t < L; ++k) {
      auto a = g.scores.row(k);
      auto b = g.scores.row(k + t);
      for (std::size_t i = 0; i < kNumGroups; ++i) {
        for (std::size_t j = 0; j < kNumGroups; ++j) {
          const double d = a[i] - b[j];
          block[i * kNumGroups + j] += d * d / 2.0;
        }
      }
    }
    const double scale = 1.0 / static_cast<double>(L - t);
    for (std::size_t e = 0; e < 100; ++e) block[e] *= scale;
  }
  for (std::size_t i = 0; i < kNumGroups; ++i) {
    double mean = 0.0;
    for (std::size_t k = 0; k < L; ++k) mean += g.scores(k, i);
    mean /= static_cast<double>(L);
    double var = 0.0;
    for (std::size_t k = 0; k < L; ++k) {
      const double d = g.scores(k, i) - mean;
      var += d * d;
    }
    out.values[900 + i] = var / static_cast<double>(L);
  }
  return out;
}

FeatureVector encode(const GroupedPssm& g, Scheme scheme) {
  switch (scheme) {
    case Scheme::eg: return eg_pssm(g);
    case Scheme::gdpc: return gdpc_pssm(g);
    case Scheme::er: return er_pssm(g);
  }
  throw Error(ErrorKind::invalid_argument, "unknown PSSM scheme");
}

FeatureVector features_from_pssm(const Pssm& raw, Scheme scheme) {
  return encode(group_columns(sigmoid_normalize(raw)), scheme);
}

}  // namespace hostpred::pssm
