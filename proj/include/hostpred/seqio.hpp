#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hostpred::seqio {

// The 20 standard amino acids, in PSI-BLAST column order.
inline constexpr std::string_view kAminoAcids = "ARNDCQEGHILKMFPSTWYV";

bool is_amino_acid(char c) noexcept;

struct FastaEntry {
  std::string id;
  std::string host;
  std::string residues;

  bool operator==(const FastaEntry&) const = default;
};

// Which '|'-separated header field carries the host label. Negative indices
// count from the end, so the default -1 is the last field. The id is always
// field 0, cut at the first whitespace.
struct HeaderFormat {
  char delimiter = '|';
  int host_field = -1;
};

// Throws Error{malformed_header} for text before the first '>' and
// Error{empty_sequence} for a header with no residues.
std::vector<FastaEntry> parse_fasta(std::string_view text, const HeaderFormat& format = {});

std::vector<FastaEntry> read_fasta_file(const std::filesystem::path& path,
                                        const HeaderFormat& format = {});

// Writes ">id|host" headers with residues wrapped at `width` columns.
std::string format_fasta(const std::vector<FastaEntry>& entries, std::size_t width = 60);

enum class RejectReason { empty, invalid_residue };

struct Rejection {
  RejectReason reason;
  char residue = '\0';
  std::size_t index = 0;

  bool operator==(const Rejection&) const = default;
};

// std::nullopt means accepted.
std::optional<Rejection> validate_sequence(std::string_view residues);

struct SequenceRecord {
  std::string id;
  std::string host;
  std::string residues;

  bool operator==(const SequenceRecord&) const = default;
};

struct Dataset {
  std::vector<SequenceRecord> records;
  std::vector<std::string> classes;  // sorted, distinct

  std::size_t size() const noexcept { return records.size(); }
  // Index of `host` in classes; throws Error{unknown_label} if absent.
  std::size_t class_index(std::string_view host) const;
  std::vector<std::size_t> label_indices() const;
};

struct DedupStats {
  std::size_t duplicates = 0;   // same residues, same host, not first
  std::size_t cross_host = 0;   // records dropped by the single-host rule
  std::size_t duplicate_ids = 0;
};

// First occurrence of each residue string wins. Residue strings seen under
// more than one host are dropped entirely. A record whose id was already kept
// is dropped too.
Dataset deduplicate(const std::vector<SequenceRecord>& records, DedupStats* stats = nullptr);

// Builds the class list from the records without any filtering.
Dataset make_dataset(std::vector<SequenceRecord> records);

struct CurationStats {
  std::size_t parsed = 0;
  std::size_t invalid = 0;
  std::size_t unlabeled = 0;
  DedupStats dedup;

  std::size_t kept = 0;
  std::size_t dropped() const noexcept { return parsed - kept; }
};

// parse -> validate -> deduplicate.
Dataset curate(const std::vector<FastaEntry>& entries, CurationStats* stats = nullptr);

// Tab-separated "id, host, residues", one record per line, no header row.
std::string format_tsv(const Dataset& dataset);
Dataset parse_tsv(std::string_view text);
void write_tsv(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_tsv(const std::filesystem::path& path);

}  // namespace hostpred::seqio
