#include "hostpred/seqio.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "hostpred/error.hpp"
#include "io_util.hpp"

namespace hostpred::seqio {

bool is_amino_acid(char c) noexcept { return kAminoAcids.find(c) != std::string_view::npos; }

namespace {

FastaEntry parse_header(std::string_view header, const HeaderFormat& format, std::size_t line_no) {
  header = detail::trim(header.substr(1));
  if (header.empty()) {
    throw Error(ErrorKind::malformed_header,
                "empty FASTA header at line " + std::to_string(line_no));
  }
  FastaEntry entry;
  auto fields = detail::split(header, format.delimiter);
  auto id_field = detail::split_whitespace(fields.front());
  if (id_field.empty()) {
    throw Error(ErrorKind::malformed_header,
                "FASTA header without id at line " + std::to_string(line_no));
  }
  entry.id = std::string(id_field.front());
  if (fields.size() > 1) {
    const int count = static_cast<int>(fields.size());
    const int index = format.host_field < 0 ? count + format.host_field : format.host_field;
    if (index > 0 && index < count) entry.host = std::string(detail::trim(fields[index]));
  }
  return entry;
}

}  // namespace

std::vector<FastaEntry> parse_fasta(std::string_view text, const HeaderFormat& format) {
  std::vector<FastaEntry> entries;
  std::size_t line_no = 0;
  std::size_t header_line = 0;
  auto close_entry = [&] {
    if (!entries.empty() && entries.back().residues.empty()) {
      throw Error(ErrorKind::empty_sequence, "record '" + entries.back().id + "' at line " +
                                                 std::to_string(header_line) +
                                                 " has no sequence");
    }
  };
  for (std::string_view line : detail::split_lines(text)) {
    ++line_no;
    std::string_view body = detail::trim(line);
    if (body.empty()) continue;
    if (body.front() == '>') {
      close_entry();
      entries.push_back(parse_header(body, format, line_no));
      header_line = line_no;
      continue;
    }
    if (entries.empty()) {
      throw Error(ErrorKind::malformed_header,
                  "sequence data before the first '>' header at line " + std::to_string(line_no));
    }
    std::string& residues = entries.back().residues;
    for (char c : body) {
      if (std::isspace(static_cast<unsigned char>(c))) continue;
      residues.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
  }
  close_entry();
  return entries;
}

std::vector<FastaEntry> read_fasta_file(const std::filesystem::path& path,
                                        const HeaderFormat& format) {
  return parse_fasta(detail::read_file(path), format);
}

std::string format_fasta(const std::vector<FastaEntry>& entries, std::size_t width) {
  if (width == 0) width = 60;
  std::string out;
  for (const auto& e : entries) {
    out += '>';
    out += e.id;
    if (!e.host.empty()) {
      out += '|';
      out += e.host;
    }
    out += '\n';
    for (std::size_t i = 0; i < e.residues.size(); i += width) {
      out.append(e.residues, i, width);
      out += '\n';
    }
  }
  return out;
}

std::optional<Rejection> validate_sequence(std::string_view residues) {
  if (residues.empty()) return Rejection{RejectReason::empty};
  for (std::size_t i = 0; i < residues.size(); ++i) {
    if (!is_amino_acid(residues[i])) return Rejection{RejectReason::invalid_residue, residues[i], i};
  }
  return std::nullopt;
}

std::size_t Dataset::class_index(std::string_view host) const {
  auto it = std::lower_bound(classes.begin(), classes.end(), host);
  if (it == classes.end() || *it != host) {
    throw Error(ErrorKind::unknown_label, "unknown class label '" + std::string(host) + "'");
  }
  return static_cast<std::size_t>(it - classes.begin());
}

std::vector<std::size_t> Dataset::label_indices() const {
  std::vector<std::size_t> labels;
  labels.reserve(records.size());
  for (const auto& r : records) labels.push_back(class_index(r.host));
  return labels;
}

Dataset make_dataset(std::vector<SequenceRecord> records) {
  Dataset ds;
  std::set<std::string> classes;
  for (const auto& r : records) classes.insert(r.host);
  ds.records = std::move(records);
  ds.classes.assign(classes.begin(), classes.end());
  return ds;
}

Dataset deduplicate(const std::vector<SequenceRecord>& records, DedupStats* stats) {
  // Hosts seen per residue string, over the whole input.
  std::unordered_map<std::string_view, std::string_view> host_of;
  std::unordered_set<std::string_view> multi_host;
  for (const auto& r : records) {
    auto [it, inserted] = host_of.emplace(r.residues, r.host);
    if (!inserted && it->second != r.host) multi_host.insert(r.residues);
  }

  DedupStats local;
  std::vector<SequenceRecord> kept;
  std::unordered_set<std::string_view> seen_residues;
  std::unordered_set<std::string_view> seen_ids;
  for (const auto& r : records) {
    if (multi_host.contains(r.residues)) {
      ++local.cross_host;
      continue;
    }
    if (seen_residues.contains(r.residues)) {
      ++local.duplicates;
      continue;
    }
    if (seen_ids.contains(r.id)) {
      ++local.duplicate_ids;
      continue;
    }
    seen_residues.insert(r.residues);
    seen_ids.insert(r.id);
    kept.push_back(r);
  }
  if (stats) *stats = local;
  return make_dataset(std::move(kept));
}

Dataset curate(const std::vector<FastaEntry>& entries, CurationStats* stats) {
  CurationStats local;
  local.parsed = entries.size();
  std::vector<SequenceRecord> valid;
  for (const auto& e : entries) {
    if (validate_sequence(e.residues)) {
      ++local.invalid;
      continue;
    }
    if (e.host.empty()) {
      ++local.unlabeled;
      continue;
    }
    valid.push_back({e.id, e.host, e.residues});
  }
  Dataset ds = deduplicate(valid, &local.dedup);
  local.kept = ds.size();
  if (stats) *stats = local;
  return ds;
}

namespace {

void check_field(std::string_view value, std::string_view what) {
  if (value.find_first_of("\t\n\r") != std::string_view::npos) {
    throw Error(ErrorKind::invalid_argument,
                std::string(what) + " contains a tab or newline: '" + std::string(value) + "'");
  }
}

}  // namespace

std::string format_tsv(const Dataset& dataset) {
  std::string out;
  for (const auto& r : dataset.records) {
    check_field(r.id, "id");
    check_field(r.host, "host");
    out += r.id;
    out += '\t';
    out += r.host;
    out += '\t';
    out += r.residues;
    out += '\n';
  }
  return out;
}

Dataset parse_tsv(std::string_view text) {
  std::vector<SequenceRecord> records;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 0;
  for (std::string_view line : detail::split_lines(text)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split(line, '\t');
    if (fields.size() != 3) {
      throw Error(ErrorKind::malformed_dataset,
                  "dataset line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
    }
    SequenceRecord r{std::string(fields[0]), std::string(fields[1]), std::string(fields[2])};
    if (r.id.empty() || r.host.empty()) {
      throw Error(ErrorKind::malformed_dataset,
                  "dataset line " + std::to_string(line_no) + ": empty id or host");
    }
    if (auto bad = validate_sequence(r.residues)) {
      throw Error(ErrorKind::malformed_dataset,
                  "dataset line " + std::to_string(line_no) + ": invalid residues");
    }
    if (!ids.insert(r.id).second) {
      throw Error(ErrorKind::malformed_dataset, "duplicate id '" + r.id + "'");
    }
    records.push_back(std::move(r));
  }
  return make_dataset(std::move(records));
}

void write_tsv(const Dataset& dataset, const std::filesystem::path& path) {
  detail::write_file(path, format_tsv(dataset));
}

Dataset read_tsv(const std::filesystem::path& path) { return parse_tsv(detail::read_file(path)); }

}  // namespace hostpred::seqio
