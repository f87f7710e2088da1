#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "hostpred/error.hpp"
#include "hostpred/random.hpp"
#include "hostpred/seqio.hpp"
#include "test_util.hpp"

using namespace hostpred;
using namespace hostpred::seqio;

TEST_CASE("parse_fasta concatenates wrapped lines and takes the host from the last field") {
  const auto e = parse_fasta(">s1|human\nMKV\nLAA\n");
  REQUIRE(e.size() == 1);
  CHECK(e[0] == FastaEntry{"s1", "human", "MKVLAA"});
}

TEST_CASE("parse_fasta splits records") {
  const auto e = parse_fasta(">a\nMK\n>b\nVL\n");
  REQUIRE(e.size() == 2);
  CHECK(e[0].residues == "MK");
  CHECK(e[1].residues == "VL");
}

TEST_CASE("parse_fasta upper-cases residues and strips CR and inner spaces") {
  const auto e = parse_fasta(">x|strain|avian\r\nmk v\r\nla\r\n");
  REQUIRE(e.size() == 1);
  CHECK(e[0].id == "x");
  CHECK(e[0].host == "avian");
  CHECK(e[0].residues == "MKVLA");
}

TEST_CASE("parse_fasta errors") {
  CHECK(test_util::kind_of([] { parse_fasta("MKV\n"); }) == ErrorKind::malformed_header);
  CHECK(test_util::kind_of([] { parse_fasta(">a|human\n>b|human\nMK\n"); }) == ErrorKind::empty_sequence);
  CHECK(test_util::kind_of([] { parse_fasta(">\nMK\n"); }) == ErrorKind::malformed_header);
  CHECK(parse_fasta("").empty());
}

TEST_CASE("header format selects the host field") {
  HeaderFormat f;
  f.host_field = 1;
  auto e = parse_fasta(">id1|swine|2009\nMK\n", f);
  CHECK(e[0].host == "swine");
  f.delimiter = '/';
  f.host_field = -2;
  e = parse_fasta(">A/duck/Alberta/1976\nMK\n", f);
  CHECK(e[0].host == "Alberta");
  CHECK(parse_fasta(">nohost\nMK\n")[0].host.empty());
}

TEST_CASE("validate_sequence") {
  CHECK_FALSE(validate_sequence("MKVLAA").has_value());
  const auto r = validate_sequence("MKXLAA");
  REQUIRE(r.has_value());
  CHECK(*r == Rejection{RejectReason::invalid_residue, 'X', 2});
  CHECK(validate_sequence("")->reason == RejectReason::empty);
  for (char c : std::string("XBZJUO-*")) {
    CHECK(validate_sequence(std::string("MK") + c).has_value());
  }
}

TEST_CASE("validate_sequence accepts exactly the 20 letters") {
  for (int c = 1; c < 128; ++c) {
    const std::string s(1, static_cast<char>(c));
    const bool expected = kAminoAcids.find(static_cast<char>(c)) != std::string_view::npos;
    CHECK(!validate_sequence(s).has_value() == expected);
  }
}

TEST_CASE("deduplicate examples") {
  auto ds = deduplicate({{"a", "human", "MKV"}, {"b", "human", "MKV"}});
  REQUIRE(ds.size() == 1);
  CHECK(ds.records[0].id == "a");

  DedupStats stats;
  ds = deduplicate({{"a", "human", "MKV"}, {"b", "avian", "MKV"}}, &stats);
  CHECK(ds.size() == 0);
  CHECK(stats.cross_host == 2);

  ds = deduplicate({{"a", "human", "MKV"}, {"b", "avian", "VLA"}});
  CHECK(ds.size() == 2);
  CHECK(ds.classes == std::vector<std::string>{"avian", "human"});
}

TEST_CASE("deduplicate drops a repeated id, first wins") {
  DedupStats stats;
  const auto ds = deduplicate({{"a", "human", "MKV"}, {"a", "human", "VLA"}}, &stats);
  REQUIRE(ds.size() == 1);
  CHECK(ds.records[0].residues == "MKV");
  CHECK(stats.duplicate_ids == 1);
}

TEST_CASE("deduplicate output has distinct residues and preserves order") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SequenceRecord> in;
    for (int i = 0; i < 40; ++i) {
      std::string s;
      for (int k = 0; k < 2; ++k) s += "ACD"[rng.below(3)];
      in.push_back({"id" + std::to_string(i), rng.below(2) ? "human" : "avian", s});
    }
    const auto ds = deduplicate(in);
    std::set<std::string> seen;
    std::size_t last = 0;
    for (const auto& r : ds.records) {
      CHECK(seen.insert(r.residues).second);
      const auto pos = static_cast<std::size_t>(
          std::find_if(in.begin(), in.end(), [&](const auto& x) { return x.id == r.id; }) - in.begin());
      CHECK(pos >= last);
      last = pos;
    }
  }
}

TEST_CASE("curate counts") {
  const auto entries = parse_fasta(
      ">a|human\nMKV\n>b|human\nMKX\n>c|human\nMKV\n>d|avian\nVLA\n>e\nCCC\n");
  CurationStats stats;
  const auto ds = curate(entries, &stats);
  CHECK(ds.size() == 2);
  CHECK(stats.parsed == 5);
  CHECK(stats.invalid == 1);
  CHECK(stats.unlabeled == 1);
  CHECK(stats.dedup.duplicates == 1);
  CHECK(stats.kept == 2);
  CHECK(stats.dropped() == 3);
}

TEST_CASE("fasta round trip") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<FastaEntry> entries;
    for (int i = 0; i < 5; ++i) {
      std::string s;
      const auto len = 1 + rng.below(150);
      for (std::size_t k = 0; k < len; ++k) s += kAminoAcids[rng.below(20)];
      entries.push_back({"r" + std::to_string(i), i % 2 ? "human" : "swine", s});
    }
    CHECK(parse_fasta(format_fasta(entries)) == entries);
  }
}

TEST_CASE("tsv round trip and errors") {
  const auto ds = make_dataset({{"a", "human", "MKV"}, {"b", "avian", "VLA"}});
  const auto back = parse_tsv(format_tsv(ds));
  CHECK(back.records == ds.records);
  CHECK(back.classes == ds.classes);
  CHECK(test_util::kind_of([] { parse_tsv("a\thuman\n"); }) == ErrorKind::malformed_dataset);
  CHECK(test_util::kind_of([] { parse_tsv("a\thuman\tMKV\na\thuman\tVLA\n"); }) ==
        ErrorKind::malformed_dataset);

  const auto dir = test_util::temp_dir("seqio");
  write_tsv(ds, dir / "d.tsv");
  CHECK(read_tsv(dir / "d.tsv").records == ds.records);
  CHECK(test_util::kind_of([&] { read_tsv(dir / "missing.tsv"); }) == ErrorKind::io_failure);
}

TEST_CASE("dataset label lookup") {
  const auto ds = make_dataset({{"a", "human", "MKV"}, {"b", "avian", "VLA"}});
  CHECK(ds.label_indices() == std::vector<std::size_t>{1, 0});
  CHECK(test_util::kind_of([&] { (void)ds.class_index("swine"); }) == ErrorKind::unknown_label);
}
