#pragma once

#include <array>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "srl/util.hpp"

namespace srl {

struct TripletRecord {
  std::string sentence_id;
  std::size_t predicate = 0;
  std::size_t argument = 0;
  std::string role;

  auto key() const { return std::tie(sentence_id, predicate, argument, role); }
  bool operator<(const TripletRecord& o) const { return key() < o.key(); }
};

struct PRF {
  std::size_t gold = 0, predicted = 0, correct = 0;

  double precision() const {
    return predicted == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / predicted;
  }
  double recall() const { return gold == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / gold; }
  double f1() const {
    double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

constexpr std::size_t kDistanceBuckets = 6;  // 0, 1, 2, 3, 4, >=5

inline std::size_t distance_bucket(std::size_t predicate, std::size_t argument) {
  std::size_t d = predicate > argument ? predicate - argument : argument - predicate;
  return d >= 5 ? 5 : d;
}

inline const char* distance_bucket_name(std::size_t b) {
  static const char* names[kDistanceBuckets] = {"0", "1", "2", "3", "4", ">=5"};
  return names[b];
}

struct MetricsReport {
  PRF micro;
  std::map<std::string, PRF> per_label;
  std::array<PRF, kDistanceBuckets> by_distance;
  std::size_t oracle_misses = 0;
};

// A predicted triplet is correct iff predicate index, argument index and
// label all match a gold triplet of the same sentence.
inline MetricsReport score_triplets(const std::set<TripletRecord>& gold,
                                    const std::set<TripletRecord>& predicted) {
  MetricsReport rep;
  for (const auto& g : gold) {
    ++rep.micro.gold;
    ++rep.per_label[g.role].gold;
    ++rep.by_distance[distance_bucket(g.predicate, g.argument)].gold;
  }
  for (const auto& p : predicted) {
    ++rep.micro.predicted;
    ++rep.per_label[p.role].predicted;
    ++rep.by_distance[distance_bucket(p.predicate, p.argument)].predicted;
    if (gold.count(p)) {
      ++rep.micro.correct;
      ++rep.per_label[p.role].correct;
      ++rep.by_distance[distance_bucket(p.predicate, p.argument)].correct;
    }
  }
  return rep;
}

// Percentages are reported to one decimal place.
inline std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

inline void write_report(const MetricsReport& rep, const std::string& source,
                         const std::string& target, const std::string& mode, std::ostream& out) {
  out << "source\ttarget\tmode\tP\tR\tF1\n";
  out << source << '\t' << target << '\t' << mode << '\t' << pct(rep.micro.precision()) << '\t'
      << pct(rep.micro.recall()) << '\t' << pct(rep.micro.f1()) << "\n";
  out << "\n#per-label\nlabel\tgold\tpredicted\tcorrect\tP\tR\tF1\n";
  for (const auto& [label, prf] : rep.per_label)
    out << label << '\t' << prf.gold << '\t' << prf.predicted << '\t' << prf.correct << '\t'
        << pct(prf.precision()) << '\t' << pct(prf.recall()) << '\t' << pct(prf.f1()) << "\n";
  out << "\n#distance\nbucket\tgold\tpredicted\tcorrect\tF1\n";
  for (std::size_t b = 0; b < kDistanceBuckets; ++b) {
    const auto& prf = rep.by_distance[b];
    out << distance_bucket_name(b) << '\t' << prf.gold << '\t' << prf.predicted << '\t'
        << prf.correct << '\t' << pct(prf.f1()) << "\n";
  }
  out << "\n#oracle\nmisses\t" << rep.oracle_misses << "\n";
}

// ---------------------------------------------------------------------------
// Source x target grid of summary rows (diagonal absent).

struct TransferCell {
  std::string source, target, mode;
  double precision = 0, recall = 0, f1 = 0;
};

struct TransferMatrix {
  std::vector<TransferCell> cells;

  void serialize(std::ostream& out) const {
    out << "source\ttarget\tmode\tP\tR\tF1\n";
    for (const auto& c : cells)
      out << c.source << '\t' << c.target << '\t' << c.mode << '\t' << pct(c.precision) << '\t'
          << pct(c.recall) << '\t' << pct(c.f1) << "\n";
  }

  std::string serialize() const {
    std::ostringstream os;
    serialize(os);
    return os.str();
  }

  static TransferMatrix parse(std::istream& in) {
    TransferMatrix m;
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "transfer matrix: empty stream");
    require(trim(line) == "source\ttarget\tmode\tP\tR\tF1", "transfer matrix: bad header \"", line,
            "\"");
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      auto cols = split(line, '\t');
      require(cols.size() == 6, "transfer matrix: expected 6 columns, got ", cols.size());
      TransferCell c;
      c.source = cols[0];
      c.target = cols[1];
      c.mode = cols[2];
      c.precision = std::stod(cols[3]);
      c.recall = std::stod(cols[4]);
      c.f1 = std::stod(cols[5]);
      m.cells.push_back(std::move(c));
    }
    return m;
  }

  static TransferMatrix parse(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }
};

}  // namespace srl
