#pragma once

// DP string alignment, correctness scoring, confusion extraction and fold
// aggregation.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "visunit/cluster.hpp"
#include "visunit/error.hpp"
#include "visunit/text.hpp"

namespace visunit {

struct AlignCosts {
  int substitution = 10;
  int insertion = 7;
  int deletion = 7;
};

enum class EditOp { match, substitution, deletion, insertion };

struct AlignedPair {
  EditOp op = EditOp::match;
  std::string ref;  // empty for insertions
  std::string hyp;  // empty for deletions
  friend bool operator==(const AlignedPair&, const AlignedPair&) = default;
};

struct AlignmentResult {
  std::size_t n = 0;  // reference length
  std::size_t d = 0;
  std::size_t s = 0;
  std::size_t i = 0;
  int cost = 0;
  std::vector<AlignedPair> pairs;

  std::size_t hits() const { return n - d - s; }
  double correctness() const {
    if (n == 0) throw ConfigError("correctness is undefined with no reference tokens");
    return static_cast<double>(n - d - s) / static_cast<double>(n);
  }
  double accuracy() const {
    if (n == 0) throw ConfigError("accuracy is undefined with no reference tokens");
    return (static_cast<double>(n) - static_cast<double>(d + s + i)) / static_cast<double>(n);
  }
};

// Minimum-cost alignment. Among equal-cost alignments the backtrace prefers,
// at each step from the end, match > substitution > deletion > insertion.
inline AlignmentResult align(const std::vector<std::string>& ref, const std::vector<std::string>& hyp,
                             const AlignCosts& costs = {}) {
  const std::size_t R = ref.size(), H = hyp.size();
  std::vector<int> c((R + 1) * (H + 1), 0);
  auto at = [&](std::size_t i, std::size_t j) -> int& { return c[i * (H + 1) + j]; };
  for (std::size_t i = 1; i <= R; ++i) at(i, 0) = at(i - 1, 0) + costs.deletion;
  for (std::size_t j = 1; j <= H; ++j) at(0, j) = at(0, j - 1) + costs.insertion;
  for (std::size_t i = 1; i <= R; ++i) {
    for (std::size_t j = 1; j <= H; ++j) {
      const int diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : costs.substitution);
      at(i, j) = std::min({diag, at(i - 1, j) + costs.deletion, at(i, j - 1) + costs.insertion});
    }
  }
  AlignmentResult out;
  out.n = R;
  out.cost = at(R, H);
  std::size_t i = R, j = H;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : costs.substitution)) {
        out.pairs.push_back({same ? EditOp::match : EditOp::substitution, ref[i - 1], hyp[j - 1]});
        if (!same) ++out.s;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + costs.deletion) {
      out.pairs.push_back({EditOp::deletion, ref[i - 1], ""});
      ++out.d;
      --i;
      continue;
    }
    out.pairs.push_back({EditOp::insertion, "", hyp[j - 1]});
    ++out.i;
    --j;
  }
  std::reverse(out.pairs.begin(), out.pairs.end());
  return out;
}

struct Counts {
  std::size_t n = 0, d = 0, s = 0, i = 0;

  void add(const AlignmentResult& a) {
    n += a.n;
    d += a.d;
    s += a.s;
    i += a.i;
  }
  double correctness() const {
    if (n == 0) throw ConfigError("correctness is undefined with no reference tokens");
    return static_cast<double>(n - d - s) / static_cast<double>(n);
  }
  double accuracy() const {
    if (n == 0) throw ConfigError("accuracy is undefined with no reference tokens");
    return (static_cast<double>(n) - static_cast<double>(d + s + i)) / static_cast<double>(n);
  }
};

struct FoldResult {
  std::size_t fold = 0;
  std::vector<AlignmentResult> alignments;

  Counts counts() const {
    Counts c;
    for (const auto& a : alignments) c.add(a);
    return c;
  }
  double correctness() const { return counts().correctness(); }
};

struct PooledCorrectness {
  double mean = 0.0;
  double se = 0.0;
  bool se_defined = true;  // false with a single fold (se reported as 0)
};

// Mean of per-fold C and its standard error (sample std / sqrt(folds)).
inline PooledCorrectness pooled_correctness(const std::vector<double>& fold_c) {
  if (fold_c.empty()) throw ConfigError("pooled correctness needs at least one fold");
  PooledCorrectness out;
  double sum = 0.0;
  for (double c : fold_c) sum += c;
  const double n = static_cast<double>(fold_c.size());
  out.mean = sum / n;
  if (fold_c.size() == 1) {
    out.se_defined = false;
    return out;
  }
  double ss = 0.0;
  for (double c : fold_c) ss += (c - out.mean) * (c - out.mean);
  out.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return out;
}

inline PooledCorrectness pooled_correctness(const std::vector<FoldResult>& folds) {
  std::vector<double> cs;
  for (const auto& f : folds) cs.push_back(f.correctness());
  return pooled_correctness(cs);
}

struct ConfusionCounts {
  ConfusionMatrix k;
  std::map<std::string, std::int64_t> deletions;   // per reference label
  std::map<std::string, std::int64_t> insertions;  // per hypothesis label
};

// Matches and substitutions go into K[actual][predicted]; deletions and
// insertions are tallied separately.
inline ConfusionCounts confusions_from_alignments(const std::vector<AlignmentResult>& alignments,
                                                  const std::vector<std::string>& vocabulary) {
  ConfusionCounts out{ConfusionMatrix(vocabulary), {}, {}};
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < vocabulary.size(); ++i) index[vocabulary[i]] = i;
  auto idx = [&](const std::string& l) {
    auto it = index.find(l);
    if (it == index.end()) throw MappingError("label '" + l + "' is not in the confusion vocabulary");
    return it->second;
  };
  for (const auto& a : alignments) {
    for (const auto& p : a.pairs) {
      switch (p.op) {
        case EditOp::match:
        case EditOp::substitution:
          out.k.at(idx(p.ref), idx(p.hyp)) += 1;
          break;
        case EditOp::deletion:
          idx(p.ref);
          out.deletions[p.ref] += 1;
          break;
        case EditOp::insertion:
          idx(p.hyp);
          out.insertions[p.hyp] += 1;
          break;
      }
    }
  }
  return out;
}

// One row of the results CSV.
struct ResultRow {
  std::string speaker;
  std::size_t map_size = 0;
  std::string classifier_unit;
  std::string network_unit;
  std::size_t fold = 0;
  Counts counts;
  std::string training = "flat";  // flat | hierarchical
};

inline std::string results_csv_header() { return "speaker,map_size,classifier_unit,network_unit,fold,N,D,S,I,C,C_raw,accuracy,training\n"; }

// C is floored at 0 for reporting; C_raw keeps the unfloored value.
inline std::string results_csv_row(const ResultRow& r) {
  const double c = r.counts.n ? r.counts.correctness() : 0.0;
  const double acc = r.counts.n ? r.counts.accuracy() : 0.0;
  return r.speaker + "," + std::to_string(r.map_size) + "," + r.classifier_unit + "," + r.network_unit + "," +
         std::to_string(r.fold) + "," + std::to_string(r.counts.n) + "," + std::to_string(r.counts.d) + "," +
         std::to_string(r.counts.s) + "," + std::to_string(r.counts.i) + "," + text::format_double(std::max(0.0, c)) +
         "," + text::format_double(c) + "," + text::format_double(acc) + "," + r.training + "\n";
}

}  // namespace visunit
