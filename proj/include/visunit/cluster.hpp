#pragma once

// Confusion matrices and greedy, category-constrained merging of the most
// confused pair of units into a nested family of P2V maps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "visunit/error.hpp"
#include "visunit/lexicon.hpp"
#include "visunit/seed.hpp"
#include "visunit/text.hpp"

namespace visunit {

// counts[i * n + j]: times actual labels[i] was predicted as labels[j].
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::int64_t> counts;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> l) : labels(std::move(l)), counts(labels.size() * labels.size(), 0) {
    std::set<std::string> seen(labels.begin(), labels.end());
    if (seen.size() != labels.size()) throw ConfigError("confusion matrix labels must be unique");
  }

  std::size_t size() const { return labels.size(); }
  std::int64_t& at(std::size_t i, std::size_t j) { return counts[i * size() + j]; }
  std::int64_t at(std::size_t i, std::size_t j) const { return counts[i * size() + j]; }

  std::size_t index(const std::string& label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw MappingError("label '" + label + "' is not in the confusion matrix");
    return static_cast<std::size_t>(it - labels.begin());
  }

  std::int64_t total() const {
    std::int64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix accumulate(const std::vector<ConfusionMatrix>& parts) {
  if (parts.empty()) throw ConfigError("nothing to accumulate");
  ConfusionMatrix out = parts.front();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    if (parts[k].labels != out.labels) throw ConfigError("confusion matrices have different labels");
    for (std::size_t i = 0; i < out.counts.size(); ++i) out.counts[i] += parts[k].counts[i];
  }
  return out;
}

struct NormalizedConfusion {
  std::vector<std::string> labels;
  std::vector<double> p;  // column-stochastic, or all-zero columns

  std::size_t size() const { return labels.size(); }
  double at(std::size_t i, std::size_t j) const { return p[i * size() + j]; }
};

inline NormalizedConfusion normalize_columns(const ConfusionMatrix& k) {
  const std::size_t n = k.size();
  NormalizedConfusion out{k.labels, std::vector<double>(n * n, 0.0)};
  for (std::size_t j = 0; j < n; ++j) {
    std::int64_t col = 0;
    for (std::size_t i = 0; i < n; ++i) col += k.at(i, j);
    if (col == 0) continue;
    for (std::size_t i = 0; i < n; ++i) out.p[i * n + j] = static_cast<double>(k.at(i, j)) / static_cast<double>(col);
  }
  return out;
}

inline double merge_score(const NormalizedConfusion& p, std::size_t r, std::size_t s) {
  if (r == s) throw ConfigError("merge score needs two distinct units");
  if (r >= p.size() || s >= p.size()) throw ConfigError("merge score index out of range");
  return p.at(r, s) + p.at(s, r);
}

// One merge of two groups; labels join group members with '|'.
struct MergeRecord {
  std::size_t size_before = 0;
  std::string first;
  std::string second;
  double q = 0.0;
  bool tie_broken = false;
  friend bool operator==(const MergeRecord&, const MergeRecord&) = default;
};

struct MergeTrace {
  std::uint64_t seed = 0;
  std::vector<MergeRecord> records;
  friend bool operator==(const MergeTrace&, const MergeTrace&) = default;
};

struct P2VFamily {
  std::map<std::size_t, P2VMap, std::greater<>> maps;  // largest size first
  MergeTrace trace;

  std::size_t max_size() const { return maps.begin()->first; }
  std::size_t min_size() const { return maps.rbegin()->first; }
  const P2VMap& at(std::size_t size) const {
    auto it = maps.find(size);
    if (it == maps.end()) throw ConfigError("family has no map of size " + std::to_string(size));
    return it->second;
  }
};

// Units named v01.. by descending member count, ties by first member.
inline P2VMap name_units(std::vector<std::vector<std::string>> groups) {
  for (auto& g : groups) std::sort(g.begin(), g.end());
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });
  std::vector<VisualUnit> units;
  const std::size_t width = std::max<std::size_t>(2, std::to_string(groups.size()).size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    std::string num = std::to_string(i + 1);
    units.push_back({"v" + std::string(width - num.size(), '0') + num, std::move(groups[i])});
  }
  return P2VMap(std::move(units));
}

namespace detail {

inline std::string group_name(const std::vector<std::string>& g) {
  auto sorted = g;
  std::sort(sorted.begin(), sorted.end());
  return text::join(sorted, "|");
}

// Working state of the greedy merge: groups of original labels and the merged
// count matrix over groups.
struct MergeState {
  std::vector<std::vector<std::string>> groups;
  std::vector<Category> category;
  std::vector<std::int64_t> k;  // n x n

  std::size_t size() const { return groups.size(); }

  NormalizedConfusion normalized() const {
    ConfusionMatrix m;
    for (const auto& g : groups) m.labels.push_back(group_name(g));
    m.counts = k;
    return normalize_columns(m);
  }

  void merge(std::size_t r, std::size_t s) {
    if (r > s) std::swap(r, s);
    const std::size_t n = size();
    std::vector<std::int64_t> out;
    out.reserve((n - 1) * (n - 1));
    auto src = [&](std::size_t i) { return i >= s ? i + 1 : i; };
    for (std::size_t i2 = 0; i2 + 1 < n; ++i2) {
      for (std::size_t j2 = 0; j2 + 1 < n; ++j2) {
        const std::size_t i = src(i2), j = src(j2);
        std::int64_t v = k[i * n + j];
        if (i == r) v += k[s * n + j];
        if (j == r) v += k[i * n + s];
        if (i == r && j == r) v += k[s * n + s];
        out.push_back(v);
      }
    }
    k = std::move(out);
    groups[r].insert(groups[r].end(), groups[s].begin(), groups[s].end());
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(s));
    category.erase(category.begin() + static_cast<std::ptrdiff_t>(s));
  }
};

}  // namespace detail

// Legal pairs (r < s, same category) with their scores, in enumeration order.
struct ScoredPair {
  std::size_t r = 0;
  std::size_t s = 0;
  double q = 0.0;
};

inline std::vector<ScoredPair> legal_pairs(const NormalizedConfusion& p, const std::vector<Category>& category) {
  std::vector<ScoredPair> out;
  for (std::size_t r = 0; r < p.size(); ++r) {
    for (std::size_t s = r + 1; s < p.size(); ++s) {
      if (category[r] == category[s]) out.push_back({r, s, merge_score(p, r, s)});
    }
  }
  return out;
}

// Picks the maximum-q pair; exact ties are resolved by one uniform draw from
// `rng`, which is consumed only when at least two pairs tie.
inline std::pair<ScoredPair, bool> pick_pair(const std::vector<ScoredPair>& pairs, Rng& rng) {
  double best = -1.0;
  for (const auto& pr : pairs) best = std::max(best, pr.q);
  std::vector<std::size_t> tied;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].q == best) tied.push_back(i);
  }
  if (tied.size() == 1) return {pairs[tied.front()], false};
  std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
  return {pairs[tied[pick(rng)]], true};
}

inline P2VFamily cluster_family(const ConfusionMatrix& k, const std::map<std::string, Category>& categories,
                                std::uint64_t seed) {
  if (k.size() == 0) throw ConfigError("cannot cluster an empty confusion matrix");
  if (k.counts.size() != k.size() * k.size()) throw ConfigError("confusion matrix is not square");
  for (auto c : k.counts) {
    if (c < 0) throw ConfigError("confusion counts must be non-negative");
  }
  detail::MergeState st;
  for (const auto& l : k.labels) {
    auto it = categories.find(l);
    if (it == categories.end()) throw MappingError("label '" + l + "' has no vowel/consonant category");
    st.groups.push_back({l});
    st.category.push_back(it->second);
  }
  st.k = k.counts;
  Rng rng(seed);
  P2VFamily fam;
  fam.trace.seed = seed;
  fam.maps.emplace(st.size(), name_units(st.groups));
  for (;;) {
    auto pairs = legal_pairs(st.normalized(), st.category);
    if (pairs.empty()) break;
    auto [pr, tie] = pick_pair(pairs, rng);
    fam.trace.records.push_back(
        {st.size(), detail::group_name(st.groups[pr.r]), detail::group_name(st.groups[pr.s]), pr.q, tie});
    st.merge(pr.r, pr.s);
    fam.maps.emplace(st.size(), name_units(st.groups));
  }
  return fam;
}

inline std::string format_trace(const MergeTrace& trace) {
  std::string out = "seed " + std::to_string(trace.seed) + "\n";
  for (const auto& r : trace.records) {
    out += "m=" + std::to_string(r.size_before) + " merge " + r.first + "+" + r.second +
           " q=" + text::format_double(r.q) + " tie=" + (r.tie_broken ? "1" : "0") + "\n";
  }
  return out;
}

inline MergeTrace parse_trace(std::string_view content) {
  MergeTrace trace;
  std::size_t n = 0;
  for (auto line : text::lines(content)) {
    ++n;
    auto tok = text::split_ws(line);
    if (tok.empty()) continue;
    auto fail = [&] { return ParseError("trace line " + std::to_string(n) + ": malformed record"); };
    if (tok[0] == "seed") {
      if (tok.size() != 2 || !text::parse_int(tok[1], trace.seed)) throw fail();
      continue;
    }
    if (tok.size() != 5 || !tok[0].starts_with("m=") || tok[1] != "merge" || !tok[3].starts_with("q=") ||
        !tok[4].starts_with("tie=")) {
      throw fail();
    }
    MergeRecord r;
    auto plus = tok[2].find('+');
    if (plus == std::string_view::npos || !text::parse_int(tok[0].substr(2), r.size_before) ||
        !text::parse_double(tok[3].substr(2), r.q)) {
      throw fail();
    }
    r.first = std::string(tok[2].substr(0, plus));
    r.second = std::string(tok[2].substr(plus + 1));
    if (tok[4] != "tie=0" && tok[4] != "tie=1") throw fail();
    r.tie_broken = tok[4] == "tie=1";
    trace.records.push_back(std::move(r));
  }
  return trace;
}

// Re-applies a trace to K, returning the q of each recorded merge recomputed
// from the merged counts. Throws if a record names groups that do not exist.
inline std::vector<double> replay_trace(const ConfusionMatrix& k, const MergeTrace& trace) {
  detail::MergeState st;
  for (const auto& l : k.labels) {
    st.groups.push_back({l});
    st.category.push_back(Category::vowel);
  }
  st.k = k.counts;
  std::vector<double> qs;
  for (const auto& r : trace.records) {
    if (r.size_before != st.size()) throw ConfigError("trace size does not match the replayed state");
    std::size_t a = st.size(), b = st.size();
    for (std::size_t i = 0; i < st.size(); ++i) {
      const auto name = detail::group_name(st.groups[i]);
      if (name == r.first) a = i;
      if (name == r.second) b = i;
    }
    if (a == st.size() || b == st.size() || a == b) throw ConfigError("trace names unknown groups");
    qs.push_back(merge_score(st.normalized(), a, b));
    st.merge(a, b);
  }
  return qs;
}

}  // namespace visunit
