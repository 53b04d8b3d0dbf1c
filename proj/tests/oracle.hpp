#pragma once

// Test oracles: random model sets, brute-force state-path and label-sequence
// search straight from the model definitions, exhaustive greedy clustering and
// alignment enumeration.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "visunit/cluster.hpp"
#include "visunit/decoder.hpp"
#include "visunit/hmm.hpp"

namespace oracle {

using namespace visunit;

inline double log_gauss_mix(const MixtureState& st, std::span<const double> x) {
  double total = 0.0;
  for (std::size_t c = 0; c < st.components(); ++c) {
    double e = std::log(st.weights[c]);
    for (std::size_t d = 0; d < st.dim; ++d) {
      const double v = st.variances[c * st.dim + d], diff = x[d] - st.means[c * st.dim + d];
      e += -0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * diff * diff / v;
    }
    total += std::exp(e);
  }
  return std::log(total);
}

// Random left-to-right model: self loop, next and (with 3+ states) a skip.
inline GmmHmm random_model(const std::string& label, std::size_t states, std::size_t comps, std::size_t dim,
                           std::mt19937_64& rng, bool tee = false) {
  std::uniform_real_distribution<double> u(0.2, 1.0), m(-2.0, 2.0), v(0.3, 2.0);
  GmmHmm h = make_left_to_right(label, states, comps, dim, tee);
  const std::size_t n = h.order();
  for (std::size_t i = 1; i <= states; ++i) {
    std::vector<double> w(n, 0.0);
    w[i] = u(rng);
    w[i + 1] = u(rng);
    if (i + 2 < n && states >= 3) w[i + 2] = u(rng);
    double s = 0.0;
    for (double x : w) s += x;
    for (std::size_t j = 0; j < n; ++j) h.a(i, j) = w[j] / s;
  }
  for (auto& st : h.states) {
    double s = 0.0;
    for (auto& w : st.weights) s += (w = u(rng));
    for (auto& w : st.weights) w /= s;
    for (auto& x : st.means) x = m(rng);
    for (auto& x : st.variances) x = v(rng);
  }
  return h;
}

inline FeatureSequence random_features(std::size_t frames, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.5);
  std::vector<double> v(frames * dim);
  for (auto& x : v) x = z(rng);
  return FeatureSequence(dim, std::move(v));
}

struct PathStep {
  std::size_t position;
  std::size_t state;
};

// Calls visit(log_prob, path) for every state path of `labels` that emits
// exactly the frames of f and ends at the exit of the last model.
inline void enumerate_paths(const HmmSet& set, const std::vector<std::string>& labels, const FeatureSequence& f,
                            const std::function<void(double, const std::vector<PathStep>&)>& visit) {
  const std::size_t T = f.frames();
  std::vector<PathStep> path;
  std::function<void(std::size_t, std::size_t, double)> enter;
  std::function<void(std::size_t, std::size_t, std::size_t, double)> emit;
  enter = [&](std::size_t k, std::size_t t, double lp) {
    if (k == labels.size()) {
      if (t == T) visit(lp, path);
      return;
    }
    const auto& m = set.at(labels[k]);
    for (std::size_t j = 1; j <= m.num_states(); ++j) {
      if (m.a(0, j) > 0.0) emit(k, j, t, lp + std::log(m.a(0, j)));
    }
    if (m.a(0, m.exit_state()) > 0.0) enter(k + 1, t, lp + std::log(m.a(0, m.exit_state())));
  };
  emit = [&](std::size_t k, std::size_t i, std::size_t t, double lp) {
    if (t == T) return;
    const auto& m = set.at(labels[k]);
    lp += log_gauss_mix(m.state(i), f.frame(t));
    path.push_back({k, i});
    for (std::size_t j = 1; j <= m.num_states(); ++j) {
      if (m.a(i, j) > 0.0) emit(k, j, t + 1, lp + std::log(m.a(i, j)));
    }
    if (m.a(i, m.exit_state()) > 0.0) enter(k + 1, t + 1, lp + std::log(m.a(i, m.exit_state())));
    path.pop_back();
  };
  enter(0, 0, 0.0);
}

// Random matrix with small counts so that exact ties are common.
struct RandomCase {
  ConfusionMatrix k;
  std::map<std::string, Category> cat;
};

inline RandomCase random_case(std::mt19937_64& rng) {
  const std::size_t n = 2 + rng() % 7;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back("p" + std::to_string(i));
  RandomCase rc{ConfusionMatrix(labels), {}};
  for (auto& c : rc.k.counts) c = static_cast<std::int64_t>(rng() % 4);
  // Both categories present.
  std::vector<Category> cats(n, Category::consonant);
  cats[0] = Category::vowel;
  for (std::size_t i = 2; i < n; ++i) cats[i] = rng() % 2 ? Category::vowel : Category::consonant;
  std::shuffle(cats.begin(), cats.end(), rng);
  for (std::size_t i = 0; i < n; ++i) rc.cat[labels[i]] = cats[i];
  return rc;
}

// Exhaustive greedy: at every step score all legal pairs from the original
// counts summed over group members, take the maximum, break exact ties with
// one draw over the tied pairs in enumeration order.
inline MergeTrace exhaustive_trace(const RandomCase& rc, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < rc.k.size(); ++i) groups.push_back({i});
  auto count = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::int64_t s = 0;
    for (auto i : a) {
      for (auto j : b) s += rc.k.at(i, j);
    }
    return s;
  };
  auto p = [&](std::size_t r, std::size_t s) {
    std::int64_t col = 0;
    for (const auto& g : groups) col += count(g, groups[s]);
    return col == 0 ? 0.0 : static_cast<double>(count(groups[r], groups[s])) / static_cast<double>(col);
  };
  auto name = [&](const std::vector<std::size_t>& g) {
    std::vector<std::string> l;
    for (auto i : g) l.push_back(rc.k.labels[i]);
    std::sort(l.begin(), l.end());
    return text::join(l, "|");
  };
  Rng rng(seed);
  MergeTrace t;
  t.seed = seed;
  for (;;) {
    struct Cand {
      std::size_t r, s;
      double q;
    };
    std::vector<Cand> cands;
    for (std::size_t r = 0; r < groups.size(); ++r) {
      for (std::size_t s = r + 1; s < groups.size(); ++s) {
        if (rc.cat.at(rc.k.labels[groups[r][0]]) != rc.cat.at(rc.k.labels[groups[s][0]])) continue;
        cands.push_back({r, s, p(r, s) + p(s, r)});
      }
    }
    if (cands.empty()) break;
    double best = -1.0;
    for (const auto& c : cands) best = std::max(best, c.q);
    std::vector<Cand> tied;
    for (const auto& c : cands) {
      if (c.q == best) tied.push_back(c);
    }
    Cand pick = tied[0];
    if (tied.size() > 1) pick = tied[std::uniform_int_distribution<std::size_t>(0, tied.size() - 1)(rng)];
    t.records.push_back({groups.size(), name(groups[pick.r]), name(groups[pick.s]), pick.q, tied.size() > 1});
    groups[pick.r].insert(groups[pick.r].end(), groups[pick.s].begin(), groups[pick.s].end());
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(pick.s));
  }
  return t;
}

struct Best {
  double score = -std::numeric_limits<double>::infinity();
  std::vector<std::string> labels;
};

// Tries every label sequence of length 1..3 with optional boundary silence and
// scores it by exhaustive state-path search.
inline Best best_sequence(const HmmSet& set, const BigramModel& lmodel, const UnitNetwork& net, const FeatureSequence& f,
                          const DecodeParams& p) {
  Best best;
  const std::size_t V = net.vocab.size();
  std::vector<std::size_t> seq;
  auto score_sequence = [&] {
    double lm = lmodel.log_prob(kSentenceStart, net.vocab[seq.front()]);
    for (std::size_t i = 1; i < seq.size(); ++i) lm += lmodel.log_prob(net.vocab[seq[i - 1]], net.vocab[seq[i]]);
    lm += lmodel.log_prob(net.vocab[seq.back()], kSentenceEnd);
    const int sil_options = net.options.boundary_silence ? 2 : 1;
    for (int lead = 0; lead < sil_options; ++lead) {
      for (int trail = 0; trail < sil_options; ++trail) {
        std::vector<std::string> labels;
        if (lead) labels.emplace_back(kSilence);
        for (auto w : seq) {
          labels.insert(labels.end(), net.expansions[w].begin(), net.expansions[w].end());
          if (net.options.unit_pause) labels.emplace_back(kShortPause);
        }
        if (trail) labels.emplace_back(kSilence);
        double ac = -std::numeric_limits<double>::infinity();
        oracle::enumerate_paths(set, labels, f, [&](double lp, const auto&) { ac = std::max(ac, lp); });
        const double total = ac + p.grammar_scale * lm - p.transition_penalty * static_cast<double>(seq.size());
        if (total > best.score) {
          best.score = total;
          best.labels.clear();
          for (auto w : seq) best.labels.push_back(net.vocab[w]);
        }
      }
    }
  };
  std::function<void()> grow = [&] {
    if (!seq.empty()) score_sequence();
    if (seq.size() == 3) return;
    for (std::size_t w = 0; w < V; ++w) {
      seq.push_back(w);
      grow();
      seq.pop_back();
    }
  };
  grow();
  return best;
}

struct Enumerated {
  int cost = std::numeric_limits<int>::max();
  std::size_t d = 0, s = 0, i = 0;  // counts of the first cheapest alignment found
  std::size_t alignments = 0;       // alignments tried
};

// Every alignment is a monotone matching between ref and hyp positions;
// unmatched ref tokens are deletions, unmatched hyp tokens insertions.
inline Enumerated enumerate_alignments(const std::vector<std::string>& r, const std::vector<std::string>& h) {
  Enumerated e;
  std::function<void(std::size_t, std::size_t, std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j,
                                                                                   std::size_t pairs,
                                                                                   std::size_t subs) {
    ++e.alignments;
    const std::size_t del = r.size() - pairs, ins = h.size() - pairs;
    const int c = static_cast<int>(10 * subs + 7 * (del + ins));
    if (c < e.cost) e = {c, del, subs, ins, e.alignments};
    for (std::size_t a = i; a < r.size(); ++a) {
      for (std::size_t b = j; b < h.size(); ++b) go(a + 1, b + 1, pairs + 1, subs + (r[a] != h[b]));
    }
  };
  go(0, 0, 0, 0);
  return e;
}

}  // namespace oracle
