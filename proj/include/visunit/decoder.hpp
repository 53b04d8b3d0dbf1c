#pragma once

// Looped bigram unit networks and token-passing Viterbi decoding over them.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "visunit/composite.hpp"
#include "visunit/corpus.hpp"
#include "visunit/error.hpp"
#include "visunit/hmm.hpp"
#include "visunit/lexicon.hpp"
#include "visunit/lm.hpp"

namespace visunit {

struct NetworkArc {
  std::size_t from = 0;
  std::size_t to = 0;
  std::string label;  // empty for null arcs
  double lm_log_prob = 0.0;
};

struct NetworkOptions {
  bool boundary_silence = true;  // optional sil before the first and after the last label
  bool unit_pause = true;        // optional sp after every label's chain
};

// Node 0 is the start, node 1 the end, node 2 + i follows vocab[i]. Every
// labeled arc into node 2 + i carries vocab[i].
struct UnitNetwork {
  Granularity classifier_units = Granularity::phoneme;
  Granularity network_units = Granularity::phoneme;
  std::vector<std::string> vocab;
  std::vector<std::vector<std::string>> expansions;  // model labels per vocab entry
  std::vector<NetworkArc> arcs;
  NetworkOptions options;

  static constexpr std::size_t start = 0;
  static constexpr std::size_t end = 1;
  std::size_t num_nodes() const { return vocab.size() + 2; }
  std::size_t node_of(std::size_t vocab_index) const { return vocab_index + 2; }

  // Model labels a decoder needs.
  std::vector<std::string> model_labels() const {
    std::vector<std::string> out;
    for (const auto& e : expansions) out.insert(out.end(), e.begin(), e.end());
    if (options.boundary_silence) out.emplace_back(kSilence);
    if (options.unit_pause) out.emplace_back(kShortPause);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

inline int granularity_rank(Granularity g) {
  switch (g) {
    case Granularity::visual_unit:
      return 0;
    case Granularity::phoneme:
      return 1;
    case Granularity::word:
      return 2;
  }
  return 0;
}

// Classifier units must be no coarser than network units.
inline bool valid_pairing(Granularity classifier, Granularity network) {
  return granularity_rank(classifier) <= granularity_rank(network);
}

inline UnitNetwork build_network(const BigramModel& lm, const PronLexicon& lex, const P2VMap* map,
                                 Granularity classifier, Granularity network, NetworkOptions options = {}) {
  if (!valid_pairing(classifier, network)) {
    throw ConfigError("classifier units '" + std::string(granularity_name(classifier)) +
                      "' cannot build a network of '" + std::string(granularity_name(network)) + "' units");
  }
  if (classifier == Granularity::visual_unit && !map) throw ConfigError("visual-unit classifiers need a P2V map");
  UnitNetwork net;
  net.classifier_units = classifier;
  net.network_units = network;
  net.vocab = lm.vocab;
  net.options = options;
  for (const auto& label : net.vocab) {
    std::vector<std::string> e;
    if (network == Granularity::word) {
      const auto* pron = lex.find(label);
      if (!pron) throw MappingError("network word '" + label + "' is not in the lexicon");
      if (classifier == Granularity::word) {
        e = {label};
      } else if (classifier == Granularity::phoneme) {
        e = *pron;
      } else {
        e = phonemes_to_units(*pron, *map);
      }
    } else if (network == Granularity::phoneme && classifier == Granularity::visual_unit) {
      e = phonemes_to_units(std::vector<std::string>{label}, *map);
    } else {
      e = {label};
    }
    net.expansions.push_back(std::move(e));
  }
  const std::string bos(kSentenceStart), eos(kSentenceEnd);
  for (std::size_t w = 0; w < net.vocab.size(); ++w) {
    net.arcs.push_back({UnitNetwork::start, net.node_of(w), net.vocab[w], lm.log_prob(bos, net.vocab[w])});
  }
  for (std::size_t u = 0; u < net.vocab.size(); ++u) {
    for (std::size_t w = 0; w < net.vocab.size(); ++w) {
      net.arcs.push_back({net.node_of(u), net.node_of(w), net.vocab[w], lm.log_prob(net.vocab[u], net.vocab[w])});
    }
    net.arcs.push_back({net.node_of(u), UnitNetwork::end, "", lm.log_prob(net.vocab[u], eos)});
  }
  return net;
}

struct DecodeParams {
  double grammar_scale = 1.0;       // s
  double transition_penalty = 0.5;  // p, natural-log units, subtracted per labeled arc

  void validate() const {
    if (!(grammar_scale >= 0.0)) throw ConfigError("grammar scale must be non-negative");
    if (!std::isfinite(transition_penalty)) throw ConfigError("transition penalty must be finite");
  }
};

struct DecodeResult {
  std::vector<std::string> labels;  // network granularity
  std::vector<std::size_t> starts;  // first frame of each label's chain
  double log_score = kLogZero;
};

// Chains of emitting states, one per network node plus optional sil chains.
// Precomputed once per (set, network) and reusable across utterances.
class Decoder {
 public:
  Decoder(const HmmSet& set, const UnitNetwork& net) : set_(set), net_(net), scorer_(set) {
    for (const auto& l : net.model_labels()) {
      if (!set.contains(l)) throw MappingError("network label needs a model '" + l + "'");
    }
    for (std::size_t w = 0; w < net.vocab.size(); ++w) {
      auto labels = net.expansions[w];
      if (net.options.unit_pause) labels.emplace_back(kShortPause);
      add_chain(build_composite(set, labels));
    }
    if (net.options.boundary_silence) {
      sil_start_ = chains_.size();
      add_chain(build_composite(set, {std::string(kSilence)}));
      sil_end_ = chains_.size();
      add_chain(build_composite(set, {std::string(kSilence)}));
    }
    needed_.assign(scorer_.num_states(), 0);
    for (auto id : state_ids_) needed_[id] = 1;
    // LM scores indexed [from node][to vocab], with node 0 as <s>.
    const std::size_t V = net.vocab.size();
    lm_.assign((V + 1) * V, kLogZero);
    lm_end_.assign(V, kLogZero);
    for (const auto& a : net.arcs) {
      if (a.to == UnitNetwork::end) {
        lm_end_[a.from - 2] = a.lm_log_prob;
      } else {
        const std::size_t row = a.from == UnitNetwork::start ? 0 : a.from - 1;
        lm_[row * V + (a.to - 2)] = a.lm_log_prob;
      }
    }
  }

  DecodeResult decode(const FeatureSequence& f, const DecodeParams& params) const {
    params.validate();
    const std::size_t T = f.frames();
    const std::size_t V = net_.vocab.size();
    const std::size_t N = state_ids_.size();
    const std::size_t S = scorer_.num_states();
    const auto table = scorer_.table(f, needed_);
    const double s = params.grammar_scale, pen = params.transition_penalty;
    auto lm = [&](std::size_t row, std::size_t w) {
      const double l = lm_[row * V + w];
      return l == kLogZero ? kLogZero : s * l;
    };

    // Word links: one per (node entry, frame).
    struct Link {
      std::size_t label = 0;  // vocab index
      std::size_t prev = npos;
      std::size_t start = 0;
    };
    std::vector<Link> links;
    std::vector<double> cur(N, kLogZero), next(N, kLogZero);
    std::vector<std::size_t> cur_link(N, npos), next_link(N, npos);
    // Best score leaving each chain at the previous frame, with its link.
    std::vector<double> exit_score(chains_.size(), kLogZero);
    std::vector<std::size_t> exit_link(chains_.size(), npos);

    auto enter = [&](std::size_t chain, double score, std::size_t link, std::size_t t) {
      const auto& c = chains_[chain];
      for (const auto& e : c.composite.entries) {
        const std::size_t g = c.offset + e.to;
        const double v = score + e.log_prob + table[t * S + state_ids_[g]];
        if (v > next[g]) {
          next[g] = v;
          next_link[g] = link;
        }
      }
    };
    // Enters vocab node w from a history (row) with the given score and link.
    auto enter_word = [&](std::size_t w, double base, std::size_t row, std::size_t prev_link,
                          std::vector<std::pair<double, std::size_t>>& best) {
      const double l = lm(row, w);
      if (l == kLogZero || base == kLogZero) return;
      const double v = base + l - pen;
      if (v > best[w].first) best[w] = {v, prev_link};
    };

    for (std::size_t t = 0; t < T; ++t) {
      std::fill(next.begin(), next.end(), kLogZero);
      std::fill(next_link.begin(), next_link.end(), npos);
      if (t > 0) {
        for (std::size_t ci = 0; ci < chains_.size(); ++ci) {
          const auto& c = chains_[ci];
          for (const auto& a : c.composite.arcs) {
            const std::size_t from = c.offset + a.from, to = c.offset + a.to;
            if (cur[from] == kLogZero) continue;
            const double v = cur[from] + a.log_prob + table[t * S + state_ids_[to]];
            if (v > next[to]) {
              next[to] = v;
              next_link[to] = cur_link[from];
            }
          }
        }
      }
      // Cross-chain entries at frame t.
      std::vector<std::pair<double, std::size_t>> best(V, {kLogZero, npos});
      if (t == 0) {
        for (std::size_t w = 0; w < V; ++w) enter_word(w, 0.0, 0, npos, best);
        if (has_sil()) enter(sil_start_, 0.0, npos, t);
      } else {
        for (std::size_t u = 0; u < V; ++u) {
          for (std::size_t w = 0; w < V; ++w) enter_word(w, exit_score[u], u + 1, exit_link[u], best);
        }
        if (has_sil()) {
          for (std::size_t w = 0; w < V; ++w) enter_word(w, exit_score[sil_start_], 0, npos, best);
          double end_best = kLogZero;
          std::size_t end_link = npos;
          for (std::size_t u = 0; u < V; ++u) {
            if (exit_score[u] == kLogZero || lm_end_[u] == kLogZero) continue;
            const double v = exit_score[u] + s * lm_end_[u];
            if (v > end_best) {
              end_best = v;
              end_link = exit_link[u];
            }
          }
          if (end_best != kLogZero) enter(sil_end_, end_best, end_link, t);
        }
      }
      for (std::size_t w = 0; w < V; ++w) {
        if (best[w].first == kLogZero) continue;
        links.push_back({w, best[w].second, t});
        enter(w, best[w].first, links.size() - 1, t);
      }
      std::swap(cur, next);
      std::swap(cur_link, next_link);
      // Exits at frame t, used for entries at t + 1 and for the final score.
      for (std::size_t ci = 0; ci < chains_.size(); ++ci) {
        const auto& c = chains_[ci];
        exit_score[ci] = kLogZero;
        exit_link[ci] = npos;
        for (const auto& e : c.composite.exits) {
          const std::size_t g = c.offset + e.from;
          if (cur[g] == kLogZero) continue;
          const double v = cur[g] + e.log_prob;
          if (v > exit_score[ci]) {
            exit_score[ci] = v;
            exit_link[ci] = cur_link[g];
          }
        }
      }
    }

    double best = kLogZero;
    std::size_t link = npos;
    for (std::size_t u = 0; u < V; ++u) {
      if (exit_score[u] == kLogZero || lm_end_[u] == kLogZero) continue;
      const double v = exit_score[u] + s * lm_end_[u];
      if (v > best) {
        best = v;
        link = exit_link[u];
      }
    }
    if (has_sil() && exit_score[sil_end_] > best) {
      best = exit_score[sil_end_];
      link = exit_link[sil_end_];
    }
    if (best == kLogZero || link == npos) throw AlignmentError("no path reaches the network end");
    DecodeResult out;
    out.log_score = best;
    for (std::size_t l = link; l != npos; l = links[l].prev) {
      out.labels.push_back(net_.vocab[links[l].label]);
      out.starts.push_back(links[l].start);
    }
    std::reverse(out.labels.begin(), out.labels.end());
    std::reverse(out.starts.begin(), out.starts.end());
    return out;
  }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  struct Chain {
    Composite composite;
    std::size_t offset = 0;
  };

  bool has_sil() const { return sil_start_ != npos; }

  void add_chain(Composite c) {
    Chain ch{std::move(c), state_ids_.size()};
    for (const auto& st : ch.composite.states) state_ids_.push_back(scorer_.id(st.model, st.state));
    chains_.push_back(std::move(ch));
  }

  const HmmSet& set_;
  const UnitNetwork& net_;
  EmissionScorer scorer_;
  std::vector<Chain> chains_;
  std::vector<std::size_t> state_ids_;
  std::vector<char> needed_;
  std::vector<double> lm_;
  std::vector<double> lm_end_;
  std::size_t sil_start_ = npos;
  std::size_t sil_end_ = npos;
};

inline DecodeResult decode(const HmmSet& set, const UnitNetwork& net, const FeatureSequence& features,
                           const DecodeParams& params = {}) {
  return Decoder(set, net).decode(features, params);
}

}  // namespace visunit
