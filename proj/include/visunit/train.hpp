#pragma once

// Embedded Baum-Welch re-estimation over composite utterance models and
// Viterbi forced alignment. All recursions run in the log domain.

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "visunit/composite.hpp"
#include "visunit/corpus.hpp"
#include "visunit/error.hpp"
#include "visunit/hmm.hpp"

namespace visunit {

// Sufficient statistics for one HmmSet, indexed like the set.
struct Accumulators {
  struct State {
    std::vector<double> occ;    // per component
    std::vector<double> sum;    // components x dim
    std::vector<double> sumsq;  // components x dim
  };
  struct Model {
    std::vector<State> states;
    std::vector<double> trans;  // (S+2)^2 expected transition counts
  };
  std::vector<Model> models;
  double log_likelihood = 0.0;
  std::size_t frames = 0;
  std::size_t utterances = 0;

  explicit Accumulators(const HmmSet& set) {
    for (const auto& m : set.models()) {
      Model acc;
      acc.trans.assign(m.trans.size(), 0.0);
      for (const auto& st : m.states) {
        acc.states.push_back({std::vector<double>(st.components(), 0.0),
                              std::vector<double>(st.components() * st.dim, 0.0),
                              std::vector<double>(st.components() * st.dim, 0.0)});
      }
      models.push_back(std::move(acc));
    }
  }

  void merge(const Accumulators& o) {
    for (std::size_t m = 0; m < models.size(); ++m) {
      auto& a = models[m];
      const auto& b = o.models[m];
      for (std::size_t k = 0; k < a.trans.size(); ++k) a.trans[k] += b.trans[k];
      for (std::size_t s = 0; s < a.states.size(); ++s) {
        for (std::size_t k = 0; k < a.states[s].occ.size(); ++k) a.states[s].occ[k] += b.states[s].occ[k];
        for (std::size_t k = 0; k < a.states[s].sum.size(); ++k) {
          a.states[s].sum[k] += b.states[s].sum[k];
          a.states[s].sumsq[k] += b.states[s].sumsq[k];
        }
      }
    }
    log_likelihood += o.log_likelihood;
    frames += o.frames;
    utterances += o.utterances;
  }
};

struct ForwardBackward {
  std::size_t frames = 0;
  std::size_t states = 0;
  std::vector<double> alpha;     // T x N
  std::vector<double> beta;      // T x N
  std::vector<double> emission;  // T x N, log b_j(o_t) for the composite states
  double log_likelihood = kLogZero;
};

inline ForwardBackward forward_backward(const Composite& c, const EmissionScorer& scorer, const FeatureSequence& f) {
  ForwardBackward fb;
  const std::size_t T = f.frames();
  const std::size_t N = c.states.size();
  fb.frames = T;
  fb.states = N;
  fb.emission.resize(T * N);
  for (std::size_t t = 0; t < T; ++t) {
    auto x = f.frame(t);
    for (std::size_t j = 0; j < N; ++j) {
      fb.emission[t * N + j] = scorer.log_likelihood(scorer.id(c.states[j].model, c.states[j].state), x);
    }
  }
  fb.alpha.assign(T * N, kLogZero);
  fb.beta.assign(T * N, kLogZero);
  for (const auto& e : c.entries) fb.alpha[e.to] = log_add(fb.alpha[e.to], e.log_prob + fb.emission[e.to]);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < N; ++j) {
      double acc = kLogZero;
      for (auto a : c.arcs_into[j]) acc = log_add(acc, fb.alpha[(t - 1) * N + c.arcs[a].from] + c.arcs[a].log_prob);
      fb.alpha[t * N + j] = acc == kLogZero ? kLogZero : acc + fb.emission[t * N + j];
    }
  }
  for (const auto& e : c.exits) {
    fb.beta[(T - 1) * N + e.from] = log_add(fb.beta[(T - 1) * N + e.from], e.log_prob);
    fb.log_likelihood = log_add(fb.log_likelihood, fb.alpha[(T - 1) * N + e.from] + e.log_prob);
  }
  for (std::size_t t = T - 1; t-- > 0;) {
    for (const auto& a : c.arcs) {
      const double v = fb.beta[(t + 1) * N + a.to];
      if (v == kLogZero) continue;
      auto& dst = fb.beta[t * N + a.from];
      dst = log_add(dst, a.log_prob + fb.emission[(t + 1) * N + a.to] + v);
    }
  }
  return fb;
}

// Adds one utterance's expected counts. Returns false when the utterance has
// no admissible path.
inline bool accumulate_utterance(const HmmSet& set, const Composite& c, const EmissionScorer& scorer,
                                 const FeatureSequence& f, double beam, Accumulators& acc) {
  if (f.frames() < c.min_frames) return false;
  auto fb = forward_backward(c, scorer, f);
  const double total = fb.log_likelihood;
  if (total == kLogZero) return false;
  if (std::isnan(total)) throw ModelError("internal error: NaN log-likelihood in forward-backward");
  const std::size_t T = fb.frames, N = fb.states, D = f.dim();
  auto keep = [&](double log_post) { return beam <= 0.0 || log_post >= -beam; };

  std::vector<double> comp;
  for (std::size_t t = 0; t < T; ++t) {
    auto x = f.frame(t);
    for (std::size_t j = 0; j < N; ++j) {
      const double lg = fb.alpha[t * N + j] + fb.beta[t * N + j] - total;
      if (lg == kLogZero || !keep(lg)) continue;
      const double gamma = std::exp(lg);
      const auto& cs = c.states[j];
      scorer.component_log_likelihoods(scorer.id(cs.model, cs.state), x, comp);
      const double lb = fb.emission[t * N + j];
      auto& st = acc.models[cs.model].states[cs.state - 1];
      for (std::size_t m = 0; m < comp.size(); ++m) {
        if (comp[m] == kLogZero) continue;
        const double g = gamma * std::exp(comp[m] - lb);
        if (g == 0.0) continue;
        st.occ[m] += g;
        double* sum = st.sum.data() + m * D;
        double* sq = st.sumsq.data() + m * D;
        for (std::size_t d = 0; d < D; ++d) {
          sum[d] += g * x[d];
          sq[d] += g * x[d] * x[d];
        }
      }
    }
  }
  auto add_uses = [&](const CompositeArc& a, double xi) {
    for (const auto& u : a.uses) {
      const auto& m = set.model(u.model);
      acc.models[u.model].trans[u.from * m.order() + u.to] += xi;
    }
  };
  for (const auto& e : c.entries) {
    const double l = e.log_prob + fb.emission[e.to] + fb.beta[e.to] - total;
    if (l != kLogZero && keep(l)) add_uses(e, std::exp(l));
  }
  for (std::size_t t = 0; t + 1 < T; ++t) {
    for (const auto& a : c.arcs) {
      const double l =
          fb.alpha[t * N + a.from] + a.log_prob + fb.emission[(t + 1) * N + a.to] + fb.beta[(t + 1) * N + a.to] - total;
      if (l != kLogZero && keep(l)) add_uses(a, std::exp(l));
    }
  }
  for (const auto& e : c.exits) {
    const double l = fb.alpha[(T - 1) * N + e.from] + e.log_prob - total;
    if (l != kLogZero && keep(l)) add_uses(e, std::exp(l));
  }
  acc.log_likelihood += total;
  acc.frames += T;
  acc.utterances += 1;
  return true;
}

// M-step. Tied states pool their statistics into the owner; states and rows
// that saw no data keep their parameters; variances are floored.
inline HmmSet reestimate(const HmmSet& set, Accumulators acc) {
  HmmSet out = set;
  const auto& floor = set.variance_floor();
  const std::size_t D = set.dim();
  for (const auto& t : set.ties()) {
    auto& owner = acc.models[set.index(t.owner.model)].states[t.owner.state - 1];
    for (const auto& a : t.aliases) {
      const auto& src = acc.models[set.index(a.model)].states[a.state - 1];
      for (std::size_t k = 0; k < owner.occ.size(); ++k) owner.occ[k] += src.occ[k];
      for (std::size_t k = 0; k < owner.sum.size(); ++k) {
        owner.sum[k] += src.sum[k];
        owner.sumsq[k] += src.sumsq[k];
      }
    }
  }
  for (std::size_t mi = 0; mi < set.size(); ++mi) {
    auto& model = out.mutable_model(mi);
    const auto& ma = acc.models[mi];
    for (std::size_t s = 1; s <= model.num_states(); ++s) {
      if (set.is_alias({model.label, s})) continue;
      const auto& sa = ma.states[s - 1];
      auto& st = model.state(s);
      double occ_total = 0.0;
      for (double o : sa.occ) occ_total += o;
      if (!(occ_total > 0.0)) continue;
      for (std::size_t m = 0; m < st.components(); ++m) {
        const double occ = sa.occ[m];
        st.weights[m] = occ / occ_total;
        if (!(occ > 0.0)) continue;
        for (std::size_t d = 0; d < D; ++d) {
          const double mu = sa.sum[m * D + d] / occ;
          double var = sa.sumsq[m * D + d] / occ - mu * mu;
          if (!floor.empty()) var = std::max(var, floor[d]);
          st.means[m * D + d] = mu;
          st.variances[m * D + d] = var;
        }
      }
    }
    const std::size_t n = model.order();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) row += ma.trans[i * n + j];
      if (!(row > 0.0)) continue;
      for (std::size_t j = 0; j < n; ++j) model.a(i, j) = ma.trans[i * n + j] / row;
    }
  }
  for (const auto& t : set.ties()) {
    const auto params = out.state(t.owner);
    out.set_state(t.owner, params);
  }
  return out;
}

struct TrainResult {
  HmmSet set;
  std::vector<double> log_likelihood;  // total per iteration, before its update
  std::vector<std::string> skipped;    // utterance ids too short for their transcript
};

// `transcripts[i]` is the model label sequence of `corpus[i]` (including any
// sil / sp labels).
inline TrainResult embedded_reestimate(HmmSet set, const Corpus& corpus,
                                       const std::vector<std::vector<std::string>>& transcripts,
                                       const TrainConfig& cfg) {
  cfg.validate();
  if (corpus.size() != transcripts.size()) throw ConfigError("utterance and transcript counts differ");
  if (corpus.empty()) throw ConfigError("training corpus is empty");
  for (const auto& tr : transcripts) {
    for (const auto& l : tr) {
      if (!set.contains(l)) throw MappingError("no model for transcript label '" + l + "'");
    }
  }
  TrainResult result;
  std::vector<char> skipped(corpus.size(), 0);
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    const EmissionScorer scorer(set);
    std::vector<Composite> composites;
    // Composite topology depends on transitions, so it is rebuilt each pass.
    composites.reserve(corpus.size());
    for (const auto& tr : transcripts) composites.push_back(build_composite(set, tr));

    const std::size_t workers = std::min(cfg.threads, corpus.size());
    std::vector<Accumulators> parts(workers, Accumulators(set));
    std::vector<std::vector<char>> ok(workers);
    auto run = [&](std::size_t w) {
      const std::size_t lo = corpus.size() * w / workers, hi = corpus.size() * (w + 1) / workers;
      for (std::size_t u = lo; u < hi; ++u) {
        ok[w].push_back(accumulate_utterance(set, composites[u], scorer, corpus[u].features, cfg.beam, parts[w]) ? 1
                                                                                                               : 0);
      }
    };
    if (workers == 1) {
      run(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
      for (auto& th : pool) th.join();
    }
    Accumulators acc(set);
    std::size_t u = 0;
    for (std::size_t w = 0; w < workers; ++w) {
      acc.merge(parts[w]);
      for (char good : ok[w]) skipped[u++] = good ? 0 : 1;
    }
    if (acc.utterances == 0) throw ModelError("every utterance is too short for its transcript");
    if (std::isnan(acc.log_likelihood)) throw ModelError("internal error: NaN total log-likelihood");
    result.log_likelihood.push_back(acc.log_likelihood);
    set = reestimate(set, std::move(acc));
    if (cfg.tie_sp_after != 0 && it == cfg.tie_sp_after && set.contains(kSilence) && set.contains(kShortPause) &&
        !sp_is_tied(set)) {
      set = tie_sp(std::move(set));
    }
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (skipped[i]) result.skipped.push_back(corpus[i].id);
  }
  result.set = std::move(set);
  return result;
}

// Total log-likelihood of a corpus under a set (no update).
inline double corpus_log_likelihood(const HmmSet& set, const Corpus& corpus,
                                    const std::vector<std::vector<std::string>>& transcripts) {
  const EmissionScorer scorer(set);
  double total = 0.0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto c = build_composite(set, transcripts[i]);
    if (corpus[i].features.frames() < c.min_frames) continue;
    total += forward_backward(c, scorer, corpus[i].features).log_likelihood;
  }
  return total;
}

struct AlignedState {
  std::size_t position = 0;  // index into the label sequence
  std::string label;
  std::size_t state = 0;  // 1-based emitting state
  friend bool operator==(const AlignedState&, const AlignedState&) = default;
};

struct Alignment {
  std::vector<AlignedState> path;  // one entry per frame
  double log_score = kLogZero;
};

// Viterbi best path through the composite model of `labels`.
inline Alignment forced_align(const HmmSet& set, const FeatureSequence& f, const std::vector<std::string>& labels) {
  const auto c = build_composite(set, labels);
  const std::size_t T = f.frames(), N = c.states.size();
  if (T < c.min_frames) {
    throw AlignmentError("no admissible path: " + std::to_string(T) + " frames, transcript needs at least " +
                         std::to_string(c.min_frames));
  }
  const EmissionScorer scorer(set);
  std::vector<double> b(T * N);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < N; ++j) {
      b[t * N + j] = scorer.log_likelihood(scorer.id(c.states[j].model, c.states[j].state), f.frame(t));
    }
  }
  std::vector<double> delta(T * N, kLogZero);
  std::vector<std::size_t> back(T * N, static_cast<std::size_t>(-1));
  for (const auto& e : c.entries) {
    const double v = e.log_prob + b[e.to];
    if (v > delta[e.to]) delta[e.to] = v;
  }
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < N; ++j) {
      double best = kLogZero;
      std::size_t arg = static_cast<std::size_t>(-1);
      for (auto a : c.arcs_into[j]) {
        const double v = delta[(t - 1) * N + c.arcs[a].from] + c.arcs[a].log_prob;
        if (v > best) {
          best = v;
          arg = c.arcs[a].from;
        }
      }
      if (best != kLogZero) {
        delta[t * N + j] = best + b[t * N + j];
        back[t * N + j] = arg;
      }
    }
  }
  double best = kLogZero;
  std::size_t last = static_cast<std::size_t>(-1);
  for (const auto& e : c.exits) {
    const double v = delta[(T - 1) * N + e.from] + e.log_prob;
    if (v > best) {
      best = v;
      last = e.from;
    }
  }
  if (best == kLogZero) throw AlignmentError("no admissible path through the composite model");
  Alignment out;
  out.log_score = best;
  out.path.resize(T);
  std::size_t s = last;
  for (std::size_t t = T; t-- > 0;) {
    const auto& cs = c.states[s];
    out.path[t] = {cs.position, labels[cs.position], cs.state};
    s = back[t * N + s];
  }
  return out;
}

}  // namespace visunit
