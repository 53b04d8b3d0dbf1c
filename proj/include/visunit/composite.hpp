#pragma once

// Composite (concatenated) models over label sequences, flattened to emitting
// states only, and per-frame emission scoring.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "visunit/corpus.hpp"
#include "visunit/error.hpp"
#include "visunit/hmm.hpp"

namespace visunit {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

inline double safe_log(double p) { return p > 0.0 ? std::log(p) : kLogZero; }

// A transition of an original model that a composite arc passes through.
struct TransitionUse {
  std::size_t model = 0;  // index in the HmmSet
  std::size_t from = 0;
  std::size_t to = 0;
};

struct CompositeState {
  std::size_t position = 0;  // index into the label sequence
  std::size_t model = 0;     // index in the HmmSet
  std::size_t state = 0;     // 1-based emitting state of that model
};

// Arc between emitting states (or from the composite entry / to the composite
// exit), possibly crossing non-emitting entry/exit states and tee models.
struct CompositeArc {
  std::size_t from = 0;
  std::size_t to = 0;
  double log_prob = 0.0;
  std::vector<TransitionUse> uses;
};

struct Composite {
  std::vector<std::string> labels;
  std::vector<CompositeState> states;
  std::vector<CompositeArc> arcs;     // emitting -> emitting
  std::vector<CompositeArc> entries;  // entry -> emitting (`from` unused)
  std::vector<CompositeArc> exits;    // emitting -> exit (`to` unused)
  std::vector<std::vector<std::size_t>> arcs_into;
  std::size_t min_frames = 0;  // shortest admissible observation length
};

namespace detail {

// Emitting states reachable from the entry of position k, crossing tee models.
// Targets past the last position are reported with state index == npos.
inline void reach_from_entry(const HmmSet& set, const std::vector<std::size_t>& models,
                             const std::vector<std::size_t>& first_state, std::size_t k, double log_prob,
                             std::vector<TransitionUse> uses, std::vector<CompositeArc>& out, std::size_t from) {
  if (k == models.size()) {
    out.push_back({from, static_cast<std::size_t>(-1), log_prob, std::move(uses)});
    return;
  }
  const auto& m = set.model(models[k]);
  for (std::size_t j = 1; j <= m.num_states(); ++j) {
    if (m.a(0, j) > 0.0) {
      auto u = uses;
      u.push_back({models[k], 0, j});
      out.push_back({from, first_state[k] + j - 1, log_prob + std::log(m.a(0, j)), std::move(u)});
    }
  }
  if (m.a(0, m.exit_state()) > 0.0) {
    uses.push_back({models[k], 0, m.exit_state()});
    reach_from_entry(set, models, first_state, k + 1, log_prob + std::log(m.a(0, m.exit_state())), std::move(uses),
                     out, from);
  }
}

}  // namespace detail

inline Composite build_composite(const HmmSet& set, const std::vector<std::string>& labels) {
  if (labels.empty()) throw ConfigError("composite model needs at least one label");
  Composite c;
  c.labels = labels;
  std::vector<std::size_t> models;
  std::vector<std::size_t> first_state;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    models.push_back(set.index(labels[k]));
    first_state.push_back(c.states.size());
    const auto& m = set.model(models.back());
    for (std::size_t s = 1; s <= m.num_states(); ++s) c.states.push_back({k, models.back(), s});
  }
  constexpr auto npos = static_cast<std::size_t>(-1);
  std::vector<CompositeArc> tmp;
  detail::reach_from_entry(set, models, first_state, 0, 0.0, {}, tmp, npos);
  for (auto& a : tmp) {
    if (a.to == npos) throw ModelError("composite model can be traversed without emitting");
    c.entries.push_back(std::move(a));
  }
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const auto& m = set.model(models[k]);
    for (std::size_t i = 1; i <= m.num_states(); ++i) {
      const std::size_t from = first_state[k] + i - 1;
      for (std::size_t j = 1; j <= m.num_states(); ++j) {
        if (m.a(i, j) > 0.0) {
          c.arcs.push_back({from, first_state[k] + j - 1, std::log(m.a(i, j)), {{models[k], i, j}}});
        }
      }
      const double out = m.a(i, m.exit_state());
      if (out > 0.0) {
        tmp.clear();
        detail::reach_from_entry(set, models, first_state, k + 1, std::log(out), {{models[k], i, m.exit_state()}},
                                 tmp, from);
        for (auto& a : tmp) {
          if (a.to == npos) {
            c.exits.push_back(std::move(a));
          } else {
            c.arcs.push_back(std::move(a));
          }
        }
      }
    }
  }
  c.arcs_into.assign(c.states.size(), {});
  for (std::size_t a = 0; a < c.arcs.size(); ++a) c.arcs_into[c.arcs[a].to].push_back(a);

  // Shortest path (in emitted frames) from entry to exit.
  std::vector<std::size_t> dist(c.states.size(), npos);
  std::deque<std::size_t> queue;
  for (const auto& e : c.entries) {
    if (dist[e.to] == npos) {
      dist[e.to] = 1;
      queue.push_back(e.to);
    }
  }
  std::vector<std::vector<std::size_t>> succ(c.states.size());
  for (const auto& a : c.arcs) succ[a.from].push_back(a.to);
  while (!queue.empty()) {
    auto s = queue.front();
    queue.pop_front();
    for (auto t : succ[s]) {
      if (dist[t] == npos) {
        dist[t] = dist[s] + 1;
        queue.push_back(t);
      }
    }
  }
  c.min_frames = npos;
  for (const auto& e : c.exits) c.min_frames = std::min(c.min_frames, dist[e.from]);
  if (c.min_frames == npos) throw ModelError("composite model has no path from entry to exit");
  return c;
}

// Log-density evaluator over every emitting state of a set. States are indexed
// by `id(model, state)`.
class EmissionScorer {
 public:
  explicit EmissionScorer(const HmmSet& set) : dim_(set.dim()) {
    for (std::size_t m = 0; m < set.size(); ++m) {
      const auto& model = set.model(m);
      offsets_.push_back(states_.size());
      for (std::size_t s = 1; s <= model.num_states(); ++s) states_.push_back(prepare(model.state(s)));
    }
  }

  std::size_t id(std::size_t model, std::size_t state) const { return offsets_.at(model) + state - 1; }
  std::size_t num_states() const { return states_.size(); }

  double log_likelihood(std::size_t id, std::span<const double> x) const {
    const auto& st = states_[id];
    double total = kLogZero;
    for (std::size_t c = 0; c < st.log_const.size(); ++c) total = log_add(total, component(st, c, x));
    return total;
  }

  // Per-component log(w_c N_c(x)).
  void component_log_likelihoods(std::size_t id, std::span<const double> x, std::vector<double>& out) const {
    const auto& st = states_[id];
    out.resize(st.log_const.size());
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = component(st, c, x);
  }

  // T x num_states table; only columns with `needed[id]` are filled.
  std::vector<double> table(const FeatureSequence& f, const std::vector<char>& needed) const {
    if (f.dim() != dim_) throw ConfigError("feature dimension does not match the model set");
    const std::size_t n = states_.size();
    std::vector<double> out(f.frames() * n, kLogZero);
    for (std::size_t t = 0; t < f.frames(); ++t) {
      auto x = f.frame(t);
      for (std::size_t s = 0; s < n; ++s) {
        if (needed[s]) out[t * n + s] = log_likelihood(s, x);
      }
    }
    return out;
  }

 private:
  struct Prepared {
    std::vector<double> log_const;  // log w + gconst per component
    std::vector<double> means;
    std::vector<double> inv_var;
  };

  Prepared prepare(const MixtureState& st) const {
    Prepared p;
    p.means = st.means;
    p.inv_var.resize(st.variances.size());
    for (std::size_t c = 0; c < st.components(); ++c) {
      double log_det = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) {
        double v = st.variances[c * dim_ + d];
        log_det += std::log(v);
        p.inv_var[c * dim_ + d] = 1.0 / v;
      }
      const double gconst = -0.5 * (static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi) + log_det);
      p.log_const.push_back(safe_log(st.weights[c]) + gconst);
    }
    return p;
  }

  double component(const Prepared& st, std::size_t c, std::span<const double> x) const {
    if (st.log_const[c] == kLogZero) return kLogZero;
    const double* mu = st.means.data() + c * dim_;
    const double* iv = st.inv_var.data() + c * dim_;
    double q = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      const double diff = x[d] - mu[d];
      q += diff * diff * iv[d];
    }
    return st.log_const[c] - 0.5 * q;
  }

  std::size_t dim_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<Prepared> states_;
};

}  // namespace visunit
