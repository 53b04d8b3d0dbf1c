#pragma once

// Left-to-right GMM-HMMs with diagonal covariances, model sets with state
// tying, the model text format and flat-start initialization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "visunit/corpus.hpp"
#include "visunit/error.hpp"
#include "visunit/lexicon.hpp"
#include "visunit/seed.hpp"
#include "visunit/text.hpp"

namespace visunit {

// Diagonal-covariance Gaussian mixture of one emitting state.
struct MixtureState {
  std::size_t dim = 0;
  std::vector<double> weights;    // G
  std::vector<double> means;      // G x dim
  std::vector<double> variances;  // G x dim

  std::size_t components() const { return weights.size(); }
  std::span<const double> mean(std::size_t m) const { return {means.data() + m * dim, dim}; }
  std::span<const double> variance(std::size_t m) const { return {variances.data() + m * dim, dim}; }
  std::span<double> mean(std::size_t m) { return {means.data() + m * dim, dim}; }
  std::span<double> variance(std::size_t m) { return {variances.data() + m * dim, dim}; }

  friend bool operator==(const MixtureState&, const MixtureState&) = default;
};

// States are numbered 0..S+1: 0 is the non-emitting entry, S+1 the
// non-emitting exit, 1..S emit.
struct GmmHmm {
  std::string label;
  std::vector<MixtureState> states;  // emitting states, index s-1 for state s
  std::vector<double> trans;         // (S+2) x (S+2), row-major

  std::size_t num_states() const { return states.size(); }
  std::size_t order() const { return states.size() + 2; }
  std::size_t exit_state() const { return states.size() + 1; }
  double a(std::size_t i, std::size_t j) const { return trans[i * order() + j]; }
  double& a(std::size_t i, std::size_t j) { return trans[i * order() + j]; }
  const MixtureState& state(std::size_t s) const { return states.at(s - 1); }
  MixtureState& state(std::size_t s) { return states.at(s - 1); }

  // True if the model can be traversed without emitting (entry -> exit arc).
  bool is_tee() const { return a(0, exit_state()) > 0.0; }

  friend bool operator==(const GmmHmm&, const GmmHmm&) = default;
};

// Left-to-right topology with self-loops; transitions uniform over legal arcs.
// A one-state model with `tee` gets an entry->exit skip (the short pause).
inline GmmHmm make_left_to_right(std::string label, std::size_t num_states, std::size_t components,
                                 std::size_t dim, bool tee = false) {
  if (num_states == 0 || components == 0 || dim == 0) throw ConfigError("model prototype sizes must be positive");
  GmmHmm h;
  h.label = std::move(label);
  MixtureState st;
  st.dim = dim;
  st.weights.assign(components, 1.0 / static_cast<double>(components));
  st.means.assign(components * dim, 0.0);
  st.variances.assign(components * dim, 1.0);
  h.states.assign(num_states, st);
  const std::size_t n = num_states + 2;
  h.trans.assign(n * n, 0.0);
  if (tee) {
    h.a(0, 1) = 0.5;
    h.a(0, n - 1) = 0.5;
  } else {
    h.a(0, 1) = 1.0;
  }
  for (std::size_t s = 1; s <= num_states; ++s) {
    h.a(s, s) = 0.5;
    h.a(s, s + 1) = 0.5;
  }
  return h;
}

struct StateRef {
  std::string model;
  std::size_t state = 0;  // 1-based emitting index
  friend auto operator<=>(const StateRef&, const StateRef&) = default;
};

// An owner state whose parameters (and accumulated statistics) are shared by
// its aliases.
struct TieRecord {
  StateRef owner;
  std::vector<StateRef> aliases;
  friend bool operator==(const TieRecord&, const TieRecord&) = default;
};

class HmmSet {
 public:
  HmmSet() = default;

  void add(GmmHmm model) {
    if (!is_valid_label(model.label)) throw ConfigError("invalid model label '" + model.label + "'");
    if (index_.count(model.label)) throw ConfigError("duplicate model label '" + model.label + "'");
    if (model.label == kShortPause && model.num_states() != 1) {
      throw ConfigError("the short-pause model must have exactly one emitting state");
    }
    if (dim_ == 0 && !model.states.empty()) dim_ = model.states.front().dim;
    for (const auto& s : model.states) {
      if (s.dim != dim_) throw ConfigError("model '" + model.label + "' dimension differs from the set");
    }
    index_.emplace(model.label, models_.size());
    models_.push_back(std::move(model));
  }

  bool contains(std::string_view label) const { return index_.find(label) != index_.end(); }

  std::size_t index(std::string_view label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw MappingError("no model for label '" + std::string(label) + "'");
    return it->second;
  }

  const GmmHmm& at(std::string_view label) const { return models_[index(label)]; }
  const GmmHmm& model(std::size_t i) const { return models_.at(i); }
  const std::vector<GmmHmm>& models() const { return models_; }
  std::size_t size() const { return models_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<TieRecord>& ties() const { return ties_; }

  const std::vector<double>& variance_floor() const { return floor_; }
  void set_variance_floor(std::vector<double> floor) {
    if (floor.size() != dim_) throw ConfigError("variance floor dimension mismatch");
    for (double f : floor) {
      if (!(f > 0.0)) throw ConfigError("variance floor must be positive");
    }
    floor_ = std::move(floor);
  }

  std::optional<StateRef> owner_of(const StateRef& alias) const {
    for (const auto& t : ties_) {
      for (const auto& a : t.aliases) {
        if (a == alias) return t.owner;
      }
    }
    return std::nullopt;
  }

  bool is_alias(const StateRef& ref) const { return owner_of(ref).has_value(); }

  // Makes `alias` share `owner`'s parameters. Re-tying an alias is rejected:
  // untying is not supported.
  void tie(const StateRef& owner, const StateRef& alias) {
    check_ref(owner);
    check_ref(alias);
    if (owner == alias) throw ConfigError("cannot tie a state to itself");
    if (is_alias(alias)) throw ConfigError("state already tied; untying is unsupported");
    if (is_alias(owner)) throw ConfigError("tie owner is itself an alias");
    for (const auto& t : ties_) {
      if (t.owner == alias) throw ConfigError("tie alias already owns tied states");
    }
    mutable_state(alias) = state(owner);
    for (auto& t : ties_) {
      if (t.owner == owner) {
        t.aliases.push_back(alias);
        return;
      }
    }
    ties_.push_back({owner, {alias}});
  }

  const MixtureState& state(const StateRef& ref) const { return models_[index(ref.model)].state(ref.state); }

  // Replaces a state's emission parameters; updates propagate to tied aliases.
  // Writing an alias directly would untie it and is rejected.
  void set_state(const StateRef& ref, MixtureState params) {
    check_ref(ref);
    if (is_alias(ref)) throw ConfigError("tied state is read-only; untying is unsupported");
    if (params.dim != dim_) throw ConfigError("state dimension mismatch");
    mutable_state(ref) = params;
    for (const auto& t : ties_) {
      if (t.owner == ref) {
        for (const auto& a : t.aliases) mutable_state(a) = params;
      }
    }
  }

  void set_transitions(std::string_view label, std::vector<double> trans) {
    auto& m = models_[index(label)];
    if (trans.size() != m.trans.size()) throw ConfigError("transition matrix size mismatch");
    m.trans = std::move(trans);
  }

  // Direct access for training code; bypasses tie propagation.
  GmmHmm& mutable_model(std::size_t i) { return models_.at(i); }

  // Checks the stochastic and flooring invariants; throws ModelError.
  void validate(double tol = 1e-10) const {
    for (const auto& m : models_) {
      for (std::size_t i = 0; i + 1 < m.order(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < m.order(); ++j) {
          double v = m.a(i, j);
          if (!(v >= 0.0)) throw ModelError("model '" + m.label + "': negative or NaN transition");
          sum += v;
        }
        if (std::abs(sum - 1.0) > tol) throw ModelError("model '" + m.label + "': transition row does not sum to 1");
      }
      for (const auto& s : m.states) {
        double wsum = 0.0;
        for (double w : s.weights) {
          if (!(w >= 0.0)) throw ModelError("model '" + m.label + "': negative mixture weight");
          wsum += w;
        }
        if (std::abs(wsum - 1.0) > tol) throw ModelError("model '" + m.label + "': mixture weights do not sum to 1");
        for (std::size_t k = 0; k < s.variances.size(); ++k) {
          double v = s.variances[k];
          double fl = floor_.empty() ? 0.0 : floor_[k % s.dim];
          if (!(v > 0.0) || v < fl) throw ModelError("model '" + m.label + "': variance below floor");
        }
      }
    }
    for (const auto& t : ties_) {
      check_ref(t.owner);
      for (const auto& a : t.aliases) {
        check_ref(a);
        if (!(state(a) == state(t.owner))) throw ModelError("tied states differ");
      }
    }
  }

  friend bool operator==(const HmmSet& a, const HmmSet& b) {
    return a.models_ == b.models_ && a.ties_ == b.ties_ && a.floor_ == b.floor_;
  }

 private:
  void check_ref(const StateRef& r) const {
    const auto& m = models_[index(r.model)];
    if (r.state < 1 || r.state > m.num_states()) {
      throw ConfigError("model '" + r.model + "' has no emitting state " + std::to_string(r.state));
    }
  }
  MixtureState& mutable_state(const StateRef& r) { return models_[index(r.model)].state(r.state); }

  std::vector<GmmHmm> models_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<TieRecord> ties_;
  std::vector<double> floor_;
  std::size_t dim_ = 0;
};

// Ties the short-pause state to the centre state of silence.
inline HmmSet tie_sp(HmmSet set) {
  if (!set.contains(kSilence)) throw ConfigError("tie_sp: set has no 'sil' model");
  if (!set.contains(kShortPause)) throw ConfigError("tie_sp: set has no 'sp' model");
  const auto& sil = set.at(kSilence);
  if (sil.num_states() % 2 == 0) throw ConfigError("tie_sp: 'sil' needs an odd number of states");
  set.tie({std::string(kSilence), sil.num_states() / 2 + 1}, {std::string(kShortPause), 1});
  return set;
}

inline bool sp_is_tied(const HmmSet& set) {
  return set.contains(kShortPause) && set.is_alias({std::string(kShortPause), 1});
}

// ---------------------------------------------------------------------------
// Model text format.

inline std::string format_hmmset(const HmmSet& set) {
  std::string out = "hmmset " + std::to_string(set.size()) + " dim " + std::to_string(set.dim()) + "\n";
  auto row = [&](std::string_view tag, std::span<const double> v) {
    out += tag;
    for (double x : v) out += " " + text::format_double(x);
    out += '\n';
  };
  if (!set.variance_floor().empty()) row("varfloor", set.variance_floor());
  for (const auto& m : set.models()) {
    const std::size_t g = m.states.empty() ? 0 : m.states.front().components();
    out += "model " + m.label + " states " + std::to_string(m.num_states()) + " mixes " + std::to_string(g) + " dim " +
           std::to_string(set.dim()) + "\n";
    for (std::size_t s = 1; s <= m.num_states(); ++s) {
      const auto& st = m.state(s);
      out += "state " + std::to_string(s) + "\n";
      for (std::size_t c = 0; c < st.components(); ++c) {
        out += "mixture " + std::to_string(c + 1) + " weight " + text::format_double(st.weights[c]) + "\n";
        row("mean", st.mean(c));
        row("var", st.variance(c));
      }
    }
    out += "trans " + std::to_string(m.order()) + "\n";
    for (std::size_t i = 0; i < m.order(); ++i) {
      for (std::size_t j = 0; j < m.order(); ++j) {
        if (j) out += ' ';
        out += text::format_double(m.a(i, j));
      }
      out += '\n';
    }
    out += "endmodel\n";
  }
  for (const auto& t : set.ties()) {
    for (const auto& a : t.aliases) {
      out += "tie " + t.owner.model + " " + std::to_string(t.owner.state) + " " + a.model + " " +
             std::to_string(a.state) + "\n";
    }
  }
  return out;
}

inline HmmSet parse_hmmset(std::string_view content) {
  auto ls = text::lines(content);
  std::size_t i = 0;
  auto fail = [&](const std::string& msg) -> ParseError {
    return ParseError("model file line " + std::to_string(i + 1) + ": " + msg);
  };
  auto next = [&]() -> std::vector<std::string_view> {
    while (i < ls.size()) {
      auto tok = text::split_ws(ls[i]);
      if (!tok.empty()) return tok;
      ++i;
    }
    throw ParseError("model file: unexpected end of input");
  };
  auto nums = [&](const std::vector<std::string_view>& tok, std::size_t from, std::size_t count) {
    if (tok.size() != from + count) throw fail("expected " + std::to_string(count) + " values");
    std::vector<double> v(count);
    for (std::size_t k = 0; k < count; ++k) {
      if (!text::parse_double(tok[from + k], v[k])) throw fail("malformed number '" + std::string(tok[from + k]) + "'");
    }
    return v;
  };
  auto tok = next();
  std::size_t count = 0, dim = 0;
  if (tok.size() != 4 || tok[0] != "hmmset" || !text::parse_int(tok[1], count) || tok[2] != "dim" ||
      !text::parse_int(tok[3], dim)) {
    throw fail("expected 'hmmset <count> dim <D>'");
  }
  ++i;
  HmmSet set;
  std::vector<double> floor;
  std::vector<std::pair<StateRef, StateRef>> ties;
  while (i < ls.size()) {
    if (text::split_ws(ls[i]).empty()) {
      ++i;
      continue;
    }
    tok = next();
    if (tok[0] == "varfloor") {
      floor = nums(tok, 1, dim);
      ++i;
    } else if (tok[0] == "model") {
      std::size_t S = 0, G = 0, D = 0;
      if (tok.size() != 8 || tok[2] != "states" || !text::parse_int(tok[3], S) || tok[4] != "mixes" ||
          !text::parse_int(tok[5], G) || tok[6] != "dim" || !text::parse_int(tok[7], D) || D != dim) {
        throw fail("expected 'model <label> states <S> mixes <G> dim <D>'");
      }
      GmmHmm m;
      m.label = std::string(tok[1]);
      ++i;
      for (std::size_t s = 1; s <= S; ++s) {
        tok = next();
        std::size_t idx = 0;
        if (tok.size() != 2 || tok[0] != "state" || !text::parse_int(tok[1], idx) || idx != s) {
          throw fail("expected 'state " + std::to_string(s) + "'");
        }
        ++i;
        MixtureState st;
        st.dim = D;
        for (std::size_t c = 0; c < G; ++c) {
          tok = next();
          if (tok.size() != 4 || tok[0] != "mixture" || tok[2] != "weight") throw fail("expected mixture line");
          st.weights.push_back(nums(tok, 3, 1)[0]);
          ++i;
          tok = next();
          if (tok[0] != "mean") throw fail("expected 'mean'");
          auto mu = nums(tok, 1, D);
          st.means.insert(st.means.end(), mu.begin(), mu.end());
          ++i;
          tok = next();
          if (tok[0] != "var") throw fail("expected 'var'");
          auto var = nums(tok, 1, D);
          st.variances.insert(st.variances.end(), var.begin(), var.end());
          ++i;
        }
        m.states.push_back(std::move(st));
      }
      tok = next();
      std::size_t n = 0;
      if (tok.size() != 2 || tok[0] != "trans" || !text::parse_int(tok[1], n) || n != S + 2) {
        throw fail("expected 'trans " + std::to_string(S + 2) + "'");
      }
      ++i;
      for (std::size_t r = 0; r < n; ++r) {
        tok = next();
        auto row = nums(tok, 0, n);
        m.trans.insert(m.trans.end(), row.begin(), row.end());
        ++i;
      }
      tok = next();
      if (tok.size() != 1 || tok[0] != "endmodel") throw fail("expected 'endmodel'");
      ++i;
      try {
        set.add(std::move(m));
      } catch (const ConfigError& e) {
        throw fail(e.what());
      }
    } else if (tok[0] == "tie") {
      StateRef owner, alias;
      if (tok.size() != 5 || !text::parse_int(tok[2], owner.state) || !text::parse_int(tok[4], alias.state)) {
        throw fail("expected 'tie <model> <state> <model> <state>'");
      }
      owner.model = std::string(tok[1]);
      alias.model = std::string(tok[3]);
      ties.emplace_back(owner, alias);
      ++i;
    } else {
      throw fail("unexpected '" + std::string(tok[0]) + "'");
    }
  }
  if (set.size() != count) throw ParseError("model file: header says " + std::to_string(count) + " models");
  for (const auto& [o, a] : ties) {
    if (!(set.state(o) == set.state(a))) throw ParseError("model file: tied states have different parameters");
    set.tie(o, a);
  }
  if (!floor.empty()) set.set_variance_floor(std::move(floor));
  return set;
}

inline void write_hmmset(const HmmSet& set, const std::string& path) { text::write_file(path, format_hmmset(set)); }
inline HmmSet read_hmmset(const std::string& path) { return parse_hmmset(text::read_file(path)); }

// ---------------------------------------------------------------------------
// Flat start.

struct ProtoSpec {
  std::size_t states = 3;      // emitting states per model (sp always has one)
  std::size_t components = 5;  // Gaussians per state
  std::size_t dim = 0;         // must match the corpus
};

struct TrainConfig {
  std::size_t iterations = 11;
  double variance_floor_factor = 1e-4;  // fraction of the global variance
  double min_variance = 1e-6;           // absolute lower bound on the floor
  double jitter = 0.01;                 // flat-start mean jitter, in global std units
  double beam = 0.0;                    // occupancy pruning (log domain); 0 disables
  std::uint64_t seed = 0;               // jitter stream
  std::size_t tie_sp_after = 3;         // tie sp to sil after this iteration; 0 = never
  std::size_t threads = 1;

  void validate() const {
    if (iterations < 1) throw ConfigError("at least one re-estimation iteration is required");
    if (!(variance_floor_factor > 0.0)) throw ConfigError("variance floor factor must be positive");
    if (!(min_variance > 0.0)) throw ConfigError("minimum variance must be positive");
    if (jitter < 0.0 || beam < 0.0) throw ConfigError("jitter and beam must be non-negative");
    if (threads == 0) throw ConfigError("thread count must be positive");
  }
};

struct GlobalStats {
  std::vector<double> mean;
  std::vector<double> variance;
  std::size_t frames = 0;
};

inline GlobalStats global_stats(const Corpus& corpus) {
  if (corpus.empty()) throw ConfigError("corpus is empty");
  const std::size_t dim = corpus.front().features.dim();
  GlobalStats g;
  g.mean.assign(dim, 0.0);
  g.variance.assign(dim, 0.0);
  for (const auto& u : corpus) {
    if (u.features.dim() != dim) throw ConfigError("utterance '" + u.id + "' dimension differs");
    for (std::size_t t = 0; t < u.features.frames(); ++t) {
      auto f = u.features.frame(t);
      for (std::size_t d = 0; d < dim; ++d) g.mean[d] += f[d];
    }
    g.frames += u.features.frames();
  }
  for (auto& m : g.mean) m /= static_cast<double>(g.frames);
  for (const auto& u : corpus) {
    for (std::size_t t = 0; t < u.features.frames(); ++t) {
      auto f = u.features.frame(t);
      for (std::size_t d = 0; d < dim; ++d) {
        double x = f[d] - g.mean[d];
        g.variance[d] += x * x;
      }
    }
  }
  for (auto& v : g.variance) v /= static_cast<double>(g.frames);
  return g;
}

inline std::vector<double> variance_floor(const GlobalStats& g, const TrainConfig& cfg) {
  std::vector<double> floor(g.variance.size());
  for (std::size_t d = 0; d < floor.size(); ++d) {
    floor[d] = std::max(cfg.variance_floor_factor * g.variance[d], cfg.min_variance);
  }
  return floor;
}

// Every model starts from the global mean and variance, so all models are equal
// apart from the seeded jitter on component means (none when cfg.jitter == 0).
inline HmmSet flat_start(const Corpus& corpus, const std::vector<std::string>& labels, const ProtoSpec& proto,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (labels.empty()) throw ConfigError("flat start needs at least one label");
  auto g = global_stats(corpus);
  if (proto.dim != g.mean.size()) {
    throw ConfigError("prototype dimension " + std::to_string(proto.dim) + " does not match corpus dimension " +
                      std::to_string(g.mean.size()));
  }
  auto floor = variance_floor(g, cfg);
  HmmSet set;
  for (const auto& label : labels) {
    const bool sp = label == kShortPause;
    GmmHmm m = make_left_to_right(label, sp ? 1 : proto.states, proto.components, proto.dim, sp);
    Rng rng(derive_seed(cfg.seed, "jitter:" + label));
    std::normal_distribution<double> z(0.0, 1.0);
    for (auto& st : m.states) {
      for (std::size_t c = 0; c < st.components(); ++c) {
        auto mu = st.mean(c);
        auto var = st.variance(c);
        for (std::size_t d = 0; d < proto.dim; ++d) {
          mu[d] = g.mean[d];
          if (cfg.jitter > 0.0) mu[d] += cfg.jitter * std::sqrt(g.variance[d]) * z(rng);
          var[d] = std::max(g.variance[d], floor[d]);
        }
      }
    }
    set.add(std::move(m));
  }
  set.set_variance_floor(std::move(floor));
  return set;
}

// Labels needed to model a set of transcripts (in first-seen order).
inline std::vector<std::string> collect_labels(const std::vector<std::vector<std::string>>& transcripts) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& t : transcripts) {
    for (const auto& l : t) {
      if (seen.insert(l).second) out.push_back(l);
    }
  }
  return out;
}

}  // namespace visunit
