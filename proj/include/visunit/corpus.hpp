#pragma once

// Feature sequences, the linear-model synthetic generator, corpus text I/O and
// cross-validation fold planning.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "visunit/error.hpp"
#include "visunit/lexicon.hpp"
#include "visunit/seed.hpp"
#include "visunit/text.hpp"

namespace visunit {

inline constexpr double kDefaultFramePeriod = 0.04;  // 25 frames per second

// T x D row-major frames.
class FeatureSequence {
 public:
  FeatureSequence() = default;

  FeatureSequence(std::size_t dim, std::vector<double> values, double frame_period = kDefaultFramePeriod)
      : dim_(dim), values_(std::move(values)), frame_period_(frame_period) {
    if (dim_ == 0) throw ConfigError("feature dimension must be positive");
    if (values_.empty() || values_.size() % dim_ != 0) {
      throw ConfigError("feature sequence needs at least one complete frame");
    }
    if (!(frame_period_ > 0.0)) throw ConfigError("frame period must be positive");
    for (double v : values_) {
      if (!std::isfinite(v)) throw ConfigError("feature values must be finite");
    }
  }

  std::size_t frames() const { return dim_ ? values_.size() / dim_ : 0; }
  std::size_t dim() const { return dim_; }
  double frame_period() const { return frame_period_; }
  std::span<const double> frame(std::size_t t) const { return {values_.data() + t * dim_, dim_}; }
  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const FeatureSequence&, const FeatureSequence&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
  double frame_period_ = kDefaultFramePeriod;
};

struct Utterance {
  std::string id;
  FeatureSequence features;
  std::vector<std::string> words;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

using Corpus = std::vector<Utterance>;

// Linear generative model: target(phone) = base + sum_i modes[i] * coefficients[phone][i].
// Silence and pauses use the "sil" coefficients when present, else the base vector.
struct SynthModel {
  std::vector<double> base;
  std::vector<std::vector<double>> modes;
  std::map<std::string, std::vector<double>> coefficients;
  double noise_scale = 0.0;
  int min_duration = 3;
  int max_duration = 9;
  int crossfade = 0;
  int silence_min = 0;  // leading/trailing "sil" frames
  int silence_max = 0;
  int pause_min = 0;  // frames of pause between words
  int pause_max = 0;
  double frame_period = kDefaultFramePeriod;

  std::size_t dim() const { return base.size(); }

  void validate() const {
    if (base.empty()) throw ConfigError("synth model needs a base vector");
    if (modes.empty()) throw ConfigError("synth model needs at least one mode");
    for (const auto& m : modes) {
      if (m.size() != base.size()) throw ConfigError("synth mode dimension differs from base");
    }
    for (const auto& [p, c] : coefficients) {
      if (c.size() != modes.size()) throw ConfigError("phone '" + p + "' coefficient count differs from modes");
    }
    if (min_duration < 1 || max_duration < min_duration) throw ConfigError("invalid duration range");
    if (noise_scale < 0.0) throw ConfigError("noise scale must be non-negative");
    if (crossfade < 0 || silence_min < 0 || silence_max < silence_min || pause_min < 0 || pause_max < pause_min) {
      throw ConfigError("invalid silence, pause or cross-fade settings");
    }
  }

  std::vector<double> target(std::string_view phone) const {
    std::vector<double> out = base;
    auto it = coefficients.find(std::string(phone));
    if (it == coefficients.end()) {
      if (phone == kSilence) return out;
      throw MappingError("synth model has no coefficients for '" + std::string(phone) + "'");
    }
    for (std::size_t i = 0; i < modes.size(); ++i) {
      for (std::size_t d = 0; d < out.size(); ++d) out[d] += modes[i][d] * it->second[i];
    }
    return out;
  }
};

// One labeled run of frames inside a generated utterance.
struct Segment {
  std::string label;  // phoneme or "sil"
  std::size_t start = 0;
  std::size_t frames = 0;
};

struct GeneratedUtterance {
  Utterance utterance;
  std::vector<Segment> segments;
};

inline std::vector<GeneratedUtterance> generate_corpus_detailed(const SynthModel& model, const PronLexicon& lex,
                                                                const std::vector<std::vector<std::string>>& sentences,
                                                                std::uint64_t seed) {
  model.validate();
  for (const auto& s : sentences) {
    if (s.empty()) throw ConfigError("empty sentence");
    for (const auto& w : s) {
      if (!lex.find(w)) throw MappingError("sentence word '" + w + "' not in lexicon");
    }
  }
  std::map<std::string, std::vector<double>> targets;
  auto target_of = [&](const std::string& p) -> const std::vector<double>& {
    auto it = targets.find(p);
    if (it == targets.end()) it = targets.emplace(p, model.target(p)).first;
    return it->second;
  };

  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t dim = model.dim();
  std::vector<GeneratedUtterance> out;
  out.reserve(sentences.size());
  for (std::size_t n = 0; n < sentences.size(); ++n) {
    std::vector<Segment> segs;
    auto draw = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    std::size_t t = 0;
    auto push = [&](const std::string& label, int frames) {
      if (frames <= 0) return;
      segs.push_back({label, t, static_cast<std::size_t>(frames)});
      t += static_cast<std::size_t>(frames);
    };
    push(std::string(kSilence), draw(model.silence_min, model.silence_max));
    const auto& words = sentences[n];
    for (std::size_t w = 0; w < words.size(); ++w) {
      if (w > 0) push(std::string(kSilence), draw(model.pause_min, model.pause_max));
      for (const auto& p : lex.pronunciation(words[w])) push(p, draw(model.min_duration, model.max_duration));
    }
    push(std::string(kSilence), draw(model.silence_min, model.silence_max));

    std::vector<double> values(t * dim);
    for (std::size_t s = 0; s < segs.size(); ++s) {
      const auto& cur = target_of(segs[s].label);
      const std::vector<double>* prev = s > 0 ? &target_of(segs[s - 1].label) : nullptr;
      for (std::size_t k = 0; k < segs[s].frames; ++k) {
        double* frame = values.data() + (segs[s].start + k) * dim;
        const bool fade = prev && static_cast<int>(k) < model.crossfade;
        const double a = fade ? static_cast<double>(k + 1) / static_cast<double>(model.crossfade + 1) : 1.0;
        for (std::size_t d = 0; d < dim; ++d) {
          frame[d] = fade ? (*prev)[d] + (cur[d] - (*prev)[d]) * a : cur[d];
        }
      }
    }
    if (model.noise_scale > 0.0) {
      for (double& v : values) v += model.noise_scale * noise(rng);
    }
    char id[32];
    std::snprintf(id, sizeof(id), "utt%04zu", n + 1);
    Utterance utt{id, FeatureSequence(dim, std::move(values), model.frame_period), words};
    for (auto& w : utt.words) w = text::to_upper(w);
    out.push_back({std::move(utt), std::move(segs)});
  }
  return out;
}

// Identical (model, lexicon, sentences, seed) give bit-identical corpora.
inline Corpus generate_corpus(const SynthModel& model, const PronLexicon& lex,
                              const std::vector<std::vector<std::string>>& sentences, std::uint64_t seed) {
  Corpus out;
  for (auto& g : generate_corpus_detailed(model, lex, sentences, seed)) out.push_back(std::move(g.utterance));
  return out;
}

// Corpus text: header "corpus dim <D> rate <fps>", then per utterance
// "utt <id> frames <T> words <w1> ..." and T lines of D decimals.
inline std::string format_corpus(const Corpus& utts) {
  if (utts.empty()) throw ConfigError("cannot write an empty corpus");
  const std::size_t dim = utts.front().features.dim();
  const double period = utts.front().features.frame_period();
  std::string out = "corpus dim " + std::to_string(dim) + " rate " + text::format_double(1.0 / period) + "\n";
  for (const auto& u : utts) {
    if (u.features.dim() != dim) throw ConfigError("utterance '" + u.id + "' has a different dimension");
    out += "utt " + u.id + " frames " + std::to_string(u.features.frames()) + " words";
    for (const auto& w : u.words) out += " " + w;
    out += '\n';
    for (std::size_t t = 0; t < u.features.frames(); ++t) {
      auto f = u.features.frame(t);
      for (std::size_t d = 0; d < dim; ++d) {
        if (d) out += ' ';
        out += text::format_double(f[d]);
      }
      out += '\n';
    }
  }
  return out;
}

inline Corpus parse_corpus(std::string_view content) {
  auto ls = text::lines(content);
  std::size_t i = 0;
  auto where = [&](std::size_t line) { return "corpus line " + std::to_string(line + 1); };
  while (i < ls.size() && text::trim(ls[i]).empty()) ++i;
  if (i >= ls.size()) throw ParseError("corpus: missing header");
  auto head = text::split_ws(ls[i]);
  std::size_t dim = 0;
  double rate = 0.0;
  if (head.size() != 5 || head[0] != "corpus" || head[1] != "dim" || head[3] != "rate" ||
      !text::parse_int(head[2], dim) || !text::parse_double(head[4], rate) || dim == 0 || !(rate > 0.0)) {
    throw ParseError(where(i) + ": expected 'corpus dim <D> rate <fps>'");
  }
  ++i;
  Corpus out;
  while (i < ls.size()) {
    if (text::trim(ls[i]).empty()) {
      ++i;
      continue;
    }
    auto tok = text::split_ws(ls[i]);
    std::size_t frames = 0;
    if (tok.size() < 5 || tok[0] != "utt" || tok[2] != "frames" || tok[4] != "words" ||
        !text::parse_int(tok[3], frames)) {
      throw ParseError(where(i) + ": expected 'utt <id> frames <T> words ...'");
    }
    std::string id(tok[1]);
    if (frames == 0) throw ParseError(where(i) + ": utterance '" + id + "' has no frames");
    std::vector<std::string> words;
    for (std::size_t k = 5; k < tok.size(); ++k) words.push_back(text::to_upper(tok[k]));
    if (words.empty()) throw ParseError(where(i) + ": utterance '" + id + "' has no words");
    ++i;
    std::vector<double> values;
    values.reserve(frames * dim);
    for (std::size_t t = 0; t < frames; ++t, ++i) {
      if (i >= ls.size()) throw ParseError("corpus: utterance '" + id + "' truncated");
      auto nums = text::split_ws(ls[i]);
      if (nums.size() != dim) {
        throw ParseError(where(i) + ": utterance '" + id + "' frame has " + std::to_string(nums.size()) +
                         " values, header dim is " + std::to_string(dim));
      }
      for (auto n : nums) {
        double v = 0.0;
        if (!text::parse_double(n, v) || !std::isfinite(v)) {
          throw ParseError(where(i) + ": utterance '" + id + "' malformed number '" + std::string(n) + "'");
        }
        values.push_back(v);
      }
    }
    out.push_back({id, FeatureSequence(dim, std::move(values), 1.0 / rate), std::move(words)});
  }
  return out;
}

inline void write_corpus(const Corpus& utts, const std::string& path) { text::write_file(path, format_corpus(utts)); }
inline Corpus read_corpus(const std::string& path) { return parse_corpus(text::read_file(path)); }

// Throws unless every utterance word resolves in the lexicon.
inline void check_corpus_words(const Corpus& utts, const PronLexicon& lex) {
  for (const auto& u : utts) {
    for (const auto& w : u.words) {
      if (!lex.find(w)) throw MappingError("utterance '" + u.id + "': word '" + w + "' not in lexicon");
    }
  }
}

struct Fold {
  std::vector<std::size_t> test;   // indices into the corpus
  std::vector<std::size_t> train;  // the remaining utterances, in corpus order
  friend bool operator==(const Fold&, const Fold&) = default;
};

struct FoldPlan {
  std::vector<Fold> folds;
  std::uint64_t seed = 0;
  friend bool operator==(const FoldPlan&, const FoldPlan&) = default;
};

// Each fold draws test_size distinct utterances independently of the other
// folds, so an utterance may be tested in several folds but never twice in one.
inline FoldPlan plan_folds(std::size_t corpus_size, std::size_t k, std::size_t test_size, std::uint64_t seed) {
  if (k == 0) throw ConfigError("fold count must be positive");
  if (test_size == 0) throw ConfigError("test size must be positive");
  if (test_size > corpus_size) throw ConfigError("test size exceeds corpus size");
  if (test_size == corpus_size) throw ConfigError("test size leaves an empty training set");
  FoldPlan plan;
  plan.seed = seed;
  Rng rng(seed);
  std::vector<std::size_t> all(corpus_size);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t f = 0; f < k; ++f) {
    Fold fold;
    std::sample(all.begin(), all.end(), std::back_inserter(fold.test), static_cast<std::ptrdiff_t>(test_size), rng);
    std::vector<char> is_test(corpus_size, 0);
    for (auto t : fold.test) is_test[t] = 1;
    for (std::size_t i = 0; i < corpus_size; ++i) {
      if (!is_test[i]) fold.train.push_back(i);
    }
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

inline FoldPlan plan_folds(const Corpus& utts, std::size_t k, std::size_t test_size, std::uint64_t seed) {
  return plan_folds(utts.size(), k, test_size, seed);
}

// Fold file: "fold <i> test <id> ..." and "fold <i> train <id> ..." lines.
inline std::string format_folds(const FoldPlan& plan, const Corpus& utts) {
  std::string out = "seed " + std::to_string(plan.seed) + "\n";
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    for (int part = 0; part < 2; ++part) {
      const auto& idx = part == 0 ? plan.folds[f].test : plan.folds[f].train;
      out += "fold " + std::to_string(f) + (part == 0 ? " test" : " train");
      for (auto i : idx) out += " " + utts.at(i).id;
      out += '\n';
    }
  }
  return out;
}

inline FoldPlan parse_folds(std::string_view content, const Corpus& utts) {
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < utts.size(); ++i) index.emplace(utts[i].id, i);
  FoldPlan plan;
  std::size_t lineno = 0;
  for (auto line : text::lines(content)) {
    ++lineno;
    auto tok = text::split_ws(line);
    if (tok.empty()) continue;
    std::string where = "fold line " + std::to_string(lineno);
    if (tok[0] == "seed" && tok.size() == 2 && text::parse_int(tok[1], plan.seed)) continue;
    std::size_t f = 0;
    if (tok.size() < 3 || tok[0] != "fold" || !text::parse_int(tok[1], f) || (tok[2] != "test" && tok[2] != "train")) {
      throw ParseError(where + ": expected 'fold <i> test|train <ids>'");
    }
    if (plan.folds.size() <= f) plan.folds.resize(f + 1);
    auto& dst = tok[2] == "test" ? plan.folds[f].test : plan.folds[f].train;
    for (std::size_t k = 3; k < tok.size(); ++k) {
      auto it = index.find(tok[k]);
      if (it == index.end()) throw ParseError(where + ": unknown utterance '" + std::string(tok[k]) + "'");
      dst.push_back(it->second);
    }
  }
  return plan;
}

// Random sentences of uniformly drawn words (lengths in [min_len, max_len]).
inline std::vector<std::vector<std::string>> random_sentences(const std::vector<std::string>& words, std::size_t count,
                                                              std::size_t min_len, std::size_t max_len,
                                                              std::uint64_t seed) {
  if (words.empty() || min_len == 0 || max_len < min_len) throw ConfigError("invalid sentence settings");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  std::vector<std::vector<std::string>> out(count);
  for (auto& s : out) {
    std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) s.push_back(words[pick(rng)]);
  }
  return out;
}

inline Corpus subset(const Corpus& utts, const std::vector<std::size_t>& idx) {
  Corpus out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(utts.at(i));
  return out;
}

}  // namespace visunit
