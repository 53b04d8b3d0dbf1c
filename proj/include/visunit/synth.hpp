#pragma once

// Synthetic lipreading corpus with a three-level target geometry: a wide
// vowel/consonant split, a few clusters per category, and small per-phoneme
// offsets inside each cluster. Words are built so that groups of words share
// a cluster pattern and differ only at the phoneme level.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "visunit/corpus.hpp"
#include "visunit/error.hpp"
#include "visunit/lexicon.hpp"
#include "visunit/seed.hpp"

namespace visunit {

struct SynthSpec {
  std::size_t utterances = 200;
  std::size_t words = 20;
  std::size_t group_size = 4;        // words sharing one cluster pattern
  std::size_t clusters = 3;          // per category
  std::size_t dim = 8;
  double category_sep = 10.0;        // distance between the vowel and consonant centres
  double cluster_sep = 6.0;          // distance of cluster centres from their category centre
  double phone_sep = 2.0;            // radius of phoneme offsets inside a cluster
  double noise = 1.0;
  std::size_t min_words = 2;         // per sentence
  std::size_t max_words = 4;
  int min_duration = 3;
  int max_duration = 7;
  int silence_min = 3;
  int silence_max = 6;
  int pause_min = 0;
  int pause_max = 3;
  int crossfade = 0;

  void validate() const {
    if (utterances == 0 || words == 0 || group_size == 0 || clusters == 0) {
      throw ConfigError("synthetic corpus sizes must be positive");
    }
    if (dim < 4) throw ConfigError("synthetic corpus needs at least 4 dimensions");
    if (min_words == 0 || max_words < min_words) throw ConfigError("invalid synthetic sentence lengths");
    if (!(noise >= 0.0) || !(phone_sep >= 0.0) || !(cluster_sep >= 0.0) || !(category_sep >= 0.0)) {
      throw ConfigError("synthetic distances must be non-negative");
    }
  }
};

struct SynthSetup {
  PhoneInventory inventory;
  PronLexicon lexicon;
  SynthModel model;
  P2VMap cluster_map;  // the generator's cluster of every phoneme
  std::vector<std::vector<std::string>> sentences;
  Corpus corpus;
};

// Phonemes of one category split into `k` contiguous clusters in inventory order.
inline std::vector<std::vector<std::string>> split_clusters(const std::vector<std::string>& phones, std::size_t k) {
  std::vector<std::vector<std::string>> out(k);
  for (std::size_t i = 0; i < phones.size(); ++i) out[i * k / phones.size()].push_back(phones[i]);
  return out;
}

inline SynthSetup make_synthetic(const SynthSpec& spec, const PhoneInventory& inventory, std::uint64_t seed) {
  spec.validate();
  std::vector<std::string> vowels, consonants;
  for (const auto& p : inventory.phones()) (p.category == Category::vowel ? vowels : consonants).push_back(p.label);
  if (vowels.size() < spec.clusters || consonants.size() < spec.clusters) {
    throw ConfigError("inventory has fewer phonemes than synthetic clusters");
  }
  const auto vc = split_clusters(vowels, spec.clusters);
  const auto cc = split_clusters(consonants, spec.clusters);

  SynthSetup s{inventory, PronLexicon(inventory), {}, {}, {}, {}};
  const std::size_t D = spec.dim;
  // Modes are the coordinate axes, so coefficients are target coordinates.
  s.model.base.assign(D, 0.0);
  for (std::size_t d = 0; d < D; ++d) {
    std::vector<double> m(D, 0.0);
    m[d] = 1.0;
    s.model.modes.push_back(std::move(m));
  }
  Rng rng(derive_seed(seed, "synth:geometry"));
  std::normal_distribution<double> z(0.0, 1.0);
  auto unit_vector = [&](std::size_t from) {
    std::vector<double> v(D, 0.0);
    double n = 0.0;
    while (n < 1e-9) {
      n = 0.0;
      for (std::size_t d = from; d < D; ++d) {
        v[d] = z(rng);
        n += v[d] * v[d];
      }
    }
    for (auto& x : v) x /= std::sqrt(n);
    return v;
  };
  // Axis 0 separates the categories, axes 1-2 place clusters on a circle
  // around their category centre, the remaining axes carry phoneme offsets.
  std::vector<VisualUnit> units;
  auto place = [&](const std::vector<std::vector<std::string>>& groups, double side, const std::string& prefix) {
    for (std::size_t c = 0; c < groups.size(); ++c) {
      const double angle = 2.0 * 3.141592653589793 * static_cast<double>(c) / static_cast<double>(groups.size());
      std::vector<double> centre(D, 0.0);
      centre[0] = side * spec.category_sep / 2.0;
      centre[1] = spec.cluster_sep * std::cos(angle);
      centre[2] = spec.cluster_sep * std::sin(angle);
      for (const auto& p : groups[c]) {
        auto off = unit_vector(3);
        std::vector<double> t = centre;
        for (std::size_t d = 0; d < D; ++d) t[d] += spec.phone_sep * off[d];
        s.model.coefficients[p] = std::move(t);
      }
      units.push_back({prefix + std::to_string(c + 1), groups[c]});
    }
  };
  place(vc, 1.0, "V");
  place(cc, -1.0, "C");
  std::vector<double> sil(D, 0.0);
  sil[1] = -spec.cluster_sep;
  sil[2] = spec.cluster_sep;
  s.model.coefficients[std::string(kSilence)] = sil;
  s.cluster_map = P2VMap(std::move(units));

  s.model.noise_scale = spec.noise;
  s.model.min_duration = spec.min_duration;
  s.model.max_duration = spec.max_duration;
  s.model.crossfade = spec.crossfade;
  s.model.silence_min = spec.silence_min;
  s.model.silence_max = spec.silence_max;
  s.model.pause_min = spec.pause_min;
  s.model.pause_max = spec.pause_max;

  // CVCVC cluster patterns, each shared by `group_size` words; phonemes are
  // taken round-robin inside a cluster so that every phoneme gets used and
  // words of one group differ at every position.
  const std::size_t K = spec.clusters;
  std::vector<std::size_t> next_v(K, 0), next_c(K, 0);
  std::vector<std::string> words;
  const std::size_t groups = (spec.words + spec.group_size - 1) / spec.group_size;
  for (std::size_t g = 0; g < groups; ++g) {
    // Cluster of each slot: shifts chosen so patterns stay distinct for up to K*K*K groups.
    const std::size_t a = g % K, b = (g / K) % K, c = (g / (K * K)) % K;
    const std::size_t pattern[5] = {a, (a + b) % K, (a + 1) % K, (a + b + c + 1) % K, (a + 2 * b + 2) % K};
    for (std::size_t w = 0; w < spec.group_size && words.size() < spec.words; ++w) {
      Pronunciation pron;
      for (std::size_t slot = 0; slot < 5; ++slot) {
        const bool vowel = slot % 2 == 1;
        const auto& cl = vowel ? vc[pattern[slot]] : cc[pattern[slot]];
        auto& next = vowel ? next_v[pattern[slot]] : next_c[pattern[slot]];
        pron.push_back(cl[next++ % cl.size()]);
      }
      char name[16];
      std::snprintf(name, sizeof(name), "W%02zu", words.size() + 1);
      if (!s.lexicon.add(name, pron)) throw ConfigError("synthetic words collide");
      words.emplace_back(name);
    }
  }
  s.sentences = random_sentences(words, spec.utterances, spec.min_words, spec.max_words,
                                 derive_seed(seed, "synth:sentences"));
  s.corpus = generate_corpus(s.model, s.lexicon, s.sentences, derive_seed(seed, "synth:frames"));
  return s;
}

}  // namespace visunit
