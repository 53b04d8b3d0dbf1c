#pragma once

// Hierarchical training: visual-unit models are trained first, cloned into
// per-phoneme initial models and retrained on phoneme transcripts.

#include <string>
#include <utility>
#include <vector>

#include "visunit/corpus.hpp"
#include "visunit/error.hpp"
#include "visunit/hmm.hpp"
#include "visunit/lexicon.hpp"
#include "visunit/train.hpp"

namespace visunit {

// unit -> phonemes initialised from it. Same text layout as a P2V map.
struct CloneRecord {
  std::vector<std::pair<std::string, std::vector<std::string>>> units;
  friend bool operator==(const CloneRecord&, const CloneRecord&) = default;
};

inline std::string format_clone_record(const CloneRecord& r) {
  std::string out;
  for (const auto& [u, ps] : r.units) out += u + ": " + text::join(ps, " ") + "\n";
  return out;
}

inline CloneRecord parse_clone_record(std::string_view content) {
  CloneRecord r;
  const auto map = parse_p2v(content);
  for (const auto& u : map.units()) r.units.emplace_back(u.label, u.phonemes);
  return r;
}

struct CloneResult {
  HmmSet set;
  CloneRecord record;
};

// Copies each unit model (emissions and transitions) once per phoneme of the
// unit. sil and sp are carried over, including the sp tie.
inline CloneResult clone_models(const HmmSet& visual, const P2VMap& map) {
  for (const auto& u : map.units()) {
    if (!visual.contains(u.label)) throw MappingError("no model for visual unit '" + u.label + "'");
  }
  CloneResult out;
  for (const auto& m : visual.models()) {
    if (m.label == kSilence || m.label == kShortPause) {
      out.set.add(m);
      continue;
    }
    const auto* unit = map.find_unit(m.label);
    if (!unit) continue;
    out.record.units.emplace_back(unit->label, unit->phonemes);
    for (const auto& p : unit->phonemes) {
      GmmHmm copy = m;
      copy.label = p;
      out.set.add(std::move(copy));
    }
  }
  if (!visual.variance_floor().empty()) out.set.set_variance_floor(visual.variance_floor());
  for (const auto& t : visual.ties()) {
    for (const auto& a : t.aliases) {
      if (out.set.contains(t.owner.model) && out.set.contains(a.model)) out.set.tie(t.owner, a);
    }
  }
  return out;
}

struct HierarchicalResult {
  HmmSet visual;
  HmmSet phoneme;
  CloneRecord record;
  std::vector<double> visual_trace;
  std::vector<double> phoneme_trace;
};

// Flat start and re-estimation on visual-unit transcripts, clone, then
// re-estimation on phoneme transcripts of the same utterances.
inline HierarchicalResult hierarchical_train(const Corpus& train, const PronLexicon& lex, const P2VMap& map,
                                             const ProtoSpec& proto, const TrainConfig& cfg,
                                             const LabelOptions& labels = {}) {
  const P2VMap covered = cover_lexicon(map, lex, CoverageMode::lenient);
  std::vector<std::vector<std::string>> unit_tr, phone_tr;
  for (const auto& u : train) {
    unit_tr.push_back(training_labels(u.words, lex, Granularity::visual_unit, &covered, labels));
    phone_tr.push_back(training_labels(u.words, lex, Granularity::phoneme, nullptr, labels));
  }
  auto init = flat_start(train, collect_labels(unit_tr), proto, cfg);
  auto step2 = embedded_reestimate(std::move(init), train, unit_tr, cfg);
  auto cloned = clone_models(step2.set, covered);
  auto step4 = embedded_reestimate(cloned.set, train, phone_tr, cfg);
  return {std::move(step2.set), std::move(step4.set), std::move(cloned.record), std::move(step2.log_likelihood),
          std::move(step4.log_likelihood)};
}

}  // namespace visunit
