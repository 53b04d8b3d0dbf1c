#pragma once

// Pronunciation dictionary, phoneme inventory with vowel/consonant classes,
// phoneme-to-visual-unit (P2V) maps and homophene analysis.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "visunit/error.hpp"
#include "visunit/text.hpp"

namespace visunit {

enum class Category { vowel, consonant };

inline char category_code(Category c) { return c == Category::vowel ? 'V' : 'C'; }

struct Phone {
  std::string label;
  Category category = Category::consonant;
};

// Labels are used as tokens in every file format, so they may not contain
// whitespace or the separators used by the map and trace formats.
inline bool is_valid_label(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ':' || c == '+' || c == '|') return false;
  }
  return true;
}

class PhoneInventory {
 public:
  PhoneInventory() = default;

  explicit PhoneInventory(std::vector<Phone> phones) : phones_(std::move(phones)) {
    for (std::size_t i = 0; i < phones_.size(); ++i) {
      const auto& p = phones_[i];
      if (!is_valid_label(p.label)) throw ConfigError("invalid phone label '" + p.label + "'");
      if (!index_.emplace(p.label, i).second) throw ConfigError("duplicate phone label '" + p.label + "'");
    }
  }

  // Text form: one "label V|C" per line, ";;;" comments.
  static PhoneInventory parse(std::string_view content) {
    std::vector<Phone> phones;
    std::size_t lineno = 0;
    for (auto line : text::lines(content)) {
      ++lineno;
      auto t = text::trim(line);
      if (t.empty() || t.substr(0, 3) == ";;;") continue;
      auto tok = text::split_ws(t);
      if (tok.size() != 2 || (tok[1] != "V" && tok[1] != "C")) {
        throw ParseError("inventory line " + std::to_string(lineno) + ": expected '<label> V|C'");
      }
      phones.push_back({std::string(tok[0]), tok[1] == "V" ? Category::vowel : Category::consonant});
    }
    return PhoneInventory(std::move(phones));
  }

  std::string format() const {
    std::string out;
    for (const auto& p : phones_) {
      out += p.label;
      out += ' ';
      out += category_code(p.category);
      out += '\n';
    }
    return out;
  }

  // 45 British English phonemes: 21 vowels, 24 consonants. The ASCII
  // spelling follows the BEEP dictionary plus "e" for the short front vowel.
  // data/british45.phones carries the same table with glyph annotations.
  static PhoneInventory british45() {
    static const char* const vowels[] = {"aa", "ae", "ah", "ao", "aw", "ax", "ay", "e",  "ea", "eh", "er",
                                         "ey", "ia", "ih", "iy", "oh", "ow", "oy", "ua", "uh", "uw"};
    static const char* const consonants[] = {"b", "ch", "d",  "dh", "f", "g", "hh", "jh", "k", "l", "m", "n",
                                             "ng", "p", "r", "s", "sh", "t", "th", "v", "w", "y", "z", "zh"};
    std::vector<Phone> phones;
    for (const char* v : vowels) phones.push_back({v, Category::vowel});
    for (const char* c : consonants) phones.push_back({c, Category::consonant});
    return PhoneInventory(std::move(phones));
  }

  bool contains(std::string_view label) const { return index_.find(label) != index_.end(); }

  Category category(std::string_view label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw MappingError("phoneme '" + std::string(label) + "' not in inventory");
    return phones_[it->second].category;
  }

  const std::vector<Phone>& phones() const { return phones_; }
  std::size_t size() const { return phones_.size(); }

  std::map<std::string, Category> categories() const {
    std::map<std::string, Category> out;
    for (const auto& p : phones_) out.emplace(p.label, p.category);
    return out;
  }

  friend bool operator==(const PhoneInventory& a, const PhoneInventory& b) {
    if (a.phones_.size() != b.phones_.size()) return false;
    for (std::size_t i = 0; i < a.phones_.size(); ++i) {
      if (a.phones_[i].label != b.phones_[i].label || a.phones_[i].category != b.phones_[i].category) return false;
    }
    return true;
  }

 private:
  std::vector<Phone> phones_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

using Pronunciation = std::vector<std::string>;

// Word -> single pronunciation. Words are stored upper case; insertion order is
// kept so that every derived grouping is deterministic.
class PronLexicon {
 public:
  PronLexicon() = default;
  explicit PronLexicon(PhoneInventory inventory) : inventory_(std::move(inventory)) {}

  // Returns false (and records a warning) when the word already exists.
  bool add(std::string_view word, Pronunciation pron) {
    std::string key = text::to_upper(word);
    if (!is_valid_label(key)) throw ConfigError("invalid word '" + key + "'");
    if (pron.empty()) throw ConfigError("empty pronunciation for '" + key + "'");
    for (const auto& p : pron) {
      if (!inventory_.contains(p)) throw MappingError("word '" + key + "': unknown phoneme '" + p + "'");
    }
    if (entries_.count(key)) {
      warnings_.push_back("duplicate word '" + key + "': keeping first pronunciation");
      return false;
    }
    entries_.emplace(key, std::move(pron));
    order_.push_back(std::move(key));
    return true;
  }

  const Pronunciation* find(std::string_view word) const {
    auto it = entries_.find(text::to_upper(word));
    return it == entries_.end() ? nullptr : &it->second;
  }

  const Pronunciation& pronunciation(std::string_view word) const {
    if (auto* p = find(word)) return *p;
    throw MappingError("word '" + std::string(word) + "' not in lexicon");
  }

  const std::vector<std::string>& words() const { return order_; }
  std::size_t size() const { return order_.size(); }
  bool empty() const { return order_.empty(); }
  const PhoneInventory& inventory() const { return inventory_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Phonemes used by at least one entry, sorted.
  std::vector<std::string> phonemes_used() const {
    std::set<std::string> s;
    for (const auto& [w, pron] : entries_) s.insert(pron.begin(), pron.end());
    return {s.begin(), s.end()};
  }

  std::string format() const {
    std::string out;
    for (const auto& w : order_) {
      out += w;
      for (const auto& p : entries_.at(w)) {
        out += ' ';
        out += p;
      }
      out += '\n';
    }
    return out;
  }

 private:
  PhoneInventory inventory_;
  std::map<std::string, Pronunciation, std::less<>> entries_;
  std::vector<std::string> order_;
  std::vector<std::string> warnings_;
};

// Dictionary text: "WORD PH1 PH2 ..." per line, ";;;" comments.
inline PronLexicon parse_lexicon(std::string_view content, const PhoneInventory& inventory) {
  PronLexicon lex(inventory);
  std::size_t lineno = 0;
  for (auto line : text::lines(content)) {
    ++lineno;
    auto t = text::trim(line);
    if (t.empty() || t.substr(0, 3) == ";;;") continue;
    auto tok = text::split_ws(t);
    std::string where = "lexicon line " + std::to_string(lineno);
    if (tok.size() < 2) throw ParseError(where + ": empty pronunciation for '" + std::string(tok[0]) + "'");
    Pronunciation pron;
    for (std::size_t i = 1; i < tok.size(); ++i) {
      if (!inventory.contains(tok[i])) {
        throw ParseError(where + ": unknown phoneme '" + std::string(tok[i]) + "'");
      }
      pron.emplace_back(tok[i]);
    }
    lex.add(tok[0], std::move(pron));
  }
  return lex;
}

enum class Granularity { visual_unit, phoneme, word };

inline std::string_view granularity_name(Granularity g) {
  switch (g) {
    case Granularity::visual_unit: return "viseme";
    case Granularity::phoneme: return "phoneme";
    case Granularity::word: return "word";
  }
  return "?";
}

inline Granularity parse_granularity(std::string_view s) {
  if (s == "viseme" || s == "visual" || s == "visual_unit" || s == "unit") return Granularity::visual_unit;
  if (s == "phoneme") return Granularity::phoneme;
  if (s == "word") return Granularity::word;
  throw ConfigError("unknown unit granularity '" + std::string(s) + "'");
}

struct Transcript {
  Granularity granularity = Granularity::word;
  std::vector<std::string> labels;
};

struct VisualUnit {
  std::string label;
  std::vector<std::string> phonemes;
};

// A labeled partition of (a subset of) the phoneme inventory.
class P2VMap {
 public:
  P2VMap() = default;

  explicit P2VMap(std::vector<VisualUnit> units) : units_(std::move(units)) {
    std::set<std::string> labels;
    for (std::size_t u = 0; u < units_.size(); ++u) {
      const auto& unit = units_[u];
      if (!is_valid_label(unit.label)) throw ConfigError("invalid unit label '" + unit.label + "'");
      if (!labels.insert(unit.label).second) throw ConfigError("duplicate unit label '" + unit.label + "'");
      if (unit.phonemes.empty()) throw ConfigError("unit '" + unit.label + "' has no phonemes");
      for (const auto& p : unit.phonemes) {
        if (!is_valid_label(p)) throw ConfigError("invalid phoneme label '" + p + "'");
        if (!phoneme_to_unit_.emplace(p, u).second) {
          throw ConfigError("phoneme '" + p + "' appears in more than one unit");
        }
      }
    }
  }

  // Every phoneme its own unit, named after itself.
  static P2VMap identity(const std::vector<std::string>& phonemes) {
    std::vector<VisualUnit> units;
    for (const auto& p : phonemes) units.push_back({p, {p}});
    return P2VMap(std::move(units));
  }

  std::size_t size() const { return units_.size(); }
  const std::vector<VisualUnit>& units() const { return units_; }

  const std::string* unit_of(std::string_view phoneme) const {
    auto it = phoneme_to_unit_.find(phoneme);
    return it == phoneme_to_unit_.end() ? nullptr : &units_[it->second].label;
  }

  const VisualUnit* find_unit(std::string_view label) const {
    for (const auto& u : units_) {
      if (u.label == label) return &u;
    }
    return nullptr;
  }

  bool covers(std::string_view phoneme) const { return unit_of(phoneme) != nullptr; }

  std::vector<std::string> phonemes() const {
    std::vector<std::string> out;
    for (const auto& [p, u] : phoneme_to_unit_) out.push_back(p);
    return out;
  }

  // Throws if a unit mixes vowels and consonants or uses unknown phonemes.
  void check_categories(const PhoneInventory& inventory) const {
    for (const auto& unit : units_) {
      std::optional<Category> cat;
      for (const auto& p : unit.phonemes) {
        Category c = inventory.category(p);
        if (cat && *cat != c) throw ConfigError("unit '" + unit.label + "' mixes vowels and consonants");
        cat = c;
      }
    }
  }

  friend bool operator==(const P2VMap& a, const P2VMap& b) {
    if (a.units_.size() != b.units_.size()) return false;
    for (std::size_t i = 0; i < a.units_.size(); ++i) {
      if (a.units_[i].label != b.units_[i].label || a.units_[i].phonemes != b.units_[i].phonemes) return false;
    }
    return true;
  }

 private:
  std::vector<VisualUnit> units_;
  std::map<std::string, std::size_t, std::less<>> phoneme_to_unit_;
};

// P2V map text: "unitLabel: ph1 ph2 ..." one unit per line. format_p2v(parse_p2v(t)) == t
// for text written by format_p2v.
inline P2VMap parse_p2v(std::string_view content) {
  std::vector<VisualUnit> units;
  std::size_t lineno = 0;
  for (auto line : text::lines(content)) {
    ++lineno;
    auto t = text::trim(line);
    if (t.empty() || t.substr(0, 3) == ";;;") continue;
    auto colon = t.find(':');
    if (colon == std::string_view::npos) {
      throw ParseError("p2v line " + std::to_string(lineno) + ": expected 'unit: phonemes'");
    }
    VisualUnit unit;
    unit.label = std::string(text::trim(t.substr(0, colon)));
    for (auto tok : text::split_ws(t.substr(colon + 1))) unit.phonemes.emplace_back(tok);
    if (unit.phonemes.empty()) {
      throw ParseError("p2v line " + std::to_string(lineno) + ": unit '" + unit.label + "' has no phonemes");
    }
    units.push_back(std::move(unit));
  }
  try {
    return P2VMap(std::move(units));
  } catch (const ConfigError& e) {
    throw ParseError(std::string("p2v map: ") + e.what());
  }
}

inline std::string format_p2v(const P2VMap& map) {
  std::string out;
  for (const auto& u : map.units()) {
    out += u.label;
    out += ':';
    for (const auto& p : u.phonemes) {
      out += ' ';
      out += p;
    }
    out += '\n';
  }
  return out;
}

enum class CoverageMode { strict, lenient };

// Makes sure every phoneme in `needed` has a unit. Lenient mode appends
// uncovered phonemes as singleton units (sorted, labels continuing the vNN
// sequence); strict mode throws naming the first uncovered phoneme.
inline P2VMap cover_phonemes(const P2VMap& map, const std::vector<std::string>& needed, CoverageMode mode) {
  std::vector<std::string> missing;
  for (const auto& p : needed) {
    if (!map.covers(p)) missing.push_back(p);
  }
  std::sort(missing.begin(), missing.end());
  missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
  if (missing.empty()) return map;
  if (mode == CoverageMode::strict) throw MappingError("phoneme '" + missing.front() + "' is not covered by the map");
  std::vector<VisualUnit> units = map.units();
  std::set<std::string> taken;
  for (const auto& u : units) taken.insert(u.label);
  std::size_t next = units.size() + 1;
  for (const auto& p : missing) {
    std::string label;
    do {
      label = "v" + std::string(next < 10 ? "0" : "") + std::to_string(next);
      ++next;
    } while (taken.count(label));
    taken.insert(label);
    units.push_back({label, {p}});
  }
  return P2VMap(std::move(units));
}

inline P2VMap cover_lexicon(const P2VMap& map, const PronLexicon& lex, CoverageMode mode) {
  return cover_phonemes(map, lex.phonemes_used(), mode);
}

inline std::vector<std::string> phonemes_to_units(const std::vector<std::string>& phonemes, const P2VMap& map) {
  std::vector<std::string> out;
  out.reserve(phonemes.size());
  for (const auto& p : phonemes) {
    const std::string* u = map.unit_of(p);
    if (!u) throw MappingError("phoneme '" + p + "' is not covered by the map");
    out.push_back(*u);
  }
  return out;
}

inline Transcript phonemes_to_units(const Transcript& phonemes, const P2VMap& map) {
  if (phonemes.granularity != Granularity::phoneme) throw ConfigError("expected a phoneme transcript");
  return {Granularity::visual_unit, phonemes_to_units(phonemes.labels, map)};
}

// Words -> phonemes (or visual units when a map is given).
inline std::vector<std::string> words_to_units(const std::vector<std::string>& words, const PronLexicon& lex,
                                               const P2VMap* map = nullptr) {
  std::vector<std::string> out;
  for (const auto& w : words) {
    const auto& pron = lex.pronunciation(w);
    if (map) {
      auto units = phonemes_to_units(pron, *map);
      out.insert(out.end(), units.begin(), units.end());
    } else {
      out.insert(out.end(), pron.begin(), pron.end());
    }
  }
  return out;
}

struct HomopheneGroup {
  std::vector<std::string> units;
  std::vector<std::string> words;
};

// Groups ordered by the lexicon position of their first word.
inline std::vector<HomopheneGroup> homophene_groups(const PronLexicon& lex, const P2VMap& map) {
  std::vector<HomopheneGroup> groups;
  std::map<std::vector<std::string>, std::size_t> index;
  for (const auto& w : lex.words()) {
    auto units = phonemes_to_units(lex.pronunciation(w), map);
    auto [it, inserted] = index.emplace(units, groups.size());
    if (inserted) groups.push_back({std::move(units), {}});
    groups[it->second].words.push_back(w);
  }
  return groups;
}

struct GuessBaselines {
  double unit_chance = 0.0;        // 1 / number of units
  double homophene_ceiling = 0.0;  // mean over words of 1 / |homophene group|
};

inline GuessBaselines guess_baselines(const PronLexicon& lex, const P2VMap& map) {
  if (map.size() == 0) throw ConfigError("guess baselines need a non-empty map");
  if (lex.empty()) throw ConfigError("homophene ceiling is undefined for an empty lexicon");
  GuessBaselines out;
  out.unit_chance = 1.0 / static_cast<double>(map.size());
  double sum = 0.0;
  for (const auto& g : homophene_groups(lex, map)) {
    for (std::size_t i = 0; i < g.words.size(); ++i) sum += 1.0 / static_cast<double>(g.words.size());
  }
  out.homophene_ceiling = sum / static_cast<double>(lex.size());
  return out;
}

// Reserved model labels for silence and the inter-word short pause.
inline constexpr std::string_view kSilence = "sil";
inline constexpr std::string_view kShortPause = "sp";

struct LabelOptions {
  bool boundary_silence = true;  // "sil" at both ends
  bool word_pause = true;        // "sp" between words
};

// Expands a word transcript into the model label sequence used for embedded
// training at the given granularity.
inline std::vector<std::string> training_labels(const std::vector<std::string>& words, const PronLexicon& lex,
                                                Granularity g, const P2VMap* map, const LabelOptions& opt) {
  if (g == Granularity::visual_unit && !map) throw ConfigError("visual-unit labels need a P2V map");
  std::vector<std::string> out;
  if (opt.boundary_silence) out.emplace_back(kSilence);
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0 && opt.word_pause) out.emplace_back(kShortPause);
    if (g == Granularity::word) {
      if (!lex.find(words[i])) throw MappingError("word '" + words[i] + "' not in lexicon");
      out.push_back(text::to_upper(words[i]));
    } else {
      auto units = words_to_units({words[i]}, lex, g == Granularity::visual_unit ? map : nullptr);
      out.insert(out.end(), units.begin(), units.end());
    }
  }
  if (opt.boundary_silence) out.emplace_back(kSilence);
  return out;
}

// Reference transcript at a scoring granularity (no sil/sp).
inline std::vector<std::string> reference_labels(const std::vector<std::string>& words, const PronLexicon& lex,
                                                 Granularity g, const P2VMap* map) {
  return training_labels(words, lex, g, map, LabelOptions{false, false});
}

}  // namespace visunit
