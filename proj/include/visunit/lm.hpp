#pragma once

// Bigram language model with absolute discounting and unigram backoff, plus an
// ARPA-style text format (base-10 logs).

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "visunit/error.hpp"
#include "visunit/text.hpp"

namespace visunit {

inline constexpr std::string_view kSentenceStart = "<s>";
inline constexpr std::string_view kSentenceEnd = "</s>";

class BigramModel {
 public:
  double discount = 0.5;
  std::vector<std::string> vocab;                                // sorted, no markers
  std::map<std::string, double, std::less<>> unigram;            // over vocab and </s>
  std::map<std::string, double, std::less<>> backoff;            // per history (vocab and <s>)
  std::map<std::pair<std::string, std::string>, double> bigram;  // explicit P(w|h)

  // Possible successors of any history.
  std::vector<std::string> successors() const {
    auto out = vocab;
    out.emplace_back(kSentenceEnd);
    return out;
  }

  double prob(std::string_view h, std::string_view w) const {
    auto it = bigram.find({std::string(h), std::string(w)});
    if (it != bigram.end()) return it->second;
    auto u = unigram.find(w);
    if (u == unigram.end()) throw MappingError("label '" + std::string(w) + "' is not in the language model");
    auto b = backoff.find(h);
    if (b == backoff.end()) throw MappingError("history '" + std::string(h) + "' is not in the language model");
    return b->second * u->second;
  }

  double log_prob(std::string_view h, std::string_view w) const {
    const double p = prob(h, w);
    return p > 0.0 ? std::log(p) : -HUGE_VAL;
  }

  // Total successor mass of a history; 1 for a normalized model.
  double successor_mass(std::string_view h) const {
    double sum = 0.0;
    for (const auto& w : successors()) sum += prob(h, w);
    return sum;
  }
};

// Each transcript is wrapped in <s> ... </s>. Seen successors get
// (c(h,w) - d) / c(h); the withheld mass goes to unseen successors in
// proportion to the unigram distribution. A history followed by every
// possible successor has nothing to back off to, so its withheld mass is
// spread over all successors by unigram weight instead.
inline BigramModel estimate_bigram(const std::vector<std::vector<std::string>>& transcripts, double discount = 0.5) {
  if (!(discount > 0.0 && discount < 1.0)) throw ConfigError("bigram discount must lie in (0, 1)");
  if (transcripts.empty()) throw ConfigError("no transcripts to estimate a bigram from");
  const std::string bos(kSentenceStart), eos(kSentenceEnd);
  std::set<std::string> vocab;
  std::map<std::string, double> uni_count;
  std::map<std::string, std::map<std::string, double>> counts;
  for (const auto& t : transcripts) {
    std::string prev = bos;
    for (const auto& w : t) {
      if (w == bos || w == eos) throw ConfigError("transcripts must not contain sentence markers");
      vocab.insert(w);
      counts[prev][w] += 1.0;
      uni_count[w] += 1.0;
      prev = w;
    }
    counts[prev][eos] += 1.0;
    uni_count[eos] += 1.0;
  }
  if (vocab.empty()) throw ConfigError("empty vocabulary");

  BigramModel lm;
  lm.discount = discount;
  lm.vocab.assign(vocab.begin(), vocab.end());
  double total = 0.0;
  for (const auto& [w, c] : uni_count) total += c;
  for (const auto& [w, c] : uni_count) lm.unigram[w] = c / total;

  std::vector<std::string> histories(lm.vocab);
  histories.push_back(bos);
  for (const auto& h : histories) {
    const auto& succ = counts[h];
    double ch = 0.0, seen_uni = 0.0;
    for (const auto& [w, c] : succ) {
      ch += c;
      seen_uni += lm.unigram[w];
    }
    const double withheld = discount * static_cast<double>(succ.size()) / ch;
    const bool all_seen = succ.size() == lm.unigram.size();
    for (const auto& [w, c] : succ) {
      double p = (c - discount) / ch;
      if (all_seen) p += withheld * lm.unigram[w];
      lm.bigram[{h, w}] = p;
    }
    lm.backoff[h] = all_seen ? 1.0 : withheld / (1.0 - seen_uni);
  }
  return lm;
}

// ARPA-like text. Unigram lines: "log10p label log10backoff" (<s> gets -99);
// bigram lines: "log10p h w".
inline std::string format_arpa(const BigramModel& lm) {
  auto l10 = [](double p) { return p > 0.0 ? text::format_double(std::log10(p)) : std::string("-99"); };
  std::string out = "\\data\\\n";
  out += "discount=" + text::format_double(lm.discount) + "\n";
  out += "ngram 1=" + std::to_string(lm.unigram.size() + 1) + "\n";
  out += "ngram 2=" + std::to_string(lm.bigram.size()) + "\n\n\\1-grams:\n";
  auto uni_line = [&](const std::string& w, double p) {
    out += l10(p) + " " + w;
    auto b = lm.backoff.find(w);
    if (b != lm.backoff.end()) out += " " + l10(b->second);
    out += "\n";
  };
  uni_line(std::string(kSentenceStart), 0.0);
  for (const auto& [w, p] : lm.unigram) uni_line(w, p);
  out += "\n\\2-grams:\n";
  for (const auto& [hw, p] : lm.bigram) out += l10(p) + " " + hw.first + " " + hw.second + "\n";
  out += "\n\\end\\\n";
  return out;
}

inline BigramModel parse_arpa(std::string_view content) {
  BigramModel lm;
  int section = 0;
  std::size_t n = 0;
  auto fail = [&](const std::string& msg) { return ParseError("LM line " + std::to_string(n) + ": " + msg); };
  auto num = [&](std::string_view tok) {
    double v = 0.0;
    if (!text::parse_double(tok, v)) throw fail("malformed number '" + std::string(tok) + "'");
    return v <= -99.0 ? 0.0 : std::pow(10.0, v);
  };
  bool ended = false;
  for (auto line : text::lines(content)) {
    ++n;
    auto tok = text::split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "\\data\\") {
      section = 0;
    } else if (tok[0] == "\\1-grams:") {
      section = 1;
    } else if (tok[0] == "\\2-grams:") {
      section = 2;
    } else if (tok[0] == "\\end\\") {
      ended = true;
      break;
    } else if (section == 0) {
      if (tok[0].starts_with("discount=")) {
        if (!text::parse_double(tok[0].substr(9), lm.discount)) throw fail("malformed discount");
      }
    } else if (section == 1) {
      if (tok.size() != 2 && tok.size() != 3) throw fail("expected 'log10p label [log10backoff]'");
      std::string w(tok[1]);
      if (w != kSentenceStart) {
        lm.unigram[w] = num(tok[0]);
        if (w != kSentenceEnd) lm.vocab.push_back(w);
      }
      if (tok.size() == 3) lm.backoff[w] = num(tok[2]);
    } else {
      if (tok.size() != 3) throw fail("expected 'log10p history word'");
      lm.bigram[{std::string(tok[1]), std::string(tok[2])}] = num(tok[0]);
    }
  }
  if (!ended) throw ParseError("LM file: missing \\end\\ marker");
  if (lm.vocab.empty()) throw ParseError("LM file: empty vocabulary");
  return lm;
}

inline void write_arpa(const BigramModel& lm, const std::string& path) { text::write_file(path, format_arpa(lm)); }
inline BigramModel read_arpa(const std::string& path) { return parse_arpa(text::read_file(path)); }

}  // namespace visunit
