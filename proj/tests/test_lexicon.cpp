#include <gtest/gtest.h>

#include <map>
#include <set>

#include "visunit/lexicon.hpp"

using namespace visunit;

namespace {

std::string data(const std::string& rel) { return text::read_file(std::string(VISUNIT_SOURCE_DIR) + "/" + rel); }

PronLexicon homophene_lexicon() {
  return parse_lexicon(data("data/homophenes.dict"), PhoneInventory::british45());
}

}  // namespace

TEST(Inventory, British45HasTwentyOneVowels) {
  auto inv = PhoneInventory::british45();
  EXPECT_EQ(inv.size(), 45u);
  std::size_t v = 0;
  for (const auto& p : inv.phones()) v += p.category == Category::vowel;
  EXPECT_EQ(v, 21u);
  EXPECT_EQ(inv.category("ah"), Category::vowel);
  EXPECT_EQ(inv.category("ng"), Category::consonant);
  EXPECT_THROW(inv.category("xx"), MappingError);
}

TEST(Inventory, DataFileMatchesBuiltin) {
  EXPECT_EQ(PhoneInventory::parse(data("data/british45.phones")), PhoneInventory::british45());
}

TEST(Inventory, FormatRoundTrips) {
  auto inv = PhoneInventory::british45();
  EXPECT_EQ(PhoneInventory::parse(inv.format()), inv);
}

TEST(Inventory, RejectsBadLines) {
  EXPECT_THROW(PhoneInventory::parse("aa X\n"), ParseError);
  EXPECT_THROW(PhoneInventory::parse("aa V\naa C\n"), ConfigError);
  EXPECT_THROW(PhoneInventory::parse("a:b V\n"), ConfigError);
}

TEST(Lexicon, ParsesAndUppercases) {
  auto lex = parse_lexicon(";;; c\ntalk t ao k\n\nDOG d ao g\n", PhoneInventory::british45());
  ASSERT_EQ(lex.size(), 2u);
  EXPECT_EQ(lex.words()[0], "TALK");
  EXPECT_EQ(lex.pronunciation("Talk"), (Pronunciation{"t", "ao", "k"}));
  EXPECT_EQ(lex.phonemes_used(), (std::vector<std::string>{"ao", "d", "g", "k", "t"}));
  EXPECT_EQ(parse_lexicon(lex.format(), PhoneInventory::british45()).format(), lex.format());
}

TEST(Lexicon, DuplicateKeepsFirstAndWarns) {
  auto lex = parse_lexicon("A aa\nA ae\n", PhoneInventory::british45());
  EXPECT_EQ(lex.pronunciation("A"), (Pronunciation{"aa"}));
  EXPECT_EQ(lex.warnings().size(), 1u);
}

TEST(Lexicon, Errors) {
  const auto inv = PhoneInventory::british45();
  EXPECT_THROW(parse_lexicon("A qq\n", inv), ParseError);
  EXPECT_THROW(parse_lexicon("A\n", inv), ParseError);
  PronLexicon lex(inv);
  EXPECT_THROW(lex.add("B", {}), ConfigError);
  EXPECT_THROW(lex.pronunciation("NOPE"), MappingError);
}

TEST(P2V, ParseFormatRoundTrip) {
  const std::string t = "v01: ax\nv02: f zh w\n";
  EXPECT_EQ(format_p2v(parse_p2v(t)), t);
}

TEST(P2V, RejectsOverlapAndEmptyUnits) {
  EXPECT_THROW(parse_p2v("a: p b\nb: b\n"), ParseError);
  EXPECT_THROW(parse_p2v("a:\n"), ParseError);
  EXPECT_THROW(parse_p2v("a p b\n"), ParseError);
  EXPECT_THROW(parse_p2v("a: p\na: b\n"), ParseError);
}

TEST(P2V, DataMapsAreCategoryPure) {
  const auto inv = PhoneInventory::british45();
  for (const char* f : {"data/jeffers_style.p2v", "tests/data/speaker1_ten_units.p2v"}) {
    auto m = parse_p2v(data(f));
    EXPECT_NO_THROW(m.check_categories(inv)) << f;
    std::set<std::string> all;
    for (const auto& p : inv.phones()) all.insert(p.label);
    auto ps = m.phonemes();
    EXPECT_EQ(std::set<std::string>(ps.begin(), ps.end()), all) << f;
  }
}

TEST(P2V, MixedUnitRejected) {
  EXPECT_THROW(parse_p2v("x: aa p\n").check_categories(PhoneInventory::british45()), ConfigError);
}

TEST(P2V, TonnesAndSinceAreHomophenous) {
  auto lex = homophene_lexicon();
  auto map = parse_p2v(data("tests/data/speaker1_ten_units.p2v"));
  const std::vector<std::string> want = {"v07", "v10", "v08", "v07"};
  EXPECT_EQ(words_to_units({"tonnes"}, lex, &map), want);
  EXPECT_EQ(words_to_units({"since"}, lex, &map), want);
}

TEST(P2V, JeffersCollapsesTalkTongueDogDug) {
  auto lex = homophene_lexicon();
  auto map = parse_p2v(data("data/jeffers_style.p2v"));
  for (const char* w : {"TALK", "TONGUE", "DOG", "DUG"}) {
    EXPECT_EQ(words_to_units({w}, lex, &map), (std::vector<std::string>{"C", "V1", "H"})) << w;
  }
  bool found = false;
  for (const auto& g : homophene_groups(lex, map)) {
    if (g.words == std::vector<std::string>{"TALK", "TONGUE", "DOG", "DUG"}) found = true;
  }
  EXPECT_TRUE(found);
}

TEST(P2V, CoverLenientAppendsSortedSingletons) {
  auto m = parse_p2v("v01: p b\n");
  auto c = cover_phonemes(m, {"t", "p", "d"}, CoverageMode::lenient);
  EXPECT_EQ(format_p2v(c), "v01: p b\nv02: d\nv03: t\n");
  EXPECT_THROW(cover_phonemes(m, {"t"}, CoverageMode::strict), MappingError);
}

// Ceiling: expected hits when guessing uniformly within the homophene group,
// counted word by word with a plain pairwise comparison.
TEST(Homophenes, CeilingMatchesPairwiseCount) {
  auto lex = homophene_lexicon();
  for (const char* f : {"data/jeffers_style.p2v", "tests/data/speaker1_ten_units.p2v"}) {
    auto map = parse_p2v(data(f));
    double sum = 0.0;
    for (const auto& w : lex.words()) {
      std::size_t same = 0;
      for (const auto& v : lex.words()) same += words_to_units({w}, lex, &map) == words_to_units({v}, lex, &map);
      sum += 1.0 / static_cast<double>(same);
    }
    auto g = guess_baselines(lex, map);
    EXPECT_NEAR(g.homophene_ceiling, sum / static_cast<double>(lex.size()), 1e-12);
    EXPECT_DOUBLE_EQ(g.unit_chance, 1.0 / static_cast<double>(map.size()));
    // Every word appears in exactly one group.
    std::size_t n = 0;
    for (const auto& grp : homophene_groups(lex, map)) n += grp.words.size();
    EXPECT_EQ(n, lex.size());
  }
}

TEST(Homophenes, IdentityMapSeparatesDistinctPronunciations) {
  auto lex = homophene_lexicon();
  auto g = guess_baselines(lex, P2VMap::identity(lex.phonemes_used()));
  // WHERE and WEAR share a pronunciation; everything else is unique.
  EXPECT_NEAR(g.homophene_ceiling, (9.0 + 0.5 + 0.5) / 11.0, 1e-12);
}

TEST(Labels, TrainingAndReference) {
  auto lex = homophene_lexicon();
  auto map = parse_p2v(data("data/jeffers_style.p2v"));
  const std::vector<std::string> words = {"talk", "dog"};
  EXPECT_EQ(training_labels(words, lex, Granularity::phoneme, nullptr, {}),
            (std::vector<std::string>{"sil", "t", "ao", "k", "sp", "d", "ao", "g", "sil"}));
  EXPECT_EQ(training_labels(words, lex, Granularity::word, nullptr, {}),
            (std::vector<std::string>{"sil", "TALK", "sp", "DOG", "sil"}));
  EXPECT_EQ(reference_labels(words, lex, Granularity::visual_unit, &map),
            (std::vector<std::string>{"C", "V1", "H", "C", "V1", "H"}));
  EXPECT_THROW(training_labels(words, lex, Granularity::visual_unit, nullptr, {}), ConfigError);
  EXPECT_THROW(reference_labels({"nope"}, lex, Granularity::word, nullptr), MappingError);
}

TEST(Labels, GranularityNames) {
  for (auto g : {Granularity::visual_unit, Granularity::phoneme, Granularity::word}) {
    EXPECT_EQ(parse_granularity(granularity_name(g)), g);
  }
  EXPECT_THROW(parse_granularity("letter"), ConfigError);
}
