#include <gtest/gtest.h>

#include <functional>
#include <limits>

#include "oracle.hpp"
#include "visunit/eval.hpp"

using namespace visunit;

namespace {

std::vector<std::vector<std::string>> all_strings(std::size_t max_len) {
  std::vector<std::vector<std::string>> out{{}};
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out[k].size() == max_len) continue;
    for (const char* s : {"a", "b", "c"}) {
      auto v = out[k];
      v.emplace_back(s);
      out.push_back(std::move(v));
    }
  }
  return out;
}

}  // namespace

TEST(Align, MatchesExhaustiveEnumeration) {
  const auto strings = all_strings(6);
  // Every pair with |ref| + |hyp| <= 8, plus a sample of the longer pairs.
  std::size_t checked = 0;
  for (std::size_t x = 0; x < strings.size(); ++x) {
    for (std::size_t y = 0; y < strings.size(); ++y) {
      const auto& r = strings[x];
      const auto& h = strings[y];
      if (r.size() + h.size() > 8 && (x * 31 + y) % 11 != 0) continue;
      auto got = align(r, h);
      auto want = oracle::enumerate_alignments(r, h);
      ASSERT_EQ(got.cost, want.cost);
      ASSERT_EQ(got.d, want.d);
      ASSERT_EQ(got.s, want.s);
      ASSERT_EQ(got.i, want.i);
      // Counts reproduce the cost and the reference / hypothesis lengths.
      ASSERT_EQ(static_cast<int>(10 * got.s + 7 * (got.d + got.i)), got.cost);
      ASSERT_EQ(got.n, r.size());
      ASSERT_EQ(r.size() - got.d, h.size() - got.i);
      if (!r.empty()) {
        ASSERT_EQ(got.correctness(), static_cast<double>(r.size() - got.d - got.s) / static_cast<double>(r.size()));
      }
      // The pairs spell out the two strings.
      std::vector<std::string> rr, hh;
      for (const auto& p : got.pairs) {
        if (!p.ref.empty()) rr.push_back(p.ref);
        if (!p.hyp.empty()) hh.push_back(p.hyp);
      }
      ASSERT_EQ(rr, r);
      ASSERT_EQ(hh, h);
      ++checked;
    }
  }
  EXPECT_GT(checked, 100000u);
}

// Three substitutions (30) cost more than a deletion plus an insertion (14),
// so a rotated string scores D=1, I=1.
TEST(Align, PrefersCheaperIndels) {
  auto a = align({"a", "b", "c"}, {"b", "c", "a"});
  EXPECT_EQ(a.d, 1u);
  EXPECT_EQ(a.i, 1u);
  EXPECT_EQ(a.s, 0u);
  EXPECT_DOUBLE_EQ(a.correctness(), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(a.accuracy(), 1.0 / 3.0);
}

TEST(Align, TieOrderPrefersSubstitution) {
  // One substitution (10) vs delete+insert (14): substitution.
  auto a = align({"a"}, {"b"});
  EXPECT_EQ(a.s, 1u);
  EXPECT_EQ(a.pairs.size(), 1u);
  auto e = align({}, {"a"});
  EXPECT_EQ(e.i, 1u);
  EXPECT_THROW(e.correctness(), ConfigError);
}

TEST(Pooled, MeanAndStandardError) {
  auto p = pooled_correctness(std::vector<double>{0.2, 0.4, 0.6});
  EXPECT_NEAR(p.mean, 0.4, 1e-15);
  EXPECT_NEAR(p.se, 0.2 / std::sqrt(3.0), 1e-15);
  auto one = pooled_correctness(std::vector<double>{0.3});
  EXPECT_FALSE(one.se_defined);
  EXPECT_EQ(one.se, 0.0);
  EXPECT_THROW(pooled_correctness(std::vector<double>{}), ConfigError);
}

TEST(Confusions, SubstitutionsAndMatchesOnly) {
  std::vector<AlignmentResult> al = {align({"a", "b", "c"}, {"a", "c"}), align({"a"}, {"b", "b"})};
  auto c = confusions_from_alignments(al, {"a", "b", "c"});
  EXPECT_EQ(c.k.at(0, 0), 1);
  EXPECT_EQ(c.k.total(), 3);
  EXPECT_EQ(c.deletions["b"], 1);
  EXPECT_EQ(c.insertions["b"], 1);
  EXPECT_EQ(c.k.at(0, 1) + c.k.at(2, 2), 2);
  EXPECT_THROW(confusions_from_alignments({align({"q"}, {"q"})}, {"a"}), MappingError);
}

TEST(Results, CsvRow) {
  ResultRow r;
  r.speaker = "s1";
  r.map_size = 10;
  r.classifier_unit = "viseme";
  r.network_unit = "word";
  r.counts = {4, 1, 1, 3};
  EXPECT_EQ(results_csv_row(r), "s1,10,viseme,word,0,4,1,1,3,0.5,0.5,-0.25,flat\n");
}
