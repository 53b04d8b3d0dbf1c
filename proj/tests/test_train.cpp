#include <gtest/gtest.h>

#include "oracle.hpp"
#include "visunit/pipeline.hpp"
#include "visunit/train.hpp"

using namespace visunit;

namespace {

// Two phones, 2-d targets far apart, optional sil.
struct TwoPhone {
  PronLexicon lex{PhoneInventory::british45()};
  SynthModel model;
  Corpus corpus;
};

TwoPhone two_phone(std::size_t utterances, std::uint64_t seed, bool silence) {
  TwoPhone s;
  s.lex.add("A", {"aa"});
  s.lex.add("B", {"b"});
  s.model.base = {0.0, 0.0};
  s.model.modes = {{1.0, 0.0}, {0.0, 1.0}};
  s.model.coefficients = {{"aa", {3.0, 0.0}}, {"b", {-3.0, 2.0}}, {"sil", {0.0, -4.0}}};
  s.model.noise_scale = 0.5;
  s.model.min_duration = 3;
  s.model.max_duration = 8;
  if (silence) {
    s.model.silence_min = 3;
    s.model.silence_max = 5;
  }
  auto sentences = random_sentences({"A", "B"}, utterances, 1, 4, seed);
  s.corpus = generate_corpus(s.model, s.lex, sentences, seed + 1);
  return s;
}

std::vector<std::vector<std::string>> labels(const TwoPhone& s, LabelOptions opt) {
  std::vector<std::vector<std::string>> out;
  for (const auto& u : s.corpus) out.push_back(training_labels(u.words, s.lex, Granularity::phoneme, nullptr, opt));
  return out;
}

}  // namespace

// One state, one component: a single EM step gives the sample mean and variance.
TEST(Reestimate, SingleGaussianIsSampleMoments) {
  std::mt19937_64 rng(1);
  Corpus c{{"u1", oracle::random_features(9, 2, rng), {"X"}}, {"u2", oracle::random_features(6, 2, rng), {"X"}}};
  TrainConfig cfg;
  cfg.iterations = 1;
  cfg.jitter = 0.0;
  auto init = flat_start(c, {"x"}, {1, 1, 2}, cfg);
  auto r = embedded_reestimate(init, c, {{"x"}, {"x"}}, cfg);
  double n = 0, s[2] = {0, 0}, q[2] = {0, 0};
  for (const auto& u : c) {
    for (std::size_t t = 0; t < u.features.frames(); ++t) {
      n += 1;
      for (int d = 0; d < 2; ++d) {
        s[d] += u.features.frame(t)[d];
        q[d] += u.features.frame(t)[d] * u.features.frame(t)[d];
      }
    }
  }
  const auto& st = r.set.at("x").state(1);
  for (int d = 0; d < 2; ++d) {
    EXPECT_NEAR(st.means[d], s[d] / n, 1e-10);
    EXPECT_NEAR(st.variances[d], q[d] / n - (s[d] / n) * (s[d] / n), 1e-10);
  }
  // Self-loop: 13 of the 15 transitions stay, 2 leave.
  EXPECT_NEAR(r.set.at("x").a(1, 1), 13.0 / 15.0, 1e-10);
}

TEST(Reestimate, LikelihoodNeverDecreases) {
  auto s = two_phone(40, 7, true);
  auto tr = labels(s, {});
  TrainConfig cfg;
  cfg.seed = 3;
  auto init = flat_start(s.corpus, collect_labels(tr), {3, 2, 2}, cfg);
  auto r = embedded_reestimate(init, s.corpus, tr, cfg);
  ASSERT_EQ(r.log_likelihood.size(), 11u);
  for (std::size_t i = 1; i < r.log_likelihood.size(); ++i) {
    EXPECT_GE(r.log_likelihood[i], r.log_likelihood[i - 1] - 1e-6 * std::abs(r.log_likelihood[i - 1])) << i;
  }
  EXPECT_NO_THROW(r.set.validate());
  EXPECT_TRUE(sp_is_tied(r.set));
  EXPECT_TRUE(r.skipped.empty());
}

TEST(Reestimate, RecoversGeneratorMeans) {
  auto s = two_phone(500, 11, false);
  auto tr = labels(s, {false, false});
  TrainConfig cfg;
  cfg.seed = 5;
  auto init = flat_start(s.corpus, collect_labels(tr), {3, 1, 2}, cfg);
  auto set = embedded_reestimate(init, s.corpus, tr, cfg).set;
  for (const char* p : {"aa", "b"}) {
    const auto target = s.model.target(p);
    for (const auto& st : set.at(p).states) {
      for (std::size_t d = 0; d < 2; ++d) EXPECT_NEAR(st.means[d], target[d], 0.1) << p;
    }
  }
}

TEST(Reestimate, ThreadsGiveSameModels) {
  auto s = two_phone(20, 2, true);
  auto tr = labels(s, {});
  TrainConfig cfg;
  cfg.iterations = 3;
  auto init = flat_start(s.corpus, collect_labels(tr), {3, 2, 2}, cfg);
  auto a = embedded_reestimate(init, s.corpus, tr, cfg);
  cfg.threads = 3;
  auto b = embedded_reestimate(init, s.corpus, tr, cfg);
  for (std::size_t m = 0; m < a.set.size(); ++m) {
    const auto& x = a.set.model(m);
    const auto& y = b.set.model(m);
    for (std::size_t k = 0; k < x.trans.size(); ++k) EXPECT_NEAR(x.trans[k], y.trans[k], 1e-9);
    for (std::size_t st = 0; st < x.states.size(); ++st) {
      for (std::size_t k = 0; k < x.states[st].means.size(); ++k) {
        EXPECT_NEAR(x.states[st].means[k], y.states[st].means[k], 1e-9);
      }
    }
  }
}

TEST(Reestimate, ShortUtterancesAreSkipped) {
  auto s = two_phone(5, 3, false);
  auto tr = labels(s, {false, false});
  Corpus c = s.corpus;
  c.push_back({"tiny", FeatureSequence(2, {0.0, 0.0}), {"A", "B"}});
  tr.push_back({"aa", "b"});
  TrainConfig cfg;
  cfg.iterations = 2;
  auto init = flat_start(c, {"aa", "b"}, {3, 1, 2}, cfg);
  auto r = embedded_reestimate(init, c, tr, cfg);
  EXPECT_EQ(r.skipped, std::vector<std::string>{"tiny"});
  EXPECT_THROW(embedded_reestimate(init, {c.back()}, {tr.back()}, cfg), ModelError);
  EXPECT_THROW(embedded_reestimate(init, c, {tr.front()}, cfg), ConfigError);
  tr.back() = {"zz"};
  EXPECT_THROW(embedded_reestimate(init, c, tr, cfg), MappingError);
}

TEST(Reestimate, VariancesStayAboveFloor) {
  // Constant features collapse the variance; the floor must hold it up.
  Corpus c{{"u", FeatureSequence(1, std::vector<double>(12, 2.0)), {"X"}},
           {"v", FeatureSequence(1, {1.0, 2.0, 3.0, 2.0, 1.0, 2.0}), {"X"}}};
  TrainConfig cfg;
  cfg.iterations = 4;
  auto init = flat_start(c, {"x"}, {3, 1, 1}, cfg);
  auto r = embedded_reestimate(init, c, {{"x"}, {"x"}}, cfg);
  EXPECT_NO_THROW(r.set.validate());
}
