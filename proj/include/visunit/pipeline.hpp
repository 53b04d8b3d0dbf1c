#pragma once

// Experiment orchestration: configuration, corpus/fold setup, the three-step
// unit discovery, the network-unit study and the hierarchical-training study.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "visunit/cluster.hpp"
#include "visunit/corpus.hpp"
#include "visunit/decoder.hpp"
#include "visunit/error.hpp"
#include "visunit/eval.hpp"
#include "visunit/hierarchy.hpp"
#include "visunit/hmm.hpp"
#include "visunit/lexicon.hpp"
#include "visunit/lm.hpp"
#include "visunit/parallel.hpp"
#include "visunit/seed.hpp"
#include "visunit/synth.hpp"
#include "visunit/text.hpp"
#include "visunit/train.hpp"

namespace visunit {

struct ExperimentConfig {
  std::string speaker = "synth";
  std::string corpus;     // empty: synthetic corpus
  std::string lexicon;    // required with a corpus file
  std::string inventory;  // empty: built-in 45-phoneme set
  std::string map;        // P2V map for the network study
  std::string output;     // directory for CSV and map files; empty: none
  std::size_t folds = 10;
  std::size_t test_size = 20;
  std::uint64_t seed = 1;
  std::size_t states = 3;
  std::size_t mixes = 5;
  std::size_t iterations = 11;
  double grammar_scale = 1.0;
  double penalty = 0.5;
  double discount = 0.5;
  double jitter = 0.01;
  double varfloor = 1e-4;
  double beam = 0.0;
  std::size_t size_min = 11;
  std::size_t size_max = 35;
  std::vector<std::size_t> sizes;  // discovery step 3; empty: every family size
  Granularity classifier = Granularity::visual_unit;
  Granularity network = Granularity::word;
  std::size_t threads = 1;
  SynthSpec synth;

  // Applies one key=value setting; unknown keys and bad values are config errors.
  void set(std::string_view key, std::string_view value) {
    auto fail = [&] { return ConfigError("invalid value '" + std::string(value) + "' for '" + std::string(key) + "'"); };
    auto u = [&](auto& dst) {
      if (!text::parse_int(value, dst)) throw fail();
    };
    auto i = [&](int& dst) {
      if (!text::parse_int(value, dst)) throw fail();
    };
    auto d = [&](double& dst) {
      if (!text::parse_double(value, dst)) throw fail();
    };
    const std::string k(key);
    if (k == "speaker") speaker = value;
    else if (k == "corpus") corpus = value;
    else if (k == "lexicon") lexicon = value;
    else if (k == "inventory") inventory = value;
    else if (k == "map") map = value;
    else if (k == "output") output = value;
    else if (k == "folds") u(folds);
    else if (k == "test_size") u(test_size);
    else if (k == "seed") u(seed);
    else if (k == "states") u(states);
    else if (k == "mixes") u(mixes);
    else if (k == "iterations") u(iterations);
    else if (k == "grammar_scale") d(grammar_scale);
    else if (k == "penalty") d(penalty);
    else if (k == "discount") d(discount);
    else if (k == "jitter") d(jitter);
    else if (k == "varfloor") d(varfloor);
    else if (k == "beam") d(beam);
    else if (k == "size_min") u(size_min);
    else if (k == "size_max") u(size_max);
    else if (k == "sizes") {
      sizes.clear();
      if (value != "all") {
        std::string v(value);
        std::replace(v.begin(), v.end(), ',', ' ');
        for (auto part : text::split_ws(v)) {
          std::size_t lo = 0, hi = 0;
          auto dash = part.find('-');
          if (dash == std::string_view::npos) {
            if (!text::parse_int(part, lo)) throw fail();
            hi = lo;
          } else if (!text::parse_int(part.substr(0, dash), lo) || !text::parse_int(part.substr(dash + 1), hi) ||
                     hi < lo) {
            throw fail();
          }
          for (std::size_t s = lo; s <= hi; ++s) sizes.push_back(s);
        }
        if (sizes.empty()) throw fail();
      }
    } else if (k == "classifier") classifier = parse_granularity(value);
    else if (k == "network") network = parse_granularity(value);
    else if (k == "threads") u(threads);
    else if (k == "synth_utterances") u(synth.utterances);
    else if (k == "synth_words") u(synth.words);
    else if (k == "synth_group") u(synth.group_size);
    else if (k == "synth_clusters") u(synth.clusters);
    else if (k == "synth_dim") u(synth.dim);
    else if (k == "synth_category_sep") d(synth.category_sep);
    else if (k == "synth_cluster_sep") d(synth.cluster_sep);
    else if (k == "synth_phone_sep") d(synth.phone_sep);
    else if (k == "synth_noise") d(synth.noise);
    else if (k == "synth_min_words") u(synth.min_words);
    else if (k == "synth_max_words") u(synth.max_words);
    else if (k == "synth_min_duration") i(synth.min_duration);
    else if (k == "synth_max_duration") i(synth.max_duration);
    else if (k == "synth_crossfade") i(synth.crossfade);
    else if (k == "synth_pause_max") i(synth.pause_max);
    else throw ConfigError("unknown configuration key '" + k + "'");
  }

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k = {
        "speaker",           "corpus",           "lexicon",          "inventory",          "map",
        "output",            "folds",            "test_size",        "seed",               "states",
        "mixes",             "iterations",       "grammar_scale",    "penalty",            "discount",
        "jitter",            "varfloor",         "beam",             "size_min",           "size_max",
        "sizes",             "classifier",       "network",          "threads",            "synth_utterances",
        "synth_words",       "synth_group",      "synth_clusters",   "synth_dim",          "synth_category_sep",
        "synth_cluster_sep", "synth_phone_sep",  "synth_noise",      "synth_min_words",    "synth_max_words",
        "synth_min_duration", "synth_max_duration", "synth_crossfade", "synth_pause_max"};
    return k;
  }

  // Flat "key = value" lines; '#' starts a comment.
  static ExperimentConfig parse(std::string_view content) {
    ExperimentConfig cfg;
    std::size_t n = 0;
    for (auto line : text::lines(content)) {
      ++n;
      auto hash = line.find('#');
      auto t = text::trim(hash == std::string_view::npos ? line : line.substr(0, hash));
      if (t.empty()) continue;
      auto eq = t.find('=');
      if (eq == std::string_view::npos) throw ConfigError("config line " + std::to_string(n) + ": expected key=value");
      cfg.set(text::trim(t.substr(0, eq)), text::trim(t.substr(eq + 1)));
    }
    return cfg;
  }

  void validate() const {
    namespace fs = std::filesystem;
    for (const auto* p : {&corpus, &lexicon, &inventory, &map}) {
      if (!p->empty() && !fs::exists(*p)) throw ConfigError("file not found: " + *p);
    }
    if (!corpus.empty() && lexicon.empty()) throw ConfigError("a corpus file needs a lexicon file");
    if (folds == 0 || test_size == 0) throw ConfigError("folds and test size must be positive");
    if (states == 0 || mixes == 0 || iterations == 0) throw ConfigError("states, mixes and iterations must be positive");
    if (size_min == 0 || size_max < size_min) throw ConfigError("unit size range is empty");
    if (!(grammar_scale >= 0.0)) throw ConfigError("grammar scale must be non-negative");
    if (threads == 0) throw ConfigError("threads must be positive");
    if (!(discount > 0.0 && discount < 1.0)) throw ConfigError("discount must lie in (0, 1)");
    if (!valid_pairing(classifier, network)) throw ConfigError("classifier units cannot be coarser than network units");
    synth.validate();
  }

  TrainConfig train_config() const {
    TrainConfig t;
    t.iterations = iterations;
    t.variance_floor_factor = varfloor;
    t.jitter = jitter;
    t.beam = beam;
    t.seed = derive_seed(seed, "jitter");
    return t;
  }
  ProtoSpec proto(std::size_t dim) const { return {states, mixes, dim}; }
  DecodeParams decode_params() const { return {grammar_scale, penalty}; }
};

struct Experiment {
  PhoneInventory inventory;
  PronLexicon lexicon;
  Corpus corpus;
  FoldPlan plan;
  std::optional<P2VMap> reference_map;  // generator clusters, or the configured map file
};

inline Experiment load_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  Experiment e;
  e.inventory = cfg.inventory.empty() ? PhoneInventory::british45() : PhoneInventory::parse(text::read_file(cfg.inventory));
  if (cfg.corpus.empty()) {
    auto s = make_synthetic(cfg.synth, e.inventory, derive_seed(cfg.seed, "synth"));
    e.lexicon = std::move(s.lexicon);
    e.corpus = std::move(s.corpus);
    e.reference_map = std::move(s.cluster_map);
  } else {
    e.lexicon = parse_lexicon(text::read_file(cfg.lexicon), e.inventory);
    e.corpus = read_corpus(cfg.corpus);
    check_corpus_words(e.corpus, e.lexicon);
  }
  if (!cfg.map.empty()) e.reference_map = parse_p2v(text::read_file(cfg.map));
  e.plan = plan_folds(e.corpus, cfg.folds, cfg.test_size, derive_seed(cfg.seed, "folds"));
  return e;
}

// ---------------------------------------------------------------------------
// Per-fold building blocks.

inline std::vector<std::vector<std::string>> transcripts(const Corpus& c, const PronLexicon& lex, Granularity g,
                                                         const P2VMap* map) {
  std::vector<std::vector<std::string>> out;
  for (const auto& u : c) out.push_back(training_labels(u.words, lex, g, map, {}));
  return out;
}

inline std::vector<std::vector<std::string>> references(const Corpus& c, const PronLexicon& lex, Granularity g,
                                                        const P2VMap* map) {
  std::vector<std::vector<std::string>> out;
  for (const auto& u : c) out.push_back(reference_labels(u.words, lex, g, map));
  return out;
}

// Flat start plus embedded re-estimation at one granularity.
inline HmmSet train_models(const Corpus& train, const PronLexicon& lex, Granularity g, const P2VMap* map,
                           const ExperimentConfig& cfg) {
  auto tr = transcripts(train, lex, g, map);
  const auto tcfg = cfg.train_config();
  auto init = flat_start(train, collect_labels(tr), cfg.proto(train.front().features.dim()), tcfg);
  return embedded_reestimate(std::move(init), train, tr, tcfg).set;
}

struct FoldEval {
  std::vector<AlignmentResult> alignments;
  Counts counts;
};

// Decodes the test utterances with a bigram network estimated on the training
// transcripts at the network granularity, scoring in network units.
inline FoldEval evaluate(const HmmSet& set, const PronLexicon& lex, const P2VMap* map, Granularity classifier,
                         Granularity network, const Corpus& train, const Corpus& test, const ExperimentConfig& cfg) {
  const P2VMap* net_map = network == Granularity::visual_unit ? map : nullptr;
  auto lm = estimate_bigram(references(train, lex, network, net_map), cfg.discount);
  // Isolated-word corpora never train an sp model.
  NetworkOptions opt;
  opt.unit_pause = set.contains(std::string(kShortPause));
  auto net = build_network(lm, lex, map, classifier, network, opt);
  Decoder dec(set, net);
  FoldEval out;
  for (const auto& u : test) {
    auto ref = reference_labels(u.words, lex, network, net_map);
    auto hyp = dec.decode(u.features, cfg.decode_params());
    out.alignments.push_back(align(ref, hyp.labels));
    out.counts.add(out.alignments.back());
  }
  return out;
}

struct SizeSummary {
  std::size_t map_size = 0;
  std::string classifier_unit;
  std::string network_unit;
  std::string training;
  PooledCorrectness c;
  double unit_chance = 0.0;
  double homophene_ceiling = 0.0;
};

inline std::string summary_csv_header() {
  return "speaker,map_size,classifier_unit,network_unit,training,C_mean,C_se,unit_chance,homophene_ceiling\n";
}

inline std::string summary_csv_row(const std::string& speaker, const SizeSummary& s) {
  return speaker + "," + std::to_string(s.map_size) + "," + s.classifier_unit + "," + s.network_unit + "," +
         s.training + "," + text::format_double(s.c.mean) + "," + text::format_double(s.c.se) + "," +
         text::format_double(s.unit_chance) + "," + text::format_double(s.homophene_ceiling) + "\n";
}

inline SizeSummary summarize(std::size_t size, Granularity classifier, Granularity network, std::string training,
                             const std::vector<FoldEval>& folds, const GuessBaselines& g) {
  std::vector<double> cs;
  for (const auto& f : folds) cs.push_back(f.counts.n ? f.counts.correctness() : 0.0);
  return {size,
          std::string(granularity_name(classifier)),
          std::string(granularity_name(network)),
          std::move(training),
          pooled_correctness(cs),
          g.unit_chance,
          g.homophene_ceiling};
}

inline void append_rows(std::vector<ResultRow>& rows, const std::string& speaker, std::size_t size, Granularity c,
                        Granularity n, const std::string& training, const std::vector<FoldEval>& folds) {
  for (std::size_t f = 0; f < folds.size(); ++f) {
    rows.push_back({speaker, size, std::string(granularity_name(c)), std::string(granularity_name(n)), f,
                    folds[f].counts, training});
  }
}

// Output files, written only when an output directory is configured.
class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : dir_(dir) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
  }
  bool enabled() const { return !dir_.empty(); }
  std::string path(const std::string& name) const { return (std::filesystem::path(dir_) / name).string(); }
  void write(const std::string& name, const std::string& content) const {
    if (enabled()) text::write_file(path(name), content);
  }
  void append(const std::string& name, const std::string& content) const {
    if (!enabled()) return;
    std::ofstream out(path(name), std::ios::binary | std::ios::app);
    if (!out) throw Error("cannot write " + path(name));
    out << content;
  }

 private:
  std::string dir_;
};

// ---------------------------------------------------------------------------
// Discovery: phoneme classification, clustering, visual-unit classification.

struct PhonemeStep {
  std::vector<FoldEval> folds;
  ConfusionMatrix confusion;
  std::map<std::string, std::int64_t> deletions;
  std::map<std::string, std::int64_t> insertions;
};

inline PhonemeStep run_phoneme_step(const ExperimentConfig& cfg, const Experiment& e) {
  PhonemeStep out;
  out.folds = run_jobs<FoldEval>(e.plan.folds.size(), cfg.threads, [&](std::size_t f) {
    const auto train = subset(e.corpus, e.plan.folds[f].train);
    const auto test = subset(e.corpus, e.plan.folds[f].test);
    auto set = train_models(train, e.lexicon, Granularity::phoneme, nullptr, cfg);
    return evaluate(set, e.lexicon, nullptr, Granularity::phoneme, Granularity::phoneme, train, test, cfg);
  });
  const auto vocab = e.lexicon.phonemes_used();
  std::vector<ConfusionMatrix> parts;
  for (const auto& f : out.folds) {
    auto c = confusions_from_alignments(f.alignments, vocab);
    parts.push_back(std::move(c.k));
    for (const auto& [l, n] : c.deletions) out.deletions[l] += n;
    for (const auto& [l, n] : c.insertions) out.insertions[l] += n;
  }
  out.confusion = accumulate(parts);
  return out;
}

inline std::string format_confusion(const ConfusionMatrix& k) {
  std::string out = "actual\\predicted," + text::join(k.labels, ",") + "\n";
  for (std::size_t i = 0; i < k.size(); ++i) {
    out += k.labels[i];
    for (std::size_t j = 0; j < k.size(); ++j) out += "," + std::to_string(k.at(i, j));
    out += "\n";
  }
  return out;
}

inline ConfusionMatrix parse_confusion(std::string_view content) {
  auto ls = text::lines(content);
  std::size_t n = 0;
  ConfusionMatrix k;
  for (auto line : ls) {
    ++n;
    if (text::trim(line).empty()) continue;
    std::string row(line);
    std::replace(row.begin(), row.end(), ',', ' ');
    auto tok = text::split_ws(row);
    auto fail = [&](const std::string& m) { return ParseError("confusion line " + std::to_string(n) + ": " + m); };
    if (k.labels.empty()) {
      if (tok.size() < 2) throw fail("expected a header of labels");
      k = ConfusionMatrix(std::vector<std::string>(tok.begin() + 1, tok.end()));
      continue;
    }
    const std::size_t i = k.index(std::string(tok[0]));
    if (tok.size() != k.size() + 1) throw fail("expected " + std::to_string(k.size()) + " counts");
    for (std::size_t j = 0; j < k.size(); ++j) {
      if (!text::parse_int(tok[j + 1], k.at(i, j)) || k.at(i, j) < 0) throw fail("malformed count");
    }
  }
  if (k.labels.empty()) throw ParseError("confusion file is empty");
  return k;
}

inline P2VFamily family_from_confusion(const ConfusionMatrix& k, const PhoneInventory& inventory, std::uint64_t seed) {
  return cluster_family(k, inventory.categories(), derive_seed(seed, "ties"));
}

struct DiscoveryResult {
  PhonemeStep phonemes;
  P2VFamily family;
  std::vector<ResultRow> rows;
  std::vector<SizeSummary> summary;
};

inline DiscoveryResult run_discovery(const ExperimentConfig& cfg, const Experiment& e) {
  const OutputDir out(cfg.output);
  DiscoveryResult r;
  r.phonemes = run_phoneme_step(cfg, e);
  {
    std::vector<ResultRow> step1;
    append_rows(step1, cfg.speaker, e.lexicon.phonemes_used().size(), Granularity::phoneme, Granularity::phoneme,
                "flat", r.phonemes.folds);
    std::string csv = results_csv_header();
    for (const auto& row : step1) csv += results_csv_row(row);
    out.write("phoneme_results.csv", csv);
    out.write("confusion.csv", format_confusion(r.phonemes.confusion));
  }
  r.family = family_from_confusion(r.phonemes.confusion, e.inventory, cfg.seed);
  out.write("trace.txt", format_trace(r.family.trace));
  if (out.enabled()) {
    std::filesystem::create_directories(out.path("maps"));
    for (const auto& [m, map] : r.family.maps) {
      char name[32];
      std::snprintf(name, sizeof(name), "maps/size%02zu.p2v", m);
      out.write(name, format_p2v(map));
    }
  }

  std::vector<std::size_t> sizes = cfg.sizes;
  if (sizes.empty()) {
    for (const auto& [m, map] : r.family.maps) sizes.push_back(m);
  }
  out.write("results.csv", results_csv_header());
  out.write("summary.csv", summary_csv_header());
  for (auto size : sizes) {
    if (!r.family.maps.count(size)) continue;
    const P2VMap map = cover_lexicon(r.family.at(size), e.lexicon, CoverageMode::lenient);
    auto folds = run_jobs<FoldEval>(e.plan.folds.size(), cfg.threads, [&](std::size_t f) {
      const auto train = subset(e.corpus, e.plan.folds[f].train);
      const auto test = subset(e.corpus, e.plan.folds[f].test);
      auto set = train_models(train, e.lexicon, Granularity::visual_unit, &map, cfg);
      return evaluate(set, e.lexicon, &map, Granularity::visual_unit, cfg.network, train, test, cfg);
    });
    const std::size_t first = r.rows.size();
    append_rows(r.rows, cfg.speaker, size, Granularity::visual_unit, cfg.network, "flat", folds);
    r.summary.push_back(summarize(size, Granularity::visual_unit, cfg.network, "flat", folds,
                                  guess_baselines(e.lexicon, map)));
    std::string csv;
    for (std::size_t i = first; i < r.rows.size(); ++i) csv += results_csv_row(r.rows[i]);
    out.append("results.csv", csv);
    out.append("summary.csv", summary_csv_row(cfg.speaker, r.summary.back()));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Network study: every classifier/network pairing on the same folds.

inline const std::vector<std::pair<Granularity, Granularity>>& network_pairings() {
  static const std::vector<std::pair<Granularity, Granularity>> p = {
      {Granularity::visual_unit, Granularity::visual_unit}, {Granularity::visual_unit, Granularity::phoneme},
      {Granularity::phoneme, Granularity::phoneme},         {Granularity::visual_unit, Granularity::word},
      {Granularity::phoneme, Granularity::word},            {Granularity::word, Granularity::word}};
  return p;
}

struct StudyResult {
  std::vector<ResultRow> rows;
  std::vector<SizeSummary> summary;
};

inline StudyResult run_network_study(const ExperimentConfig& cfg, const Experiment& e) {
  if (!e.reference_map) throw ConfigError("the network study needs a P2V map (map=...)");
  const P2VMap map = cover_lexicon(*e.reference_map, e.lexicon, CoverageMode::lenient);
  const auto& pairs = network_pairings();
  // Per fold: train once per classifier granularity, decode with every network.
  auto per_fold = run_jobs<std::vector<FoldEval>>(e.plan.folds.size(), cfg.threads, [&](std::size_t f) {
    const auto train = subset(e.corpus, e.plan.folds[f].train);
    const auto test = subset(e.corpus, e.plan.folds[f].test);
    std::map<Granularity, HmmSet> sets;
    std::vector<FoldEval> evals;
    for (const auto& [c, n] : pairs) {
      if (!sets.count(c)) sets.emplace(c, train_models(train, e.lexicon, c, &map, cfg));
      evals.push_back(evaluate(sets.at(c), e.lexicon, &map, c, n, train, test, cfg));
    }
    return evals;
  });
  StudyResult r;
  const auto g = guess_baselines(e.lexicon, map);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    std::vector<FoldEval> folds;
    for (const auto& f : per_fold) folds.push_back(f[p]);
    append_rows(r.rows, cfg.speaker, map.size(), pairs[p].first, pairs[p].second, "flat", folds);
    r.summary.push_back(summarize(map.size(), pairs[p].first, pairs[p].second, "flat", folds, g));
  }
  const OutputDir out(cfg.output);
  std::string csv = results_csv_header(), sum = summary_csv_header();
  for (const auto& row : r.rows) csv += results_csv_row(row);
  for (const auto& s : r.summary) sum += summary_csv_row(cfg.speaker, s);
  out.write("netstudy_results.csv", csv);
  out.write("netstudy_summary.csv", sum);
  return r;
}

// ---------------------------------------------------------------------------
// Hierarchical study: per map size, visual-unit models and hierarchically
// trained phoneme models, each decoded with word and phoneme networks. Flat
// started phoneme models give a size-independent baseline.

inline StudyResult run_hierarchical_study(const ExperimentConfig& cfg, const Experiment& e, const P2VFamily& family) {
  const OutputDir out(cfg.output);
  StudyResult r;
  const auto P = Granularity::phoneme, W = Granularity::word, V = Granularity::visual_unit;
  const std::size_t phonemes = e.lexicon.phonemes_used().size();
  auto baseline = run_jobs<std::vector<FoldEval>>(e.plan.folds.size(), cfg.threads, [&](std::size_t f) {
    const auto train = subset(e.corpus, e.plan.folds[f].train);
    const auto test = subset(e.corpus, e.plan.folds[f].test);
    auto set = train_models(train, e.lexicon, P, nullptr, cfg);
    return std::vector<FoldEval>{evaluate(set, e.lexicon, nullptr, P, W, train, test, cfg),
                                 evaluate(set, e.lexicon, nullptr, P, P, train, test, cfg)};
  });
  out.write("hierstudy_results.csv", results_csv_header());
  out.write("hierstudy_summary.csv", summary_csv_header());
  auto emit = [&](std::size_t size, Granularity c, Granularity n, const std::string& training,
                  const std::vector<FoldEval>& folds, const GuessBaselines& g) {
    const std::size_t first = r.rows.size();
    append_rows(r.rows, cfg.speaker, size, c, n, training, folds);
    r.summary.push_back(summarize(size, c, n, training, folds, g));
    std::string csv;
    for (std::size_t i = first; i < r.rows.size(); ++i) csv += results_csv_row(r.rows[i]);
    out.append("hierstudy_results.csv", csv);
    out.append("hierstudy_summary.csv", summary_csv_row(cfg.speaker, r.summary.back()));
  };
  {
    const auto g = guess_baselines(e.lexicon, P2VMap::identity(e.lexicon.phonemes_used()));
    for (std::size_t k = 0; k < 2; ++k) {
      std::vector<FoldEval> folds;
      for (const auto& b : baseline) folds.push_back(b[k]);
      emit(phonemes, P, k == 0 ? W : P, "flat", folds, g);
    }
  }
  const auto tcfg = cfg.train_config();
  for (std::size_t size = cfg.size_min; size <= cfg.size_max; ++size) {
    if (!family.maps.count(size)) continue;
    const P2VMap map = cover_lexicon(family.at(size), e.lexicon, CoverageMode::lenient);
    auto per_fold = run_jobs<std::vector<FoldEval>>(e.plan.folds.size(), cfg.threads, [&](std::size_t f) {
      const auto train = subset(e.corpus, e.plan.folds[f].train);
      const auto test = subset(e.corpus, e.plan.folds[f].test);
      auto h = hierarchical_train(train, e.lexicon, map, cfg.proto(train.front().features.dim()), tcfg);
      return std::vector<FoldEval>{evaluate(h.visual, e.lexicon, &map, V, W, train, test, cfg),
                                   evaluate(h.visual, e.lexicon, &map, V, P, train, test, cfg),
                                   evaluate(h.phoneme, e.lexicon, nullptr, P, W, train, test, cfg),
                                   evaluate(h.phoneme, e.lexicon, nullptr, P, P, train, test, cfg)};
    });
    const auto g = guess_baselines(e.lexicon, map);
    const std::pair<Granularity, Granularity> series[4] = {{V, W}, {V, P}, {P, W}, {P, P}};
    for (std::size_t k = 0; k < 4; ++k) {
      std::vector<FoldEval> folds;
      for (const auto& f : per_fold) folds.push_back(f[k]);
      emit(size, series[k].first, series[k].second, k < 2 ? "flat" : "hierarchical", folds, g);
    }
  }
  return r;
}

}  // namespace visunit
