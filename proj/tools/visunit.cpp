// visunit command-line interface.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "visunit/pipeline.hpp"

namespace {

using namespace visunit;

struct Common {
  std::string config_file;
  std::map<std::string, std::string> overrides;
};

// Registers --<key> for every configuration key plus --config.
void add_config_flags(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_file, "key=value configuration file")->check(CLI::ExistingFile);
  for (const auto& key : ExperimentConfig::keys()) {
    app->add_option_function<std::string>("--" + key, [&c, key](const std::string& v) { c.overrides[key] = v; },
                                          "override '" + key + "'");
  }
}

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg = c.config_file.empty() ? ExperimentConfig{} : ExperimentConfig::parse(text::read_file(c.config_file));
  for (const auto& [k, v] : c.overrides) cfg.set(k, v);
  return cfg;
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  if (cfg.output.empty()) throw ConfigError("this command needs --output");
  std::filesystem::create_directories(cfg.output);
  return (std::filesystem::path(cfg.output) / name).string();
}

// "id label label ..." lines.
std::map<std::string, std::vector<std::string>> read_transcripts(const std::string& path) {
  std::map<std::string, std::vector<std::string>> out;
  const std::string content = text::read_file(path);
  for (auto line : text::lines(content)) {
    auto tok = text::split_ws(line);
    if (tok.empty()) continue;
    out[std::string(tok[0])] = std::vector<std::string>(tok.begin() + 1, tok.end());
  }
  return out;
}

const Fold& pick_fold(const Experiment& e, std::size_t fold) {
  if (fold >= e.plan.folds.size()) throw ConfigError("fold index out of range");
  return e.plan.folds[fold];
}

std::optional<P2VMap> map_for(const Experiment& e, Granularity g) {
  if (g != Granularity::visual_unit) return std::nullopt;
  if (!e.reference_map) throw ConfigError("visual-unit models need --map");
  return cover_lexicon(*e.reference_map, e.lexicon, CoverageMode::lenient);
}

void print_summary(const std::string& speaker, const std::vector<SizeSummary>& s) {
  std::cout << summary_csv_header();
  for (const auto& row : s) std::cout << summary_csv_row(speaker, row);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visual speech unit discovery and recognition"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus, lexicon and cluster map");
  auto* folds = app.add_subcommand("folds", "plan cross-validation folds");
  auto* train = app.add_subcommand("train", "flat start and re-estimate models on one fold's training set");
  auto* decode = app.add_subcommand("decode", "decode one fold's test set");
  auto* score = app.add_subcommand("score", "align hypotheses against references");
  auto* cluster = app.add_subcommand("cluster", "cluster a confusion matrix into a P2V family");
  auto* discover = app.add_subcommand("discover", "phoneme classification, clustering, visual-unit classification");
  auto* netstudy = app.add_subcommand("netstudy", "all classifier/network unit pairings");
  auto* hierstudy = app.add_subcommand("hierstudy", "hierarchical training study over map sizes");
  for (auto* sub : {synth, folds, train, decode, cluster, discover, netstudy, hierstudy}) add_config_flags(sub, common);

  std::size_t fold = 0;
  std::string units = "phoneme", network_units = "phoneme", models_path, hyp_out;
  train->add_option("--fold", fold, "fold index");
  train->add_option("--units", units, "viseme | phoneme | word");
  train->add_option("--models", models_path, "output model file")->required();
  decode->add_option("--fold", fold, "fold index");
  decode->add_option("--units", units, "classifier units");
  decode->add_option("--network-units", network_units, "network units");
  decode->add_option("--models", models_path, "model file")->required()->check(CLI::ExistingFile);
  decode->add_option("--hyp", hyp_out, "output transcript file")->required();

  std::string ref_path, hyp_path;
  score->add_option("--ref", ref_path, "reference transcripts")->required()->check(CLI::ExistingFile);
  score->add_option("--hyp", hyp_path, "hypothesis transcripts")->required()->check(CLI::ExistingFile);

  std::string confusion_path;
  cluster->add_option("--confusion", confusion_path, "confusion matrix CSV")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*score) {
      const auto refs = read_transcripts(ref_path);
      const auto hyps = read_transcripts(hyp_path);
      Counts c;
      for (const auto& [id, ref] : refs) {
        auto it = hyps.find(id);
        c.add(align(ref, it == hyps.end() ? std::vector<std::string>{} : it->second));
      }
      std::cout << "N=" << c.n << " D=" << c.d << " S=" << c.s << " I=" << c.i
                << " C=" << text::format_double(c.correctness()) << " Acc=" << text::format_double(c.accuracy())
                << "\n";
      return 0;
    }
    const ExperimentConfig cfg = load_config(common);
    if (*cluster) {
      cfg.validate();
      const auto inventory =
          cfg.inventory.empty() ? PhoneInventory::british45() : PhoneInventory::parse(text::read_file(cfg.inventory));
      const auto family = family_from_confusion(parse_confusion(text::read_file(confusion_path)), inventory, cfg.seed);
      text::write_file(out_path(cfg, "trace.txt"), format_trace(family.trace));
      std::filesystem::create_directories(out_path(cfg, "maps"));
      for (const auto& [m, map] : family.maps) {
        char name[32];
        std::snprintf(name, sizeof(name), "maps/size%02zu.p2v", m);
        text::write_file(out_path(cfg, name), format_p2v(map));
      }
      std::cout << format_trace(family.trace);
      return 0;
    }
    if (*synth) {
      cfg.validate();
      const auto inventory =
          cfg.inventory.empty() ? PhoneInventory::british45() : PhoneInventory::parse(text::read_file(cfg.inventory));
      auto s = make_synthetic(cfg.synth, inventory, derive_seed(cfg.seed, "synth"));
      write_corpus(s.corpus, out_path(cfg, "corpus.txt"));
      text::write_file(out_path(cfg, "lexicon.dict"), s.lexicon.format());
      text::write_file(out_path(cfg, "clusters.p2v"), format_p2v(s.cluster_map));
      text::write_file(out_path(cfg, "inventory.phones"), inventory.format());
      std::cout << "wrote " << s.corpus.size() << " utterances, " << s.lexicon.size() << " words to " << cfg.output
                << "\n";
      return 0;
    }
    const Experiment e = load_experiment(cfg);
    if (*folds) {
      const std::string text_out = format_folds(e.plan, e.corpus);
      if (cfg.output.empty()) {
        std::cout << text_out;
      } else {
        text::write_file(out_path(cfg, "folds.txt"), text_out);
      }
    } else if (*train) {
      const Granularity g = parse_granularity(units);
      const auto map = map_for(e, g);
      const auto& f = pick_fold(e, fold);
      auto set = train_models(subset(e.corpus, f.train), e.lexicon, g, map ? &*map : nullptr, cfg);
      write_hmmset(set, models_path);
    } else if (*decode) {
      const Granularity g = parse_granularity(units), n = parse_granularity(network_units);
      const auto map = map_for(e, g == Granularity::visual_unit || n == Granularity::visual_unit
                                      ? Granularity::visual_unit
                                      : g);
      const P2VMap* mp = map ? &*map : nullptr;
      const auto& f = pick_fold(e, fold);
      const auto tr = subset(e.corpus, f.train);
      const auto set = read_hmmset(models_path);
      auto lm = estimate_bigram(references(tr, e.lexicon, n, n == Granularity::visual_unit ? mp : nullptr),
                                cfg.discount);
      auto net = build_network(lm, e.lexicon, mp, g, n);
      Decoder dec(set, net);
      std::string out;
      for (auto i : f.test) {
        auto r = dec.decode(e.corpus[i].features, cfg.decode_params());
        out += e.corpus[i].id;
        for (const auto& l : r.labels) out += " " + l;
        out += "\n";
      }
      text::write_file(hyp_out, out);
    } else if (*discover) {
      auto r = run_discovery(cfg, e);
      print_summary(cfg.speaker, r.summary);
    } else if (*netstudy) {
      print_summary(cfg.speaker, run_network_study(cfg, e).summary);
    } else if (*hierstudy) {
      auto step = run_phoneme_step(cfg, e);
      auto family = family_from_confusion(step.confusion, e.inventory, cfg.seed);
      print_summary(cfg.speaker, run_hierarchical_study(cfg, e, family).summary);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
