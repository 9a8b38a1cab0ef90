#pragma once

// Command-line front end. dispatch() returns the process exit code:
// 0 success, 1 usage error, 2 data error.

#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ote/ote.hpp"

namespace ote::cli {

namespace fs = std::filesystem;

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::string out;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    out += buf;
  }
  return out;
}

inline std::shared_ptr<spdlog::logger> logger() {
  static auto log = [] {
    auto l = spdlog::stderr_color_mt("ote");
    l->set_pattern("[%l] %v");
    const char* env = std::getenv("OTE_LOG");
    l->set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
    return l;
  }();
  return log;
}

/// Records what a run read and wrote; stored as JSON beside the output.
class Manifest {
 public:
  explicit Manifest(std::string subcommand)
      : subcommand_(std::move(subcommand)), start_(std::chrono::steady_clock::now()) {}

  void input(const std::string& path, std::string_view content) { inputs_[path] = sha256_hex(content); }
  void output(const std::string& path, std::string_view content) { outputs_[path] = sha256_hex(content); }

  void options_from(const CLI::App& app) {
    for (const auto* opt : app.get_options()) {
      if (opt->count() == 0 || opt->get_name() == "--help") continue;
      options_[opt->get_name()] = opt->results();
    }
  }

  void write(const fs::path& path) const {
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    nlohmann::json j{{"subcommand", subcommand_},
                     {"options", options_},
                     {"inputs", inputs_},
                     {"outputs", outputs_},
                     {"tool_version", OTE_VERSION},
                     {"wall_time_seconds", secs}};
    io::write_file_atomic(path, j.dump(2) + "\n");
  }

 private:
  std::string subcommand_;
  std::chrono::steady_clock::time_point start_;
  std::map<std::string, std::vector<std::string>> options_;
  std::map<std::string, std::string> inputs_, outputs_;
};

inline fs::path manifest_path(const std::string& output) { return output + ".manifest.json"; }

struct LexiconSpec {
  std::string name;
  std::optional<LexiconFamily> family;
  std::string path;
};

/// Parses "NAME=PATH" or "family:NAME=PATH".
inline LexiconSpec parse_lexicon_spec(const std::string& s) {
  auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
    throw CLI::ValidationError("--lexicon", "expected NAME=PATH, got '" + s + "'");
  LexiconSpec spec{s.substr(0, eq), std::nullopt, s.substr(eq + 1)};
  auto colon = spec.name.find(':');
  if (colon != std::string::npos) {
    spec.family = parse_family(spec.name.substr(0, colon));
    if (!spec.family) throw CLI::ValidationError("--lexicon", "unknown family in '" + s + "'");
    spec.name = spec.name.substr(colon + 1);
  }
  return spec;
}

inline std::vector<Sentence> read_corpus(const std::string& bytes, bool lenient = false) {
  if (looks_like_xml(bytes)) {
    std::vector<ParseWarning> warnings;
    auto out = convert_xml(bytes, BioOptions{lenient}, &warnings);
    for (const auto& w : warnings) logger()->warn("sentence {}: {}", w.sentence_id, w.message);
    return out;
  }
  return read_column(bytes);
}

struct LoadedLexicons {
  LexiconMap map;
  std::vector<LexiconRef> refs;
};

inline void load_into(LoadedLexicons& out, const LexiconSpec& spec, const FeatureConfig* cfg, Manifest& manifest) {
  if (out.map.count(spec.name)) throw Error("lexicon '" + spec.name + "' given twice");
  auto bytes = io::read_file(spec.path);
  manifest.input(spec.path, bytes);
  auto family = spec.family.value_or(detect_family(bytes));
  Casing casing = Casing::lowercase;
  if (cfg) {
    auto it = cfg->casing.find(spec.name);
    if (it != cfg->casing.end()) casing = it->second;
  }
  auto lex = std::make_shared<ClusterLexicon>(load_lexicon(bytes, spec.name, family, casing));
  logger()->info("loaded {} lexicon {} ({} words)", family_name(family), spec.name, lex->size());
  out.refs.push_back({spec.name, family, casing, lex->fingerprint(), fs::absolute(spec.path).string()});
  out.map.emplace(spec.name, std::move(lex));
}

struct Options {
  unsigned threads = default_threads();

  // convert
  std::string xml, out;
  bool lenient = false, stats = false;

  // induce-brown
  std::string corpus;
  std::size_t classes = 0, window = 0;
  std::uint64_t min_count = 5;
  bool no_preprocess = false;

  // induce-kmeans
  std::string vectors, metric = "cosine";
  std::size_t k = 0;
  std::uint64_t seed = 1;

  // train / tag
  std::string train_file, config, model, in;
  std::vector<std::string> lexicons;
  int epochs = 10;

  // eval
  std::string gold, pred, manifest;
  std::size_t errors = 0;
  bool json = false;

  // cv-search
  std::vector<std::string> clark, w2v, brown;
  std::size_t folds = 5;
  std::string report;
};

inline int run_convert(const Options& o, const CLI::App& app) {
  Manifest m("convert");
  m.options_from(app);
  auto bytes = io::read_file(o.xml);
  m.input(o.xml, bytes);
  std::vector<ParseWarning> warnings;
  auto sentences = convert_xml(bytes, BioOptions{o.lenient}, &warnings);
  for (const auto& w : warnings) logger()->warn("sentence {}: {}", w.sentence_id, w.message);
  auto text = write_column(sentences);
  io::write_file_atomic(o.out, text);
  m.output(o.out, text);
  if (o.stats) {
    auto st = corpus_stats(sentences);
    std::cout << "sentences\t" << sentences.size() << "\n"
              << "tokens\t" << st.tokens << "\n"
              << "b_targets\t" << st.b_targets << "\n"
              << "i_targets\t" << st.i_targets << "\n"
              << "multiword_targets\t" << st.multiword_targets << "\n"
              << "multiword_target_fraction\t" << st.multiword_target_fraction << "\n";
  }
  m.write(manifest_path(o.out));
  return 0;
}

inline int run_induce_brown(const Options& o, const CLI::App& app) {
  Manifest m("induce-brown");
  m.options_from(app);
  auto bytes = io::read_file(o.corpus);
  m.input(o.corpus, bytes);
  std::vector<std::vector<std::string>> lines;
  text::for_each_line(bytes, [&](std::string_view line, std::size_t) {
    std::vector<std::string> toks;
    for (auto t : text::split_blanks(line)) toks.push_back(o.no_preprocess ? std::string(t) : brown::preprocess_token(t));
    if (!toks.empty()) lines.push_back(std::move(toks));
  });
  auto stats = brown::count_bigrams(lines, o.min_count);
  std::size_t window = o.window ? o.window : o.classes;
  logger()->info("clustering {} word types into {} classes (window {})", stats.vocab.size(), o.classes, window);
  auto result = brown::brown_cluster(stats, o.classes, window, brown::BrownOptions{o.threads});
  auto lex = brown::emit_paths(result.tree, "brown");
  auto text = write_lexicon(lex);
  io::write_file_atomic(o.out, text);
  m.output(o.out, text);
  m.write(manifest_path(o.out));
  return 0;
}

inline int run_induce_kmeans(const Options& o, const CLI::App& app) {
  Manifest m("induce-kmeans");
  m.options_from(app);
  auto bytes = io::read_file(o.vectors);
  m.input(o.vectors, bytes);
  auto table = kmeans::load_vectors(bytes);
  auto metric = o.metric == "euclidean" ? kmeans::Metric::euclidean : kmeans::Metric::cosine;
  auto res = kmeans::kmeans(std::move(table), o.k, o.seed, metric, kmeans::KMeansOptions{100, o.threads});
  logger()->info("k-means finished after {} iterations, inertia {}", res.iterations, res.inertia);
  auto text = write_lexicon(kmeans::to_lexicon(res, "w2v"));
  io::write_file_atomic(o.out, text);
  m.output(o.out, text);
  m.write(manifest_path(o.out));
  return 0;
}

inline int run_train(const Options& o, const CLI::App& app) {
  Manifest m("train");
  m.options_from(app);
  FeatureConfig cfg;
  if (!o.config.empty()) {
    auto cbytes = io::read_file(o.config);
    m.input(o.config, cbytes);
    cfg = FeatureConfig::from_text(cbytes);
  }
  LoadedLexicons lex;
  for (const auto& s : o.lexicons) load_into(lex, parse_lexicon_spec(s), &cfg, m);
  // Lexicons given on the command line are active unless the config lists its own set.
  if (o.config.empty() || cfg.lexicons.empty())
    for (const auto& r : lex.refs)
      if (std::find(cfg.lexicons.begin(), cfg.lexicons.end(), r.name) == cfg.lexicons.end())
        cfg.lexicons.push_back(r.name);
  auto bytes = io::read_file(o.train_file);
  m.input(o.train_file, bytes);
  auto corpus = read_corpus(bytes, o.lenient);
  TrainStats stats;
  auto model = train(corpus, cfg, lex.map, TrainOptions{o.epochs, o.seed, Averaging::lazy}, &stats);
  for (auto& ref : model.lexicons)
    for (const auto& r : lex.refs)
      if (r.name == ref.name) ref.path = r.path;
  for (std::size_t e = 0; e < stats.mistakes_per_epoch.size(); ++e)
    logger()->debug("epoch {}: {} token errors", e + 1, stats.mistakes_per_epoch[e]);
  auto text = save_model(model);
  io::write_file_atomic(o.out, text);
  m.output(o.out, text);
  m.write(manifest_path(o.out));
  return 0;
}

inline int run_tag(const Options& o, const CLI::App& app) {
  Manifest m("tag");
  m.options_from(app);
  auto mbytes = io::read_file(o.model);
  m.input(o.model, mbytes);
  auto model = load_model(mbytes);
  std::map<std::string, LexiconSpec> overrides;
  for (const auto& s : o.lexicons) {
    auto spec = parse_lexicon_spec(s);
    overrides[spec.name] = spec;
  }
  LoadedLexicons lex;
  for (const auto& ref : model.lexicons) {
    auto it = overrides.find(ref.name);
    LexiconSpec spec = it != overrides.end() ? it->second : LexiconSpec{ref.name, ref.family, ref.path};
    if (!spec.family) spec.family = ref.family;
    FeatureConfig casing_cfg;
    casing_cfg.casing[ref.name] = ref.casing;
    load_into(lex, spec, &casing_cfg, m);
  }
  for (const auto& w : verify_lexicons(model, lex.map)) logger()->warn("{}", w);
  auto bytes = io::read_file(o.in);
  m.input(o.in, bytes);
  auto text = tag_file(model, bytes, lex.map, o.threads);
  io::write_file_atomic(o.out, text);
  m.output(o.out, text);
  m.write(manifest_path(o.out));
  return 0;
}

inline int run_eval(const Options& o, const CLI::App& app) {
  Manifest m("eval");
  m.options_from(app);
  auto gbytes = io::read_file(o.gold);
  auto pbytes = io::read_file(o.pred);
  m.input(o.gold, gbytes);
  m.input(o.pred, pbytes);
  auto gold = read_corpus(gbytes, true);
  auto pred = read_corpus(pbytes, true);
  auto report = evaluate(gold, pred, o.errors ? o.errors : 5);
  if (o.json) {
    std::cout << to_json(report).dump(2) << "\n";
  } else {
    std::printf("P = %.4f  R = %.4f  F1 = %.4f  (tp=%zu fp=%zu fn=%zu)\n", report.precision, report.recall,
                report.f1, report.tp, report.fp, report.fn);
    if (o.errors) {
      auto listing = error_report(report, o.errors);
      std::printf("top false positives:\n");
      for (const auto& e : listing.fp) std::printf("  %zu\t%s\n", e.count, e.surface.c_str());
      std::printf("top false negatives:\n");
      for (const auto& e : listing.fn) std::printf("  %zu\t%s\n", e.count, e.surface.c_str());
    }
  }
  if (!o.manifest.empty()) m.write(o.manifest);
  return 0;
}

inline int run_cv_search(const Options& o, const CLI::App& app) {
  Manifest m("cv-search");
  m.options_from(app);
  FeatureConfig base;
  if (!o.config.empty()) {
    auto cbytes = io::read_file(o.config);
    m.input(o.config, cbytes);
    base = FeatureConfig::from_text(cbytes);
    base.lexicons.clear();
  }
  LoadedLexicons lex;
  cv::SearchSpace space;
  auto load_family = [&](const std::vector<std::string>& specs, LexiconFamily fam, std::vector<std::string>& names) {
    for (const auto& s : specs) {
      auto spec = parse_lexicon_spec(s);
      spec.family = fam;
      load_into(lex, spec, &base, m);
      names.push_back(spec.name);
    }
  };
  load_family(o.clark, LexiconFamily::Clark, space.clark);
  load_family(o.w2v, LexiconFamily::Word2vecKMeans, space.w2v);
  load_family(o.brown, LexiconFamily::Brown, space.brown);
  space.folds = o.folds;
  space.epochs = o.epochs;
  space.seed = o.seed;
  space.threads = o.threads;
  space.base = base;
  auto bytes = io::read_file(o.train_file);
  m.input(o.train_file, bytes);
  auto corpus = read_corpus(bytes, o.lenient);
  auto result = cv::search(corpus, space, lex.map);
  for (const auto& s : result.ranked) logger()->info("{:.4f}  {}", s.mean_f1, s.config.name());
  logger()->info("winner: {}", result.winner.name());
  auto text = cv::to_json(result).dump(2) + "\n";
  io::write_file_atomic(o.report, text);
  m.output(o.report, text);
  m.write(manifest_path(o.report));
  return 0;
}

inline int dispatch(int argc, const char* const* argv) {
  CLI::App app{"Opinion target extraction toolkit"};
  app.set_version_flag("--version", "ote " OTE_VERSION);
  app.require_subcommand(1);
  Options o;
  app.add_option("--threads", o.threads, "Worker threads (default: available cores)")->check(CLI::PositiveNumber);

  auto* convert = app.add_subcommand("convert", "Convert ABSA XML to BIO column format");
  convert->add_option("--xml", o.xml, "ABSA XML input")->required();
  convert->add_option("--out", o.out, "Column output")->required();
  convert->add_flag("--lenient", o.lenient, "Keep the earlier of two overlapping targets instead of failing");
  convert->add_flag("--stats", o.stats, "Print corpus statistics");

  auto* ibrown = app.add_subcommand("induce-brown", "Induce Brown clusters from a tokenized corpus");
  ibrown->add_option("--corpus", o.corpus, "One sentence per line, tokens separated by blanks")->required();
  ibrown->add_option("--classes", o.classes, "Number of classes")->required();
  ibrown->add_option("--window", o.window, "Active-set size (default: --classes)");
  ibrown->add_option("--min-count", o.min_count, "Minimum word frequency")->capture_default_str();
  ibrown->add_flag("--no-preprocess", o.no_preprocess, "Skip lowercasing and digit normalization");
  ibrown->add_option("--out", o.out, "Brown paths output")->required();

  auto* ikm = app.add_subcommand("induce-kmeans", "Cluster word vectors into flat classes");
  ikm->add_option("--vectors", o.vectors, "word2vec text-format vectors")->required();
  ikm->add_option("--k", o.k, "Number of clusters")->required();
  ikm->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  ikm->add_option("--metric", o.metric, "euclidean or cosine")
      ->check(CLI::IsMember({"euclidean", "cosine"}))
      ->capture_default_str();
  ikm->add_option("--out", o.out, "Word-class output")->required();

  auto* tr = app.add_subcommand("train", "Train a perceptron tagger");
  tr->add_option("--train", o.train_file, "Column or ABSA XML training data")->required();
  tr->add_option("--config", o.config, "Feature config (key=value lines)");
  tr->add_option("--lexicon", o.lexicons, "[family:]NAME=PATH, repeatable");
  tr->add_option("--epochs", o.epochs, "Training epochs")->check(CLI::PositiveNumber)->capture_default_str();
  tr->add_option("--seed", o.seed, "Shuffle seed")->capture_default_str();
  tr->add_flag("--lenient", o.lenient, "Resolve overlapping XML targets instead of failing");
  tr->add_option("--out", o.out, "Model output")->required();

  auto* tag = app.add_subcommand("tag", "Tag column or ABSA XML input");
  tag->add_option("--model", o.model, "Trained model")->required();
  tag->add_option("--in", o.in, "Input file")->required();
  tag->add_option("--out", o.out, "Column output with offsets")->required();
  tag->add_option("--lexicon", o.lexicons, "Override a lexicon path: NAME=PATH");

  auto* ev = app.add_subcommand("eval", "Exact-span evaluation");
  ev->add_option("--gold", o.gold, "Gold column or ABSA XML")->required();
  ev->add_option("--pred", o.pred, "Predicted column file")->required();
  ev->add_option("--errors", o.errors, "List the top K false positive and negative surfaces");
  ev->add_flag("--json", o.json, "Print the full report as JSON");
  ev->add_option("--manifest", o.manifest, "Write a run manifest here");

  auto* cvs = app.add_subcommand("cv-search", "Cross-validated lexicon combination search");
  cvs->add_option("--train", o.train_file, "Column or ABSA XML training data")->required();
  cvs->add_option("--clark", o.clark, "NAME=PATH, repeatable");
  cvs->add_option("--w2v", o.w2v, "NAME=PATH, repeatable");
  cvs->add_option("--brown", o.brown, "NAME=PATH, repeatable");
  cvs->add_option("--config", o.config, "Feature config for the local templates");
  cvs->add_option("--folds", o.folds, "Number of folds")->capture_default_str();
  cvs->add_option("--epochs", o.epochs, "Training epochs")->check(CLI::PositiveNumber)->capture_default_str();
  cvs->add_option("--seed", o.seed, "Seed for folds and shuffling")->capture_default_str();
  cvs->add_flag("--lenient", o.lenient, "Resolve overlapping XML targets instead of failing");
  cvs->add_option("--report", o.report, "JSON report output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*convert) return run_convert(o, *convert);
    if (*ibrown) return run_induce_brown(o, *ibrown);
    if (*ikm) return run_induce_kmeans(o, *ikm);
    if (*tr) return run_train(o, *tr);
    if (*tag) return run_tag(o, *tag);
    if (*ev) return run_eval(o, *ev);
    if (*cvs) return run_cv_search(o, *cvs);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    logger()->error("{}", e.what());
    return 2;
  }
  return 1;
}

}  // namespace ote::cli
