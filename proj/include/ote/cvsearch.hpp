#pragma once

// Lexicon-combination search by k-fold cross-validation: every subset of the
// Clark and word2vec lexicons first, then the best of those extended with
// every subset of the Brown lexicons.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ote/corpus_io.hpp"
#include "ote/error.hpp"
#include "ote/evaluate.hpp"
#include "ote/features.hpp"
#include "ote/parallel.hpp"
#include "ote/tagger.hpp"

namespace ote::cv {

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> dev;
};

/// Shuffles sentence indices with the seed and cuts them into k contiguous
/// blocks whose sizes differ by at most one; block f is fold f's dev set.
inline std::vector<Fold> make_folds(std::size_t corpus_size, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error("need at least 2 folds");
  if (corpus_size < k)
    throw Error("corpus of " + std::to_string(corpus_size) + " sentences is smaller than " + std::to_string(k) +
                " folds");
  std::vector<std::size_t> order(corpus_size);
  for (std::size_t i = 0; i < corpus_size; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Fold> folds(k);
  std::size_t base = corpus_size / k, extra = corpus_size % k, pos = 0;
  std::vector<std::size_t> block_of(corpus_size);
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t len = base + (f < extra ? 1 : 0);
    for (std::size_t t = pos; t < pos + len; ++t) block_of[order[t]] = f;
    folds[f].dev.assign(order.begin() + static_cast<long>(pos), order.begin() + static_cast<long>(pos + len));
    pos += len;
  }
  for (std::size_t f = 0; f < k; ++f)
    for (std::size_t t = 0; t < corpus_size; ++t)
      if (block_of[order[t]] != f) folds[f].train.push_back(order[t]);
  return folds;
}

struct SearchSpace {
  std::vector<std::string> clark;
  std::vector<std::string> w2v;
  std::vector<std::string> brown;
  std::size_t folds = 5;
  int epochs = 10;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  FeatureConfig base;  // local templates shared by every candidate
};

struct ConfigScore {
  FeatureConfig config;
  double mean_f1 = 0.0;
  std::vector<double> fold_f1;
  int stage = 1;
};

struct SearchResult {
  std::vector<ConfigScore> ranked;  // every evaluated config once, best first
  FeatureConfig stage1_winner;
  FeatureConfig winner;
  std::size_t stage1_evaluations = 0;
  std::size_t stage2_evaluations = 0;
};

inline constexpr double kScoreTieTolerance = 1e-12;

/// Mean F1 descending, then fewer lexicons, then config name.
inline bool ranks_before(const ConfigScore& a, const ConfigScore& b) {
  if (std::abs(a.mean_f1 - b.mean_f1) > kScoreTieTolerance) return a.mean_f1 > b.mean_f1;
  if (a.config.lexicons.size() != b.config.lexicons.size())
    return a.config.lexicons.size() < b.config.lexicons.size();
  return a.config.name() < b.config.name();
}

/// Span F1 of each fold's dev set for a model trained on the other folds.
inline std::vector<double> cross_validate(const std::vector<Sentence>& corpus, const std::vector<Fold>& folds,
                                          const FeatureConfig& cfg, const LexiconMap& lexicons,
                                          const TrainOptions& opts) {
  std::vector<double> out;
  for (const auto& fold : folds) {
    std::vector<Sentence> train_set, dev;
    for (auto i : fold.train) train_set.push_back(corpus[i]);
    for (auto i : fold.dev) dev.push_back(corpus[i]);
    auto model = train(train_set, cfg, lexicons, opts);
    auto pred = dev;
    tag_sentences(model, pred, lexicons);
    out.push_back(evaluate(dev, pred).f1);
  }
  return out;
}

inline std::vector<FeatureConfig> subsets(const FeatureConfig& base, const std::vector<std::string>& prefix,
                                          const std::vector<std::string>& pool) {
  if (pool.size() >= 20) throw Error("too many lexicons for exhaustive subset search");
  std::vector<FeatureConfig> out;
  for (std::uint32_t mask = 0; mask < (1u << pool.size()); ++mask) {
    FeatureConfig cfg = base;
    cfg.lexicons = prefix;
    for (std::size_t b = 0; b < pool.size(); ++b)
      if (mask & (1u << b)) cfg.lexicons.push_back(pool[b]);
    out.push_back(std::move(cfg));
  }
  return out;
}

inline SearchResult search(const std::vector<Sentence>& corpus, const SearchSpace& space, const LexiconMap& lexicons) {
  if (corpus.empty()) throw Error("cannot search on an empty corpus");
  auto check = [&](const std::vector<std::string>& names, LexiconFamily fam) {
    for (const auto& n : names) {
      auto it = lexicons.find(n);
      if (it == lexicons.end() || !it->second) throw Error("lexicon '" + n + "' is not loaded");
      if (it->second->family() != fam)
        throw Error("lexicon '" + n + "' is not a " + std::string(family_name(fam)) + " lexicon");
    }
  };
  check(space.clark, LexiconFamily::Clark);
  check(space.w2v, LexiconFamily::Word2vecKMeans);
  check(space.brown, LexiconFamily::Brown);

  const auto folds = make_folds(corpus.size(), space.folds, space.seed);
  const TrainOptions opts{space.epochs, space.seed, Averaging::lazy};
  std::map<std::string, ConfigScore> scored;

  auto run_stage = [&](const std::vector<FeatureConfig>& configs, int stage) {
    std::vector<std::size_t> todo;
    for (std::size_t c = 0; c < configs.size(); ++c)
      if (!scored.count(configs[c].name())) todo.push_back(c);
    // One job per (config, fold); aggregation below runs in a fixed order.
    std::vector<std::vector<double>> f1(todo.size(), std::vector<double>(folds.size()));
    parallel_for(todo.size() * folds.size(), space.threads, [&](std::size_t job) {
      std::size_t c = job / folds.size(), f = job % folds.size();
      f1[c][f] = cross_validate(corpus, {folds[f]}, configs[todo[c]], lexicons, opts).front();
    });
    for (std::size_t t = 0; t < todo.size(); ++t) {
      ConfigScore s{configs[todo[t]], 0.0, f1[t], stage};
      double sum = 0;
      for (double x : s.fold_f1) sum += x;
      s.mean_f1 = sum / static_cast<double>(s.fold_f1.size());
      scored.emplace(s.config.name(), std::move(s));
    }
    std::vector<ConfigScore> stage_scores;
    for (const auto& c : configs) stage_scores.push_back(scored.at(c.name()));
    std::sort(stage_scores.begin(), stage_scores.end(), ranks_before);
    return stage_scores.front().config;
  };

  SearchResult res;
  std::vector<std::string> flat = space.clark;
  flat.insert(flat.end(), space.w2v.begin(), space.w2v.end());
  auto stage1 = subsets(space.base, {}, flat);
  res.stage1_evaluations = stage1.size();
  res.stage1_winner = run_stage(stage1, 1);

  // The empty Brown subset is the stage-1 winner itself; its score is reused.
  auto stage2 = subsets(space.base, res.stage1_winner.lexicons, space.brown);
  res.stage2_evaluations = stage2.size();
  run_stage(stage2, 2);

  for (auto& [name, s] : scored) res.ranked.push_back(s);
  std::sort(res.ranked.begin(), res.ranked.end(), ranks_before);
  res.winner = res.ranked.front().config;
  return res;
}

inline PerceptronModel final_train(const std::vector<Sentence>& corpus, const FeatureConfig& winner,
                                   const LexiconMap& lexicons, int epochs, std::uint64_t seed) {
  return train(corpus, winner, lexicons, TrainOptions{epochs, seed, Averaging::lazy});
}

inline nlohmann::json to_json(const SearchResult& r) {
  auto configs = nlohmann::json::array();
  for (const auto& s : r.ranked)
    configs.push_back({{"config", s.config.name()},
                       {"lexicons", s.config.lexicons},
                       {"stage", s.stage},
                       {"mean_f1", s.mean_f1},
                       {"fold_f1", s.fold_f1}});
  return {{"winner", r.winner.name()},
          {"winner_lexicons", r.winner.lexicons},
          {"stage1_winner", r.stage1_winner.name()},
          {"stage1_evaluations", r.stage1_evaluations},
          {"stage2_evaluations", r.stage2_evaluations},
          {"configs", configs}};
}

}  // namespace ote::cv
