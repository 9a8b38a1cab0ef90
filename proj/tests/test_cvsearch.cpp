#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "ote/cvsearch.hpp"
#include "support/synthetic.hpp"

using namespace ote;
using namespace ote::cv;

namespace {

struct Setup {
  synth::PlantedCorpus pc;
  LexiconMap lex;
};

// Large slot vocabularies, so most dev-fold fillers never occur in the
// training folds and only the planted classes can generalize.
Setup planted_setup() {
  synth::PlantedOptions opt;
  opt.train_sentences = 250;
  opt.test_sentences = 0;
  opt.target_vocab = 300;
  opt.distractor_vocab = 300;
  opt.unseen_fraction = 0.0;
  opt.seed = 21;
  Setup s{synth::make_planted_corpus(opt), {}};
  auto words = synth::all_words(s.pc);
  s.lex["PLANTED"] = std::make_shared<ClusterLexicon>(s.pc.planted_lexicon("PLANTED"));
  s.lex["RANDW"] = std::make_shared<ClusterLexicon>(
      synth::random_flat_lexicon("RANDW", LexiconFamily::Word2vecKMeans, words, 40, 5));
  s.lex["RANDB"] = std::make_shared<ClusterLexicon>(synth::random_brown_lexicon("RANDB", words, 6));
  return s;
}

const ConfigScore& score_of(const SearchResult& r, const std::string& name) {
  auto it = std::find_if(r.ranked.begin(), r.ranked.end(), [&](const auto& s) { return s.config.name() == name; });
  if (it == r.ranked.end()) throw std::runtime_error("config not ranked: " + name);
  return *it;
}

}  // namespace

TEST(Folds, TenSentencesFiveFolds) {
  auto folds = make_folds(10, 5, 3);
  ASSERT_EQ(folds.size(), 5u);
  std::multiset<std::size_t> dev_all;
  for (const auto& f : folds) {
    EXPECT_EQ(f.dev.size(), 2u);
    EXPECT_EQ(f.train.size(), 8u);
    std::set<std::size_t> dev(f.dev.begin(), f.dev.end());
    for (auto t : f.train) EXPECT_FALSE(dev.count(t));
    dev_all.insert(f.dev.begin(), f.dev.end());
  }
  EXPECT_EQ(dev_all, (std::multiset<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
}

TEST(Folds, CoverAndDeterminism) {
  for (std::size_t n : {5u, 7u, 23u, 101u})
    for (std::size_t k : {2u, 3u, 5u}) {
      if (n < k) continue;
      auto a = make_folds(n, k, n * 31 + k);
      auto b = make_folds(n, k, n * 31 + k);
      std::vector<std::size_t> all;
      for (std::size_t f = 0; f < k; ++f) {
        EXPECT_EQ(a[f].dev, b[f].dev);
        EXPECT_GE(a[f].dev.size(), n / k);
        EXPECT_LE(a[f].dev.size(), n / k + 1);
        EXPECT_EQ(a[f].dev.size() + a[f].train.size(), n);
        all.insert(all.end(), a[f].dev.begin(), a[f].dev.end());
      }
      std::sort(all.begin(), all.end());
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(all[i], i);
    }
  EXPECT_THROW(make_folds(3, 5, 1), Error);
  EXPECT_THROW(make_folds(10, 1, 1), Error);
}

TEST(Subsets, Enumeration) {
  auto s = subsets(FeatureConfig{}, {"W"}, {"A", "B", "C"});
  EXPECT_EQ(s.size(), 8u);
  std::set<std::string> names;
  for (const auto& c : s) names.insert(c.name());
  EXPECT_EQ(names.size(), 8u);
  EXPECT_TRUE(names.count("local+W"));
  EXPECT_TRUE(names.count("local+W+A+B+C"));
}

TEST(Search, EvaluationCountsAndPlantedWinner) {
  auto s = planted_setup();
  SearchSpace space;
  space.clark = {"PLANTED"};
  space.w2v = {"RANDW"};
  space.brown = {"RANDB"};
  space.epochs = 5;
  space.threads = 2;
  auto r = search(s.pc.train, space, s.lex);
  EXPECT_EQ(r.stage1_evaluations, 4u);
  EXPECT_EQ(r.stage2_evaluations, 2u);
  // Four stage-1 configs plus one new stage-2 config, each listed once.
  EXPECT_EQ(r.ranked.size(), 5u);
  std::set<std::string> names;
  for (const auto& c : r.ranked) {
    names.insert(c.config.name());
    EXPECT_EQ(c.fold_f1.size(), 5u);
  }
  EXPECT_EQ(names.size(), r.ranked.size());
  for (std::size_t i = 1; i < r.ranked.size(); ++i) EXPECT_FALSE(ranks_before(r.ranked[i], r.ranked[i - 1]));
  auto& lexs = r.winner.lexicons;
  EXPECT_NE(std::find(lexs.begin(), lexs.end(), "PLANTED"), lexs.end());
  EXPECT_GT(score_of(r, r.winner.name()).mean_f1, score_of(r, "local").mean_f1 + 0.1);

  auto j = to_json(r);
  EXPECT_EQ(j["configs"].size(), 5u);
  EXPECT_EQ(j["winner"], r.winner.name());
}

TEST(Search, RandomLexiconsDoNotWin) {
  // Small vocabulary: every dev word is seen in training, so random classes
  // carry no extra signal.
  synth::PlantedOptions opt;
  opt.train_sentences = 200;
  opt.test_sentences = 0;
  opt.target_vocab = 15;
  opt.distractor_vocab = 15;
  opt.unseen_fraction = 0.0;
  opt.seed = 4;
  auto pc = synth::make_planted_corpus(opt);
  auto words = synth::all_words(pc);
  LexiconMap lex{{"R1", std::make_shared<ClusterLexicon>(
                             synth::random_flat_lexicon("R1", LexiconFamily::Clark, words, 6, 1))},
                 {"R2", std::make_shared<ClusterLexicon>(
                             synth::random_flat_lexicon("R2", LexiconFamily::Word2vecKMeans, words, 6, 2))}};
  SearchSpace space;
  space.clark = {"R1"};
  space.w2v = {"R2"};
  space.epochs = 5;
  auto r = search(pc.train, space, lex);
  EXPECT_LE(score_of(r, r.winner.name()).mean_f1, score_of(r, "local").mean_f1 + 0.01);
}

TEST(Search, FamilyChecks) {
  auto s = planted_setup();
  SearchSpace space;
  space.clark = {"RANDW"};
  EXPECT_THROW(search(s.pc.train, space, s.lex), Error);
  space.clark = {"missing"};
  EXPECT_THROW(search(s.pc.train, space, s.lex), Error);
  EXPECT_THROW(search({}, SearchSpace{}, s.lex), Error);
}

TEST(FinalTrain, LocalEqualsPlainTrain) {
  auto s = planted_setup();
  auto a = final_train(s.pc.train, FeatureConfig{}, s.lex, 3, 7);
  auto b = train(s.pc.train, FeatureConfig{}, {}, TrainOptions{3, 7});
  EXPECT_EQ(save_model(a), save_model(b));
}

TEST(FinalTrain, FingerprintsAndTrainingFit) {
  auto s = planted_setup();
  SearchSpace space;
  space.clark = {"PLANTED"};
  space.epochs = 5;
  auto r = search(s.pc.train, space, s.lex);
  auto model = final_train(s.pc.train, r.winner, s.lex, 5, 1);
  ASSERT_EQ(model.lexicons.size(), r.winner.lexicons.size());
  for (std::size_t i = 0; i < model.lexicons.size(); ++i) {
    EXPECT_EQ(model.lexicons[i].name, r.winner.lexicons[i]);
    EXPECT_EQ(model.lexicons[i].fingerprint, s.lex.at(r.winner.lexicons[i])->fingerprint());
  }
  auto pred = s.pc.train;
  tag_sentences(model, pred, s.lex);
  EXPECT_GE(evaluate(s.pc.train, pred).f1, score_of(r, r.winner.name()).mean_f1);
}
