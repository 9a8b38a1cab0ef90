#pragma once

// Averaged structured perceptron over the three BIO labels with first-order
// label transitions and hard BIO constraints in decoding.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ote/corpus_io.hpp"
#include "ote/error.hpp"
#include "ote/features.hpp"
#include "ote/lexicon.hpp"
#include "ote/parallel.hpp"
#include "ote/text.hpp"

namespace ote {

using LabelWeights = std::array<double, kNumLabels>;

/// Transition rows: previous label O, B, I, then sentence start.
inline constexpr std::size_t kBosRow = 3;
using TransitionTable = std::array<LabelWeights, 4>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline std::string transition_key(std::size_t prev_row) {
  return prev_row == kBosRow ? "prev=*BOS*" : "prev=" + std::string(label_name(kLabels[prev_row]));
}

inline bool is_transition_key(std::string_view key) { return key.substr(0, 5) == "prev="; }

struct Decode {
  std::vector<Label> labels;
  double score = 0.0;
};

/// Exact first-order Viterbi. emissions[i][l] scores label l at position i.
/// O->I and start->I are forbidden; ties prefer O, then B, then I.
inline Decode viterbi(const std::vector<LabelWeights>& emissions, const TransitionTable& trans) {
  const std::size_t n = emissions.size();
  Decode out;
  if (n == 0) return out;
  auto allowed = [](std::size_t prev_row, std::size_t cur) {
    return !(cur == static_cast<std::size_t>(Label::I) && (prev_row == 0 || prev_row == kBosRow));
  };
  std::vector<LabelWeights> delta(n);
  std::vector<std::array<std::uint8_t, kNumLabels>> back(n);
  for (std::size_t l = 0; l < kNumLabels; ++l)
    delta[0][l] = allowed(kBosRow, l) ? trans[kBosRow][l] + emissions[0][l] : kNegInf;
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t l = 0; l < kNumLabels; ++l) {
      double best = kNegInf;
      std::uint8_t arg = 0;
      for (std::size_t p = 0; p < kNumLabels; ++p) {
        if (!allowed(p, l) || delta[i - 1][p] == kNegInf) continue;
        double s = delta[i - 1][p] + trans[p][l];
        if (best == kNegInf || s > best) {
          best = s;
          arg = static_cast<std::uint8_t>(p);
        }
      }
      delta[i][l] = best == kNegInf ? kNegInf : best + emissions[i][l];
      back[i][l] = arg;
    }
  }
  std::size_t last = 0;
  for (std::size_t l = 1; l < kNumLabels; ++l)
    if (delta[n - 1][l] > delta[n - 1][last]) last = l;
  out.score = delta[n - 1][last];
  out.labels.resize(n);
  std::size_t cur = last;
  for (std::size_t i = n; i-- > 0;) {
    out.labels[i] = kLabels[cur];
    if (i > 0) cur = back[i][cur];
  }
  return out;
}

/// Where the model found a lexicon at training time; `tag` reloads from here.
struct LexiconRef {
  std::string name;
  LexiconFamily family = LexiconFamily::Clark;
  Casing casing = Casing::lowercase;
  std::string fingerprint;
  std::string path;

  friend bool operator==(const LexiconRef&, const LexiconRef&) = default;
};

class PerceptronModel {
 public:
  FeatureConfig config;
  std::vector<LexiconRef> lexicons;
  int epochs = 0;
  std::uint64_t seed = 0;

  /// Averaged weights keyed by feature (or "prev=<label>" transition) key.
  const std::unordered_map<std::string, LabelWeights>& weights() const { return weights_; }

  void set_weights(std::unordered_map<std::string, LabelWeights> w) {
    weights_ = std::move(w);
    rebuild_transitions();
  }

  const TransitionTable& transitions() const { return transitions_; }

  LabelWeights emission(const FeatureSet& features) const {
    LabelWeights s{};
    for (const auto& f : features) {
      auto it = weights_.find(f);
      if (it == weights_.end()) continue;
      for (std::size_t l = 0; l < kNumLabels; ++l) s[l] += it->second[l];
    }
    return s;
  }

 private:
  void rebuild_transitions() {
    for (std::size_t r = 0; r < transitions_.size(); ++r) {
      auto it = weights_.find(transition_key(r));
      transitions_[r] = it == weights_.end() ? LabelWeights{} : it->second;
    }
  }

  std::unordered_map<std::string, LabelWeights> weights_;
  TransitionTable transitions_{};
};

inline Decode decode(const PerceptronModel& model, const Sentence& sent, const LexiconMap& lexicons) {
  std::vector<LabelWeights> em;
  em.reserve(sent.size());
  for (std::size_t i = 0; i < sent.size(); ++i) em.push_back(model.emission(extract(sent, i, model.config, lexicons)));
  return viterbi(em, model.transitions());
}

enum class Averaging { lazy, naive };

struct TrainOptions {
  int epochs = 10;
  std::uint64_t seed = 1;
  Averaging averaging = Averaging::lazy;
};

struct TrainStats {
  std::vector<std::size_t> mistakes_per_epoch;  // positions decoded wrongly before update
};

namespace detail {

/// Feature ids of every token of every sentence, interned once per run.
struct EncodedCorpus {
  std::vector<std::string> names;
  std::vector<std::vector<std::vector<std::uint32_t>>> ids;  // [sentence][token][k]
};

inline EncodedCorpus encode_corpus(const std::vector<Sentence>& corpus, const FeatureConfig& cfg,
                                   const LexiconMap& lexicons) {
  EncodedCorpus enc;
  std::unordered_map<std::string, std::uint32_t> index;
  enc.ids.resize(corpus.size());
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    enc.ids[s].resize(corpus[s].size());
    for (std::size_t i = 0; i < corpus[s].size(); ++i) {
      for (auto& f : extract(corpus[s], i, cfg, lexicons)) {
        auto [it, fresh] = index.emplace(std::move(f), static_cast<std::uint32_t>(enc.names.size()));
        if (fresh) enc.names.push_back(it->first);
        enc.ids[s][i].push_back(it->second);
      }
    }
  }
  return enc;
}

/// Current weights plus the bookkeeping for the averaged weights. With lazy
/// averaging `acc` holds sum(update * (t - 1)) so that
/// average = w - acc / T; naive averaging sums w after every instance.
class WeightStore {
 public:
  WeightStore(std::size_t features, Averaging mode)
      : mode_(mode), w_(features + 4), acc_(features + 4) {}

  std::size_t transition_slot(std::size_t row) const { return w_.size() - 4 + row; }
  const LabelWeights& at(std::size_t slot) const { return w_[slot]; }

  void update(std::size_t slot, Label l, double delta) {
    auto li = static_cast<std::size_t>(l);
    w_[slot][li] += delta;
    if (mode_ == Averaging::lazy) acc_[slot][li] += delta * static_cast<double>(t_ - 1);
  }

  void begin_instance() { ++t_; }

  void end_instance() {
    if (mode_ != Averaging::naive) return;
    for (std::size_t k = 0; k < w_.size(); ++k)
      for (std::size_t l = 0; l < kNumLabels; ++l) acc_[k][l] += w_[k][l];
  }

  LabelWeights averaged(std::size_t slot) const {
    LabelWeights out{};
    if (t_ == 0) return out;
    const double T = static_cast<double>(t_);
    for (std::size_t l = 0; l < kNumLabels; ++l)
      out[l] = mode_ == Averaging::lazy ? w_[slot][l] - acc_[slot][l] / T : acc_[slot][l] / T;
    return out;
  }

  std::size_t size() const { return w_.size(); }

 private:
  Averaging mode_;
  std::vector<LabelWeights> w_;
  std::vector<LabelWeights> acc_;
  std::uint64_t t_ = 0;
};

}  // namespace detail

/// Trains with per-epoch seeded shuffling and Collins-style updates on every
/// position where the decoded sequence differs from gold.
inline PerceptronModel train(const std::vector<Sentence>& corpus, const FeatureConfig& cfg,
                             const LexiconMap& lexicons, const TrainOptions& opts = {},
                             TrainStats* stats = nullptr) {
  if (corpus.empty()) throw Error("cannot train on an empty corpus");
  if (opts.epochs < 1) throw Error("epochs must be at least 1");
  cfg.validate();
  require_lexicons(cfg, lexicons);
  for (const auto& s : corpus) {
    if (s.labels.size() != s.tokens.size() || !is_valid_bio(s.labels))
      throw Error("training sentence '" + s.id + "' does not carry valid BIO labels");
  }

  auto enc = detail::encode_corpus(corpus, cfg, lexicons);
  detail::WeightStore store(enc.names.size(), opts.averaging);
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(opts.seed);

  TransitionTable trans{};
  std::vector<LabelWeights> em;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t mistakes = 0;
    for (std::size_t s : order) {
      const auto& gold = corpus[s].labels;
      const auto& ids = enc.ids[s];
      store.begin_instance();
      em.assign(ids.size(), LabelWeights{});
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (auto id : ids[i])
          for (std::size_t l = 0; l < kNumLabels; ++l) em[i][l] += store.at(id)[l];
      for (std::size_t r = 0; r < trans.size(); ++r) trans[r] = store.at(store.transition_slot(r));
      auto pred = viterbi(em, trans).labels;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (pred[i] != gold[i]) {
          ++mistakes;
          for (auto id : ids[i]) {
            store.update(id, gold[i], 1.0);
            store.update(id, pred[i], -1.0);
          }
        }
        std::size_t gprev = i == 0 ? kBosRow : static_cast<std::size_t>(gold[i - 1]);
        std::size_t pprev = i == 0 ? kBosRow : static_cast<std::size_t>(pred[i - 1]);
        if (gprev != pprev || gold[i] != pred[i]) {
          store.update(store.transition_slot(gprev), gold[i], 1.0);
          store.update(store.transition_slot(pprev), pred[i], -1.0);
        }
      }
      store.end_instance();
    }
    if (stats) stats->mistakes_per_epoch.push_back(mistakes);
  }

  std::unordered_map<std::string, LabelWeights> weights;
  auto keep = [](const LabelWeights& w) { return w[0] != 0.0 || w[1] != 0.0 || w[2] != 0.0; };
  for (std::size_t k = 0; k < enc.names.size(); ++k) {
    auto avg = store.averaged(k);
    if (keep(avg)) weights.emplace(enc.names[k], avg);
  }
  for (std::size_t r = 0; r < trans.size(); ++r) {
    auto avg = store.averaged(store.transition_slot(r));
    if (keep(avg)) weights.emplace(transition_key(r), avg);
  }

  PerceptronModel model;
  model.config = cfg;
  model.epochs = opts.epochs;
  model.seed = opts.seed;
  for (const auto& name : cfg.lexicons) {
    const auto& lex = *lexicons.at(name);
    model.lexicons.push_back({name, lex.family(), lex.casing(), lex.fingerprint(), ""});
  }
  model.set_weights(std::move(weights));
  return model;
}

inline constexpr std::string_view kModelMagic = "ote-perceptron-model";
inline constexpr int kModelVersion = 1;

inline std::string save_model(const PerceptronModel& model) {
  std::string out;
  out += kModelMagic;
  out += "\nversion=" + std::to_string(kModelVersion) + "\n";
  out += "epochs=" + std::to_string(model.epochs) + "\n";
  out += "seed=" + std::to_string(model.seed) + "\n";
  out += "[config]\n" + model.config.to_text();
  out += "[lexicons]\n";
  for (const auto& l : model.lexicons) {
    out += l.name + '\t' + std::string(family_name(l.family)) + '\t' + std::string(casing_name(l.casing)) + '\t' +
           l.fingerprint + '\t' + l.path + '\n';
  }
  out += "[labels]\n";
  for (Label l : kLabels) out += std::string(label_name(l)) + '\n';
  std::vector<const std::pair<const std::string, LabelWeights>*> items;
  items.reserve(model.weights().size());
  for (const auto& kv : model.weights()) items.push_back(&kv);
  std::sort(items.begin(), items.end(), [](auto* a, auto* b) { return a->first < b->first; });
  out += "[weights]\t" + std::to_string(items.size()) + "\n";
  for (const auto* kv : items) {
    out += kv->first;
    for (double w : kv->second) out += '\t' + text::format_double(w);
    out += '\n';
  }
  out += "[end]\n";
  return out;
}

inline PerceptronModel load_model(std::string_view bytes) {
  std::vector<std::string_view> lines;
  text::for_each_line(bytes, [&](std::string_view line, std::size_t) { lines.push_back(line); });
  std::size_t pos = 0;
  auto next = [&]() -> std::string_view {
    if (pos >= lines.size()) throw ParseError("model stream is truncated", pos + 1);
    return lines[pos++];
  };
  auto expect_kv = [&](std::string_view key) {
    auto line = next();
    if (line.substr(0, key.size() + 1) != std::string(key) + "=")
      throw ParseError("expected '" + std::string(key) + "='", pos);
    return line.substr(key.size() + 1);
  };
  if (next() != kModelMagic) throw ParseError("not a model file", 1);
  auto version = expect_kv("version");
  if (version != std::to_string(kModelVersion))
    throw ParseError("unsupported model version '" + std::string(version) + "'", pos);

  PerceptronModel model;
  auto epochs = text::parse_int<int>(expect_kv("epochs"));
  auto seed = text::parse_int<std::uint64_t>(expect_kv("seed"));
  if (!epochs || !seed) throw ParseError("bad model header", pos);
  model.epochs = *epochs;
  model.seed = *seed;

  if (next() != "[config]") throw ParseError("expected [config]", pos);
  std::string cfg_text;
  while (true) {
    auto line = next();
    if (line == "[lexicons]") break;
    cfg_text.append(line).push_back('\n');
  }
  model.config = FeatureConfig::from_text(cfg_text);
  while (true) {
    auto line = next();
    if (line == "[labels]") break;
    auto cols = text::split(line, '\t');
    if (cols.size() != 5) throw ParseError("bad lexicon record", pos);
    auto fam = parse_family(cols[1]);
    auto cas = parse_casing(cols[2]);
    if (!fam || !cas) throw ParseError("bad lexicon record", pos);
    model.lexicons.push_back({std::string(cols[0]), *fam, *cas, std::string(cols[3]), std::string(cols[4])});
  }
  for (Label l : kLabels)
    if (next() != label_name(l)) throw ParseError("unexpected label set", pos);
  auto header = next();
  if (header.substr(0, 10) != "[weights]\t") throw ParseError("expected [weights]", pos);
  auto count = text::parse_int<std::size_t>(header.substr(10));
  if (!count) throw ParseError("bad weight count", pos);
  std::unordered_map<std::string, LabelWeights> weights;
  weights.reserve(*count);
  for (std::size_t k = 0; k < *count; ++k) {
    auto line = next();
    auto cols = text::split(line, '\t');
    if (cols.size() != 1 + kNumLabels) throw ParseError("bad weight record", pos);
    LabelWeights w{};
    for (std::size_t l = 0; l < kNumLabels; ++l) {
      auto v = text::parse_double(cols[1 + l]);
      if (!v) throw ParseError("bad weight value", pos);
      w[l] = *v;
    }
    weights.emplace(std::string(cols[0]), w);
  }
  if (next() != "[end]") throw ParseError("model stream is truncated", pos);
  model.set_weights(std::move(weights));
  return model;
}

/// Compares supplied lexicons with the fingerprints stored in the model.
/// Mismatches are returned as warnings; a missing lexicon is an error.
inline std::vector<std::string> verify_lexicons(const PerceptronModel& model, const LexiconMap& lexicons) {
  std::vector<std::string> warnings;
  for (const auto& ref : model.lexicons) {
    auto it = lexicons.find(ref.name);
    if (it == lexicons.end() || !it->second) throw Error("model needs lexicon '" + ref.name + "'");
    auto fp = it->second->fingerprint();
    if (fp != ref.fingerprint)
      warnings.push_back("lexicon '" + ref.name + "' fingerprint " + fp + " differs from model's " + ref.fingerprint);
  }
  return warnings;
}

/// Decodes every sentence in place, in parallel over sentences.
inline void tag_sentences(const PerceptronModel& model, std::vector<Sentence>& sentences,
                          const LexiconMap& lexicons, unsigned threads = 1) {
  require_lexicons(model.config, lexicons);
  parallel_for(sentences.size(), threads, [&](std::size_t i) {
    sentences[i].labels = decode(model, sentences[i], lexicons).labels;
  });
}

/// Tags column text (labelled or surface-only) or ABSA XML and returns column
/// text with predicted labels and character offsets.
inline std::string tag_file(const PerceptronModel& model, std::string_view input, const LexiconMap& lexicons,
                            unsigned threads = 1) {
  std::vector<Sentence> sentences;
  if (looks_like_xml(input)) {
    sentences = convert_xml(input, BioOptions{.lenient = true});
  } else {
    sentences = read_column(input, ColumnOptions{.allow_unlabeled = true});
  }
  tag_sentences(model, sentences, lexicons, threads);
  return write_column(sentences);
}

}  // namespace ote
