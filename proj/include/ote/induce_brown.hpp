#pragma once

// Brown clustering at desk scale: frequency-windowed greedy agglomeration of
// word classes maximizing the average mutual information of adjacent class
// bigrams, followed by merging the final classes into one binary tree whose
// root-to-leaf bit strings become Brown paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ote/error.hpp"
#include "ote/lexicon.hpp"
#include "ote/parallel.hpp"
#include "ote/text.hpp"

namespace ote::brown {

struct BigramStats {
  std::vector<std::string> vocab;      // descending frequency, ties by word
  std::vector<std::uint64_t> unigram;  // parallel to vocab
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> pairs;  // (left, right) vocab ids
  std::uint64_t total = 0;  // all tokens, rare ones included
  std::uint64_t rare = 0;   // tokens below min_count

  std::uint64_t pair_count(std::string_view a, std::string_view b) const {
    auto ia = index_of(a), ib = index_of(b);
    if (ia < 0 || ib < 0) return 0;
    auto it = pairs.find({static_cast<std::uint32_t>(ia), static_cast<std::uint32_t>(ib)});
    return it == pairs.end() ? 0 : it->second;
  }

  std::uint64_t count(std::string_view w) const {
    auto i = index_of(w);
    return i < 0 ? 0 : unigram[static_cast<std::size_t>(i)];
  }

  long index_of(std::string_view w) const {
    for (std::size_t i = 0; i < vocab.size(); ++i)
      if (vocab[i] == w) return static_cast<long>(i);
    return -1;
  }
};

/// Lowercases and maps every digit to '0'.
inline std::string preprocess_token(std::string_view tok) {
  auto low = text::lowercase(tok);
  for (char& c : low)
    if (c >= '0' && c <= '9') c = '0';
  return low;
}

/// Counts unigrams and within-line adjacent pairs. Words below min_count map
/// to the reserved rare class, which takes no part in the class bigrams.
inline BigramStats count_bigrams(const std::vector<std::vector<std::string>>& lines, std::uint64_t min_count) {
  if (min_count < 1) throw Error("min_count must be at least 1");
  std::unordered_map<std::string, std::uint64_t> freq;
  std::uint64_t total = 0;
  for (const auto& line : lines)
    for (const auto& w : line) {
      ++freq[w];
      ++total;
    }
  if (total == 0) throw Error("cannot count bigrams of an empty token stream");

  BigramStats st;
  st.total = total;
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [w, c] : freq) {
    if (c >= min_count) kept.emplace_back(w, c);
    else st.rare += c;
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::unordered_map<std::string, std::uint32_t> id;
  for (auto& [w, c] : kept) {
    id.emplace(w, static_cast<std::uint32_t>(st.vocab.size()));
    st.vocab.push_back(w);
    st.unigram.push_back(c);
  }
  for (const auto& line : lines) {
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
      auto a = id.find(line[i]);
      auto b = id.find(line[i + 1]);
      if (a == id.end() || b == id.end()) continue;
      ++st.pairs[{a->second, b->second}];
    }
  }
  return st;
}

inline BigramStats count_bigrams(const std::vector<std::string>& tokens, std::uint64_t min_count) {
  return count_bigrams(std::vector<std::vector<std::string>>{tokens}, min_count);
}

/// Binary tree over the final classes. Leaves carry their member words.
struct MergeTree {
  struct Node {
    int left = -1;
    int right = -1;
    std::vector<std::uint32_t> words;  // leaves only, vocab ids
    std::uint64_t created = 0;         // creation stamp; smaller = earlier
  };
  std::vector<Node> nodes;
  int root = -1;
  std::vector<std::string> vocab;
  std::vector<std::uint64_t> counts;

  bool is_leaf(int n) const { return nodes[static_cast<std::size_t>(n)].left < 0; }

  std::size_t leaf_count() const {
    std::size_t k = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (is_leaf(static_cast<int>(i))) ++k;
    return k;
  }
};

struct MergeStep {
  std::size_t i = 0;  // slot indices in the active list, i < j
  std::size_t j = 0;
  double ami_before = 0.0;
  double ami_after = 0.0;
  bool tree_phase = false;
  std::size_t active_before = 0;  // number of active classes before the merge
};

struct BrownResult {
  MergeTree tree;
  std::vector<MergeStep> trace;
};

/// Candidate values closer than this to the best count as ties.
inline constexpr double kTieTolerance = 1e-10;

namespace detail {

/// Active classes with their dense bigram count matrix and marginals.
class ClassState {
 public:
  explicit ClassState(double total_pairs) : total_(total_pairs) {}

  std::size_t size() const { return n_.size(); }

  double q(double n, double l, double r) const {
    if (n <= 0) return 0.0;
    return n / total_ * std::log(n * total_ / (l * r));
  }

  double ami() const {
    double s = 0;
    for (std::size_t a = 0; a < size(); ++a)
      for (std::size_t b = 0; b < size(); ++b) s += q(n_[a][b], left_[a], right_[b]);
    return s;
  }

  /// AMI after hypothetically merging slots i < j.
  double ami_after_merge(std::size_t i, std::size_t j, double current) const {
    const std::size_t k = size();
    double removed = 0;
    for (std::size_t c = 0; c < k; ++c) {
      removed += q(n_[i][c], left_[i], right_[c]) + q(n_[j][c], left_[j], right_[c]);
      removed += q(n_[c][i], left_[c], right_[i]) + q(n_[c][j], left_[c], right_[j]);
    }
    removed -= q(n_[i][i], left_[i], right_[i]) + q(n_[i][j], left_[i], right_[j]) +
               q(n_[j][i], left_[j], right_[i]) + q(n_[j][j], left_[j], right_[j]);
    const double lm = left_[i] + left_[j];
    const double rm = right_[i] + right_[j];
    double added = q(n_[i][i] + n_[i][j] + n_[j][i] + n_[j][j], lm, rm);
    for (std::size_t c = 0; c < k; ++c) {
      if (c == i || c == j) continue;
      added += q(n_[i][c] + n_[j][c], lm, right_[c]);
      added += q(n_[c][i] + n_[c][j], left_[c], rm);
    }
    return current - removed + added;
  }

  /// Appends a class whose counts against existing slots are given.
  void add(const std::vector<double>& out_row, const std::vector<double>& in_col, double self) {
    const std::size_t k = size();
    for (std::size_t c = 0; c < k; ++c) n_[c].push_back(in_col[c]);
    n_.push_back(out_row);
    n_.back().push_back(self);
    left_.push_back(0);
    right_.push_back(0);
    recompute_marginals();
  }

  void merge(std::size_t i, std::size_t j) {
    const std::size_t k = size();
    for (std::size_t c = 0; c < k; ++c) n_[i][c] += n_[j][c];
    for (std::size_t c = 0; c < k; ++c) n_[c][i] += n_[c][j];
    n_.erase(n_.begin() + static_cast<long>(j));
    for (auto& row : n_) row.erase(row.begin() + static_cast<long>(j));
    left_[i] += left_[j];
    right_[i] += right_[j];
    left_.erase(left_.begin() + static_cast<long>(j));
    right_.erase(right_.begin() + static_cast<long>(j));
  }

 private:
  void recompute_marginals() {
    const std::size_t k = size();
    std::fill(left_.begin(), left_.end(), 0.0);
    std::fill(right_.begin(), right_.end(), 0.0);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) {
        left_[a] += n_[a][b];
        right_[b] += n_[a][b];
      }
  }

  double total_;
  std::vector<std::vector<double>> n_;
  std::vector<double> left_, right_;
};

}  // namespace detail

/// Picks the merge with the highest resulting AMI; among candidates within
/// kTieTolerance of the best, the lexicographically smallest (i, j) wins.
template <class Fn>
std::pair<std::size_t, std::size_t> select_merge(std::size_t k, Fn&& ami_after, unsigned threads = 1) {
  std::vector<std::vector<double>> value(k);
  parallel_for(k, threads, [&](std::size_t i) {
    value[i].assign(k, 0.0);
    for (std::size_t j = i + 1; j < k; ++j) value[i][j] = ami_after(i, j);
  });
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) best = std::max(best, value[i][j]);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      if (value[i][j] >= best - kTieTolerance) return {i, j};
  throw Error("no merge candidates");
}

struct BrownOptions {
  unsigned threads = 1;
};

inline BrownResult brown_cluster(const BigramStats& stats, std::size_t num_classes, std::size_t window,
                                 const BrownOptions& opts = {}) {
  const std::size_t V = stats.vocab.size();
  if (num_classes < 2) throw Error("num_classes must be at least 2");
  if (num_classes > V)
    throw Error("num_classes " + std::to_string(num_classes) + " exceeds vocabulary size " + std::to_string(V));
  if (window < num_classes) throw Error("window must be at least num_classes");

  double total_pairs = 0;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> out_adj(V), in_adj(V);
  for (const auto& [p, c] : stats.pairs) {
    total_pairs += static_cast<double>(c);
    out_adj[p.first].emplace_back(p.second, static_cast<double>(c));
    in_adj[p.second].emplace_back(p.first, static_cast<double>(c));
  }
  if (total_pairs == 0) throw Error("corpus has no adjacent word pairs to cluster");

  detail::ClassState state(total_pairs);
  // Class bookkeeping: slot -> members, word -> slot (-1 before addition).
  std::vector<std::vector<std::uint32_t>> members;
  std::vector<std::uint64_t> created;
  std::vector<long> slot_of(V, -1);
  std::uint64_t stamp = 0;

  auto add_word = [&](std::uint32_t w) {
    const std::size_t k = state.size();
    std::vector<double> row(k, 0.0), col(k, 0.0);
    double self = 0;
    for (auto [o, c] : out_adj[w]) {
      if (o == w) self += c;
      else if (slot_of[o] >= 0) row[static_cast<std::size_t>(slot_of[o])] += c;
    }
    for (auto [o, c] : in_adj[w])
      if (o != w && slot_of[o] >= 0) col[static_cast<std::size_t>(slot_of[o])] += c;
    state.add(row, col, self);
    slot_of[w] = static_cast<long>(k);
    members.push_back({w});
    created.push_back(stamp++);
  };

  BrownResult result;
  auto merge_best = [&](bool tree_phase) {
    const double current = state.ami();
    auto [i, j] = select_merge(
        state.size(), [&](std::size_t a, std::size_t b) { return state.ami_after_merge(a, b, current); },
        opts.threads);
    MergeStep step{i, j, current, 0.0, tree_phase, state.size()};
    state.merge(i, j);
    step.ami_after = state.ami();
    result.trace.push_back(step);
    return std::pair{i, j};
  };
  auto merge_members = [&](std::size_t i, std::size_t j) {
    for (auto w : members[j]) members[i].push_back(w);
    members.erase(members.begin() + static_cast<long>(j));
    created[i] = stamp++;
    created.erase(created.begin() + static_cast<long>(j));
    for (std::size_t s = 0; s < members.size(); ++s)
      for (auto w : members[s]) slot_of[w] = static_cast<long>(s);
  };

  // Phase 1: windowed agglomeration down to num_classes.
  const std::size_t seed_words = std::min(window, V);
  for (std::size_t w = 0; w < seed_words; ++w) add_word(static_cast<std::uint32_t>(w));
  for (std::size_t w = seed_words; w < V; ++w) {
    add_word(static_cast<std::uint32_t>(w));
    auto [i, j] = merge_best(false);
    merge_members(i, j);
  }
  while (state.size() > num_classes) {
    auto [i, j] = merge_best(false);
    merge_members(i, j);
  }

  // Phase 2: merge the final classes into a single tree.
  MergeTree& tree = result.tree;
  tree.vocab = stats.vocab;
  tree.counts = stats.unigram;
  std::vector<int> node_of;
  for (std::size_t s = 0; s < members.size(); ++s) {
    MergeTree::Node leaf;
    leaf.words = members[s];
    std::sort(leaf.words.begin(), leaf.words.end());
    leaf.created = created[s];
    node_of.push_back(static_cast<int>(tree.nodes.size()));
    tree.nodes.push_back(std::move(leaf));
  }
  while (state.size() > 1) {
    auto [i, j] = merge_best(true);
    MergeTree::Node parent;
    int a = node_of[i], b = node_of[j];
    if (tree.nodes[static_cast<std::size_t>(b)].created < tree.nodes[static_cast<std::size_t>(a)].created)
      std::swap(a, b);
    parent.left = a;
    parent.right = b;
    parent.created = stamp++;
    node_of[i] = static_cast<int>(tree.nodes.size());
    node_of.erase(node_of.begin() + static_cast<long>(j));
    tree.nodes.push_back(std::move(parent));
  }
  tree.root = node_of.front();
  return result;
}

/// Bit path of every vocabulary word (left child = 0), indexed by vocab id.
inline std::vector<std::string> tree_paths(const MergeTree& tree) {
  std::vector<std::string> paths(tree.vocab.size());
  std::vector<std::pair<int, std::string>> stack{{tree.root, ""}};
  while (!stack.empty()) {
    auto [n, path] = std::move(stack.back());
    stack.pop_back();
    const auto& node = tree.nodes[static_cast<std::size_t>(n)];
    if (node.left < 0) {
      for (auto w : node.words) paths[w] = path;
      continue;
    }
    stack.emplace_back(node.right, path + "1");
    stack.emplace_back(node.left, path + "0");
  }
  return paths;
}

inline ClusterLexicon emit_paths(const MergeTree& tree, std::string name, Casing casing = Casing::lowercase) {
  if (tree.root < 0) throw Error("merge tree is empty");
  ClusterLexicon lex(std::move(name), LexiconFamily::Brown, casing);
  auto paths = tree_paths(tree);
  for (std::size_t w = 0; w < tree.vocab.size(); ++w) {
    if (paths[w].empty()) continue;  // single-class tree
    lex.add(tree.vocab[w], paths[w], tree.counts[w]);
  }
  return lex;
}

}  // namespace ote::brown
