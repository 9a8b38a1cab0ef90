#pragma once

// Flat word classes from k-means over pre-trained word vectors read in the
// word2vec text format.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ote/error.hpp"
#include "ote/lexicon.hpp"
#include "ote/parallel.hpp"
#include "ote/text.hpp"

namespace ote::kmeans {

struct VectorTable {
  std::size_t dim = 0;
  std::vector<std::string> words;
  std::vector<double> values;  // row-major, words.size() x dim

  std::size_t size() const { return words.size(); }
  const double* row(std::size_t i) const { return values.data() + i * dim; }
  double* row(std::size_t i) { return values.data() + i * dim; }
};

/// Header "count dim", then "word v1 ... vd" per line.
inline VectorTable load_vectors(std::string_view bytes) {
  VectorTable t;
  std::size_t expected = 0;
  bool header = true;
  std::unordered_set<std::string> seen;
  text::for_each_line(bytes, [&](std::string_view line, std::size_t lineno) {
    if (line.empty()) return;
    auto cols = text::split_blanks(line);
    if (header) {
      if (cols.size() != 2) throw ParseError("expected header 'count dim'", lineno);
      auto n = text::parse_int<std::size_t>(cols[0]);
      auto d = text::parse_int<std::size_t>(cols[1]);
      if (!n || !d || *d == 0) throw ParseError("bad vector header", lineno);
      expected = *n;
      t.dim = *d;
      t.words.reserve(expected);
      t.values.reserve(expected * t.dim);
      header = false;
      return;
    }
    if (cols.size() != t.dim + 1)
      throw ParseError("expected " + std::to_string(t.dim) + " components, got " + std::to_string(cols.size() - 1),
                       lineno);
    if (t.words.size() == expected) throw ParseError("more vectors than the header declares", lineno);
    if (!seen.insert(std::string(cols[0])).second)
      throw ParseError("duplicate word '" + std::string(cols[0]) + "'", lineno);
    for (std::size_t k = 1; k < cols.size(); ++k) {
      auto v = text::parse_double(cols[k]);
      if (!v || !std::isfinite(*v)) throw ParseError("non-numeric component '" + std::string(cols[k]) + "'", lineno);
      t.values.push_back(*v);
    }
    t.words.emplace_back(cols[0]);
  });
  if (header) throw ParseError("empty vector file");
  if (t.words.size() != expected)
    throw ParseError("truncated vector file: header declares " + std::to_string(expected) + " vectors, found " +
                     std::to_string(t.words.size()));
  return t;
}

enum class Metric { euclidean, cosine };

struct KMeansResult {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> centroids;  // k x dim
  std::vector<std::uint32_t> assignment;
  std::vector<std::string> words;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after each assignment step
  std::size_t iterations = 0;
};

struct KMeansOptions {
  std::size_t max_iterations = 100;
  unsigned threads = 1;
};

inline double squared_distance(const double* a, const double* b, std::size_t d) {
  double s = 0;
  for (std::size_t i = 0; i < d; ++i) {
    double x = a[i] - b[i];
    s += x * x;
  }
  return s;
}

/// k-means++ seeding, then Lloyd iterations until the assignment stops
/// changing or max_iterations. An empty cluster is re-seeded at the point
/// farthest from its own centroid. Under cosine, vectors are unit-normalized
/// first.
inline KMeansResult kmeans(VectorTable table, std::size_t k, std::uint64_t seed, Metric metric = Metric::euclidean,
                           const KMeansOptions& opts = {}) {
  const std::size_t n = table.size();
  const std::size_t d = table.dim;
  if (k == 0) throw Error("k must be positive");
  if (k > n) throw Error("k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " vectors");
  if (metric == Metric::cosine) {
    for (std::size_t i = 0; i < n; ++i) {
      double* r = table.row(i);
      double norm = 0;
      for (std::size_t j = 0; j < d; ++j) norm += r[j] * r[j];
      norm = std::sqrt(norm);
      if (norm > 0)
        for (std::size_t j = 0; j < d; ++j) r[j] /= norm;
    }
  }

  KMeansResult res;
  res.k = k;
  res.dim = d;
  res.words = table.words;
  res.centroids.assign(k * d, 0.0);
  auto centroid = [&](std::size_t c) { return res.centroids.data() + c * d; };

  std::mt19937_64 rng(seed);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(n, 0);
  auto place = [&](std::size_t c, std::size_t point) {
    std::copy(table.row(point), table.row(point) + d, centroid(c));
    chosen[point] = 1;
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], squared_distance(table.row(i), centroid(c), d));
  };
  place(0, std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (!chosen[i]) total += nearest[i];
    std::size_t pick = n;
    if (total > 0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        acc += nearest[i];
        if (acc >= r && nearest[i] > 0) {
          pick = i;
          break;
        }
      }
    }
    if (pick == n) {
      // Remaining points all coincide with centroids; take the first unused.
      for (std::size_t i = 0; i < n && pick == n; ++i)
        if (!chosen[i] && (total == 0 || nearest[i] > 0)) pick = i;
      if (pick == n)
        for (std::size_t i = 0; i < n && pick == n; ++i)
          if (!chosen[i]) pick = i;
    }
    place(c, pick);
  }

  res.assignment.assign(n, 0);
  std::vector<double> dist(n, 0.0);
  auto assign = [&] {
    bool changed = false;
    std::vector<char> moved(n, 0);
    parallel_for(n, opts.threads, [&](std::size_t i) {
      std::uint32_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        double dd = squared_distance(table.row(i), centroid(c), d);
        if (dd < bd) {
          bd = dd;
          best = static_cast<std::uint32_t>(c);
        }
      }
      moved[i] = best != res.assignment[i];
      res.assignment[i] = best;
      dist[i] = bd;
    });
    for (char m : moved) changed |= m != 0;
    double inertia = 0;
    for (double x : dist) inertia += x;
    res.inertia = inertia;
    res.inertia_history.push_back(inertia);
    return changed;
  };

  assign();
  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    res.iterations = it + 1;
    // Update step: sums accumulate in point order, so results are reproducible.
    std::vector<double> sums(k * d, 0.0);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = res.assignment[i];
      ++sizes[c];
      const double* r = table.row(i);
      for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += r[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) centroid(c)[j] = sums[c * d + j] / static_cast<double>(sizes[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = 0;
      double fd = -1;
      for (std::size_t i = 0; i < n; ++i) {
        double dd = squared_distance(table.row(i), centroid(res.assignment[i]), d);
        if (dd > fd) {
          fd = dd;
          far = i;
        }
      }
      std::copy(table.row(far), table.row(far) + d, centroid(c));
      res.assignment[far] = static_cast<std::uint32_t>(c);
    }
    if (!assign()) break;
  }
  return res;
}

inline std::size_t nonempty_clusters(const KMeansResult& res) {
  std::vector<char> used(res.k, 0);
  for (auto a : res.assignment) used[a] = 1;
  return static_cast<std::size_t>(std::count(used.begin(), used.end(), 1));
}

inline ClusterLexicon to_lexicon(const KMeansResult& res, std::string name, Casing casing = Casing::lowercase) {
  ClusterLexicon lex(std::move(name), LexiconFamily::Word2vecKMeans, casing);
  for (std::size_t i = 0; i < res.words.size(); ++i) lex.add(res.words[i], std::to_string(res.assignment[i]));
  return lex;
}

}  // namespace ote::kmeans
