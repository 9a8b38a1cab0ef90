#pragma once

// Exact-span target evaluation. Spans are compared on (sentence, start, end)
// character offsets with per-sentence set semantics, then micro-averaged.

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ote/corpus_io.hpp"
#include "ote/error.hpp"
#include "ote/text.hpp"

namespace ote {

struct TargetSpan {
  std::string sentence_id;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;

  friend bool operator==(const TargetSpan&, const TargetSpan&) = default;
};

/// One span per maximal B I* run, ordered by start offset.
inline std::vector<TargetSpan> spans_of(const Sentence& sent) {
  if (sent.labels.size() != sent.tokens.size()) throw Error("sentence '" + sent.id + "': label/token count mismatch");
  if (!is_valid_bio(sent.labels)) throw Error("sentence '" + sent.id + "' has invalid BIO labels");
  std::vector<TargetSpan> out;
  const std::size_t n = sent.size();
  for (std::size_t i = 0; i < n;) {
    if (sent.labels[i] != Label::B) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < n && sent.labels[j] == Label::I) ++j;
    TargetSpan span{sent.id, sent.tokens[i].start, sent.tokens[j - 1].end, sent.tokens[i].surface};
    for (std::size_t k = i + 1; k < j; ++k) {
      if (sent.tokens[k].start > sent.tokens[k - 1].end) span.surface += ' ';
      span.surface += sent.tokens[k].surface;
    }
    out.push_back(std::move(span));
    i = j;
  }
  return out;
}

struct ErrorCount {
  std::string surface;
  std::size_t count = 0;

  friend bool operator==(const ErrorCount&, const ErrorCount&) = default;
};

struct EvalReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<TargetSpan> fp_spans;
  std::vector<TargetSpan> fn_spans;
  std::vector<ErrorCount> top_fp;
  std::vector<ErrorCount> top_fn;
};

struct ErrorListing {
  std::vector<ErrorCount> fp;
  std::vector<ErrorCount> fn;
};

inline std::vector<ErrorCount> rank_surfaces(const std::vector<TargetSpan>& spans, std::size_t k) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : spans) ++counts[text::lowercase(s.surface)];
  std::vector<ErrorCount> out;
  out.reserve(counts.size());
  for (auto& [surface, c] : counts) out.push_back({surface, c});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.count > b.count; });
  if (out.size() > k) out.resize(k);
  return out;
}

/// Top-k FP and FN surfaces by count; case-insensitive, ties lexicographic.
inline ErrorListing error_report(const EvalReport& report, std::size_t k) {
  return {rank_surfaces(report.fp_spans, k), rank_surfaces(report.fn_spans, k)};
}

inline void finalize_scores(EvalReport& r) {
  r.precision = r.tp + r.fp ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
  r.recall = r.tp + r.fn ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
}

inline EvalReport evaluate(const std::vector<Sentence>& gold, const std::vector<Sentence>& pred,
                           std::size_t top_k = 5) {
  if (gold.size() != pred.size())
    throw Error("gold has " + std::to_string(gold.size()) + " sentences, prediction has " +
                std::to_string(pred.size()));
  EvalReport r;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].id != pred[s].id)
      throw Error("sentence id mismatch at position " + std::to_string(s) + ": '" + gold[s].id + "' vs '" +
                  pred[s].id + "'");
    auto g = spans_of(gold[s]);
    auto p = spans_of(pred[s]);
    // BIO runs are disjoint, so spans within one sentence are already unique.
    std::set<std::pair<std::size_t, std::size_t>> gset, pset;
    for (const auto& x : g) gset.emplace(x.start, x.end);
    for (const auto& x : p) pset.emplace(x.start, x.end);
    for (const auto& x : p) {
      if (gset.count({x.start, x.end})) {
        ++r.tp;
      } else {
        ++r.fp;
        r.fp_spans.push_back(x);
      }
    }
    for (const auto& x : g) {
      if (!pset.count({x.start, x.end})) {
        ++r.fn;
        r.fn_spans.push_back(x);
      }
    }
  }
  finalize_scores(r);
  auto listing = error_report(r, top_k);
  r.top_fp = std::move(listing.fp);
  r.top_fn = std::move(listing.fn);
  return r;
}

inline nlohmann::json to_json(const EvalReport& r) {
  auto spans = [](const std::vector<TargetSpan>& v) {
    auto a = nlohmann::json::array();
    for (const auto& s : v)
      a.push_back({{"sentence_id", s.sentence_id}, {"start", s.start}, {"end", s.end}, {"surface", s.surface}});
    return a;
  };
  auto ranked = [](const std::vector<ErrorCount>& v) {
    auto a = nlohmann::json::array();
    for (const auto& e : v) a.push_back({{"surface", e.surface}, {"count", e.count}});
    return a;
  };
  return {{"tp", r.tp},
          {"fp", r.fp},
          {"fn", r.fn},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"fp_spans", spans(r.fp_spans)},
          {"fn_spans", spans(r.fn_spans)},
          {"top_errors", {{"fp", ranked(r.top_fp)}, {"fn", ranked(r.top_fn)}}}};
}

}  // namespace ote
