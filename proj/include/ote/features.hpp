#pragma once

// Sparse feature extraction for one token in context. Every key has the form
// "template=value@offset". Local templates cover orthography, word shape and
// token n-grams over a window of +-radius tokens; cluster templates query each
// configured lexicon for every window slot.

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ote/corpus_io.hpp"
#include "ote/error.hpp"
#include "ote/lexicon.hpp"
#include "ote/text.hpp"

namespace ote {

inline constexpr std::string_view kBosToken = "*BOS*";
inline constexpr std::string_view kEosToken = "*EOS*";
inline constexpr std::string_view kNotFound = "<NOTFOUND>";

/// Lexicons by name, immutable once loaded and shareable across threads.
using LexiconMap = std::map<std::string, std::shared_ptr<const ClusterLexicon>>;

struct FeatureConfig {
  bool word = true;
  bool lower = true;
  bool shape = true;
  bool affixes = true;
  bool bigrams = true;
  bool bos = true;
  int radius = 2;
  std::size_t affix_max = 4;
  std::vector<std::string> lexicons;
  std::map<std::string, Casing> casing;  // per-lexicon overrides

  /// "local" for no lexicons, otherwise "local+A+B" in list order.
  std::string name() const {
    std::string n = "local";
    for (const auto& l : lexicons) n += "+" + l;
    return n;
  }

  void validate() const {
    if (radius < 0) throw Error("feature window radius must be non-negative");
    std::set<std::string> seen;
    for (const auto& l : lexicons)
      if (!seen.insert(l).second) throw Error("lexicon '" + l + "' listed twice in feature config");
  }

  std::string to_text() const {
    std::string out;
    out += "radius=" + std::to_string(radius) + "\n";
    out += "affix_max=" + std::to_string(affix_max) + "\n";
    std::vector<std::string> t;
    if (word) t.push_back("word");
    if (lower) t.push_back("lower");
    if (shape) t.push_back("shape");
    if (affixes) t.push_back("affix");
    if (bigrams) t.push_back("bigram");
    if (bos) t.push_back("bos");
    out += "templates=";
    for (std::size_t i = 0; i < t.size(); ++i) out += (i ? "," : "") + t[i];
    out += "\nlexicons=";
    for (std::size_t i = 0; i < lexicons.size(); ++i) out += (i ? "," : "") + lexicons[i];
    out += "\n";
    for (const auto& [name, c] : casing) out += "casing." + name + "=" + std::string(casing_name(c)) + "\n";
    return out;
  }

  static FeatureConfig from_text(std::string_view data) {
    FeatureConfig cfg;
    text::for_each_line(data, [&](std::string_view line, std::size_t lineno) {
      auto first = line.find_first_not_of(" \t");
      if (first == std::string_view::npos || line[first] == '#') return;
      auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError("expected key=value", lineno);
      auto trim = [](std::string_view s) {
        auto b = s.find_first_not_of(" \t");
        if (b == std::string_view::npos) return std::string_view{};
        auto e = s.find_last_not_of(" \t");
        return s.substr(b, e - b + 1);
      };
      auto key = trim(line.substr(0, eq));
      auto value = trim(line.substr(eq + 1));
      auto list = [&] {
        std::vector<std::string> items;
        if (value.empty()) return items;
        for (auto item : text::split(value, ',')) {
          auto v = trim(item);
          if (!v.empty()) items.emplace_back(v);
        }
        return items;
      };
      if (key == "radius") {
        auto v = text::parse_int<int>(value);
        if (!v || *v < 0) throw ParseError("bad radius", lineno);
        cfg.radius = *v;
      } else if (key == "affix_max") {
        auto v = text::parse_int<std::size_t>(value);
        if (!v) throw ParseError("bad affix_max", lineno);
        cfg.affix_max = *v;
      } else if (key == "templates") {
        cfg.word = cfg.lower = cfg.shape = cfg.affixes = cfg.bigrams = cfg.bos = false;
        for (const auto& t : list()) {
          if (t == "word") cfg.word = true;
          else if (t == "lower") cfg.lower = true;
          else if (t == "shape") cfg.shape = true;
          else if (t == "affix") cfg.affixes = true;
          else if (t == "bigram") cfg.bigrams = true;
          else if (t == "bos") cfg.bos = true;
          else throw ParseError("unknown template '" + t + "'", lineno);
        }
      } else if (key == "lexicons") {
        cfg.lexicons = list();
      } else if (key.substr(0, 7) == "casing.") {
        auto c = parse_casing(value);
        if (!c) throw ParseError("bad casing '" + std::string(value) + "'", lineno);
        cfg.casing[std::string(key.substr(7))] = *c;
      } else {
        throw ParseError("unknown config key '" + std::string(key) + "'", lineno);
      }
    });
    cfg.validate();
    return cfg;
  }

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

/// Upper -> X, lower -> x, digit -> 0, anything else -> U+2021; runs collapse.
inline std::string word_shape(std::string_view word) {
  std::string out;
  char32_t last = 0;
  for (char32_t c : text::decode_utf8(word)) {
    char32_t m = text::is_upper(c) ? U'X' : text::is_lower(c) ? U'x' : text::is_digit(c) ? U'0' : U'‡';
    if (m != last) text::append_utf8(out, m);
    last = m;
  }
  return out;
}

using FeatureSet = std::vector<std::string>;

struct FeatureKey {
  std::string templ;
  std::string value;
  int offset = 0;

  friend bool operator==(const FeatureKey&, const FeatureKey&) = default;
};

/// Splits "template=value@offset"; the template is everything before the
/// first '=', the offset everything after the last '@'.
inline std::optional<FeatureKey> parse_feature_key(std::string_view key) {
  auto eq = key.find('=');
  auto at = key.rfind('@');
  if (eq == std::string_view::npos || at == std::string_view::npos || at < eq || eq == 0) return std::nullopt;
  auto off = text::parse_int<int>(key.substr(at + 1));
  if (!off) return std::nullopt;
  return FeatureKey{std::string(key.substr(0, eq)), std::string(key.substr(eq + 1, at - eq - 1)), *off};
}

namespace detail {

inline std::string_view window_surface(const Sentence& sent, long j) {
  if (j < 0) return kBosToken;
  if (j >= static_cast<long>(sent.tokens.size())) return kEosToken;
  return sent.tokens[static_cast<std::size_t>(j)].surface;
}

inline void emit(FeatureSet& out, std::string_view templ, std::string_view value, int offset) {
  std::string k;
  k.reserve(templ.size() + value.size() + 6);
  k.append(templ);
  k.push_back('=');
  k.append(value);
  k.push_back('@');
  k.append(std::to_string(offset));
  out.push_back(std::move(k));
}

}  // namespace detail

inline void append_local_features(FeatureSet& out, const Sentence& sent, std::size_t i, const FeatureConfig& cfg) {
  const long focus = static_cast<long>(i);
  const int r = cfg.radius;
  std::vector<std::string> lowered;
  lowered.reserve(2 * r + 1);
  for (int o = -r; o <= r; ++o) {
    auto surf = detail::window_surface(sent, focus + o);
    bool padding = surf.data() == kBosToken.data() || surf.data() == kEosToken.data();
    auto low = padding ? std::string(surf) : text::lowercase(surf);
    if (cfg.word) detail::emit(out, "w", surf, o);
    if (cfg.lower) detail::emit(out, "lw", low, o);
    if (cfg.shape) detail::emit(out, "shape", padding ? std::string(surf) : word_shape(surf), o);
    lowered.push_back(std::move(low));
  }
  if (cfg.affixes) {
    auto chars = text::decode_utf8(sent.tokens[i].surface);
    for (std::size_t n = 1; n <= cfg.affix_max && n <= chars.size(); ++n) {
      auto cv = std::u32string_view(chars);
      detail::emit(out, "pre" + std::to_string(n), text::encode_utf8(cv.substr(0, n)), 0);
      detail::emit(out, "suf" + std::to_string(n), text::encode_utf8(cv.substr(chars.size() - n)), 0);
    }
  }
  if (cfg.bigrams) {
    for (int o = -r; o < r; ++o) {
      const auto& a = lowered[static_cast<std::size_t>(o + r)];
      const auto& b = lowered[static_cast<std::size_t>(o + r + 1)];
      detail::emit(out, "bg", a + "_" + b, o);
    }
  }
  if (cfg.bos && i == 0) detail::emit(out, "bos", "1", 0);
}

inline FeatureSet local_features(const Sentence& sent, std::size_t i, const FeatureConfig& cfg = {}) {
  FeatureSet out;
  append_local_features(out, sent, i, cfg);
  return out;
}

inline void append_cluster_features(FeatureSet& out, const Sentence& sent, std::size_t i,
                                    const FeatureConfig& cfg, const LexiconMap& lexicons) {
  const long focus = static_cast<long>(i);
  for (const auto& name : cfg.lexicons) {
    auto it = lexicons.find(name);
    if (it == lexicons.end() || !it->second) throw Error("lexicon '" + name + "' is not loaded");
    const ClusterLexicon& lex = *it->second;
    for (int o = -cfg.radius; o <= cfg.radius; ++o) {
      auto surf = detail::window_surface(sent, focus + o);
      bool found = lex.visit(surf, [&](std::string_view key, std::string_view cls) {
        detail::emit(out, key, cls, o);
      });
      if (!found) detail::emit(out, "cluster:" + name, kNotFound, o);
    }
  }
}

inline FeatureSet cluster_features(const Sentence& sent, std::size_t i, const FeatureConfig& cfg,
                                   const LexiconMap& lexicons) {
  FeatureSet out;
  append_cluster_features(out, sent, i, cfg, lexicons);
  return out;
}

/// Local plus cluster features. Stacking and combining lexicons are both just
/// longer lexicon lists in the config.
inline FeatureSet extract(const Sentence& sent, std::size_t i, const FeatureConfig& cfg,
                          const LexiconMap& lexicons) {
  FeatureSet out;
  append_local_features(out, sent, i, cfg);
  append_cluster_features(out, sent, i, cfg, lexicons);
  return out;
}

/// Checks that every lexicon the config names is present.
inline void require_lexicons(const FeatureConfig& cfg, const LexiconMap& lexicons) {
  for (const auto& name : cfg.lexicons) {
    auto it = lexicons.find(name);
    if (it == lexicons.end() || !it->second) throw Error("lexicon '" + name + "' is not loaded");
  }
}

}  // namespace ote
