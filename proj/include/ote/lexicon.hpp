#pragma once

// Clustering lexicons: Brown bit-path files and flat word-class files (Clark,
// word2vec k-means), with the per-token class queries the features consume.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ote/error.hpp"
#include "ote/text.hpp"

namespace ote {

enum class LexiconFamily { Brown, Clark, Word2vecKMeans };
enum class Casing { preserve, lowercase };

inline std::string_view family_name(LexiconFamily f) {
  switch (f) {
    case LexiconFamily::Brown: return "brown";
    case LexiconFamily::Clark: return "clark";
    default: return "w2v";
  }
}

inline std::optional<LexiconFamily> parse_family(std::string_view s) {
  if (s == "brown") return LexiconFamily::Brown;
  if (s == "clark") return LexiconFamily::Clark;
  if (s == "w2v" || s == "word2vec") return LexiconFamily::Word2vecKMeans;
  return std::nullopt;
}

inline std::string_view casing_name(Casing c) { return c == Casing::preserve ? "preserve" : "lowercase"; }

inline std::optional<Casing> parse_casing(std::string_view s) {
  if (s == "preserve") return Casing::preserve;
  if (s == "lowercase") return Casing::lowercase;
  return std::nullopt;
}

/// Brown path prefix depths used as features.
inline constexpr std::array<std::size_t, 4> kBrownPrefixes{4, 8, 12, 20};

/// One (feature-key, class) answer of a lexicon query.
struct ClusterFeature {
  std::string key;
  std::string value;

  friend bool operator==(const ClusterFeature&, const ClusterFeature&) = default;
};

inline bool is_bit_path(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c == '0' || c == '1'; });
}

/// A named word -> cluster mapping. For Brown lexicons the class is a bit
/// path; for flat families it is the decimal class id.
class ClusterLexicon {
 public:
  struct Entry {
    std::string cls;
    std::uint64_t count = 0;  // Brown frequency column; 0 when unknown
  };

  ClusterLexicon(std::string name, LexiconFamily family, Casing casing = Casing::lowercase)
      : name_(std::move(name)), family_(family), casing_(casing) {
    if (name_.empty() || name_.find_first_of("=@:\t\n ,") != std::string::npos)
      throw Error("invalid lexicon name '" + name_ + "'");
    brown_keys_.reserve(kBrownPrefixes.size());
    for (auto len : kBrownPrefixes) brown_keys_.push_back("brown:" + name_ + ":" + std::to_string(len));
    flat_key_ = std::string(family_name(family_)) + ":" + name_;
  }

  const std::string& name() const { return name_; }
  LexiconFamily family() const { return family_; }
  Casing casing() const { return casing_; }
  void set_casing(Casing c) { casing_ = c; }
  std::size_t size() const { return entries_.size(); }
  const std::unordered_map<std::string, Entry>& entries() const { return entries_; }

  /// Returns false when the word is already present.
  bool add(std::string word, std::string cls, std::uint64_t count = 0) {
    if (family_ == LexiconFamily::Brown) {
      if (!is_bit_path(cls)) throw Error("Brown class '" + cls + "' is not a bit string");
    } else if (!text::parse_int<std::int64_t>(cls) || cls[0] == '-' || cls[0] == '+') {
      throw Error("class id '" + cls + "' is not a non-negative integer");
    }
    auto folded = text::lowercase(word);
    auto [it, inserted] = entries_.emplace(std::move(word), Entry{std::move(cls), count});
    if (!inserted) return false;
    // Case-folded index for lowercase lookup. On collisions the already
    // lowercase entry wins, else the smallest spelling, so the result does
    // not depend on file order.
    auto [f, fresh] = folded_.emplace(folded, it->first);
    if (!fresh && f->second != f->first && (it->first == folded || it->first < f->second)) f->second = it->first;
    return true;
  }

  const Entry* find(std::string_view word) const {
    if (casing_ == Casing::lowercase) {
      auto f = folded_.find(text::lowercase(word));
      return f == folded_.end() ? nullptr : &entries_.at(f->second);
    }
    auto it = entries_.find(std::string(word));
    return it == entries_.end() ? nullptr : &it->second;
  }

  /// Calls f(key, value) for each feature of a found word; returns false
  /// (calling nothing) when the word is absent.
  template <class F>
  bool visit(std::string_view word, F&& f) const {
    const Entry* e = find(word);
    if (!e) return false;
    if (family_ != LexiconFamily::Brown) {
      f(std::string_view(flat_key_), std::string_view(e->cls));
      return true;
    }
    std::string_view path = e->cls;
    if (path.size() < kBrownPrefixes[0]) {
      f(std::string_view(brown_keys_[0]), path);
      return true;
    }
    for (std::size_t k = 0; k < kBrownPrefixes.size() && kBrownPrefixes[k] <= path.size(); ++k)
      f(std::string_view(brown_keys_[k]), path.substr(0, kBrownPrefixes[k]));
    return true;
  }

  /// Content hash over family and sorted entries, as 16 hex digits.
  std::string fingerprint() const {
    std::vector<std::pair<std::string_view, std::string_view>> items;
    items.reserve(entries_.size());
    for (const auto& [w, e] : entries_) items.emplace_back(w, e.cls);
    std::sort(items.begin(), items.end());
    std::uint64_t h = text::fnv1a(family_name(family_));
    for (const auto& [w, c] : items) {
      h = text::fnv1a(w, h);
      h = text::fnv1a("\t", h);
      h = text::fnv1a(c, h);
      h = text::fnv1a("\n", h);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

 private:
  std::string name_;
  LexiconFamily family_;
  Casing casing_;
  std::unordered_map<std::string, Entry> entries_;
  std::unordered_map<std::string, std::string> folded_;
  std::vector<std::string> brown_keys_;
  std::string flat_key_;
};

/// Query result: nullopt is the NOT_FOUND value.
inline std::optional<std::vector<ClusterFeature>> lookup(const ClusterLexicon& lex, std::string_view word) {
  std::vector<ClusterFeature> out;
  bool found = lex.visit(word, [&](std::string_view k, std::string_view v) {
    out.push_back({std::string(k), std::string(v)});
  });
  if (!found) return std::nullopt;
  return out;
}

/// Reads "bitpath<TAB>word<TAB>count" lines.
inline ClusterLexicon load_brown_paths(std::string_view bytes, std::string name,
                                       Casing casing = Casing::lowercase) {
  ClusterLexicon lex(std::move(name), LexiconFamily::Brown, casing);
  text::for_each_line(bytes, [&](std::string_view line, std::size_t lineno) {
    if (line.empty()) return;
    auto cols = text::split(line, '\t');
    if (cols.size() < 2 || cols.size() > 3) throw ParseError("expected bitpath<TAB>word<TAB>count", lineno);
    if (!is_bit_path(cols[0])) throw ParseError("path '" + std::string(cols[0]) + "' is not binary", lineno);
    if (cols[1].empty()) throw ParseError("empty word", lineno);
    std::uint64_t count = 0;
    if (cols.size() == 3) {
      auto c = text::parse_int<std::uint64_t>(cols[2]);
      if (!c) throw ParseError("bad count '" + std::string(cols[2]) + "'", lineno);
      count = *c;
    }
    if (!lex.add(std::string(cols[1]), std::string(cols[0]), count))
      throw ParseError("duplicate word '" + std::string(cols[1]) + "'", lineno);
  });
  if (lex.size() == 0) throw Error("Brown lexicon '" + lex.name() + "' is empty");
  return lex;
}

/// Reads "word<TAB>classid" lines; Clark's blank-separated "word class freq"
/// layout is accepted with the third column ignored.
inline ClusterLexicon load_flat_classes(std::string_view bytes, std::string name, LexiconFamily family,
                                        Casing casing = Casing::lowercase) {
  if (family == LexiconFamily::Brown) throw Error("load_flat_classes needs a flat family");
  ClusterLexicon lex(std::move(name), family, casing);
  text::for_each_line(bytes, [&](std::string_view line, std::size_t lineno) {
    if (line.empty()) return;
    auto cols = text::split_blanks(line);
    if (cols.empty()) return;
    if (cols.size() < 2 || cols.size() > 3) throw ParseError("expected word<TAB>classid", lineno);
    auto id = text::parse_int<std::int64_t>(cols[1]);
    if (!id || *id < 0) throw ParseError("class id '" + std::string(cols[1]) + "' is not a non-negative integer", lineno);
    if (!lex.add(std::string(cols[0]), std::to_string(*id)))
      throw ParseError("duplicate word '" + std::string(cols[0]) + "'", lineno);
  });
  if (lex.size() == 0) throw Error("lexicon '" + lex.name() + "' is empty");
  return lex;
}

/// Serializes in the loader's format for the lexicon's family. Entries are
/// ordered by class, then word.
inline std::string write_lexicon(const ClusterLexicon& lex) {
  std::vector<std::pair<const std::string*, const ClusterLexicon::Entry*>> items;
  items.reserve(lex.size());
  for (const auto& [w, e] : lex.entries()) items.emplace_back(&w, &e);
  const bool brown = lex.family() == LexiconFamily::Brown;
  std::sort(items.begin(), items.end(), [brown](const auto& a, const auto& b) {
    if (a.second->cls != b.second->cls) {
      if (brown) return a.second->cls < b.second->cls;
      return std::stoll(a.second->cls) < std::stoll(b.second->cls);
    }
    return *a.first < *b.first;
  });
  std::string out;
  for (const auto& [w, e] : items) {
    if (brown) {
      out += e->cls + '\t' + *w + '\t' + std::to_string(e->count) + '\n';
    } else {
      out += *w + '\t' + e->cls + '\n';
    }
  }
  return out;
}

/// Picks the loader from the file content: three tab-separated columns with a
/// binary first column mean Brown, anything else is read as flat classes.
inline LexiconFamily detect_family(std::string_view bytes) {
  std::optional<LexiconFamily> fam;
  text::for_each_line(bytes, [&](std::string_view line, std::size_t) {
    if (fam || line.empty()) return;
    auto cols = text::split(line, '\t');
    fam = (cols.size() == 3 && is_bit_path(cols[0])) ? LexiconFamily::Brown : LexiconFamily::Clark;
  });
  return fam.value_or(LexiconFamily::Clark);
}

inline ClusterLexicon load_lexicon(std::string_view bytes, std::string name, LexiconFamily family,
                                   Casing casing = Casing::lowercase) {
  if (family == LexiconFamily::Brown) return load_brown_paths(bytes, std::move(name), casing);
  return load_flat_classes(bytes, std::move(name), family, casing);
}

}  // namespace ote
