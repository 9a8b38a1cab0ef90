#pragma once

// ABSA review ingestion: XML parsing (2014 aspectTerm and 2015/2016 Opinion
// layouts), rule-based tokenization with code-point offsets, conversion of
// target spans to BIO labels, and the tab-separated column format.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <expat.h>

#include "ote/error.hpp"
#include "ote/text.hpp"

namespace ote {

enum class Label : std::uint8_t { O = 0, B = 1, I = 2 };

inline constexpr std::array<Label, 3> kLabels{Label::O, Label::B, Label::I};
inline constexpr std::size_t kNumLabels = 3;

inline std::string_view label_name(Label l) {
  switch (l) {
    case Label::B: return "B-target";
    case Label::I: return "I-target";
    default: return "O";
  }
}

inline std::optional<Label> parse_label(std::string_view s) {
  if (s == "O") return Label::O;
  if (s == "B-target") return Label::B;
  if (s == "I-target") return Label::I;
  return std::nullopt;
}

/// True when no I-target starts a sentence or follows an O.
inline bool is_valid_bio(const std::vector<Label>& labels) {
  Label prev = Label::O;
  for (Label l : labels) {
    if (l == Label::I && prev == Label::O) return false;
    prev = l;
  }
  return true;
}

struct OpinionAnnotation {
  std::string target;
  std::string category;
  std::string polarity;
  std::size_t from = 0;
  std::size_t to = 0;

  bool is_null() const { return target == "NULL"; }
};

struct RawSentence {
  std::string id;
  std::string text;
  std::vector<OpinionAnnotation> opinions;
};

struct Token {
  std::string surface;
  std::size_t start = 0;  // code points, inclusive
  std::size_t end = 0;    // code points, exclusive

  friend bool operator==(const Token&, const Token&) = default;
};

struct Sentence {
  std::string id;
  std::vector<Token> tokens;
  std::vector<Label> labels;
  // False when offsets were synthesized (column input without a span column).
  bool has_offsets = true;

  std::size_t size() const { return tokens.size(); }
  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct CorpusStats {
  std::size_t tokens = 0;
  std::size_t b_targets = 0;
  std::size_t i_targets = 0;          // I-target labels
  std::size_t multiword_targets = 0;  // targets with at least one I-target
  double multiword_target_fraction = 0.0;
};

struct ParseWarning {
  std::string sentence_id;
  std::string message;
};

struct XmlCorpus {
  std::vector<RawSentence> sentences;
  std::vector<ParseWarning> warnings;
};

namespace detail {

using boost::property_tree::ptree;

inline std::size_t attr_offset(const ptree& node, const char* name, const std::string& sid) {
  auto raw = node.get<std::string>(std::string("<xmlattr>.") + name, "0");
  auto v = text::parse_int<std::size_t>(raw);
  if (!v) throw ParseError("sentence '" + sid + "': bad offset " + name + "=\"" + raw + "\"");
  return *v;
}

inline void check_opinion(const RawSentence& s, const std::u32string& chars,
                          const OpinionAnnotation& op, std::vector<ParseWarning>& warnings) {
  if (op.is_null()) return;
  if (op.from >= op.to || op.to > chars.size())
    throw ParseError("sentence '" + s.id + "': target '" + op.target + "' has span " +
                     std::to_string(op.from) + "-" + std::to_string(op.to) +
                     " outside text of length " + std::to_string(chars.size()));
  auto covered = text::encode_utf8(std::u32string_view(chars).substr(op.from, op.to - op.from));
  if (covered != op.target)
    warnings.push_back({s.id, "target '" + op.target + "' does not match text '" + covered +
                                  "' at " + std::to_string(op.from) + "-" + std::to_string(op.to)});
}

inline void collect_sentences(const ptree& node, XmlCorpus& out) {
  for (const auto& [name, child] : node) {
    if (name != "sentence") {
      if (name != "<xmlattr>" && name != "<xmlcomment>") collect_sentences(child, out);
      continue;
    }
    RawSentence s;
    s.id = child.get<std::string>("<xmlattr>.id", "");
    if (s.id.empty()) throw ParseError("sentence without id attribute");
    s.text = child.get<std::string>("text", "");
    if (auto ops = child.get_child_optional("Opinions")) {
      for (const auto& [oname, o] : *ops) {
        if (oname != "Opinion") continue;
        OpinionAnnotation op;
        op.target = o.get<std::string>("<xmlattr>.target", "NULL");
        op.category = o.get<std::string>("<xmlattr>.category", "");
        op.polarity = o.get<std::string>("<xmlattr>.polarity", "");
        op.from = attr_offset(o, "from", s.id);
        op.to = attr_offset(o, "to", s.id);
        s.opinions.push_back(std::move(op));
      }
    }
    if (auto terms = child.get_child_optional("aspectTerms")) {
      for (const auto& [tname, t] : *terms) {
        if (tname != "aspectTerm") continue;
        OpinionAnnotation op;
        op.target = t.get<std::string>("<xmlattr>.term", "");
        op.polarity = t.get<std::string>("<xmlattr>.polarity", "");
        op.from = attr_offset(t, "from", s.id);
        op.to = attr_offset(t, "to", s.id);
        s.opinions.push_back(std::move(op));
      }
    }
    auto chars = text::decode_utf8(s.text);
    for (const auto& op : s.opinions) check_opinion(s, chars, op, out.warnings);
    out.sentences.push_back(std::move(s));
  }
}

/// The ptree reader does not check that closing tags match, so a strict
/// well-formedness pass runs first for exact error lines.
inline void check_well_formed(std::string_view bytes) {
  if (bytes.size() > static_cast<std::size_t>(std::numeric_limits<int>::max())) throw Error("XML input too large");
  XML_Parser p = XML_ParserCreate(nullptr);
  if (!p) throw Error("cannot allocate XML parser");
  bool ok = XML_Parse(p, bytes.data(), static_cast<int>(bytes.size()), 1) == XML_STATUS_OK;
  std::string msg = ok ? "" : XML_ErrorString(XML_GetErrorCode(p));
  auto line = static_cast<std::size_t>(XML_GetCurrentLineNumber(p));
  XML_ParserFree(p);
  if (!ok) throw ParseError("malformed XML: " + msg, line);
}

}  // namespace detail

/// Parses either ABSA XML layout into raw sentences. Target/text mismatches
/// are reported as warnings; the offsets are kept as ground truth.
inline XmlCorpus parse_absa_xml(std::string_view bytes) {
  detail::check_well_formed(bytes);
  boost::property_tree::ptree tree;
  std::istringstream in{std::string(bytes)};
  try {
    boost::property_tree::read_xml(in, tree);
  } catch (const boost::property_tree::xml_parser_error& e) {
    throw ParseError("malformed XML: " + e.message(), e.line());
  }
  XmlCorpus out;
  detail::collect_sentences(tree, out);
  return out;
}

/// Whitespace split, then leading and trailing punctuation peeled off one
/// character per token. Interior punctuation stays attached.
inline std::vector<Token> tokenize(std::string_view text_utf8) {
  auto chars = text::decode_utf8(text_utf8);
  std::vector<Token> out;
  auto emit = [&](std::size_t b, std::size_t e) {
    out.push_back({text::encode_utf8(std::u32string_view(chars).substr(b, e - b)), b, e});
  };
  std::size_t i = 0;
  const std::size_t n = chars.size();
  while (i < n) {
    while (i < n && text::is_space(chars[i])) ++i;
    if (i >= n) break;
    std::size_t j = i;
    while (j < n && !text::is_space(chars[j])) ++j;
    std::size_t b = i, e = j;
    while (b < e && text::is_punct(chars[b])) {
      emit(b, b + 1);
      ++b;
    }
    std::size_t core_end = e;
    while (core_end > b && text::is_punct(chars[core_end - 1])) --core_end;
    if (core_end > b) emit(b, core_end);
    for (std::size_t k = core_end; k < e; ++k) emit(k, k + 1);
    i = j;
  }
  return out;
}

struct BioOptions {
  // Resolve overlapping targets by keeping the earlier-starting one.
  bool lenient = false;
};

/// Labels tokens from the sentence's non-NULL target spans. Spans snap
/// outward to whole tokens; identical token spans collapse.
inline Sentence to_bio(const RawSentence& s, const BioOptions& opts = {}) {
  Sentence out;
  out.id = s.id;
  out.tokens = tokenize(s.text);
  out.labels.assign(out.tokens.size(), Label::O);

  std::vector<std::pair<std::size_t, std::size_t>> spans;  // token range [first, last]
  for (const auto& op : s.opinions) {
    if (op.is_null()) continue;
    std::optional<std::size_t> first, last;
    for (std::size_t t = 0; t < out.tokens.size(); ++t) {
      const auto& tok = out.tokens[t];
      if (tok.end > op.from && tok.start < op.to) {
        if (!first) first = t;
        last = t;
      }
    }
    if (!first)
      throw ParseError("sentence '" + s.id + "': target '" + op.target + "' covers no token");
    spans.emplace_back(*first, *last);
  }
  std::sort(spans.begin(), spans.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second > b.second;
  });
  spans.erase(std::unique(spans.begin(), spans.end()), spans.end());

  std::optional<std::size_t> covered_until;  // last token of the previous kept span
  for (const auto& [first, last] : spans) {
    if (covered_until && first <= *covered_until) {
      if (!opts.lenient) {
        throw SpanConflict(s.id, "tokens " + std::to_string(first) + "-" + std::to_string(last) +
                                     " overlap a target ending at token " +
                                     std::to_string(*covered_until));
      }
      continue;
    }
    out.labels[first] = Label::B;
    for (std::size_t t = first + 1; t <= last; ++t) out.labels[t] = Label::I;
    covered_until = last;
  }
  return out;
}

/// Column format: optional "# id = <id>" header, then one
/// "surface<TAB>label[<TAB>start-end]" line per token; blank line ends a sentence.
inline std::string write_column(const std::vector<Sentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    if (s.labels.size() != s.tokens.size())
      throw Error("sentence '" + s.id + "': label count differs from token count");
    if (!s.id.empty()) {
      if (s.id.find_first_of("\t\n\r") != std::string::npos)
        throw Error("sentence id contains a tab or newline: '" + s.id + "'");
      out += "# id = ";
      out += s.id;
      out += '\n';
    }
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      const auto& tok = s.tokens[i];
      out += tok.surface;
      out += '\t';
      out += label_name(s.labels[i]);
      if (s.has_offsets) {
        out += '\t';
        out += std::to_string(tok.start);
        out += '-';
        out += std::to_string(tok.end);
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

struct ColumnOptions {
  // Accept single-column (surface only) lines; labels default to O.
  bool allow_unlabeled = false;
};

inline std::vector<Sentence> read_column(std::string_view data, const ColumnOptions& opts = {}) {
  std::vector<Sentence> out;
  Sentence cur;
  std::size_t columns = 0;
  bool open = false;

  auto finish = [&] {
    if (open && !cur.tokens.empty()) {
      if (!cur.has_offsets) {
        std::size_t pos = 0;
        for (auto& tok : cur.tokens) {
          tok.start = pos;
          tok.end = pos + text::length_utf8(tok.surface);
          pos = tok.end + 1;
        }
      }
      out.push_back(std::move(cur));
    } else if (open && !cur.id.empty()) {
      out.push_back(std::move(cur));
    }
    cur = Sentence{};
    columns = 0;
    open = false;
  };

  const std::string_view kIdPrefix = "# id = ";
  text::for_each_line(data, [&](std::string_view line, std::size_t lineno) {
    if (line.empty()) {
      finish();
      return;
    }
    if (line.substr(0, kIdPrefix.size()) == kIdPrefix && line.find('\t') == std::string_view::npos) {
      if (open) throw ParseError("sentence id header inside a sentence", lineno);
      cur.id = std::string(line.substr(kIdPrefix.size()));
      open = true;
      return;
    }
    open = true;
    auto cols = text::split(line, '\t');
    if (columns == 0) {
      columns = cols.size();
      if (columns > 3 || (columns == 1 && !opts.allow_unlabeled))
        throw ParseError("expected 2 or 3 tab-separated columns, got " + std::to_string(columns), lineno);
      cur.has_offsets = columns == 3;
    } else if (cols.size() != columns) {
      throw ParseError("ragged columns: expected " + std::to_string(columns) + ", got " +
                           std::to_string(cols.size()),
                       lineno);
    }
    if (cols[0].empty()) throw ParseError("empty token surface", lineno);
    Token tok{std::string(cols[0]), 0, 0};
    Label label = Label::O;
    if (columns >= 2) {
      auto l = parse_label(cols[1]);
      if (!l) throw ParseError("bad label '" + std::string(cols[1]) + "'", lineno);
      label = *l;
    }
    if (columns == 3) {
      auto dash = cols[2].find('-');
      std::optional<std::size_t> b, e;
      if (dash != std::string_view::npos) {
        b = text::parse_int<std::size_t>(cols[2].substr(0, dash));
        e = text::parse_int<std::size_t>(cols[2].substr(dash + 1));
      }
      if (!b || !e || *b >= *e) throw ParseError("bad offsets '" + std::string(cols[2]) + "'", lineno);
      tok.start = *b;
      tok.end = *e;
    }
    cur.tokens.push_back(std::move(tok));
    cur.labels.push_back(label);
  });
  finish();
  return out;
}

inline CorpusStats corpus_stats(const std::vector<Sentence>& sentences) {
  CorpusStats st;
  for (const auto& s : sentences) {
    st.tokens += s.tokens.size();
    for (std::size_t i = 0; i < s.labels.size(); ++i) {
      if (s.labels[i] == Label::B) {
        ++st.b_targets;
        if (i + 1 < s.labels.size() && s.labels[i + 1] == Label::I) ++st.multiword_targets;
      } else if (s.labels[i] == Label::I) {
        ++st.i_targets;
      }
    }
  }
  if (st.b_targets > 0)
    st.multiword_target_fraction =
        static_cast<double>(st.multiword_targets) / static_cast<double>(st.b_targets);
  return st;
}

/// Parses XML and converts every sentence; the usual route from ABSA files.
inline std::vector<Sentence> convert_xml(std::string_view bytes, const BioOptions& opts = {},
                                         std::vector<ParseWarning>* warnings = nullptr) {
  auto corpus = parse_absa_xml(bytes);
  if (warnings) *warnings = corpus.warnings;
  std::vector<Sentence> out;
  out.reserve(corpus.sentences.size());
  for (const auto& s : corpus.sentences) out.push_back(to_bio(s, opts));
  return out;
}

/// True when the buffer looks like XML rather than column text.
inline bool looks_like_xml(std::string_view bytes) {
  auto pos = bytes.find_first_not_of(" \t\r\n\xEF\xBB\xBF");
  return pos != std::string_view::npos && bytes[pos] == '<';
}

}  // namespace ote
