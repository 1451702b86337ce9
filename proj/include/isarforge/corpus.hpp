#pragma once

// Five-field example model, flat / hierarchical input assembly, and parallel
// file I/O (one example per line, space-separated tokens, category-tagged
// sources joined by <SEP>).

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "isarforge/errors.hpp"
#include "isarforge/term.hpp"
#include "isarforge/vocab.hpp"

namespace isarforge {

enum class Category : std::uint8_t {
  F1_TARGET = 1,
  F2_USED_LOCAL = 2,
  F3_CONQ = 3,
  F4_USED_OTHER = 4,
  F5_LEMMAS = 5,
};

inline const char* category_tag(Category c) {
  switch (c) {
    case Category::F2_USED_LOCAL: return "<F2>";
    case Category::F3_CONQ: return "<F3>";
    case Category::F4_USED_OTHER: return "<F4>";
    case Category::F5_LEMMAS: return "<F5>";
    default: throw Error("category F1 is a target, not a source tag");
  }
}

inline std::optional<Category> category_from_tag(const std::string& tok) {
  if (tok == "<F2>") return Category::F2_USED_LOCAL;
  if (tok == "<F3>") return Category::F3_CONQ;
  if (tok == "<F4>") return Category::F4_USED_OTHER;
  if (tok == "<F5>") return Category::F5_LEMMAS;
  return std::nullopt;
}

struct SourceProposition {
  TokenSeq tokens;
  Category category{Category::F2_USED_LOCAL};
};

struct Example {
  TokenSeq target;
  std::vector<SourceProposition> sources;
  std::optional<std::string> theorem_id;

  bool operator==(const Example& other) const {
    if (target != other.target || sources.size() != other.sources.size()) return false;
    for (std::size_t i = 0; i < sources.size(); ++i)
      if (sources[i].tokens != other.sources[i].tokens ||
          sources[i].category != other.sources[i].category)
        return false;
    return true;
  }
};

struct FlatInput {
  TokenSeq tokens;
};

struct HierProposition {
  TokenSeq tokens;
  Category category{Category::F2_USED_LOCAL};
  // Token positions are implicit: 1..tokens.size(), restarting per proposition.
};

struct HierInput {
  std::vector<HierProposition> propositions;
};

namespace detail {

/// Sources in canonical category order F2, F3, F4, F5, preserving the given
/// within-category order; F5 dropped unless include_f5.
inline std::vector<const SourceProposition*> ordered_sources(const Example& example,
                                                             bool include_f5) {
  std::vector<const SourceProposition*> out;
  for (Category c : {Category::F2_USED_LOCAL, Category::F3_CONQ, Category::F4_USED_OTHER,
                     Category::F5_LEMMAS}) {
    if (c == Category::F5_LEMMAS && !include_f5) continue;
    for (const auto& src : example.sources)
      if (src.category == c) out.push_back(&src);
  }
  return out;
}

}  // namespace detail

inline FlatInput assemble_flat(const Example& example, bool include_f5) {
  FlatInput flat;
  auto sources = detail::ordered_sources(example, include_f5);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (i) flat.tokens.emplace_back("<SEP>");
    flat.tokens.emplace_back(category_tag(sources[i]->category));
    flat.tokens.insert(flat.tokens.end(), sources[i]->tokens.begin(), sources[i]->tokens.end());
  }
  return flat;
}

inline HierInput assemble_hier(const Example& example, bool include_f5) {
  HierInput hier;
  for (const SourceProposition* src : detail::ordered_sources(example, include_f5))
    hier.propositions.push_back({src->tokens, src->category});
  return hier;
}

inline std::size_t flat_source_length(const Example& example, bool include_f5) {
  return assemble_flat(example, include_f5).tokens.size();
}

// --- parallel file I/O ---

inline Example parse_src_line(const TokenSeq& toks, std::size_t lineno) {
  Example ex;
  std::size_t i = 0;
  while (i < toks.size()) {
    auto cat = category_from_tag(toks[i]);
    if (!cat) throw MalformedLine(lineno, "expected a category tag, got '" + toks[i] + "'");
    ++i;
    SourceProposition prop;
    prop.category = *cat;
    while (i < toks.size() && toks[i] != "<SEP>") prop.tokens.push_back(toks[i++]);
    if (prop.tokens.empty()) throw MalformedLine(lineno, "empty proposition");
    ex.sources.push_back(std::move(prop));
    if (i < toks.size()) ++i;  // skip <SEP>; a trailing <SEP> is malformed
    else break;
    if (i == toks.size()) throw MalformedLine(lineno, "trailing <SEP>");
  }
  if (ex.sources.empty()) throw MalformedLine(lineno, "no source propositions");
  return ex;
}

inline void write_parallel(const std::string& path_prefix, const std::vector<Example>& examples,
                           bool include_f5 = true) {
  std::ofstream src(path_prefix + ".src"), tgt(path_prefix + ".tgt");
  if (!src || !tgt) throw IoError("cannot write " + path_prefix + ".{src,tgt}");
  bool any_meta = std::any_of(examples.begin(), examples.end(),
                              [](const Example& e) { return e.theorem_id.has_value(); });
  std::ofstream meta;
  if (any_meta) {
    meta.open(path_prefix + ".meta");
    if (!meta) throw IoError("cannot write " + path_prefix + ".meta");
  }
  for (const auto& ex : examples) {
    src << join_tokens(assemble_flat(ex, include_f5).tokens) << '\n';
    tgt << join_tokens(ex.target) << '\n';
    if (any_meta) meta << ex.theorem_id.value_or("") << '\n';
  }
}

inline std::vector<Example> read_parallel(const std::string& path_prefix) {
  std::ifstream src(path_prefix + ".src"), tgt(path_prefix + ".tgt");
  if (!src) throw IoError("cannot read " + path_prefix + ".src");
  if (!tgt) throw IoError("cannot read " + path_prefix + ".tgt");
  std::ifstream meta(path_prefix + ".meta");

  std::vector<Example> examples;
  std::string src_line, tgt_line, meta_line;
  std::size_t lineno = 0;
  while (std::getline(src, src_line)) {
    ++lineno;
    if (!std::getline(tgt, tgt_line)) {
      std::size_t extra = 1;
      while (std::getline(src, src_line)) ++extra;
      throw LineCountMismatch(lineno - 1 + extra, lineno - 1);
    }
    Example ex = parse_src_line(split_tokens(src_line), lineno);
    ex.target = split_tokens(tgt_line);
    if (ex.target.empty()) throw MalformedLine(lineno, "empty target");
    if (meta.is_open() && std::getline(meta, meta_line) && !meta_line.empty())
      ex.theorem_id = meta_line;
    examples.push_back(std::move(ex));
  }
  std::size_t tgt_extra = 0;
  while (std::getline(tgt, tgt_line)) ++tgt_extra;
  if (tgt_extra) throw LineCountMismatch(lineno, lineno + tgt_extra);
  return examples;
}

}  // namespace isarforge
