#pragma once

// Free-variable normalization (FREE -> <Xk>, VAR -> <Vk> by first occurrence in
// a leftmost depth-first traversal), the length filter, and held-out leakage
// removal for training sets.

#include <functional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "isarforge/corpus.hpp"
#include "isarforge/term.hpp"

namespace isarforge {

/// Naming state shared across propositions when normalizing per example.
struct RenameScope {
  std::unordered_map<std::string, std::string> frees;
  std::unordered_map<std::string, std::string> vars;

  const std::string& free_name(const std::string& original) {
    auto it = frees.find(original);
    if (it == frees.end())
      it = frees.emplace(original, "<X" + std::to_string(frees.size()) + ">").first;
    return it->second;
  }
  const std::string& var_name(const std::string& original) {
    auto it = vars.find(original);
    if (it == vars.end())
      it = vars.emplace(original, "<V" + std::to_string(vars.size()) + ">").first;
    return it->second;
  }
};

inline TermPtr normalize_frees(const TermPtr& term, RenameScope& scope) {
  switch (term->kind) {
    case TermKind::Const:
    case TermKind::Bound:
      return term;
    case TermKind::Free:
      return Term::free(scope.free_name(term->name));
    case TermKind::Var:
      return Term::var(scope.var_name(term->name));
    case TermKind::Abs:
      return Term::abs(normalize_frees(term->child, scope));
    case TermKind::App: {
      // Function before argument, matching the traversal's "first occurrence".
      TermPtr fun = normalize_frees(term->child, scope);
      TermPtr arg = normalize_frees(term->arg, scope);
      return Term::app(std::move(fun), std::move(arg));
    }
  }
  return term;
}

inline TermPtr normalize_frees(const TermPtr& term) {
  RenameScope scope;
  return normalize_frees(term, scope);
}

enum class NormalizeScope { PerProposition, PerExample };

/// Normalizes every proposition of an example. PerExample shares one renaming
/// scope across the sources (in canonical assembled order) and the target;
/// PerProposition starts fresh for each proposition and for the target.
inline Example normalize_example(const Example& example, NormalizeScope scope_kind) {
  Example out = example;
  RenameScope shared;
  auto normalize_tokens = [&](const TokenSeq& toks) {
    RenameScope local;
    RenameScope& scope = scope_kind == NormalizeScope::PerExample ? shared : local;
    return serialize(normalize_frees(parse_tokens(toks), scope));
  };
  // Canonical assembled order fixes the shared numbering.
  std::vector<std::size_t> order;
  for (Category c : {Category::F2_USED_LOCAL, Category::F3_CONQ, Category::F4_USED_OTHER,
                     Category::F5_LEMMAS})
    for (std::size_t i = 0; i < example.sources.size(); ++i)
      if (example.sources[i].category == c) order.push_back(i);
  for (std::size_t i : order) out.sources[i].tokens = normalize_tokens(example.sources[i].tokens);
  out.target = normalize_tokens(example.target);
  return out;
}

/// src length counted on the flat assembly, target on the raw sequence.
inline bool example_passes_length_filter(std::size_t src_concat_len, std::size_t tgt_len) {
  return src_concat_len <= 800 && tgt_len <= 200;
}

struct CleanStats {
  std::size_t duplicates = 0;
  std::size_t heldout_target_overlap = 0;
  std::size_t heldout_theorem_overlap = 0;
  std::size_t missing_theorem_id = 0;  // examples where the theorem rule was skipped
};

/// Removes exact duplicates, examples whose target appears in the held-out
/// set, and examples sharing a theorem id with a held-out example. Survivor
/// order is preserved. Examples without theorem ids skip the theorem rule.
inline std::vector<Example> clean_training_set(const std::vector<Example>& train,
                                               const std::vector<Example>& heldout,
                                               CleanStats* stats = nullptr,
                                               std::function<void(const std::string&)> warn = {}) {
  std::unordered_set<std::string> heldout_targets;
  std::unordered_set<std::string> heldout_theorems;
  for (const auto& ex : heldout) {
    heldout_targets.insert(join_tokens(ex.target));
    if (ex.theorem_id) heldout_theorems.insert(*ex.theorem_id);
  }

  CleanStats local_stats;
  CleanStats& st = stats ? *stats : local_stats;
  std::unordered_set<std::string> seen;
  std::vector<Example> survivors;
  for (const auto& ex : train) {
    std::string key = join_tokens(assemble_flat(ex, true).tokens) + "\t" + join_tokens(ex.target);
    if (!seen.insert(key).second) {
      ++st.duplicates;
      continue;
    }
    if (heldout_targets.count(join_tokens(ex.target))) {
      ++st.heldout_target_overlap;
      continue;
    }
    if (ex.theorem_id) {
      if (heldout_theorems.count(*ex.theorem_id)) {
        ++st.heldout_theorem_overlap;
        continue;
      }
    } else {
      ++st.missing_theorem_id;
      if (warn) warn("example without theorem id: same-theorem rule skipped");
    }
    survivors.push_back(ex);
  }
  return survivors;
}

}  // namespace isarforge
