#pragma once

// Seeded synthetic corpus generator for desk-scale experiments.
//
// Profiles:
//   subset_chain — F3: x ∈ B, F4: {A ⊆ B plus distractor subset facts};
//                  target: x ∈ A. Free-variable names come from disjoint
//                  train/held-out pools (they normalize to <Xk> downstream).
//   antisym      — F3: f = g with constant operands; the pair {f ≤ g, g ≤ f}
//                  is split between F2 and F4 by a coin flip and the target is
//                  the operand swap of the F2 proposition (= the F4 content).
//                  The two category assignments produce the same token
//                  multiset but different targets, so the profile is
//                  unsolvable without category information.
//   mixed        — 50/50 blend of the two.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "isarforge/corpus.hpp"
#include "isarforge/term.hpp"

namespace isarforge {

enum class SyntheticProfile { SubsetChain, Antisym, Mixed };

inline SyntheticProfile synthetic_profile_from_name(const std::string& name) {
  if (name == "subset_chain") return SyntheticProfile::SubsetChain;
  if (name == "antisym") return SyntheticProfile::Antisym;
  if (name == "mixed") return SyntheticProfile::Mixed;
  throw ConfigError("unknown synthetic profile: " + name);
}

namespace synth_detail {

inline constexpr const char* kTrueprop = "HOL.Trueprop";
inline constexpr const char* kMember = "Set.member";
inline constexpr const char* kSubset = "Set.subset_eq";
inline constexpr const char* kLessEq = "Orderings.ord_class.less_eq";
inline constexpr const char* kEq = "HOL.eq";

// Portable replacement for uniform_int_distribution (fixed across stdlibs).
inline std::size_t rand_below(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

inline TermPtr prop(const char* relation, TermPtr lhs, TermPtr rhs) {
  return Term::app(Term::constant(kTrueprop),
                   Term::app(Term::app(Term::constant(relation), std::move(lhs)),
                             std::move(rhs)));
}

struct NamePools {
  // Free-variable pools are disjoint between training and held-out data so a
  // held-out name never occurs in training. The small constant pool is shared:
  // constants are never renamed by normalization and must stay in-vocabulary.
  std::size_t free_lo, free_hi;

  static NamePools train() { return {0, 400}; }
  static NamePools heldout() { return {400, 500}; }

  std::string element(std::mt19937_64& rng) const {
    return "m" + std::to_string(free_lo + rand_below(rng, free_hi - free_lo));
  }
  std::string set(std::mt19937_64& rng) const {
    return "s" + std::to_string(free_lo + rand_below(rng, free_hi - free_lo));
  }
  static std::string constant(std::mt19937_64& rng) {
    return "Syn.c" + std::to_string(rand_below(rng, 40));
  }
};

inline Example subset_chain_example(std::mt19937_64& rng, const NamePools& pools) {
  std::string elem = pools.element(rng);
  // Distinct set names: goal set, key set, distractor material.
  std::vector<std::string> sets;
  while (sets.size() < 6) {
    std::string s = pools.set(rng);
    if (std::find(sets.begin(), sets.end(), s) == sets.end()) sets.push_back(s);
  }
  const std::string& goal_set = sets[0];
  const std::string& key_set = sets[1];

  Example ex;
  ex.sources.push_back(
      {serialize(prop(kMember, Term::free(elem), Term::free(goal_set))), Category::F3_CONQ});

  std::vector<SourceProposition> facts;
  facts.push_back(
      {serialize(prop(kSubset, Term::free(key_set), Term::free(goal_set))), Category::F4_USED_OTHER});
  std::size_t n_distractors = 1 + rand_below(rng, 3);
  for (std::size_t d = 0; d < n_distractors; ++d) {
    // Distractor subset facts never point at the goal set.
    const std::string& lhs = sets[2 + rand_below(rng, 4)];
    const std::string& rhs = sets[2 + rand_below(rng, 4)];
    facts.push_back(
        {serialize(prop(kSubset, Term::free(lhs), Term::free(rhs))), Category::F4_USED_OTHER});
  }
  for (std::size_t i = facts.size(); i > 1; --i)
    std::swap(facts[i - 1], facts[rand_below(rng, i)]);
  for (auto& f : facts) ex.sources.push_back(std::move(f));

  ex.target = serialize(prop(kMember, Term::free(elem), Term::free(key_set)));
  return ex;
}

inline Example antisym_example(std::mt19937_64& rng) {
  std::string f = NamePools::constant(rng);
  std::string g;
  do {
    g = NamePools::constant(rng);
  } while (g == f);

  // Which inequality is the used-local (F2) proposition is the only thing
  // distinguishing the two possible targets.
  bool forward = rand_below(rng, 2) == 0;
  const std::string& u = forward ? f : g;
  const std::string& v = forward ? g : f;

  Example ex;
  ex.sources.push_back(
      {serialize(prop(kLessEq, Term::constant(u), Term::constant(v))), Category::F2_USED_LOCAL});
  // F3's operand order is canonical so it leaks nothing about the coin flip.
  const std::string& lo = std::min(f, g);
  const std::string& hi = std::max(f, g);
  ex.sources.push_back(
      {serialize(prop(kEq, Term::constant(lo), Term::constant(hi))), Category::F3_CONQ});
  ex.sources.push_back(
      {serialize(prop(kLessEq, Term::constant(v), Term::constant(u))), Category::F4_USED_OTHER});

  ex.target = serialize(prop(kLessEq, Term::constant(v), Term::constant(u)));
  return ex;
}

}  // namespace synth_detail

inline std::vector<Example> generate_synthetic(std::uint64_t seed, std::size_t n,
                                               SyntheticProfile profile,
                                               bool heldout_pool = false) {
  if (n < 1) throw ConfigError("generate_synthetic: n must be >= 1");
  std::mt19937_64 rng(seed);
  auto pools =
      heldout_pool ? synth_detail::NamePools::heldout() : synth_detail::NamePools::train();
  std::vector<Example> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    SyntheticProfile p = profile;
    if (p == SyntheticProfile::Mixed)
      p = synth_detail::rand_below(rng, 2) == 0 ? SyntheticProfile::SubsetChain
                                                : SyntheticProfile::Antisym;
    Example ex = p == SyntheticProfile::SubsetChain
                     ? synth_detail::subset_chain_example(rng, pools)
                     : synth_detail::antisym_example(rng);
    ex.theorem_id = std::string(heldout_pool ? "synH:" : "syn:") + std::to_string(k);
    out.push_back(std::move(ex));
  }
  return out;
}

/// Independent re-derivation of the unique target a profile template dictates,
/// used as an oracle over generated corpora.
inline TokenSeq rederive_synthetic_target(const Example& ex) {
  using namespace synth_detail;
  const SourceProposition* f3 = nullptr;
  for (const auto& s : ex.sources)
    if (s.category == Category::F3_CONQ) f3 = &s;
  if (!f3) throw Error("synthetic example lacks an F3 source");
  TermPtr goal = parse_tokens(f3->tokens);
  // goal = Trueprop $ (rel $ a $ b)
  const Term& rel_app = *goal->arg;          // rel $ a $ b
  const Term& rel = *rel_app.child->child;   // rel
  if (rel.name == kMember) {
    const Term& goal_set = *rel_app.arg;
    for (const auto& s : ex.sources) {
      if (s.category != Category::F4_USED_OTHER) continue;
      TermPtr fact = parse_tokens(s.tokens);
      if (fact->arg->child->child->name != kSubset) continue;
      if (term_equal(*fact->arg->arg, goal_set))
        return serialize(prop(kMember, rel_app.child->arg, fact->arg->child->arg));
    }
    throw Error("subset_chain example lacks its key fact");
  }
  if (rel.name == kEq) {
    for (const auto& s : ex.sources) {
      if (s.category != Category::F2_USED_LOCAL) continue;
      TermPtr le = parse_tokens(s.tokens);
      return serialize(prop(kLessEq, le->arg->arg, le->arg->child->arg));
    }
    throw Error("antisym example lacks its F2 inequality");
  }
  throw Error("unrecognized synthetic template");
}

}  // namespace isarforge
