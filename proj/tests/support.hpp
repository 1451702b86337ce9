#pragma once

// Shared test helpers: a seeded random term generator used as the round-trip
// oracle, plus small utilities.

#include <random>
#include <string>
#include <vector>

#include "isarforge/term.hpp"

namespace isarforge::testing {

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) { return rng() % n; }

/// Random term with bounded depth. `binders` counts enclosing ABS nodes so
/// generated BOUND indices can be chosen valid or deliberately escaping.
inline TermPtr random_term(std::mt19937_64& rng, std::size_t max_depth,
                           std::size_t binders = 0) {
  bool leaf = max_depth == 0 || pick(rng, 3) == 0;
  if (leaf) {
    switch (pick(rng, 4)) {
      case 0: return Term::constant("c" + std::to_string(pick(rng, 20)));
      case 1: return Term::free("f" + std::to_string(pick(rng, 20)));
      case 2: return Term::var("v" + std::to_string(pick(rng, 20)));
      default:
        // Occasionally escapes its binders; the grammar allows open fragments.
        return Term::bound(pick(rng, binders + 2));
    }
  }
  if (pick(rng, 3) == 0) return Term::abs(random_term(rng, max_depth - 1, binders + 1));
  return Term::app(random_term(rng, max_depth - 1, binders),
                   random_term(rng, max_depth - 1, binders));
}

}  // namespace isarforge::testing
