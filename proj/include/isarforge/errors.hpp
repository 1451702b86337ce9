#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace isarforge {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- term parsing ---

struct SyntaxError : Error {
  SyntaxError(std::size_t position, std::string expected_what)
      : Error("syntax error at token " + std::to_string(position) + ": expected " +
              expected_what),
        position(position),
        expected(std::move(expected_what)) {}
  std::size_t position;
  std::string expected;
};

struct UnbalancedParens : Error {
  UnbalancedParens() : Error("unbalanced parentheses") {}
};

struct EmptyInput : Error {
  EmptyInput() : Error("empty input") {}
};

// --- corpus / vocabulary ---

struct EmptyCorpus : Error {
  EmptyCorpus() : Error("empty corpus") {}
};

struct LineCountMismatch : Error {
  LineCountMismatch(std::size_t src, std::size_t tgt)
      : Error("line count mismatch: " + std::to_string(src) + " source lines vs " +
              std::to_string(tgt) + " target lines") {}
};

struct MalformedLine : Error {
  explicit MalformedLine(std::size_t lineno, const std::string& what = "missing category tag")
      : Error("malformed line " + std::to_string(lineno) + ": " + what), lineno(lineno) {}
  std::size_t lineno;
};

struct UnknownToken : Error {
  explicit UnknownToken(const std::string& token) : Error("unknown token: " + token) {}
};

// --- numerics ---

struct ShapeMismatch : Error {
  ShapeMismatch(std::string expected, std::string got)
      : Error("shape mismatch: expected " + expected + ", got " + got) {}
};

struct HeadsMismatch : Error {
  HeadsMismatch(std::size_t dim, std::size_t heads)
      : Error("model dim " + std::to_string(dim) + " not divisible by " +
              std::to_string(heads) + " heads") {}
};

struct OddDim : Error {
  explicit OddDim(std::size_t dim)
      : Error("positional encoding needs an even dim, got " + std::to_string(dim)) {}
};

struct NonScalarLoss : Error {
  NonScalarLoss() : Error("backward requires a scalar loss node") {}
};

struct DivergenceDetected : Error {
  explicit DivergenceDetected(std::size_t step)
      : Error("loss became non-finite at step " + std::to_string(step)), step(step) {}
  std::size_t step;
};

struct LayerOutOfRange : Error {
  LayerOutOfRange(std::size_t layer, std::size_t count)
      : Error("layer " + std::to_string(layer) + " out of range (have " +
              std::to_string(count) + ")") {}
};

struct NoCompleteHypothesis : Error {
  NoCompleteHypothesis() : Error("no hypothesis reached <EOS> within max_len") {}
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace isarforge
