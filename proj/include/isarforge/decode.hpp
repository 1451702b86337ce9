#pragma once

// Beam search over the decoder with length-normalized scoring
// lp(n) = ((5 + n) / 6)^alpha. Deterministic: candidate ties break toward the
// lower token id, then the lower parent beam index.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "isarforge/model.hpp"

namespace isarforge {

struct Hypothesis {
  std::vector<int> ids;  // generated tokens, <EOS>-terminated when complete
  double log_prob = 0.0;
  double normalized_score = 0.0;
  bool complete = false;
};

struct DecodeOptions {
  std::size_t beam_size = 5;
  std::size_t max_len = 256;  // practical cap; data guarantees targets <= 200
  double length_alpha = 0.6;
};

inline double length_penalty(std::size_t n, double alpha) {
  return std::pow((5.0 + static_cast<double>(n)) / 6.0, alpha);
}

namespace detail {

template <class T>
std::vector<T> log_softmax_row(const NDArray<T>& m, std::size_t row) {
  std::size_t C = m.cols();
  T mx = m.at(row, 0);
  for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, m.at(row, c));
  T sum = T(0);
  for (std::size_t c = 0; c < C; ++c) sum += std::exp(m.at(row, c) - mx);
  T log_z = mx + std::log(sum);
  std::vector<T> out(C);
  for (std::size_t c = 0; c < C; ++c) out[c] = m.at(row, c) - log_z;
  return out;
}

}  // namespace detail

template <class T>
std::vector<Hypothesis> beam_search(Model<T>& model, const ModelInput& input,
                                    const DecodeOptions& opts) {
  if (opts.beam_size < 1 || opts.max_len < 1)
    throw ConfigError("beam_size and max_len must be >= 1");
  ForwardMode eval_mode;  // no dropout

  // Encode once; the states are reused as a constant across decode steps.
  NDArray<T> enc_states;
  {
    Tape<T> tape;
    enc_states = tape.value(model.encode(tape, input, eval_mode));
  }

  struct Partial {
    std::vector<int> prefix{kBosId};
    double log_prob = 0.0;
  };
  std::vector<Partial> active(1);
  std::vector<Hypothesis> completed;

  for (std::size_t step = 0; step < opts.max_len && !active.empty(); ++step) {
    struct Candidate {
      double score;
      int token;
      std::size_t parent;
    };
    std::vector<Candidate> candidates;
    for (std::size_t b = 0; b < active.size(); ++b) {
      Tape<T> tape;
      auto enc = tape.constant(enc_states);
      auto logits = model.decode_logits(tape, enc, active[b].prefix, eval_mode);
      auto logp = detail::log_softmax_row(tape.value(logits), active[b].prefix.size() - 1);
      for (std::size_t v = 0; v < logp.size(); ++v) {
        if (static_cast<int>(v) == kPadId || static_cast<int>(v) == kBosId) continue;
        double lp = static_cast<double>(logp[v]);
        // A numerically broken model (e.g. right after divergence) can emit
        // NaN logits; rank those last instead of corrupting the sort order.
        if (std::isnan(lp)) lp = -std::numeric_limits<double>::infinity();
        candidates.push_back({active[b].log_prob + lp, static_cast<int>(v), b});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.token != b.token) return a.token < b.token;
      return a.parent < b.parent;
    });

    // Route the top beam_size candidates: <EOS> finalizes, others stay active.
    std::vector<Partial> next;
    std::size_t taken = std::min<std::size_t>(opts.beam_size, candidates.size());
    for (std::size_t i = 0; i < taken; ++i) {
      const auto& cand = candidates[i];
      const Partial& parent = active[cand.parent];
      if (cand.token == kEosId) {
        Hypothesis hyp;
        hyp.ids.assign(parent.prefix.begin() + 1, parent.prefix.end());
        hyp.ids.push_back(kEosId);
        hyp.log_prob = cand.score;
        hyp.normalized_score = cand.score / length_penalty(hyp.ids.size(), opts.length_alpha);
        hyp.complete = true;
        completed.push_back(std::move(hyp));
      } else {
        Partial p = parent;
        p.prefix.push_back(cand.token);
        p.log_prob = cand.score;
        next.push_back(std::move(p));
      }
    }
    if (completed.size() >= opts.beam_size) break;
    active = std::move(next);
  }

  std::sort(completed.begin(), completed.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.normalized_score != b.normalized_score) return a.normalized_score > b.normalized_score;
    return a.ids < b.ids;
  });
  if (completed.size() > opts.beam_size) completed.resize(opts.beam_size);

  if (completed.empty()) {
    // Nothing reached <EOS> within max_len; hand back the best open prefix, flagged.
    Hypothesis best;
    best.log_prob = -std::numeric_limits<double>::infinity();
    for (const auto& p : active) {
      if (p.log_prob > best.log_prob) {
        best.ids.assign(p.prefix.begin() + 1, p.prefix.end());
        best.log_prob = p.log_prob;
      }
    }
    best.normalized_score = best.log_prob / length_penalty(best.ids.size(), opts.length_alpha);
    best.complete = false;
    return {best};
  }
  return completed;
}

/// Best hypothesis token strings, <EOS> stripped.
inline TokenSeq hypothesis_tokens(const Hypothesis& hyp, const Vocabulary& vocab) {
  TokenSeq out;
  for (int id : hyp.ids)
    if (id != kEosId) out.push_back(vocab.decode(id));
  return out;
}

}  // namespace isarforge
