#pragma once

// Multi-head attention and pre-norm transformer blocks on top of the tape.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "isarforge/tape.hpp"
#include "isarforge/tensor.hpp"

namespace isarforge {

template <class T>
NDArray<T> no_mask(std::size_t q_len, std::size_t k_len) {
  return NDArray<T>(q_len, k_len);
}

/// Additive mask forbidding attention to future positions.
template <class T>
NDArray<T> causal_mask(std::size_t len) {
  NDArray<T> m(len, len);
  for (std::size_t r = 0; r < len; ++r)
    for (std::size_t c = r + 1; c < len; ++c)
      m.at(r, c) = -std::numeric_limits<T>::infinity();
  return m;
}

/// Additive mask restricting attention to within-proposition blocks.
template <class T>
NDArray<T> block_diagonal_mask(const std::vector<std::size_t>& prop_lens) {
  std::size_t total = 0;
  for (std::size_t l : prop_lens) total += l;
  NDArray<T> m(total, total);
  for (auto& v : m.data) v = -std::numeric_limits<T>::infinity();
  std::size_t off = 0;
  for (std::size_t l : prop_lens) {
    for (std::size_t r = 0; r < l; ++r)
      for (std::size_t c = 0; c < l; ++c) m.at(off + r, off + c) = T(0);
    off += l;
  }
  return m;
}

template <class T>
struct MhaParams {
  Parameter<T> wq, wk, wv, wo;

  MhaParams() = default;
  MhaParams(const std::string& prefix, std::size_t dim, std::mt19937_64& rng)
      : wq(prefix + ".wq", xavier_uniform<T>(dim, dim, rng)),
        wk(prefix + ".wk", xavier_uniform<T>(dim, dim, rng)),
        wv(prefix + ".wv", xavier_uniform<T>(dim, dim, rng)),
        wo(prefix + ".wo", xavier_uniform<T>(dim, dim, rng)) {}

  void collect(std::vector<Parameter<T>*>& out) {
    for (auto* p : {&wq, &wk, &wv, &wo}) out.push_back(p);
  }
};

/// Per-head attention weight matrices captured during a forward pass.
template <class T>
struct AttentionCapture {
  std::vector<NDArray<T>> heads;
};

template <class T>
typename Tape<T>::Var multi_head_attention(Tape<T>& tape, typename Tape<T>::Var q_in,
                                           typename Tape<T>::Var k_in,
                                           typename Tape<T>::Var v_in, MhaParams<T>& p,
                                           std::size_t heads, const NDArray<T>& mask,
                                           AttentionCapture<T>* capture = nullptr) {
  using Var = typename Tape<T>::Var;
  std::size_t dim = p.wq.value.cols();
  if (dim % heads != 0) throw HeadsMismatch(dim, heads);
  std::size_t head_dim = dim / heads;
  T scaling = T(1) / std::sqrt(T(head_dim));

  Var q = tape.matmul(q_in, tape.param(p.wq));
  Var k = tape.matmul(k_in, tape.param(p.wk));
  Var v = tape.matmul(v_in, tape.param(p.wv));

  std::vector<Var> head_outs;
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = tape.slice_cols(q, h * head_dim, (h + 1) * head_dim);
    Var kh = tape.slice_cols(k, h * head_dim, (h + 1) * head_dim);
    Var vh = tape.slice_cols(v, h * head_dim, (h + 1) * head_dim);
    Var scores = tape.scale(tape.matmul_nt(qh, kh), scaling);
    scores = tape.add_const(scores, mask);
    Var weights = tape.softmax(scores);
    if (capture) capture->heads.push_back(tape.value(weights));
    head_outs.push_back(tape.matmul(weights, vh));
  }
  Var concat = heads == 1 ? head_outs[0] : tape.concat_cols(head_outs);
  return tape.matmul(concat, tape.param(p.wo));
}

template <class T>
struct LayerNormParams {
  Parameter<T> gain, bias;

  LayerNormParams() = default;
  LayerNormParams(const std::string& prefix, std::size_t dim) {
    NDArray<T> ones(std::size_t(1), dim);
    for (auto& v : ones.data) v = T(1);
    gain = Parameter<T>(prefix + ".gain", ones);
    bias = Parameter<T>(prefix + ".bias", NDArray<T>(std::size_t(1), dim));
  }

  typename Tape<T>::Var apply(Tape<T>& tape, typename Tape<T>::Var x, T eps) {
    return tape.layer_norm(x, tape.param(gain), tape.param(bias), eps);
  }

  void collect(std::vector<Parameter<T>*>& out) {
    out.push_back(&gain);
    out.push_back(&bias);
  }
};

template <class T>
struct FfnParams {
  Parameter<T> w1, b1, w2, b2;

  FfnParams() = default;
  FfnParams(const std::string& prefix, std::size_t dim, std::size_t ffn_dim,
            std::mt19937_64& rng)
      : w1(prefix + ".w1", xavier_uniform<T>(dim, ffn_dim, rng)),
        b1(prefix + ".b1", NDArray<T>(std::size_t(1), ffn_dim)),
        w2(prefix + ".w2", xavier_uniform<T>(ffn_dim, dim, rng)),
        b2(prefix + ".b2", NDArray<T>(std::size_t(1), dim)) {}

  typename Tape<T>::Var apply(Tape<T>& tape, typename Tape<T>::Var x) {
    auto h = tape.relu(tape.add(tape.matmul(x, tape.param(w1)), tape.param(b1)));
    return tape.add(tape.matmul(h, tape.param(w2)), tape.param(b2));
  }

  void collect(std::vector<Parameter<T>*>& out) {
    for (auto* p : {&w1, &b1, &w2, &b2}) out.push_back(p);
  }
};

struct ForwardMode {
  bool training = false;
  std::mt19937_64* rng = nullptr;

  std::mt19937_64& rng_ref() const {
    static std::mt19937_64 unused;
    return rng ? *rng : unused;
  }
};

template <class T>
struct EncoderLayer {
  MhaParams<T> attn;
  FfnParams<T> ffn;
  LayerNormParams<T> ln1, ln2;

  EncoderLayer() = default;
  EncoderLayer(const std::string& prefix, std::size_t dim, std::size_t ffn_dim,
               std::mt19937_64& rng)
      : attn(prefix + ".attn", dim, rng),
        ffn(prefix + ".ffn", dim, ffn_dim, rng),
        ln1(prefix + ".ln1", dim),
        ln2(prefix + ".ln2", dim) {}

  typename Tape<T>::Var apply(Tape<T>& tape, typename Tape<T>::Var x, const NDArray<T>& mask,
                              std::size_t heads, T dropout_rate, T ln_eps,
                              const ForwardMode& mode, AttentionCapture<T>* capture) {
    auto normed = ln1.apply(tape, x, ln_eps);
    auto a = multi_head_attention(tape, normed, normed, normed, attn, heads, mask, capture);
    x = tape.add(x, tape.dropout(a, dropout_rate, mode.rng_ref(), mode.training));
    auto f = ffn.apply(tape, ln2.apply(tape, x, ln_eps));
    return tape.add(x, tape.dropout(f, dropout_rate, mode.rng_ref(), mode.training));
  }

  void collect(std::vector<Parameter<T>*>& out) {
    attn.collect(out);
    ffn.collect(out);
    ln1.collect(out);
    ln2.collect(out);
  }
};

template <class T>
struct DecoderLayer {
  MhaParams<T> self_attn, cross_attn;
  FfnParams<T> ffn;
  LayerNormParams<T> ln1, ln2, ln3;

  DecoderLayer() = default;
  DecoderLayer(const std::string& prefix, std::size_t dim, std::size_t ffn_dim,
               std::mt19937_64& rng)
      : self_attn(prefix + ".self_attn", dim, rng),
        cross_attn(prefix + ".cross_attn", dim, rng),
        ffn(prefix + ".ffn", dim, ffn_dim, rng),
        ln1(prefix + ".ln1", dim),
        ln2(prefix + ".ln2", dim),
        ln3(prefix + ".ln3", dim) {}

  typename Tape<T>::Var apply(Tape<T>& tape, typename Tape<T>::Var x,
                              typename Tape<T>::Var enc_states, const NDArray<T>& self_mask,
                              const NDArray<T>& cross_mask, std::size_t heads, T dropout_rate,
                              T ln_eps, const ForwardMode& mode) {
    auto normed = ln1.apply(tape, x, ln_eps);
    auto a = multi_head_attention(tape, normed, normed, normed, self_attn, heads, self_mask);
    x = tape.add(x, tape.dropout(a, dropout_rate, mode.rng_ref(), mode.training));
    auto q = ln2.apply(tape, x, ln_eps);
    auto c = multi_head_attention(tape, q, enc_states, enc_states, cross_attn, heads, cross_mask);
    x = tape.add(x, tape.dropout(c, dropout_rate, mode.rng_ref(), mode.training));
    auto f = ffn.apply(tape, ln3.apply(tape, x, ln_eps));
    return tape.add(x, tape.dropout(f, dropout_rate, mode.rng_ref(), mode.training));
  }

  void collect(std::vector<Parameter<T>*>& out) {
    self_attn.collect(out);
    cross_attn.collect(out);
    ffn.collect(out);
    ln1.collect(out);
    ln2.collect(out);
    ln3.collect(out);
  }
};

}  // namespace isarforge
