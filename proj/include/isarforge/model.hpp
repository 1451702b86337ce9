#pragma once

// Flat transformer baseline and the hierarchical transformer (HAT).
//
// Both share one encoder stack. The flat model feeds the tagged, <SEP>-joined
// sequence as a single block with continuous positions. The HAT feeds one
// block per proposition: local layers (the first `local_layers` of the stack)
// attend within blocks via a block-diagonal mask, global layers attend across
// the concatenation, token positions restart at 1 per proposition, and an
// optional learned category embedding is added at the input. No positional
// information distinguishes the propositions themselves.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "isarforge/corpus.hpp"
#include "isarforge/nn.hpp"
#include "isarforge/tape.hpp"
#include "isarforge/vocab.hpp"

namespace isarforge {

enum class Arch { Flat, Hat };

inline Arch arch_from_name(const std::string& name) {
  if (name == "flat") return Arch::Flat;
  if (name == "hat") return Arch::Hat;
  throw ConfigError("unknown arch: " + name);
}

inline const char* arch_name(Arch a) { return a == Arch::Flat ? "flat" : "hat"; }

struct ModelConfig {
  Arch arch = Arch::Hat;
  std::size_t model_dim = 512;
  std::size_t ffn_dim = 2048;
  std::size_t heads = 8;
  std::size_t enc_layers = 6;     // flat
  std::size_t local_layers = 4;   // hat
  std::size_t global_layers = 2;  // hat
  std::size_t dec_layers = 6;
  double dropout = 0.1;
  std::size_t vocab_size = 0;
  bool share_embeddings = true;
  bool use_category_embedding = true;
  std::size_t max_positions = 1024;
  double ln_eps = 1e-6;

  std::size_t encoder_depth() const {
    return arch == Arch::Flat ? enc_layers : local_layers + global_layers;
  }

  void validate() const {
    if (model_dim % heads != 0) throw HeadsMismatch(model_dim, heads);
    if (vocab_size == 0) throw ConfigError("vocab_size must be set");
  }
};

/// Token-id view of one example's encoder input: one block per proposition
/// (the flat model uses a single block holding the tagged flat sequence).
struct ModelInput {
  std::vector<std::vector<int>> blocks;
  std::vector<Category> categories;  // parallel to blocks; ignored by flat

  std::size_t total_len() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.size();
    return n;
  }
  std::vector<std::size_t> block_lens() const {
    std::vector<std::size_t> lens;
    for (const auto& b : blocks) lens.push_back(b.size());
    return lens;
  }
};

inline ModelInput make_model_input(const Example& example, const Vocabulary& vocab, Arch arch,
                                   bool include_f5) {
  ModelInput input;
  if (arch == Arch::Flat) {
    input.blocks.push_back(vocab.encode(assemble_flat(example, include_f5).tokens));
    input.categories.push_back(Category::F2_USED_LOCAL);
  } else {
    HierInput hier = assemble_hier(example, include_f5);
    for (const auto& prop : hier.propositions) {
      input.blocks.push_back(vocab.encode(prop.tokens));
      input.categories.push_back(prop.category);
    }
  }
  if (input.blocks.empty() || input.total_len() == 0) throw EmptyInput();
  return input;
}

/// Encoder self-attention weights captured layer by layer (heads within).
template <class T>
struct AttentionTrace {
  std::vector<AttentionCapture<T>> encoder_layers;
};

template <class T>
class Model {
 public:
  using Var = typename Tape<T>::Var;

  Model(ModelConfig config, std::uint64_t seed) : cfg_(config) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    token_emb_ = Parameter<T>(
        "token_emb", gaussian<T>(cfg_.vocab_size, cfg_.model_dim,
                                 T(1) / std::sqrt(T(cfg_.model_dim)), rng));
    if (has_category_embedding())
      category_emb_ = Parameter<T>(
          "category_emb", gaussian<T>(5, cfg_.model_dim,
                                      T(1) / std::sqrt(T(cfg_.model_dim)), rng));
    if (!cfg_.share_embeddings)
      out_proj_ = Parameter<T>(
          "out_proj", gaussian<T>(cfg_.vocab_size, cfg_.model_dim,
                                  T(1) / std::sqrt(T(cfg_.model_dim)), rng));
    for (std::size_t l = 0; l < cfg_.encoder_depth(); ++l)
      enc_layers_.emplace_back("enc." + std::to_string(l), cfg_.model_dim, cfg_.ffn_dim, rng);
    for (std::size_t l = 0; l < cfg_.dec_layers; ++l)
      dec_layers_.emplace_back("dec." + std::to_string(l), cfg_.model_dim, cfg_.ffn_dim, rng);
    enc_final_ln_ = LayerNormParams<T>("enc.final_ln", cfg_.model_dim);
    dec_final_ln_ = LayerNormParams<T>("dec.final_ln", cfg_.model_dim);
    positions_ = sinusoidal_positions<T>(cfg_.max_positions + 1, cfg_.model_dim);
  }

  const ModelConfig& config() const { return cfg_; }
  bool has_category_embedding() const {
    return cfg_.arch == Arch::Hat && cfg_.use_category_embedding;
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    out.push_back(&token_emb_);
    if (has_category_embedding()) out.push_back(&category_emb_);
    if (!cfg_.share_embeddings) out.push_back(&out_proj_);
    for (auto& l : enc_layers_) l.collect(out);
    for (auto& l : dec_layers_) l.collect(out);
    enc_final_ln_.collect(out);
    dec_final_ln_.collect(out);
    return out;
  }

  std::size_t param_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->value.numel();
    return n;
  }

  void zero_grads() {
    for (auto* p : parameters()) p->zero_grad();
  }

  /// Token embedding (scaled by sqrt(dim)) + per-block restarting positions
  /// (+ category embedding for HAT).
  Var embed_input(Tape<T>& tape, const ModelInput& input) {
    std::vector<int> flat_ids;
    std::vector<int> cat_ids;
    NDArray<T> pos(input.total_len(), cfg_.model_dim);
    std::size_t row = 0;
    for (std::size_t b = 0; b < input.blocks.size(); ++b) {
      for (std::size_t i = 0; i < input.blocks[b].size(); ++i) {
        flat_ids.push_back(input.blocks[b][i]);
        cat_ids.push_back(static_cast<int>(input.categories[b]) - 1);
        std::size_t p = std::min(i + 1, cfg_.max_positions);  // positions are 1-based
        for (std::size_t c = 0; c < cfg_.model_dim; ++c) pos.at(row, c) = positions_.at(p, c);
        ++row;
      }
    }
    Var x = tape.embedding_lookup(tape.param(token_emb_), flat_ids);
    x = tape.scale(x, std::sqrt(T(cfg_.model_dim)));
    if (has_category_embedding())
      x = tape.add(x, tape.embedding_lookup(tape.param(category_emb_), cat_ids));
    return tape.add_const(x, pos);
  }

  Var encode(Tape<T>& tape, const ModelInput& input, const ForwardMode& mode,
             AttentionTrace<T>* trace = nullptr) {
    Var x = embed_input(tape, input);
    std::size_t len = input.total_len();
    NDArray<T> local_mask = cfg_.arch == Arch::Hat && input.blocks.size() > 1
                                ? block_diagonal_mask<T>(input.block_lens())
                                : no_mask<T>(len, len);
    NDArray<T> full = no_mask<T>(len, len);
    std::size_t local = cfg_.arch == Arch::Hat ? cfg_.local_layers : cfg_.encoder_depth();
    for (std::size_t l = 0; l < enc_layers_.size(); ++l) {
      AttentionCapture<T>* capture = nullptr;
      if (trace) {
        trace->encoder_layers.emplace_back();
        capture = &trace->encoder_layers.back();
      }
      x = enc_layers_[l].apply(tape, x, l < local ? local_mask : full, cfg_.heads,
                               T(cfg_.dropout), T(cfg_.ln_eps), mode, capture);
    }
    return enc_final_ln_.apply(tape, x, T(cfg_.ln_eps));
  }

  /// Logits over the vocabulary for every position of the <BOS>-prefixed
  /// target prefix; causal self-attention, full cross-attention.
  Var decode_logits(Tape<T>& tape, Var enc_states, const std::vector<int>& prefix_ids,
                    const ForwardMode& mode) {
    if (prefix_ids.empty()) throw EmptyInput();
    std::size_t len = prefix_ids.size();
    NDArray<T> pos(len, cfg_.model_dim);
    for (std::size_t i = 0; i < len; ++i) {
      std::size_t p = std::min(i + 1, cfg_.max_positions);
      for (std::size_t c = 0; c < cfg_.model_dim; ++c) pos.at(i, c) = positions_.at(p, c);
    }
    Var x = tape.embedding_lookup(tape.param(token_emb_), prefix_ids);
    x = tape.scale(x, std::sqrt(T(cfg_.model_dim)));
    x = tape.add_const(x, pos);
    NDArray<T> self_mask = causal_mask<T>(len);
    NDArray<T> cross_mask = no_mask<T>(len, tape.value(enc_states).rows());
    for (auto& layer : dec_layers_)
      x = layer.apply(tape, x, enc_states, self_mask, cross_mask, cfg_.heads, T(cfg_.dropout),
                      T(cfg_.ln_eps), mode);
    x = dec_final_ln_.apply(tape, x, T(cfg_.ln_eps));
    Var proj = cfg_.share_embeddings ? tape.param(token_emb_) : tape.param(out_proj_);
    return tape.matmul_nt(x, proj);
  }

  /// Teacher-forced label-smoothed loss for one example.
  Var forward_loss(Tape<T>& tape, const ModelInput& input, const std::vector<int>& target_ids,
                   T label_smoothing, const ForwardMode& mode) {
    Var enc = encode(tape, input, mode);
    std::vector<int> prefix{kBosId};
    prefix.insert(prefix.end(), target_ids.begin(), target_ids.end());
    std::vector<int> labels = target_ids;
    labels.push_back(kEosId);
    Var logits = decode_logits(tape, enc, prefix, mode);
    return tape.cross_entropy_label_smoothed(logits, labels, label_smoothing, kPadId);
  }

  const Parameter<T>& token_embedding() const { return token_emb_; }
  Parameter<T>& token_embedding() { return token_emb_; }
  const Parameter<T>& category_embedding() const { return category_emb_; }

 private:
  ModelConfig cfg_;
  Parameter<T> token_emb_;
  Parameter<T> category_emb_;
  Parameter<T> out_proj_;
  std::vector<EncoderLayer<T>> enc_layers_;
  std::vector<DecoderLayer<T>> dec_layers_;
  LayerNormParams<T> enc_final_ln_;
  LayerNormParams<T> dec_final_ln_;
  NDArray<T> positions_;
};

}  // namespace isarforge
