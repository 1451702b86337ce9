#pragma once

// Training loop: Adam with the inverse-square-root warmup schedule, token
// budget batching with length grouping, validation-BLEU checkpoint selection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "isarforge/decode.hpp"
#include "isarforge/eval.hpp"
#include "isarforge/model.hpp"

namespace isarforge {

struct TrainConfig {
  std::size_t steps = 100000;
  std::size_t warmup_steps = 4000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  double label_smoothing = 0.1;
  std::size_t tokens_per_batch = 4096;
  std::size_t train_src_len_cap = 512;  // applied at training only
  std::uint64_t seed = 1;
  std::size_t eval_every = 1000;
  double lr_scale = 1.0;
};

/// model_dim^-0.5 * min(step^-0.5, step * warmup^-1.5)
inline double lr_schedule(std::size_t step, std::size_t model_dim, std::size_t warmup) {
  double s = static_cast<double>(step);
  double w = static_cast<double>(warmup);
  return std::pow(static_cast<double>(model_dim), -0.5) *
         std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

template <class T>
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Parameter<T>*> params, double beta1, double beta2, double eps)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto* p : params_) {
      m_.emplace_back(p->value.shape);
      v_.emplace_back(p->value.shape);
    }
  }

  void step(double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      for (std::size_t j = 0; j < p.value.data.size(); ++j) {
        double g = static_cast<double>(p.grad.data[j]);
        double m = beta1_ * m_[i].data[j] + (1.0 - beta1_) * g;
        double v = beta2_ * v_[i].data[j] + (1.0 - beta2_) * g * g;
        m_[i].data[j] = m;
        v_[i].data[j] = v;
        p.value.data[j] -= static_cast<T>(lr * (m / bc1) / (std::sqrt(v / bc2) + eps_));
      }
    }
  }

 private:
  std::vector<Parameter<T>*> params_;
  std::vector<NDArray<double>> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct PreparedExample {
  ModelInput input;
  std::vector<int> target_ids;
  std::size_t flat_src_len = 0;  // tagged flat length, for the cap and buckets
};

inline PreparedExample prepare_example(const Example& example, const Vocabulary& vocab,
                                       Arch arch, bool include_f5) {
  PreparedExample prep;
  prep.input = make_model_input(example, vocab, arch, include_f5);
  prep.target_ids = vocab.encode(example.target);
  prep.flat_src_len = flat_source_length(example, include_f5);
  return prep;
}

using Batch = std::vector<std::size_t>;  // indices into the prepared pool

/// Groups length-sorted examples under a token budget (longest sequence in the
/// batch times batch size), then shuffles batch order. Training examples whose
/// flat source exceeds len_cap are dropped entirely.
inline std::vector<Batch> make_batches(const std::vector<PreparedExample>& pool,
                                       std::size_t tokens_per_batch, std::size_t len_cap,
                                       std::mt19937_64& rng) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool[i].flat_src_len <= len_cap) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    std::size_t la = pool[a].input.total_len() + pool[a].target_ids.size();
    std::size_t lb = pool[b].input.total_len() + pool[b].target_ids.size();
    return la < lb;
  });

  std::vector<Batch> batches;
  Batch current;
  std::size_t max_len = 0;
  for (std::size_t idx : order) {
    std::size_t len = pool[idx].input.total_len() + pool[idx].target_ids.size() + 2;
    std::size_t new_max = std::max(max_len, len);
    if (!current.empty() && new_max * (current.size() + 1) > tokens_per_batch) {
      batches.push_back(std::move(current));
      current.clear();
      new_max = len;
    }
    current.push_back(idx);
    max_len = new_max;
  }
  if (!current.empty()) batches.push_back(std::move(current));

  for (std::size_t i = batches.size(); i > 1; --i)
    std::swap(batches[i - 1], batches[rng() % i]);
  return batches;
}

/// Padding overhead if the batch were padded to its longest sequence.
inline double padding_fraction(const std::vector<PreparedExample>& pool, const Batch& batch) {
  std::size_t max_len = 0, used = 0;
  for (std::size_t idx : batch) {
    std::size_t len = pool[idx].input.total_len() + pool[idx].target_ids.size();
    max_len = std::max(max_len, len);
    used += len;
  }
  std::size_t padded = max_len * batch.size();
  return padded ? 1.0 - static_cast<double>(used) / static_cast<double>(padded) : 0.0;
}

template <class T>
struct CheckpointEntry {
  std::size_t step = 0;
  double valid_bleu = 0.0;
  std::vector<NDArray<T>> values;  // parameter snapshot, model order
};

template <class T>
struct CheckpointSet {
  std::vector<CheckpointEntry<T>> entries;
};

template <class T>
CheckpointEntry<T> snapshot(Model<T>& model, std::size_t step, double valid_bleu) {
  CheckpointEntry<T> entry;
  entry.step = step;
  entry.valid_bleu = valid_bleu;
  for (auto* p : model.parameters()) entry.values.push_back(p->value);
  return entry;
}

template <class T>
void restore(Model<T>& model, const CheckpointEntry<T>& entry) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = entry.values[i];
}

/// Best validation BLEU; ties go to the later step.
template <class T>
const CheckpointEntry<T>& select_best(const CheckpointSet<T>& checkpoints) {
  if (checkpoints.entries.empty()) throw Error("no checkpoints to select from");
  const CheckpointEntry<T>* best = &checkpoints.entries.front();
  for (const auto& entry : checkpoints.entries)
    if (entry.valid_bleu >= best->valid_bleu) best = &entry;
  return *best;
}

/// Greedy (beam 1) validation BLEU, the cheap in-training selection metric.
template <class T>
double validation_bleu(Model<T>& model, const std::vector<PreparedExample>& valid,
                       const Vocabulary& vocab) {
  DecodeOptions opts;
  opts.beam_size = 1;
  std::vector<TokenSeq> hyps, refs;
  for (const auto& ex : valid) {
    auto result = beam_search(model, ex.input, opts);
    hyps.push_back(hypothesis_tokens(result.front(), vocab));
    TokenSeq ref;
    for (int id : ex.target_ids) ref.push_back(vocab.decode(id));
    refs.push_back(std::move(ref));
  }
  return corpus_bleu(hyps, refs);
}

struct TrainLogEntry {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double valid_bleu = -1.0;  // -1 when no eval ran at this step
};

template <class T>
struct TrainResult {
  CheckpointSet<T> checkpoints;
  std::vector<TrainLogEntry> log;
  bool diverged = false;
  std::size_t steps_run = 0;
};

/// Runs `config.steps` Adam updates; per-example gradients are accumulated
/// across the batch and averaged. Evaluates greedy validation BLEU every
/// eval_every steps and at the end; a non-finite loss aborts, keeping the last
/// good checkpoint. Zero steps returns the initialized model as the only
/// checkpoint.
template <class T>
TrainResult<T> train_loop(Model<T>& model, const std::vector<PreparedExample>& train,
                          const std::vector<PreparedExample>& valid, const Vocabulary& vocab,
                          const TrainConfig& config,
                          const std::function<void(const TrainLogEntry&)>& on_log = {}) {
  TrainResult<T> result;
  if (valid.empty()) throw ConfigError("validation set must be non-empty");
  if (config.steps == 0) {
    result.checkpoints.entries.push_back(
        snapshot(model, 0, validation_bleu(model, valid, vocab)));
    return result;
  }

  std::mt19937_64 batch_rng(config.seed);
  std::mt19937_64 dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  ForwardMode train_mode{true, &dropout_rng};

  AdamOptimizer<T> opt(model.parameters(), config.adam_beta1, config.adam_beta2,
                       config.adam_eps);
  std::vector<Batch> batches =
      make_batches(train, config.tokens_per_batch, config.train_src_len_cap, batch_rng);
  if (batches.empty()) throw ConfigError("no training batches (all examples over the cap?)");
  std::size_t batch_cursor = 0;

  for (std::size_t step = 1; step <= config.steps; ++step) {
    if (batch_cursor == batches.size()) {
      batches = make_batches(train, config.tokens_per_batch, config.train_src_len_cap, batch_rng);
      batch_cursor = 0;
    }
    const Batch& batch = batches[batch_cursor++];

    model.zero_grads();
    double batch_loss = 0.0;
    T inv_batch = T(1) / T(batch.size());
    for (std::size_t idx : batch) {
      Tape<T> tape;
      auto loss = model.forward_loss(tape, train[idx].input, train[idx].target_ids,
                                     T(config.label_smoothing), train_mode);
      batch_loss += static_cast<double>(tape.value(loss).data[0]);
      tape.backward(tape.scale(loss, inv_batch));
    }
    batch_loss /= static_cast<double>(batch.size());

    if (!std::isfinite(batch_loss)) {
      result.diverged = true;
      result.steps_run = step - 1;
      if (result.checkpoints.entries.empty())
        throw DivergenceDetected(step);
      restore(model, select_best(result.checkpoints));
      return result;
    }

    double lr = config.lr_scale * lr_schedule(step, model.config().model_dim,
                                              config.warmup_steps);
    opt.step(lr);

    TrainLogEntry entry{step, batch_loss, lr, -1.0};
    if (step % config.eval_every == 0 || step == config.steps) {
      entry.valid_bleu = validation_bleu(model, valid, vocab);
      result.checkpoints.entries.push_back(snapshot(model, step, entry.valid_bleu));
    }
    result.log.push_back(entry);
    if (on_log) on_log(entry);
    result.steps_run = step;
  }
  return result;
}

}  // namespace isarforge
