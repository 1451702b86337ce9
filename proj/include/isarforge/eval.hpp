#pragma once

// Metrics (top-k exact match, corpus BLEU-4, length-bucketed accuracy) and the
// embedding / attention analyses.

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "isarforge/model.hpp"
#include "isarforge/term.hpp"
#include "isarforge/vocab.hpp"

namespace isarforge {

/// True iff the reference equals any of the first k hypotheses (token strings,
/// <BOS>/<EOS> already stripped). No partial credit.
inline bool exact_match(const std::vector<TokenSeq>& hypotheses, const TokenSeq& reference,
                        std::size_t k) {
  std::size_t limit = std::min(k, hypotheses.size());
  for (std::size_t i = 0; i < limit; ++i)
    if (hypotheses[i] == reference) return true;
  return false;
}

/// Corpus-level BLEU-4: uniform weights, standard brevity penalty, no
/// smoothing, 0-100 scale. Single reference per hypothesis.
inline double corpus_bleu(const std::vector<TokenSeq>& hyps, const std::vector<TokenSeq>& refs) {
  if (hyps.size() != refs.size()) throw LineCountMismatch(hyps.size(), refs.size());
  constexpr std::size_t kMaxOrder = 4;
  std::array<std::uint64_t, kMaxOrder> matched{}, total{};
  std::uint64_t hyp_len = 0, ref_len = 0;

  auto ngram_counts = [](const TokenSeq& toks, std::size_t n) {
    std::map<std::vector<std::string>, std::uint64_t> counts;
    if (toks.size() >= n)
      for (std::size_t i = 0; i + n <= toks.size(); ++i)
        ++counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
    return counts;
  };

  for (std::size_t e = 0; e < hyps.size(); ++e) {
    hyp_len += hyps[e].size();
    ref_len += refs[e].size();
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      auto hyp_counts = ngram_counts(hyps[e], n);
      auto ref_counts = ngram_counts(refs[e], n);
      for (const auto& [gram, count] : hyp_counts) {
        total[n - 1] += count;
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  double log_precision_sum = 0.0;
  for (std::size_t n = 0; n < kMaxOrder; ++n) {
    if (matched[n] == 0 || total[n] == 0) return 0.0;
    log_precision_sum += std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n]));
  }
  double bp = hyp_len >= ref_len || hyp_len == 0
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return 100.0 * bp * std::exp(log_precision_sum / kMaxOrder);
}

inline constexpr std::array<std::size_t, 5> kBucketEdges = {160, 320, 480, 640, 800};

/// Bucket index for a flat source length under edges [160,320,480,640,800]:
/// [0,160), [160,320), [320,480), [480,640), [640,800]. Lengths past the last
/// edge land in the final bucket.
inline std::size_t length_bucket(std::size_t src_len) {
  for (std::size_t b = 0; b + 1 < kBucketEdges.size(); ++b)
    if (src_len < kBucketEdges[b]) return b;
  return kBucketEdges.size() - 1;
}

struct ExampleResult {
  std::size_t src_len = 0;
  bool top1 = false;
  bool top10 = false;
  bool parses = false;  // structural surrogate: best hypothesis parses as a term
};

struct BucketStat {
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy() const { return count ? 100.0 * correct / count : 0.0; }
};

struct EvalReport {
  double top1_acc = 0.0;
  double top10_acc = 0.0;
  double bleu = 0.0;
  double well_formed = 0.0;  // grammatical well-formedness only, not a prover check
  std::vector<BucketStat> buckets;
  std::size_t n = 0;

  nlohmann::json to_json() const {
    nlohmann::json bucket_list = nlohmann::json::array();
    for (std::size_t b = 0; b < buckets.size(); ++b) {
      std::size_t lo = b == 0 ? 0 : kBucketEdges[b - 1];
      bucket_list.push_back({{"lo", lo},
                             {"hi", kBucketEdges[b]},
                             {"count", buckets[b].count},
                             {"top1", buckets[b].accuracy()}});
    }
    return {{"top1", top1_acc},  {"top10", top10_acc},        {"bleu", bleu},
            {"buckets", bucket_list}, {"well_formed", well_formed}, {"n", n}};
  }
};

inline std::vector<BucketStat> bucketed_accuracy(const std::vector<ExampleResult>& results) {
  std::vector<BucketStat> buckets(kBucketEdges.size());
  for (const auto& r : results) {
    auto& b = buckets[length_bucket(r.src_len)];
    ++b.count;
    if (r.top1) ++b.correct;
  }
  return buckets;
}

inline EvalReport make_eval_report(const std::vector<ExampleResult>& results, double bleu) {
  EvalReport rep;
  rep.n = results.size();
  rep.bleu = bleu;
  std::size_t top1 = 0, top10 = 0, parses = 0;
  for (const auto& r : results) {
    top1 += r.top1;
    top10 += r.top10;
    parses += r.parses;
  }
  if (rep.n) {
    rep.top1_acc = 100.0 * top1 / rep.n;
    rep.top10_acc = 100.0 * top10 / rep.n;
    rep.well_formed = 100.0 * parses / rep.n;
  }
  rep.buckets = bucketed_accuracy(results);
  return rep;
}

// --- embedding analyses ---

struct Neighbor {
  std::string token;
  double cosine = 0.0;
};

/// Cosine-similarity ranking over embedding rows, query excluded.
template <class T>
std::vector<Neighbor> nearest_neighbors(const NDArray<T>& embeddings, const Vocabulary& vocab,
                                        const std::string& token, std::size_t k = 50) {
  if (!vocab.contains(token)) throw UnknownToken(token);
  std::size_t query = static_cast<std::size_t>(vocab.encode(token));
  auto norm = [&](std::size_t row) {
    double s = 0.0;
    for (std::size_t c = 0; c < embeddings.cols(); ++c) {
      double v = static_cast<double>(embeddings.at(row, c));
      s += v * v;
    }
    return std::sqrt(s);
  };
  double qn = norm(query);
  std::vector<Neighbor> all;
  for (std::size_t r = 0; r < embeddings.rows(); ++r) {
    if (r == query) continue;
    double dot = 0.0;
    for (std::size_t c = 0; c < embeddings.cols(); ++c)
      dot += static_cast<double>(embeddings.at(query, c)) *
             static_cast<double>(embeddings.at(r, c));
    double rn = norm(r);
    double cos = qn > 0 && rn > 0 ? dot / (qn * rn) : 0.0;
    all.push_back({vocab.decode(static_cast<int>(r)), cos});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Neighbor& a, const Neighbor& b) { return a.cosine > b.cosine; });
  if (all.size() > k) all.resize(k);
  return all;
}

struct PcaResult {
  NDArray<double> coordinates;       // rows x dims
  std::vector<double> eigenvalues;   // descending, one per kept component
};

/// PCA via eigendecomposition of the column covariance; components ordered by
/// descending eigenvalue.
template <class T>
PcaResult pca_project(const NDArray<T>& embeddings, std::size_t dims = 3) {
  std::size_t R = embeddings.rows(), C = embeddings.cols();
  if (dims > C) throw ConfigError("pca dims exceed embedding dim");
  Eigen::MatrixXd X(R, C);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) X(r, c) = static_cast<double>(embeddings.at(r, c));
  Eigen::RowVectorXd mean = X.colwise().mean();
  X.rowwise() -= mean;
  Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(R > 1 ? R - 1 : 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  // SelfAdjointEigenSolver orders eigenvalues ascending.
  PcaResult result;
  result.coordinates = NDArray<double>(R, dims);
  for (std::size_t d = 0; d < dims; ++d) {
    Eigen::Index col = static_cast<Eigen::Index>(C - 1 - d);
    result.eigenvalues.push_back(solver.eigenvalues()(col));
    Eigen::VectorXd proj = X * solver.eigenvectors().col(col);
    for (std::size_t r = 0; r < R; ++r) result.coordinates.at(r, d) = proj(r);
  }
  return result;
}

// --- attention export ---

/// Writes the per-head self-attention weights of one encoder layer as CSV with
/// token labels. Row format: query_token, w(key_1), ..., w(key_n).
template <class T>
AttentionCapture<T> export_attention(Model<T>& model, const ModelInput& input,
                                     const Vocabulary& vocab, const std::string& path,
                                     std::size_t layer) {
  AttentionTrace<T> trace;
  Tape<T> tape;
  ForwardMode eval_mode;
  model.encode(tape, input, eval_mode, &trace);
  if (layer >= trace.encoder_layers.size())
    throw LayerOutOfRange(layer, trace.encoder_layers.size());

  std::vector<std::string> labels;
  for (const auto& block : input.blocks)
    for (int id : block) labels.push_back(vocab.decode(id));

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  const auto& capture = trace.encoder_layers[layer];
  for (std::size_t h = 0; h < capture.heads.size(); ++h) {
    const auto& weights = capture.heads[h];
    out << "# layer " << layer << " head " << h << '\n';
    out << "query";
    for (const auto& label : labels) out << ',' << label;
    out << '\n';
    for (std::size_t r = 0; r < weights.rows(); ++r) {
      out << labels[r];
      for (std::size_t c = 0; c < weights.cols(); ++c) out << ',' << weights.at(r, c);
      out << '\n';
    }
  }
  return capture;
}

/// Structural surrogate for well-formedness: the tokens parse under the term
/// grammar. No semantic or prover-backed validity is implied.
inline bool parses_as_term(const TokenSeq& tokens) {
  try {
    parse_tokens(tokens);
    return true;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace isarforge
