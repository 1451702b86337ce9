#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "isarforge/eval.hpp"

using namespace isarforge;
using D = double;

namespace {

// Independent BLEU-4: string-keyed hash-map n-gram counting (different code
// path from the library's ordered-map vectors).
double naive_bleu(const std::vector<TokenSeq>& hyps, const std::vector<TokenSeq>& refs) {
  auto grams = [](const TokenSeq& s, std::size_t n) {
    std::unordered_map<std::string, long> m;
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
      std::string key;
      for (std::size_t j = 0; j < n; ++j) key += s[i + j] + "\x1f";
      ++m[key];
    }
    return m;
  };
  double log_sum = 0.0;
  long hyp_len = 0, ref_len = 0;
  for (std::size_t e = 0; e < hyps.size(); ++e) {
    hyp_len += static_cast<long>(hyps[e].size());
    ref_len += static_cast<long>(refs[e].size());
  }
  for (std::size_t n = 1; n <= 4; ++n) {
    long match = 0, total = 0;
    for (std::size_t e = 0; e < hyps.size(); ++e) {
      auto h = grams(hyps[e], n), r = grams(refs[e], n);
      for (const auto& [k, c] : h) {
        total += c;
        auto it = r.find(k);
        if (it != r.end()) match += std::min(c, it->second);
      }
    }
    if (match == 0 || total == 0) return 0.0;
    log_sum += 0.25 * std::log(static_cast<double>(match) / total);
  }
  double bp = (hyp_len >= ref_len) ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);
  return 100.0 * bp * std::exp(log_sum);
}

TokenSeq random_seq(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len,
                    std::size_t alphabet) {
  TokenSeq s;
  std::size_t len = min_len + rng() % (max_len - min_len + 1);
  for (std::size_t i = 0; i < len; ++i) s.push_back("w" + std::to_string(rng() % alphabet));
  return s;
}

}  // namespace

TEST_CASE("BLEU: identical corpus scores 100") {
  std::vector<TokenSeq> corpus = {split_tokens("a b c d e"), split_tokens("f g h i")};
  REQUIRE(corpus_bleu(corpus, corpus) == Catch::Approx(100.0).margin(1e-12));
}

TEST_CASE("BLEU: the 4-vs-5-token brevity case scores 77.88") {
  // All n-gram precisions are 1; BP = exp(1 - 5/4).
  std::vector<TokenSeq> hyp = {split_tokens("a b c d")};
  std::vector<TokenSeq> ref = {split_tokens("a b c d e")};
  REQUIRE(corpus_bleu(hyp, ref) == Catch::Approx(77.88).margin(0.01));
  REQUIRE(corpus_bleu(hyp, ref) == Catch::Approx(100.0 * std::exp(-0.25)).margin(1e-9));
}

TEST_CASE("BLEU: any empty n-gram order gives zero, no smoothing") {
  // 3 tokens: no 4-grams at all.
  std::vector<TokenSeq> hyp = {split_tokens("a b c")};
  std::vector<TokenSeq> ref = {split_tokens("a b c")};
  REQUIRE(corpus_bleu(hyp, ref) == 0.0);
  // Disjoint tokens: zero 1-gram matches.
  REQUIRE(corpus_bleu({split_tokens("a b c d e")}, {split_tokens("v w x y z")}) == 0.0);
}

TEST_CASE("BLEU: clipping counts repeated hypothesis tokens") {
  // hyp has six `a`s, ref has two: clipped 1-gram precision is 2/6, and the
  // repeated-token corpus scores well below the unclipped (6/6) value.
  std::vector<TokenSeq> hyp = {split_tokens("a a a a a a")};
  std::vector<TokenSeq> ref = {split_tokens("a a a a a b")};
  double got = corpus_bleu(hyp, ref);
  // Precisions: 1g 5/6, 2g 4/5, 3g 3/4, 4g 2/3.
  double expected = 100.0 * std::exp(0.25 * (std::log(5.0 / 6) + std::log(4.0 / 5) +
                                             std::log(3.0 / 4) + std::log(2.0 / 3)));
  REQUIRE(got == Catch::Approx(expected).margin(1e-9));
  REQUIRE(got == Catch::Approx(naive_bleu(hyp, ref)).margin(1e-9));
}

TEST_CASE("BLEU: corpus-level pooling differs from averaging sentences") {
  std::vector<TokenSeq> hyps = {split_tokens("a b c d"), split_tokens("p q r s t")};
  std::vector<TokenSeq> refs = {split_tokens("a b c d"), split_tokens("p q r s x")};
  REQUIRE(corpus_bleu(hyps, refs) == Catch::Approx(naive_bleu(hyps, refs)).margin(1e-9));
  REQUIRE_THROWS_AS(corpus_bleu(hyps, {refs[0]}), LineCountMismatch);
}

TEST_CASE("oracle: BLEU matches the naive implementation on 100 random corpora") {
  std::mt19937_64 rng(20240813);
  for (int round = 0; round < 100; ++round) {
    std::vector<TokenSeq> hyps, refs;
    std::size_t n = 1 + rng() % 8;
    for (std::size_t i = 0; i < n; ++i) {
      refs.push_back(random_seq(rng, 1, 12, 5));
      if (rng() % 4 == 0) {
        hyps.push_back(refs.back());  // sometimes perfect
      } else {
        hyps.push_back(random_seq(rng, 1, 12, 5));
      }
    }
    REQUIRE(corpus_bleu(hyps, refs) == Catch::Approx(naive_bleu(hyps, refs)).margin(1e-9));
  }
}

TEST_CASE("exact match at k") {
  TokenSeq ref = split_tokens("a b");
  std::vector<TokenSeq> hyps = {split_tokens("x"), split_tokens("a b"), split_tokens("y")};
  REQUIRE_FALSE(exact_match(hyps, ref, 1));
  REQUIRE(exact_match(hyps, ref, 2));
  REQUIRE(exact_match(hyps, ref, 10));
  REQUIRE_FALSE(exact_match({}, ref, 10));
}

TEST_CASE("length buckets") {
  REQUIRE(length_bucket(0) == 0);
  REQUIRE(length_bucket(159) == 0);
  REQUIRE(length_bucket(160) == 1);
  REQUIRE(length_bucket(479) == 2);
  REQUIRE(length_bucket(480) == 3);
  REQUIRE(length_bucket(639) == 3);
  REQUIRE(length_bucket(640) == 4);
  REQUIRE(length_bucket(800) == 4);
  REQUIRE(length_bucket(5000) == 4);
}

TEST_CASE("eval report aggregates and buckets") {
  std::vector<ExampleResult> results = {
      {100, true, true, true},
      {100, false, true, true},
      {200, false, false, false},
      {700, true, true, true},
  };
  EvalReport rep = make_eval_report(results, 42.5);
  REQUIRE(rep.n == 4);
  REQUIRE(rep.top1_acc == 50.0);
  REQUIRE(rep.top10_acc == 75.0);
  REQUIRE(rep.well_formed == 75.0);
  REQUIRE(rep.bleu == 42.5);
  REQUIRE(rep.buckets.size() == 5);
  REQUIRE(rep.buckets[0].count == 2);
  REQUIRE(rep.buckets[0].correct == 1);
  REQUIRE(rep.buckets[0].accuracy() == 50.0);
  REQUIRE(rep.buckets[1].count == 1);
  REQUIRE(rep.buckets[1].accuracy() == 0.0);
  REQUIRE(rep.buckets[4].accuracy() == 100.0);
  auto j = rep.to_json();
  REQUIRE(j.at("top1") == 50.0);
  REQUIRE(j.at("buckets").size() == 5);
  REQUIRE(j.at("buckets")[1].at("lo") == 160);
  REQUIRE(j.at("buckets")[1].at("hi") == 320);
}

TEST_CASE("nearest neighbors by cosine") {
  Vocabulary vocab = build_vocab({split_tokens("n0 n1 n2 n3")});
  // 13 rows: 9 reserved + 4.
  NDArray<D> emb(13, 3);
  auto set = [&](const std::string& tok, D a, D b, D c) {
    int id = vocab.encode(tok);
    emb.at(id, 0) = a;
    emb.at(id, 1) = b;
    emb.at(id, 2) = c;
  };
  set("n0", 1, 0, 0);
  set("n1", 2, 0, 0);    // same direction as n0
  set("n2", 0, 1, 0);    // orthogonal
  set("n3", -1, 0, 0);   // opposite
  auto neighbors = nearest_neighbors(emb, vocab, "n0", 12);
  REQUIRE(neighbors.size() == 12);  // everything but the query
  REQUIRE(neighbors[0].token == "n1");
  REQUIRE(neighbors[0].cosine == Catch::Approx(1.0));
  // n2 ties with the zero reserved rows at cosine 0; n3 is dead last.
  REQUIRE(neighbors.back().token == "n3");
  REQUIRE(neighbors.back().cosine == Catch::Approx(-1.0));
  for (const auto& nb : neighbors) {
    REQUIRE(nb.token != "n0");  // query excluded
    if (nb.token == "n2") REQUIRE(nb.cosine == Catch::Approx(0.0).margin(1e-12));
  }
  REQUIRE(nearest_neighbors(emb, vocab, "n0", 3).size() == 3);  // k truncates
  REQUIRE_THROWS_AS(nearest_neighbors(emb, vocab, "absent"), UnknownToken);
}

TEST_CASE("PCA recovers a planar structure") {
  // Points on a tilted 2D plane in 5D: the third eigenvalue must be ~0 and the
  // first two carry all the variance.
  std::mt19937_64 rng(5);
  NDArray<D> emb(40, 5);
  for (std::size_t r = 0; r < 40; ++r) {
    D u = static_cast<D>(rng() >> 11) / (1ull << 53) - 0.5;
    D v = static_cast<D>(rng() >> 11) / (1ull << 53) - 0.5;
    D basis_a[5] = {1, 2, 0, -1, 0.5};
    D basis_b[5] = {0, 1, 3, 1, -2};
    for (std::size_t c = 0; c < 5; ++c) emb.at(r, c) = u * basis_a[c] + v * basis_b[c] + 7.0;
  }
  PcaResult pca = pca_project(emb, 3);
  REQUIRE(pca.coordinates.rows() == 40);
  REQUIRE(pca.coordinates.cols() == 3);
  REQUIRE(pca.eigenvalues.size() == 3);
  REQUIRE(pca.eigenvalues[0] >= pca.eigenvalues[1]);
  REQUIRE(pca.eigenvalues[1] >= pca.eigenvalues[2]);
  REQUIRE(pca.eigenvalues[2] == Catch::Approx(0.0).margin(1e-9));
  REQUIRE(pca.eigenvalues[1] > 1e-3);
  // Component coordinates have variance equal to the eigenvalue.
  for (std::size_t d = 0; d < 2; ++d) {
    D mean = 0, var = 0;
    for (std::size_t r = 0; r < 40; ++r) mean += pca.coordinates.at(r, d);
    mean /= 40;
    for (std::size_t r = 0; r < 40; ++r) {
      D diff = pca.coordinates.at(r, d) - mean;
      var += diff * diff;
    }
    var /= 39;
    REQUIRE(var == Catch::Approx(pca.eigenvalues[d]).epsilon(1e-9));
  }
  REQUIRE_THROWS_AS(pca_project(emb, 6), ConfigError);
}

TEST_CASE("well-formedness surrogate") {
  REQUIRE(parses_as_term(split_tokens("CONST f $ FREE <X0>")));
  REQUIRE_FALSE(parses_as_term(split_tokens("CONST f $")));
  REQUIRE_FALSE(parses_as_term({}));
}

TEST_CASE("attention export writes labeled CSV") {
  ModelConfig cfg;
  cfg.arch = Arch::Hat;
  cfg.model_dim = 8;
  cfg.ffn_dim = 16;
  cfg.heads = 2;
  cfg.local_layers = 1;
  cfg.global_layers = 1;
  cfg.dec_layers = 1;
  cfg.dropout = 0.0;
  cfg.vocab_size = 16;
  cfg.max_positions = 32;
  Model<D> model(cfg, 3);
  Vocabulary vocab = build_vocab({split_tokens("t0 t1 t2 t3 t4 t5 t6")});
  ModelInput input;
  input.blocks = {{9, 10, 11}, {12, 13}};
  input.categories = {Category::F3_CONQ, Category::F4_USED_OTHER};

  const std::string path = "attn_export.csv";
  auto capture = export_attention(model, input, vocab, path, 0);
  REQUIRE(capture.heads.size() == 2);

  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "# layer 0 head 0");
  std::getline(in, line);
  REQUIRE(line == "query,t0,t1,t2,t3,t4");
  std::getline(in, line);
  REQUIRE(line.rfind("t0,", 0) == 0);
  // 2 heads x (1 marker + 1 header + 5 rows) lines in total.
  std::size_t lines = 3;
  while (std::getline(in, line)) ++lines;
  REQUIRE(lines == 14);
  std::remove(path.c_str());

  REQUIRE_THROWS_AS(export_attention(model, input, vocab, path, 9), LayerOutOfRange);
}
