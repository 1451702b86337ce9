#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "isarforge/gradcheck.hpp"
#include "isarforge/vocab.hpp"
#include "isarforge/nn.hpp"
#include "isarforge/tape.hpp"
#include "isarforge/tensor.hpp"

using namespace isarforge;
using D = double;
using Var = Tape<D>::Var;

namespace {

NDArray<D> random_array(std::size_t r, std::size_t c, std::mt19937_64& rng, D scale = 1.0) {
  NDArray<D> a(r, c);
  for (auto& v : a.data) v = scale * (static_cast<D>(rng() >> 11) / (1ull << 53) - 0.5);
  return a;
}

// Sums all entries into a scalar so any op output can be a loss.
// (Note: tape.value() references are invalidated by the next op, so copy the
// dimensions before creating nodes.)
Var sum_all(Tape<D>& tape, Var x) {
  std::size_t rows = tape.value(x).rows(), cols = tape.value(x).cols();
  NDArray<D> ones_r(1, rows);
  for (auto& o : ones_r.data) o = 1.0;
  NDArray<D> ones_c(cols, 1);
  for (auto& o : ones_c.data) o = 1.0;
  return tape.matmul(tape.matmul(tape.constant(ones_r), x), tape.constant(ones_c));
}

// Weights each entry before summing, so gradients are not uniform.
// Sum of the diagonal of x w^T = sum_ij x_ij w_ij, extracted via e_r on both sides.
Var weighted_sum(Tape<D>& tape, Var x, const NDArray<D>& w) {
  std::size_t rows = tape.value(x).rows();
  Var prod = tape.matmul_nt(x, tape.constant(w));  // rows x rows
  Var total = tape.constant(NDArray<D>::scalar(0.0));
  for (std::size_t r = 0; r < rows; ++r) {
    NDArray<D> er(1, rows);
    er.at(0, r) = 1.0;
    NDArray<D> ec(rows, 1);
    ec.at(r, 0) = 1.0;
    Var d = tape.matmul(tape.matmul(tape.constant(er), prod), tape.constant(ec));
    total = tape.add(total, d);
  }
  return total;
}

GradCheckReport check(const std::function<Var(Tape<D>&)>& forward,
                      std::vector<Parameter<D>*> params) {
  return grad_check<D>(forward, std::move(params), 1e-5, 1e-5);
}

}  // namespace

TEST_CASE("grad: matmul") {
  std::mt19937_64 rng(1);
  Parameter<D> a("a", random_array(3, 4, rng));
  Parameter<D> b("b", random_array(4, 2, rng));
  NDArray<D> w = random_array(3, 2, rng);
  auto report = check(
      [&](Tape<D>& t) { return weighted_sum(t, t.matmul(t.param(a), t.param(b)), w); },
      {&a, &b});
  INFO(report.worst_param << "[" << report.worst_index << "]");
  REQUIRE(report.pass);
  REQUIRE(report.checked == 20);
}

TEST_CASE("grad: matmul_nt matches matmul with materialized transpose") {
  std::mt19937_64 rng(2);
  Parameter<D> a("a", random_array(3, 4, rng));
  Parameter<D> b("b", random_array(5, 4, rng));
  NDArray<D> w = random_array(3, 5, rng);
  auto report = check(
      [&](Tape<D>& t) { return weighted_sum(t, t.matmul_nt(t.param(a), t.param(b)), w); },
      {&a, &b});
  REQUIRE(report.pass);
}

TEST_CASE("grad: add with row broadcast") {
  std::mt19937_64 rng(3);
  Parameter<D> a("a", random_array(4, 3, rng));
  Parameter<D> bias("bias", random_array(1, 3, rng));
  NDArray<D> w = random_array(4, 3, rng);
  auto report = check(
      [&](Tape<D>& t) { return weighted_sum(t, t.add(t.param(a), t.param(bias)), w); },
      {&a, &bias});
  REQUIRE(report.pass);
  REQUIRE_THROWS_AS(
      [&] {
        Tape<D> t;
        t.add(t.param(a), t.constant(random_array(2, 3, rng)));
      }(),
      ShapeMismatch);
}

TEST_CASE("grad: scale and relu") {
  std::mt19937_64 rng(4);
  Parameter<D> a("a", random_array(3, 3, rng, 2.0));
  NDArray<D> w = random_array(3, 3, rng);
  auto report = check(
      [&](Tape<D>& t) { return weighted_sum(t, t.relu(t.scale(t.param(a), 1.7)), w); }, {&a});
  REQUIRE(report.pass);
}

TEST_CASE("grad: softmax") {
  std::mt19937_64 rng(5);
  Parameter<D> a("a", random_array(3, 5, rng, 3.0));
  NDArray<D> w = random_array(3, 5, rng);
  auto report = check(
      [&](Tape<D>& t) { return weighted_sum(t, t.softmax(t.param(a)), w); }, {&a});
  REQUIRE(report.pass);
}

TEST_CASE("softmax rows sum to one; -inf scores get exactly zero weight") {
  Tape<D> t;
  NDArray<D> scores(2, 3);
  scores.at(0, 0) = 1.0;
  scores.at(0, 1) = -std::numeric_limits<D>::infinity();
  scores.at(0, 2) = 2.0;
  scores.at(1, 1) = 5.0;
  Var x = t.add_const(t.constant(NDArray<D>(2, 3)), scores);
  const auto& y = t.value(t.softmax(x));
  REQUIRE(y.at(0, 1) == 0.0);
  for (std::size_t r = 0; r < 2; ++r) {
    D row = 0;
    for (std::size_t c = 0; c < 3; ++c) row += y.at(r, c);
    REQUIRE(row == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("grad: layer_norm with affine parameters") {
  std::mt19937_64 rng(6);
  Parameter<D> x("x", random_array(3, 6, rng, 2.0));
  Parameter<D> gain("gain", random_array(1, 6, rng));
  Parameter<D> bias("bias", random_array(1, 6, rng));
  NDArray<D> w = random_array(3, 6, rng);
  auto report = check(
      [&](Tape<D>& t) {
        return weighted_sum(t, t.layer_norm(t.param(x), t.param(gain), t.param(bias), 1e-6), w);
      },
      {&x, &gain, &bias});
  INFO(report.max_rel_error << " at " << report.worst_param);
  REQUIRE(report.pass);
}

TEST_CASE("grad: embedding lookup scatter-adds") {
  std::mt19937_64 rng(7);
  Parameter<D> table("emb", random_array(6, 4, rng));
  std::vector<int> ids = {2, 0, 2, 5};  // repeated id accumulates
  NDArray<D> w = random_array(4, 4, rng);
  auto report = check(
      [&](Tape<D>& t) { return weighted_sum(t, t.embedding_lookup(t.param(table), ids), w); },
      {&table});
  REQUIRE(report.pass);
  Tape<D> t;
  REQUIRE_THROWS_AS(t.embedding_lookup(t.param(table), {6}), ShapeMismatch);
  REQUIRE_THROWS_AS(t.embedding_lookup(t.param(table), {}), EmptyInput);
}

TEST_CASE("grad: slice and concat") {
  std::mt19937_64 rng(8);
  Parameter<D> a("a", random_array(3, 6, rng));
  Parameter<D> b("b", random_array(2, 6, rng));
  NDArray<D> w = random_array(5, 4, rng);
  auto report = check(
      [&](Tape<D>& t) {
        Var rows = t.concat_rows({t.param(a), t.param(b)});
        Var left = t.slice_cols(rows, 0, 2);
        Var right = t.slice_cols(rows, 4, 6);
        return weighted_sum(t, t.concat_cols({left, right}), w);
      },
      {&a, &b});
  REQUIRE(report.pass);
}

TEST_CASE("grad: label-smoothed cross entropy, with value oracle") {
  std::mt19937_64 rng(9);
  Parameter<D> logits("logits", random_array(4, 7, rng, 4.0));
  std::vector<int> targets = {3, kPadId, 6, 1};  // one padded row
  const D eps = 0.1;

  auto report = check(
      [&](Tape<D>& t) {
        return t.cross_entropy_label_smoothed(t.param(logits), targets, eps, kPadId);
      },
      {&logits});
  REQUIRE(report.pass);

  // Independent value computation: mean over non-pad rows of -sum_c q_c log p_c.
  D expected = 0.0;
  std::size_t active = 0;
  for (std::size_t r = 0; r < 4; ++r) {
    if (targets[r] == kPadId) continue;
    ++active;
    D mx = logits.value.at(r, 0);
    for (std::size_t c = 1; c < 7; ++c) mx = std::max(mx, logits.value.at(r, c));
    D z = 0.0;
    for (std::size_t c = 0; c < 7; ++c) z += std::exp(logits.value.at(r, c) - mx);
    D log_z = mx + std::log(z);
    for (std::size_t c = 0; c < 7; ++c) {
      D q = eps / 7 + (static_cast<int>(c) == targets[r] ? 1.0 - eps : 0.0);
      expected -= q * (logits.value.at(r, c) - log_z);
    }
  }
  expected /= static_cast<D>(active);
  Tape<D> t;
  D got = t.value(t.cross_entropy_label_smoothed(t.param(logits), targets, eps, kPadId)).data[0];
  REQUIRE(got == Catch::Approx(expected).epsilon(1e-9));

  // All-pad rows give zero loss.
  Tape<D> t2;
  REQUIRE(t2.value(t2.cross_entropy_label_smoothed(
                       t2.param(logits), {kPadId, kPadId, kPadId, kPadId}, eps, kPadId))
              .data[0] == 0.0);
}

TEST_CASE("dropout: identity in eval or at rate 0, reproducible mask, correct scaling") {
  std::mt19937_64 rng(10);
  NDArray<D> x = random_array(8, 8, rng);
  {
    Tape<D> t;
    std::mt19937_64 r(5);
    Var a = t.constant(x);
    REQUIRE(t.dropout(a, 0.5, r, /*training=*/false) == a);
    REQUIRE(t.dropout(a, 0.0, r, /*training=*/true) == a);
  }
  auto run = [&](std::uint64_t seed) {
    Tape<D> t;
    std::mt19937_64 r(seed);
    return t.value(t.dropout(t.constant(x), 0.5, r, true));
  };
  NDArray<D> y1 = run(42), y2 = run(42), y3 = run(43);
  REQUIRE(y1.data == y2.data);
  REQUIRE(y1.data != y3.data);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    bool dropped = y1.data[i] == 0.0;
    bool scaled = std::abs(y1.data[i] - 2.0 * x.data[i]) < 1e-15;
    REQUIRE((dropped || scaled));
  }
  // Gradient flows only through survivors.
  std::mt19937_64 rs(42);
  Parameter<D> p("p", x);
  Tape<D> t;
  auto loss = sum_all(t, t.dropout(t.param(p), 0.5, rs, true));
  t.backward(loss);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    REQUIRE(p.grad.data[i] == (y1.data[i] == 0.0 && x.data[i] != 0.0 ? 0.0 : 2.0));
}

TEST_CASE("grad: multi-head attention block") {
  std::mt19937_64 rng(11);
  MhaParams<D> mha("mha", 16, rng);
  Parameter<D> x("x", random_array(5, 16, rng));
  NDArray<D> w = random_array(5, 16, rng);
  NDArray<D> mask = causal_mask<D>(5);
  auto report = check(
      [&](Tape<D>& t) {
        Var in = t.param(x);
        return weighted_sum(
            t, multi_head_attention<D>(t, in, in, in, mha, 2, mask), w);
      },
      {&x, &mha.wq, &mha.wk, &mha.wv, &mha.wo});
  INFO(report.max_rel_error << " at " << report.worst_param);
  REQUIRE(report.pass);
}

TEST_CASE("grad: full encoder and decoder layers") {
  std::mt19937_64 rng(12);
  EncoderLayer<D> enc("enc", 8, 16, rng);
  DecoderLayer<D> dec("dec", 8, 16, rng);
  Parameter<D> x("x", random_array(4, 8, rng));
  Parameter<D> mem("mem", random_array(3, 8, rng));
  NDArray<D> w = random_array(4, 8, rng);
  ForwardMode eval_mode;
  std::vector<Parameter<D>*> params = {&x, &mem};
  enc.collect(params);
  dec.collect(params);
  auto report = check(
      [&](Tape<D>& t) {
        Var h = enc.apply(t, t.param(x), no_mask<D>(4, 4), 2, 0.0, 1e-6, eval_mode, nullptr);
        Var out = dec.apply(t, h, t.param(mem), causal_mask<D>(4), no_mask<D>(4, 3), 2, 0.0,
                            1e-6, eval_mode);
        return weighted_sum(t, out, w);
      },
      params);
  INFO(report.max_rel_error << " at " << report.worst_param);
  REQUIRE(report.pass);
}

TEST_CASE("backward demands a scalar loss and accumulates into parameters") {
  std::mt19937_64 rng(13);
  Parameter<D> a("a", random_array(2, 2, rng));
  Tape<D> t;
  REQUIRE_THROWS_AS(t.backward(t.param(a)), NonScalarLoss);
  // d(sum(a + a))/da = 2 everywhere; a second backward pass on a fresh tape accumulates.
  for (int pass = 0; pass < 2; ++pass) {
    Tape<D> tt;
    Var v = tt.param(a);
    tt.backward(sum_all(tt, tt.add(v, v)));
  }
  for (D g : a.grad.data) REQUIRE(g == 4.0);
}

TEST_CASE("sinusoidal positional table") {
  auto table = sinusoidal_positions<D>(8, 6);
  // Row 0 is sin(0)/cos(0) pairs.
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(table.at(0, 2 * i) == 0.0);
    REQUIRE(table.at(0, 2 * i + 1) == 1.0);
  }
  REQUIRE(table.at(1, 0) == Catch::Approx(std::sin(1.0)).epsilon(1e-12));
  REQUIRE(table.at(1, 1) == Catch::Approx(std::cos(1.0)).epsilon(1e-12));
  REQUIRE(table.at(3, 2) ==
          Catch::Approx(std::sin(3.0 / std::pow(10000.0, 2.0 / 6.0))).epsilon(1e-12));
  REQUIRE_THROWS_AS(sinusoidal_positions<D>(4, 5), OddDim);
}

TEST_CASE("masks") {
  auto c = causal_mask<D>(3);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t col = 0; col < 3; ++col)
      REQUIRE(std::isinf(c.at(r, col)) == (col > r));
  auto b = block_diagonal_mask<D>({2, 3});
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t col = 0; col < 5; ++col) {
      bool same_block = (r < 2) == (col < 2);
      REQUIRE(std::isinf(b.at(r, col)) == !same_block);
    }
}

TEST_CASE("shape errors surface") {
  std::mt19937_64 rng(14);
  Tape<D> t;
  auto a = t.constant(random_array(2, 3, rng));
  auto b = t.constant(random_array(2, 3, rng));
  REQUIRE_THROWS_AS(t.matmul(a, b), ShapeMismatch);
  NDArray<D> bad(3, 3);
  REQUIRE_THROWS_AS(t.add_const(a, bad), ShapeMismatch);
}
