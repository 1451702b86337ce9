#pragma once

// Reverse-mode autodiff over NDArray values. A Tape records one forward pass;
// backward() visits nodes in reverse creation order (a valid reverse
// topological order, since operands always precede results) exactly once and
// flushes leaf gradients into their bound Parameters.

#include <cassert>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "isarforge/errors.hpp"
#include "isarforge/tensor.hpp"

namespace isarforge {

template <class T>
struct Parameter {
  NDArray<T> value;
  NDArray<T> grad;
  std::string name;

  Parameter() = default;
  Parameter(std::string n, NDArray<T> v) : value(std::move(v)), name(std::move(n)) {
    grad = NDArray<T>(value.shape);
  }
  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

template <class T>
class Tape {
 public:
  using Var = std::size_t;

  Var constant(NDArray<T> v) { return make(std::move(v), {}); }

  Var param(Parameter<T>& p) {
    Var id = make(p.value, {});
    bindings_.push_back({id, &p});
    return id;
  }

  const NDArray<T>& value(Var v) const { return nodes_[v].value; }
  const NDArray<T>& grad(Var v) const { return nodes_[v].grad; }
  std::size_t size() const { return nodes_.size(); }

  // ---- ops ----

  Var matmul(Var a, Var b) {
    const auto &A = val(a), &B = val(b);
    if (A.cols() != B.rows()) throw ShapeMismatch(A.shape_str(), B.shape_str());
    NDArray<T> out(A.rows(), B.cols());
    as_matrix(out) = as_matrix(A) * as_matrix(B);
    return make(std::move(out), [a, b](Tape& t, const Node& n) {
      as_matrix(t.nodes_[a].grad) += as_matrix(n.grad) * as_matrix(t.val(b)).transpose();
      as_matrix(t.nodes_[b].grad) += as_matrix(t.val(a)).transpose() * as_matrix(n.grad);
    });
  }

  /// a * b^T without materializing the transpose.
  Var matmul_nt(Var a, Var b) {
    const auto &A = val(a), &B = val(b);
    if (A.cols() != B.cols()) throw ShapeMismatch(A.shape_str(), B.shape_str());
    NDArray<T> out(A.rows(), B.rows());
    as_matrix(out) = as_matrix(A) * as_matrix(B).transpose();
    return make(std::move(out), [a, b](Tape& t, const Node& n) {
      as_matrix(t.nodes_[a].grad) += as_matrix(n.grad) * as_matrix(t.val(b));
      as_matrix(t.nodes_[b].grad) += as_matrix(n.grad).transpose() * as_matrix(t.val(a));
    });
  }

  /// Elementwise add; b may also be a single row broadcast over a's rows.
  Var add(Var a, Var b) {
    const auto &A = val(a), &B = val(b);
    bool broadcast = !A.same_shape(B);
    if (broadcast && !(B.rows() == 1 && B.cols() == A.cols()))
      throw ShapeMismatch(A.shape_str(), B.shape_str());
    NDArray<T> out = A;
    if (broadcast)
      as_matrix(out).rowwise() += Eigen::Map<const Eigen::RowVector<T, Eigen::Dynamic>>(
          B.data.data(), static_cast<Eigen::Index>(B.cols()));
    else
      as_matrix(out) += as_matrix(B);
    return make(std::move(out), [a, b, broadcast](Tape& t, const Node& n) {
      as_matrix(t.nodes_[a].grad) += as_matrix(n.grad);
      if (broadcast)
        as_matrix(t.nodes_[b].grad) += as_matrix(n.grad).colwise().sum();
      else
        as_matrix(t.nodes_[b].grad) += as_matrix(n.grad);
    });
  }

  /// Adds a non-differentiated array (positional tables, additive masks; may
  /// contain -inf for masked attention scores).
  Var add_const(Var a, const NDArray<T>& c) {
    const auto& A = val(a);
    require_same_shape(A, c);
    NDArray<T> out = A;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += c.data[i];
    return make_unchecked(std::move(out), [a](Tape& t, const Node& n) {
      as_matrix(t.nodes_[a].grad) += as_matrix(n.grad);
    });
  }

  Var scale(Var a, T s) {
    NDArray<T> out = val(a);
    for (T& v : out.data) v *= s;
    return make(std::move(out), [a, s](Tape& t, const Node& n) {
      for (std::size_t i = 0; i < n.grad.data.size(); ++i)
        t.nodes_[a].grad.data[i] += s * n.grad.data[i];
    });
  }

  Var relu(Var a) {
    NDArray<T> out = val(a);
    for (T& v : out.data) v = v > T(0) ? v : T(0);
    return make(std::move(out), [a](Tape& t, const Node& n) {
      const auto& x = t.val(a);
      for (std::size_t i = 0; i < n.grad.data.size(); ++i)
        if (x.data[i] > T(0)) t.nodes_[a].grad.data[i] += n.grad.data[i];
    });
  }

  /// Row-wise softmax. -inf entries get weight exactly 0.
  Var softmax(Var a) {
    NDArray<T> out = val(a);
    std::size_t R = out.rows(), C = out.cols();
    for (std::size_t r = 0; r < R; ++r) {
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, out.at(r, c));
      T sum = T(0);
      for (std::size_t c = 0; c < C; ++c) {
        T e = std::exp(out.at(r, c) - mx);
        out.at(r, c) = e;
        sum += e;
      }
      for (std::size_t c = 0; c < C; ++c) out.at(r, c) /= sum;
    }
    return make(std::move(out), [a](Tape& t, const Node& n) {
      const NDArray<T>& y = n.value;
      std::size_t R = y.rows(), C = y.cols();
      for (std::size_t r = 0; r < R; ++r) {
        T dot = T(0);
        for (std::size_t c = 0; c < C; ++c) dot += n.grad.at(r, c) * y.at(r, c);
        for (std::size_t c = 0; c < C; ++c)
          t.nodes_[a].grad.at(r, c) += y.at(r, c) * (n.grad.at(r, c) - dot);
      }
    });
  }

  /// Per-row layer norm with affine gain/bias (single-row parameters).
  Var layer_norm(Var x, Var gain, Var bias, T eps) {
    const auto& X = val(x);
    std::size_t R = X.rows(), C = X.cols();
    if (val(gain).cols() != C || val(bias).cols() != C)
      throw ShapeMismatch(X.shape_str(), val(gain).shape_str());
    NDArray<T> normed(R, C);   // (x - mu) / s, kept for backward
    NDArray<T> inv_std(R, std::size_t(1));
    for (std::size_t r = 0; r < R; ++r) {
      T mu = T(0);
      for (std::size_t c = 0; c < C; ++c) mu += X.at(r, c);
      mu /= T(C);
      T var = T(0);
      for (std::size_t c = 0; c < C; ++c) {
        T d = X.at(r, c) - mu;
        var += d * d;
      }
      var /= T(C);
      T is = T(1) / std::sqrt(var + eps);
      inv_std.at(r, 0) = is;
      for (std::size_t c = 0; c < C; ++c) normed.at(r, c) = (X.at(r, c) - mu) * is;
    }
    NDArray<T> out(R, C);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c)
        out.at(r, c) = normed.at(r, c) * val(gain).data[c] + val(bias).data[c];
    return make(std::move(out),
                [x, gain, bias, normed, inv_std](Tape& t, const Node& n) {
                  const std::size_t R = normed.rows(), C = normed.cols();
                  for (std::size_t r = 0; r < R; ++r) {
                    T mean_dy = T(0), mean_dyy = T(0);
                    for (std::size_t c = 0; c < C; ++c) {
                      T dy = n.grad.at(r, c) * t.val(gain).data[c];
                      mean_dy += dy;
                      mean_dyy += dy * normed.at(r, c);
                      t.nodes_[gain].grad.data[c] += n.grad.at(r, c) * normed.at(r, c);
                      t.nodes_[bias].grad.data[c] += n.grad.at(r, c);
                    }
                    mean_dy /= T(C);
                    mean_dyy /= T(C);
                    for (std::size_t c = 0; c < C; ++c) {
                      T dy = n.grad.at(r, c) * t.val(gain).data[c];
                      t.nodes_[x].grad.at(r, c) +=
                          inv_std.at(r, 0) * (dy - mean_dy - normed.at(r, c) * mean_dyy);
                    }
                  }
                });
  }

  /// Inverted dropout: survivors scaled by 1/(1-rate); identity when not
  /// training or rate == 0. The rng draw order is fixed, so fixed seeds give
  /// reproducible masks.
  Var dropout(Var a, T rate, std::mt19937_64& rng, bool training) {
    if (!training || rate <= T(0)) return a;
    const auto& A = val(a);
    NDArray<T> mask(A.shape);
    T keep_scale = T(1) / (T(1) - rate);
    for (T& m : mask.data) {
      T u = static_cast<T>(rng() >> 11) / static_cast<T>(1ull << 53);
      m = u < rate ? T(0) : keep_scale;
    }
    NDArray<T> out = A;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= mask.data[i];
    return make(std::move(out), [a, mask](Tape& t, const Node& n) {
      for (std::size_t i = 0; i < n.grad.data.size(); ++i)
        t.nodes_[a].grad.data[i] += n.grad.data[i] * mask.data[i];
    });
  }

  /// Gathers rows of an embedding table; the gradient scatter-adds back.
  Var embedding_lookup(Var table, const std::vector<int>& ids) {
    const auto& E = val(table);
    if (ids.empty()) throw EmptyInput();
    NDArray<T> out(ids.size(), E.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= E.rows())
        throw ShapeMismatch("id < " + std::to_string(E.rows()), std::to_string(ids[r]));
      for (std::size_t c = 0; c < E.cols(); ++c)
        out.at(r, c) = E.at(static_cast<std::size_t>(ids[r]), c);
    }
    return make(std::move(out), [table, ids](Tape& t, const Node& n) {
      for (std::size_t r = 0; r < ids.size(); ++r)
        for (std::size_t c = 0; c < n.grad.cols(); ++c)
          t.nodes_[table].grad.at(static_cast<std::size_t>(ids[r]), c) += n.grad.at(r, c);
    });
  }

  Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const auto& A = val(a);
    NDArray<T> out(A.rows(), c1 - c0);
    for (std::size_t r = 0; r < A.rows(); ++r)
      for (std::size_t c = c0; c < c1; ++c) out.at(r, c - c0) = A.at(r, c);
    return make(std::move(out), [a, c0](Tape& t, const Node& n) {
      for (std::size_t r = 0; r < n.grad.rows(); ++r)
        for (std::size_t c = 0; c < n.grad.cols(); ++c)
          t.nodes_[a].grad.at(r, c0 + c) += n.grad.at(r, c);
    });
  }

  Var concat_cols(const std::vector<Var>& parts) {
    std::size_t R = val(parts.front()).rows(), C = 0;
    for (Var p : parts) C += val(p).cols();
    NDArray<T> out(R, C);
    std::size_t off = 0;
    for (Var p : parts) {
      const auto& P = val(p);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < P.cols(); ++c) out.at(r, off + c) = P.at(r, c);
      off += P.cols();
    }
    return make(std::move(out), [parts](Tape& t, const Node& n) {
      std::size_t off = 0;
      for (Var p : parts) {
        auto& G = t.nodes_[p].grad;
        for (std::size_t r = 0; r < G.rows(); ++r)
          for (std::size_t c = 0; c < G.cols(); ++c) G.at(r, c) += n.grad.at(r, off + c);
        off += G.cols();
      }
    });
  }

  Var concat_rows(const std::vector<Var>& parts) {
    std::size_t C = val(parts.front()).cols(), R = 0;
    for (Var p : parts) R += val(p).rows();
    NDArray<T> out(R, C);
    std::size_t off = 0;
    for (Var p : parts) {
      const auto& P = val(p);
      for (std::size_t r = 0; r < P.rows(); ++r)
        for (std::size_t c = 0; c < C; ++c) out.at(off + r, c) = P.at(r, c);
      off += P.rows();
    }
    return make(std::move(out), [parts](Tape& t, const Node& n) {
      std::size_t off = 0;
      for (Var p : parts) {
        auto& G = t.nodes_[p].grad;
        for (std::size_t r = 0; r < G.rows(); ++r)
          for (std::size_t c = 0; c < G.cols(); ++c) G.at(r, c) += n.grad.at(off + r, c);
        off += G.rows();
      }
    });
  }

  /// Mean over non-pad positions of the label-smoothed negative log-likelihood
  /// against q = (1-smoothing)*onehot(target) + smoothing/V.
  Var cross_entropy_label_smoothed(Var logits, const std::vector<int>& targets, T smoothing,
                                   int pad_id) {
    const auto& X = val(logits);
    if (X.rows() != targets.size())
      throw ShapeMismatch(std::to_string(targets.size()) + " rows", X.shape_str());
    std::size_t V = X.cols();
    std::size_t active = 0;
    for (int t : targets)
      if (t != pad_id) ++active;
    if (active == 0) return constant(NDArray<T>::scalar(T(0)));

    NDArray<T> probs(X.shape);  // softmax rows, kept for backward
    T total = T(0);
    for (std::size_t r = 0; r < X.rows(); ++r) {
      T mx = X.at(r, 0);
      for (std::size_t c = 1; c < V; ++c) mx = std::max(mx, X.at(r, c));
      T sum = T(0);
      for (std::size_t c = 0; c < V; ++c) sum += std::exp(X.at(r, c) - mx);
      T log_z = mx + std::log(sum);
      for (std::size_t c = 0; c < V; ++c) probs.at(r, c) = std::exp(X.at(r, c) - log_z);
      if (targets[r] == pad_id) continue;
      T row_loss = -(T(1) - smoothing) * (X.at(r, static_cast<std::size_t>(targets[r])) - log_z);
      if (smoothing > T(0)) {
        T sum_logp = T(0);
        for (std::size_t c = 0; c < V; ++c) sum_logp += X.at(r, c) - log_z;
        row_loss -= smoothing / T(V) * sum_logp;
      }
      total += row_loss;
    }
    NDArray<T> out = NDArray<T>::scalar(total / T(active));
    return make(std::move(out),
                [logits, targets, smoothing, pad_id, probs, active](Tape& t, const Node& n) {
                  T g = n.grad.data[0] / T(active);
                  std::size_t V = probs.cols();
                  auto& G = t.nodes_[logits].grad;
                  for (std::size_t r = 0; r < probs.rows(); ++r) {
                    if (targets[r] == pad_id) continue;
                    for (std::size_t c = 0; c < V; ++c) {
                      T q = smoothing / T(V) +
                            (static_cast<int>(c) == targets[r] ? T(1) - smoothing : T(0));
                      G.at(r, c) += g * (probs.at(r, c) - q);
                    }
                  }
                });
  }

  void backward(Var loss) {
    if (!nodes_[loss].value.is_scalar()) throw NonScalarLoss();
    nodes_[loss].grad.data[0] = T(1);
    for (std::size_t i = nodes_.size(); i-- > 0;)
      if (nodes_[i].backward) nodes_[i].backward(*this, nodes_[i]);
    for (const auto& [var, p] : bindings_)
      for (std::size_t i = 0; i < p->grad.data.size(); ++i)
        p->grad.data[i] += nodes_[var].grad.data[i];
  }

 private:
  struct Node {
    NDArray<T> value;
    NDArray<T> grad;
    std::function<void(Tape&, const Node&)> backward;
  };

  const NDArray<T>& val(Var v) const { return nodes_[v].value; }

  Var make(NDArray<T> value, std::function<void(Tape&, const Node&)> bw) {
#ifndef NDEBUG
    assert(value.all_finite() && "non-finite value out of a forward op");
#endif
    return make_unchecked(std::move(value), std::move(bw));
  }

  // For ops whose outputs legitimately contain -inf (masked scores).
  Var make_unchecked(NDArray<T> value, std::function<void(Tape&, const Node&)> bw) {
    Node node;
    node.grad = NDArray<T>(value.shape);
    node.value = std::move(value);
    node.backward = std::move(bw);
    nodes_.push_back(std::move(node));
    return nodes_.size() - 1;
  }

  // deque: node references stay valid while the tape grows, so values returned
  // by value()/grad() can be held across subsequent op calls.
  std::deque<Node> nodes_;
  std::vector<std::pair<Var, Parameter<T>*>> bindings_;
};

}  // namespace isarforge
