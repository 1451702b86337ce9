#pragma once

// Dense row-major arrays. Matrix products are delegated to Eigen maps; all
// shapes at desk scale are small, so everything stays single-threaded and
// deterministic.

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "isarforge/errors.hpp"

namespace isarforge {

template <class T>
struct NDArray {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  NDArray() = default;
  explicit NDArray(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), T(0));
  }
  NDArray(std::size_t rows, std::size_t cols) : NDArray(std::vector<std::size_t>{rows, cols}) {}

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  bool is_scalar() const { return data.size() == 1; }

  T& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool same_shape(const NDArray& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i)
      s += (i ? "," : "") + std::to_string(shape[i]);
    return s + ")";
  }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  static NDArray scalar(T v) {
    NDArray a(std::vector<std::size_t>{1});
    a.data[0] = v;
    return a;
  }
};

template <class T>
using EigenMap =
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using ConstEigenMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <class T>
EigenMap<T> as_matrix(NDArray<T>& a) {
  return EigenMap<T>(a.data.data(), static_cast<Eigen::Index>(a.rows()),
                     static_cast<Eigen::Index>(a.cols()));
}
template <class T>
ConstEigenMap<T> as_matrix(const NDArray<T>& a) {
  return ConstEigenMap<T>(a.data.data(), static_cast<Eigen::Index>(a.rows()),
                          static_cast<Eigen::Index>(a.cols()));
}

template <class T>
void require_same_shape(const NDArray<T>& a, const NDArray<T>& b) {
  if (!a.same_shape(b)) throw ShapeMismatch(a.shape_str(), b.shape_str());
}

// --- initializers ---

template <class T>
NDArray<T> xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  NDArray<T> w(fan_in, fan_out);
  T bound = std::sqrt(T(6) / T(fan_in + fan_out));
  for (T& v : w.data) {
    // rng() / 2^64 in [0,1), portable across stdlibs
    T u = static_cast<T>(rng() >> 11) / static_cast<T>(1ull << 53);
    v = (T(2) * u - T(1)) * bound;
  }
  return w;
}

template <class T>
NDArray<T> gaussian(std::size_t rows, std::size_t cols, T stddev, std::mt19937_64& rng) {
  NDArray<T> w(rows, cols);
  // Box-Muller on portable uniforms, consuming a fixed number of draws per pair.
  for (std::size_t i = 0; i + 1 < w.data.size() + 1; i += 2) {
    T u1 = (static_cast<T>(rng() >> 11) + T(0.5)) / static_cast<T>(1ull << 53);
    T u2 = static_cast<T>(rng() >> 11) / static_cast<T>(1ull << 53);
    T r = std::sqrt(T(-2) * std::log(u1));
    T a = T(2) * T(M_PI) * u2;
    w.data[i] = stddev * r * std::cos(a);
    if (i + 1 < w.data.size()) w.data[i + 1] = stddev * r * std::sin(a);
  }
  return w;
}

/// Standard sin/cos positional table; row p, col 2i = sin(p / 10000^(2i/dim)).
template <class T>
NDArray<T> sinusoidal_positions(std::size_t max_len, std::size_t dim) {
  if (dim % 2 != 0) throw OddDim(dim);
  NDArray<T> table(max_len, dim);
  for (std::size_t p = 0; p < max_len; ++p) {
    for (std::size_t i = 0; i < dim / 2; ++i) {
      T rate = std::pow(T(10000), T(2 * i) / T(dim));
      table.at(p, 2 * i) = std::sin(T(p) / rate);
      table.at(p, 2 * i + 1) = std::cos(T(p) / rate);
    }
  }
  return table;
}

}  // namespace isarforge
