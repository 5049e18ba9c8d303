#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sps/error.hpp"
#include "sps/tensor.hpp"

namespace sps {

enum class PoolingStrategy { Max, Mean, LastToken };

inline std::string to_string(PoolingStrategy p) {
  switch (p) {
    case PoolingStrategy::Max: return "max";
    case PoolingStrategy::Mean: return "mean";
    case PoolingStrategy::LastToken: return "last";
  }
  return "max";
}

inline PoolingStrategy parse_pooling(const std::string& s) {
  if (s == "max") return PoolingStrategy::Max;
  if (s == "mean") return PoolingStrategy::Mean;
  if (s == "last") return PoolingStrategy::LastToken;
  throw ConfigError("unknown pooling strategy \"" + s + "\" (expected max|mean|last)");
}

namespace detail {

inline void check_sequence(const Tensor& states) {
  if (states.rank() != 2) throw ShapeError("token states must be a rank-2 [T x D] tensor");
  if (states.rows() == 0) throw EmptySequenceError("token sequence is empty");
}

// Per-dimension mean accumulated in double, rows in order.
inline std::vector<double> mean_rows(const Tensor& states) {
  std::vector<double> acc(states.cols(), 0.0);
  for (std::size_t t = 0; t < states.rows(); ++t) {
    const auto r = states.row(t);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += r[k];
  }
  for (auto& v : acc) v /= static_cast<double>(states.rows());
  return acc;
}

}  // namespace detail

/// Collapses [T x D] token states into one D-vector.
inline Tensor pool(const Tensor& states, PoolingStrategy strategy) {
  detail::check_sequence(states);
  const auto d = states.cols();
  std::vector<float> out(d);
  switch (strategy) {
    case PoolingStrategy::Max: {
      const auto first = states.row(0);
      std::copy(first.begin(), first.end(), out.begin());
      for (std::size_t t = 1; t < states.rows(); ++t) {
        const auto r = states.row(t);
        for (std::size_t k = 0; k < d; ++k) out[k] = std::max(out[k], r[k]);
      }
      break;
    }
    case PoolingStrategy::Mean: {
      const auto m = detail::mean_rows(states);
      for (std::size_t k = 0; k < d; ++k) out[k] = static_cast<float>(m[k]);
      break;
    }
    case PoolingStrategy::LastToken: {
      const auto last = states.row(states.rows() - 1);
      std::copy(last.begin(), last.end(), out.begin());
      break;
    }
  }
  return Tensor::vector(std::move(out));
}

/// ||mean-pool||_2 / ||max-pool||_1 of a token sequence.
///
/// High values mean mass concentrated around the mean relative to the salient
/// peaks; the gatekeeper skips sampling for those summaries.
inline double norm_ratio(const Tensor& states) {
  detail::check_sequence(states);
  const auto mean = detail::mean_rows(states);
  const auto maxed = pool(states, PoolingStrategy::Max);
  double l2 = 0.0;
  for (double v : mean) l2 += v * v;
  double l1 = 0.0;
  for (float v : maxed.data()) l1 += std::abs(static_cast<double>(v));
  if (l1 == 0.0) throw DegenerateInputError("max-pooled representation has zero L1 norm");
  return std::sqrt(l2) / l1;
}

}  // namespace sps
