#pragma once

// Bounder vectors, the hyper-rectangle order they induce, and randomized
// checks of the order-theoretic and asymptotic properties that justify max
// pooling and the norm-ratio filter.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sps/error.hpp"
#include "sps/pooling.hpp"
#include "sps/random.hpp"
#include "sps/tensor.hpp"

namespace sps {

struct BounderVector {
  Tensor values;  // [D]
  std::uint64_t source_length = 0;
};

enum class OrderRelation { Precedes, Succeeds, Incomparable, Equal };

inline std::string to_string(OrderRelation r) {
  switch (r) {
    case OrderRelation::Precedes: return "precedes";
    case OrderRelation::Succeeds: return "succeeds";
    case OrderRelation::Incomparable: return "incomparable";
    case OrderRelation::Equal: return "equal";
  }
  return "incomparable";
}

/// The minimal bounder: coordinatewise maximum over the rows.
inline BounderVector bounder(const Tensor& states) {
  if (states.rank() == 2 && states.rows() == 0) throw EmptySequenceError("bounder of an empty sequence");
  return {pool(states, PoolingStrategy::Max), states.rows()};
}

inline OrderRelation compare(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ShapeError("cannot order bounders of dimension " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  bool some_less = false, some_greater = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] < b[k]) some_less = true;
    if (a[k] > b[k]) some_greater = true;
  }
  if (some_less && some_greater) return OrderRelation::Incomparable;
  if (some_less) return OrderRelation::Precedes;
  if (some_greater) return OrderRelation::Succeeds;
  return OrderRelation::Equal;
}

inline OrderRelation compare(const BounderVector& a, const BounderVector& b) {
  return compare(a.values.data(), b.values.data());
}

/// The relation seen from the other side: compare(b, a) == mirror(compare(a, b)).
inline OrderRelation mirror(OrderRelation r) {
  if (r == OrderRelation::Precedes) return OrderRelation::Succeeds;
  if (r == OrderRelation::Succeeds) return OrderRelation::Precedes;
  return r;
}

/// a is below-or-equal b in the hyper-rectangle order.
inline bool precedes_or_equal(OrderRelation r) {
  return r == OrderRelation::Precedes || r == OrderRelation::Equal;
}

struct TheoremReport {
  std::string name;
  std::uint64_t trials = 0;
  std::uint64_t violations = 0;
  std::optional<std::uint64_t> first_violation_trial;
  std::string first_violation;

  bool passed() const { return violations == 0; }
};

inline nlohmann::json to_json(const TheoremReport& r) {
  nlohmann::json j = {{"check", r.name}, {"trials", r.trials}, {"violations", r.violations}, {"passed", r.passed()}};
  if (r.first_violation_trial) {
    j["first_violation"] = {{"trial", *r.first_violation_trial}, {"detail", r.first_violation}};
  }
  return j;
}

/// Computes the bounder of the full sequence; swapped out by mutation tests.
using BounderFn = std::function<Tensor(const Tensor&)>;

namespace detail {

inline Tensor minimal_bounder(const Tensor& states) { return pool(states, PoolingStrategy::Max); }

inline std::string describe(std::span<const float> sub, std::span<const float> full) {
  for (std::size_t k = 0; k < sub.size(); ++k) {
    if (sub[k] > full[k]) {
      return "coordinate " + std::to_string(k) + ": " + std::to_string(sub[k]) + " > " + std::to_string(full[k]);
    }
  }
  return "no dominated coordinate";
}

inline void record(TheoremReport& rep, std::uint64_t trial, std::span<const float> sub, std::span<const float> full) {
  if (precedes_or_equal(compare(sub, full))) return;
  if (rep.violations++ == 0) {
    rep.first_violation_trial = trial;
    rep.first_violation = describe(sub, full);
  }
}

}  // namespace detail

/// Every non-empty subsequence's bounder precedes (or equals) the full bounder.
/// Trial t draws its subsequence from CounterRng(trial_seed(seed, t)).
inline TheoremReport check_theorem1(const Tensor& states, std::uint64_t trials, std::uint64_t seed,
                                    const BounderFn& full_bounder = detail::minimal_bounder) {
  if (states.rank() != 2) throw ShapeError("theorem 1 check needs a [T x D] token matrix");
  const auto t_rows = states.rows();
  const auto d = states.cols();
  const Tensor full = full_bounder(states);
  TheoremReport rep;
  rep.name = "theorem1_subsequence";
  rep.trials = trials;
  std::vector<float> sub(d);
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    CounterRng rng(trial_seed(seed, trial));
    bool any = false;
    for (std::size_t i = 0; i < t_rows; ++i) {
      if (!rng.bernoulli(0.5)) continue;
      const auto r = states.row(i);
      if (!any) {
        std::copy(r.begin(), r.end(), sub.begin());
        any = true;
      } else {
        for (std::size_t k = 0; k < d; ++k) sub[k] = std::max(sub[k], r[k]);
      }
    }
    if (!any) {
      const auto r = states.row(rng.below(t_rows));
      std::copy(r.begin(), r.end(), sub.begin());
    }
    detail::record(rep, trial, sub, full.data());
  }
  return rep;
}

/// Called on every sampled sequence before its bounder is taken; mutation tests inject points here.
using SampleHook = std::function<void(std::vector<std::vector<float>>& sample, CounterRng& rng)>;

/// Sequences sampled from the convex hull of the rows stay below the bounder.
/// Each trial draws 1..T points, every point a Dirichlet(1,...,1) combination of all rows.
inline TheoremReport check_theorem2(const Tensor& states, std::uint64_t samples, std::uint64_t seed,
                                    const SampleHook& hook = {}) {
  if (states.rank() != 2) throw ShapeError("theorem 2 check needs a [T x D] token matrix");
  const auto t_rows = states.rows();
  const auto d = states.cols();
  const Tensor full = detail::minimal_bounder(states);
  TheoremReport rep;
  rep.name = "theorem2_convex_hull";
  rep.trials = samples;
  std::vector<double> w(t_rows);
  std::vector<std::vector<float>> sample;
  for (std::uint64_t trial = 0; trial < samples; ++trial) {
    CounterRng rng(trial_seed(seed, trial));
    const auto count = 1 + rng.below(t_rows);
    sample.assign(count, std::vector<float>(d));
    for (auto& point : sample) {
      double total = 0.0;
      for (auto& x : w) total += (x = rng.exponential());
      std::vector<double> acc(d, 0.0);
      for (std::size_t i = 0; i < t_rows; ++i) {
        const double wi = w[i] / total;
        const auto r = states.row(i);
        for (std::size_t k = 0; k < d; ++k) acc[k] += wi * r[k];
      }
      for (std::size_t k = 0; k < d; ++k) point[k] = static_cast<float>(acc[k]);
    }
    if (hook) hook(sample, rng);
    std::vector<float> m = sample.front();
    for (const auto& p : sample) {
      for (std::size_t k = 0; k < d; ++k) m[k] = std::max(m[k], p[k]);
    }
    detail::record(rep, trial, m, full.data());
  }
  return rep;
}

/// Axioms of the hyper-rectangle order over random triples on a small integer
/// grid (so that equal and comparable pairs actually occur).
inline TheoremReport check_partial_order(std::uint64_t triples, std::uint64_t dim, std::uint64_t seed) {
  TheoremReport rep;
  rep.name = "partial_order_axioms";
  rep.trials = triples;
  auto fail = [&](std::uint64_t t, const std::string& what) {
    if (rep.violations++ == 0) {
      rep.first_violation_trial = t;
      rep.first_violation = what;
    }
  };
  for (std::uint64_t t = 0; t < triples; ++t) {
    CounterRng rng(trial_seed(seed, t));
    std::vector<float> v[3];
    for (auto& x : v) {
      x.resize(dim);
      for (auto& c : x) c = static_cast<float>(rng.below(3));
    }
    const auto& [a, b, c] = v;
    if (compare(a, a) != OrderRelation::Equal) fail(t, "reflexivity");
    const auto ab = compare(a, b);
    const auto ba = compare(b, a);
    const bool dual = ba == mirror(ab);
    if (!dual) fail(t, "duality");
    if (precedes_or_equal(ab) && precedes_or_equal(ba) && a != b) fail(t, "antisymmetry");
    if (precedes_or_equal(ab) && precedes_or_equal(compare(b, c)) && !precedes_or_equal(compare(a, c))) {
      fail(t, "transitivity");
    }
  }
  return rep;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw EvalError("median of an empty sample");
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct ConvergenceRow {
  std::uint64_t size = 0;
  double median_sup_diff = 0.0;
};

struct ConvergenceReport {
  std::uint64_t dim = 0;
  std::uint64_t trials = 0;
  std::vector<ConvergenceRow> rows;
  bool non_increasing = true;
};

namespace detail {

inline void gaussian_bounder(CounterRng& rng, std::uint64_t m, std::uint64_t dim, double sigma,
                             std::vector<double>& max_out, std::vector<double>& mean_out) {
  max_out.assign(dim, -INFINITY);
  mean_out.assign(dim, 0.0);
  for (std::uint64_t i = 0; i < m; ++i) {
    for (std::uint64_t k = 0; k < dim; ++k) {
      const double x = sigma * rng.normal();
      max_out[k] = std::max(max_out[k], x);
      mean_out[k] += x;
    }
  }
  for (auto& x : mean_out) x /= static_cast<double>(m);
}

inline void check_sizes(const std::vector<std::uint64_t>& sizes) {
  if (sizes.empty()) throw ConfigError("no sample sizes given");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0) throw ConfigError("sample sizes must be >= 1");
    if (i > 0 && sizes[i] < sizes[i - 1]) throw ConfigError("sample sizes must be non-decreasing");
  }
}

}  // namespace detail

/// Median over trials of ||M_a - M_b||_inf for two i.i.d. standard-Gaussian
/// samples of m points each, per m. Trial t uses CounterRng(trial_seed(seed, t)) at every size.
inline ConvergenceReport check_theorem3(std::uint64_t dim, const std::vector<std::uint64_t>& sizes,
                                        std::uint64_t trials, std::uint64_t seed) {
  detail::check_sizes(sizes);
  if (dim == 0 || trials == 0) throw ConfigError("dim and trials must be >= 1");
  ConvergenceReport rep{dim, trials, {}, true};
  std::vector<double> ma, mb, unused;
  for (auto m : sizes) {
    std::vector<double> diffs;
    diffs.reserve(trials);
    for (std::uint64_t t = 0; t < trials; ++t) {
      CounterRng rng(trial_seed(seed, t));
      detail::gaussian_bounder(rng, m, dim, 1.0, ma, unused);
      detail::gaussian_bounder(rng, m, dim, 1.0, mb, unused);
      double sup = 0.0;
      for (std::uint64_t k = 0; k < dim; ++k) sup = std::max(sup, std::abs(ma[k] - mb[k]));
      diffs.push_back(sup);
    }
    rep.rows.push_back({m, median(std::move(diffs))});
  }
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    if (rep.rows[i].median_sup_diff > rep.rows[i - 1].median_sup_diff) rep.non_increasing = false;
  }
  return rep;
}

struct RatioRow {
  std::uint64_t size = 0;
  double mean_ratio = 0.0;       // mean over trials of ||mean|| / ||M_x||
  double mean_bounder_norm = 0.0;
  double fitted_bounder_norm = 0.0;  // a * sqrt(2 ln m), a fitted over all sizes > 1
};

struct RatioReport {
  std::uint64_t dim = 0;
  double sigma = 1.0;
  std::uint64_t trials = 0;
  std::vector<RatioRow> rows;
  double fit_coefficient = 0.0;
  bool strictly_decreasing = true;
};

/// R = ||x_bar||_2 / ||M_x||_2 for i.i.d. N(0, sigma^2 I) samples, averaged over trials.
inline RatioReport ratio_curve(std::uint64_t dim, double sigma, const std::vector<std::uint64_t>& sizes,
                               std::uint64_t trials, std::uint64_t seed) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be positive");
  if (dim == 0 || trials == 0) throw ConfigError("dim and trials must be >= 1");
  detail::check_sizes(sizes);
  RatioReport rep{dim, sigma, trials, {}, 0.0, true};
  std::vector<double> mx, mean;
  for (auto m : sizes) {
    double ratio_sum = 0.0, norm_sum = 0.0;
    for (std::uint64_t t = 0; t < trials; ++t) {
      CounterRng rng(trial_seed(seed, t));
      detail::gaussian_bounder(rng, m, dim, sigma, mx, mean);
      double nm = 0.0, nx = 0.0;
      for (std::uint64_t k = 0; k < dim; ++k) {
        nm += mean[k] * mean[k];
        nx += mx[k] * mx[k];
      }
      nm = std::sqrt(nm);
      nx = std::sqrt(nx);
      ratio_sum += nx > 0.0 ? nm / nx : 1.0;
      norm_sum += nx;
    }
    rep.rows.push_back({m, ratio_sum / static_cast<double>(trials), norm_sum / static_cast<double>(trials), 0.0});
  }
  // Least squares through the origin of ||M_x|| on sqrt(2 ln m); for inspection only.
  double sxy = 0.0, sxx = 0.0;
  for (const auto& r : rep.rows) {
    if (r.size < 2) continue;
    const double g = std::sqrt(2.0 * std::log(static_cast<double>(r.size)));
    sxy += g * r.mean_bounder_norm;
    sxx += g * g;
  }
  rep.fit_coefficient = sxx > 0.0 ? sxy / sxx : 0.0;
  for (auto& r : rep.rows) {
    r.fitted_bounder_norm = r.size < 2 ? 0.0 : rep.fit_coefficient * std::sqrt(2.0 * std::log(static_cast<double>(r.size)));
  }
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    if (!(rep.rows[i].mean_ratio < rep.rows[i - 1].mean_ratio)) rep.strictly_decreasing = false;
  }
  return rep;
}

inline nlohmann::json to_json(const ConvergenceReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) rows.push_back({{"size", row.size}, {"median_sup_diff", row.median_sup_diff}});
  return {{"check", "theorem3_bounder_convergence"},
          {"dim", r.dim},
          {"trials", r.trials},
          {"rows", std::move(rows)},
          {"non_increasing", r.non_increasing}};
}

inline nlohmann::json to_json(const RatioReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"size", row.size},
                    {"mean_ratio", row.mean_ratio},
                    {"mean_bounder_norm", row.mean_bounder_norm},
                    {"fitted_bounder_norm", row.fitted_bounder_norm}});
  }
  return {{"check", "norm_ratio_curve"},
          {"dim", r.dim},
          {"sigma", r.sigma},
          {"trials", r.trials},
          {"rows", std::move(rows)},
          {"fit_coefficient", r.fit_coefficient},
          {"strictly_decreasing", r.strictly_decreasing}};
}

}  // namespace sps
