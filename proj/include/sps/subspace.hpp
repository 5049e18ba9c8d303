#pragma once

// Principal subspace of a reader representation matrix W [D x M] and the
// residual norm against its orthogonal projector P = U_k U_k^T.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sps/defaults.hpp"
#include "sps/error.hpp"
#include "sps/random.hpp"
#include "sps/tensor.hpp"

namespace sps {

/// How the retained rank k is read off the singular spectrum.
enum class RetentionRule {
  CumulativeVariance,  // sum sigma_i^2 up to k over total >= ratio (default)
  CumulativeSingular,  // sum sigma_i up to k over total >= ratio
  Count,               // k = ceil(ratio * rank)
};

inline std::string to_string(RetentionRule r) {
  switch (r) {
    case RetentionRule::CumulativeVariance: return "variance";
    case RetentionRule::CumulativeSingular: return "singular";
    case RetentionRule::Count: return "count";
  }
  return "variance";
}

inline RetentionRule parse_retention_rule(const std::string& s) {
  if (s == "variance") return RetentionRule::CumulativeVariance;
  if (s == "singular") return RetentionRule::CumulativeSingular;
  if (s == "count") return RetentionRule::Count;
  throw ConfigError("unknown retention rule \"" + s + "\" (expected variance|singular|count)");
}

struct SubspaceOptions {
  double variance_ratio = defaults::kVarianceRatio;
  RetentionRule rule = RetentionRule::CumulativeVariance;
  bool center = false;
  std::uint64_t seed = defaults::kSeed;
  std::uint64_t dense_cutoff = defaults::kDenseSvdCutoff;
  std::uint64_t oversampling = defaults::kSvdOversampling;
  std::uint64_t power_iterations = defaults::kSvdPowerIterations;
};

struct PrincipalSubspace {
  Tensor basis;                         // [D x k], orthonormal columns
  std::vector<double> singular_values;  // non-increasing
  bool singular_values_complete = true;  // false when a randomized SVD computed only the leading part
  double retained_variance = 0.0;
  std::uint64_t k = 0;
  double variance_ratio = defaults::kVarianceRatio;
  RetentionRule rule = RetentionRule::CumulativeVariance;
  std::string source_fingerprint;
  bool centered = false;
  std::optional<Tensor> mean;  // [D], present iff centered

  std::size_t dim() const noexcept { return basis.rows(); }
};

inline constexpr double kOrthonormalityTolerance = 1e-5;

namespace detail {

using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::MatrixXd to_eigen(const Tensor& w) {
  Eigen::Map<const RowMajorF> m(w.data().data(), static_cast<Eigen::Index>(w.rows()),
                                static_cast<Eigen::Index>(w.cols()));
  return m.cast<double>();
}

inline void check_ratio(double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw ConfigError("variance ratio must lie in (0, 1], got " + std::to_string(ratio));
  }
}

// Largest-magnitude entry of every column becomes positive (first index wins ties).
inline void canonicalize_signs(Eigen::MatrixXd& u) {
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < u.rows(); ++i) {
      if (std::abs(u(i, j)) > std::abs(u(best, j))) best = i;
    }
    if (u(best, j) < 0) u.col(j) = -u.col(j);
  }
}

struct Spectrum {
  Eigen::MatrixXd u;  // D x r (thin)
  std::vector<double> sigma;
  bool complete = true;
};

inline Spectrum dense_svd(const Eigen::MatrixXd& w) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(w, Eigen::ComputeThinU);
  Spectrum s;
  s.u = svd.matrixU();
  const auto& sv = svd.singularValues();
  s.sigma.assign(sv.data(), sv.data() + sv.size());
  return s;
}

inline Eigen::MatrixXd orthonormal_range(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

// Randomized range finder with power iterations, rank `target` + oversampling.
inline Spectrum randomized_svd(const Eigen::MatrixXd& w, std::size_t target, const SubspaceOptions& opt) {
  const auto cols = w.cols();
  const auto sketch = static_cast<Eigen::Index>(
      std::min<std::size_t>(target + opt.oversampling, static_cast<std::size_t>(std::min(w.rows(), cols))));
  CounterRng rng(opt.seed);
  Eigen::MatrixXd omega(cols, sketch);
  for (Eigen::Index j = 0; j < sketch; ++j) {
    for (Eigen::Index i = 0; i < cols; ++i) omega(i, j) = rng.normal();
  }
  Eigen::MatrixXd q = orthonormal_range(w * omega);
  for (std::uint64_t it = 0; it < opt.power_iterations; ++it) {
    Eigen::MatrixXd z = orthonormal_range(w.transpose() * q);
    q = orthonormal_range(w * z);
  }
  Eigen::MatrixXd b = q.transpose() * w;  // sketch x M
  Eigen::BDCSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU);
  Spectrum s;
  s.u = q * svd.matrixU();
  const auto& sv = svd.singularValues();
  s.sigma.assign(sv.data(), sv.data() + sv.size());
  s.complete = false;
  return s;
}

}  // namespace detail

/// Smallest k meeting the retention rule. `total_variance` is sum sigma_i^2 over
/// the full spectrum; it may exceed the sum over `sigma` when only a prefix is known.
inline std::uint64_t choose_rank(std::span<const double> sigma, double ratio, RetentionRule rule,
                                 std::uint64_t full_rank, double total_variance) {
  detail::check_ratio(ratio);
  if (sigma.empty()) throw ShapeError("empty singular spectrum");
  if (rule == RetentionRule::Count) {
    const auto k = static_cast<std::uint64_t>(std::ceil(ratio * static_cast<double>(full_rank) - 1e-9));
    return std::clamp<std::uint64_t>(k, 1, sigma.size());
  }
  double total = 0.0;
  if (rule == RetentionRule::CumulativeVariance) {
    total = total_variance;
  } else {
    for (double s : sigma) total += s;
  }
  if (total <= 0.0) return 1;
  double cum = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    cum += rule == RetentionRule::CumulativeVariance ? sigma[i] * sigma[i] : sigma[i];
    // Relative slack absorbs rounding in the running sum when ratio == 1.
    if (cum >= ratio * total * (1.0 - 1e-12)) return i + 1;
  }
  return sigma.size();
}

/// Max |B^T B - I| over all entries.
inline double orthonormality_error(const Tensor& basis) {
  const auto d = basis.rows();
  const auto k = basis.cols();
  std::vector<double> gram(k * k, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    const auto r = basis.row(i);
    for (std::size_t a = 0; a < k; ++a) {
      const double ra = r[a];
      for (std::size_t b = a; b < k; ++b) gram[a * k + b] += ra * static_cast<double>(r[b]);
    }
  }
  double worst = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      worst = std::max(worst, std::abs(gram[a * k + b] - (a == b ? 1.0 : 0.0)));
    }
  }
  return worst;
}

inline void validate_subspace(const PrincipalSubspace& s) {
  if (s.basis.rank() != 2) throw ShapeError("subspace basis must be a rank-2 tensor");
  if (s.k < 1 || s.k != s.basis.cols() || s.k > s.basis.rows()) {
    throw DataError("subspace rank k=" + std::to_string(s.k) + " inconsistent with basis shape");
  }
  for (std::size_t i = 0; i < s.singular_values.size(); ++i) {
    if (!(s.singular_values[i] >= 0.0) ||
        (i > 0 && s.singular_values[i] > s.singular_values[i - 1])) {
      throw DataError("singular values must be non-negative and non-increasing");
    }
  }
  if (const double err = orthonormality_error(s.basis); err > kOrthonormalityTolerance) {
    throw DataError("subspace basis is not orthonormal (max |B^T B - I| = " + std::to_string(err) + ")");
  }
  if (s.centered != s.mean.has_value()) throw DataError("centered subspace must carry its mean vector");
  if (s.mean && s.mean->size() != s.dim()) throw ShapeError("subspace mean has wrong length");
}

inline PrincipalSubspace build_subspace(const Tensor& w, const SubspaceOptions& opt) {
  if (w.rank() != 2) throw ShapeError("W must be a rank-2 [D x M] tensor");
  detail::check_ratio(opt.variance_ratio);
  const auto d = w.rows();
  const auto m = w.cols();
  if (m < 2) throw ShapeError("W needs at least two columns");
  detail::check_finite(w.data(), "W");

  PrincipalSubspace s;
  s.source_fingerprint = fingerprint(w);
  s.variance_ratio = opt.variance_ratio;
  s.rule = opt.rule;
  s.centered = opt.center;

  Eigen::MatrixXd wd = detail::to_eigen(w);
  if (opt.center) {
    const Eigen::VectorXd mu = wd.rowwise().mean();
    wd.colwise() -= mu;
    std::vector<float> mean(d);
    for (std::size_t i = 0; i < d; ++i) mean[i] = static_cast<float>(mu(static_cast<Eigen::Index>(i)));
    s.mean = Tensor::vector(std::move(mean));
  }
  const std::uint64_t full_rank = std::min(d, m);
  const double total_variance = wd.squaredNorm();

  detail::Spectrum spec;
  std::uint64_t k = 0;
  const auto dense = [&] {
    spec = detail::dense_svd(wd);
    k = choose_rank(spec.sigma, opt.variance_ratio, opt.rule, full_rank, total_variance);
  };
  if (full_rank <= opt.dense_cutoff || opt.rule == RetentionRule::CumulativeSingular) {
    // The sigma-sum rule needs the whole spectrum for its denominator.
    dense();
  } else {
    // Grow the sketch until the computed prefix already meets the rule.
    for (std::size_t target = 64;; target *= 2) {
      if (target + opt.oversampling >= full_rank) {
        dense();
        break;
      }
      spec = detail::randomized_svd(wd, target, opt);
      spec.sigma.resize(target);
      k = choose_rank(spec.sigma, opt.variance_ratio, opt.rule, full_rank, total_variance);
      if (opt.rule == RetentionRule::Count) {
        if (std::ceil(opt.variance_ratio * static_cast<double>(full_rank) - 1e-9) <= static_cast<double>(target)) break;
        continue;
      }
      double captured = 0.0;
      for (std::size_t i = 0; i < k; ++i) captured += spec.sigma[i] * spec.sigma[i];
      if (captured >= opt.variance_ratio * total_variance * (1.0 - 1e-12)) break;
    }
  }

  Eigen::MatrixXd u = spec.u.leftCols(static_cast<Eigen::Index>(k));
  detail::canonicalize_signs(u);
  std::vector<float> basis(d * k);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      basis[i * k + j] = static_cast<float>(u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
  }
  s.basis = Tensor::matrix(d, k, std::move(basis));
  s.k = k;
  s.singular_values = std::move(spec.sigma);
  s.singular_values_complete = spec.complete;
  double kept = 0.0;
  for (std::size_t i = 0; i < k; ++i) kept += s.singular_values[i] * s.singular_values[i];
  s.retained_variance = total_variance > 0.0 ? std::min(1.0, kept / total_variance) : 1.0;
  validate_subspace(s);
  return s;
}

inline PrincipalSubspace build_subspace(const Tensor& w, double variance_ratio, std::uint64_t seed) {
  SubspaceOptions opt;
  opt.variance_ratio = variance_ratio;
  opt.seed = seed;
  return build_subspace(w, opt);
}

/// Coordinates of x in the basis, B^T (x - mean).
inline std::vector<double> project_coordinates(const PrincipalSubspace& s, std::span<const float> x) {
  const auto d = s.dim();
  const auto k = s.k;
  std::vector<double> coords(k, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    const double xi = static_cast<double>(x[i]) - (s.mean ? static_cast<double>((*s.mean)[i]) : 0.0);
    const auto r = s.basis.row(i);
    for (std::size_t j = 0; j < k; ++j) coords[j] += r[j] * xi;
  }
  return coords;
}

/// ||(I - P) x||_2 for the orthogonal projector onto span(basis).
///
/// Equal to sqrt(||x||^2 - ||B^T x||^2); it is evaluated as the norm of the explicit
/// residual vector x - B (B^T x), which stays accurate when x lies almost inside
/// the subspace, where the difference of squares cancels catastrophically.
inline double residual_norm(const PrincipalSubspace& s, std::span<const float> x) {
  const auto d = s.dim();
  if (x.size() != d) {
    throw ShapeError("vector of length " + std::to_string(x.size()) + " against subspace of dimension " +
                     std::to_string(d));
  }
  const auto coords = project_coordinates(s, x);
  double sq = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double r = static_cast<double>(x[i]) - (s.mean ? static_cast<double>((*s.mean)[i]) : 0.0);
    const auto row = s.basis.row(i);
    for (std::size_t j = 0; j < s.k; ++j) r -= row[j] * coords[j];
    sq += r * r;
  }
  return std::sqrt(std::max(0.0, sq));
}

inline double residual_norm(const PrincipalSubspace& s, const Tensor& x) {
  if (x.rank() != 1) throw ShapeError("residual_norm expects a rank-1 vector");
  return residual_norm(s, x.data());
}

inline constexpr const char* kSubspaceBasisFile = "basis.spsf";
inline constexpr const char* kSubspaceMeanFile = "mean.spsf";
inline constexpr const char* kSubspaceSidecarFile = "subspace.json";

inline nlohmann::json subspace_sidecar(const PrincipalSubspace& s) {
  nlohmann::json j;
  j["k"] = s.k;
  j["dim"] = s.dim();
  j["retained_variance"] = s.retained_variance;
  j["variance_ratio"] = s.variance_ratio;
  j["rule"] = to_string(s.rule);
  j["singular_values"] = s.singular_values;
  j["singular_values_complete"] = s.singular_values_complete;
  j["source_fingerprint"] = s.source_fingerprint;
  j["centered"] = s.centered;
  return j;
}

/// Writes basis.spsf, subspace.json and (when centered) mean.spsf into `dir`.
inline void save_subspace(const PrincipalSubspace& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_tensor_file(s.basis, dir / kSubspaceBasisFile);
  if (s.mean) write_tensor_file(*s.mean, dir / kSubspaceMeanFile);
  std::ofstream out(dir / kSubspaceSidecarFile, std::ios::trunc);
  if (!out) throw IoError((dir / kSubspaceSidecarFile).string() + ": cannot open for writing");
  out << subspace_sidecar(s).dump(2) << '\n';
  if (!out) throw IoError((dir / kSubspaceSidecarFile).string() + ": write failed");
}

inline PrincipalSubspace load_subspace(const std::filesystem::path& dir,
                                       const std::optional<std::string>& expected_fingerprint = std::nullopt) {
  const auto sidecar_path = dir / kSubspaceSidecarFile;
  std::ifstream in(sidecar_path);
  if (!in) throw IoError(sidecar_path.string() + ": cannot open subspace sidecar");
  nlohmann::json j;
  PrincipalSubspace s;
  try {
    j = nlohmann::json::parse(in);
    s.k = j.at("k").get<std::uint64_t>();
    s.retained_variance = j.at("retained_variance").get<double>();
    s.singular_values = j.at("singular_values").get<std::vector<double>>();
    s.source_fingerprint = j.at("source_fingerprint").get<std::string>();
    s.centered = j.at("centered").get<bool>();
    s.variance_ratio = j.value("variance_ratio", defaults::kVarianceRatio);
    s.rule = parse_retention_rule(j.value("rule", std::string("variance")));
    s.singular_values_complete = j.value("singular_values_complete", true);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(sidecar_path.string() + ": " + e.what());
  }
  if (expected_fingerprint && *expected_fingerprint != s.source_fingerprint) {
    throw StaleSubspaceError("subspace at " + dir.string() + " was built from " + s.source_fingerprint +
                             ", expected " + *expected_fingerprint);
  }
  s.basis = read_tensor_file(dir / kSubspaceBasisFile);
  if (s.centered) s.mean = read_tensor_file(dir / kSubspaceMeanFile);
  validate_subspace(s);
  return s;
}

}  // namespace sps
