#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "jacobi_svd.hpp"
#include "sps/pooling.hpp"
#include "sps/scoring.hpp"
#include "sps/subspace.hpp"
#include "sps/synthetic.hpp"
#include "temp_dir.hpp"

using sps::PoolingStrategy;
using sps::Tensor;
using testing_support::TempDir;

namespace {

Tensor vec(std::vector<float> v) { return Tensor::vector(std::move(v)); }

oracle::Matrix to_oracle(const Tensor& w) {
  oracle::Matrix m(w.rows(), w.cols());
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) m(i, j) = w(i, j);
  return m;
}

// A subspace with a hand-written basis, bypassing the SVD.
sps::PrincipalSubspace fixed_subspace(std::uint64_t d, std::uint64_t k, std::vector<float> basis) {
  sps::PrincipalSubspace s;
  s.basis = Tensor::matrix(d, k, std::move(basis));
  s.k = k;
  s.singular_values.assign(k, 1.0);
  s.retained_variance = 1.0;
  sps::validate_subspace(s);
  return s;
}

double norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

// Matrix with prescribed singular values: U diag(sigma) V^T from random orthonormal frames.
Tensor with_spectrum(std::uint64_t d, std::uint64_t m, const std::vector<double>& sigma, std::uint64_t seed) {
  const auto u = sps::synthetic::random_frame(d, sigma.size(), seed);
  const auto v = sps::synthetic::random_frame(m, sigma.size(), seed + 1);
  Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(sigma.data(), static_cast<Eigen::Index>(sigma.size()));
  const Eigen::MatrixXd w = u * s.asDiagonal() * v.transpose();
  std::vector<float> data(d * m);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < m; ++j)
      data[i * m + j] = static_cast<float>(w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  return Tensor::matrix(d, m, std::move(data));
}

}  // namespace

// ---- build_subspace ---------------------------------------------------------

TEST(BuildSubspace, OrthonormalColumnsKeepBoth) {
  const auto s = sps::build_subspace(Tensor::matrix(3, 2, {1, 0, 0, 1, 0, 0}), 0.95, 1);
  ASSERT_EQ(s.k, 2u);
  EXPECT_DOUBLE_EQ(s.singular_values[0], 1.0);
  EXPECT_DOUBLE_EQ(s.singular_values[1], 1.0);
  EXPECT_NEAR(sps::residual_norm(s, vec({0, 0, 5})), 5.0, 1e-6);
  EXPECT_NEAR(sps::residual_norm(s, vec({3, 4, 0})), 0.0, 1e-6);
}

TEST(BuildSubspace, DiagonalVarianceRule) {
  const auto w = Tensor::matrix(2, 2, {2, 0, 0, 1});
  const auto low = sps::build_subspace(w, 0.75, 1);
  ASSERT_EQ(low.k, 1u);
  EXPECT_NEAR(std::abs(low.basis(0, 0)), 1.0, 1e-7);
  EXPECT_NEAR(low.basis(1, 0), 0.0, 1e-7);
  EXPECT_NEAR(low.retained_variance, 0.8, 1e-12);
  EXPECT_NEAR(sps::residual_norm(low, vec({3, 4})), 4.0, 1e-6);
  EXPECT_EQ(sps::build_subspace(w, 0.95, 1).k, 2u);
  // Exactly at the boundary the smaller k is kept.
  EXPECT_EQ(sps::build_subspace(w, 0.8, 1).k, 1u);
}

TEST(BuildSubspace, SignCanonicalization) {
  const auto s = sps::build_subspace(Tensor::matrix(2, 2, {0, -3, -1, 0}), 0.5, 1);
  ASSERT_EQ(s.k, 1u);
  // Largest-magnitude entry of each basis column is positive.
  EXPECT_NEAR(s.basis(0, 0), 1.0, 1e-7);
}

TEST(BuildSubspace, RejectsBadInput) {
  EXPECT_THROW(sps::build_subspace(vec({1, 2, 3}), 0.95, 1), sps::ShapeError);
  EXPECT_THROW(sps::build_subspace(Tensor::matrix(3, 1, {1, 2, 3}), 0.95, 1), sps::ShapeError);
  const auto w = Tensor::matrix(2, 2, {2, 0, 0, 1});
  EXPECT_THROW(sps::build_subspace(w, 0.0, 1), sps::ConfigError);
  EXPECT_THROW(sps::build_subspace(w, 1.01, 1), sps::ConfigError);
  EXPECT_THROW(sps::build_subspace(w, std::nan(""), 1), sps::ConfigError);
  EXPECT_NO_THROW(sps::build_subspace(w, 1.0, 1));
}

TEST(BuildSubspace, MatchesJacobiOracle) {
  sps::CounterRng shapes(77);
  for (int trial = 0; trial < 25; ++trial) {
    const auto d = 2 + shapes.below(40);
    const auto m = 2 + shapes.below(40);
    const auto w = sps::synthetic::gaussian_matrix(d, m, 1000 + trial);
    const auto s = sps::build_subspace(w, 0.9, 1);
    const auto ref = oracle::jacobi_svd(to_oracle(w));
    ASSERT_EQ(s.k, oracle::rank_for_ratio(ref.sigma, 0.9)) << d << "x" << m;
    for (std::size_t i = 0; i < ref.sigma.size(); ++i) {
      EXPECT_NEAR(s.singular_values[i], ref.sigma[i], 1e-6 * ref.sigma[0]) << "sigma " << i;
    }
    const auto p_ref = oracle::projector(ref.u, s.k);
    oracle::Matrix u(d, s.k);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < s.k; ++j) u(i, j) = s.basis(i, j);
    const auto p = oracle::projector(u, s.k);
    double diff = 0.0;
    for (std::size_t i = 0; i < p.a.size(); ++i) diff = std::max(diff, std::abs(p.a[i] - p_ref.a[i]));
    EXPECT_LT(diff, 1e-5) << d << "x" << m;
  }
}

TEST(BuildSubspace, KMonotoneInRatio) {
  const auto w = sps::synthetic::gaussian_matrix(30, 50, 3);
  std::uint64_t prev = 0;
  for (double r = 0.05; r <= 1.0; r += 0.05) {
    const auto k = sps::build_subspace(w, r, 1).k;
    EXPECT_GE(k, prev) << "ratio " << r;
    prev = k;
  }
  EXPECT_EQ(sps::build_subspace(w, 1.0, 1).k, 30u);
}

TEST(BuildSubspace, RetentionRules) {
  const auto w = with_spectrum(8, 10, {4, 3, 2, 1}, 5);
  sps::SubspaceOptions opt;
  opt.rule = sps::RetentionRule::CumulativeSingular;
  opt.variance_ratio = 0.65;  // sigma shares 0.4, 0.7 -> k = 2
  EXPECT_EQ(sps::build_subspace(w, opt).k, 2u);
  opt.rule = sps::RetentionRule::Count;
  opt.variance_ratio = 0.5;  // ceil(0.5 * 8) = 4
  EXPECT_EQ(sps::build_subspace(w, opt).k, 4u);
  opt.rule = sps::RetentionRule::CumulativeVariance;
  opt.variance_ratio = 0.9;  // 16+9+4 = 29 of 30
  EXPECT_EQ(sps::build_subspace(w, opt).k, 3u);
  EXPECT_EQ(sps::parse_retention_rule("singular"), sps::RetentionRule::CumulativeSingular);
  EXPECT_THROW(sps::parse_retention_rule("entropy"), sps::ConfigError);
}

TEST(BuildSubspace, ProjectorIdentities) {
  const auto w = sps::synthetic::gaussian_matrix(24, 40, 11);
  const auto s = sps::build_subspace(w, 0.8, 1);
  sps::CounterRng rng(12);
  for (int t = 0; t < 200; ++t) {
    std::vector<float> x(24);
    for (auto& v : x) v = static_cast<float>(rng.normal(0.0, 3.0));
    const auto coords = sps::project_coordinates(s, x);
    const double in_sq = std::inner_product(coords.begin(), coords.end(), coords.begin(), 0.0);
    const double r = sps::residual_norm(s, x);
    const double nx = norm(x);
    EXPECT_NEAR(in_sq + r * r, nx * nx, 1e-4 * nx * nx);
    std::vector<float> px(24, 0.0f);
    for (std::size_t i = 0; i < 24; ++i)
      for (std::size_t j = 0; j < s.k; ++j) px[i] += static_cast<float>(s.basis(i, j) * coords[j]);
    EXPECT_LE(sps::residual_norm(s, px), 1e-4 * nx);
  }
}

TEST(BuildSubspace, RightRotationInvariance) {
  const auto w = sps::synthetic::gaussian_matrix(12, 20, 21);
  const auto q = sps::synthetic::random_frame(20, 20, 22);
  Eigen::MatrixXd wq = sps::detail::to_eigen(w) * q;
  std::vector<float> data(12 * 20);
  for (Eigen::Index i = 0; i < 12; ++i)
    for (Eigen::Index j = 0; j < 20; ++j) data[i * 20 + j] = static_cast<float>(wq(i, j));
  const auto a = sps::build_subspace(w, 0.7, 1);
  const auto b = sps::build_subspace(Tensor::matrix(12, 20, data), 0.7, 1);
  ASSERT_EQ(a.k, b.k);
  sps::CounterRng rng(23);
  for (int t = 0; t < 50; ++t) {
    std::vector<float> x(12);
    for (auto& v : x) v = static_cast<float>(rng.normal());
    const double ra = sps::residual_norm(a, x);
    EXPECT_NEAR(sps::residual_norm(b, x), ra, 1e-4 * std::max(ra, norm(x)));
  }
}

TEST(BuildSubspace, RandomizedPathMatchesDense) {
  // min(D, M) > 512 takes the randomized route; compare it with a forced dense run.
  std::vector<double> sigma(60);
  for (std::size_t i = 0; i < sigma.size(); ++i) sigma[i] = 10.0 * std::pow(0.85, static_cast<double>(i));
  const auto w = with_spectrum(530, 540, sigma, 31);
  sps::SubspaceOptions fast;
  fast.variance_ratio = 0.95;
  sps::SubspaceOptions dense = fast;
  dense.dense_cutoff = 100000;
  const auto a = sps::build_subspace(w, fast);
  const auto b = sps::build_subspace(w, dense);
  EXPECT_FALSE(a.singular_values_complete);
  EXPECT_TRUE(b.singular_values_complete);
  ASSERT_EQ(a.k, b.k);
  for (std::size_t i = 0; i < a.k; ++i) EXPECT_NEAR(a.singular_values[i], b.singular_values[i], 1e-6 * sigma[0]);
  EXPECT_NEAR(a.retained_variance, b.retained_variance, 1e-9);
  for (std::size_t i = 0; i < 530; ++i)
    for (std::size_t j = 0; j < a.k; ++j) ASSERT_NEAR(a.basis(i, j), b.basis(i, j), 1e-4) << i << "," << j;
}

TEST(BuildSubspace, CenteringSubtractsColumnMean) {
  // Columns are a constant offset plus multiples of e1: after centering only e1 remains.
  std::vector<float> data;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 6; ++j) data.push_back(5.0f + (i == 0 ? static_cast<float>(j) : 0.0f));
  sps::SubspaceOptions opt;
  opt.center = true;
  opt.variance_ratio = 0.99;
  const auto s = sps::build_subspace(Tensor::matrix(3, 6, data), opt);
  EXPECT_EQ(s.k, 1u);
  ASSERT_TRUE(s.mean.has_value());
  EXPECT_NEAR((*s.mean)[0], 7.5, 1e-6);
  EXPECT_NEAR((*s.mean)[1], 5.0, 1e-6);
  // Residuals are measured from the mean.
  EXPECT_NEAR(sps::residual_norm(s, vec({100, 5, 5})), 0.0, 1e-4);
  EXPECT_NEAR(sps::residual_norm(s, vec({7.5f, 8, 9})), 5.0, 1e-4);
}

TEST(ResidualNorm, DimensionMismatch) {
  const auto s = fixed_subspace(3, 1, {1, 0, 0});
  EXPECT_THROW(sps::residual_norm(s, vec({1, 2})), sps::ShapeError);
}

// ---- persistence ------------------------------------------------------------

TEST(SubspaceFiles, SaveLoadRoundTrip) {
  TempDir dir;
  const auto w = sps::synthetic::gaussian_matrix(10, 16, 4);
  const auto s = sps::build_subspace(w, 0.9, 1);
  sps::save_subspace(s, dir.path());
  const auto back = sps::load_subspace(dir.path());
  EXPECT_EQ(back.basis, s.basis);
  EXPECT_EQ(back.k, s.k);
  EXPECT_EQ(back.singular_values, s.singular_values);
  EXPECT_EQ(back.source_fingerprint, sps::fingerprint(w));
  EXPECT_LE(sps::orthonormality_error(back.basis), sps::kOrthonormalityTolerance);
  EXPECT_NO_THROW(sps::load_subspace(dir.path(), sps::fingerprint(w)));
}

TEST(SubspaceFiles, StaleFingerprintRejected) {
  TempDir dir;
  sps::save_subspace(sps::build_subspace(sps::synthetic::gaussian_matrix(6, 8, 1), 0.9, 1), dir.path());
  const auto other = sps::fingerprint(sps::synthetic::gaussian_matrix(6, 8, 2));
  EXPECT_THROW(sps::load_subspace(dir.path(), other), sps::StaleSubspaceError);
}

TEST(SubspaceFiles, TamperedBasisRejected) {
  TempDir dir;
  const auto s = sps::build_subspace(sps::synthetic::gaussian_matrix(6, 8, 1), 0.9, 1);
  sps::save_subspace(s, dir.path());
  auto basis = s.basis;
  basis(0, 0) += 0.01f;
  sps::write_tensor_file(basis, dir / sps::kSubspaceBasisFile);
  EXPECT_THROW(sps::load_subspace(dir.path()), sps::DataError);
}

TEST(SubspaceFiles, SidecarMismatchRejected) {
  TempDir dir;
  sps::save_subspace(sps::build_subspace(sps::synthetic::gaussian_matrix(6, 8, 1), 0.9, 1), dir.path());
  std::ifstream in(dir / sps::kSubspaceSidecarFile);
  auto j = nlohmann::json::parse(in);
  in.close();
  j["k"] = j["k"].get<int>() + 1;
  std::ofstream(dir / sps::kSubspaceSidecarFile) << j.dump();
  EXPECT_ANY_THROW(sps::load_subspace(dir.path()));
  EXPECT_THROW(sps::load_subspace(dir / "missing"), sps::IoError);
}

// ---- pooling ----------------------------------------------------------------

namespace {
const Tensor kTwoTokens = Tensor::matrix(2, 2, {1, -2, 0, 3});
}

TEST(Pooling, Definitions) {
  EXPECT_EQ(sps::pool(kTwoTokens, PoolingStrategy::Max), vec({1, 3}));
  EXPECT_EQ(sps::pool(kTwoTokens, PoolingStrategy::Mean), vec({0.5f, 0.5f}));
  EXPECT_EQ(sps::pool(kTwoTokens, PoolingStrategy::LastToken), vec({0, 3}));
  EXPECT_EQ(sps::parse_pooling("last"), PoolingStrategy::LastToken);
  EXPECT_THROW(sps::parse_pooling("sum"), sps::ConfigError);
}

TEST(Pooling, NormRatioExamples) {
  EXPECT_NEAR(sps::norm_ratio(kTwoTokens), std::sqrt(0.5) / 4.0, 1e-12);
  EXPECT_DOUBLE_EQ(sps::norm_ratio(Tensor::matrix(1, 2, {1, 0})), 1.0);
  EXPECT_THROW(sps::norm_ratio(Tensor::matrix(2, 3, std::vector<float>(6, 0.0f))), sps::DegenerateInputError);
}

TEST(Pooling, RejectsNonSequences) {
  EXPECT_THROW(sps::pool(vec({1, 2}), PoolingStrategy::Max), sps::ShapeError);
}

TEST(Pooling, Properties) {
  sps::CounterRng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const auto t = 1 + rng.below(12);
    const auto d = 1 + rng.below(9);
    std::vector<float> data(t * d);
    for (auto& x : data) x = static_cast<float>(rng.normal(0.0, 2.0));
    const auto states = Tensor::matrix(t, d, data);
    const auto mx = sps::pool(states, PoolingStrategy::Max);

    // Max pooling bounds every row.
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t k = 0; k < d; ++k) ASSERT_GE(mx[k], states(i, k));

    // Row permutation leaves max and mean unchanged.
    std::vector<std::size_t> perm(t);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = t; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    std::vector<float> shuffled;
    for (auto p : perm) shuffled.insert(shuffled.end(), states.row(p).begin(), states.row(p).end());
    const auto permuted = Tensor::matrix(t, d, shuffled);
    ASSERT_EQ(sps::pool(permuted, PoolingStrategy::Max), mx);
    const auto m1 = sps::pool(states, PoolingStrategy::Mean);
    const auto m2 = sps::pool(permuted, PoolingStrategy::Mean);
    for (std::size_t k = 0; k < d; ++k) ASSERT_NEAR(m1[k], m2[k], 1e-5);

    // Appending a row never lowers a max coordinate.
    std::vector<float> longer = data;
    for (std::size_t k = 0; k < d; ++k) longer.push_back(static_cast<float>(rng.normal(0.0, 2.0)));
    const auto mx2 = sps::pool(Tensor::matrix(t + 1, d, longer), PoolingStrategy::Max);
    for (std::size_t k = 0; k < d; ++k) ASSERT_GE(mx2[k], mx[k]);

    // The norm ratio ignores positive scaling.
    std::vector<float> scaled = data;
    const double c = 0.1 + 10.0 * rng.uniform();
    for (auto& x : scaled) x = static_cast<float>(x * c);
    ASSERT_NEAR(sps::norm_ratio(Tensor::matrix(t, d, scaled)), sps::norm_ratio(states),
                1e-5 * sps::norm_ratio(states));
  }
}

// ---- scoring ----------------------------------------------------------------

namespace {

sps::CandidateSet set_of(std::vector<Tensor> states) {
  sps::CandidateSet set;
  set.query_id = "q";
  for (std::size_t i = 0; i < states.size(); ++i) {
    set.candidates.push_back({"c" + std::to_string(i), std::move(states[i]), std::nullopt, std::nullopt});
  }
  return set;
}

std::vector<sps::ScoredCandidate> scores_of(std::vector<double> v) {
  std::vector<sps::ScoredCandidate> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back({"c" + std::to_string(i), v[i], 1.0, i});
  return out;
}

}  // namespace

TEST(Scoring, AnalyticCases) {
  const auto e12 = fixed_subspace(3, 2, {1, 0, 0, 1, 0, 0});
  EXPECT_NEAR(sps::score_candidate(e12, Tensor::matrix(2, 3, {3, 0, 0, 0, 4, 0}), PoolingStrategy::Max), 0.0, 1e-12);
  EXPECT_NEAR(sps::score_candidate(e12, Tensor::matrix(2, 3, {0, 0, 5, 0, 0, -1}), PoolingStrategy::Max), 5.0,
              1e-12);
  const auto e1 = fixed_subspace(2, 1, {1, 0});
  EXPECT_NEAR(sps::score_candidate(e1, Tensor::matrix(2, 2, {3, 1, 0, 4}), PoolingStrategy::Max), 4.0, 1e-12);
  EXPECT_THROW(sps::score_candidate(e1, Tensor::matrix(1, 3, {1, 2, 3}), PoolingStrategy::Max), sps::ShapeError);
}

TEST(Scoring, ArgminAndTieBreak) {
  EXPECT_EQ(sps::argmin_sps(scores_of({2.0, 1.5, 3.0})), 1u);
  EXPECT_EQ(sps::argmin_sps(scores_of({1.0, 1.0})), 0u);
  EXPECT_EQ(sps::argmin_sps(scores_of({3.0, 0.0, 0.0})), 1u);
  EXPECT_THROW(sps::argmin_sps({}), sps::EmptySetError);
  EXPECT_THROW(sps::rank_candidates(fixed_subspace(2, 1, {1, 0}), set_of({}), PoolingStrategy::Max),
               sps::EmptySetError);
}

TEST(Scoring, ConstructedInSubspaceCandidateWins) {
  const auto reader = sps::synthetic::make_reader({});
  const auto s = sps::build_subspace(reader.weights, 0.999, 1);
  sps::CounterRng rng(3);
  std::vector<Tensor> states;
  for (int c = 0; c < 5; ++c) {
    if (c == 3) {
      // basis * z with tiny orthogonal noise
      std::vector<float> data;
      for (int t = 0; t < 6; ++t) {
        std::vector<double> z(s.k);
        for (auto& v : z) v = rng.normal();
        for (std::size_t i = 0; i < s.dim(); ++i) {
          double x = 1e-4 * rng.normal();
          for (std::size_t j = 0; j < s.k; ++j) x += s.basis(i, j) * z[j];
          data.push_back(static_cast<float>(x));
        }
      }
      states.push_back(Tensor::matrix(6, s.dim(), data));
    } else {
      states.push_back(sps::synthetic::candidate_states(reader.frame, {6, 0.5, 1.5, 0.0}, rng));
    }
  }
  const auto r = sps::rank_candidates(s, set_of(states), PoolingStrategy::Max);
  EXPECT_EQ(r.selected_index, 3u);
  // Brute force agrees.
  std::size_t best = 0;
  for (std::size_t i = 1; i < r.scores.size(); ++i)
    if (r.scores[i].sps < r.scores[best].sps) best = i;
  EXPECT_EQ(best, 3u);
}

TEST(Scoring, ScalingAndPermutationProperties) {
  const auto reader = sps::synthetic::make_reader({});
  const auto s = sps::build_subspace(reader.weights, 0.95, 1);
  sps::CounterRng rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Tensor> states;
    for (int c = 0; c < 5; ++c) {
      states.push_back(sps::synthetic::candidate_states(reader.frame, {8, rng.uniform(), 1.5, 0.0}, rng));
    }
    const auto base = sps::rank_candidates(s, set_of(states), PoolingStrategy::Max);

    const float c = static_cast<float>(std::pow(2.0, static_cast<double>(rng.below(9)) - 4.0));
    std::vector<Tensor> scaled;
    for (const auto& t : states) {
      std::vector<float> d(t.data().begin(), t.data().end());
      for (auto& x : d) x *= c;
      scaled.push_back(Tensor::matrix(t.rows(), t.cols(), d));
    }
    const auto r2 = sps::rank_candidates(s, set_of(scaled), PoolingStrategy::Max);
    ASSERT_EQ(r2.selected_index, base.selected_index);
    for (std::size_t i = 0; i < 5; ++i) ASSERT_NEAR(r2.scores[i].sps, c * base.scores[i].sps, 1e-5 * c * base.scores[i].sps);

    std::vector<Tensor> reversed(states.rbegin(), states.rend());
    auto rev_set = set_of(reversed);
    for (std::size_t i = 0; i < 5; ++i) rev_set.candidates[i].candidate_id = "c" + std::to_string(4 - i);
    const auto r3 = sps::rank_candidates(s, rev_set, PoolingStrategy::Max);
    ASSERT_EQ(r3.scores[r3.selected_index].candidate_id, base.scores[base.selected_index].candidate_id);
    for (std::size_t i = 0; i < 5; ++i) ASSERT_EQ(r3.scores[4 - i].sps, base.scores[i].sps);
  }
}

TEST(Scoring, ReportShape) {
  const auto s = fixed_subspace(2, 1, {1, 0});
  const auto r = sps::rank_candidates(s, set_of({Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(1, 2, {1, 1})}),
                                      PoolingStrategy::Max);
  const auto j = sps::score_report("q", r, PoolingStrategy::Max, s);
  EXPECT_EQ(j["selected_candidate_id"], "c1");
  EXPECT_EQ(j["orientation"], "lower_is_better");
  EXPECT_EQ(j["scores"].size(), 2u);
  EXPECT_DOUBLE_EQ(j["scores"][0]["sps"].get<double>(), 2.0);
}
