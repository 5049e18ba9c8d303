#pragma once

#include <cstdint>

namespace sps::defaults {

// Retained-variance target for the principal subspace.
inline constexpr double kVarianceRatio = 0.95;
// Norm-ratio threshold sits at the 70th percentile: the top 30% of
// validation ratios lie above it.
inline constexpr double kThresholdPercentile = 0.70;
// Summary candidates sampled per query by the extractor.
inline constexpr std::uint64_t kNumCandidates = 5;

// Probe path (embedding compression).
inline constexpr std::uint64_t kNumProbes = 16;
inline constexpr std::uint64_t kRetainedProbes = 4;
inline constexpr std::uint64_t kTopGaps = 8;
inline constexpr double kProbeSigma = 0.01;

// Randomized SVD takes over above this min(D, M).
inline constexpr std::uint64_t kDenseSvdCutoff = 512;
inline constexpr std::uint64_t kSvdOversampling = 10;
inline constexpr std::uint64_t kSvdPowerIterations = 4;

inline constexpr std::uint64_t kSeed = 42;
inline constexpr unsigned kJobs = 1;

}  // namespace sps::defaults
