#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "sps/defaults.hpp"
#include "sps/pooling.hpp"
#include "sps/sampler.hpp"

namespace sps {

/// Settings shared by the CLI subcommands. Precedence: flags, then config file, then these defaults.
struct RunConfig {
  std::string subspace_path;
  std::string manifest_dir;
  PoolingStrategy pooling = PoolingStrategy::Max;
  double variance_ratio = defaults::kVarianceRatio;
  double percentile = defaults::kThresholdPercentile;
  std::uint64_t num_candidates = defaults::kNumCandidates;
  ProbeConfig probe{};
  std::uint64_t seed = defaults::kSeed;
  std::string output_dir = "sps_out";
  unsigned jobs = defaults::kJobs;
};

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"subspace", c.subspace_path},
          {"manifests", c.manifest_dir},
          {"pooling", to_string(c.pooling)},
          {"variance_ratio", c.variance_ratio},
          {"percentile", c.percentile},
          {"num_candidates", c.num_candidates},
          {"n_probes", c.probe.n_probes},
          {"retain", c.probe.retain},
          {"sigma", c.probe.sigma},
          {"top_p_gaps", c.probe.top_p_gaps},
          {"seed", c.seed},
          {"output_dir", c.output_dir},
          {"jobs", c.jobs}};
}

}  // namespace sps
