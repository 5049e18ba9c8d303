#pragma once

// Probe-based candidate generation for embedding compression: Gaussian probes,
// the top-gap diversity score of the hidden state at the probe position, and
// retention of the M lowest-scoring probes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sps/defaults.hpp"
#include "sps/error.hpp"
#include "sps/manifest.hpp"
#include "sps/random.hpp"
#include "sps/scoring.hpp"
#include "sps/tensor.hpp"

namespace sps {

struct ProbeConfig {
  std::uint64_t n_probes = defaults::kNumProbes;
  std::uint64_t retain = defaults::kRetainedProbes;
  std::uint64_t probe_dim = 0;
  double sigma = defaults::kProbeSigma;
  std::uint64_t top_p_gaps = defaults::kTopGaps;
  std::uint64_t seed = defaults::kSeed;

  void validate() const {
    if (n_probes == 0) throw ConfigError("n_probes must be >= 1");
    if (retain > n_probes) throw ConfigError("retain must not exceed n_probes");
    if (top_p_gaps < 1) throw ConfigError("top_p_gaps must be >= 1");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("probe sigma must be positive and finite");
    if (probe_dim == 0) throw ConfigError("probe_dim must be >= 1");
  }
};

struct ProbeResult {
  std::uint64_t probe_index = 0;
  Tensor probe_vector;
  double s_probe = 0.0;
};

/// N probes with i.i.d. N(0, sigma^2) entries, drawn sequentially from one seeded stream.
inline std::vector<Tensor> generate_probes(const ProbeConfig& cfg) {
  cfg.validate();
  CounterRng rng(cfg.seed);
  std::vector<Tensor> probes;
  probes.reserve(cfg.n_probes);
  for (std::uint64_t r = 0; r < cfg.n_probes; ++r) {
    std::vector<float> v(cfg.probe_dim);
    for (auto& x : v) x = static_cast<float>(rng.normal(0.0, cfg.sigma));
    probes.push_back(Tensor::vector(std::move(v)));
  }
  return probes;
}

/// Root-mean-square of a vector; probe sigma is usually given relative to it.
inline double rms(std::span<const float> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

/// Sum of squared gaps between consecutive order statistics among the p+1 largest entries of h.
inline double s_probe(std::span<const float> h, std::uint64_t p) {
  if (p < 1) throw ConfigError("number of gaps p must be >= 1");
  if (p >= h.size()) {
    throw ConfigError("number of gaps p=" + std::to_string(p) + " requires more than " + std::to_string(p) +
                      " coordinates, vector has " + std::to_string(h.size()));
  }
  std::vector<double> v(h.begin(), h.end());
  std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(p + 1), v.end(), std::greater<>());
  double s = 0.0;
  for (std::uint64_t i = 0; i < p; ++i) {
    const double gap = v[i] - v[i + 1];
    s += gap * gap;
  }
  return s;
}

inline double s_probe(const Tensor& h, std::uint64_t p) {
  if (h.rank() != 1) throw ShapeError("probe hidden state must be a rank-1 vector");
  return s_probe(h.data(), p);
}

/// The `retain` results with the smallest S_probe, ascending, ties by probe_index.
inline std::vector<ProbeResult> select_probes(std::vector<ProbeResult> results, std::uint64_t retain) {
  if (retain > results.size()) {
    throw ConfigError("cannot retain " + std::to_string(retain) + " of " + std::to_string(results.size()) +
                      " probes");
  }
  std::stable_sort(results.begin(), results.end(), [](const ProbeResult& a, const ProbeResult& b) {
    if (a.s_probe != b.s_probe) return a.s_probe < b.s_probe;
    return a.probe_index < b.probe_index;
  });
  results.resize(retain);
  return results;
}

struct ProbeSelection {
  std::string query_id;
  std::vector<ProbeResult> all;            // manifest order
  std::vector<ProbeResult> retained;       // ascending S_probe
  std::vector<std::uint64_t> candidate_rows;  // manifest rows scored by SPS: 0 then retained probes
  Ranking ranking;                         // over candidate_rows
  std::string selected_candidate_id;
};

/// Runs retention and SPS selection over a probe manifest.
///
/// Entry 0 is the original embedding summary; entry r >= 1 is the variant built
/// with probe r-1. The probe-position hidden state h_r is `probe_state_path` when
/// given, otherwise the last row of the entry's token states (the probe is the
/// final position of the fused input).
inline ProbeSelection select_probed_candidate(const CandidateManifest& m, const PrincipalSubspace& s,
                                              std::uint64_t retain, std::uint64_t top_p_gaps,
                                              PoolingStrategy strategy) {
  const auto set = load_candidate_set(m);
  ProbeSelection out;
  out.query_id = m.query_id;
  for (std::size_t i = 1; i < m.candidates.size(); ++i) {
    const auto& e = m.candidates[i];
    ProbeResult r;
    r.probe_index = i - 1;
    r.probe_vector = read_tensor_file(m.resolve(*e.probe_vector_path));
    if (r.probe_vector.rank() != 1) throw SchemaError(e.candidate_id + ": probe vector must be rank 1");
    if (e.probe_state_path) {
      const auto h = read_tensor_file(m.resolve(*e.probe_state_path));
      r.s_probe = s_probe(h, top_p_gaps);
    } else {
      const auto& states = set.candidates[i].states;
      r.s_probe = s_probe(states.row(states.rows() - 1), top_p_gaps);
    }
    out.all.push_back(std::move(r));
  }
  out.retained = select_probes(out.all, retain);

  CandidateSet pool_set;
  pool_set.query_id = m.query_id;
  out.candidate_rows.push_back(0);
  pool_set.candidates.push_back(set.candidates[0]);
  for (const auto& r : out.retained) {
    out.candidate_rows.push_back(r.probe_index + 1);
    pool_set.candidates.push_back(set.candidates[r.probe_index + 1]);
  }
  out.ranking = rank_candidates(s, pool_set, strategy);
  for (auto& sc : out.ranking.scores) sc.manifest_index = out.candidate_rows[sc.manifest_index];
  out.selected_candidate_id = out.ranking.scores[out.ranking.selected_index].candidate_id;
  return out;
}

}  // namespace sps
