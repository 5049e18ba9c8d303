#pragma once

// Spectrum Projection Score: residual norm of a pooled summary vector outside
// the reader's principal subspace. Lower is better.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sps/error.hpp"
#include "sps/manifest.hpp"
#include "sps/pooling.hpp"
#include "sps/subspace.hpp"

namespace sps {

struct ScoredCandidate {
  std::string candidate_id;
  double sps = 0.0;
  double pooled_norm = 0.0;
  std::uint64_t manifest_index = 0;
};

struct Ranking {
  std::uint64_t selected_index = 0;
  std::vector<ScoredCandidate> scores;  // manifest order
};

inline double l2_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

inline double score_candidate(const PrincipalSubspace& s, const Tensor& states, PoolingStrategy strategy) {
  if (states.rank() == 2 && states.cols() != s.dim()) {
    throw ShapeError("token states have hidden size " + std::to_string(states.cols()) + ", subspace has " +
                     std::to_string(s.dim()));
  }
  return residual_norm(s, pool(states, strategy));
}

/// argmin of the scores with the lowest index winning ties.
inline std::uint64_t argmin_sps(const std::vector<ScoredCandidate>& scores) {
  if (scores.empty()) throw EmptySetError("no candidates to select from");
  std::uint64_t best = 0;
  for (std::uint64_t i = 1; i < scores.size(); ++i) {
    if (scores[i].sps < scores[best].sps) best = i;
  }
  return best;
}

inline Ranking rank_candidates(const PrincipalSubspace& s, const CandidateSet& set, PoolingStrategy strategy) {
  if (set.candidates.empty()) throw EmptySetError("query " + set.query_id + " has no candidates");
  Ranking out;
  out.scores.reserve(set.candidates.size());
  for (std::uint64_t i = 0; i < set.candidates.size(); ++i) {
    const auto& c = set.candidates[i];
    if (c.states.cols() != s.dim()) {
      throw ShapeError(set.query_id + "/" + c.candidate_id + ": hidden size " + std::to_string(c.states.cols()) +
                       " does not match subspace dimension " + std::to_string(s.dim()));
    }
    const auto pooled = pool(c.states, strategy);
    out.scores.push_back({c.candidate_id, residual_norm(s, pooled), l2_norm(pooled.data()), i});
  }
  out.selected_index = argmin_sps(out.scores);
  return out;
}

inline nlohmann::json to_json(const ScoredCandidate& c) {
  return {{"candidate_id", c.candidate_id},
          {"sps", c.sps},
          {"pooled_norm", c.pooled_norm},
          {"manifest_index", c.manifest_index}};
}

/// Per-query score report.
inline nlohmann::json score_report(const std::string& query_id, const Ranking& r, PoolingStrategy strategy,
                                   const PrincipalSubspace& s) {
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& c : r.scores) scores.push_back(to_json(c));
  return {{"query_id", query_id},
          {"selected_candidate_id", r.scores.at(r.selected_index).candidate_id},
          {"selected_index", r.selected_index},
          {"orientation", "lower_is_better"},
          {"scores", std::move(scores)},
          {"pooling", to_string(strategy)},
          {"subspace_fingerprint", s.source_fingerprint}};
}

}  // namespace sps
