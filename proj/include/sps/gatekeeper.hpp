#pragma once

// Norm-guided adaptive sampling: a validation-calibrated threshold on the
// initial summary's norm ratio decides whether to accept it or to rank the
// whole candidate set by SPS.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sps/error.hpp"
#include "sps/manifest.hpp"
#include "sps/pooling.hpp"
#include "sps/scoring.hpp"
#include "sps/subspace.hpp"

namespace sps {

enum class PercentileMethod { NearestRank };

struct Threshold {
  double value = 0.0;
  double percentile = defaults::kThresholdPercentile;
  std::uint64_t calibration_size = 0;
  PercentileMethod method = PercentileMethod::NearestRank;
};

struct Decision {
  std::string query_id;
  double ratio = 0.0;
  bool sampled = false;
  std::string selected_candidate_id;
  std::uint64_t selected_index = 0;
  std::optional<std::vector<ScoredCandidate>> scores;
  std::optional<std::string> error;  // set when the query was skipped as degenerate
};

/// Nearest-rank percentile: the ceil(p * n)-th smallest value (1-based).
inline Threshold calibrate_threshold(std::vector<double> ratios, double percentile) {
  if (ratios.empty()) throw CalibrationError("no validation ratios to calibrate on");
  if (!(percentile > 0.0 && percentile < 1.0)) {
    throw ConfigError("percentile must lie in (0, 1), got " + std::to_string(percentile));
  }
  for (double r : ratios) {
    if (!std::isfinite(r)) throw CalibrationError("validation ratios must be finite");
  }
  std::sort(ratios.begin(), ratios.end());
  const auto n = ratios.size();
  // The small slack keeps p * n from landing one rank high through rounding (0.7 * 10).
  auto rank = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(n) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return {ratios[rank - 1], percentile, n, PercentileMethod::NearestRank};
}

inline Decision decide(const CandidateSet& query, const PrincipalSubspace& s, const Threshold& t,
                       PoolingStrategy strategy) {
  if (query.candidates.empty()) throw EmptySetError("query " + query.query_id + " has no candidates");
  Decision d;
  d.query_id = query.query_id;
  try {
    d.ratio = norm_ratio(query.candidates.front().states);
  } catch (const DegenerateInputError& e) {
    d.error = std::string("degenerate initial summary: ") + e.what();
    return d;
  }
  if (d.ratio > t.value) {
    d.sampled = false;
    d.selected_index = 0;
    d.selected_candidate_id = query.candidates.front().candidate_id;
    return d;
  }
  d.sampled = true;
  auto ranking = rank_candidates(s, query, strategy);
  d.selected_index = ranking.selected_index;
  d.selected_candidate_id = ranking.scores[ranking.selected_index].candidate_id;
  d.scores = std::move(ranking.scores);
  return d;
}

inline nlohmann::json to_json(const Threshold& t) {
  return {{"value", t.value},
          {"percentile", t.percentile},
          {"calibration_size", t.calibration_size},
          {"method", "nearest_rank"}};
}

inline Threshold threshold_from_json(const nlohmann::json& j, const std::string& ctx) {
  try {
    Threshold t;
    t.value = j.at("value").get<double>();
    t.percentile = j.at("percentile").get<double>();
    t.calibration_size = j.at("calibration_size").get<std::uint64_t>();
    if (j.value("method", std::string("nearest_rank")) != "nearest_rank") {
      throw SchemaError(ctx + ": unsupported percentile method");
    }
    if (t.calibration_size < 1) throw SchemaError(ctx + ": calibration_size must be >= 1");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(ctx + ": " + e.what());
  }
}

inline void save_threshold(const Threshold& t, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << to_json(t).dump(2) << '\n';
}

inline Threshold load_threshold(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open threshold file");
  try {
    return threshold_from_json(nlohmann::json::parse(in), path.string());
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

inline nlohmann::json to_json(const Decision& d) {
  nlohmann::json j;
  j["query_id"] = d.query_id;
  j["ratio"] = d.ratio;
  j["sampled"] = d.sampled;
  if (d.error) {
    j["skipped"] = true;
    j["error"] = *d.error;
    return j;
  }
  j["selected_candidate_id"] = d.selected_candidate_id;
  j["selected_index"] = d.selected_index;
  if (d.scores) {
    j["scores"] = nlohmann::json::array();
    for (const auto& c : *d.scores) j["scores"].push_back(to_json(c));
  }
  return j;
}

}  // namespace sps
