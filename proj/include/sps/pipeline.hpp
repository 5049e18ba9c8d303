#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "sps/gatekeeper.hpp"
#include "sps/manifest.hpp"
#include "sps/pooling.hpp"
#include "sps/subspace.hpp"

namespace sps {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index is written by
/// exactly one worker, so per-index outputs stay deterministic. The first
/// exception (lowest index) is rethrown after all workers join.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (unsigned w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct CalibrationResult {
  Threshold threshold;
  std::vector<std::string> skipped;  // degenerate initial summaries
};

/// Norm ratios of the initial summaries (candidate 0) of every manifest in `dir`.
inline CalibrationResult calibrate_from_manifests(const std::filesystem::path& dir, double percentile) {
  CalibrationResult out;
  std::vector<double> ratios;
  for (const auto& path : list_manifests(dir)) {
    const auto m = read_manifest(path);
    if (m.candidates.empty()) throw SchemaError(path.string() + ": no candidates");
    const auto states = read_tensor_file(m.resolve(m.candidates.front().states_path));
    if (states.rank() != 2) throw SchemaError(path.string() + ": initial states must be rank 2");
    try {
      ratios.push_back(norm_ratio(states));
    } catch (const DegenerateInputError&) {
      out.skipped.push_back(m.query_id);
    }
  }
  out.threshold = calibrate_threshold(std::move(ratios), percentile);
  return out;
}

struct RunSummary {
  std::uint64_t queries = 0;
  std::uint64_t sampled = 0;
  std::uint64_t accepted_initial = 0;
  std::uint64_t errors = 0;
  double skip_rate = 0.0;          // accepted_initial / (queries - errors)
  double mean_selected_sps = 0.0;  // over sampled queries
};

inline RunSummary summarize(const std::vector<Decision>& decisions) {
  RunSummary s;
  s.queries = decisions.size();
  double sps_sum = 0.0;
  for (const auto& d : decisions) {
    if (d.error) {
      ++s.errors;
    } else if (d.sampled) {
      ++s.sampled;
      sps_sum += (*d.scores)[d.selected_index].sps;
    } else {
      ++s.accepted_initial;
    }
  }
  const auto decided = s.queries - s.errors;
  s.skip_rate = decided > 0 ? static_cast<double>(s.accepted_initial) / static_cast<double>(decided) : 0.0;
  s.mean_selected_sps = s.sampled > 0 ? sps_sum / static_cast<double>(s.sampled) : 0.0;
  return s;
}

inline nlohmann::json to_json(const RunSummary& s) {
  return {{"queries", s.queries},
          {"sampled", s.sampled},
          {"accepted_initial", s.accepted_initial},
          {"errors", s.errors},
          {"skip_rate", s.skip_rate},
          {"mean_selected_sps", s.mean_selected_sps}};
}

/// Decisions for every manifest in `dir`, in manifest filename order.
inline std::vector<Decision> run_decisions(const std::filesystem::path& dir, const PrincipalSubspace& s,
                                           const Threshold& t, PoolingStrategy strategy, unsigned jobs) {
  const auto paths = list_manifests(dir);
  std::vector<Decision> out(paths.size());
  parallel_for(paths.size(), jobs, [&](std::size_t i) {
    const auto m = read_manifest(paths[i]);
    out[i] = decide(load_candidate_set(m), s, t, strategy);
  });
  return out;
}

}  // namespace sps
