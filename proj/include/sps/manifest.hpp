#pragma once

// Per-query candidate manifests.
//
// JSON schema (paths relative to the manifest file's directory):
//   {"query_id": str, "layer_tag": str, "gold_answers": [str]?,
//    "candidates": [{"candidate_id": str, "states_path": str,
//                    "text": str?, "token_logprobs": [number]?,
//                    "probe_vector_path": str?, "probe_state_path": str?}]}
// The two probe_* keys appear only in probe manifests.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sps/error.hpp"
#include "sps/tensor.hpp"

namespace sps {

struct CandidateEntry {
  std::string candidate_id;
  std::string states_path;
  std::optional<std::string> text;
  std::optional<std::vector<double>> token_logprobs;
  std::optional<std::string> probe_vector_path;
  std::optional<std::string> probe_state_path;
};

struct CandidateManifest {
  std::string query_id;
  std::string layer_tag;
  std::optional<std::vector<std::string>> gold_answers;
  std::vector<CandidateEntry> candidates;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& relative) const { return base_dir / relative; }
};

struct Candidate {
  std::string candidate_id;
  Tensor states;  // [T x D]
  std::optional<std::string> text;
  std::optional<std::vector<double>> token_logprobs;
};

struct CandidateSet {
  std::string query_id;
  std::vector<Candidate> candidates;

  std::size_t dim() const { return candidates.empty() ? 0 : candidates.front().states.cols(); }
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(ctx + ": missing required key \"" + key + "\"");
  return *it;
}

inline std::string require_string(const nlohmann::json& obj, const char* key, const std::string& ctx) {
  const auto& v = require(obj, key, ctx);
  if (!v.is_string()) throw SchemaError(ctx + ": \"" + key + "\" must be a string");
  return v.get<std::string>();
}

inline std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key,
                                                  const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw SchemaError(ctx + ": \"" + key + "\" must be a string");
  return it->get<std::string>();
}

}  // namespace detail

/// Validates structure and cross-references without loading any tensor.
inline CandidateManifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                                        const std::string& ctx) {
  if (!doc.is_object()) throw SchemaError(ctx + ": manifest must be a JSON object");
  CandidateManifest m;
  m.base_dir = base_dir;
  m.query_id = detail::require_string(doc, "query_id", ctx);
  m.layer_tag = detail::require_string(doc, "layer_tag", ctx);
  if (auto it = doc.find("gold_answers"); it != doc.end() && !it->is_null()) {
    if (!it->is_array()) throw SchemaError(ctx + ": \"gold_answers\" must be an array");
    std::vector<std::string> golds;
    for (const auto& g : *it) {
      if (!g.is_string()) throw SchemaError(ctx + ": gold answers must be strings");
      golds.push_back(g.get<std::string>());
    }
    m.gold_answers = std::move(golds);
  }

  const auto& cands = detail::require(doc, "candidates", ctx);
  if (!cands.is_array()) throw SchemaError(ctx + ": \"candidates\" must be an array");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const auto& c = cands[i];
    const std::string cctx = ctx + ": candidates[" + std::to_string(i) + "]";
    if (!c.is_object()) throw SchemaError(cctx + ": must be an object");
    CandidateEntry e;
    e.candidate_id = detail::require_string(c, "candidate_id", cctx);
    if (!seen.insert(e.candidate_id).second) {
      throw SchemaError(ctx + ": duplicate candidate_id \"" + e.candidate_id + "\"");
    }
    e.states_path = detail::require_string(c, "states_path", cctx);
    e.text = detail::optional_string(c, "text", cctx);
    if (auto it = c.find("token_logprobs"); it != c.end() && !it->is_null()) {
      if (!it->is_array()) throw SchemaError(cctx + ": \"token_logprobs\" must be an array");
      std::vector<double> lp;
      lp.reserve(it->size());
      for (const auto& v : *it) {
        if (!v.is_number()) throw SchemaError(cctx + ": token_logprobs must be numbers");
        lp.push_back(v.get<double>());
      }
      e.token_logprobs = std::move(lp);
    }
    e.probe_vector_path = detail::optional_string(c, "probe_vector_path", cctx);
    e.probe_state_path = detail::optional_string(c, "probe_state_path", cctx);

    for (const auto* p : {&e.states_path}) {
      if (!std::filesystem::is_regular_file(m.resolve(*p))) {
        throw SchemaError(cctx + ": states file not found: " + m.resolve(*p).string());
      }
    }
    for (const auto& p : {e.probe_vector_path, e.probe_state_path}) {
      if (p && !std::filesystem::is_regular_file(m.resolve(*p))) {
        throw SchemaError(cctx + ": probe file not found: " + m.resolve(*p).string());
      }
    }
    m.candidates.push_back(std::move(e));
  }
  return m;
}

inline CandidateManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open manifest");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_manifest(doc, path.parent_path(), path.string());
}

/// Probe manifests: entry 0 is the unprobed original, every later entry names its probe vector.
inline CandidateManifest read_probe_manifest(const std::filesystem::path& path) {
  auto m = read_manifest(path);
  if (m.candidates.empty()) throw SchemaError(path.string() + ": probe manifest has no entries");
  if (m.candidates.front().probe_vector_path) {
    throw SchemaError(path.string() + ": entry 0 must be the unprobed original summary");
  }
  for (std::size_t i = 1; i < m.candidates.size(); ++i) {
    if (!m.candidates[i].probe_vector_path) {
      throw SchemaError(path.string() + ": entry " + std::to_string(i) + " lacks probe_vector_path");
    }
  }
  return m;
}

inline nlohmann::json manifest_to_json(const CandidateManifest& m) {
  nlohmann::json doc;
  doc["query_id"] = m.query_id;
  doc["layer_tag"] = m.layer_tag;
  if (m.gold_answers) doc["gold_answers"] = *m.gold_answers;
  doc["candidates"] = nlohmann::json::array();
  for (const auto& e : m.candidates) {
    nlohmann::json c;
    c["candidate_id"] = e.candidate_id;
    c["states_path"] = e.states_path;
    if (e.text) c["text"] = *e.text;
    if (e.token_logprobs) c["token_logprobs"] = *e.token_logprobs;
    if (e.probe_vector_path) c["probe_vector_path"] = *e.probe_vector_path;
    if (e.probe_state_path) c["probe_state_path"] = *e.probe_state_path;
    doc["candidates"].push_back(std::move(c));
  }
  return doc;
}

inline void write_manifest(const CandidateManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << manifest_to_json(m).dump(2) << '\n';
  if (!out) throw IoError(path.string() + ": write failed");
}

/// Loads every referenced tensor and checks the cross-tensor invariants.
inline CandidateSet load_candidate_set(const CandidateManifest& m) {
  CandidateSet set;
  set.query_id = m.query_id;
  std::optional<std::size_t> dim;
  for (const auto& e : m.candidates) {
    auto states = read_tensor_file(m.resolve(e.states_path));
    if (states.rank() != 2) {
      throw SchemaError(m.query_id + "/" + e.candidate_id + ": states tensor must be rank 2");
    }
    if (dim && *dim != states.cols()) {
      throw SchemaError(m.query_id + "/" + e.candidate_id + ": hidden size " +
                        std::to_string(states.cols()) + " differs from " + std::to_string(*dim));
    }
    dim = states.cols();
    if (e.token_logprobs && e.token_logprobs->size() != states.rows()) {
      throw SchemaError(m.query_id + "/" + e.candidate_id + ": " +
                        std::to_string(e.token_logprobs->size()) + " token_logprobs for " +
                        std::to_string(states.rows()) + " token states");
    }
    set.candidates.push_back({e.candidate_id, std::move(states), e.text, e.token_logprobs});
  }
  return set;
}

/// All *.json files directly inside dir, in lexicographic filename order.
inline std::vector<std::filesystem::path> list_manifests(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + ": not a directory");
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace sps
