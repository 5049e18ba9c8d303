#pragma once

// Metric-quality evaluation: perplexity, EM/F1, ten-bin Pearson correlation,
// within-query pairwise AUROC and answer entropy.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sps/error.hpp"
#include "sps/text.hpp"

namespace sps {

enum class Orientation { LowerBetter, HigherBetter };

inline std::string to_string(Orientation o) { return o == Orientation::LowerBetter ? "lower" : "higher"; }

inline Orientation parse_orientation(const std::string& s) {
  if (s == "lower") return Orientation::LowerBetter;
  if (s == "higher") return Orientation::HigherBetter;
  throw ConfigError("unknown orientation \"" + s + "\" (expected lower|higher)");
}

/// True when `a` ranks strictly better than `b` under the orientation.
inline bool better(double a, double b, Orientation o) { return o == Orientation::LowerBetter ? a < b : a > b; }

struct CandidateOutcome {
  std::string candidate_id;
  std::map<std::string, double> metric_scores;
  int em = 0;
  double f1 = 0.0;
};

struct QaRecord {
  std::string query_id;
  std::string prediction;
  std::vector<std::string> gold_answers;
  std::vector<CandidateOutcome> per_candidate;
};

inline constexpr std::size_t kNumBins = 10;

struct Bin {
  double mean_em = 0.0;
  double mean_f1 = 0.0;
  std::uint64_t count = 0;
};

struct BinReport {
  std::string metric_name;
  Orientation orientation = Orientation::LowerBetter;
  std::array<Bin, kNumBins> bins{};
  // Pearson r between bin index (0 = best-ranked) and per-bin mean performance.
  // A useful metric puts good candidates in low bins, so r is negative.
  double pcc_em = 0.0;
  double pcc_f1 = 0.0;
  bool degenerate_em = false;
  bool degenerate_f1 = false;

  // Sign-flipped r: positive when the metric's better-ranked bins perform better.
  double aligned_pcc_em() const { return -pcc_em; }
  double aligned_pcc_f1() const { return -pcc_f1; }
};

/// exp of the negative mean natural-log token probability.
inline double ppl(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) throw EmptySequenceError("perplexity of an empty sequence");
  double sum = 0.0;
  for (std::size_t i = 0; i < token_logprobs.size(); ++i) {
    const double lp = token_logprobs[i];
    if (!std::isfinite(lp)) throw DataError("non-finite log-probability at position " + std::to_string(i));
    if (lp > 0.0) throw DataError("positive log-probability at position " + std::to_string(i));
    sum += lp;
  }
  return std::exp(-sum / static_cast<double>(token_logprobs.size()));
}

struct EmF1 {
  int em = 0;
  double f1 = 0.0;
};

namespace detail {

inline double token_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() || gold.empty()) return pred == gold ? 1.0 : 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : gold) ++counts[t];
  int common = 0;
  for (const auto& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(common) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace detail

/// EM against any gold; F1 is the best whitespace-token multiset F1 over golds.
inline EmF1 em_f1(std::string_view prediction, const std::vector<std::string>& golds,
                  const NormalizeOptions& opt = {}) {
  if (golds.empty()) throw EvalError("em_f1 needs at least one gold answer");
  const auto pred = normalize_answer(prediction, opt);
  const auto pred_tokens = split_whitespace(pred);
  EmF1 out;
  for (const auto& g : golds) {
    const auto gold = normalize_answer(g, opt);
    if (gold == pred) out.em = 1;
    out.f1 = std::max(out.f1, detail::token_f1(pred_tokens, split_whitespace(gold)));
  }
  return out;
}

/// Pearson r in fixed summation order; nullopt when either side has zero variance.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw EvalError("pearson needs two equal-length series of size >= 2");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  // Relative cutoff: per-bin means that agree up to rounding count as constant.
  const double scale_y = std::max(1.0, my * my) * n;
  if (sxx == 0.0 || syy <= 1e-24 * scale_y) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace detail {

inline double metric_of(const QaRecord& r, const CandidateOutcome& c, const std::string& metric) {
  auto it = c.metric_scores.find(metric);
  if (it == c.metric_scores.end()) {
    throw EvalError("query " + r.query_id + ", candidate " + c.candidate_id + ": missing metric \"" + metric + "\"");
  }
  return it->second;
}

}  // namespace detail

/// Candidate indices of a record ordered best-first by the metric; stable on ties.
inline std::vector<std::size_t> rank_by_metric(const QaRecord& r, const std::string& metric, Orientation o) {
  std::vector<double> values;
  values.reserve(r.per_candidate.size());
  for (const auto& c : r.per_candidate) values.push_back(detail::metric_of(r, c, metric));
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return better(values[a], values[b], o); });
  return order;
}

/// Groups every query's candidates into ten ordered bins by the metric and
/// correlates bin index with per-bin mean EM / F1.
///
/// With K candidates per query, rank j goes to bin floor(10 j / K); K = 10 is one per bin.
inline BinReport bin_pcc(const std::vector<QaRecord>& records, const std::string& metric, Orientation o) {
  if (records.empty()) throw EvalError("bin_pcc needs at least one record");
  std::array<double, kNumBins> em_sum{}, f1_sum{};
  std::array<std::uint64_t, kNumBins> counts{};
  for (const auto& r : records) {
    const auto k = r.per_candidate.size();
    if (k < kNumBins) {
      throw EvalError("query " + r.query_id + " has " + std::to_string(k) + " candidates, binning needs at least " +
                      std::to_string(kNumBins));
    }
    const auto order = rank_by_metric(r, metric, o);
    for (std::size_t j = 0; j < k; ++j) {
      const auto bin = j * kNumBins / k;
      const auto& c = r.per_candidate[order[j]];
      em_sum[bin] += c.em;
      f1_sum[bin] += c.f1;
      ++counts[bin];
    }
  }
  BinReport rep;
  rep.metric_name = metric;
  rep.orientation = o;
  std::vector<double> idx(kNumBins), em(kNumBins), f1(kNumBins);
  for (std::size_t b = 0; b < kNumBins; ++b) {
    rep.bins[b] = {em_sum[b] / static_cast<double>(counts[b]), f1_sum[b] / static_cast<double>(counts[b]), counts[b]};
    idx[b] = static_cast<double>(b);
    em[b] = rep.bins[b].mean_em;
    f1[b] = rep.bins[b].mean_f1;
  }
  const auto pe = pearson(idx, em);
  const auto pf = pearson(idx, f1);
  rep.pcc_em = pe.value_or(0.0);
  rep.pcc_f1 = pf.value_or(0.0);
  rep.degenerate_em = !pe.has_value();
  rep.degenerate_f1 = !pf.has_value();
  return rep;
}

struct AurocResult {
  double auroc = 0.5;
  std::uint64_t pairs = 0;
};

/// Fraction of within-query (EM=1, EM=0) pairs the metric orders correctly; ties count 1/2.
inline AurocResult pairwise_auroc(const std::vector<QaRecord>& records, const std::string& metric, Orientation o) {
  double wins = 0.0;
  std::uint64_t pairs = 0;
  for (const auto& r : records) {
    std::vector<double> pos, neg;
    for (const auto& c : r.per_candidate) {
      (c.em == 1 ? pos : neg).push_back(detail::metric_of(r, c, metric));
    }
    for (double p : pos) {
      for (double n : neg) {
        if (better(p, n, o)) {
          wins += 1.0;
        } else if (!better(n, p, o)) {
          wins += 0.5;
        }
        ++pairs;
      }
    }
  }
  if (pairs == 0) throw EvalError("no (correct, incorrect) candidate pair within any query");
  return {wins / static_cast<double>(pairs), pairs};
}

enum class EntropyBase { Nats, Bits };

/// Mean Shannon entropy over positions; each position is a log-probability distribution.
inline double answer_entropy(const std::vector<std::vector<double>>& distributions,
                             EntropyBase base = EntropyBase::Nats) {
  if (distributions.empty()) throw EmptySequenceError("no distributions to average");
  double total = 0.0;
  for (std::size_t i = 0; i < distributions.size(); ++i) {
    const auto& d = distributions[i];
    if (d.empty()) throw DataError("distribution " + std::to_string(i) + " is empty");
    double mass = 0.0, h = 0.0;
    for (double lp : d) {
      if (std::isnan(lp) || lp > 1e-12) throw DataError("distribution " + std::to_string(i) + " has invalid log-probability");
      const double p = std::exp(lp);
      mass += p;
      if (p > 0.0) h -= p * lp;
    }
    if (std::abs(mass - 1.0) > 1e-4) {
      throw DataError("distribution " + std::to_string(i) + " sums to " + std::to_string(mass) + ", not 1");
    }
    total += h;
  }
  const double mean = total / static_cast<double>(distributions.size());
  return base == EntropyBase::Bits ? mean / std::numbers::ln2 : mean;
}

struct QaSummary {
  double mean_em = 0.0;
  double mean_f1 = 0.0;
  std::uint64_t count = 0;
};

/// Mean EM/F1 of each record's top-level prediction.
inline QaSummary evaluate_predictions(const std::vector<QaRecord>& records, const NormalizeOptions& opt = {}) {
  if (records.empty()) throw EvalError("no records");
  QaSummary s;
  for (const auto& r : records) {
    const auto m = em_f1(r.prediction, r.gold_answers, opt);
    s.mean_em += m.em;
    s.mean_f1 += m.f1;
  }
  s.count = records.size();
  s.mean_em /= static_cast<double>(s.count);
  s.mean_f1 /= static_cast<double>(s.count);
  return s;
}

/// Mean EM/F1 of the candidate each query would pick under the metric.
inline QaSummary evaluate_selection(const std::vector<QaRecord>& records, const std::string& metric, Orientation o) {
  if (records.empty()) throw EvalError("no records");
  QaSummary s;
  for (const auto& r : records) {
    if (r.per_candidate.empty()) throw EvalError("query " + r.query_id + " has no candidates");
    const auto& c = r.per_candidate[rank_by_metric(r, metric, o).front()];
    s.mean_em += c.em;
    s.mean_f1 += c.f1;
  }
  s.count = records.size();
  s.mean_em /= static_cast<double>(s.count);
  s.mean_f1 /= static_cast<double>(s.count);
  return s;
}

// Records file: a JSON array of
//   {"query_id", "prediction"?, "gold_answers": [str],
//    "per_candidate": [{"candidate_id", "metric_scores": {name: number},
//                       "em"?, "f1"?, "prediction"?}]}
// A candidate without em/f1 must carry "prediction"; it is scored against the golds.
inline std::vector<QaRecord> records_from_json(const nlohmann::json& doc, const NormalizeOptions& opt = {}) {
  if (!doc.is_array()) throw SchemaError("records document must be a JSON array");
  std::vector<QaRecord> out;
  out.reserve(doc.size());
  try {
    for (const auto& j : doc) {
      QaRecord r;
      r.query_id = j.at("query_id").get<std::string>();
      r.prediction = j.value("prediction", std::string());
      r.gold_answers = j.at("gold_answers").get<std::vector<std::string>>();
      if (r.gold_answers.empty()) throw SchemaError("query " + r.query_id + ": gold_answers is empty");
      for (const auto& c : j.value("per_candidate", nlohmann::json::array())) {
        CandidateOutcome o;
        o.candidate_id = c.at("candidate_id").get<std::string>();
        o.metric_scores = c.value("metric_scores", std::map<std::string, double>{});
        if (c.contains("em")) {
          o.em = c.at("em").get<int>();
          o.f1 = c.at("f1").get<double>();
        } else if (c.contains("prediction")) {
          const auto m = em_f1(c.at("prediction").get<std::string>(), r.gold_answers, opt);
          o.em = m.em;
          o.f1 = m.f1;
        } else {
          throw SchemaError("query " + r.query_id + ", candidate " + o.candidate_id + ": needs em/f1 or prediction");
        }
        if ((o.em != 0 && o.em != 1) || !(o.f1 >= 0.0 && o.f1 <= 1.0)) {
          throw SchemaError("query " + r.query_id + ", candidate " + o.candidate_id + ": em must be 0|1, f1 in [0,1]");
        }
        r.per_candidate.push_back(std::move(o));
      }
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("records: ") + e.what());
  }
  return out;
}

inline nlohmann::json to_json(const QaRecord& r) {
  nlohmann::json j;
  j["query_id"] = r.query_id;
  j["prediction"] = r.prediction;
  j["gold_answers"] = r.gold_answers;
  j["per_candidate"] = nlohmann::json::array();
  for (const auto& c : r.per_candidate) {
    j["per_candidate"].push_back(
        {{"candidate_id", c.candidate_id}, {"metric_scores", c.metric_scores}, {"em", c.em}, {"f1", c.f1}});
  }
  return j;
}

inline std::vector<QaRecord> read_records(const std::filesystem::path& path, const NormalizeOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open records file");
  try {
    return records_from_json(nlohmann::json::parse(in), opt);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

inline nlohmann::json to_json(const BinReport& r) {
  nlohmann::json bins = nlohmann::json::array();
  for (std::size_t b = 0; b < kNumBins; ++b) {
    bins.push_back({{"bin", b}, {"mean_em", r.bins[b].mean_em}, {"mean_f1", r.bins[b].mean_f1}, {"count", r.bins[b].count}});
  }
  return {{"metric", r.metric_name},
          {"orientation", to_string(r.orientation)},
          {"bins", std::move(bins)},
          {"pcc_em", r.pcc_em},
          {"pcc_f1", r.pcc_f1},
          {"aligned_pcc_em", r.aligned_pcc_em()},
          {"aligned_pcc_f1", r.aligned_pcc_f1()},
          {"degenerate_em", r.degenerate_em},
          {"degenerate_f1", r.degenerate_f1}};
}

}  // namespace sps
