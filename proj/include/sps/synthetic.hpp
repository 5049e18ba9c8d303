#pragma once

// Seeded synthetic data standing in for model dumps.
//
// Reader weights: W = A * diag(decay) * B + noise, with A [D x rank] having
// orthonormal columns, so the principal subspace is (close to) span(A).
//
// Token states for a candidate with misalignment a in [0, 1]:
//   x_t = offset + A z_t + a * spread * (I - A A^T) xi_t,  z_t, xi_t ~ N(0, I)
// so the pooled residual outside span(A), and hence SPS, grows with a.
//
// QA outcome model (qa_corpus): a candidate is correct with probability
// sigmoid(steepness * (midpoint - a)); F1 is 1 when correct, otherwise a
// partial overlap that also shrinks with a. Token log-probabilities are drawn
// independently of everything else, so perplexity carries no signal.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "sps/eval.hpp"
#include "sps/manifest.hpp"
#include "sps/pooling.hpp"
#include "sps/random.hpp"
#include "sps/sampler.hpp"
#include "sps/scoring.hpp"
#include "sps/subspace.hpp"
#include "sps/tensor.hpp"

namespace sps::synthetic {

inline Tensor gaussian_matrix(std::uint64_t rows, std::uint64_t cols, std::uint64_t seed, double sigma = 1.0) {
  CounterRng rng(seed);
  std::vector<float> data(rows * cols);
  for (auto& x : data) x = static_cast<float>(rng.normal(0.0, sigma));
  return Tensor::matrix(rows, cols, std::move(data));
}

/// Orthonormal D x rank frame from a seeded Gaussian matrix.
inline Eigen::MatrixXd random_frame(std::uint64_t dim, std::uint64_t rank, std::uint64_t seed) {
  CounterRng rng(seed);
  Eigen::MatrixXd g(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(rank));
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
}

struct ReaderSpec {
  std::uint64_t dim = 32;
  std::uint64_t vocab = 256;
  std::uint64_t rank = 6;
  double noise = 0.02;
  std::uint64_t seed = 7;
};

struct Reader {
  Eigen::MatrixXd frame;  // D x rank, orthonormal
  Tensor weights;         // D x vocab
};

inline Reader make_reader(const ReaderSpec& spec) {
  Reader r;
  r.frame = random_frame(spec.dim, spec.rank, spec.seed);
  CounterRng rng(spec.seed + 1);
  Eigen::MatrixXd b(static_cast<Eigen::Index>(spec.rank), static_cast<Eigen::Index>(spec.vocab));
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    const double scale = 3.0 * std::pow(0.8, static_cast<double>(i));
    for (Eigen::Index j = 0; j < b.cols(); ++j) b(i, j) = scale * rng.normal();
  }
  Eigen::MatrixXd w = r.frame * b;
  std::vector<float> data(spec.dim * spec.vocab);
  for (std::uint64_t i = 0; i < spec.dim; ++i) {
    for (std::uint64_t j = 0; j < spec.vocab; ++j) {
      data[i * spec.vocab + j] = static_cast<float>(w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
                                                    spec.noise * rng.normal());
    }
  }
  r.weights = Tensor::matrix(spec.dim, spec.vocab, std::move(data));
  return r;
}

struct StateSpec {
  std::uint64_t tokens = 12;
  double misalignment = 0.5;
  double spread = 1.5;
  double offset = 0.0;  // constant added to every coordinate; large values raise the norm ratio
};

inline Tensor candidate_states(const Eigen::MatrixXd& frame, const StateSpec& spec, CounterRng& rng) {
  const auto d = frame.rows();
  const auto r = frame.cols();
  std::vector<float> data(spec.tokens * static_cast<std::uint64_t>(d));
  Eigen::VectorXd z(r), xi(d);
  for (std::uint64_t t = 0; t < spec.tokens; ++t) {
    for (Eigen::Index i = 0; i < r; ++i) z(i) = rng.normal();
    for (Eigen::Index i = 0; i < d; ++i) xi(i) = rng.normal();
    const Eigen::VectorXd orth = xi - frame * (frame.transpose() * xi);
    const Eigen::VectorXd x = frame * z + spec.misalignment * spec.spread * orth;
    for (Eigen::Index i = 0; i < d; ++i) data[t * d + i] = static_cast<float>(x(i) + spec.offset);
  }
  return Tensor::matrix(spec.tokens, static_cast<std::uint64_t>(d), std::move(data));
}

inline std::vector<double> independent_logprobs(std::uint64_t n, CounterRng& rng) {
  std::vector<double> lp(n);
  for (auto& x : lp) x = -0.2 - 2.0 * rng.exponential();
  return lp;
}

inline std::string padded(const std::string& prefix, std::uint64_t i, int width = 4) {
  std::ostringstream os;
  os << prefix << std::setw(width) << std::setfill('0') << i;
  return os.str();
}

struct QaCorpusSpec {
  std::uint64_t queries = 500;
  std::uint64_t candidates = 10;
  std::uint64_t tokens = 12;
  double steepness = 8.0;
  double midpoint = 0.5;
  ReaderSpec reader{};
  std::uint64_t seed = defaults::kSeed;
};

struct QaCorpus {
  PrincipalSubspace subspace;
  std::vector<QaRecord> records;  // metric_scores: "sps" (lower), "ppl" (lower)
};

/// Scores every candidate with SPS (max pooling, default variance ratio) and PPL.
inline QaCorpus qa_corpus(const QaCorpusSpec& spec) {
  const auto reader = make_reader(spec.reader);
  QaCorpus out;
  out.subspace = build_subspace(reader.weights, defaults::kVarianceRatio, spec.seed);
  CounterRng rng(spec.seed);
  out.records.reserve(spec.queries);
  for (std::uint64_t q = 0; q < spec.queries; ++q) {
    QaRecord rec;
    rec.query_id = padded("q", q);
    rec.gold_answers = {"answer " + std::to_string(q)};
    for (std::uint64_t c = 0; c < spec.candidates; ++c) {
      const double a = rng.uniform();
      const auto states = candidate_states(reader.frame, {spec.tokens, a, 1.5, 0.0}, rng);
      const auto logprobs = independent_logprobs(spec.tokens, rng);
      const double p_correct = 1.0 / (1.0 + std::exp(-spec.steepness * (spec.midpoint - a)));
      CandidateOutcome o;
      o.candidate_id = padded("c", c, 2);
      o.em = rng.bernoulli(p_correct) ? 1 : 0;
      o.f1 = o.em == 1 ? 1.0 : 0.5 * (1.0 - a) * rng.uniform();
      o.metric_scores["sps"] = score_candidate(out.subspace, states, PoolingStrategy::Max);
      o.metric_scores["ppl"] = ppl(logprobs);
      rec.per_candidate.push_back(std::move(o));
    }
    rec.prediction = rec.per_candidate.front().em == 1 ? rec.gold_answers.front() : "unknown";
    out.records.push_back(std::move(rec));
  }
  return out;
}

struct DemoSpec {
  std::uint64_t queries = 24;
  std::uint64_t validation_queries = 40;
  std::uint64_t candidates = defaults::kNumCandidates;
  std::uint64_t tokens = 12;
  std::uint64_t probes = defaults::kNumProbes;
  ReaderSpec reader{};
  std::uint64_t seed = defaults::kSeed;
};

namespace detail {

// Offsets spread the norm ratio of initial summaries across queries.
inline double demo_offset(CounterRng& rng) { return rng.bernoulli(0.35) ? 0.5 + rng.uniform() : 0.1 * rng.uniform(); }

inline void write_query_set(const std::filesystem::path& dir, const std::string& prefix, std::uint64_t n,
                            const DemoSpec& spec, const Reader& reader, CounterRng& rng) {
  std::filesystem::create_directories(dir / "states");
  for (std::uint64_t q = 0; q < n; ++q) {
    CandidateManifest m;
    m.query_id = padded(prefix, q);
    m.layer_tag = "penultimate";
    m.gold_answers = std::vector<std::string>{"answer " + std::to_string(q)};
    const double offset = demo_offset(rng);
    for (std::uint64_t c = 0; c < spec.candidates; ++c) {
      const auto states = candidate_states(reader.frame, {spec.tokens, rng.uniform(), 1.5, offset}, rng);
      const auto id = padded("c", c, 2);
      const std::string rel = "states/" + m.query_id + "_" + id + ".spsf";
      write_tensor_file(states, dir / rel);
      m.candidates.push_back({id, rel, "summary " + id + " for " + m.query_id,
                              independent_logprobs(spec.tokens, rng), std::nullopt, std::nullopt});
    }
    m.base_dir = dir;
    write_manifest(m, dir / (m.query_id + ".json"));
  }
}

}  // namespace detail

/// Writes a demo workspace:
///   W.spsf, validation/*.json, queries/*.json (+ states/), probes/*.json (+ states/, vectors/)
inline void generate_demo_corpus(const std::filesystem::path& root, const DemoSpec& spec) {
  std::filesystem::create_directories(root);
  const auto reader = make_reader(spec.reader);
  write_tensor_file(reader.weights, root / "W.spsf");
  CounterRng rng(spec.seed);
  detail::write_query_set(root / "validation", "v", spec.validation_queries, spec, reader, rng);
  detail::write_query_set(root / "queries", "q", spec.queries, spec, reader, rng);

  // Probe manifests: the original embedding summary plus one variant per probe.
  // Each variant has its own summary states and a probe-position state
  // h_r = mixing * e_r / sigma, stored separately.
  const auto probe_dir = root / "probes";
  std::filesystem::create_directories(probe_dir / "states");
  std::filesystem::create_directories(probe_dir / "vectors");
  ProbeConfig cfg;
  cfg.n_probes = spec.probes;
  cfg.probe_dim = spec.reader.dim;
  const auto mixing = gaussian_matrix(spec.reader.dim, spec.reader.dim, spec.seed + 11);
  for (std::uint64_t q = 0; q < std::min<std::uint64_t>(spec.queries, 4); ++q) {
    CandidateManifest m;
    m.query_id = padded("p", q);
    m.layer_tag = "penultimate";
    const auto base = candidate_states(reader.frame, {spec.tokens, rng.uniform(), 1.5, 0.0}, rng);
    write_tensor_file(base, probe_dir / "states" / (m.query_id + "_orig.spsf"));
    m.candidates.push_back({"orig", "states/" + m.query_id + "_orig.spsf", std::nullopt, std::nullopt, std::nullopt,
                            std::nullopt});
    cfg.seed = spec.seed + q;
    const auto probes = generate_probes(cfg);
    for (std::uint64_t r = 0; r < probes.size(); ++r) {
      const auto id = padded("probe", r, 2);
      std::vector<float> h(spec.reader.dim);
      for (std::uint64_t i = 0; i < spec.reader.dim; ++i) {
        double acc = 0.0;
        for (std::uint64_t j = 0; j < spec.reader.dim; ++j) acc += mixing(i, j) * probes[r][j] / cfg.sigma;
        h[i] = static_cast<float>(acc);
      }
      const auto states = candidate_states(reader.frame, {spec.tokens, rng.uniform(), 1.5, 0.0}, rng);
      const std::string srel = "states/" + m.query_id + "_" + id + ".spsf";
      const std::string hrel = "states/" + m.query_id + "_" + id + "_h.spsf";
      const std::string vrel = "vectors/" + m.query_id + "_" + id + ".spsf";
      write_tensor_file(states, probe_dir / srel);
      write_tensor_file(Tensor::vector(std::move(h)), probe_dir / hrel);
      write_tensor_file(probes[r], probe_dir / vrel);
      m.candidates.push_back({id, srel, std::nullopt, std::nullopt, vrel, hrel});
    }
    write_manifest(m, probe_dir / (m.query_id + ".json"));
  }
}

}  // namespace sps::synthetic
