#pragma once

// Subcommand bodies for the sps CLI. Each writes its outputs under the
// configured output directory with fixed filenames and returns the JSON it
// printed, so identical inputs give byte-identical files.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sps/config.hpp"
#include "sps/sps.hpp"
#include "sps/synthetic.hpp"

namespace sps::cli {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError(path.string() + ": write failed");
}

/// File hash, or for a directory a hash over (relative path, file hash) of every file, sorted.
inline std::string input_hash(const fs::path& p) {
  if (fs::is_regular_file(p)) return file_fingerprint(p);
  if (!fs::is_directory(p)) return "missing";
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(p)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Sha256 h;
  for (const auto& f : files) {
    const auto line = fs::relative(f, p).generic_string() + " " + file_fingerprint(f) + "\n";
    h.update(line.data(), line.size());
  }
  return "sha256:" + h.hex_digest();
}

struct RunRecord {
  std::string command;
  std::vector<std::string> argv;
  std::vector<fs::path> inputs;
  std::vector<std::string> outputs;
};

inline void write_run_manifest(const fs::path& out_dir, const RunRecord& rec, const RunConfig& cfg, int exit_code,
                               const std::string& error) {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& p : rec.inputs) {
    if (p.empty()) continue;
    std::string hash;
    try {
      hash = input_hash(p);
    } catch (const std::exception&) {
      hash = "unreadable";
    }
    inputs.push_back({{"path", p.generic_string()}, {"hash", hash}});
  }
  nlohmann::json j = {{"tool", "sps"},
                      {"version", kVersion},
                      {"command", rec.command},
                      {"argv", rec.argv},
                      {"config", to_json(cfg)},
                      {"seed", cfg.seed},
                      {"inputs", std::move(inputs)},
                      {"outputs", rec.outputs},
                      {"exit_code", exit_code}};
  if (!error.empty()) j["error"] = error;
  try {
    write_json(out_dir / "run_manifest.json", j);
  } catch (const std::exception& e) {
    std::cerr << "warning: could not write run manifest: " << e.what() << '\n';
  }
}

// ---- subspace ---------------------------------------------------------------

struct SubspaceBuildArgs {
  std::string weights;
  std::string out;
  std::string rule = "variance";
  bool center = false;
};

inline void subspace_build(const RunConfig& cfg, const SubspaceBuildArgs& a, RunRecord& rec) {
  rec.inputs.push_back(a.weights);
  const auto w = read_tensor_file(a.weights);
  SubspaceOptions opt;
  opt.variance_ratio = cfg.variance_ratio;
  opt.rule = parse_retention_rule(a.rule);
  opt.center = a.center;
  opt.seed = cfg.seed;
  const auto s = build_subspace(w, opt);
  const fs::path out = a.out.empty() ? fs::path(cfg.output_dir) / "subspace" : fs::path(a.out);
  save_subspace(s, out);
  rec.outputs.push_back(out.generic_string());
  std::cout << "subspace: D=" << s.dim() << " k=" << s.k << " retained_variance=" << s.retained_variance
            << " -> " << out.generic_string() << '\n';
}

// ---- score ------------------------------------------------------------------

inline std::vector<fs::path> manifest_inputs(const std::string& single, const std::string& dir) {
  if (!single.empty()) return {fs::path(single)};
  if (dir.empty()) throw ConfigError("give --manifest FILE or --manifests DIR");
  return list_manifests(dir);
}

inline void score(const RunConfig& cfg, const std::string& manifest, RunRecord& rec) {
  if (cfg.subspace_path.empty()) throw ConfigError("--subspace is required");
  rec.inputs.push_back(cfg.subspace_path);
  rec.inputs.push_back(manifest.empty() ? cfg.manifest_dir : manifest);
  const auto s = load_subspace(cfg.subspace_path);
  const auto paths = manifest_inputs(manifest, cfg.manifest_dir);
  std::vector<nlohmann::json> reports(paths.size());
  parallel_for(paths.size(), cfg.jobs, [&](std::size_t i) {
    const auto m = read_manifest(paths[i]);
    const auto ranking = rank_candidates(s, load_candidate_set(m), cfg.pooling);
    reports[i] = score_report(m.query_id, ranking, cfg.pooling, s);
  });
  for (const auto& r : reports) {
    const auto path = fs::path(cfg.output_dir) / "scores" / (r["query_id"].get<std::string>() + ".json");
    write_json(path, r);
    rec.outputs.push_back(path.generic_string());
    std::cout << r["query_id"].get<std::string>() << " -> " << r["selected_candidate_id"].get<std::string>() << '\n';
  }
}

// ---- filter / pipeline ------------------------------------------------------

inline Threshold filter_calibrate(const RunConfig& cfg, const std::string& validation_dir, const std::string& out,
                                  RunRecord& rec) {
  const std::string dir = validation_dir.empty() ? cfg.manifest_dir : validation_dir;
  if (dir.empty()) throw ConfigError("give --validation DIR (or --manifests DIR) to calibrate on");
  rec.inputs.push_back(dir);
  const auto cal = calibrate_from_manifests(dir, cfg.percentile);
  const fs::path path = out.empty() ? fs::path(cfg.output_dir) / "threshold.json" : fs::path(out);
  save_threshold(cal.threshold, path);
  rec.outputs.push_back(path.generic_string());
  std::cout << "threshold " << cal.threshold.value << " at percentile " << cal.threshold.percentile << " over "
            << cal.threshold.calibration_size << " validation queries";
  if (!cal.skipped.empty()) std::cout << " (" << cal.skipped.size() << " degenerate skipped)";
  std::cout << '\n';
  return cal.threshold;
}

struct PipelineArgs {
  std::string threshold_file;
  bool calibrate = false;
  std::string validation;
};

inline void pipeline_run(const RunConfig& cfg, const PipelineArgs& a, RunRecord& rec) {
  if (cfg.subspace_path.empty()) throw ConfigError("--subspace is required");
  if (cfg.manifest_dir.empty()) throw ConfigError("--manifests is required");
  if (a.threshold_file.empty()) throw ConfigError("--threshold-file is required");
  rec.inputs.push_back(cfg.subspace_path);
  rec.inputs.push_back(cfg.manifest_dir);
  Threshold t;
  if (a.calibrate) {
    t = filter_calibrate(cfg, a.validation, a.threshold_file, rec);
  } else {
    rec.inputs.push_back(a.threshold_file);
    t = load_threshold(a.threshold_file);
  }
  const auto s = load_subspace(cfg.subspace_path);
  const auto decisions = run_decisions(cfg.manifest_dir, s, t, cfg.pooling, cfg.jobs);
  const fs::path out_dir = fs::path(cfg.output_dir) / "decisions";
  fs::create_directories(out_dir);
  for (const auto& d : decisions) {
    const auto path = out_dir / (d.query_id + ".json");
    write_json(path, to_json(d));
    rec.outputs.push_back(path.generic_string());
    std::cout << d.query_id << " ratio=" << d.ratio << ' '
              << (d.error ? "error: " + *d.error
                          : (d.sampled ? "sampled" : "accepted") + std::string(" -> ") + d.selected_candidate_id)
              << '\n';
  }
  const auto summary = summarize(decisions);
  nlohmann::json sj = to_json(summary);
  sj["threshold"] = to_json(t);
  sj["pooling"] = to_string(cfg.pooling);
  sj["subspace_fingerprint"] = s.source_fingerprint;
  write_json(fs::path(cfg.output_dir) / "summary.json", sj);
  rec.outputs.push_back((fs::path(cfg.output_dir) / "summary.json").generic_string());
  std::cout << "queries=" << summary.queries << " sampled=" << summary.sampled << " skip_rate=" << summary.skip_rate
            << " mean_selected_sps=" << summary.mean_selected_sps << '\n';
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string records;
  std::string metric;
  std::string orientation = "lower";
  std::string dataset;
  bool strip_articles = false;
};

inline std::string dataset_name(const EvalArgs& a) {
  return a.dataset.empty() ? fs::path(a.records).stem().string() : a.dataset;
}

inline void eval_pcc(const RunConfig& cfg, const EvalArgs& a, RunRecord& rec) {
  rec.inputs.push_back(a.records);
  const auto records = read_records(a.records, {a.strip_articles});
  auto j = to_json(bin_pcc(records, a.metric, parse_orientation(a.orientation)));
  j["dataset"] = dataset_name(a);
  const auto path = fs::path(cfg.output_dir) / ("pcc_" + a.metric + ".json");
  write_json(path, j);
  rec.outputs.push_back(path.generic_string());
  std::cout << j["dataset"].get<std::string>() << ' ' << a.metric << " PCC(EM)=" << j["aligned_pcc_em"].get<double>()
            << " PCC(F1)=" << j["aligned_pcc_f1"].get<double>() << '\n';
}

inline void eval_auroc(const RunConfig& cfg, const EvalArgs& a, RunRecord& rec) {
  rec.inputs.push_back(a.records);
  const auto records = read_records(a.records, {a.strip_articles});
  const auto r = pairwise_auroc(records, a.metric, parse_orientation(a.orientation));
  const nlohmann::json j = {{"dataset", dataset_name(a)},
                            {"metric", a.metric},
                            {"orientation", a.orientation},
                            {"auroc", r.auroc},
                            {"pairs", r.pairs}};
  const auto path = fs::path(cfg.output_dir) / ("auroc_" + a.metric + ".json");
  write_json(path, j);
  rec.outputs.push_back(path.generic_string());
  std::cout << j["dataset"].get<std::string>() << ' ' << a.metric << " AUROC=" << r.auroc << " over " << r.pairs
            << " pairs\n";
}

inline void eval_qa(const RunConfig& cfg, const EvalArgs& a, RunRecord& rec) {
  rec.inputs.push_back(a.records);
  const auto records = read_records(a.records, {a.strip_articles});
  const auto s = a.metric.empty() ? evaluate_predictions(records, {a.strip_articles})
                                  : evaluate_selection(records, a.metric, parse_orientation(a.orientation));
  const nlohmann::json j = {{"dataset", dataset_name(a)},
                            {"selection", a.metric.empty() ? "prediction" : a.metric},
                            {"em", s.mean_em},
                            {"f1", s.mean_f1},
                            {"count", s.count}};
  const auto path = fs::path(cfg.output_dir) / ("qa_" + (a.metric.empty() ? std::string("prediction") : a.metric) + ".json");
  write_json(path, j);
  rec.outputs.push_back(path.generic_string());
  std::cout << j["dataset"].get<std::string>() << " EM=" << s.mean_em << " F1=" << s.mean_f1 << '\n';
}

inline void eval_entropy(const RunConfig& cfg, const std::string& input, const std::string& base, RunRecord& rec) {
  rec.inputs.push_back(input);
  std::ifstream in(input);
  if (!in) throw IoError(input + ": cannot open");
  std::vector<std::vector<double>> dists;
  try {
    dists = nlohmann::json::parse(in).get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(input + ": expected an array of log-probability arrays: " + e.what());
  }
  EntropyBase b;
  if (base == "e") {
    b = EntropyBase::Nats;
  } else if (base == "2") {
    b = EntropyBase::Bits;
  } else {
    throw ConfigError("--base must be e or 2");
  }
  const double h = answer_entropy(dists, b);
  const nlohmann::json j = {{"positions", dists.size()}, {"base", base}, {"mean_entropy", h}};
  const auto path = fs::path(cfg.output_dir) / "entropy.json";
  write_json(path, j);
  rec.outputs.push_back(path.generic_string());
  std::cout << "mean entropy " << h << (b == EntropyBase::Nats ? " nats" : " bits") << '\n';
}

/// Rows: datasets. Columns per metric: PCC(EM), PCC(F1), AUROC.
inline void eval_table(const RunConfig& cfg, const std::vector<std::string>& records,
                       const std::vector<std::string>& metrics, RunRecord& rec) {
  if (records.empty() || metrics.empty()) throw ConfigError("eval table needs --records and --metrics");
  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream csv;
  csv << std::setprecision(6) << "dataset";
  std::vector<std::pair<std::string, Orientation>> parsed;
  for (const auto& m : metrics) {
    const auto colon = m.find(':');
    const auto name = m.substr(0, colon);
    parsed.emplace_back(name, parse_orientation(colon == std::string::npos ? "lower" : m.substr(colon + 1)));
    csv << ',' << name << "_pcc_em," << name << "_pcc_f1," << name << "_auroc";
  }
  csv << '\n';
  for (const auto& spec : records) {
    const auto eq = spec.find('=');
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    const std::string name = eq == std::string::npos ? fs::path(path).stem().string() : spec.substr(0, eq);
    rec.inputs.push_back(path);
    const auto recs = read_records(path);
    nlohmann::json row = {{"dataset", name}};
    csv << name;
    for (const auto& [metric, o] : parsed) {
      const auto bins = bin_pcc(recs, metric, o);
      const auto auroc = pairwise_auroc(recs, metric, o).auroc;
      row[metric] = {{"pcc_em", bins.aligned_pcc_em()}, {"pcc_f1", bins.aligned_pcc_f1()}, {"auroc", auroc}};
      csv << ',' << bins.aligned_pcc_em() << ',' << bins.aligned_pcc_f1() << ',' << auroc;
    }
    csv << '\n';
    rows.push_back(std::move(row));
  }
  write_json(fs::path(cfg.output_dir) / "table.json", rows);
  std::ofstream out(fs::path(cfg.output_dir) / "table.csv", std::ios::trunc);
  out << csv.str();
  rec.outputs.push_back((fs::path(cfg.output_dir) / "table.json").generic_string());
  rec.outputs.push_back((fs::path(cfg.output_dir) / "table.csv").generic_string());
  std::cout << csv.str();
}

// ---- probe ------------------------------------------------------------------

inline void probe_generate(const RunConfig& cfg, std::uint64_t dim, const std::string& reference, RunRecord& rec) {
  ProbeConfig pc = cfg.probe;
  pc.seed = cfg.seed;
  if (!reference.empty()) {
    rec.inputs.push_back(reference);
    const auto ref = read_tensor_file(reference);
    const auto v = ref.rank() == 2 ? pool(ref, PoolingStrategy::Mean) : ref;
    pc.probe_dim = v.size();
    const double scale = rms(v.data());
    if (!(scale > 0.0)) throw DegenerateInputError(reference + ": reference embedding has zero RMS");
    pc.sigma = cfg.probe.sigma * scale;
  } else {
    pc.probe_dim = dim;
  }
  const auto probes = generate_probes(pc);
  const auto dir = fs::path(cfg.output_dir) / "probes";
  fs::create_directories(dir);
  nlohmann::json index = {{"n_probes", pc.n_probes}, {"probe_dim", pc.probe_dim}, {"sigma", pc.sigma},
                          {"seed", pc.seed}, {"probes", nlohmann::json::array()}};
  for (std::size_t r = 0; r < probes.size(); ++r) {
    const auto name = synthetic::padded("probe_", r, 3) + ".spsf";
    write_tensor_file(probes[r], dir / name);
    index["probes"].push_back(name);
    rec.outputs.push_back((dir / name).generic_string());
  }
  write_json(dir / "probes.json", index);
  std::cout << probes.size() << " probes of dim " << pc.probe_dim << " (sigma " << pc.sigma << ") -> "
            << dir.generic_string() << '\n';
}

inline void probe_score(const RunConfig& cfg, const std::string& manifest, RunRecord& rec) {
  if (cfg.subspace_path.empty()) throw ConfigError("--subspace is required");
  rec.inputs.push_back(cfg.subspace_path);
  rec.inputs.push_back(manifest.empty() ? cfg.manifest_dir : manifest);
  const auto s = load_subspace(cfg.subspace_path);
  for (const auto& path : manifest_inputs(manifest, cfg.manifest_dir)) {
    const auto m = read_probe_manifest(path);
    const auto sel = select_probed_candidate(m, s, cfg.probe.retain, cfg.probe.top_p_gaps, cfg.pooling);
    nlohmann::json probes = nlohmann::json::array();
    for (const auto& r : sel.all) {
      probes.push_back({{"probe_index", r.probe_index},
                        {"candidate_id", m.candidates[r.probe_index + 1].candidate_id},
                        {"s_probe", r.s_probe}});
    }
    nlohmann::json retained = nlohmann::json::array();
    for (const auto& r : sel.retained) retained.push_back(m.candidates[r.probe_index + 1].candidate_id);
    nlohmann::json report = score_report(m.query_id, sel.ranking, cfg.pooling, s);
    report["probes"] = std::move(probes);
    report["retained"] = std::move(retained);
    report["top_p_gaps"] = cfg.probe.top_p_gaps;
    const auto out = fs::path(cfg.output_dir) / "probe_scores" / (m.query_id + ".json");
    write_json(out, report);
    rec.outputs.push_back(out.generic_string());
    std::cout << m.query_id << " -> " << sel.selected_candidate_id << '\n';
  }
}

// ---- oracle -----------------------------------------------------------------

struct OracleArgs {
  std::uint64_t dim = 2;
  std::vector<std::uint64_t> sizes{100, 1000, 10000};
  std::uint64_t trials = 100;
  std::uint64_t theorem_trials = 100000;
  std::string states;
  double sigma = 1.0;
};

inline void oracle_theorems(const RunConfig& cfg, const OracleArgs& a, RunRecord& rec) {
  Tensor states;
  if (!a.states.empty()) {
    rec.inputs.push_back(a.states);
    states = read_tensor_file(a.states);
  } else {
    states = synthetic::gaussian_matrix(16, std::max<std::uint64_t>(a.dim, 2), cfg.seed);
  }
  const auto t1 = check_theorem1(states, a.theorem_trials, cfg.seed);
  const auto t2 = check_theorem2(states, a.theorem_trials, cfg.seed);
  const auto po = check_partial_order(a.theorem_trials / 10, 3, cfg.seed);
  const auto t3 = check_theorem3(a.dim, a.sizes, a.trials, cfg.seed);
  const nlohmann::json j = {{"seed", cfg.seed},
                            {"theorem1", to_json(t1)},
                            {"theorem2", to_json(t2)},
                            {"partial_order", to_json(po)},
                            {"theorem3", to_json(t3)}};
  const auto path = fs::path(cfg.output_dir) / "theorems.json";
  write_json(path, j);
  rec.outputs.push_back(path.generic_string());
  std::cout << "theorem 1 (subsequence):   " << t1.violations << " violations / " << t1.trials << '\n'
            << "theorem 2 (convex hull):   " << t2.violations << " violations / " << t2.trials << '\n'
            << "partial order axioms:      " << po.violations << " violations / " << po.trials << '\n'
            << "theorem 3 (convergence), dim " << a.dim << ", " << a.trials << " trials\n"
            << "  size        median ||M_a - M_b||_inf\n";
  for (const auto& r : t3.rows) {
    std::cout << "  " << std::left << std::setw(10) << r.size << "  " << r.median_sup_diff << '\n';
  }
  std::cout << "  non-increasing: " << (t3.non_increasing ? "yes" : "no") << '\n';
  if (!t1.passed() || !t2.passed() || !po.passed() || !t3.non_increasing) {
    throw DataError("theorem checks reported violations");
  }
}

inline void oracle_ratio(const RunConfig& cfg, const OracleArgs& a, RunRecord& rec) {
  const auto r = ratio_curve(a.dim, a.sigma, a.sizes, a.trials, cfg.seed);
  const auto path = fs::path(cfg.output_dir) / "ratio_curve.json";
  write_json(path, to_json(r));
  rec.outputs.push_back(path.generic_string());
  std::cout << "size        mean R      mean ||M_x||  fit a*sqrt(2 ln m)\n";
  for (const auto& row : r.rows) {
    std::cout << std::left << std::setw(10) << row.size << "  " << std::setw(10) << row.mean_ratio << "  "
              << std::setw(12) << row.mean_bounder_norm << "  " << row.fitted_bounder_norm << '\n';
  }
  std::cout << "strictly decreasing: " << (r.strictly_decreasing ? "yes" : "no") << '\n';
}

// ---- demo -------------------------------------------------------------------

inline void demo_generate(const RunConfig& cfg, const std::string& out, std::uint64_t queries,
                          std::uint64_t validation, RunRecord& rec) {
  synthetic::DemoSpec spec;
  spec.queries = queries;
  spec.validation_queries = validation;
  spec.candidates = cfg.num_candidates;
  spec.probes = cfg.probe.n_probes;
  spec.seed = cfg.seed;
  const fs::path root = out.empty() ? fs::path(cfg.output_dir) / "demo" : fs::path(out);
  synthetic::generate_demo_corpus(root, spec);
  rec.outputs.push_back(root.generic_string());
  std::cout << "demo corpus: " << queries << " queries, " << validation << " validation queries, "
            << cfg.num_candidates << " candidates each -> " << root.generic_string() << '\n';
}

}  // namespace sps::cli
