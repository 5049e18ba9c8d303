// sps: batch front end for principal-subspace scoring, gating and evaluation.
//
// Exit codes: 0 success, 1 data error, 2 configuration or usage error.
// Every invocation leaves <output-dir>/run_manifest.json behind.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "commands.hpp"

namespace {

using sps::cli::RunRecord;

constexpr int kExitData = 1;
constexpr int kExitConfig = 2;

struct Options {
  sps::RunConfig cfg;
  std::string pooling = "max";
  std::string manifest;
  sps::cli::SubspaceBuildArgs build;
  sps::cli::PipelineArgs pipeline;
  std::string validation;
  std::string threshold_out;
  sps::cli::EvalArgs eval;
  std::vector<std::string> table_records;
  std::vector<std::string> table_metrics;
  std::string entropy_input;
  std::string entropy_base = "e";
  std::uint64_t probe_dim = 0;
  std::string probe_reference;
  sps::cli::OracleArgs oracle;
  std::string demo_out;
  std::uint64_t demo_queries = 24;
  std::uint64_t demo_validation = 40;
};

void add_global_options(CLI::App& app, Options& o) {
  auto& c = o.cfg;
  app.add_option("--subspace", c.subspace_path, "Subspace directory (basis.spsf + subspace.json)");
  app.add_option("--manifests", c.manifest_dir, "Directory of candidate manifests");
  app.add_option("--pooling", o.pooling, "Token pooling: max, mean or last")->capture_default_str();
  app.add_option("--variance-ratio", c.variance_ratio, "Retained fraction for subspace rank selection")
      ->capture_default_str();
  app.add_option("--percentile", c.percentile, "Calibration percentile of the norm ratio")->capture_default_str();
  app.add_option("--num-candidates", c.num_candidates, "Candidates per query")->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--n-probes", c.probe.n_probes, "Probes drawn per query")->capture_default_str();
  app.add_option("--retain", c.probe.retain, "Probes kept after S_probe ranking")->capture_default_str();
  app.add_option("--sigma", c.probe.sigma, "Probe standard deviation")->capture_default_str();
  app.add_option("--top-p-gaps", c.probe.top_p_gaps, "Singular-value gaps summed by S_probe")
      ->capture_default_str();
  app.add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app.add_option("--output-dir", c.output_dir, "Where outputs and run_manifest.json go")->capture_default_str();
  app.add_option("--jobs", c.jobs, "Worker threads for per-query work")->capture_default_str()
      ->check(CLI::PositiveNumber);
}

void add_eval_options(CLI::App& sub, Options& o, bool needs_metric) {
  sub.add_option("--records", o.eval.records, "Evaluation records JSON")->required();
  auto* m = sub.add_option("--metric", o.eval.metric, "Metric name inside metric_scores");
  if (needs_metric) m->required();
  sub.add_option("--orientation", o.eval.orientation, "lower or higher is better")->capture_default_str();
  sub.add_option("--dataset", o.eval.dataset, "Dataset label for the report");
  sub.add_flag("--strip-articles", o.eval.strip_articles, "Drop a/an/the during answer normalization");
}

// CLI11 assigns nothing when parsing fails, so the manifest location is read off argv directly.
std::string output_dir_from_argv(int argc, char** argv, const std::string& fallback) {
  std::string dir = fallback;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--output-dir" && i + 1 < argc) {
      dir = argv[++i];
    } else if (a.rfind("--output-dir=", 0) == 0) {
      dir = a.substr(13);
    }
  }
  return dir;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Principal-subspace scoring of generated candidates"};
  app.set_version_flag("--version", sps::cli::kVersion);
  app.set_config("--config", "", "TOML config file; flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  add_global_options(app, o);
  RunRecord rec;
  rec.argv.assign(argv, argv + argc);

  auto* subspace = app.add_subcommand("subspace", "Principal subspace of reader weights")->require_subcommand(1);
  auto* build = subspace->add_subcommand("build", "SVD of W and rank selection");
  build->add_option("--weights", o.build.weights, "Weight matrix W [D x M] (.spsf)")->required();
  build->add_option("--out", o.build.out, "Output directory (default <output-dir>/subspace)");
  build->add_option("--rule", o.build.rule, "Rank rule: variance, singular or count")->capture_default_str();
  build->add_flag("--center", o.build.center, "Subtract the column mean before the SVD");

  auto* score = app.add_subcommand("score", "SPS of every candidate, lowest selected");
  score->add_option("--manifest", o.manifest, "Score a single manifest instead of --manifests");

  auto* filter = app.add_subcommand("filter", "Norm-ratio gatekeeper")->require_subcommand(1);
  auto* calibrate = filter->add_subcommand("calibrate", "Threshold from validation norm ratios");
  calibrate->add_option("--validation", o.validation, "Validation manifest directory");
  calibrate->add_option("--out", o.threshold_out, "Threshold file (default <output-dir>/threshold.json)");

  auto* pipeline = app.add_subcommand("pipeline", "Gate, then score")->require_subcommand(1);
  auto* run = pipeline->add_subcommand("run", "Decisions for every query in --manifests");
  run->add_option("--threshold-file", o.pipeline.threshold_file, "Threshold JSON to read (or write with --calibrate)")
      ->required();
  run->add_flag("--calibrate", o.pipeline.calibrate, "Calibrate first and write --threshold-file");
  run->add_option("--validation", o.pipeline.validation, "Validation manifests for --calibrate");

  auto* eval = app.add_subcommand("eval", "Offline metrics")->require_subcommand(1);
  auto* pcc = eval->add_subcommand("pcc", "10-bin Pearson correlation with EM and F1");
  add_eval_options(*pcc, o, true);
  auto* auroc = eval->add_subcommand("auroc", "Within-query pairwise AUROC");
  add_eval_options(*auroc, o, true);
  auto* qa = eval->add_subcommand("qa", "EM/F1 of predictions, or of the metric's pick with --metric");
  add_eval_options(*qa, o, false);
  auto* entropy = eval->add_subcommand("entropy", "Mean entropy of per-position log-probability vectors");
  entropy->add_option("--input", o.entropy_input, "JSON array of log-probability arrays")->required();
  entropy->add_option("--base", o.entropy_base, "e (nats) or 2 (bits)")->capture_default_str();
  auto* table = eval->add_subcommand("table", "PCC(EM), PCC(F1), AUROC per dataset and metric");
  table->add_option("--records", o.table_records, "Records files, optionally NAME=PATH")->required();
  table->add_option("--metrics", o.table_metrics, "Metric names, optionally NAME:higher")->required();

  auto* probe = app.add_subcommand("probe", "Probe sampling")->require_subcommand(1);
  auto* pgen = probe->add_subcommand("generate", "Draw Gaussian probes");
  pgen->add_option("--dim", o.probe_dim, "Probe dimension");
  pgen->add_option("--reference", o.probe_reference, "Embedding whose RMS scales --sigma");
  auto* pscore = probe->add_subcommand("score", "S_probe retention followed by SPS selection");
  pscore->add_option("--manifest", o.manifest, "Score a single probe manifest instead of --manifests");

  auto* oracle = app.add_subcommand("oracle", "Numerical checks of the bounder results")->require_subcommand(1);
  auto* theorems = oracle->add_subcommand("theorems", "Subsequence, convex hull, order axioms, convergence");
  theorems->add_option("--states", o.oracle.states, "Token states to test (default: seeded Gaussian)");
  theorems->add_option("--trials", o.oracle.theorem_trials, "Trials for the bounding checks")->capture_default_str();
  theorems->add_option("--convergence-trials", o.oracle.trials, "Trials per size")->capture_default_str();
  theorems->add_option("--dim", o.oracle.dim, "Dimension for the convergence check")->capture_default_str();
  theorems->add_option("--sizes", o.oracle.sizes, "Sample sizes")->capture_default_str();
  auto* ratio = oracle->add_subcommand("ratio", "Mean-to-bounder norm ratio against sample size");
  ratio->add_option("--dim", o.oracle.dim, "Dimension")->capture_default_str();
  ratio->add_option("--sizes", o.oracle.sizes, "Sample sizes")->capture_default_str();
  ratio->add_option("--trials", o.oracle.trials, "Trials per size")->capture_default_str();
  ratio->add_option("--noise-sigma", o.oracle.sigma, "Standard deviation of the samples")->capture_default_str();

  auto* demo = app.add_subcommand("demo", "Synthetic workspace")->require_subcommand(1);
  auto* dgen = demo->add_subcommand("generate", "Write W, validation and query manifests, probe manifests");
  dgen->add_option("--out", o.demo_out, "Output directory (default <output-dir>/demo)");
  dgen->add_option("--queries", o.demo_queries, "Query manifests")->capture_default_str();
  dgen->add_option("--validation-queries", o.demo_validation, "Validation manifests")->capture_default_str();

  auto* config = app.add_subcommand("config", "Configuration")->require_subcommand(1);
  auto* show = config->add_subcommand("show", "Print the effective configuration");

  int code = 0;
  std::string error;
  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      o.cfg.output_dir = output_dir_from_argv(argc, argv, o.cfg.output_dir);
      throw sps::ConfigError(std::string(e.what()) + " (see --help)");
    }
    o.cfg.pooling = sps::parse_pooling(o.pooling);
    if (!(o.cfg.variance_ratio > 0.0 && o.cfg.variance_ratio <= 1.0)) {
      throw sps::ConfigError("--variance-ratio must lie in (0, 1]");
    }
    if (!(o.cfg.percentile > 0.0 && o.cfg.percentile < 1.0)) throw sps::ConfigError("--percentile must lie in (0, 1)");
    o.cfg.probe.seed = o.cfg.seed;

    const auto& c = o.cfg;
    if (build->parsed()) {
      rec.command = "subspace build";
      sps::cli::subspace_build(c, o.build, rec);
    } else if (score->parsed()) {
      rec.command = "score";
      sps::cli::score(c, o.manifest, rec);
    } else if (calibrate->parsed()) {
      rec.command = "filter calibrate";
      sps::cli::filter_calibrate(c, o.validation, o.threshold_out, rec);
    } else if (run->parsed()) {
      rec.command = "pipeline run";
      sps::cli::pipeline_run(c, o.pipeline, rec);
    } else if (pcc->parsed()) {
      rec.command = "eval pcc";
      sps::cli::eval_pcc(c, o.eval, rec);
    } else if (auroc->parsed()) {
      rec.command = "eval auroc";
      sps::cli::eval_auroc(c, o.eval, rec);
    } else if (qa->parsed()) {
      rec.command = "eval qa";
      sps::cli::eval_qa(c, o.eval, rec);
    } else if (entropy->parsed()) {
      rec.command = "eval entropy";
      sps::cli::eval_entropy(c, o.entropy_input, o.entropy_base, rec);
    } else if (table->parsed()) {
      rec.command = "eval table";
      sps::cli::eval_table(c, o.table_records, o.table_metrics, rec);
    } else if (pgen->parsed()) {
      rec.command = "probe generate";
      if (o.probe_dim == 0 && o.probe_reference.empty()) throw sps::ConfigError("give --dim or --reference");
      sps::cli::probe_generate(c, o.probe_dim, o.probe_reference, rec);
    } else if (pscore->parsed()) {
      rec.command = "probe score";
      sps::cli::probe_score(c, o.manifest, rec);
    } else if (theorems->parsed()) {
      rec.command = "oracle theorems";
      sps::cli::oracle_theorems(c, o.oracle, rec);
    } else if (ratio->parsed()) {
      rec.command = "oracle ratio";
      sps::cli::oracle_ratio(c, o.oracle, rec);
    } else if (dgen->parsed()) {
      rec.command = "demo generate";
      sps::cli::demo_generate(c, o.demo_out, o.demo_queries, o.demo_validation, rec);
    } else if (show->parsed()) {
      rec.command = "config show";
      std::cout << sps::to_json(c).dump(2) << '\n';
    }
  } catch (const sps::Error& e) {
    code = e.is_config_error() ? kExitConfig : kExitData;
    error = e.what();
  } catch (const std::filesystem::filesystem_error& e) {
    code = kExitData;
    error = e.what();
  } catch (const std::exception& e) {
    code = kExitData;
    error = e.what();
  }
  if (code != 0 && !error.empty()) std::cerr << "error: " << error << '\n';
  sps::cli::write_run_manifest(o.cfg.output_dir, rec, o.cfg, code, error);
  return code;
}
