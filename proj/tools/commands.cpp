#include "commands.hpp"

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "septq/error.hpp"
#include "septq/importance.hpp"
#include "septq/instances.hpp"
#include "septq/oracle_suites.hpp"
#include "septq/oracles.hpp"
#include "septq/serialize.hpp"

namespace septq::cli {
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Flag values; a flag only overrides the config file when it was given.
struct Flags {
  std::string config;
  int bits = 0;
  double p = 0.0;
  std::size_t blocksize = 0;
  double damping = 0.0;
  std::size_t grid_steps = 0;
  std::string granularity;
  std::string timing;
  std::string scope;
  std::size_t local_block = 0;
  std::uint64_t seed = 0;
  std::string format;

  std::vector<std::pair<const CLI::Option*, std::string>> given;
};

void add_common_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config file");
  f.given = {
      {app->add_option("--bits", f.bits, "code bit width N"), "bits"},
      {app->add_option("--p", f.p, "percent of weights kept at full precision"), "p"},
      {app->add_option("--blocksize", f.blocksize, "lazy-update block width"), "blocksize"},
      {app->add_option("--damping", f.damping, "Hessian damping fraction"), "damping"},
      {app->add_option("--grid-steps", f.grid_steps, "clip-range search steps"), "grid_steps"},
      {app->add_option("--granularity", f.granularity, "per-matrix | per-row"), "granularity"},
      {app->add_option("--strategy-timing", f.timing, "static | dynamic"), "strategy_timing"},
      {app->add_option("--strategy-scope", f.scope, "global | local"), "strategy_scope"},
      {app->add_option("--local-block", f.local_block, "tile edge of the local scope"), "local_block"},
      {app->add_option("--seed", f.seed, "seed recorded in the manifest"), "seed"},
      {app->add_option("--format", f.format, "binary-f32 | csv"), "format"},
  };
}

nlohmann::json flag_overrides(const Flags& f) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [opt, key] : f.given) {
    if (opt->count() == 0) continue;
    if (key == "bits") j[key] = f.bits;
    else if (key == "p") j[key] = f.p;
    else if (key == "blocksize") j[key] = f.blocksize;
    else if (key == "damping") j[key] = f.damping;
    else if (key == "grid_steps") j[key] = f.grid_steps;
    else if (key == "granularity") j[key] = f.granularity;
    else if (key == "strategy_timing") j[key] = f.timing;
    else if (key == "strategy_scope") j[key] = f.scope;
    else if (key == "local_block") j[key] = f.local_block;
    else if (key == "seed") j[key] = f.seed;
    else if (key == "format") j[key] = f.format;
  }
  return j;
}

RunOptions resolve_options(const Flags& f) {
  RunOptions opts;
  if (!f.config.empty()) {
    nlohmann::json file;
    try {
      file = read_json(f.config);
    } catch (const FormatError& e) {
      throw ConfigError(e.what());
    }
    apply_config(file, opts);
  }
  apply_config(flag_overrides(f), opts);
  opts.engine.validate();
  return opts;
}

Matrix load_matrix(const std::string& path) {
  return read_matrix(path, detect_matrix_format(path));
}

void require_conforming(const Matrix& w, const Matrix& x) {
  if (w.cols() != x.rows())
    throw DimensionMismatch("weights have " + std::to_string(w.cols()) +
                            " columns but calibration inputs have " +
                            std::to_string(x.rows()) + " rows");
}

std::string extension(MatrixFormat f) {
  return f == MatrixFormat::csv ? ".csv" : ".bin";
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const nlohmann::json& inputs, const RunOptions& opts) {
  nlohmann::json m;
  m["tool"] = kToolName;
  m["version"] = kToolVersion;
  m["command"] = command;
  m["inputs"] = inputs;
  m["output_dir"] = dir.string();
  m["seed"] = opts.seed;
  m["config"] = config_to_json(opts);
  write_json(dir / "manifest.json", m);
}

struct Scoring {
  Matrix hinv;
  QuantGrid grid;
  ScoreMatrix scores;
};

Scoring static_scoring(const Matrix& w, const Matrix& x, const EngineConfig& cfg) {
  Matrix hinv = spd_inverse(hessian(x, cfg.damping_frac));
  QuantGrid g = grid_search(w, cfg.bits, cfg.granularity, cfg.grid_steps);
  ScoreMatrix scores = score_all(w, hinv.diagonal(), g);
  return {std::move(hinv), std::move(g), std::move(scores)};
}

// ---- commands --------------------------------------------------------------

struct LayerArgs {
  std::string weights;
  std::string calib;
  std::string out;
};

void add_layer_args(CLI::App* app, LayerArgs& a) {
  app->add_option("--weights", a.weights, "weight matrix W (d_row x d_col)")->required();
  app->add_option("--calib", a.calib, "calibration inputs X (d_col x n)")->required();
  app->add_option("--out", a.out, "output directory")->required();
}

nlohmann::json layer_inputs(const LayerArgs& a) {
  return {{"weights", a.weights}, {"calib", a.calib}};
}

void cmd_quantize(const LayerArgs& a, const RunOptions& opts, bool with_gptq,
                  std::ostream& out) {
  const Matrix w = load_matrix(a.weights);
  const Matrix x = load_matrix(a.calib);
  require_conforming(w, x);

  const QuantResult result = run_septq(w, x, opts.engine);
  const QuantResult rtn = oracles::rtn_baseline(w, x, result.grid);

  nlohmann::json metrics;
  metrics["schema_version"] = kMetricsSchemaVersion;
  metrics["layer_error"] = result.metrics.layer_error;
  metrics["rtn_error"] = rtn.metrics.layer_error;
  if (with_gptq) {
    EngineConfig gptq = opts.engine;
    gptq.strategy.p = 0.0;
    metrics["gptq_error"] = run_septq(w, x, gptq, result.grid).metrics.layer_error;
  }
  metrics["effective_bits_paper"] = result.metrics.effective_bits_paper;
  metrics["effective_bits_honest"] = result.metrics.effective_bits_honest;
  metrics["runtime_seconds"] = result.metrics.runtime_seconds;
  metrics["reserved_count"] = result.reserved.size();

  const fs::path dir = a.out;
  fs::create_directories(dir);
  save_result(result, dir);
  write_json(dir / "metrics.json", metrics);
  write_manifest(dir, "quantize", layer_inputs(a), opts);
  out << "layer_error " << format_double(result.metrics.layer_error)
      << "  rtn_error " << format_double(rtn.metrics.layer_error)
      << "  effective_bits " << format_double(result.metrics.effective_bits_paper)
      << "  -> " << dir.string() << '\n';
}

void cmd_score(const LayerArgs& a, const RunOptions& opts, std::size_t bins,
               std::size_t block, std::ostream& out) {
  const Matrix w = load_matrix(a.weights);
  const Matrix x = load_matrix(a.calib);
  require_conforming(w, x);
  if (bins == 0) throw ConfigError("--bins must be at least 1");
  if (block == 0) throw ConfigError("--block must be at least 1");

  const Scoring s = static_scoring(w, x, opts.engine);
  const ScoreHistogram hist = score_histogram(s.scores, log_bin_edges(s.scores, bins));
  const MaskMatrix static_mask = select_mask_for(s.scores, opts.engine.strategy);
  const MaskMatrix dynamic_mask =
      dynamic_mask_trace(w, s.hinv, s.grid, opts.engine.strategy,
                         opts.engine.effective_blocksize(w.cols()));

  const fs::path dir = a.out;
  fs::create_directories(dir);
  write_file(dir / "histogram.csv", histogram_csv(hist));
  write_file(dir / "mask_static_blocks.csv",
             block_sums_csv(mask_block_sums(static_mask, block)));
  write_file(dir / "mask_dynamic_blocks.csv",
             block_sums_csv(mask_block_sums(dynamic_mask, block)));
  write_manifest(dir, "score", layer_inputs(a), opts);
  out << "scored " << w.rows() << 'x' << w.cols() << " weights into " << bins
      << " bins -> " << dir.string() << '\n';
}

void cmd_compare(const LayerArgs& a, const RunOptions& opts, std::ostream& out) {
  const Matrix w = load_matrix(a.weights);
  const Matrix x = load_matrix(a.calib);
  require_conforming(w, x);
  const EngineConfig& base = opts.engine;
  const Scoring s = static_scoring(w, x, base);

  std::string csv = "name,layer_error,runtime_seconds,reserved_count,score_mass\n";
  auto row = [&](const std::string& name, double error, double seconds,
                 const MaskMatrix& mask) {
    csv += name + ',' + format_double(error) + ',' + format_double(seconds) + ',' +
           std::to_string(mask.reserved_count()) + ',' +
           format_double(score_mass(s.scores, mask)) + '\n';
  };
  auto variant = [&](auto&& edit) {
    EngineConfig cfg = base;
    edit(cfg);
    return run_septq(w, x, cfg, s.grid);
  };

  const QuantResult septq = run_septq(w, x, base, s.grid);
  row("septq", septq.metrics.layer_error, septq.metrics.runtime_seconds, septq.mask);

  const QuantResult gptq = variant([](EngineConfig& c) { c.strategy.p = 0.0; });
  row("gptq", gptq.metrics.layer_error, gptq.metrics.runtime_seconds, gptq.mask);

  auto t0 = Clock::now();
  const QuantResult rtn = oracles::rtn_baseline(w, x, s.grid);
  row("rtn", rtn.metrics.layer_error, seconds_since(t0), rtn.mask);

  // Scoring-only wall clock: one pass over the layer versus a re-score per
  // column on the compensated weights.
  t0 = Clock::now();
  const MaskMatrix static_mask =
      select_mask_for(score_all(w, s.hinv.diagonal(), s.grid), base.strategy);
  const double static_seconds = seconds_since(t0);
  t0 = Clock::now();
  const MaskMatrix dynamic_mask = dynamic_mask_trace(
      w, s.hinv, s.grid, base.strategy, base.effective_blocksize(w.cols()));
  const double dynamic_seconds = seconds_since(t0);
  const QuantResult static_run =
      variant([](EngineConfig& c) { c.strategy.timing = MaskTiming::static_scores; });
  const QuantResult dynamic_run =
      variant([](EngineConfig& c) { c.strategy.timing = MaskTiming::dynamic_scores; });
  row("static_scoring", static_run.metrics.layer_error, static_seconds, static_mask);
  row("dynamic_scoring", dynamic_run.metrics.layer_error, dynamic_seconds, dynamic_mask);

  const QuantResult global = variant([](EngineConfig& c) {
    c.strategy.timing = MaskTiming::static_scores;
    c.strategy.scope = MaskScope::global;
  });
  const QuantResult local = variant([](EngineConfig& c) {
    c.strategy.timing = MaskTiming::static_scores;
    c.strategy.scope = MaskScope::local;
  });
  row("septq_global", global.metrics.layer_error, global.metrics.runtime_seconds, global.mask);
  row("septq_local", local.metrics.layer_error, local.metrics.runtime_seconds, local.mask);

  const fs::path dir = a.out;
  fs::create_directories(dir);
  write_file(dir / "comparison.csv", csv);
  write_manifest(dir, "compare", layer_inputs(a), opts);
  out << csv;
}

void cmd_dequantize(const std::string& result_dir, const std::string& out_path,
                    const RunOptions& opts, std::ostream& out) {
  const StoredResult stored = load_result(result_dir);
  const Matrix w_hat = stored.reconstruct();
  const fs::path target = out_path;
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  write_matrix(w_hat, target, opts.format);
  out << "wrote " << w_hat.rows() << 'x' << w_hat.cols() << ' '
      << to_string(opts.format) << " -> " << target.string() << '\n';
}

fs::path default_seed_file() { return fs::path(SEPTQ_SOURCE_DIR) / "config" / "seeds.json"; }

int cmd_oracle(const std::string& out_dir, const std::string& seeds_path,
               const RunOptions& opts, std::ostream& out) {
  fs::path seeds = seeds_path.empty() ? default_seed_file() : fs::path(seeds_path);
  const oracles::SeedPlan plan = (seeds_path.empty() && !fs::exists(seeds))
                                     ? oracles::SeedPlan{}
                                     : oracles::load_seed_plan(seeds);

  std::vector<oracles::OracleReport> reports = oracles::compensation_suite(plan.compensation_kkt);
  for (auto& r : oracles::score_suite(plan.score_oracle)) reports.push_back(r);
  EngineConfig cfg = opts.engine;
  cfg.blocksize = std::min<std::size_t>(cfg.blocksize, 4);
  for (auto& r : oracles::unblocked_suite(plan.blocksize_invariance, cfg))
    reports.push_back(r);
  const oracles::SuiteSummary summary = oracles::summarize(reports);

  const fs::path dir = out_dir;
  fs::create_directories(dir);
  write_file(dir / "oracle_report.csv", oracles::reports_to_csv(reports));
  write_manifest(dir, "oracle", {{"seeds", seeds.string()}}, opts);
  out << "delta        max rel_err " << format_double(summary.max_delta_rel_err)
      << " (tol " << format_double(oracles::kDeltaTolerance) << ")\n"
      << "score        max rel_err " << format_double(summary.max_score_rel_err)
      << " (tol " << format_double(oracles::kScoreTolerance) << ")\n"
      << "layer_error  max rel_err " << format_double(summary.max_layer_rel_err)
      << " (tol " << format_double(oracles::kLayerErrorTolerance) << ")\n"
      << (summary.passed ? "PASS" : "FAIL") << '\n';
  return summary.passed ? kOk : kFailure;
}

void cmd_generate(const std::string& out_dir, std::size_t rows, std::size_t cols,
                  std::size_t samples, const RunOptions& opts, std::ostream& out) {
  if (rows == 0 || cols == 0 || samples == 0)
    throw ConfigError("generate: rows, cols and samples must be positive");
  instances::Rng rng(opts.seed);
  const Matrix w = instances::heavy_tailed_weights(rows, cols, rng);
  const Matrix x = instances::calibration_inputs(cols, samples, rng);
  const fs::path dir = out_dir;
  fs::create_directories(dir);
  write_matrix(w, dir / ("weights" + extension(opts.format)), opts.format);
  write_matrix(x, dir / ("calib" + extension(opts.format)), opts.format);
  out << "wrote " << rows << 'x' << cols << " weights and " << cols << 'x' << samples
      << " calibration inputs -> " << dir.string() << '\n';
}

}  // namespace

void apply_config(const nlohmann::json& j, RunOptions& opts) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  EngineConfig& e = opts.engine;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "bits") e.bits = value.get<int>();
      else if (key == "p") e.strategy.p = value.get<double>();
      else if (key == "blocksize") e.blocksize = value.get<std::size_t>();
      else if (key == "damping") e.damping_frac = value.get<double>();
      else if (key == "grid_steps") e.grid_steps = value.get<std::size_t>();
      else if (key == "granularity") e.granularity = parse_granularity(value.get<std::string>());
      else if (key == "strategy_timing") e.strategy.timing = parse_mask_timing(value.get<std::string>());
      else if (key == "strategy_scope") e.strategy.scope = parse_mask_scope(value.get<std::string>());
      else if (key == "local_block") e.strategy.block = value.get<std::size_t>();
      else if (key == "seed") opts.seed = value.get<std::uint64_t>();
      else if (key == "format") opts.format = parse_matrix_format(value.get<std::string>());
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
}

nlohmann::json config_to_json(const RunOptions& opts) {
  const EngineConfig& e = opts.engine;
  return {
      {"bits", e.bits},
      {"p", e.strategy.p},
      {"blocksize", e.blocksize},
      {"damping", e.damping_frac},
      {"grid_steps", e.grid_steps},
      {"granularity", std::string(to_string(e.granularity))},
      {"strategy_timing", std::string(to_string(e.strategy.timing))},
      {"strategy_scope", std::string(to_string(e.strategy.scope))},
      {"local_block", e.strategy.block},
      {"seed", opts.seed},
      {"format", std::string(to_string(opts.format))},
  };
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Layer-wise post-training quantization with reserved salient weights"};
  app.name(kToolName);
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  Flags flags;
  LayerArgs layer;
  bool with_gptq = false;
  std::size_t bins = 40;
  std::size_t block = 128;
  std::string result_dir, out_path, out_dir, seeds_path;
  std::size_t rows = 16, cols = 16, samples = 64;

  CLI::App* quantize = app.add_subcommand("quantize", "quantize one layer");
  add_layer_args(quantize, layer);
  add_common_flags(quantize, flags);
  quantize->add_flag("--with-gptq", with_gptq, "also report the p = 0 error");

  Flags score_flags;
  LayerArgs score_layer;
  CLI::App* score = app.add_subcommand("score", "importance histogram and mask block sums");
  add_layer_args(score, score_layer);
  add_common_flags(score, score_flags);
  score->add_option("--bins", bins, "histogram bins");
  score->add_option("--block", block, "block edge of the mask maps");

  Flags compare_flags;
  LayerArgs compare_layer;
  CLI::App* compare = app.add_subcommand("compare", "SEPTQ against GPTQ, RTN and strategy variants");
  add_layer_args(compare, compare_layer);
  add_common_flags(compare, compare_flags);

  Flags deq_flags;
  CLI::App* dequantize = app.add_subcommand("dequantize", "rebuild W-hat from a result directory");
  dequantize->add_option("--result", result_dir, "directory written by quantize")->required();
  dequantize->add_option("--out", out_path, "output matrix file")->required();
  add_common_flags(dequantize, deq_flags);

  Flags oracle_flags;
  CLI::App* oracle = app.add_subcommand("oracle", "closed forms against brute-force oracles");
  oracle->add_option("--out", out_dir, "output directory")->required();
  oracle->add_option("--seeds", seeds_path, "seed plan (default config/seeds.json)");
  add_common_flags(oracle, oracle_flags);

  Flags gen_flags;
  std::string gen_dir;
  CLI::App* generate = app.add_subcommand("generate", "write a seeded synthetic layer");
  generate->add_option("--out", gen_dir, "output directory")->required();
  generate->add_option("--rows", rows, "weight rows");
  generate->add_option("--cols", cols, "weight columns");
  generate->add_option("--samples", samples, "calibration samples");
  add_common_flags(generate, gen_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kBadConfig;
  }

  try {
    if (*quantize) {
      cmd_quantize(layer, resolve_options(flags), with_gptq, out);
    } else if (*score) {
      cmd_score(score_layer, resolve_options(score_flags), bins, block, out);
    } else if (*compare) {
      cmd_compare(compare_layer, resolve_options(compare_flags), out);
    } else if (*dequantize) {
      cmd_dequantize(result_dir, out_path, resolve_options(deq_flags), out);
    } else if (*oracle) {
      return cmd_oracle(out_dir, seeds_path, resolve_options(oracle_flags), out);
    } else if (*generate) {
      cmd_generate(gen_dir, rows, cols, samples, resolve_options(gen_flags), out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kBadConfig;
  } catch (const DimensionMismatch& e) {
    err << "shape mismatch: " << e.what() << '\n';
    return kShapeMismatch;
  } catch (const IoError& e) {
    err << "input error: " << e.what() << '\n';
    return kBadInput;
  } catch (const FormatError& e) {
    err << "input error: " << e.what() << '\n';
    return kBadInput;
  } catch (const fs::filesystem_error& e) {
    err << "input error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}

}  // namespace septq::cli
