// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Exit status is 0 only when all of them pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "septq/engine.hpp"
#include "septq/error.hpp"
#include "septq/instances.hpp"
#include "septq/matrix_io.hpp"
#include "septq/oracle_suites.hpp"
#include "septq/oracles.hpp"
#include "septq/serialize.hpp"

using namespace septq;
using namespace septq::oracles;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

EngineConfig config(int bits, double p, std::size_t blocksize = 128) {
  EngineConfig cfg;
  cfg.bits = bits;
  cfg.strategy.p = p;
  cfg.blocksize = blocksize;
  return cfg;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("septq_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "septq");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

template <class E>
bool throws_as(const std::function<void()>& f) {
  try {
    f();
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

Matrix float_rounded(Matrix m) {
  for (double& v : m.values()) v = static_cast<float>(v);
  return m;
}

// ---------------------------------------------------------------------------

Verdict compensation_kkt(const SeedPlan& plan) {
  const auto t0 = Clock::now();
  const SuiteSummary s = summarize(compensation_suite(plan.compensation_kkt));
  const double secs = seconds_since(t0);
  return {s.passed && s.max_delta_rel_err < 1e-8 && secs < 10.0,
          fmt("%zu SPD Hessians, max rel_err %.2e (< 1e-8), %.2f s (< 10 s)",
              plan.compensation_kkt.count, s.max_delta_rel_err, secs)};
}

Verdict score_oracle(const SeedPlan& plan) {
  const SuiteSummary s = summarize(score_suite(plan.score_oracle));
  return {s.passed && s.max_score_rel_err < 1e-6,
          fmt("%zu instances at lambda = 0, max rel_err %.2e (< 1e-6)",
              plan.score_oracle.count, s.max_score_rel_err)};
}

Verdict full_reservation(const SeedPlan& plan) {
  std::size_t runs = 0;
  bool ok = true;
  for (std::size_t i = 0; i < plan.blocksize_invariance.count; ++i) {
    const LayerCase c = make_layer_case(plan.blocksize_invariance.at(i), 16, 16, 64);
    for (std::size_t b : {1, 4, 16})
      for (auto timing : {MaskTiming::static_scores, MaskTiming::dynamic_scores}) {
        EngineConfig cfg = config(2, 100.0, b);
        cfg.strategy.timing = timing;
        const QuantResult r = run_septq(c.weights, c.inputs, cfg);
        ok = ok && r.weights == c.weights && r.metrics.layer_error == 0.0;
        ++runs;
      }
  }
  return {ok, fmt("%zu runs with p = 100: W-hat == W bitwise and layer_error == 0", runs)};
}

Verdict grid_fixed_point(const SeedPlan& plan) {
  std::size_t runs = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < plan.blocksize_invariance.count; ++i) {
    const std::uint64_t seed = plan.blocksize_invariance.at(i);
    instances::Rng rng(seed);
    const int bits = 2 + static_cast<int>(seed % 3);
    std::uniform_real_distribution<double> scale(0.05, 2.0);
    const QuantGrid g = QuantGrid::per_matrix(bits, scale(rng), static_cast<int>(seed % (1u << bits)));
    const Matrix w = instances::grid_aligned_weights(16, 16, g, rng);
    const Matrix x = instances::calibration_inputs(16, 64, rng);
    for (double p : {0.0, 0.1, 1.0, 10.0, 50.0, 100.0})
      for (std::size_t b : {1, 4, 16}) {
        EngineConfig cfg = config(bits, p, b);
        cfg.strategy.scope = (b == 4) ? MaskScope::local : MaskScope::global;
        cfg.strategy.block = 8;
        cfg.strategy.timing = (b == 1) ? MaskTiming::dynamic_scores : MaskTiming::static_scores;
        worst = std::max(worst, run_septq(w, x, cfg, g).metrics.layer_error);
        ++runs;
      }
  }
  return {worst == 0.0,
          fmt("%zu runs over p in {0..100}, B in {1,4,16}: max layer_error %.3g", runs, worst)};
}

Verdict blocksize_invariance(const SeedPlan& plan) {
  double worst_pair = 0.0;
  double worst_ref = 0.0;
  for (std::size_t i = 0; i < plan.blocksize_invariance.count; ++i) {
    const LayerCase c = make_layer_case(plan.blocksize_invariance.at(i), 16, 16, 64);
    for (double p : {0.0, 1.0}) {
      std::vector<QuantResult> runs;
      for (std::size_t b : {std::size_t{1}, std::size_t{4}, std::size_t{16}, c.weights.cols()})
        runs.push_back(run_septq(c.weights, c.inputs, config(2, p, b)));
      for (std::size_t a = 0; a < runs.size(); ++a)
        for (std::size_t b = a + 1; b < runs.size(); ++b)
          worst_pair = std::max(worst_pair, frobenius_distance(runs[a].weights, runs[b].weights));
      const QuantResult ref = unblocked_reference(c.weights, c.inputs, runs.front().mask,
                                                  runs.front().grid, 0.01);
      for (const QuantResult& r : runs)
        worst_ref = std::max(worst_ref, frobenius_distance(r.weights, ref.weights));
    }
  }
  return {worst_pair < 1e-9 && worst_ref < 1e-9,
          fmt("%zu 16x16 instances, B in {1,4,16,d_col}: max ||dW|| between blocksizes %.2e, "
              "vs unblocked %.2e (< 1e-9)",
              plan.blocksize_invariance.count, worst_pair, worst_ref)};
}

Verdict error_ordering(const SeedPlan& plan) {
  const std::size_t n = plan.error_ordering.count;
  std::size_t wins = 0;
  double septq = 0.0, gptq = 0.0, rtn = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const LayerCase c = make_layer_case(plan.error_ordering.at(i), 32, 32, 128);
    const QuantResult s = run_septq(c.weights, c.inputs, config(2, 1.0));
    const QuantResult g = run_septq(c.weights, c.inputs, config(2, 0.0), s.grid);
    const QuantResult r = rtn_baseline(c.weights, c.inputs, s.grid);
    wins += s.metrics.layer_error <= g.metrics.layer_error;
    septq += s.metrics.layer_error;
    gptq += g.metrics.layer_error;
    rtn += r.metrics.layer_error;
  }
  const double frac = static_cast<double>(wins) / static_cast<double>(n);
  return {frac >= 0.9 && septq < gptq && gptq < rtn,
          fmt("%zu 32x32 outlier layers, N=2: SEPTQ(p=1) <= GPTQ on %zu (%.1f%% >= 90%%); "
              "means SEPTQ %.4g < GPTQ %.4g < RTN %.4g",
              n, wins, 100.0 * frac, septq / n, gptq / n, rtn / n)};
}

Verdict effective_bits_check(const SeedPlan& plan) {
  const LayerCase c = make_layer_case(plan.determinism.at(0), 16, 16, 64);
  const QuantResult a = run_septq(c.weights, c.inputs, config(2, 1.0));
  const QuantResult b = run_septq(c.weights, c.inputs, config(2, 0.1));
  const QuantResult z = run_septq(c.weights, c.inputs, config(4, 0.0));
  const bool ok = a.metrics.effective_bits_paper == 2.1 &&
                  b.metrics.effective_bits_paper == 2.01 &&
                  z.metrics.effective_bits_paper == 4.0 &&
                  a.metrics.effective_bits_honest > 2.0 &&
                  z.metrics.effective_bits_honest == 4.0;
  return {ok, fmt("nominal: N=2,p=1 -> %.4g; N=2,p=0.1 -> %.4g; N=4,p=0 -> %.4g; "
                  "honest N=2,p=1 -> %.4g",
                  a.metrics.effective_bits_paper, b.metrics.effective_bits_paper,
                  z.metrics.effective_bits_paper, a.metrics.effective_bits_honest)};
}

Verdict strategy_ablation(const SeedPlan& plan) {
  std::size_t faster = 0, heavier = 0;
  double static_total = 0.0, dynamic_total = 0.0;
  const std::size_t n = plan.strategy_ablation.count;
  for (std::size_t i = 0; i < n; ++i) {
    const LayerCase c = make_layer_case(plan.strategy_ablation.at(i), 256, 256, 512);
    const QuantGrid g = grid_search(c.weights, 2, Granularity::per_matrix, 100);
    const Matrix hinv = spd_inverse(hessian(c.inputs, 0.01));
    StrategyConfig cfg;
    cfg.p = 1.0;
    cfg.block = 128;

    auto t0 = Clock::now();
    const ScoreMatrix scores = score_all(c.weights, hinv.diagonal(), g);
    const MaskMatrix global = select_mask(scores, cfg);
    const double static_secs = seconds_since(t0);
    t0 = Clock::now();
    const MaskMatrix dynamic = dynamic_mask_trace(c.weights, hinv, g, cfg);
    const double dynamic_secs = seconds_since(t0);

    cfg.scope = MaskScope::local;
    const MaskMatrix local = select_mask_local(scores, cfg);
    faster += static_secs < dynamic_secs;
    heavier += score_mass(scores, global) >= score_mass(scores, local) &&
               global.reserved_count() == local.reserved_count();
    static_total += static_secs;
    dynamic_total += dynamic_secs;
    (void)dynamic;
  }
  return {faster == n && heavier == n,
          fmt("%zu 256x256 layers: static faster on %zu (mean %.4f s vs %.4f s); "
              "global mass >= local on %zu",
              n, faster, static_total / n, dynamic_total / n, heavier)};
}

Verdict serialization(const SeedPlan& plan) {
  const fs::path dir = scratch("serialization");
  const LayerCase c = make_layer_case(plan.determinism.at(0), 24, 32, 96);
  write_matrix(c.weights, dir / "w.bin", MatrixFormat::binary_f32);
  write_matrix(c.inputs, dir / "x.bin", MatrixFormat::binary_f32);
  const std::vector<std::string> layer{"--weights", (dir / "w.bin").string(), "--calib",
                                       (dir / "x.bin").string()};

  bool round_trip = true;
  for (const char* gran : {"per-matrix", "per-row"}) {
    std::vector<std::string> args{"quantize", "--bits", "3", "--p", "2", "--granularity", gran,
                                  "--out", (dir / "q").string()};
    args.insert(args.end(), layer.begin(), layer.end());
    round_trip = round_trip && cli(args) == cli::kOk &&
                 cli({"dequantize", "--result", (dir / "q").string(), "--out",
                      (dir / "w_hat.bin").string()}) == cli::kOk;
    EngineConfig cfg = config(3, 2.0);
    cfg.granularity = parse_granularity(gran);
    const QuantResult mem = run_septq(read_matrix(dir / "w.bin", MatrixFormat::binary_f32),
                                      read_matrix(dir / "x.bin", MatrixFormat::binary_f32), cfg);
    round_trip = round_trip &&
                 read_matrix(dir / "w_hat.bin", MatrixFormat::binary_f32) == float_rounded(mem.weights);
  }

  const std::string codes = read_file(dir / "q" / kCodesFile);
  const std::string matrix = read_file(dir / "w.bin");
  std::string codes_magic = codes, matrix_magic = matrix;
  codes_magic[1] = '?';
  matrix_magic[1] = '?';
  const bool errors =
      throws_as<BadMagic>([&] { decode_codes(codes_magic); }) &&
      throws_as<TruncatedPayload>([&] { decode_codes(codes.substr(0, 12)); }) &&
      throws_as<TruncatedPayload>([&] { decode_codes(codes.substr(0, codes.size() - 1)); }) &&
      throws_as<BadMagic>([&] { decode_binary_matrix(matrix_magic); }) &&
      throws_as<TruncatedPayload>([&] { decode_binary_matrix(matrix.substr(0, 16 + 4 * 5)); });

  write_file(dir / "q" / kCodesFile, codes_magic);
  const bool exit_code = cli({"dequantize", "--result", (dir / "q").string(), "--out",
                              (dir / "w_hat.bin").string()}) == cli::kBadInput;
  return {round_trip && errors && exit_code,
          fmt("quantize->dequantize bitwise at float32: %s; bad magic / truncated header / "
              "truncated payload raise distinct errors: %s; CLI exit code 2: %s",
              round_trip ? "yes" : "no", errors ? "yes" : "no", exit_code ? "yes" : "no")};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string bytes = read_file(entry.path());
    const std::string name = entry.path().filename().string();
    if (name == "metrics.json") {
      nlohmann::json j = nlohmann::json::parse(bytes);
      j.erase("runtime_seconds");
      bytes = j.dump();
    } else if (name == "comparison.csv") {
      // Drop the runtime_seconds column.
      std::istringstream in(bytes);
      std::string line, kept;
      while (std::getline(in, line)) {
        const auto a = line.find(',', line.find(',') + 1);
        const auto b = line.find(',', a + 1);
        kept += line.substr(0, a) + line.substr(b) + '\n';
      }
      bytes = kept;
    }
    files[name] = bytes;
  }
  return files;
}

Verdict determinism(const SeedPlan& plan) {
  const fs::path dir = scratch("determinism");
  const LayerCase c = make_layer_case(plan.determinism.at(0), 32, 48, 128);
  write_matrix(c.weights, dir / "w.bin", MatrixFormat::binary_f32);
  write_matrix(c.inputs, dir / "x.bin", MatrixFormat::binary_f32);
  write_json(dir / "config.json", {{"bits", 2}, {"p", 1.0}, {"blocksize", 16},
                                   {"seed", plan.determinism.at(0)}});

  std::size_t compared = 0;
  bool identical = true;
  for (const char* command : {"quantize", "score", "compare"}) {
    const std::vector<std::string> args{command, "--config", (dir / "config.json").string(),
                                        "--weights", (dir / "w.bin").string(),
                                        "--calib", (dir / "x.bin").string(),
                                        "--out", (dir / command).string()};
    if (cli(args) != cli::kOk) return {false, fmt("%s failed", command)};
    const auto first = snapshot(dir / command);
    if (cli(args) != cli::kOk) return {false, fmt("%s failed on rerun", command)};
    identical = identical && first == snapshot(dir / command);
    compared += first.size();
  }
  return {identical, fmt("quantize, score and compare rerun with the same manifest: "
                         "%zu output files byte-identical (runtime fields excluded)",
                         compared)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path seeds = argc > 1 ? fs::path(argv[1])
                                  : fs::path(SEPTQ_SOURCE_DIR) / "config" / "seeds.json";
  const SeedPlan plan = load_seed_plan(seeds);

  const std::vector<std::pair<const char*, Verdict (*)(const SeedPlan&)>> criteria{
      {"compensation_kkt", compensation_kkt},
      {"score_oracle", score_oracle},
      {"full_reservation", full_reservation},
      {"grid_fixed_point", grid_fixed_point},
      {"blocksize_invariance", blocksize_invariance},
      {"error_ordering", error_ordering},
      {"effective_bits", effective_bits_check},
      {"strategy_ablation", strategy_ablation},
      {"serialization", serialization},
      {"determinism", determinism},
  };

  int failed = 0;
  int index = 0;
  for (const auto& [name, check] : criteria) {
    ++index;
    Verdict v;
    try {
      v = check(plan);
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s  %2d %-22s %s\n", v.pass ? "PASS" : "FAIL", index, name, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", index - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
