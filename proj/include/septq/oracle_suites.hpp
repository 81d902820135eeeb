#pragma once

// Seeded instance families and the oracle comparison runs built on them.
// Shared by the `oracle` CLI command and the acceptance suite.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "septq/engine.hpp"
#include "septq/oracles.hpp"

namespace septq::oracles {

inline constexpr double kDeltaTolerance = 1e-8;
inline constexpr double kScoreTolerance = 1e-6;
inline constexpr double kLayerErrorTolerance = 1e-8;
inline constexpr double kMaxScoreCondition = 1e4;

struct SeedRange {
  std::uint64_t first = 0;
  std::size_t count = 0;

  std::uint64_t at(std::size_t i) const noexcept { return first + i; }
};

/// Seed lists for every seeded family, normally read from config/seeds.json.
struct SeedPlan {
  SeedRange compensation_kkt{1000, 100};
  SeedRange score_oracle{2000, 100};
  SeedRange blocksize_invariance{3000, 20};
  SeedRange error_ordering{4000, 200};
  SeedRange strategy_ablation{5000, 10};
  SeedRange determinism{6000, 1};
};

SeedPlan load_seed_plan(const std::filesystem::path& path);

struct CompensationCase {
  Matrix hessian;
  std::size_t index;
  double gap;
};

struct LayerCase {
  Matrix weights;
  Matrix inputs;
};

/// SPD Hessian of dimension 4..32 with a random constrained index and gap.
CompensationCase make_compensation_case(std::uint64_t seed);

/// Up to 16x16 weights and 16x64 inputs with cond(X X^T) <= kMaxScoreCondition.
LayerCase make_score_case(std::uint64_t seed);

/// Heavy-tailed rows x cols weights with cols x samples calibration inputs.
LayerCase make_layer_case(std::uint64_t seed, std::size_t rows,
                          std::size_t cols, std::size_t samples);

/// Condition number of X X^T.
double gram_condition(const Matrix& x);

/// Closed-form compensation delta against the bordered KKT solve.
std::vector<OracleReport> compensation_suite(SeedRange seeds);

/// Closed-form importance scores (undamped) against score_oracle; one report
/// per instance, for its worst entry.
std::vector<OracleReport> score_suite(SeedRange seeds);

/// Blocked engine against the unblocked reference on 16x16 layers.
std::vector<OracleReport> unblocked_suite(SeedRange seeds,
                                          const EngineConfig& cfg);

/// Largest rel_err per quantity, and whether each stays under its tolerance.
struct SuiteSummary {
  double max_delta_rel_err = 0.0;
  double max_score_rel_err = 0.0;
  double max_layer_rel_err = 0.0;
  bool passed = true;
};

SuiteSummary summarize(const std::vector<OracleReport>& reports);

}  // namespace septq::oracles
