#include "septq/oracle_suites.hpp"

#include <random>

#include <Eigen/Dense>
#include <json.hpp>

#include "septq/error.hpp"
#include "septq/instances.hpp"
#include "septq/serialize.hpp"

namespace septq::oracles {
namespace {

SeedRange range_from_json(const nlohmann::json& j, const char* key,
                          SeedRange fallback) {
  if (!j.contains(key)) return fallback;
  const auto& entry = j.at(key);
  return {entry.at("first_seed").get<std::uint64_t>(),
          entry.at("count").get<std::size_t>()};
}

}  // namespace

SeedPlan load_seed_plan(const std::filesystem::path& path) {
  const nlohmann::json j = read_json(path);
  SeedPlan plan;
  try {
    plan.compensation_kkt = range_from_json(j, "compensation_kkt", plan.compensation_kkt);
    plan.score_oracle = range_from_json(j, "score_oracle", plan.score_oracle);
    plan.blocksize_invariance =
        range_from_json(j, "blocksize_invariance", plan.blocksize_invariance);
    plan.error_ordering = range_from_json(j, "error_ordering", plan.error_ordering);
    plan.strategy_ablation = range_from_json(j, "strategy_ablation", plan.strategy_ablation);
    plan.determinism = range_from_json(j, "determinism", plan.determinism);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return plan;
}

double gram_condition(const Matrix& x) {
  Eigen::MatrixXd xe(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) xe(r, c) = x(r, c);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(xe * xe.transpose());
  const auto& ev = eig.eigenvalues();
  if (ev.minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
  return ev.maxCoeff() / ev.minCoeff();
}

CompensationCase make_compensation_case(std::uint64_t seed) {
  instances::Rng rng(seed);
  std::uniform_int_distribution<std::size_t> dim_dist(4, 32);
  const std::size_t dim = dim_dist(rng);
  Matrix h = (seed % 2 == 0)
                 ? instances::random_spd(dim, rng)
                 : hessian(instances::calibration_inputs(dim, 2 * dim + 8, rng), 0.01);
  std::uniform_int_distribution<std::size_t> idx(0, dim - 1);
  std::normal_distribution<double> gap(0.0, 1.0);
  const std::size_t j = idx(rng);
  return {std::move(h), j, gap(rng)};
}

LayerCase make_score_case(std::uint64_t seed) {
  instances::Rng rng(seed);
  std::uniform_int_distribution<std::size_t> rows_dist(2, 16);
  std::uniform_int_distribution<std::size_t> cols_dist(2, 16);
  const std::size_t rows = rows_dist(rng);
  const std::size_t cols = cols_dist(rng);
  std::uniform_int_distribution<std::size_t> samples_dist(2 * cols, 64);
  const std::size_t samples = samples_dist(rng);
  Matrix w = instances::heavy_tailed_weights(rows, cols, rng);
  for (int attempt = 0;; ++attempt) {
    Matrix x = instances::calibration_inputs(cols, samples, rng);
    if (gram_condition(x) <= kMaxScoreCondition) return {std::move(w), std::move(x)};
    if (attempt > 1000) throw Error("could not draw a well-conditioned calibration set");
  }
}

LayerCase make_layer_case(std::uint64_t seed, std::size_t rows, std::size_t cols,
                          std::size_t samples) {
  instances::Rng rng(seed);
  Matrix w = instances::heavy_tailed_weights(rows, cols, rng);
  Matrix x = instances::calibration_inputs(cols, samples, rng);
  return {std::move(w), std::move(x)};
}

std::vector<OracleReport> compensation_suite(SeedRange seeds) {
  std::vector<OracleReport> reports;
  for (std::size_t i = 0; i < seeds.count; ++i) {
    const CompensationCase c = make_compensation_case(seeds.at(i));
    const std::vector<double> closed =
        compensation_delta(spd_inverse(c.hessian), c.index, c.gap);
    const std::vector<double> brute = kkt_delta_oracle(c.hessian, c.index, c.gap);
    double closed_norm = 0.0;
    double brute_norm = 0.0;
    for (std::size_t k = 0; k < closed.size(); ++k) {
      closed_norm += closed[k] * closed[k];
      brute_norm += brute[k] * brute[k];
    }
    reports.push_back({i, OracleQuantity::delta, std::sqrt(closed_norm),
                       std::sqrt(brute_norm), relative_error(closed, brute)});
  }
  return reports;
}

std::vector<OracleReport> score_suite(SeedRange seeds) {
  std::vector<OracleReport> reports;
  for (std::size_t i = 0; i < seeds.count; ++i) {
    const LayerCase c = make_score_case(seeds.at(i));
    const int bits = 2 + static_cast<int>(seeds.at(i) % 3);
    const QuantGrid g = grid_search(c.weights, bits, Granularity::per_matrix, 100);
    const std::vector<double> diag = spd_inverse(hessian(c.inputs, 0.0)).diagonal();
    const ScoreMatrix scores = score_all(c.weights, diag, g);

    OracleReport worst{i, OracleQuantity::score, 0.0, 0.0, -1.0};
    for (std::size_t r = 0; r < c.weights.rows(); ++r) {
      for (std::size_t col = 0; col < c.weights.cols(); ++col) {
        const double brute = score_oracle(c.weights, c.inputs, g, r, col);
        const double err = relative_error(scores(r, col), brute);
        if (err > worst.rel_err) worst = {i, OracleQuantity::score, scores(r, col), brute, err};
      }
    }
    reports.push_back(worst);
  }
  return reports;
}

std::vector<OracleReport> unblocked_suite(SeedRange seeds, const EngineConfig& cfg) {
  std::vector<OracleReport> reports;
  for (std::size_t i = 0; i < seeds.count; ++i) {
    const LayerCase c = make_layer_case(seeds.at(i), 16, 16, 64);
    const QuantResult engine = run_septq(c.weights, c.inputs, cfg);
    const QuantResult ref =
        unblocked_reference(c.weights, c.inputs, engine.mask, engine.grid, cfg.damping_frac);
    reports.push_back({i, OracleQuantity::layer_error, engine.metrics.layer_error,
                       ref.metrics.layer_error,
                       relative_error(engine.metrics.layer_error, ref.metrics.layer_error)});
  }
  return reports;
}

SuiteSummary summarize(const std::vector<OracleReport>& reports) {
  SuiteSummary s;
  for (const OracleReport& r : reports) {
    switch (r.quantity) {
      case OracleQuantity::delta:
        s.max_delta_rel_err = std::max(s.max_delta_rel_err, r.rel_err);
        s.passed = s.passed && r.rel_err < kDeltaTolerance;
        break;
      case OracleQuantity::score:
        s.max_score_rel_err = std::max(s.max_score_rel_err, r.rel_err);
        s.passed = s.passed && r.rel_err < kScoreTolerance;
        break;
      case OracleQuantity::layer_error:
        s.max_layer_rel_err = std::max(s.max_layer_rel_err, r.rel_err);
        s.passed = s.passed && r.rel_err < kLayerErrorTolerance;
        break;
    }
  }
  return s;
}

}  // namespace septq::oracles
