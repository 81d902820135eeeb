#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>

#include <json.hpp>

#include "septq/engine.hpp"
#include "septq/matrix_io.hpp"

namespace septq::cli {

inline constexpr const char* kToolName = "septq";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kMetricsSchemaVersion = 1;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,       // numerical failure or an oracle comparison over tolerance
  kBadInput = 2,      // missing, unreadable or malformed file
  kShapeMismatch = 3, // W.cols != X.rows and friends
  kBadConfig = 4,     // invalid config file or flag value
};

struct RunOptions {
  EngineConfig engine;
  std::uint64_t seed = 0;
  MatrixFormat format = MatrixFormat::binary_f32;
};

/// Applies the keys of a config object on top of `opts`. Unknown keys and
/// out-of-range values raise ConfigError.
void apply_config(const nlohmann::json& j, RunOptions& opts);

/// The config as it is recorded in manifest.json; apply_config accepts it.
nlohmann::json config_to_json(const RunOptions& opts);

/// Entry point shared by the executable and the tests. Returns an ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace septq::cli
