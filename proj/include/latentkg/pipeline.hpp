#pragma once

#include "latentkg/cluster.hpp"
#include "latentkg/trace.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace latentkg {

enum class ModelKind { kToy, kExternalTrace };

/// Everything a run depends on. Serialized to `<out>/config.json`; paths are
/// recorded by content hash only so that output trees do not depend on where
/// they were written.
struct RunConfig {
  std::filesystem::path dataset;
  std::filesystem::path out = "latentkg-out";
  std::filesystem::path traces;      // external traces, one directory per claim id
  std::filesystem::path embeddings;  // optional <claim>/<layer>.csv files
  ModelKind model = ModelKind::kToy;
  ModelConfig model_config;  // model_config.seed doubles as the sampling seed
  std::size_t sample = 0;    // 0 keeps every filtered claim
  int scales = kDefaultScales;
  int attribute_dim = kDefaultAttributeDim;
  double quantile = 0.25;
  FeatureMode feature = FeatureMode::kProfile;
  bool include_layer_zero = false;
  bool fallback_uniform = false;
  bool mean_normalize = false;
  unsigned jobs = 1;
};

/// Error raised when a stage's input has not been produced yet.
class MissingArtifactError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Command-line entry point. Exit codes: 0 success, 2 usage, 3 data or
/// format error, 4 degenerate input.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace latentkg
