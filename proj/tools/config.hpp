#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "gspose/fit.hpp"
#include "gspose/pipeline.hpp"
#include "gspose/synth.hpp"

namespace gspose::cli {

/// Every stage's settings in one place. Loaded from JSON (unknown keys are
/// an error), then overridden by command line flags.
struct PipelineConfig {
  std::uint64_t seed = 0;
  int threads = 0;  // 0: all hardware threads
  std::string category = "synthetic";
  SynthConfig synth;
  FitConfig fit;
  DetectConfig detect;
  double fpr_limit = 0.3;

  /// Propagates seed and shared loss/render settings into the stage configs
  /// and validates all of them.
  void finalize();
};

PipelineConfig load_config(const std::filesystem::path& path);
void merge_config(PipelineConfig& cfg, const nlohmann::json& j);
nlohmann::json to_json(const PipelineConfig& cfg);

}  // namespace gspose::cli
