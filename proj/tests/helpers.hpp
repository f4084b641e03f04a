#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>

#include "roinit/pipeline.hpp"

namespace roinit::test {

inline std::filesystem::path cache_dir() {
  return std::filesystem::path("roinit-test-cache");
}

struct ScenarioBundle {
  Scenario scenario;
  GroundTruth truth;
};

inline ScenarioBundle make_scenario(const std::string& preset, std::uint64_t seed,
                                    double sigma = 0.0) {
  SamplerConfig cfg = SamplerConfig::preset(preset);
  cfg.sigma_r = sigma;
  auto [scenario, truth] = sample_scenario(cfg, seed);
  scenario.measurements = simulate_measurements(scenario, truth, mix_seed(seed, 0xABCD));
  return {scenario, truth};
}

/// Pipelines are expensive to set up (constraint discovery); share one per
/// preset across all tests in the binary.
inline const Pipeline& shared_pipeline(const std::string& preset, bool exact = false) {
  static std::map<std::string, std::unique_ptr<Pipeline>> pipelines;
  const std::string key = preset + (exact ? "#exact" : "");
  auto it = pipelines.find(key);
  if (it == pipelines.end()) {
    SamplerConfig cfg = SamplerConfig::preset(preset);
    Scenario tpl = sample_scenario(cfg, 1).first;
    tpl.measurements.clear();
    PipelineOptions opts;
    opts.exact_dynamic = exact;
    opts.cache_dir = cache_dir();
    it = pipelines.emplace(key, std::make_unique<Pipeline>(tpl, opts)).first;
  }
  return *it->second;
}

inline Variant default_variant(const Scenario& scenario) {
  switch (scenario.mode) {
    case Mode::Static: return Variant::Static;
    case Mode::Dynamic: return Variant::DynamicApprox;
    case Mode::Dynamic25: return Variant::Dynamic25;
  }
  return Variant::Static;
}

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace roinit::test
