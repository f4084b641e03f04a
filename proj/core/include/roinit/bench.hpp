#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "roinit/pipeline.hpp"

namespace roinit {

/// Monte Carlo experiment description: a scenario preset swept over noise
/// levels, both estimators run on identical data per trial.
struct ExperimentSpec {
  std::string preset = "static2d";
  std::vector<double> sigmas = {0.01, 0.03, 0.05, 0.08, 0.1};
  int trials = 100;
  std::uint64_t seed = 1;
  int threads = 1;
  bool run_sdp = true;
  bool run_ls = true;
  PipelineOptions pipeline;
};

struct TrialRecord {
  int trial = 0;
  double sigma_r = 0.0;
  std::string method;  // "sdp" | "ls"
  double pos_err = std::numeric_limits<double>::quiet_NaN();
  double rot_err = std::numeric_limits<double>::quiet_NaN();
  double f_eig = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
  double cost = std::numeric_limits<double>::quiet_NaN();
  double t_build = std::numeric_limits<double>::quiet_NaN();
  double t_sdp = std::numeric_limits<double>::quiet_NaN();
  double t_extract = std::numeric_limits<double>::quiet_NaN();
  std::string status;
};

struct MethodSummary {
  double pos_median = 0.0, pos_q1 = 0.0, pos_q3 = 0.0;
  double rot_median = 0.0, rot_q1 = 0.0, rot_q3 = 0.0;
  int count = 0;
};

struct LevelSummary {
  double sigma = 0.0;
  MethodSummary sdp;
  MethodSummary ls;
  double feig_median = 0.0;
  double rank1_fraction = 0.0;
  int failures = 0;
};

struct ExperimentResult {
  std::string preset;
  std::vector<TrialRecord> records;
  std::vector<LevelSummary> summary;
  bool any_numerical_failure = false;
};

/// Called per finished trial under an internal lock; both reports carry the
/// full solver output for in-flight verification.
using TrialCallback = std::function<void(int level, int trial, const Scenario& scenario,
                                         const EstimateReport* sdp,
                                         const EstimateReport* ls)>;

/// Runs trials across all noise levels. Deterministic for a given seed
/// independent of the thread count: every trial derives its own RNG streams
/// and writes to a preallocated slot. Solver failures land in the record's
/// status field; the sweep never aborts.
ExperimentResult run_experiment(const ExperimentSpec& spec,
                                const TrialCallback& callback = {});

struct TightnessRow {
  double sigma = 0.0;
  double feig_min = 0.0, feig_q1 = 0.0, feig_median = 0.0, feig_q3 = 0.0, feig_max = 0.0;
};

struct TightnessTable {
  std::vector<TightnessRow> rows;
  bool median_nonincreasing = false;
  ExperimentResult base;
};

/// SDP-only sweep recording the f_eig distribution per noise level and
/// whether the median decays with the noise.
TightnessTable noise_tightness_sweep(const ExperimentSpec& spec);

/// Writes trials.csv, summary.csv and the per-metric box-plot SVGs.
void emit_outputs(const ExperimentResult& result, const std::filesystem::path& dir);
void write_trials_csv(const std::vector<TrialRecord>& records,
                      const std::filesystem::path& path);
std::vector<TrialRecord> read_trials_csv(const std::filesystem::path& path);
void write_summary_csv(const std::vector<LevelSummary>& summary,
                       const std::filesystem::path& path);
void write_tightness_csv(const TightnessTable& table, const std::filesystem::path& path);
void write_box_plot_svg(const ExperimentResult& result, const std::string& metric,
                        const std::filesystem::path& path);

/// Type-7 quantile (linear interpolation) of unsorted data; p in [0, 1].
double quantile(std::vector<double> values, double p);

}  // namespace roinit
