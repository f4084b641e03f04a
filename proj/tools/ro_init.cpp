// ro-init: range-only pose/trajectory initialization benchmark CLI.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "roinit/bench.hpp"
#include "roinit/redundancy.hpp"

using namespace roinit;

namespace {

void write_report_json(const EstimateReport& report, const Scenario& scenario,
                       const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  auto vec = [](const Eigen::VectorXd& v) {
    std::string s = "[";
    for (int i = 0; i < v.size(); ++i) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", v(i));
      s += buf;
      if (i + 1 < v.size()) s += ",";
    }
    return s + "]";
  };
  auto mat = [&](const Eigen::MatrixXd& m) {
    std::string s = "[";
    for (int i = 0; i < m.rows(); ++i) {
      s += vec(m.row(i).transpose());
      if (i + 1 < m.rows()) s += ",";
    }
    return s + "]";
  };
  os << "{\n";
  os << "  \"method\": \"" << report.method << "\",\n";
  os << "  \"mode\": \"" << to_string(scenario.mode) << "\",\n";
  os << "  \"pose\": {\"R\": " << mat(report.pose.rotation().matrix()) << ", \"p\": "
     << vec(report.pose.translation()) << "},\n";
  os << "  \"twist\": {\"w\": " << vec(report.twist.angular) << ", \"v\": "
     << vec(report.twist.linear) << "},\n";
  if (report.method == "sdp") {
    os << "  \"f_eig\": " << report.certificate.f_eig << ",\n";
    os << "  \"rank1\": " << (report.certificate.rank1 ? "true" : "false") << ",\n";
    os << "  \"duality_gap_rel\": " << report.certificate.duality_gap_rel << ",\n";
    os << "  \"primal_obj\": " << report.primal_obj << ",\n";
    os << "  \"dual_obj\": " << report.dual_obj << ",\n";
    os << "  \"status\": \"" << to_string(report.sdp_status) << "\",\n";
    os << "  \"timing\": {\"build_s\": " << report.timing.build_s << ", \"discover_s\": "
       << report.timing.discover_s << ", \"sdp_s\": " << report.timing.sdp_s
       << ", \"extract_s\": " << report.timing.extract_s << ", \"refine_s\": "
       << report.timing.refine_s << "},\n";
  }
  os << "  \"cost\": " << report.exact_cost;
  if (!std::isnan(report.position_error)) {
    os << ",\n  \"position_error\": " << report.position_error;
    os << ",\n  \"rotation_error\": " << report.rotation_error;
  }
  os << "\n}\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Globally optimal range-only pose and trajectory initialization"};
  app.require_subcommand(1);

  // ---- bench ----
  auto* bench = app.add_subcommand("bench", "Monte Carlo comparison of SDP vs local solver");
  ExperimentSpec spec;
  spec.sigmas.clear();
  std::string bench_out = "bench-out";
  bool exact_dynamic = false, no_refine = false, tightness = false;
  bench->add_option("--preset", spec.preset,
                    "Scenario preset: static2d|static3d|dynamic2d|dynamic25d")
      ->default_val("static2d");
  bench->add_option("--sigma", spec.sigmas, "Noise levels (std of squared-range noise, m^2)")
      ->expected(-1);
  bench->add_option("--trials", spec.trials, "Trials per noise level")->default_val(100);
  bench->add_option("--seed", spec.seed, "Master seed")->default_val(1);
  bench->add_option("--out", bench_out, "Output directory")->default_val("bench-out");
  bench->add_option("--threads", spec.threads, "Worker threads")->default_val(1);
  bench->add_flag("--exact-dynamic", exact_dynamic,
                  "Use the chained per-step formulation for dynamic scenarios");
  bench->add_flag("--no-refine", no_refine, "Skip the local refinement pass");
  bench->add_flag("--tightness", tightness,
                  "Record the eigenvalue-ratio distribution per noise level");

  // ---- solve ----
  auto* solve = app.add_subcommand("solve", "Estimate from a scenario file");
  std::string scenario_file, method = "sdp", solve_out = "estimate.json";
  std::uint64_t solve_seed = 1;
  bool solve_exact = false, solve_no_refine = false;
  solve->add_option("--scenario", scenario_file, "Scenario JSON file")->required();
  solve->add_option("--method", method, "sdp or ls")->default_val("sdp");
  solve->add_option("--out", solve_out, "Report output file")->default_val("estimate.json");
  solve->add_option("--seed", solve_seed, "Local-solver initialization seed")->default_val(1);
  solve->add_flag("--exact-dynamic", solve_exact,
                  "Use the chained per-step formulation for dynamic scenarios");
  solve->add_flag("--no-refine", solve_no_refine, "Skip the local refinement pass");

  // ---- discover ----
  auto* discover = app.add_subcommand("discover", "Write the redundant-constraint basis");
  std::string discover_preset = "static2d", discover_out = "basis.txt";
  discover->add_option("--preset", discover_preset, "Scenario preset")->required();
  discover->add_option("--out", discover_out, "Basis output file")->default_val("basis.txt");

  // ---- simulate ----
  auto* simulate = app.add_subcommand("simulate", "Write a sampled scenario file");
  std::string sim_preset = "static2d", sim_out = "scenario.json";
  std::uint64_t sim_seed = 1;
  double sim_sigma = 0.0;
  simulate->add_option("--preset", sim_preset, "Scenario preset")->required();
  simulate->add_option("--sigma", sim_sigma, "Noise std (squared-range units, m^2)")
      ->default_val(0.0);
  simulate->add_option("--seed", sim_seed, "Sampling seed")->default_val(1);
  simulate->add_option("--out", sim_out, "Scenario output file")->default_val("scenario.json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bench) {
      if (spec.sigmas.empty()) spec.sigmas = {0.01, 0.03, 0.05, 0.08, 0.1};
      spec.pipeline.exact_dynamic = exact_dynamic;
      if (no_refine) spec.pipeline.refine = false;
      const std::filesystem::path dir(bench_out);
      if (tightness) {
        const TightnessTable table = noise_tightness_sweep(spec);
        std::filesystem::create_directories(dir);
        write_tightness_csv(table, dir / "tightness.csv");
        emit_outputs(table.base, dir);
        std::printf("median eigenvalue ratio %s across noise levels\n",
                    table.median_nonincreasing ? "is nonincreasing" : "INCREASES");
        return table.base.any_numerical_failure ? 1 : 0;
      }
      const ExperimentResult result = run_experiment(spec);
      emit_outputs(result, dir);
      for (const auto& level : result.summary) {
        std::printf("sigma %.4g: sdp pos median %.4g m", level.sigma, level.sdp.pos_median);
        if (level.ls.count > 0) std::printf(", ls pos median %.4g m", level.ls.pos_median);
        std::printf(", rank1 fraction %.2f, failures %d\n", level.rank1_fraction,
                    level.failures);
      }
      std::printf("outputs in %s\n", dir.string().c_str());
      return result.any_numerical_failure ? 1 : 0;
    }

    if (*solve) {
      const Scenario scenario = load_scenario(scenario_file);
      PipelineOptions opts;
      opts.exact_dynamic = solve_exact;
      if (solve_no_refine) opts.refine = false;
      Pipeline pipeline(scenario, opts);
      EstimateReport report;
      if (method == "sdp") {
        report = pipeline.estimate_sdp(scenario);
      } else if (method == "ls") {
        report = pipeline.estimate_ls(scenario, solve_seed);
      } else {
        std::fprintf(stderr, "unknown method '%s' (expected sdp or ls)\n", method.c_str());
        return 2;
      }
      write_report_json(report, scenario, solve_out);
      std::printf("%s estimate written to %s", report.method.c_str(), solve_out.c_str());
      if (!std::isnan(report.position_error)) {
        std::printf(" (position error %.4g m)", report.position_error);
      }
      std::printf("\n");
      return report.method == "sdp" && report.sdp_status == SdpStatus::NumericalFailure ? 1
                                                                                        : 0;
    }

    if (*discover) {
      SamplerConfig cfg = SamplerConfig::preset(discover_preset);
      const Scenario tpl = sample_scenario(cfg, 1).first;
      const Variant variant = tpl.mode == Mode::Static ? Variant::Static
                              : tpl.mode == Mode::Dynamic25 ? Variant::Dynamic25
                                                            : Variant::DynamicApprox;
      const ConstraintBasis basis = discover_constraints(tpl, variant);
      save_basis(basis, discover_out);
      std::printf("%d constraints (face %d, reduced %d) written to %s\n", basis.size(),
                  basis.face_dim(), basis.reduced_size(), discover_out.c_str());
      return 0;
    }

    if (*simulate) {
      SamplerConfig cfg = SamplerConfig::preset(sim_preset);
      cfg.sigma_r = sim_sigma;
      auto [scenario, truth] = sample_scenario(cfg, sim_seed);
      scenario.measurements = simulate_measurements(scenario, truth, mix_seed(sim_seed, 1));
      save_scenario(scenario, sim_out);
      std::printf("scenario with %zu measurements written to %s\n",
                  scenario.measurements.size(), sim_out.c_str());
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
