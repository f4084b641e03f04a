#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "roinit/bench.hpp"

using namespace roinit;

namespace {

ExperimentSpec tiny_spec() {
  ExperimentSpec spec;
  spec.preset = "static2d";
  spec.sigmas = {0.02};
  spec.trials = 3;
  spec.seed = 31;
  spec.pipeline.cache_dir = roinit::test::cache_dir();
  return spec;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Minimal XML well-formedness scan: prolog, balanced tags, quoted
// attributes. Enough to catch emitter mistakes.
bool xml_well_formed(const std::string& text) {
  std::size_t i = 0;
  std::vector<std::string> stack;
  auto skip_ws = [&](std::size_t& p) {
    while (p < text.size() && std::isspace(static_cast<unsigned char>(text[p]))) ++p;
  };
  skip_ws(i);
  if (text.compare(i, 5, "<?xml") == 0) {
    i = text.find("?>", i);
    if (i == std::string::npos) return false;
    i += 2;
  }
  while (i < text.size()) {
    if (text[i] != '<') {
      ++i;
      continue;
    }
    if (text.compare(i, 2, "</") == 0) {
      const std::size_t end = text.find('>', i);
      if (end == std::string::npos || stack.empty()) return false;
      const std::string name = text.substr(i + 2, end - i - 2);
      if (stack.back() != name) return false;
      stack.pop_back();
      i = end + 1;
      continue;
    }
    const std::size_t end = text.find('>', i);
    if (end == std::string::npos) return false;
    std::string inside = text.substr(i + 1, end - i - 1);
    bool self_closing = false;
    if (!inside.empty() && inside.back() == '/') {
      self_closing = true;
      inside.pop_back();
    }
    const std::size_t name_end = inside.find_first_of(" \t\n");
    const std::string name = inside.substr(0, name_end);
    if (name.empty()) return false;
    // attributes must have quoted values
    std::size_t q = inside.find('=');
    while (q != std::string::npos) {
      const std::size_t v = inside.find_first_not_of(' ', q + 1);
      if (v == std::string::npos || inside[v] != '"') return false;
      const std::size_t close = inside.find('"', v + 1);
      if (close == std::string::npos) return false;
      q = inside.find('=', close + 1);
    }
    if (!self_closing) stack.push_back(name);
    i = end + 1;
  }
  return stack.empty();
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("records cover every trial and method") {
  const ExperimentSpec spec = tiny_spec();
  bool callback_saw_both = true;
  int callback_count = 0;
  const ExperimentResult result = run_experiment(
      spec, [&](int, int, const Scenario& scenario, const EstimateReport* sdp,
                const EstimateReport* ls) {
        ++callback_count;
        callback_saw_both = callback_saw_both && sdp != nullptr && ls != nullptr;
        CHECK_FALSE(scenario.measurements.empty());
      });
  CHECK(result.records.size() == 6);  // 3 trials x 2 methods
  CHECK(callback_count == 3);
  CHECK(callback_saw_both);
  CHECK_FALSE(result.any_numerical_failure);
  REQUIRE(result.summary.size() == 1);
  CHECK(result.summary[0].sdp.count == 3);
  CHECK(result.summary[0].ls.count == 3);
}

TEST_CASE("thread count never changes the records") {
  ExperimentSpec spec = tiny_spec();
  spec.trials = 4;
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "roinit-bench-threads";
  std::filesystem::create_directories(dir);

  spec.threads = 1;
  write_trials_csv(run_experiment(spec).records, dir / "a.csv");
  spec.threads = 3;
  write_trials_csv(run_experiment(spec).records, dir / "b.csv");
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("empty record list emits a header-only table") {
  const std::filesystem::path file =
      std::filesystem::temp_directory_path() / "roinit-empty.csv";
  write_trials_csv({}, file);
  const std::string text = slurp(file);
  CHECK(text ==
        "trial,sigma_r,method,pos_err,rot_err,f_eig,gap,cost,t_build,t_sdp,t_extract,status\n");
  std::filesystem::remove(file);
}

TEST_CASE("emitted tables are self-consistent") {
  const ExperimentSpec spec = tiny_spec();
  const ExperimentResult result = run_experiment(spec);
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "roinit-bench-out";
  emit_outputs(result, dir);

  // reparse and recompute the medians the summary reports
  const auto records = read_trials_csv(dir / "trials.csv");
  REQUIRE(records.size() == result.records.size());
  std::vector<double> sdp_pos;
  for (const auto& r : records) {
    if (r.method == "sdp") sdp_pos.push_back(r.pos_err);
  }
  const double recomputed = quantile(sdp_pos, 0.5);
  // summary.csv stores 9 significant digits
  CHECK(std::abs(recomputed - result.summary[0].sdp.pos_median) <=
        1e-8 * (1.0 + std::abs(recomputed)));

  CHECK(xml_well_formed(slurp(dir / "box_pos_err.svg")));
  CHECK(xml_well_formed(slurp(dir / "box_rot_err.svg")));
  std::filesystem::remove_all(dir);
}

TEST_CASE("single-level sweep degenerates to one row") {
  ExperimentSpec spec = tiny_spec();
  spec.preset = "dynamic2d";
  spec.trials = 2;
  spec.sigmas = {0.05};
  const TightnessTable table = noise_tightness_sweep(spec);
  CHECK(table.rows.size() == 1);
  CHECK(table.median_nonincreasing);
  CHECK(table.rows[0].feig_median >= table.rows[0].feig_q1);
}

TEST_CASE("csv numbers round trip at 9 significant digits") {
  TrialRecord r;
  r.trial = 7;
  r.sigma_r = 0.0123456789;
  r.method = "sdp";
  r.pos_err = 1.23456789e-5;
  r.status = "optimal";
  const std::filesystem::path file =
      std::filesystem::temp_directory_path() / "roinit-roundtrip.csv";
  write_trials_csv({r}, file);
  const auto back = read_trials_csv(file);
  REQUIRE(back.size() == 1);
  CHECK(back[0].trial == 7);
  CHECK(back[0].pos_err == doctest::Approx(r.pos_err).epsilon(1e-9));
  CHECK(std::isnan(back[0].f_eig));  // empty field stays absent
  CHECK(back[0].status == "optimal");
  std::filesystem::remove(file);
}

TEST_CASE("invalid experiment specs are rejected") {
  ExperimentSpec spec = tiny_spec();
  spec.trials = 0;
  CHECK_THROWS_AS(run_experiment(spec), Error);
  spec = tiny_spec();
  spec.sigmas = {-0.1};
  CHECK_THROWS_AS(run_experiment(spec), Error);
}

}  // TEST_SUITE
