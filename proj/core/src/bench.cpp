#include "roinit/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace roinit {

namespace {

std::string fmt9(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

TrialRecord record_from(const EstimateReport& report, int trial, double sigma) {
  TrialRecord r;
  r.trial = trial;
  r.sigma_r = sigma;
  r.method = report.method;
  r.pos_err = report.position_error;
  r.rot_err = report.rotation_error;
  r.cost = report.exact_cost;
  if (report.method == "sdp") {
    r.f_eig = report.certificate.f_eig;
    r.gap = report.certificate.duality_gap_rel;
    r.t_build = report.timing.build_s;
    r.t_sdp = report.timing.sdp_s;
    r.t_extract = report.timing.extract_s;
    r.status = to_string(report.sdp_status);
  } else {
    r.status = report.lm_converged ? "converged" : "max-iter";
  }
  return r;
}

}  // namespace

double quantile(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double idx = p * (values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(idx));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = idx - lo;
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const TrialCallback& callback) {
  if (spec.trials < 1) throw Error("experiment needs at least one trial");
  for (double s : spec.sigmas) {
    if (s < 0.0) throw Error("noise levels must be nonnegative");
  }

  SamplerConfig config = SamplerConfig::preset(spec.preset);
  Scenario tpl;
  {
    SamplerConfig c = config;
    c.sigma_r = spec.sigmas.empty() ? 0.0 : spec.sigmas.front();
    tpl = sample_scenario(c, mix_seed(spec.seed, 0)).first;
    tpl.measurements.clear();
  }
  const Pipeline pipeline(tpl, spec.pipeline);

  const int levels = static_cast<int>(spec.sigmas.size());
  const int per_trial = (spec.run_sdp ? 1 : 0) + (spec.run_ls ? 1 : 0);
  ExperimentResult result;
  result.preset = spec.preset;
  result.records.resize(static_cast<std::size_t>(levels) * spec.trials * per_trial);
  std::atomic<bool> any_failure{false};
  std::atomic<int> next{0};
  std::mutex callback_mutex;
  const int total = levels * spec.trials;

  auto worker = [&]() {
    for (int job = next.fetch_add(1); job < total; job = next.fetch_add(1)) {
      const int level = job / spec.trials;
      const int trial = job % spec.trials;
      const double sigma = spec.sigmas[level];
      const std::uint64_t trial_seed =
          mix_seed(spec.seed, (static_cast<std::uint64_t>(level) << 32) |
                                  static_cast<std::uint64_t>(trial));
      SamplerConfig c = config;
      c.sigma_r = sigma;
      auto [scenario, truth] = sample_scenario(c, mix_seed(trial_seed, 1));
      scenario.measurements = simulate_measurements(scenario, truth, mix_seed(trial_seed, 2));

      EstimateReport sdp_report, ls_report;
      bool have_sdp = false, have_ls = false;
      std::size_t slot = static_cast<std::size_t>(job) * per_trial;
      if (spec.run_sdp) {
        TrialRecord rec;
        try {
          sdp_report = pipeline.estimate_sdp(scenario);
          have_sdp = true;
          rec = record_from(sdp_report, trial, sigma);
        } catch (const Error& e) {
          rec.trial = trial;
          rec.sigma_r = sigma;
          rec.method = "sdp";
          rec.status = std::string("error: ") + e.what();
          any_failure = true;
        }
        if (have_sdp && sdp_report.sdp_status == SdpStatus::NumericalFailure) {
          any_failure = true;
        }
        result.records[slot++] = std::move(rec);
      }
      if (spec.run_ls) {
        ls_report = pipeline.estimate_ls(scenario, mix_seed(trial_seed, 3));
        have_ls = true;
        result.records[slot++] = record_from(ls_report, trial, sigma);
      }
      if (callback) {
        std::scoped_lock lock(callback_mutex);
        callback(level, trial, scenario, have_sdp ? &sdp_report : nullptr,
                 have_ls ? &ls_report : nullptr);
      }
    }
  };

  const int threads = std::max(1, spec.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  result.any_numerical_failure = any_failure.load();

  // Per-level summaries.
  for (int level = 0; level < levels; ++level) {
    LevelSummary ls;
    ls.sigma = spec.sigmas[level];
    std::vector<double> sdp_pos, sdp_rot, ls_pos, ls_rot, feig;
    int rank1 = 0, sdp_count = 0;
    for (const auto& r : result.records) {
      if (r.sigma_r != ls.sigma || r.method.empty()) continue;
      if (r.method == "sdp") {
        if (r.status.rfind("error", 0) == 0 || r.status == "numerical-failure") {
          ++ls.failures;
          continue;
        }
        ++sdp_count;
        sdp_pos.push_back(r.pos_err);
        sdp_rot.push_back(r.rot_err);
        feig.push_back(r.f_eig);
        if (!std::isnan(r.f_eig) && r.f_eig >= 5.0) ++rank1;
      } else {
        ls_pos.push_back(r.pos_err);
        ls_rot.push_back(r.rot_err);
      }
    }
    auto fill = [](MethodSummary& m, std::vector<double>& pos, std::vector<double>& rot) {
      m.count = static_cast<int>(pos.size());
      if (pos.empty()) return;
      m.pos_median = quantile(pos, 0.5);
      m.pos_q1 = quantile(pos, 0.25);
      m.pos_q3 = quantile(pos, 0.75);
      m.rot_median = quantile(rot, 0.5);
      m.rot_q1 = quantile(rot, 0.25);
      m.rot_q3 = quantile(rot, 0.75);
    };
    fill(ls.sdp, sdp_pos, sdp_rot);
    fill(ls.ls, ls_pos, ls_rot);
    ls.feig_median = quantile(feig, 0.5);
    ls.rank1_fraction = sdp_count > 0 ? static_cast<double>(rank1) / sdp_count : 0.0;
    result.summary.push_back(ls);
  }
  return result;
}

TightnessTable noise_tightness_sweep(const ExperimentSpec& spec) {
  ExperimentSpec sdp_only = spec;
  sdp_only.run_ls = false;
  TightnessTable table;
  table.base = run_experiment(sdp_only);
  for (double sigma : spec.sigmas) {
    std::vector<double> feig;
    for (const auto& r : table.base.records) {
      if (r.method == "sdp" && r.sigma_r == sigma && !std::isnan(r.f_eig)) {
        feig.push_back(r.f_eig);
      }
    }
    TightnessRow row;
    row.sigma = sigma;
    if (!feig.empty()) {
      row.feig_min = *std::min_element(feig.begin(), feig.end());
      row.feig_max = *std::max_element(feig.begin(), feig.end());
      row.feig_q1 = quantile(feig, 0.25);
      row.feig_median = quantile(feig, 0.5);
      row.feig_q3 = quantile(feig, 0.75);
    }
    table.rows.push_back(row);
  }
  table.median_nonincreasing = true;
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    if (table.rows[i].feig_median > table.rows[i - 1].feig_median + 1e-9) {
      table.median_nonincreasing = false;
    }
  }
  return table;
}

void write_trials_csv(const std::vector<TrialRecord>& records,
                      const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  os << "trial,sigma_r,method,pos_err,rot_err,f_eig,gap,cost,t_build,t_sdp,t_extract,status\n";
  for (const auto& r : records) {
    os << r.trial << ',' << fmt9(r.sigma_r) << ',' << r.method << ',' << fmt9(r.pos_err)
       << ',' << fmt9(r.rot_err) << ',' << fmt9(r.f_eig) << ',' << fmt9(r.gap) << ','
       << fmt9(r.cost) << ',' << fmt9(r.t_build) << ',' << fmt9(r.t_sdp) << ','
       << fmt9(r.t_extract) << ',' << r.status << '\n';
  }
  if (!os.good()) throw Error("write to '" + path.string() + "' failed");
}

std::vector<TrialRecord> read_trials_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path.string() + "' for reading");
  std::string line;
  std::getline(is, line);  // header
  std::vector<TrialRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    while (fields.size() < 12) fields.emplace_back();
    auto num = [](const std::string& s) {
      return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
    };
    TrialRecord r;
    r.trial = std::stoi(fields[0]);
    r.sigma_r = num(fields[1]);
    r.method = fields[2];
    r.pos_err = num(fields[3]);
    r.rot_err = num(fields[4]);
    r.f_eig = num(fields[5]);
    r.gap = num(fields[6]);
    r.cost = num(fields[7]);
    r.t_build = num(fields[8]);
    r.t_sdp = num(fields[9]);
    r.t_extract = num(fields[10]);
    r.status = fields[11];
    out.push_back(std::move(r));
  }
  return out;
}

void write_summary_csv(const std::vector<LevelSummary>& summary,
                       const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  os << "sigma_r,method,pos_median,pos_q1,pos_q3,rot_median,rot_q1,rot_q3,"
        "feig_median,rank1_fraction,failures\n";
  for (const auto& s : summary) {
    os << fmt9(s.sigma) << ",sdp," << fmt9(s.sdp.pos_median) << ',' << fmt9(s.sdp.pos_q1)
       << ',' << fmt9(s.sdp.pos_q3) << ',' << fmt9(s.sdp.rot_median) << ','
       << fmt9(s.sdp.rot_q1) << ',' << fmt9(s.sdp.rot_q3) << ',' << fmt9(s.feig_median)
       << ',' << fmt9(s.rank1_fraction) << ',' << s.failures << '\n';
    if (s.ls.count > 0) {
      os << fmt9(s.sigma) << ",ls," << fmt9(s.ls.pos_median) << ',' << fmt9(s.ls.pos_q1)
         << ',' << fmt9(s.ls.pos_q3) << ',' << fmt9(s.ls.rot_median) << ','
         << fmt9(s.ls.rot_q1) << ',' << fmt9(s.ls.rot_q3) << ",,,0\n";
    }
  }
  if (!os.good()) throw Error("write to '" + path.string() + "' failed");
}

void write_tightness_csv(const TightnessTable& table, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  os << "sigma_r,feig_min,feig_q1,feig_median,feig_q3,feig_max\n";
  for (const auto& r : table.rows) {
    os << fmt9(r.sigma) << ',' << fmt9(r.feig_min) << ',' << fmt9(r.feig_q1) << ','
       << fmt9(r.feig_median) << ',' << fmt9(r.feig_q3) << ',' << fmt9(r.feig_max) << '\n';
  }
}

namespace {

struct Box {
  double lo = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, hi = 0.0;
  bool valid = false;
};

Box box_of(const std::vector<double>& v) {
  Box b;
  if (v.empty()) return b;
  b.valid = true;
  b.lo = *std::min_element(v.begin(), v.end());
  b.hi = *std::max_element(v.begin(), v.end());
  b.q1 = quantile(v, 0.25);
  b.median = quantile(v, 0.5);
  b.q3 = quantile(v, 0.75);
  return b;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_box_plot_svg(const ExperimentResult& result, const std::string& metric,
                        const std::filesystem::path& path) {
  const bool use_rot = metric == "rot_err";
  const double floor_value = 1e-8;
  std::vector<double> sigmas;
  for (const auto& s : result.summary) sigmas.push_back(s.sigma);

  std::vector<std::pair<Box, Box>> boxes;  // (sdp, ls) per level
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -std::numeric_limits<double>::infinity();
  for (double sigma : sigmas) {
    std::vector<double> sdp_v, ls_v;
    for (const auto& r : result.records) {
      if (r.sigma_r != sigma) continue;
      const double value = use_rot ? r.rot_err : r.pos_err;
      if (std::isnan(value)) continue;
      (r.method == "sdp" ? sdp_v : ls_v).push_back(std::max(value, floor_value));
    }
    Box bs = box_of(sdp_v), bl = box_of(ls_v);
    for (const Box* b : {&bs, &bl}) {
      if (b->valid) {
        vmin = std::min(vmin, b->lo);
        vmax = std::max(vmax, b->hi);
      }
    }
    boxes.emplace_back(bs, bl);
  }
  if (!std::isfinite(vmin)) {
    vmin = floor_value;
    vmax = 1.0;
  }
  const double log_lo = std::floor(std::log10(vmin));
  const double log_hi = std::ceil(std::log10(vmax) + 1e-12);
  const double width = 640.0, height = 420.0, ml = 70.0, mr = 20.0, mt = 40.0, mb = 50.0;
  const double plot_w = width - ml - mr, plot_h = height - mt - mb;
  auto y_of = [&](double v) {
    const double t = (std::log10(std::max(v, floor_value)) - log_lo) /
                     std::max(1e-12, log_hi - log_lo);
    return mt + plot_h * (1.0 - t);
  };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
     << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  os << "  <title>" << xml_escape(result.preset + " " + metric) << "</title>\n";
  os << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
     << "\" fill=\"white\"/>\n";
  os << "  <text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
     << xml_escape(result.preset) << " " << (use_rot ? "rotation error" : "position error (m)")
     << " (SDP blue, LS orange)</text>\n";
  // axes
  os << "  <line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
     << mt + plot_h << "\" stroke=\"black\"/>\n";
  os << "  <line x1=\"" << ml << "\" y1=\"" << mt + plot_h << "\" x2=\"" << ml + plot_w
     << "\" y2=\"" << mt + plot_h << "\" stroke=\"black\"/>\n";
  for (double e = log_lo; e <= log_hi + 1e-9; e += 1.0) {
    const double y = y_of(std::pow(10.0, e));
    os << "  <line x1=\"" << ml - 4 << "\" y1=\"" << y << "\" x2=\"" << ml + plot_w
       << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
    os << "  <text x=\"" << ml - 8 << "\" y=\"" << y + 4
       << "\" text-anchor=\"end\" font-size=\"11\">1e" << static_cast<int>(e) << "</text>\n";
  }
  const int levels = static_cast<int>(sigmas.size());
  const double slot_w = plot_w / std::max(1, levels);
  const double box_w = std::min(40.0, slot_w / 3.0);
  auto draw_box = [&](const Box& b, double cx, const char* color) {
    if (!b.valid) return;
    os << "  <line x1=\"" << cx << "\" y1=\"" << y_of(b.lo) << "\" x2=\"" << cx << "\" y2=\""
       << y_of(b.hi) << "\" stroke=\"" << color << "\"/>\n";
    os << "  <rect x=\"" << cx - box_w / 2 << "\" y=\"" << y_of(b.q3) << "\" width=\"" << box_w
       << "\" height=\"" << std::max(1.0, y_of(b.q1) - y_of(b.q3)) << "\" fill=\"" << color
       << "\" fill-opacity=\"0.35\" stroke=\"" << color << "\"/>\n";
    os << "  <line x1=\"" << cx - box_w / 2 << "\" y1=\"" << y_of(b.median) << "\" x2=\""
       << cx + box_w / 2 << "\" y2=\"" << y_of(b.median) << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
  };
  for (int i = 0; i < levels; ++i) {
    const double cx = ml + slot_w * (i + 0.5);
    draw_box(boxes[i].first, cx - box_w * 0.65, "#1f77b4");
    draw_box(boxes[i].second, cx + box_w * 0.65, "#ff7f0e");
    os << "  <text x=\"" << cx << "\" y=\"" << mt + plot_h + 18
       << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt9(sigmas[i]) << "</text>\n";
  }
  os << "  <text x=\"" << ml + plot_w / 2 << "\" y=\"" << height - 12
     << "\" text-anchor=\"middle\" font-size=\"12\">sigma_r (m^2)</text>\n";
  os << "</svg>\n";

  std::ofstream file(path);
  if (!file) throw Error("cannot open '" + path.string() + "' for writing");
  file << os.str();
  if (!file.good()) throw Error("write to '" + path.string() + "' failed");
}

void emit_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_trials_csv(result.records, dir / "trials.csv");
  write_summary_csv(result.summary, dir / "summary.csv");
  write_box_plot_svg(result, "pos_err", dir / "box_pos_err.svg");
  write_box_plot_svg(result, "rot_err", dir / "box_rot_err.svg");
}

}  // namespace roinit
