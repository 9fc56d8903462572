#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "t2i/connector.hpp"
#include "t2i/error.hpp"
#include "t2i/preprocess.hpp"
#include "t2i/reconstruction.hpp"
#include "t2i/registration.hpp"
#include "t2i/se2.hpp"
#include "t2i/serialization.hpp"
#include "t2i/tactile.hpp"

namespace t2i {

inline constexpr const char* kVersion = "1.0.0";

enum class ExperimentMode { grid, random };
enum class Baseline { full, no_preprocess };

inline const char* to_string(ExperimentMode m) { return m == ExperimentMode::grid ? "grid" : "random"; }
inline const char* to_string(Baseline b) { return b == Baseline::full ? "full" : "no_preprocess"; }

struct ExperimentConfig {
  std::string preset_name = "usbc";
  std::optional<ConnectorPreset> inline_preset;
  SensorModel sensor;
  PipelineParams pipeline = PipelineParams::for_sensor(SensorModel{});
  IcpParams icp;
  std::uint64_t seed = 0;
  ExperimentMode mode = ExperimentMode::grid;
  int n_trials = 512;
  Baseline baseline = Baseline::full;
  std::string output_dir;
  bool dump_stages = false;
  bool dump_candidates = false;
  int threads = 1;

  ConnectorPreset resolve_preset() const {
    if (inline_preset) return *inline_preset;
    const auto catalog = preset_catalog();
    return find_preset(catalog, preset_name);
  }

  void validate() const {
    sensor.validate();
    pipeline.validate();
    icp.validate();
    if (mode == ExperimentMode::random && n_trials < 1) {
      throw Error(ErrorCategory::config, "random mode needs n_trials >= 1");
    }
    if (threads < 1) throw Error(ErrorCategory::config, "threads must be >= 1");
    (void)resolve_preset();
  }
};

inline Json config_to_json(const ExperimentConfig& c) {
  Json j{{"preset", c.inline_preset ? preset_to_json(*c.inline_preset) : Json(c.preset_name)},
         {"sensor", sensor_to_json(c.sensor)},
         {"pipeline", pipeline_to_json(c.pipeline)},
         {"icp", icp_to_json(c.icp)},
         {"seed", c.seed},
         {"mode", to_string(c.mode)},
         {"n_trials", c.n_trials},
         {"baseline", to_string(c.baseline)}};
  return j;
}

// Fields absent from `j` keep their current values.
inline void config_update_from_json(ExperimentConfig& c, const Json& j) {
  try {
    if (j.contains("preset")) {
      const Json& p = j.at("preset");
      if (p.is_string()) {
        c.preset_name = p.get<std::string>();
        c.inline_preset.reset();
      } else {
        c.inline_preset = preset_from_json(p);
        c.preset_name = c.inline_preset->name;
      }
    }
    if (j.contains("sensor")) sensor_update_from_json(c.sensor, j.at("sensor"));
    if (j.contains("pipeline")) pipeline_update_from_json(c.pipeline, j.at("pipeline"));
    if (j.contains("icp")) icp_update_from_json(c.icp, j.at("icp"));
    if (j.contains("noise")) c.sensor.gradient_noise_sigma = j.at("noise").get<double>();
    c.seed = j.value("seed", c.seed);
    if (j.contains("mode")) {
      const std::string m = j.at("mode").get<std::string>();
      if (m != "grid" && m != "random") throw Error(ErrorCategory::config, "mode must be grid or random");
      c.mode = m == "grid" ? ExperimentMode::grid : ExperimentMode::random;
    }
    c.n_trials = j.value("n_trials", c.n_trials);
    if (j.contains("baseline")) {
      const std::string b = j.at("baseline").get<std::string>();
      if (b != "full" && b != "no_preprocess") throw Error(ErrorCategory::config, "baseline must be full or no_preprocess");
      c.baseline = b == "full" ? Baseline::full : Baseline::no_preprocess;
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.threads = j.value("threads", c.threads);
  } catch (const Json::exception& e) {
    throw Error(ErrorCategory::config, std::string("malformed config: ") + e.what());
  }
}

// SplitMix64 finaliser over (seed, stream, index): independent per-trial
// streams that do not depend on scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream * 0x100000001b3ull + index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

enum SeedStream : std::uint64_t { kPegNoise = 1, kHoleNoise = 2, kRandomPose = 3, kIcpJitter = 4 };

struct StageTimings {
  double render_ms = 0.0;
  double reconstruct_ms = 0.0;
  double preprocess_ms = 0.0;
  double register_ms = 0.0;
};

struct TrialRecord {
  int trial_id = 0;
  Pose2 true_offset;
  std::optional<Pose2> estimate;
  double trans_error = 0.0;
  std::optional<double> rot_error;
  double inlier_ratio = 0.0;
  StageTimings timings;
  bool failed = false;
  std::string failure_stage;
  std::string failure_message;

  bool operator==(const TrialRecord& o) const {
    auto same_pose = [](const std::optional<Pose2>& a, const std::optional<Pose2>& b) {
      if (a.has_value() != b.has_value()) return false;
      return !a || (a->theta() == b->theta() && a->t() == b->t());
    };
    return trial_id == o.trial_id && true_offset.theta() == o.true_offset.theta() &&
           true_offset.t() == o.true_offset.t() && same_pose(estimate, o.estimate) && trans_error == o.trans_error &&
           rot_error == o.rot_error && inlier_ratio == o.inlier_ratio && failed == o.failed &&
           failure_stage == o.failure_stage && failure_message == o.failure_message;
  }
};

struct SummaryStats {
  std::string preset;
  std::string baseline;
  int trial_count = 0;
  int failure_count = 0;
  double trans_mean = 0.0;
  double trans_std = 0.0;
  std::optional<double> rot_mean;
  std::optional<double> rot_std;

  bool operator==(const SummaryStats&) const = default;
};

// Peg observation reconstructed once and shared read-only by all trials.
struct PegReference {
  ContactObservation observation;
  PointCloud3 cloud;
};

inline PegReference make_peg_reference(const ConnectorPreset& preset, const ExperimentConfig& config) {
  PegReference ref;
  ref.observation = render_peg_contact(preset.peg, Pose2::identity(), config.sensor,
                                       derive_seed(config.seed, kPegNoise, 0));
  ref.cloud = height_to_cloud(integrate_gradients(ref.observation.gradients));
  return ref;
}

// Registration works in grid coordinates (pixel 0,0 at the origin); the
// sensor frame is centred. Conjugates a grid-frame estimate into it.
inline Pose2 grid_to_sensor_frame(const Pose2& grid_pose, const SensorModel& sensor) {
  const Pose2 to_sensor = Pose2::translation(sensor.grid_origin());
  return compose(compose(to_sensor, grid_pose), inverse(to_sensor));
}

namespace detail {

class Stopwatch {
 public:
  double lap_ms() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline std::string trial_prefix(const std::string& dir, int id) {
  std::ostringstream os;
  os << dir << "/trial" << std::setw(4) << std::setfill('0') << id;
  return os.str();
}

inline void dump_candidates_csv(const std::string& path, const RegistrationResult& reg) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCategory::io, "cannot open '" + path + "' for writing");
  os << "alpha_deg,restart,ok,theta_deg,tx_mm,ty_mm,inlier_ratio,rmse_mm,iterations\n" << std::setprecision(17);
  for (const Candidate& c : reg.candidates) {
    os << c.alpha_deg << ',' << c.restart << ',' << (c.ok ? 1 : 0) << ',' << c.icp.pose.theta_deg() << ','
       << c.icp.pose.tx() << ',' << c.icp.pose.ty() << ',' << c.icp.inlier_ratio << ',' << c.icp.rmse << ','
       << c.icp.iterations << '\n';
  }
}

}  // namespace detail

// Full pipeline for one hole offset: render, integrate, preprocess, register,
// score. Stage errors produce a failed record instead of propagating.
inline TrialRecord run_trial(const ConnectorPreset& preset, const Pose2& true_offset, const ExperimentConfig& config,
                             const PegReference& peg, int trial_id) {
  TrialRecord rec;
  rec.trial_id = trial_id;
  rec.true_offset = true_offset;
  const bool dump = !config.output_dir.empty();
  std::string stage = "render";
  detail::Stopwatch sw;
  try {
    const ContactObservation hole = render_hole_contact(preset.hole, true_offset, config.sensor,
                                                        derive_seed(config.seed, kHoleNoise, static_cast<std::uint64_t>(trial_id)));
    rec.timings.render_ms = sw.lap_ms();

    stage = "reconstruct";
    const PointCloud3 hole_cloud = height_to_cloud(integrate_gradients(hole.gradients));
    rec.timings.reconstruct_ms = sw.lap_ms();

    Pose2 grid_estimate;
    if (config.baseline == Baseline::full) {
      stage = "preprocess";
      const PreprocessStages st = preprocess_pair_stages(peg.cloud, hole_cloud, config.pipeline);
      rec.timings.preprocess_ms = sw.lap_ms();
      if (dump && config.dump_stages) {
        const std::string pre = detail::trial_prefix(config.output_dir, trial_id);
        write_cloud_csv(pre + "_peg_filtered.csv", st.peg_filtered);
        write_cloud_csv(pre + "_peg_projected.csv", st.peg_projected);
        write_cloud_csv(pre + "_hole_flipped.csv", st.hole_flipped);
        write_cloud_csv(pre + "_hole_filtered.csv", st.hole_filtered);
        write_cloud_csv(pre + "_hole_projected.csv", st.hole_projected);
        write_cloud_csv(pre + "_hole_clean.csv", st.hole_clean);
      }

      stage = "register";
      IcpParams icp = config.icp;
      icp.seed = derive_seed(config.seed, kIcpJitter, static_cast<std::uint64_t>(trial_id));
      const RegistrationResult reg = multi_init_register(st.peg_projected, st.hole_clean, icp);
      rec.timings.register_ms = sw.lap_ms();
      if (dump && config.dump_candidates) {
        detail::dump_candidates_csv(detail::trial_prefix(config.output_dir, trial_id) + "_candidates.csv", reg);
      }
      grid_estimate = reg.best;
      rec.inlier_ratio = reg.best_inlier_ratio;
    } else {
      stage = "preprocess";
      const PointCloud3 flipped = flip_z(hole_cloud);
      rec.timings.preprocess_ms = sw.lap_ms();
      stage = "register";
      const Icp3dResult icp = icp_3d(peg.cloud, flipped, Eigen::Isometry3d::Identity(), config.icp);
      rec.timings.register_ms = sw.lap_ms();
      grid_estimate = project_to_se2(icp.pose);
    }

    const Pose2 est = grid_to_sensor_frame(grid_estimate, config.sensor);
    rec.estimate = est;
    rec.trans_error = trans_error(est, true_offset);
    rec.rot_error = rot_error(est, true_offset, preset.symmetry);
  } catch (const Error& e) {
    rec.failed = true;
    rec.failure_stage = e.stage().empty() ? stage : stage + ":" + e.stage();
    rec.failure_message = std::string(category_name(e.category())) + ": " + e.what();
    rec.estimate.reset();
    rec.rot_error.reset();
    rec.trans_error = 0.0;
    rec.inlier_ratio = 0.0;
  }
  return rec;
}

struct TrialSpec {
  int trial_id = 0;
  Pose2 offset;
  std::optional<PipelineParams> pipeline_override;
};

inline std::vector<TrialSpec> trial_specs(const ExperimentConfig& config) {
  std::vector<TrialSpec> specs;
  if (config.mode == ExperimentMode::grid) {
    const auto grid = perturbation_grid();
    for (std::size_t i = 0; i < grid.size(); ++i) specs.push_back({static_cast<int>(i), grid[i], std::nullopt});
  } else {
    for (int i = 0; i < config.n_trials; ++i) {
      specs.push_back({i, random_perturbation(derive_seed(config.seed, kRandomPose, static_cast<std::uint64_t>(i))),
                       std::nullopt});
    }
  }
  return specs;
}

// Runs trials on `config.threads` workers. Each record depends only on its
// TrialSpec and the shared peg reference, so the output is schedule-independent.
inline std::vector<TrialRecord> run_trials(const ConnectorPreset& preset, const std::vector<TrialSpec>& specs,
                                           const ExperimentConfig& config, const PegReference& peg) {
  std::vector<TrialRecord> out(specs.size());
  auto run_one = [&](std::size_t i) {
    if (specs[i].pipeline_override) {
      ExperimentConfig local = config;
      local.pipeline = *specs[i].pipeline_override;
      out[i] = run_trial(preset, specs[i].offset, local, peg, specs[i].trial_id);
    } else {
      out[i] = run_trial(preset, specs[i].offset, config, peg, specs[i].trial_id);
    }
  };
  const int workers = std::min<int>(config.threads, static_cast<int>(specs.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < specs.size(); ++i) run_one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < specs.size(); i = next++) run_one(i);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

// Mean and population standard deviation over successful trials.
inline SummaryStats summarize(const std::vector<TrialRecord>& records, const std::string& preset, Baseline baseline) {
  SummaryStats s;
  s.preset = preset;
  s.baseline = to_string(baseline);
  s.trial_count = static_cast<int>(records.size());
  std::vector<double> trans, rot;
  for (const TrialRecord& r : records) {
    if (r.failed) {
      ++s.failure_count;
      continue;
    }
    trans.push_back(r.trans_error);
    if (r.rot_error) rot.push_back(*r.rot_error);
  }
  auto mean_std = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    return std::pair{m, std::sqrt(var / static_cast<double>(v.size()))};
  };
  if (!trans.empty()) std::tie(s.trans_mean, s.trans_std) = mean_std(trans);
  if (!rot.empty()) {
    const auto [m, sd] = mean_std(rot);
    s.rot_mean = m;
    s.rot_std = sd;
  }
  return s;
}

struct ExperimentResult {
  SummaryStats stats;
  std::vector<TrialRecord> records;
};

inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const ConnectorPreset preset = config.resolve_preset();
  if (!config.output_dir.empty()) std::filesystem::create_directories(config.output_dir);
  const PegReference peg = make_peg_reference(preset, config);
  ExperimentResult res;
  res.records = run_trials(preset, trial_specs(config), config, peg);
  res.stats = summarize(res.records, preset.name, config.baseline);
  return res;
}

inline ExperimentResult run_grid_experiment(const ConnectorPreset& preset, ExperimentConfig config) {
  config.inline_preset = preset;
  config.mode = ExperimentMode::grid;
  return run_experiment(config);
}

inline ExperimentResult run_baseline_no_preprocess(const ConnectorPreset& preset, ExperimentConfig config) {
  config.baseline = Baseline::no_preprocess;
  return run_grid_experiment(preset, std::move(config));
}

// --- reports ------------------------------------------------------------

inline constexpr const char* kTrialsCsvHeader =
    "trial_id,true_theta_deg,true_tx_mm,true_ty_mm,est_theta_deg,est_tx_mm,est_ty_mm,"
    "trans_error_mm,rot_error_deg,inlier_ratio,failed,failure_stage";

namespace detail {

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string trials_csv(const std::vector<TrialRecord>& records) {
  std::ostringstream os;
  os << kTrialsCsvHeader << '\n';
  using detail::fmt17;
  for (const TrialRecord& r : records) {
    os << r.trial_id << ',' << fmt17(r.true_offset.theta_deg()) << ',' << fmt17(r.true_offset.tx()) << ','
       << fmt17(r.true_offset.ty()) << ',';
    if (r.estimate) {
      os << fmt17(r.estimate->theta_deg()) << ',' << fmt17(r.estimate->tx()) << ',' << fmt17(r.estimate->ty()) << ','
         << fmt17(r.trans_error) << ',';
    } else {
      os << ",,,,";
    }
    os << (r.rot_error ? fmt17(*r.rot_error) : std::string()) << ',' << fmt17(r.inlier_ratio) << ','
       << (r.failed ? 1 : 0) << ',' << r.failure_stage << '\n';
  }
  return os.str();
}

inline Json stats_to_json(const SummaryStats& s) {
  Json j{{"preset", s.preset},
         {"baseline", s.baseline},
         {"trial_count", s.trial_count},
         {"failure_count", s.failure_count},
         {"trans_error_mm", {{"mean", s.trans_mean}, {"std", s.trans_std}}}};
  j["rot_error_deg"] = s.rot_mean ? Json{{"mean", *s.rot_mean}, {"std", *s.rot_std}} : Json(nullptr);
  return j;
}

inline SummaryStats stats_from_json(const Json& j) {
  SummaryStats s;
  s.preset = j.at("preset").get<std::string>();
  s.baseline = j.at("baseline").get<std::string>();
  s.trial_count = j.at("trial_count").get<int>();
  s.failure_count = j.at("failure_count").get<int>();
  s.trans_mean = j.at("trans_error_mm").at("mean").get<double>();
  s.trans_std = j.at("trans_error_mm").at("std").get<double>();
  if (!j.at("rot_error_deg").is_null()) {
    s.rot_mean = j.at("rot_error_deg").at("mean").get<double>();
    s.rot_std = j.at("rot_error_deg").at("std").get<double>();
  }
  return s;
}

inline Json summary_json(const SummaryStats& stats, const ExperimentConfig& config) {
  return {{"version", kVersion},
          {"seed", config.seed},
          {"stats", stats_to_json(stats)},
          {"config", config_to_json(config)},
          {"metadata",
           {{"std_definition", "population"},
            {"statistics_over", "successful trials; failures counted separately"},
            {"estimate_frame", "sensor frame, peg at identity; estimate maps peg points onto the hole"},
            {"baseline_no_preprocess", "hole flipped only; 3D point-to-point ICP, single identity initialisation"},
            {"gradient_mae_normalization", "per-channel min-max over the union of prediction and ground truth"}}}};
}

// Writes trials.csv, timings.csv and summary.json into `dir`.
inline void emit_reports(const std::vector<TrialRecord>& records, const SummaryStats& stats,
                         const ExperimentConfig& config, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCategory::io, "cannot create '" + dir + "': " + ec.message());
  auto write = [](const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCategory::io, "cannot open '" + path + "' for writing");
    os << text;
    if (!os) throw Error(ErrorCategory::io, "write failed for '" + path + "'");
  };
  write(dir + "/trials.csv", trials_csv(records));

  // Wall-clock timings vary run to run, so they stay out of trials.csv.
  std::ostringstream t;
  t << "trial_id,render_ms,reconstruct_ms,preprocess_ms,register_ms\n";
  for (const TrialRecord& r : records) {
    t << r.trial_id << ',' << r.timings.render_ms << ',' << r.timings.reconstruct_ms << ',' << r.timings.preprocess_ms
      << ',' << r.timings.register_ms << '\n';
  }
  write(dir + "/timings.csv", t.str());
  write(dir + "/summary.json", summary_json(stats, config).dump(2) + "\n");
}

}  // namespace t2i
