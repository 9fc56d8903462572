// t2i: simulate observations, estimate a hole pose from two grid files, or run
// a batch experiment.
//
//   t2i simulate   --preset usbc --dx 1 --dy -2 --dtheta 45 --out obs/
//   t2i estimate   --peg-grid obs/peg.t2ig --hole-grid obs/hole.t2ig
//   t2i experiment --preset lightning --mode grid --out runs/lightning
//   t2i baseline   --preset lightning --out runs/lightning_baseline
//
// Errors go to stderr as {"error": <category>, "message": ...}; the exit code
// is the numeric value of the category (see error.hpp).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "t2i/t2i.hpp"

using namespace t2i;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::string> preset;
  std::optional<double> noise;
  std::optional<std::uint64_t> seed;
  std::optional<double> z_th, eps, delta_alpha, inlier_dist, tol;
  std::optional<int> min_pts, max_iters, restarts;
};

void add_pipeline_flags(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "JSON config; flags given on the command line win");
  app->add_option("--z-th", o.z_th, "height threshold, mm");
  app->add_option("--eps", o.eps, "DBSCAN radius, mm");
  app->add_option("--min-pts", o.min_pts, "DBSCAN min points");
  app->add_option("--delta-alpha", o.delta_alpha, "initial-rotation step, deg");
  app->add_option("--inlier-dist", o.inlier_dist, "ICP inlier distance, mm");
  app->add_option("--tol", o.tol, "ICP convergence tolerance, mm");
  app->add_option("--max-iters", o.max_iters, "ICP iteration cap");
  app->add_option("--restarts", o.restarts, "ICP restarts per initial rotation");
}

Json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCategory::io, "cannot open '" + path + "'");
  try {
    return Json::parse(is);
  } catch (const Json::exception& e) {
    throw Error(ErrorCategory::config, "bad JSON in '" + path + "': " + e.what());
  }
}

ExperimentConfig build_config(const Overrides& o) {
  ExperimentConfig c;
  if (!o.config_path.empty()) config_update_from_json(c, read_json_file(o.config_path));
  if (o.preset) {
    c.preset_name = *o.preset;
    c.inline_preset.reset();
  }
  if (o.noise) c.sensor.gradient_noise_sigma = *o.noise;
  if (o.seed) c.seed = *o.seed;
  if (o.z_th) c.pipeline.z_th = *o.z_th;
  if (o.eps) c.pipeline.dbscan_eps = *o.eps;
  if (o.min_pts) c.pipeline.dbscan_min_pts = *o.min_pts;
  if (o.delta_alpha) c.icp.delta_alpha_deg = *o.delta_alpha;
  if (o.inlier_dist) c.icp.inlier_dist = *o.inlier_dist;
  if (o.tol) c.icp.convergence_tol = *o.tol;
  if (o.max_iters) c.icp.max_icp_iters = *o.max_iters;
  if (o.restarts) c.icp.n_max_restarts = *o.restarts;
  return c;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCategory::io, "cannot open '" + path + "' for writing");
  os << text;
}

int cmd_simulate(const Overrides& o, double dx, double dy, double dtheta, const std::string& out) {
  ExperimentConfig c = build_config(o);
  c.validate();
  const ConnectorPreset preset = c.resolve_preset();
  const Pose2 offset = Pose2::from_degrees(dtheta, dx, dy);
  fs::create_directories(out);
  const auto peg = render_peg_contact(preset.peg, Pose2::identity(), c.sensor, derive_seed(c.seed, kPegNoise, 0));
  const auto hole = render_hole_contact(preset.hole, offset, c.sensor, derive_seed(c.seed, kHoleNoise, 0));
  write_grid_file(out + "/peg.t2ig", pack_observation(peg.height, peg.gradients));
  write_grid_file(out + "/hole.t2ig", pack_observation(hole.height, hole.gradients));
  const Json truth{{"preset", preset_to_json(preset)},
                   {"true_offset", pose_to_json(offset)},
                   {"sensor", sensor_to_json(c.sensor)},
                   {"seed", c.seed}};
  write_text(out + "/truth.json", truth.dump(2) + "\n");
  std::cout << truth.dump() << "\n";
  return 0;
}

int cmd_estimate(const Overrides& o, const std::string& peg_path, const std::string& hole_path,
                 const std::string& candidates_path) {
  ExperimentConfig c = build_config(o);
  const GridFile pf = read_grid_file(peg_path);
  const GridFile hf = read_grid_file(hole_path);
  if (pf.rows != hf.rows || pf.cols != hf.cols || pf.pitch.dx != hf.pitch.dx || pf.pitch.dy != hf.pitch.dy) {
    throw Error(ErrorCategory::invalid_argument, "peg and hole grids differ in shape or pitch");
  }
  c.sensor = SensorModel::from_grid(pf.rows, pf.cols, pf.pitch);
  c.pipeline.validate();
  c.icp.validate();

  std::string stage = "reconstruct";
  try {
    const PointCloud3 peg = height_to_cloud(integrate_gradients(unpack_gradients(pf)));
    const PointCloud3 hole = height_to_cloud(integrate_gradients(unpack_gradients(hf)));
    stage = "preprocess";
    const PreprocessStages st = preprocess_pair_stages(peg, hole, c.pipeline);
    stage = "register";
    IcpParams icp = c.icp;
    icp.seed = derive_seed(c.seed, kIcpJitter, 0);
    const RegistrationResult reg = multi_init_register(st.peg_projected, st.hole_clean, icp);
    if (!candidates_path.empty()) detail::dump_candidates_csv(candidates_path, reg);
    const Json out{{"pose", pose_to_json(grid_to_sensor_frame(reg.best, c.sensor))},
                   {"inlier_ratio", reg.best_inlier_ratio},
                   {"alpha_deg", reg.best_alpha_deg},
                   {"peg_points", st.peg_projected.size()},
                   {"hole_points", st.hole_clean.size()}};
    std::cout << out.dump(2) << "\n";
  } catch (const Error& e) {
    throw Error(e.category(), e.what(), e.stage().empty() ? stage : stage + ":" + e.stage());
  }
  return 0;
}

int cmd_experiment(const Overrides& o, const std::string& mode, std::optional<int> trials, const std::string& out,
                   bool dump_stages, bool dump_candidates, std::optional<int> threads, bool baseline) {
  ExperimentConfig c = build_config(o);
  if (!mode.empty()) {
    if (mode != "grid" && mode != "random") throw Error(ErrorCategory::config, "mode must be grid or random");
    c.mode = mode == "grid" ? ExperimentMode::grid : ExperimentMode::random;
  }
  if (trials) c.n_trials = *trials;
  if (threads) c.threads = *threads;
  if (baseline) c.baseline = Baseline::no_preprocess;
  c.dump_stages = dump_stages;
  c.dump_candidates = dump_candidates;
  if (dump_stages || dump_candidates) c.output_dir = out + "/trials";
  const ExperimentResult r = run_experiment(c);
  emit_reports(r.records, r.stats, c, out);
  std::cout << stats_to_json(r.stats).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tactile peg-in-hole pose estimation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Overrides o;
  double dx = 0.0, dy = 0.0, dtheta = 0.0;
  std::string out, peg_grid, hole_grid, candidates, mode;
  std::optional<int> trials, threads;
  bool dump_stages = false, dump_candidates = false;

  auto* sim = app.add_subcommand("simulate", "render peg and hole observations for one offset");
  sim->add_option("--preset", o.preset, "audio-jack | lightning | usbc");
  sim->add_option("--dx", dx, "hole offset x, mm");
  sim->add_option("--dy", dy, "hole offset y, mm");
  sim->add_option("--dtheta", dtheta, "hole rotation, deg");
  sim->add_option("--noise", o.noise, "gradient noise sigma");
  sim->add_option("--seed", o.seed);
  sim->add_option("--config", o.config_path);
  sim->add_option("--out", out, "output directory")->required();

  auto* est = app.add_subcommand("estimate", "estimate the hole pose from two T2I-GRID files");
  est->add_option("--peg-grid", peg_grid)->required();
  est->add_option("--hole-grid", hole_grid)->required();
  est->add_option("--seed", o.seed);
  est->add_option("--dump-candidates", candidates, "write every ICP candidate to this CSV");
  add_pipeline_flags(est, o);

  auto* exp = app.add_subcommand("experiment", "batch evaluation with reports");
  auto* base = app.add_subcommand("baseline", "batch evaluation of the no-preprocessing 3D ICP baseline");
  for (auto* sub : {exp, base}) {
    sub->add_option("--preset", o.preset);
    sub->add_option("--mode", mode, "grid | random");
    sub->add_option("--trials", trials, "trial count in random mode");
    sub->add_option("--noise", o.noise);
    sub->add_option("--seed", o.seed);
    sub->add_option("--threads", threads);
    sub->add_option("--out", out, "report directory")->required();
    sub->add_flag("--dump-stages", dump_stages, "write intermediate clouds per trial");
    sub->add_flag("--dump-candidates", dump_candidates, "write ICP candidates per trial");
    add_pipeline_flags(sub, o);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*sim) return cmd_simulate(o, dx, dy, dtheta, out);
    if (*est) return cmd_estimate(o, peg_grid, hole_grid, candidates);
    if (*exp) return cmd_experiment(o, mode, trials, out, dump_stages, dump_candidates, threads, false);
    if (*base) return cmd_experiment(o, mode, trials, out, dump_stages, dump_candidates, threads, true);
  } catch (const Error& e) {
    Json j{{"error", category_name(e.category())}, {"message", e.what()}};
    if (!e.stage().empty()) j["stage"] = e.stage();
    std::cerr << j.dump() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << Json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
