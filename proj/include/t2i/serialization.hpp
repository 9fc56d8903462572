#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "t2i/connector.hpp"
#include "t2i/error.hpp"
#include "t2i/grid.hpp"
#include "t2i/preprocess.hpp"
#include "t2i/registration.hpp"
#include "t2i/se2.hpp"

// JSON mappings for the public value types. Poses are written as
// {"theta_deg", "tx_mm", "ty_mm"}; shapes as {"variant": ..., dims in mm}.

namespace t2i {

using Json = nlohmann::json;

inline Json pose_to_json(const Pose2& p) {
  return Json{{"theta_deg", p.theta_deg()}, {"tx_mm", p.tx()}, {"ty_mm", p.ty()}};
}

inline Pose2 pose_from_json(const Json& j) {
  return Pose2::from_degrees(j.value("theta_deg", 0.0), j.value("tx_mm", 0.0), j.value("ty_mm", 0.0));
}

inline Json shape_to_json(const CrossSection& s) {
  Json j = std::visit(
      [](const auto& p) -> Json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Circle>) {
          return {{"variant", "circle"}, {"radius", p.radius}};
        } else if constexpr (std::is_same_v<T, RoundedRect>) {
          return {{"variant", "rounded_rect"}, {"width", p.width}, {"height", p.height}, {"corner_radius", p.corner_radius}};
        } else {
          Json verts = Json::array();
          for (const Vec2& v : p.vertices) verts.push_back({v.x(), v.y()});
          return {{"variant", "polygon"}, {"vertices", verts}};
        }
      },
      s.outer);
  Json feats = Json::array();
  for (const InnerFeature& f : s.inner_features) {
    feats.push_back({{"op", f.op == InnerFeature::Op::add ? "add" : "subtract"},
                     {"placement", pose_to_json(f.placement)},
                     {"shape", shape_to_json(f.shape)}});
  }
  j["inner_features"] = feats;
  return j;
}

inline CrossSection shape_from_json(const Json& j) {
  CrossSection s;
  try {
    const std::string variant = j.at("variant").get<std::string>();
    if (variant == "circle") {
      s.outer = Circle{j.at("radius").get<double>()};
    } else if (variant == "rounded_rect") {
      s.outer = RoundedRect{j.at("width").get<double>(), j.at("height").get<double>(), j.value("corner_radius", 0.0)};
    } else if (variant == "polygon") {
      Polygon poly;
      for (const Json& v : j.at("vertices")) poly.vertices.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
      s.outer = poly;
    } else {
      throw Error(ErrorCategory::config, "unknown shape variant '" + variant + "'");
    }
    if (j.contains("inner_features")) {
      for (const Json& f : j.at("inner_features")) {
        InnerFeature feat;
        feat.op = f.value("op", std::string("subtract")) == "add" ? InnerFeature::Op::add : InnerFeature::Op::subtract;
        if (f.contains("placement")) feat.placement = pose_from_json(f.at("placement"));
        feat.shape = shape_from_json(f.at("shape"));
        s.inner_features.push_back(std::move(feat));
      }
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCategory::config, std::string("malformed shape: ") + e.what());
  }
  validate(s);
  return s;
}

inline Json symmetry_to_json(const SymmetryGroup& s) {
  if (s.is_circular()) return "circular";
  return Json{{"cyclic", s.order()}};
}

inline SymmetryGroup symmetry_from_json(const Json& j) {
  if (j.is_string() && j.get<std::string>() == "circular") return SymmetryGroup::circular();
  if (j.is_object() && j.contains("cyclic")) return SymmetryGroup::cyclic(j.at("cyclic").get<int>());
  throw Error(ErrorCategory::config, "symmetry must be \"circular\" or {\"cyclic\": n}");
}

inline Json preset_to_json(const ConnectorPreset& p) {
  return {{"name", p.name},
          {"peg", shape_to_json(p.peg)},
          {"hole", shape_to_json(p.hole)},
          {"symmetry", symmetry_to_json(p.symmetry)}};
}

inline ConnectorPreset preset_from_json(const Json& j) {
  ConnectorPreset p;
  p.name = j.value("name", std::string("custom"));
  p.peg = shape_from_json(j.at("peg"));
  p.hole = shape_from_json(j.at("hole"));
  p.symmetry = j.contains("symmetry") ? symmetry_from_json(j.at("symmetry")) : SymmetryGroup::cyclic(1);
  return p;
}

inline Json sensor_to_json(const SensorModel& s) {
  return {{"width_px", s.width_px},          {"height_px", s.height_px},
          {"area_x_mm", s.area_x_mm},        {"area_y_mm", s.area_y_mm},
          {"press_depth_mm", s.press_depth_mm}, {"gel_sigma_mm", s.gel_sigma_mm},
          {"gradient_noise_sigma", s.gradient_noise_sigma}};
}

inline void sensor_update_from_json(SensorModel& s, const Json& j) {
  s.width_px = j.value("width_px", s.width_px);
  s.height_px = j.value("height_px", s.height_px);
  s.area_x_mm = j.value("area_x_mm", s.area_x_mm);
  s.area_y_mm = j.value("area_y_mm", s.area_y_mm);
  s.press_depth_mm = j.value("press_depth_mm", s.press_depth_mm);
  s.gel_sigma_mm = j.value("gel_sigma_mm", s.gel_sigma_mm);
  s.gradient_noise_sigma = j.value("gradient_noise_sigma", s.gradient_noise_sigma);
}

inline Json pipeline_to_json(const PipelineParams& p) {
  return {{"z_th", p.z_th}, {"dbscan_eps", p.dbscan_eps}, {"dbscan_min_pts", p.dbscan_min_pts}};
}

inline void pipeline_update_from_json(PipelineParams& p, const Json& j) {
  p.z_th = j.value("z_th", p.z_th);
  p.dbscan_eps = j.value("dbscan_eps", p.dbscan_eps);
  p.dbscan_min_pts = j.value("dbscan_min_pts", p.dbscan_min_pts);
}

inline Json icp_to_json(const IcpParams& p) {
  return {{"max_icp_iters", p.max_icp_iters},     {"convergence_tol", p.convergence_tol},
          {"inlier_dist", p.inlier_dist},         {"delta_alpha_deg", p.delta_alpha_deg},
          {"n_max_restarts", p.n_max_restarts},   {"restart_jitter_mm", p.restart_jitter_mm}};
}

inline void icp_update_from_json(IcpParams& p, const Json& j) {
  p.max_icp_iters = j.value("max_icp_iters", p.max_icp_iters);
  p.convergence_tol = j.value("convergence_tol", p.convergence_tol);
  p.inlier_dist = j.value("inlier_dist", p.inlier_dist);
  p.delta_alpha_deg = j.value("delta_alpha_deg", p.delta_alpha_deg);
  p.n_max_restarts = j.value("n_max_restarts", p.n_max_restarts);
  p.restart_jitter_mm = j.value("restart_jitter_mm", p.restart_jitter_mm);
}

}  // namespace t2i
