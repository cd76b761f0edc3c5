#include "cholec/sim/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cholec/common/errors.hpp"

namespace cholec::sim {

namespace {

constexpr double kFossaDepth = 4.0;

double liver_height(double x, double y) {
  const double fossa = -kFossaDepth * std::exp(-(x * x) / (34.0 * 34.0) - (y * y) / (16.0 * 16.0));
  // gentle convexity of the organ surface
  return fossa - 0.0015 * (x * x + y * y) * 0.5;
}

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 json_vec(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("scene: expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

nlohmann::json mat_json(const Mat3& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

Mat3 json_mat(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("scene: expected a 3x3 matrix");
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    const Vec3 row = json_vec(j[r]);
    m.row(r) = row.transpose();
  }
  return m;
}

nlohmann::json mesh_json(const TriangleMesh& m) {
  nlohmann::json v = nlohmann::json::array();
  for (const auto& p : m.vertices) v.push_back(vec_json(p));
  nlohmann::json t = nlohmann::json::array();
  for (const auto& tri : m.triangles) t.push_back({tri[0], tri[1], tri[2]});
  return {{"vertices", v}, {"triangles", t}};
}

TriangleMesh json_mesh(const nlohmann::json& j) {
  TriangleMesh m;
  for (const auto& v : j.at("vertices")) m.vertices.push_back(json_vec(v));
  for (const auto& t : j.at("triangles")) {
    if (t.size() != 3) throw ConfigError("scene: triangle must have 3 indices");
    m.triangles.push_back({t[0].get<int>(), t[1].get<int>(), t[2].get<int>()});
  }
  return m;
}

nlohmann::json pose_json(const kin::InstrumentPose& p) {
  return {{"pan_deg", p.pan_deg},
          {"tilt_deg", p.tilt_deg},
          {"spin_deg", p.spin_deg},
          {"insertion_mm", p.insertion_mm}};
}

kin::InstrumentPose json_pose(const nlohmann::json& j) {
  return {j.at("pan_deg").get<double>(), j.at("tilt_deg").get<double>(),
          j.at("spin_deg").get<double>(), j.at("insertion_mm").get<double>()};
}

nlohmann::json instrument_json(const InstrumentSetup& s) {
  return {{"pivot_mm", vec_json(s.trocar.pivot_mm)},
          {"rest_orientation", mat_json(s.trocar.rest_orientation)},
          {"start", pose_json(s.start)}};
}

InstrumentSetup json_instrument(const nlohmann::json& j) {
  InstrumentSetup s;
  s.trocar.pivot_mm = json_vec(j.at("pivot_mm"));
  s.trocar.rest_orientation = json_mat(j.at("rest_orientation"));
  s.start = json_pose(j.at("start"));
  return s;
}

InstrumentSetup aim_instrument(const Vec3& pivot, const Vec3& tip, const Vec3& up) {
  InstrumentSetup s;
  s.trocar = kin::TrocarFrame::looking_at(pivot, tip, up);
  s.start = {0.0, 0.0, 0.0, (tip - pivot).norm()};
  return s;
}

}  // namespace

void Scene::validate() const {
  if (!liver.indices_valid() || liver.triangles.empty()) throw ConfigError("scene: bad liver mesh");
  if (!gallbladder.indices_valid() || !is_closed_orientable(gallbladder.triangles)) {
    throw ConfigError("scene: gallbladder must be a closed orientable surface");
  }
  const int n = static_cast<int>(gallbladder.vertices.size());
  const auto check = [n](const std::vector<int>& ids, const char* what) {
    for (int i : ids) {
      if (i < 0 || i >= n) throw ConfigError(std::string("scene: index out of range in ") + what);
    }
  };
  check(fixed_vertices, "fixed_vertices");
  check(attachment_patch, "attachment_patch");
  check(grasp_vertices, "grasp_vertices");
  if (fixed_vertices.empty()) throw ConfigError("scene: at least one fixed vertex required");
  for (int g : grasp_vertices) {
    if (std::find(fixed_vertices.begin(), fixed_vertices.end(), g) != fixed_vertices.end()) {
      throw ConfigError("scene: a grasp vertex cannot be fixed");
    }
  }
  if (targets.empty()) throw ConfigError("scene: at least one target required");
  if (!(target_radius_mm > 0.0)) throw ConfigError("scene: target radius must be > 0");
  if (!(gallbladder_mass_kg > 0.0)) throw ConfigError("scene: gallbladder mass must be > 0");
  if (!gripper.trocar.orthonormal() || !cauter.trocar.orthonormal()) {
    throw ConfigError("scene: trocar rest orientation must be orthonormal");
  }
}

Scene make_default_scene() {
  Scene s;
  s.liver = make_heightfield(-70.0, 70.0, -55.0, 55.0, 14, 11, liver_height);

  const Vec3 semi(27.5, 12.5, 12.5);
  const Vec3 center(0.0, 0.0, -kFossaDepth + semi.z() + 0.5);
  constexpr int kRings = 12;
  constexpr int kSegments = 18;
  s.gallbladder = make_ellipsoid(center, semi, kRings, kSegments);

  for (int i = 0; i < static_cast<int>(s.gallbladder.vertices.size()); ++i) {
    const Vec3& p = s.gallbladder.vertices[i];
    if (p.x() < -15.0 && p.z() <= center.z() + 1e-9) s.fixed_vertices.push_back(i);
    if (p.z() < center.z() - 0.5 * semi.z()) s.attachment_patch.push_back(i);
  }
  // four vertices on the ring next to the +x (neck) pole, roughly 90 degrees apart
  const auto ring_vertex = [](int ring, int segment) { return 1 + (ring - 1) * kSegments + segment; };
  for (int seg : {0, 5, 9, 14}) s.grasp_vertices.push_back(ring_vertex(kRings - 1, seg));

  for (double x : {-6.0, 2.0, 10.0}) {
    const double y = -8.0;
    s.targets.emplace_back(x, y, liver_height(x, y) + s.target_radius_mm);
  }

  s.camera = Camera::looking_at(Vec3(0.0, -20.0, 220.0), Vec3(0.0, 0.0, 0.0), Vec3::UnitY(), 50.0);

  const Vec3 neck_tip = s.gallbladder.vertices.back();
  s.gripper = aim_instrument(Vec3(95.0, 55.0, 130.0), neck_tip, Vec3::UnitY());
  s.cauter = aim_instrument(Vec3(-85.0, -60.0, 135.0), Vec3(-20.0, -30.0, 45.0), Vec3::UnitY());
  s.validate();
  return s;
}

nlohmann::json scene_to_json(const Scene& s) {
  nlohmann::json gb = mesh_json(s.gallbladder);
  gb["mass_kg"] = s.gallbladder_mass_kg;
  gb["fixed"] = s.fixed_vertices;
  gb["attachment_patch"] = s.attachment_patch;
  gb["grasp_vertices"] = s.grasp_vertices;
  nlohmann::json targets = nlohmann::json::array();
  for (const auto& t : s.targets) targets.push_back(vec_json(t));
  return {{"format", "cholec-scene"},
          {"version", kSceneFormatVersion},
          {"gallbladder", gb},
          {"liver", mesh_json(s.liver)},
          {"targets", targets},
          {"target_radius_mm", s.target_radius_mm},
          {"camera",
           {{"position_mm", vec_json(s.camera.position_mm)},
            {"orientation", mat_json(s.camera.orientation)},
            {"fov_y_deg", s.camera.fov_y_deg}}},
          {"gripper", instrument_json(s.gripper)},
          {"cauter", instrument_json(s.cauter)}};
}

Scene scene_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "cholec-scene") {
      throw ConfigError("scene: not a cholec-scene document");
    }
    const int version = j.at("version").get<int>();
    if (version != kSceneFormatVersion) {
      throw ConfigError("scene: unsupported version " + std::to_string(version));
    }
    Scene s;
    const auto& gb = j.at("gallbladder");
    s.gallbladder = json_mesh(gb);
    s.gallbladder_mass_kg = gb.at("mass_kg").get<double>();
    s.fixed_vertices = gb.at("fixed").get<std::vector<int>>();
    s.attachment_patch = gb.at("attachment_patch").get<std::vector<int>>();
    s.grasp_vertices = gb.at("grasp_vertices").get<std::vector<int>>();
    s.liver = json_mesh(j.at("liver"));
    for (const auto& t : j.at("targets")) s.targets.push_back(json_vec(t));
    s.target_radius_mm = j.at("target_radius_mm").get<double>();
    const auto& cam = j.at("camera");
    s.camera.position_mm = json_vec(cam.at("position_mm"));
    s.camera.orientation = json_mat(cam.at("orientation"));
    s.camera.fov_y_deg = cam.at("fov_y_deg").get<double>();
    s.gripper = json_instrument(j.at("gripper"));
    s.cauter = json_instrument(j.at("cauter"));
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene: malformed document: ") + e.what());
  }
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scene file " + path.string());
  out << scene_to_json(scene).dump(1) << '\n';
  if (!out) throw IoError("failed writing scene file " + path.string());
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read scene file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scene " + path.string() + ": " + e.what());
  }
  return scene_from_json(j);
}

std::vector<TissueAnchor> make_anchors(const DeformableBody& body, int vertex_id) {
  const auto dist = geodesic_distances(body, vertex_id);
  std::vector<TissueAnchor> anchors;
  for (int f : body.fixed_vertices) anchors.push_back({f, dist[f]});
  return anchors;
}

}  // namespace cholec::sim
