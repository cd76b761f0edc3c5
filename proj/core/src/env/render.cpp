#include "cholec/env/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>

#include "cholec/common/errors.hpp"
#include "cholec/env/cholec_env.hpp"

namespace cholec::env {

int Image::count(const Rgb& color) const {
  int n = 0;
  for (std::size_t i = 0; i + 2 < rgb.size(); i += 3) {
    if (rgb[i] == color[0] && rgb[i + 1] == color[1] && rgb[i + 2] == color[2]) ++n;
  }
  return n;
}

std::vector<float> Image::to_chw_float() const {
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  std::vector<float> out(plane * 3);
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < 3; ++c) out[c * plane + p] = rgb[p * 3 + c] * (1.0f / 255.0f);
  }
  return out;
}

void Image::write_ppm(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image " + path.string());
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

namespace {

// Ray against a capsule; smallest positive t.
std::optional<double> ray_capsule(const Vec3& ro, const Vec3& rd, const sim::Capsule& c) {
  const Vec3 ba = c.b - c.a;
  const Vec3 oa = ro - c.a;
  const double baba = ba.dot(ba);
  const double bard = ba.dot(rd);
  const double baoa = ba.dot(oa);
  const double rdoa = rd.dot(oa);
  const double oaoa = oa.dot(oa);
  const double rr = c.radius * c.radius;
  const double a = baba - bard * bard;
  const double b = baba * rdoa - baoa * bard;
  const double cc = baba * oaoa - baoa * baoa - rr * baba;
  double h = b * b - a * cc;
  if (h >= 0.0 && a > 1e-12) {
    const double t = (-b - std::sqrt(h)) / a;
    const double y = baoa + t * bard;
    if (y > 0.0 && y < baba && t > 0.0) return t;
  }
  std::optional<double> best;
  for (const Vec3* cap : {&c.a, &c.b}) {
    if (auto t = sim::ray_sphere(ro, rd, *cap, c.radius)) {
      if (*t > 0.0 && (!best || *t < *best)) best = t;
    }
  }
  return best;
}

struct Raster {
  int w;
  int h;
  std::vector<double> depth;
  std::vector<Vec3> normal;
  std::vector<Rgb> color;
  std::vector<std::uint8_t> lit;  // 0 background, 1 shaded surface, 2 unshaded (target)
};

}  // namespace

Image render(const RenderInputs& in, int width, int height) {
  if (!in.camera || !in.liver) throw ContractError("render: camera and liver required");
  const sim::Camera& cam = *in.camera;
  const Mat3 rt = cam.orientation.transpose();
  const double focal = 0.5 * height / std::tan(0.5 * cam.fov_y_deg * kDegToRad);
  const double cx = 0.5 * width;
  const double cy = 0.5 * height;

  Raster r{width, height, {}, {}, {}, {}};
  const std::size_t n = static_cast<std::size_t>(width) * height;
  r.depth.assign(n, std::numeric_limits<double>::infinity());
  r.normal.assign(n, Vec3::Zero());
  r.color.assign(n, Rgb{0, 0, 0});
  r.lit.assign(n, 0);

  const auto pixel_ray = [&](int x, int y) {
    const Vec3 local((x + 0.5 - cx) / focal, (cy - (y + 0.5)) / focal, 1.0);
    return Vec3(cam.orientation * local);
  };

  const auto raster_mesh = [&](const std::vector<Vec3>& verts,
                               const std::vector<sim::Triangle>& tris, const Rgb& color) {
    std::vector<Vec3> proj(verts.size());
    for (std::size_t i = 0; i < verts.size(); ++i) {
      const Vec3 d = rt * (verts[i] - cam.position_mm);
      proj[i] = {cx + focal * d.x() / d.z(), cy - focal * d.y() / d.z(), d.z()};
    }
    for (const auto& t : tris) {
      const Vec3& p0 = proj[t[0]];
      const Vec3& p1 = proj[t[1]];
      const Vec3& p2 = proj[t[2]];
      if (p0.z() <= 1e-6 || p1.z() <= 1e-6 || p2.z() <= 1e-6) continue;
      const double area = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p1.y() - p0.y()) * (p2.x() - p0.x());
      if (std::abs(area) < 1e-12) continue;
      Vec3 nrm = (verts[t[1]] - verts[t[0]]).cross(verts[t[2]] - verts[t[0]]).normalized();
      const int x0 = std::max(0, static_cast<int>(std::floor(std::min({p0.x(), p1.x(), p2.x()}))));
      const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max({p0.x(), p1.x(), p2.x()}))));
      const int y0 = std::max(0, static_cast<int>(std::floor(std::min({p0.y(), p1.y(), p2.y()}))));
      const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max({p0.y(), p1.y(), p2.y()}))));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double px = x + 0.5;
          const double py = y + 0.5;
          double w0 = (p1.x() - px) * (p2.y() - py) - (p1.y() - py) * (p2.x() - px);
          double w1 = (p2.x() - px) * (p0.y() - py) - (p2.y() - py) * (p0.x() - px);
          double w2 = (p0.x() - px) * (p1.y() - py) - (p0.y() - py) * (p1.x() - px);
          w0 /= area;
          w1 /= area;
          w2 /= area;
          if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
          // perspective-correct depth from interpolated 1/z
          const double inv_z = w0 / p0.z() + w1 / p1.z() + w2 / p2.z();
          const double z = 1.0 / inv_z;
          const std::size_t i = static_cast<std::size_t>(y) * width + x;
          if (z < r.depth[i]) {
            r.depth[i] = z;
            // face the camera for shading of open meshes
            const Vec3 ray = pixel_ray(x, y);
            r.normal[i] = nrm.dot(ray) > 0.0 ? Vec3(-nrm) : nrm;
            r.color[i] = color;
            r.lit[i] = 1;
          }
        }
      }
    }
  };

  raster_mesh(in.liver->vertices, in.liver->triangles, kLiverColor);
  if (in.gallbladder_vertices && in.gallbladder_triangles) {
    raster_mesh(*in.gallbladder_vertices, *in.gallbladder_triangles, kGallbladderColor);
  }

  const double fwd_scale = 1.0;  // camera-space z of a unit pixel ray is 1
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      const Vec3 ray = pixel_ray(x, y);
      for (const auto& [cap, color] : in.instruments) {
        if (auto t = ray_capsule(cam.position_mm, ray, cap)) {
          const double z = *t * fwd_scale;
          if (z < r.depth[i]) {
            const Vec3 hit = cam.position_mm + ray * *t;
            const Vec3 ba = cap.b - cap.a;
            const double s = std::clamp((hit - cap.a).dot(ba) / ba.squaredNorm(), 0.0, 1.0);
            r.depth[i] = z;
            r.normal[i] = (hit - (cap.a + ba * s)).normalized();
            r.color[i] = color;
            r.lit[i] = 1;
          }
        }
      }
      if (auto t = sim::ray_sphere(cam.position_mm, ray, in.target.center_mm, in.target.radius_mm)) {
        if (*t < r.depth[i]) {
          r.depth[i] = *t;
          r.color[i] = kTargetColor;
          r.lit[i] = 2;
        }
      }
    }
  }

  Image img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      if (r.lit[i] == 0) continue;
      Rgb c = r.color[i];
      if (r.lit[i] == 1) {
        const Vec3 hit = cam.position_mm + pixel_ray(x, y) * r.depth[i];
        const Vec3 to_light = (in.light_position_mm - hit).normalized();
        double shade = 0.3 + 0.6 * std::max(0.0, r.normal[i].dot(to_light));
        if (in.shadows) {
          const Vec3 origin = hit + r.normal[i] * 1e-3;
          const Vec3 dir = in.light_position_mm - origin;
          for (const auto& [cap, color] : in.instruments) {
            auto t = ray_capsule(origin, dir, cap);
            if (t && *t > 1e-6 && *t < 1.0) {
              shade *= 0.45;
              break;
            }
          }
        }
        for (int k = 0; k < 3; ++k) c[k] = static_cast<std::uint8_t>(std::floor(c[k] * shade));
      }
      const std::size_t o = i * 3;
      img.rgb[o] = c[0];
      img.rgb[o + 1] = c[1];
      img.rgb[o + 2] = c[2];
    }
  }
  return img;
}

Image render_scene(const CholecEnv& env, int width, int height, bool show_gallbladder) {
  const auto& scene = env.scene();
  RenderInputs in;
  in.camera = &scene.camera;
  in.liver = &scene.liver;
  if (show_gallbladder) {
    in.gallbladder_vertices = &env.state().gallbladder.vertices;
    in.gallbladder_triangles = &env.state().gallbladder.triangles;
  }
  in.instruments = {{env.gripper_shaft(), kGripperColor}, {env.cauter_shaft(), kCauterColor}};
  in.target = env.state().target;
  // light above and to the side of the endoscope so shaft shadows fall on the tissue
  in.light_position_mm = scene.camera.position_mm + Vec3(40.0, 80.0, -20.0);
  return render(in, width, height);
}

}  // namespace cholec::env
