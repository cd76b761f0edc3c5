#include "cholec/sim/deformable.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

#include "cholec/common/errors.hpp"

namespace cholec::sim {

DeformableBody DeformableBody::from_rest_mesh(const TriangleMesh& mesh,
                                              const std::vector<int>& fixed,
                                              double total_mass_kg) {
  DeformableBody b;
  b.vertices = mesh.vertices;
  b.velocities.assign(mesh.vertices.size(), Vec3::Zero());
  b.triangles = mesh.triangles;
  for (const auto& e : unique_edges(mesh.triangles)) {
    b.edges.push_back({e[0], e[1], (mesh.vertices[e[0]] - mesh.vertices[e[1]]).norm()});
  }
  b.rest_volume_mm3 = enclosed_volume(mesh.vertices, mesh.triangles);
  b.fixed_vertices = fixed;
  std::sort(b.fixed_vertices.begin(), b.fixed_vertices.end());
  b.is_fixed.assign(mesh.vertices.size(), 0);
  for (int f : b.fixed_vertices) b.is_fixed.at(f) = 1;
  b.mass_kg.assign(mesh.vertices.size(), total_mass_kg / static_cast<double>(mesh.vertices.size()));
  return b;
}

namespace {

void project_edges(std::vector<Vec3>& p, const std::vector<EdgeConstraint>& edges,
                   const std::vector<double>& inv_mass, double stiffness) {
  for (const auto& e : edges) {
    const double wi = inv_mass[e.i];
    const double wj = inv_mass[e.j];
    const double wsum = wi + wj;
    if (wsum == 0.0) continue;
    Vec3& pi = p[e.i];
    Vec3& pj = p[e.j];
    const double dx = pi.x() - pj.x();
    const double dy = pi.y() - pj.y();
    const double dz = pi.z() - pj.z();
    const double len = std::sqrt(dx * dx + dy * dy + dz * dz);
    if (len < 1e-12) continue;
    const double s = stiffness * (len - e.rest_length_mm) / (len * wsum);
    const double cx = dx * s;
    const double cy = dy * s;
    const double cz = dz * s;
    pi.x() -= wi * cx;
    pi.y() -= wi * cy;
    pi.z() -= wi * cz;
    pj.x() += wj * cx;
    pj.y() += wj * cy;
    pj.z() += wj * cz;
  }
}

void project_volume(std::vector<Vec3>& p, const std::vector<Triangle>& triangles,
                    const std::vector<double>& inv_mass, double rest_volume, double stiffness,
                    std::vector<Vec3>& grad) {
  if (stiffness == 0.0) return;
  std::fill(grad.begin(), grad.end(), Vec3::Zero());
  double vol = 0.0;
  for (const auto& t : triangles) {
    const Vec3& a = p[t[0]];
    const Vec3& b = p[t[1]];
    const Vec3& c = p[t[2]];
    const Vec3 bc = b.cross(c);
    vol += a.dot(bc);
    grad[t[0]] += bc;
    grad[t[1]] += c.cross(a);
    grad[t[2]] += a.cross(b);
  }
  vol /= 6.0;
  double denom = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) denom += inv_mass[i] * grad[i].squaredNorm();
  denom /= 36.0;
  if (denom < 1e-18) return;
  const double lambda = -stiffness * (vol - rest_volume) / denom / 6.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (inv_mass[i] != 0.0) p[i] += (lambda * inv_mass[i]) * grad[i];
  }
}

}  // namespace

void step_physics_inplace(DeformableBody& body, const std::vector<GraspBinding>& grasp,
                          const RigidTransform& gripper_tip, double dt, int substeps,
                          const PhysicsParams& params) {
  if (!(dt > 0.0) || substeps < 1) throw ContractError("step_physics: dt > 0 and substeps >= 1");
  const std::size_t n = body.size();
  const double h = dt / substeps;

  std::vector<double> inv_mass(n);
  for (std::size_t i = 0; i < n; ++i) inv_mass[i] = body.is_fixed[i] ? 0.0 : 1.0 / body.mass_kg[i];
  std::vector<std::pair<int, Vec3>> pins;
  for (const auto& g : grasp) {
    if (g.broken || body.is_fixed[g.vertex_id]) continue;
    pins.emplace_back(g.vertex_id, g.pinned_target(gripper_tip));
    inv_mass[g.vertex_id] = 0.0;
  }

  std::vector<Vec3> p(n);
  std::vector<Vec3> grad(n);
  for (int s = 0; s < substeps; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      if (body.is_fixed[i]) {
        p[i] = body.vertices[i];
        continue;
      }
      Vec3 v = body.velocities[i] + params.gravity_mm_s2 * h;
      v *= params.damping_per_substep;
      p[i] = body.vertices[i] + v * h;
    }
    for (const auto& [id, target] : pins) p[id] = target;

    for (int it = 0; it < params.constraint_iterations; ++it) {
      project_edges(p, body.edges, inv_mass, params.edge_stiffness);
      project_volume(p, body.triangles, inv_mass, body.rest_volume_mm3, params.volume_stiffness,
                     grad);
    }

    for (std::size_t i = 0; i < n; ++i) {
      if (body.is_fixed[i]) continue;
      body.velocities[i] = (p[i] - body.vertices[i]) / h;
      body.vertices[i] = p[i];
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!body.vertices[i].allFinite() || !body.velocities[i].allFinite()) {
      throw SimulationDiverged("non-finite state at gallbladder vertex " + std::to_string(i));
    }
  }
}

DeformableBody step_physics(DeformableBody body, const std::vector<GraspBinding>& grasp,
                            const RigidTransform& gripper_tip, double dt, int substeps,
                            const PhysicsParams& params) {
  step_physics_inplace(body, grasp, gripper_tip, dt, substeps, params);
  return body;
}

double binding_elongation(const GraspBinding& binding, const DeformableBody& body,
                          const RigidTransform& gripper_tip, double extensibility) {
  const Vec3 target = binding.pinned_target(gripper_tip);
  double worst = 0.0;
  for (const auto& a : binding.anchors) {
    const double over =
        (target - body.vertices[a.fixed_vertex]).norm() - extensibility * a.rest_path_mm;
    worst = std::max(worst, over);
  }
  return worst;
}

std::vector<GraspBinding> update_grasp(std::vector<GraspBinding> grasp, const DeformableBody& body,
                                       const RigidTransform& gripper_tip, double break_threshold_mm,
                                       double extensibility) {
  if (!(break_threshold_mm > 0.0)) throw ContractError("update_grasp: threshold must be > 0");
  for (auto& g : grasp) {
    if (g.broken) continue;
    g.elongation_mm = binding_elongation(g, body, gripper_tip, extensibility);
    if (g.elongation_mm > break_threshold_mm) g.broken = true;
  }
  return grasp;
}

std::vector<double> geodesic_distances(const DeformableBody& body, int source) {
  const std::size_t n = body.size();
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (const auto& e : body.edges) {
    adj[e.i].emplace_back(e.j, e.rest_length_mm);
    adj[e.j].emplace_back(e.i, e.rest_length_mm);
  }
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u]) continue;
    for (const auto& [v, w] : adj[u]) {
      if (d + w < dist[v]) {
        dist[v] = d + w;
        queue.emplace(dist[v], v);
      }
    }
  }
  return dist;
}

int count_unbroken(const std::vector<GraspBinding>& grasp) {
  return static_cast<int>(std::count_if(grasp.begin(), grasp.end(),
                                        [](const GraspBinding& g) { return !g.broken; }));
}

}  // namespace cholec::sim
