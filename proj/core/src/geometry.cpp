#include "dpf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "dpf/rng.hpp"
#include "mc_tables.hpp"

namespace dpf {

void VoxelGrid::validate() const {
  if (resolution <= 0) throw std::invalid_argument("grid: resolution must be positive");
  const size_t expect = static_cast<size_t>(resolution) * resolution * resolution;
  if (values.size() != expect) throw std::invalid_argument("grid: value count mismatch");
  for (double v : values)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("grid: value outside [0, 1]");
}

void Mesh::validate() const {
  const int32_t n = static_cast<int32_t>(vertices.size());
  for (const auto& t : triangles) {
    for (int32_t idx : t)
      if (idx < 0 || idx >= n) throw std::invalid_argument("mesh: vertex index out of range");
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw std::invalid_argument("mesh: degenerate triangle");
  }
}

VoxelGrid rasterize_field(const ShapeModel& model, int resolution, bool use_deformers) {
  if (resolution < 8) throw std::invalid_argument("rasterize: resolution must be >= 8");
  model.validate();
  VoxelGrid grid(resolution);
  const unsigned hc = std::thread::hardware_concurrency();
  const int n_threads = static_cast<int>(std::min<unsigned>(hc == 0 ? 1 : hc, 8));
  auto slab = [&](int z0, int z1) {
    std::vector<Vec3> centers;
    centers.reserve(static_cast<size_t>(resolution) * resolution);
    for (int z = z0; z < z1; ++z) {
      centers.clear();
      for (int y = 0; y < resolution; ++y)
        for (int x = 0; x < resolution; ++x) centers.push_back(grid.center(x, y, z));
      std::vector<double> vals = eval_field_batch(model, centers, use_deformers);
      std::copy(vals.begin(), vals.end(),
                grid.values.begin() + grid.index(0, 0, z));
    }
  };
  if (n_threads <= 1 || resolution < 16) {
    slab(0, resolution);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (resolution + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      const int z0 = t * chunk;
      const int z1 = std::min(resolution, z0 + chunk);
      if (z0 >= z1) break;
      pool.emplace_back(slab, z0, z1);
    }
    for (auto& th : pool) th.join();
  }
  return grid;
}

namespace {

constexpr int kCornerOffset[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                     {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeCorner[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                    {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace

Mesh marching_cubes(const VoxelGrid& grid, double iso) {
  if (!(iso > 0.0 && iso < 1.0)) throw std::invalid_argument("marching_cubes: iso not in (0, 1)");
  grid.validate();
  const int res = grid.resolution;
  Mesh mesh;
  if (res < 2) return mesh;

  // One vertex slot per lattice edge: (cell corner, axis).
  const size_t n3 = static_cast<size_t>(res) * res * res;
  std::vector<int32_t> edge_vertex(n3 * 3, -1);
  auto lattice_edge = [&](int x, int y, int z, int axis) {
    return (static_cast<size_t>(x) +
            static_cast<size_t>(res) * (static_cast<size_t>(y) + static_cast<size_t>(res) * z)) *
               3 +
           static_cast<size_t>(axis);
  };

  auto corner_val = [&](int x, int y, int z, int c) {
    return grid.at(x + kCornerOffset[c][0], y + kCornerOffset[c][1], z + kCornerOffset[c][2]);
  };

  auto vertex_on_edge = [&](int x, int y, int z, int e) -> int32_t {
    const int ca = kEdgeCorner[e][0];
    const int cb = kEdgeCorner[e][1];
    const int ax = x + kCornerOffset[ca][0], ay = y + kCornerOffset[ca][1],
              az = z + kCornerOffset[ca][2];
    const int bx = x + kCornerOffset[cb][0], by = y + kCornerOffset[cb][1],
              bz = z + kCornerOffset[cb][2];
    const int axis = (ax != bx) ? 0 : (ay != by ? 1 : 2);
    const size_t key = lattice_edge(std::min(ax, bx), std::min(ay, by), std::min(az, bz), axis);
    int32_t& slot = edge_vertex[key];
    if (slot >= 0) return slot;
    const double va = grid.at(ax, ay, az);
    const double vb = grid.at(bx, by, bz);
    const double t = (iso - va) / (vb - va);
    const Vec3 pa = grid.center(ax, ay, az);
    const Vec3 pb = grid.center(bx, by, bz);
    slot = static_cast<int32_t>(mesh.vertices.size());
    mesh.vertices.push_back(pa + (pb - pa) * t);
    return slot;
  };

  for (int z = 0; z + 1 < res; ++z)
    for (int y = 0; y + 1 < res; ++y)
      for (int x = 0; x + 1 < res; ++x) {
        int mask = 0;
        for (int c = 0; c < 8; ++c)
          if (corner_val(x, y, z, c) > iso) mask |= 1 << c;
        const int8_t* row = kTriTable[mask];
        for (int t = 0; t < 16 && row[t] >= 0; t += 3) {
          std::array<int32_t, 3> tri = {vertex_on_edge(x, y, z, row[t]),
                                        vertex_on_edge(x, y, z, row[t + 1]),
                                        vertex_on_edge(x, y, z, row[t + 2])};
          if (tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2])
            mesh.triangles.push_back(tri);
        }
      }
  return mesh;
}

std::vector<Vec3> sample_mesh_surface(const Mesh& mesh, size_t n, uint64_t seed) {
  if (mesh.empty()) throw std::invalid_argument("sample_mesh_surface: empty mesh");
  std::vector<double> cumulative(mesh.triangles.size());
  double total = 0.0;
  for (size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    const Vec3& a = mesh.vertices[static_cast<size_t>(t[0])];
    const Vec3& b = mesh.vertices[static_cast<size_t>(t[1])];
    const Vec3& c = mesh.vertices[static_cast<size_t>(t[2])];
    total += 0.5 * norm(cross(b - a, c - a));
    cumulative[i] = total;
  }
  if (!(total > 0.0)) throw std::invalid_argument("sample_mesh_surface: zero surface area");
  Rng rng(seed);
  std::vector<Vec3> points;
  points.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const double target = rng.uniform() * total;
    const size_t ti = static_cast<size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), target) - cumulative.begin());
    const auto& t = mesh.triangles[std::min(ti, mesh.triangles.size() - 1)];
    const Vec3& a = mesh.vertices[static_cast<size_t>(t[0])];
    const Vec3& b = mesh.vertices[static_cast<size_t>(t[1])];
    const Vec3& c = mesh.vertices[static_cast<size_t>(t[2])];
    const double su = std::sqrt(rng.uniform());
    const double v = rng.uniform();
    points.push_back(a * (1.0 - su) + b * (su * (1.0 - v)) + c * (su * v));
  }
  return points;
}

namespace {

// Exact nearest-neighbor search on a median-split kd-tree.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> pts) : pts_(pts), order_(pts.size()) {
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(pts.size());
    root_ = build(0, pts.size(), 0);
  }

  double nearest_dist2(const Vec3& q) const {
    double best = std::numeric_limits<double>::infinity();
    descend(root_, q, best);
    return best;
  }

 private:
  struct Node {
    uint32_t point;
    int32_t left = -1, right = -1;
    uint8_t axis;
  };

  int32_t build(size_t lo, size_t hi, int depth) {
    if (lo >= hi) return -1;
    const uint8_t axis = static_cast<uint8_t>(depth % 3);
    const size_t mid = (lo + hi) / 2;
    auto key = [&](uint32_t i) {
      const Vec3& p = pts_[i];
      return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
    };
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](uint32_t a, uint32_t b) { return key(a) < key(b); });
    Node nd;
    nd.point = order_[mid];
    nd.axis = axis;
    const int32_t id = static_cast<int32_t>(nodes_.size());
    nodes_.push_back(nd);
    const int32_t l = build(lo, mid, depth + 1);
    const int32_t r = build(mid + 1, hi, depth + 1);
    nodes_[static_cast<size_t>(id)].left = l;
    nodes_[static_cast<size_t>(id)].right = r;
    return id;
  }

  void descend(int32_t id, const Vec3& q, double& best) const {
    if (id < 0) return;
    const Node& nd = nodes_[static_cast<size_t>(id)];
    const Vec3& p = pts_[nd.point];
    const double d2 = dist2(p, q);
    if (d2 < best) best = d2;
    const double delta = (nd.axis == 0 ? q.x - p.x : (nd.axis == 1 ? q.y - p.y : q.z - p.z));
    const int32_t near = delta < 0.0 ? nd.left : nd.right;
    const int32_t far = delta < 0.0 ? nd.right : nd.left;
    descend(near, q, best);
    if (delta * delta < best) descend(far, q, best);
  }

  std::span<const Vec3> pts_;
  std::vector<uint32_t> order_;
  std::vector<Node> nodes_;
  int32_t root_ = -1;
};

double directed_mean_sq(std::span<const Vec3> from, const KdTree& tree) {
  double acc = 0.0;
  for (const Vec3& p : from) acc += tree.nearest_dist2(p);
  return acc / static_cast<double>(from.size());
}

}  // namespace

double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("chamfer: empty point set");
  KdTree ta(a), tb(b);
  return directed_mean_sq(a, tb) + directed_mean_sq(b, ta);
}

double chamfer_distance_brute(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("chamfer: empty point set");
  auto directed = [](std::span<const Vec3> from, std::span<const Vec3> to) {
    double acc = 0.0;
    for (const Vec3& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& q : to) best = std::min(best, dist2(p, q));
      acc += best;
    }
    return acc / static_cast<double>(from.size());
  };
  return directed(a, b) + directed(b, a);
}

double voxel_iou(const VoxelGrid& pred, const VoxelGrid& gt, double threshold) {
  if (pred.resolution != gt.resolution)
    throw std::invalid_argument("voxel_iou: resolution mismatch");
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < pred.values.size(); ++i) {
    const bool p = pred.values[i] > threshold;
    const bool g = gt.values[i] > threshold;
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  if (uni == 0) return 1.0;  // both empty: defined as perfect agreement
  return static_cast<double>(inter) / static_cast<double>(uni);
}

LabeledPoints segment_points(const ShapeModel& model, std::span<const Vec3> points) {
  model.validate();
  LabeledPoints out;
  out.points.assign(points.begin(), points.end());
  out.labels.resize(points.size());
  std::vector<double> part_values(model.parts.size());
  for (size_t i = 0; i < points.size(); ++i) {
    eval_part_fields(model, points[i], part_values);
    int best = 0;
    for (size_t k = 1; k < part_values.size(); ++k)
      if (part_values[k] > part_values[best]) best = static_cast<int>(k);
    out.labels[i] = best;
  }
  return out;
}

std::vector<int> majority_label_mapping(const LabeledPoints& pred, std::span<const int> gt_labels,
                                        size_t part_count) {
  if (pred.labels.size() != gt_labels.size())
    throw std::invalid_argument("majority_label_mapping: size mismatch");
  int max_label = 0;
  for (int g : gt_labels) max_label = std::max(max_label, g);
  std::vector<std::vector<size_t>> votes(part_count,
                                         std::vector<size_t>(static_cast<size_t>(max_label) + 1));
  for (size_t i = 0; i < pred.labels.size(); ++i) {
    const int part = pred.labels[i];
    if (part < 0 || static_cast<size_t>(part) >= part_count)
      throw std::invalid_argument("majority_label_mapping: part label out of range");
    votes[static_cast<size_t>(part)][static_cast<size_t>(gt_labels[i])]++;
  }
  std::vector<int> mapping(part_count, 0);
  for (size_t p = 0; p < part_count; ++p) {
    size_t best_count = 0;
    int best_label = 0;
    for (int l = 1; l <= max_label; ++l) {
      const size_t c = votes[p][static_cast<size_t>(l)];
      if (c > best_count) {
        best_count = c;
        best_label = l;
      }
    }
    mapping[p] = best_label;  // 0 when the part owns no points
  }
  return mapping;
}

double miou(const LabeledPoints& pred, std::span<const int> gt_labels,
            std::span<const int> part_to_semantic) {
  if (pred.labels.size() != gt_labels.size()) throw std::invalid_argument("miou: size mismatch");
  int max_label = 0;
  for (int g : gt_labels) max_label = std::max(max_label, g);
  for (int m : part_to_semantic) max_label = std::max(max_label, m);
  std::vector<size_t> inter(static_cast<size_t>(max_label) + 1);
  std::vector<size_t> pred_count(static_cast<size_t>(max_label) + 1);
  std::vector<size_t> gt_count(static_cast<size_t>(max_label) + 1);
  for (size_t i = 0; i < pred.labels.size(); ++i) {
    const int part = pred.labels[i];
    if (part < 0 || static_cast<size_t>(part) >= part_to_semantic.size())
      throw std::invalid_argument("miou: part label out of mapping range");
    const int m = part_to_semantic[static_cast<size_t>(part)];
    const int g = gt_labels[i];
    if (m > 0) pred_count[static_cast<size_t>(m)]++;
    if (g > 0) gt_count[static_cast<size_t>(g)]++;
    if (m > 0 && m == g) inter[static_cast<size_t>(m)]++;
  }
  double acc = 0.0;
  size_t n_labels = 0;
  for (int l = 1; l <= max_label; ++l) {
    const size_t gi = gt_count[static_cast<size_t>(l)];
    const size_t pi = pred_count[static_cast<size_t>(l)];
    if (gi == 0 && pi == 0) continue;  // label absent everywhere
    const size_t uni = gi + pi - inter[static_cast<size_t>(l)];
    acc += static_cast<double>(inter[static_cast<size_t>(l)]) / static_cast<double>(uni);
    ++n_labels;
  }
  if (n_labels == 0) throw std::invalid_argument("miou: no labels present");
  return acc / static_cast<double>(n_labels);
}

VoxelGrid downsample_majority(const VoxelGrid& grid) {
  if (grid.resolution % 2 != 0)
    throw std::invalid_argument("downsample: resolution must be even");
  VoxelGrid out(grid.resolution / 2);
  for (int z = 0; z < out.resolution; ++z)
    for (int y = 0; y < out.resolution; ++y)
      for (int x = 0; x < out.resolution; ++x) {
        int occupied = 0;
        for (int dz = 0; dz < 2; ++dz)
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
              if (grid.at(2 * x + dx, 2 * y + dy, 2 * z + dz) > 0.5) ++occupied;
        out.at(x, y, z) = occupied >= 4 ? 1.0 : 0.0;
      }
  return out;
}

}  // namespace dpf
