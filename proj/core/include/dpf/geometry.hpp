#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dpf/math.hpp"
#include "dpf/model.hpp"

namespace dpf {

// Cubic grid over [-1, 1]^3, values in [0, 1], x-fastest storage order.
struct VoxelGrid {
  int resolution = 0;
  std::vector<double> values;

  VoxelGrid() = default;
  explicit VoxelGrid(int res) : resolution(res), values(static_cast<size_t>(res) * res * res, 0.0) {}

  size_t index(int x, int y, int z) const {
    return static_cast<size_t>(x) +
           static_cast<size_t>(resolution) * (static_cast<size_t>(y) +
                                              static_cast<size_t>(resolution) * z);
  }
  double at(int x, int y, int z) const { return values[index(x, y, z)]; }
  double& at(int x, int y, int z) { return values[index(x, y, z)]; }

  double spacing() const { return 2.0 / resolution; }
  Vec3 center(int x, int y, int z) const {
    const double h = spacing();
    return {-1.0 + (x + 0.5) * h, -1.0 + (y + 0.5) * h, -1.0 + (z + 0.5) * h};
  }

  void validate() const;
};

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int32_t, 3>> triangles;

  bool empty() const { return triangles.empty(); }
  void validate() const;
};

struct LabeledPoints {
  std::vector<Vec3> points;
  std::vector<int> labels;
};

// Object field evaluated at every voxel center. Evaluation is pure per voxel;
// slабs may run on several threads with bitwise-identical results.
VoxelGrid rasterize_field(const ShapeModel& model, int resolution, bool use_deformers = true);

// Classic 256-case marching cubes with linear edge interpolation; vertices in
// world units. All values on one side of the level produces an empty mesh.
Mesh marching_cubes(const VoxelGrid& grid, double iso);

// Area-weighted uniform surface sampling, deterministic under seed.
std::vector<Vec3> sample_mesh_surface(const Mesh& mesh, size_t n, uint64_t seed);

// Symmetric mean squared nearest-neighbor distance, exact (kd-tree
// accelerated; equals the brute-force evaluation bit for bit).
double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b);
double chamfer_distance_brute(std::span<const Vec3> a, std::span<const Vec3> b);

// |pred AND gt| / |pred OR gt| after binarizing at threshold; both empty -> 1.
double voxel_iou(const VoxelGrid& pred, const VoxelGrid& gt, double threshold = 0.5);

// Labels each point by the arg-max part field value (ties -> lowest index).
LabeledPoints segment_points(const ShapeModel& model, std::span<const Vec3> points);

// Majority-vote map from part index to semantic label (0 = unassigned).
std::vector<int> majority_label_mapping(const LabeledPoints& pred, std::span<const int> gt_labels,
                                        size_t part_count);

// Mean per-semantic-label IoU of mapped predictions against ground truth.
// Labels present in the ground truth define the label set.
double miou(const LabeledPoints& pred, std::span<const int> gt_labels,
            std::span<const int> part_to_semantic);

// Majority 2x-downsample of a binary grid (ties count as occupied).
VoxelGrid downsample_majority(const VoxelGrid& grid);

}  // namespace dpf
