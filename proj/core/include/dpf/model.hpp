#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dpf/deformer.hpp"
#include "dpf/fields.hpp"
#include "dpf/grad.hpp"
#include "dpf/math.hpp"

namespace dpf {

struct FitMeta {
  uint32_t stage = 0;
  uint64_t iteration = 0;
  uint64_t seed = 0;
};

// Full shape representation: M parts, each a posed primitive with its own
// deformation network, plus the shared field configuration.
struct ShapeModel {
  FieldConfig config;
  double v_max = kDefaultVMax;
  struct Part {
    Primitive primitive;
    DeformerParams deformer;
  };
  std::vector<Part> parts;
  FitMeta meta;

  size_t part_count() const { return parts.size(); }
  void validate() const;
};

// Flattened optimization layout, per part and in order:
//   rotation raw 4-vector (w, x, y, z)      -- renormalized after each step
//   translation (x, y, z)
//   raw scales (3 for cuboid, 2 for cylinder: radial, axial)
//       realized as s = kMinScale + softplus(raw)
//   raw confidence, realized as rho = sigmoid(raw)
//   deformer layers: weights row-major then bias, layer by layer
struct ParamLayout {
  struct PartSpan {
    size_t rot;        // offset of the 4 rotation values
    size_t trans;      // offset of the 3 translation values
    size_t scale;      // offset of the raw scales
    int scale_count;   // 3 (cuboid) or 2 (cylinder)
    size_t rho;        // offset of the raw confidence
    size_t deformer;   // offset of the first deformer value
    size_t deformer_count;
  };
  std::vector<PartSpan> parts;
  size_t total = 0;
};

ParamLayout make_layout(const ShapeModel& model);

// Realized model -> raw optimization vector (inverse reparameterizations).
std::vector<double> flatten_model(const ShapeModel& model);

// Raw vector -> realized model; `skeleton` supplies kinds, deformer shapes,
// field config and metadata.
ShapeModel unflatten_model(std::span<const double> raw, const ShapeModel& skeleton);

double softplus_realize(double raw);       // kMinScale + softplus(raw)
double softplus_flatten(double scale);     // inverse of the above
double sigmoid_realize(double raw);
double sigmoid_flatten(double rho);

// Model staged onto a tape: leaves in layout order plus the realization
// subgraph (quaternion normalization, scale/confidence reparameterizations,
// transposed rotation rows, staged deformer weights).
struct TapedModel {
  struct Part {
    StagedPrimitive<Rev> prim;
    QuatT<Rev> unit_quat;        // normalized, before sign canonicalization
    StagedDeformer<Rev> deformer;
  };
  FieldConfig config;
  double v_max = kDefaultVMax;
  bool use_deformers = true;  // false reproduces the undeformed-primitive mode
  std::vector<Part> parts;
  std::vector<Rev> leaves;  // layout order; staged layers point into this

  // Node id of the first node that depends on the evaluation points; kinks
  // recorded before this id are parameter-only.
  Tape::NodeId staging_end = 0;
};

TapedModel stage_model(Tape& tape, std::span<const double> raw, const ShapeModel& skeleton,
                       bool use_deformers);

// Per-point evaluation on the tape. Fills per-part field values and, when
// use_deformers is set, the per-part offsets (for the deformation loss).
struct TapedPointEval {
  Rev object_value;
  std::vector<Rev> part_values;
  std::vector<Vec3T<Rev>> offsets;
};

void eval_point_on_tape(Tape& tape, const TapedModel& model, const Vec3& q, TapedPointEval& out);

// Plain-double evaluation of the full pipeline at one point.
double eval_object_field(const ShapeModel& model, const Vec3& q, bool use_deformers = true);

// Per-part values at one point (deformed, corrected, clamped).
void eval_part_fields(const ShapeModel& model, const Vec3& q, std::span<double> out,
                      bool use_deformers = true);

// Batch evaluation; pure and order-preserving, equal to the per-point loop.
std::vector<double> eval_field_batch(const ShapeModel& model, std::span<const Vec3> points,
                                     bool use_deformers = true);

}  // namespace dpf
