#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpf/grad.hpp"
#include "dpf/math.hpp"

namespace dpf {

enum class PrimitiveKind : uint8_t { Cuboid, Cylinder };

inline const char* kind_tag(PrimitiveKind k) {
  return k == PrimitiveKind::Cuboid ? "cuboid" : "cylinder";
}
PrimitiveKind kind_from_tag(const std::string& tag);

// Smallest admissible scale component; field values divide by scale.
inline constexpr double kMinScale = 0.01;

// Explicit part proxy: a posed, scaled geometric primitive with a confidence
// gating its participation in the assembled object.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Cuboid;
  Quat rotation = quat_identity();  // unit, local -> world
  Vec3 translation{0.0, 0.0, 0.0};
  Vec3 scale{1.0, 1.0, 1.0};  // strictly positive; cylinder: scale.x == scale.y
  double confidence = 1.0;    // in [0, 1]

  // Throws std::invalid_argument naming the violated invariant.
  void validate() const;
};

struct FieldConfig {
  double tau = 4.0;                 // decay temperature of the occupancy falloff
  double correction_weight = 0.1;   // scales the correction scalar before adding
};

// --- templated core -------------------------------------------------------
// The same expressions serve plain evaluation (T = double) and recorded
// evaluation (T = Rev); finite-difference tests validate both at once.

template <class T>
struct StagedPrimitive {
  PrimitiveKind kind;
  // Rows of R^T, each row contiguous for fused dot products.
  Vec3T<T> rt0, rt1, rt2;
  Vec3T<T> translation;
  Vec3T<T> scale;
  T rho;
};

template <class T>
inline Vec3T<T> local_point(const StagedPrimitive<T>& sp, const Vec3T<T>& q) {
  Vec3T<T> d{q.x - sp.translation.x, q.y - sp.translation.y, q.z - sp.translation.z};
  return {dotn(&sp.rt0.x, &d.x, 3), dotn(&sp.rt1.x, &d.x, 3), dotn(&sp.rt2.x, &d.x, 3)};
}

template <class T>
inline T ppf_core(PrimitiveKind kind, const Vec3T<T>& scale, const Vec3T<T>& p) {
  using std::abs;
  using std::max;
  using std::sqrt;
  T dz = abs(p.z) / scale.z;
  if (kind == PrimitiveKind::Cuboid) {
    T dx = abs(p.x) / scale.x;
    T dy = abs(p.y) / scale.y;
    return max(max(dx, dy), dz);
  }
  T radial = sqrt(p.x * p.x + p.y * p.y) / scale.x;
  return max(radial, dz);
}

template <class T>
inline T normalize_core(T d, double tau) {
  using std::exp;
  return exp(d * -tau);
}

// Part value after deformation and correction:
//   clamp(rho * exp(-tau * ppf(p + v)) + cw * c, 0, 1).
template <class T>
inline T part_value_core(const StagedPrimitive<T>& sp, const Vec3T<T>& p, const Vec3T<T>& v,
                         const T& c, const FieldConfig& cfg) {
  Vec3T<T> pd{p.x + v.x, p.y + v.y, p.z + v.z};
  T o = sp.rho * normalize_core(ppf_core(sp.kind, sp.scale, pd), cfg.tau);
  return clamp(o + c * cfg.correction_weight, 0.0, 1.0);
}

inline StagedPrimitive<double> stage_primitive(const Primitive& prim) {
  Mat3 r = quat_to_mat(prim.rotation);
  return {prim.kind,
          {r.m[0], r.m[3], r.m[6]},
          {r.m[1], r.m[4], r.m[7]},
          {r.m[2], r.m[5], r.m[8]},
          prim.translation,
          prim.scale,
          prim.confidence};
}

// --- plain operations ------------------------------------------------------

// p = R^T (q - t); the rotation takes the local frame into the world frame.
inline Vec3 world_to_local(const Primitive& prim, const Vec3& q) {
  return mat_apply_transposed(quat_to_mat(prim.rotation), q - prim.translation);
}

// Structural distance of a local-frame point: 1 on the primitive surface,
// < 1 inside, scaling componentwise with the primitive size.
inline double ppf_value(const Primitive& prim, const Vec3& p) {
  return ppf_core(prim.kind, prim.scale, p);
}

// exp(-tau * d) in (0, 1]; 1 at the center, exp(-tau) on the surface.
inline double normalize_field(double d, const FieldConfig& cfg) {
  return normalize_core(d, cfg.tau);
}

// Deformed, corrected, confidence-weighted part field at a world point.
inline double part_field_value(const Primitive& prim, const Vec3& v, double c, const Vec3& q,
                               const FieldConfig& cfg) {
  StagedPrimitive<double> sp = stage_primitive(prim);
  return part_value_core(sp, local_point(sp, q), v, c, cfg);
}

// Max-pool of per-part values; throws on an empty part list.
double object_field_value(std::span<const double> part_values);

}  // namespace dpf
