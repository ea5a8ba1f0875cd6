#include "dpf/fields.hpp"

#include <cmath>

namespace dpf {

PrimitiveKind kind_from_tag(const std::string& tag) {
  if (tag == "cuboid") return PrimitiveKind::Cuboid;
  if (tag == "cylinder") return PrimitiveKind::Cylinder;
  throw std::invalid_argument("unknown primitive kind tag: '" + tag + "'");
}

void Primitive::validate() const {
  const double n = norm(rotation);
  if (std::abs(n - 1.0) > 1e-9)
    throw std::invalid_argument("primitive: rotation quaternion not unit (|q| = " +
                                std::to_string(n) + ")");
  if (!finite(translation)) throw std::invalid_argument("primitive: non-finite translation");
  if (!finite(scale)) throw std::invalid_argument("primitive: non-finite scale");
  if (scale.x < kMinScale || scale.y < kMinScale || scale.z < kMinScale)
    throw std::invalid_argument("primitive: scale component below minimum " +
                                std::to_string(kMinScale));
  if (kind == PrimitiveKind::Cylinder && scale.x != scale.y)
    throw std::invalid_argument("primitive: cylinder radial scales must be identical");
  if (!(confidence >= 0.0 && confidence <= 1.0))
    throw std::invalid_argument("primitive: confidence outside [0, 1]");
}

double object_field_value(std::span<const double> part_values) {
  if (part_values.empty())
    throw std::invalid_argument("object_field_value: model has no parts");
  double best = part_values[0];
  for (size_t i = 1; i < part_values.size(); ++i)
    if (part_values[i] > best) best = part_values[i];
  return best;
}

}  // namespace dpf
