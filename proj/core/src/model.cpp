#include "dpf/model.hpp"

#include <cmath>
#include <stdexcept>

namespace dpf {

void ShapeModel::validate() const {
  if (parts.empty()) throw std::invalid_argument("model: needs at least one part");
  if (!(config.tau > 0.0)) throw std::invalid_argument("model: tau must be positive");
  if (config.correction_weight < 0.0)
    throw std::invalid_argument("model: correction weight must be nonnegative");
  if (!(v_max >= 0.0)) throw std::invalid_argument("model: v_max must be nonnegative");
  for (const auto& p : parts) {
    p.primitive.validate();
    p.deformer.validate();
  }
}

ParamLayout make_layout(const ShapeModel& model) {
  ParamLayout layout;
  size_t off = 0;
  for (const auto& part : model.parts) {
    ParamLayout::PartSpan span;
    span.rot = off;
    off += 4;
    span.trans = off;
    off += 3;
    span.scale = off;
    span.scale_count = part.primitive.kind == PrimitiveKind::Cylinder ? 2 : 3;
    off += static_cast<size_t>(span.scale_count);
    span.rho = off;
    off += 1;
    span.deformer = off;
    span.deformer_count = part.deformer.parameter_count();
    off += span.deformer_count;
    layout.parts.push_back(span);
  }
  layout.total = off;
  return layout;
}

double softplus_realize(double raw) {
  // kMinScale + max(raw, 0) + log1p(exp(-|raw|)), numerically stable.
  return kMinScale + std::max(raw, 0.0) + std::log1p(std::exp(-std::abs(raw)));
}

double softplus_flatten(double scale) {
  double y = scale - kMinScale;
  if (y < 1e-9) y = 1e-9;  // keeps the raw value finite at the floor
  if (y > 30.0) return y;
  return std::log(std::expm1(y));
}

double sigmoid_realize(double raw) { return 0.5 * (1.0 + std::tanh(0.5 * raw)); }

double sigmoid_flatten(double rho) {
  double r = std::min(std::max(rho, 1e-12), 1.0 - 1e-12);
  return std::log(r / (1.0 - r));
}

std::vector<double> flatten_model(const ShapeModel& model) {
  ParamLayout layout = make_layout(model);
  std::vector<double> raw(layout.total);
  for (size_t i = 0; i < model.parts.size(); ++i) {
    const auto& part = model.parts[i];
    const auto& span = layout.parts[i];
    const Quat& r = part.primitive.rotation;
    raw[span.rot + 0] = r.w;
    raw[span.rot + 1] = r.x;
    raw[span.rot + 2] = r.y;
    raw[span.rot + 3] = r.z;
    raw[span.trans + 0] = part.primitive.translation.x;
    raw[span.trans + 1] = part.primitive.translation.y;
    raw[span.trans + 2] = part.primitive.translation.z;
    const Vec3& s = part.primitive.scale;
    if (span.scale_count == 3) {
      raw[span.scale + 0] = softplus_flatten(s.x);
      raw[span.scale + 1] = softplus_flatten(s.y);
      raw[span.scale + 2] = softplus_flatten(s.z);
    } else {
      raw[span.scale + 0] = softplus_flatten(s.x);  // radial (x == y)
      raw[span.scale + 1] = softplus_flatten(s.z);
    }
    raw[span.rho] = sigmoid_flatten(part.primitive.confidence);
    size_t off = span.deformer;
    for (const auto& layer : part.deformer.layers) {
      for (double w : layer.weights) raw[off++] = w;
      for (double b : layer.bias) raw[off++] = b;
    }
  }
  return raw;
}

ShapeModel unflatten_model(std::span<const double> raw, const ShapeModel& skeleton) {
  ParamLayout layout = make_layout(skeleton);
  if (raw.size() != layout.total)
    throw std::invalid_argument("unflatten: raw vector size mismatch");
  ShapeModel model = skeleton;
  for (size_t i = 0; i < model.parts.size(); ++i) {
    auto& part = model.parts[i];
    const auto& span = layout.parts[i];
    Quat q{raw[span.rot + 0], raw[span.rot + 1], raw[span.rot + 2], raw[span.rot + 3]};
    part.primitive.rotation = normalized(q);
    part.primitive.translation = {raw[span.trans + 0], raw[span.trans + 1], raw[span.trans + 2]};
    if (span.scale_count == 3) {
      part.primitive.scale = {softplus_realize(raw[span.scale + 0]),
                              softplus_realize(raw[span.scale + 1]),
                              softplus_realize(raw[span.scale + 2])};
    } else {
      const double radial = softplus_realize(raw[span.scale + 0]);
      part.primitive.scale = {radial, radial, softplus_realize(raw[span.scale + 1])};
    }
    part.primitive.confidence = sigmoid_realize(raw[span.rho]);
    size_t off = span.deformer;
    for (auto& layer : part.deformer.layers) {
      for (double& w : layer.weights) w = raw[off++];
      for (double& b : layer.bias) b = raw[off++];
    }
  }
  return model;
}

namespace {

// Softplus floor on the tape: kMinScale + max(u, 0) + log(1 + exp(-|u|)).
Rev softplus_on_tape(Tape& tape, Rev u) {
  Rev zero = make_rev(tape, tape.constant(0.0));
  Rev stable = log(exp(-abs(u)) + 1.0);
  return max(u, zero) + stable + kMinScale;
}

Rev sigmoid_on_tape(Rev x) { return (tanh(x * 0.5) + 1.0) * 0.5; }

// Re-emit values as a contiguous id block (identity pass-through nodes).
template <size_t N>
std::array<Rev, N> contiguous(Tape& tape, const std::array<Rev, N>& in) {
  std::array<Rev, N> out;
  for (size_t i = 0; i < N; ++i) out[i] = make_rev(tape, tape.record(Op::AddK, in[i].id, -1));
  return out;
}

}  // namespace

TapedModel stage_model(Tape& tape, std::span<const double> raw, const ShapeModel& skeleton,
                       bool use_deformers) {
  ParamLayout layout = make_layout(skeleton);
  if (raw.size() != layout.total) throw std::invalid_argument("stage_model: raw size mismatch");
  TapedModel staged;
  staged.config = skeleton.config;
  staged.v_max = skeleton.v_max;
  staged.use_deformers = use_deformers;
  staged.leaves.reserve(raw.size());
  for (double v : raw) staged.leaves.push_back(make_rev(tape, tape.leaf(v)));

  for (size_t i = 0; i < skeleton.parts.size(); ++i) {
    const auto& span = layout.parts[i];
    const auto& skel_part = skeleton.parts[i];
    TapedModel::Part part;
    part.prim.kind = skel_part.primitive.kind;

    // Normalized quaternion.
    Rev qw = staged.leaves[span.rot + 0];
    Rev qx = staged.leaves[span.rot + 1];
    Rev qy = staged.leaves[span.rot + 2];
    Rev qz = staged.leaves[span.rot + 3];
    Rev qn = sqrt(dotn(&staged.leaves[span.rot], &staged.leaves[span.rot], 4));
    Rev w = qw / qn, x = qx / qn, y = qy / qn, z = qz / qn;
    part.unit_quat = {w, x, y, z};

    // Rows of R^T from the unit quaternion, re-emitted contiguously.
    Rev xx = x * x, yy = y * y, zz = z * z;
    Rev xy = x * y, xz = x * z, yz = y * z;
    Rev wx = w * x, wy = w * y, wz = w * z;
    std::array<Rev, 3> c0 = {1.0 - 2.0 * (yy + zz), 2.0 * (xy + wz), 2.0 * (xz - wy)};
    std::array<Rev, 3> c1 = {2.0 * (xy - wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz + wx)};
    std::array<Rev, 3> c2 = {2.0 * (xz + wy), 2.0 * (yz - wx), 1.0 - 2.0 * (xx + yy)};
    std::array<Rev, 3> r0 = contiguous(tape, c0);
    std::array<Rev, 3> r1 = contiguous(tape, c1);
    std::array<Rev, 3> r2 = contiguous(tape, c2);
    part.prim.rt0 = {r0[0], r0[1], r0[2]};
    part.prim.rt1 = {r1[0], r1[1], r1[2]};
    part.prim.rt2 = {r2[0], r2[1], r2[2]};

    part.prim.translation = {staged.leaves[span.trans + 0], staged.leaves[span.trans + 1],
                             staged.leaves[span.trans + 2]};

    if (span.scale_count == 3) {
      part.prim.scale = {softplus_on_tape(tape, staged.leaves[span.scale + 0]),
                         softplus_on_tape(tape, staged.leaves[span.scale + 1]),
                         softplus_on_tape(tape, staged.leaves[span.scale + 2])};
    } else {
      Rev radial = softplus_on_tape(tape, staged.leaves[span.scale + 0]);
      part.prim.scale = {radial, radial, softplus_on_tape(tape, staged.leaves[span.scale + 1])};
    }
    part.prim.rho = sigmoid_on_tape(staged.leaves[span.rho]);

    // Deformer weights are the leaves themselves: rows are contiguous by
    // construction of the layout.
    part.deformer.v_max = skeleton.v_max;
    size_t off = span.deformer;
    for (const auto& layer : skel_part.deformer.layers) {
      StagedDeformer<Rev>::Layer sl;
      sl.in = layer.in;
      sl.out = layer.out;
      sl.weights = &staged.leaves[off];
      off += layer.weights.size();
      sl.bias = &staged.leaves[off];
      off += layer.bias.size();
      part.deformer.layers.push_back(sl);
    }
    staged.parts.push_back(std::move(part));
  }
  staged.staging_end = static_cast<Tape::NodeId>(tape.size());
  return staged;
}

void eval_point_on_tape(Tape& tape, const TapedModel& model, const Vec3& q, TapedPointEval& out) {
  out.part_values.clear();
  out.offsets.clear();
  // World point as a contiguous constant block reused by every part.
  Vec3T<Rev> qv{make_rev(tape, tape.constant(q.x)), make_rev(tape, tape.constant(q.y)),
                make_rev(tape, tape.constant(q.z))};
  Rev buf_a[kMaxDeformerWidth], buf_b[kMaxDeformerWidth];
  for (const auto& part : model.parts) {
    Vec3T<Rev> p = local_point(part.prim, qv);
    Rev value{};
    if (model.use_deformers) {
      Rev o_und = normalize_core(ppf_core(part.prim.kind, part.prim.scale, p), model.config.tau);
      // MLP input (q, o) as one contiguous block.
      Rev xin[kDeformerInputs];
      xin[0] = make_rev(tape, tape.constant(q.x));
      xin[1] = make_rev(tape, tape.constant(q.y));
      xin[2] = make_rev(tape, tape.constant(q.z));
      xin[3] = make_rev(tape, tape.record(Op::AddK, o_und.id, -1));
      DeformerOutT<Rev> d = deform_core(part.deformer, xin, buf_a, buf_b);
      value = part_value_core(part.prim, p, d.v, d.c, model.config);
      out.offsets.push_back(d.v);
    } else {
      Rev d = ppf_core(part.prim.kind, part.prim.scale, p);
      Rev o = part.prim.rho * normalize_core(d, model.config.tau);
      value = clamp(o, 0.0, 1.0);
    }
    out.part_values.push_back(value);
  }
  Rev obj = out.part_values[0];
  for (size_t i = 1; i < out.part_values.size(); ++i) obj = max(obj, out.part_values[i]);
  out.object_value = obj;
}

namespace {

struct PlainPartScratch {
  StagedPrimitive<double> prim;
  StagedDeformer<double> deformer;
};

std::vector<PlainPartScratch> stage_plain(const ShapeModel& model) {
  std::vector<PlainPartScratch> staged;
  staged.reserve(model.parts.size());
  for (const auto& part : model.parts) {
    PlainPartScratch s;
    s.prim = stage_primitive(part.primitive);
    s.deformer.v_max = model.v_max;
    for (const auto& layer : part.deformer.layers)
      s.deformer.layers.push_back({layer.in, layer.out, layer.weights.data(), layer.bias.data()});
    staged.push_back(std::move(s));
  }
  return staged;
}

double eval_staged_part(const PlainPartScratch& s, const FieldConfig& cfg, const Vec3& q,
                        bool use_deformers) {
  Vec3 p = local_point(s.prim, q);
  if (!use_deformers)
    return clamp(s.prim.rho * normalize_core(ppf_core(s.prim.kind, s.prim.scale, p), cfg.tau),
                 0.0, 1.0);
  double o_und = normalize_core(ppf_core(s.prim.kind, s.prim.scale, p), cfg.tau);
  double x[kDeformerInputs] = {q.x, q.y, q.z, o_und};
  double buf_a[kMaxDeformerWidth], buf_b[kMaxDeformerWidth];
  DeformerOutT<double> d = deform_core(s.deformer, x, buf_a, buf_b);
  return part_value_core(s.prim, p, d.v, d.c, cfg);
}

}  // namespace

double eval_object_field(const ShapeModel& model, const Vec3& q, bool use_deformers) {
  auto staged = stage_plain(model);
  double best = 0.0;
  bool first = true;
  for (const auto& s : staged) {
    double v = eval_staged_part(s, model.config, q, use_deformers);
    if (first || v > best) best = v;
    first = false;
  }
  if (first) throw std::invalid_argument("eval_object_field: model has no parts");
  return best;
}

void eval_part_fields(const ShapeModel& model, const Vec3& q, std::span<double> out,
                      bool use_deformers) {
  auto staged = stage_plain(model);
  if (out.size() != staged.size())
    throw std::invalid_argument("eval_part_fields: output span size mismatch");
  for (size_t i = 0; i < staged.size(); ++i)
    out[i] = eval_staged_part(staged[i], model.config, q, use_deformers);
}

std::vector<double> eval_field_batch(const ShapeModel& model, std::span<const Vec3> points,
                                     bool use_deformers) {
  if (model.parts.empty()) throw std::invalid_argument("eval_field_batch: model has no parts");
  auto staged = stage_plain(model);
  std::vector<double> values(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    double best = 0.0;
    for (size_t k = 0; k < staged.size(); ++k) {
      double v = eval_staged_part(staged[k], model.config, points[i], use_deformers);
      if (k == 0 || v > best) best = v;
    }
    values[i] = best;
  }
  return values;
}

}  // namespace dpf
