#include "dpf/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace dpf {

void SampleBatch::validate() const {
  if (volume_points.empty()) throw std::invalid_argument("batch: needs >= 1 volume point");
  if (volume_points.size() != occupancy.size())
    throw std::invalid_argument("batch: occupancy length mismatch");
  for (const auto& p : volume_points)
    if (!finite(p)) throw std::invalid_argument("batch: non-finite volume point");
  for (const auto& p : surface_points)
    if (!finite(p)) throw std::invalid_argument("batch: non-finite surface point");
}

double loss_recon(std::span<const double> pred, std::span<const uint8_t> gt, ReconForm form) {
  if (pred.size() != gt.size()) throw std::invalid_argument("loss_recon: length mismatch");
  if (pred.empty()) throw std::invalid_argument("loss_recon: empty input");
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - static_cast<double>(gt[i]);
    acc += form == ReconForm::MeanAbsolute ? std::abs(r) : r * r;
  }
  acc /= static_cast<double>(pred.size());
  return form == ReconForm::MeanAbsolute ? acc : std::sqrt(acc);
}

double loss_deform(std::span<const std::vector<Vec3>> offsets_per_point) {
  if (offsets_per_point.empty()) throw std::invalid_argument("loss_deform: empty input");
  double acc = 0.0;
  for (const auto& per_part : offsets_per_point)
    for (const auto& v : per_part) acc += norm(v);
  return acc / static_cast<double>(offsets_per_point.size());
}

double loss_comp(std::span<const std::vector<double>> part_values, double eps) {
  if (!(eps > 0.0) && eps != 0.0)
    throw std::invalid_argument("loss_comp: eps must be nonnegative");
  double total = 0.0;
  for (const auto& values : part_values) {
    if (values.empty()) throw std::invalid_argument("loss_comp: empty part row");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    total += std::sqrt(mean + eps);
  }
  return total * total;
}

double loss_align(std::span<const Quat> rotations) {
  if (rotations.empty()) throw std::invalid_argument("loss_align: empty input");
  double acc = 0.0;
  for (const Quat& r : rotations) {
    const double sign = r.w < 0.0 ? -1.0 : 1.0;
    const double dw = sign * r.w - 1.0;
    const double dx = sign * r.x;
    const double dy = sign * r.y;
    const double dz = sign * r.z;
    acc += std::sqrt(dw * dw + dx * dx + dy * dy + dz * dz);
  }
  return acc / static_cast<double>(rotations.size());
}

TapedLoss loss_total_on_tape(Tape& tape, const TapedModel& model, const SampleBatch& batch,
                             const LossWeights& weights, const LossOptions& opts) {
  batch.validate();
  if (model.parts.empty()) throw std::invalid_argument("loss: model has no parts");
  const size_t n_omega = batch.volume_points.size();
  const size_t n_parts = model.parts.size();

  TapedPointEval eval;
  Rev recon_acc{};
  Rev deform_acc{};
  bool have_deform = false;
  bool have_recon = false;
  for (size_t j = 0; j < n_omega; ++j) {
    eval_point_on_tape(tape, model, batch.volume_points[j], eval);
    Rev resid = eval.object_value + (-static_cast<double>(batch.occupancy[j]));
    Rev term = opts.recon_form == ReconForm::MeanAbsolute ? abs(resid) : resid * resid;
    recon_acc = have_recon ? recon_acc + term : term;
    have_recon = true;
    if (model.use_deformers) {
      for (const auto& v : eval.offsets) {
        Rev nv = sqrt(dotn(&v.x, &v.x, 3));
        deform_acc = have_deform ? deform_acc + nv : nv;
        have_deform = true;
      }
    }
  }
  Rev recon = recon_acc * (1.0 / static_cast<double>(n_omega));
  if (opts.recon_form == ReconForm::Rmse) recon = sqrt(recon);

  Rev deform = have_deform ? deform_acc * (1.0 / static_cast<double>(n_omega))
                           : make_rev(tape, tape.constant(0.0));

  // Compactness over the surface samples: per-part mean occupancy.
  Rev comp{};
  if (!batch.surface_points.empty()) {
    std::vector<Rev> part_acc(n_parts);
    std::vector<bool> part_have(n_parts, false);
    for (const auto& q : batch.surface_points) {
      eval_point_on_tape(tape, model, q, eval);
      for (size_t i = 0; i < n_parts; ++i) {
        part_acc[i] = part_have[i] ? part_acc[i] + eval.part_values[i] : eval.part_values[i];
        part_have[i] = true;
      }
    }
    Rev sum_sqrt{};
    for (size_t i = 0; i < n_parts; ++i) {
      Rev mean = part_acc[i] * (1.0 / static_cast<double>(batch.surface_points.size()));
      Rev root = sqrt(mean + opts.comp_eps);
      sum_sqrt = i == 0 ? root : sum_sqrt + root;
    }
    comp = sum_sqrt * sum_sqrt;
  } else {
    comp = make_rev(tape, tape.constant(0.0));
  }

  // Alignment of sign-canonicalized unit quaternions to the identity.
  Rev align_acc{};
  for (size_t i = 0; i < n_parts; ++i) {
    const QuatT<Rev>& uq = model.parts[i].unit_quat;
    const double flip = uq.w.value() < 0.0 ? -1.0 : 1.0;
    tape.note_kink(std::abs(uq.w.value()));
    Rev dw = uq.w * flip - 1.0;
    Rev dx = uq.x * flip;
    Rev dy = uq.y * flip;
    Rev dz = uq.z * flip;
    Rev dist = sqrt(dw * dw + dx * dx + dy * dy + dz * dz);
    align_acc = i == 0 ? dist : align_acc + dist;
  }
  Rev align = align_acc * (1.0 / static_cast<double>(n_parts));

  Rev total = recon * weights.recon + deform * weights.deform + comp * weights.comp +
              align * weights.align;
  return {recon, deform, comp, align, total};
}

LossReport loss_total(const SampleBatch& batch, const ShapeModel& model,
                      const LossWeights& weights, const LossOptions& opts, bool use_deformers) {
  Tape tape;
  std::vector<double> raw = flatten_model(model);
  TapedModel staged = stage_model(tape, raw, model, use_deformers);
  return loss_total_on_tape(tape, staged, batch, weights, opts).report();
}

}  // namespace dpf
