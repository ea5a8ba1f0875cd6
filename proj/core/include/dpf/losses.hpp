#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dpf/grad.hpp"
#include "dpf/math.hpp"
#include "dpf/model.hpp"

namespace dpf {

struct LossWeights {
  double recon = 1.0;
  double deform = 0.1;
  double comp = 1e-4;
  double align = 1e-4;
};

enum class ReconForm : uint8_t {
  MeanAbsolute,  // mean of per-point |field - occupancy| (the default)
  Rmse,          // sqrt of the mean squared residual
};

struct LossOptions {
  double comp_eps = 1e-6;
  ReconForm recon_form = ReconForm::MeanAbsolute;
};

// Volume samples with ground-truth occupancy plus surface samples for the
// compactness term.
struct SampleBatch {
  std::vector<Vec3> volume_points;
  std::vector<uint8_t> occupancy;  // 0/1 per volume point
  std::vector<Vec3> surface_points;

  void validate() const;
};

struct LossReport {
  double recon = 0.0;
  double deform = 0.0;
  double comp = 0.0;
  double align = 0.0;
  double total = 0.0;
};

// --- plain loss terms (oracles for the recorded pipeline) -------------------

// Mean |pred - gt|; throws on length mismatch or empty input.
double loss_recon(std::span<const double> pred, std::span<const uint8_t> gt,
                  ReconForm form = ReconForm::MeanAbsolute);

// Mean over points of the summed per-part offset norms: (1/N) sum_j sum_i |v_ji|.
double loss_deform(std::span<const std::vector<Vec3>> offsets_per_point);

// (sum_i sqrt(mean_j values[i][j] + eps))^2.
double loss_comp(std::span<const std::vector<double>> part_values, double eps);

// Mean distance of sign-canonicalized rotations to the identity quaternion.
double loss_align(std::span<const Quat> rotations);

// --- recorded pipeline -------------------------------------------------------

struct TapedLoss {
  Rev recon, deform, comp, align, total;
  LossReport report() const {
    return {recon.value(), deform.value(), comp.value(), align.value(), total.value()};
  }
};

// Evaluates the field pipeline over the batch on the model's tape and
// composes the four weighted terms; the tape is left ready for backward().
TapedLoss loss_total_on_tape(Tape& tape, const TapedModel& model, const SampleBatch& batch,
                             const LossWeights& weights, const LossOptions& opts = {});

// Convenience wrapper staging a fresh tape internally.
LossReport loss_total(const SampleBatch& batch, const ShapeModel& model,
                      const LossWeights& weights, const LossOptions& opts = {},
                      bool use_deformers = true);

}  // namespace dpf
