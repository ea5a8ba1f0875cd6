#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dpf/grad.hpp"
#include "dpf/math.hpp"
#include "dpf/rng.hpp"

namespace dpf {

inline constexpr int kDeformerInputs = 4;   // (q_x, q_y, q_z, o)
inline constexpr int kDeformerOutputs = 4;  // (raw offset xyz, raw correction)
inline constexpr int kMaxDeformerWidth = 64;

// Weights of the per-part deformation MLP. Input is the world point plus the
// part's undeformed field value; hidden layers use tanh.
struct DeformerParams {
  struct Layer {
    int in = 0;
    int out = 0;
    std::vector<double> weights;  // row-major, out x in
    std::vector<double> bias;     // out
  };
  std::vector<Layer> layers;

  int hidden_layers() const { return static_cast<int>(layers.size()) - 1; }
  int width() const { return layers.empty() ? 0 : layers.front().out; }
  size_t parameter_count() const;
  void validate() const;  // throws std::invalid_argument on shape/finiteness violations
};

// Bounded offset and correction: v = v_max * tanh(raw_v) componentwise,
// c = tanh(raw_c) in [-1, 1].
struct DeformerOutput {
  Vec3 v{0.0, 0.0, 0.0};
  double c = 0.0;
};

inline constexpr double kDefaultVMax = 0.5;

// Parameter count for H hidden layers of width W:
// (4W + W) + (H-1)(W^2 + W) + (4W + 4).
size_t deformer_parameter_count(int hidden_layers, int width);

// Uniform init in [-scale/sqrt(fan_in), +scale/sqrt(fan_in)] for hidden
// layers; the output layer starts at exact zero so a fresh model reduces to
// the undeformed primitive field.
DeformerParams init_deformer(uint64_t seed, double scale, int hidden_layers = 2, int width = 32);

DeformerOutput deform(const DeformerParams& params, const Vec3& q, double o,
                      double v_max = kDefaultVMax);

// --- templated core --------------------------------------------------------
// Weight/bias values of one part staged as scalars of type T. Rows and
// activation blocks are contiguous so the recorded path can use fused dots.
template <class T>
struct StagedDeformer {
  struct Layer {
    int in, out;
    const T* weights;  // row-major
    const T* bias;
  };
  std::vector<Layer> layers;
  double v_max = kDefaultVMax;
};

template <class T>
struct DeformerOutT {
  Vec3T<T> v;
  T c;
};

// x must be 4 contiguous scalars (q, o). Buffers are caller-provided scratch
// of size >= kMaxDeformerWidth each.
template <class T>
inline DeformerOutT<T> deform_core(const StagedDeformer<T>& sd, const T* x, T* buf_a, T* buf_b) {
  using std::tanh;
  const T* cur = x;
  T* bufs[2] = {buf_a, buf_b};
  const size_t n_layers = sd.layers.size();
  for (size_t li = 0; li + 1 < n_layers; ++li) {
    const auto& layer = sd.layers[li];
    T* act = bufs[li % 2];
    // Pre-activations first, then tanh in a second pass so the activation
    // block is a contiguous id range for the next layer's fused dots.
    for (int r = 0; r < layer.out; ++r)
      act[r] = dotn(layer.weights + static_cast<size_t>(r) * layer.in, cur,
                    static_cast<uint32_t>(layer.in)) +
               layer.bias[r];
    for (int r = 0; r < layer.out; ++r) act[r] = tanh(act[r]);
    cur = act;
  }
  const auto& out = sd.layers.back();
  T raw[kDeformerOutputs];
  for (int r = 0; r < kDeformerOutputs; ++r)
    raw[r] = dotn(out.weights + static_cast<size_t>(r) * out.in, cur,
                  static_cast<uint32_t>(out.in)) +
             out.bias[r];
  T t0 = tanh(raw[0]), t1 = tanh(raw[1]), t2 = tanh(raw[2]);
  // The three offset components form a contiguous block (used by fused norms).
  DeformerOutT<T> res{{t0 * sd.v_max, t1 * sd.v_max, t2 * sd.v_max}, tanh(raw[3])};
  return res;
}

}  // namespace dpf
