#include "dpf/deformer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dpf {

size_t deformer_parameter_count(int hidden_layers, int width) {
  const size_t w = static_cast<size_t>(width);
  size_t count = kDeformerInputs * w + w;  // input layer
  for (int i = 1; i < hidden_layers; ++i) count += w * w + w;
  count += w * kDeformerOutputs + kDeformerOutputs;  // output layer
  return count;
}

size_t DeformerParams::parameter_count() const {
  size_t count = 0;
  for (const auto& l : layers) count += l.weights.size() + l.bias.size();
  return count;
}

void DeformerParams::validate() const {
  if (layers.size() < 2) throw std::invalid_argument("deformer: needs at least two layers");
  int expect_in = kDeformerInputs;
  for (size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.in != expect_in)
      throw std::invalid_argument("deformer: layer " + std::to_string(i) + " expects input " +
                                  std::to_string(expect_in) + ", has " + std::to_string(l.in));
    if (l.out <= 0 || l.out > kMaxDeformerWidth)
      throw std::invalid_argument("deformer: layer " + std::to_string(i) + " width out of range");
    if (l.weights.size() != static_cast<size_t>(l.in) * static_cast<size_t>(l.out) ||
        l.bias.size() != static_cast<size_t>(l.out))
      throw std::invalid_argument("deformer: layer " + std::to_string(i) + " shape mismatch");
    for (double w : l.weights)
      if (!std::isfinite(w)) throw std::invalid_argument("deformer: non-finite weight");
    for (double b : l.bias)
      if (!std::isfinite(b)) throw std::invalid_argument("deformer: non-finite bias");
    expect_in = l.out;
  }
  if (layers.back().out != kDeformerOutputs)
    throw std::invalid_argument("deformer: output layer must have 4 outputs");
}

DeformerParams init_deformer(uint64_t seed, double scale, int hidden_layers, int width) {
  if (scale < 0.0) throw std::invalid_argument("init_deformer: scale must be nonnegative");
  if (hidden_layers < 1) throw std::invalid_argument("init_deformer: needs >= 1 hidden layer");
  if (width < 1 || width > kMaxDeformerWidth)
    throw std::invalid_argument("init_deformer: width out of range");
  Rng rng(seed);
  DeformerParams params;
  int in = kDeformerInputs;
  for (int li = 0; li < hidden_layers; ++li) {
    DeformerParams::Layer l;
    l.in = in;
    l.out = width;
    const double bound = scale / std::sqrt(static_cast<double>(l.in));
    l.weights.resize(static_cast<size_t>(l.in) * l.out);
    l.bias.resize(static_cast<size_t>(l.out));
    for (auto& w : l.weights) w = rng.uniform(-bound, bound);
    for (auto& b : l.bias) b = rng.uniform(-bound, bound);
    params.layers.push_back(std::move(l));
    in = width;
  }
  DeformerParams::Layer out;
  out.in = in;
  out.out = kDeformerOutputs;
  out.weights.assign(static_cast<size_t>(out.in) * kDeformerOutputs, 0.0);
  out.bias.assign(kDeformerOutputs, 0.0);
  params.layers.push_back(std::move(out));
  return params;
}

DeformerOutput deform(const DeformerParams& params, const Vec3& q, double o, double v_max) {
  StagedDeformer<double> sd;
  sd.v_max = v_max;
  sd.layers.reserve(params.layers.size());
  for (const auto& l : params.layers)
    sd.layers.push_back({l.in, l.out, l.weights.data(), l.bias.data()});
  double x[kDeformerInputs] = {q.x, q.y, q.z, o};
  double buf_a[kMaxDeformerWidth], buf_b[kMaxDeformerWidth];
  DeformerOutT<double> r = deform_core(sd, x, buf_a, buf_b);
  return {r.v, r.c};
}

}  // namespace dpf
