#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace dpf {

// Elementary operations recorded on the tape. Every differentiable operation
// used by the field, deformer and loss pipelines must appear here with an
// adjoint in Tape::backward; recording an unknown kind throws immediately.
enum class Op : uint8_t {
  Const,
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Exp,
  Log,
  Sqrt,
  Tanh,
  Abs,
  Max,    // ties route the gradient to the lower node id
  Clamp,  // hard clamp; gradient passes only strictly inside (k0, k1)
  AddK,   // a + k0
  MulK,   // a * k0
  KSub,   // k0 - a
  Dot,    // sum_i val[a+i] * val[b+i] over contiguous ranges of length n
};

// Gradient of a scalar tape output with respect to every leaf, in leaf
// creation order (the flattened model parameter layout).
using GradVector = std::vector<double>;

// Append-only record of elementary operations. Nodes are stored in
// topological order; one reverse sweep yields all leaf gradients.
class Tape {
 public:
  using NodeId = int32_t;

  struct Node {
    int32_t a = -1;
    int32_t b = -1;
    uint32_t n = 0;
    Op op = Op::Const;
    double k0 = 0.0;
    double k1 = 0.0;
  };

  Tape() = default;

  void reserve(size_t nodes) {
    nodes_.reserve(nodes);
    values_.reserve(nodes);
  }

  void clear() {
    nodes_.clear();
    values_.clear();
    leaves_.clear();
    kinks_.clear();
  }

  size_t size() const { return nodes_.size(); }
  size_t num_leaves() const { return leaves_.size(); }

  double value(NodeId id) const { return values_[static_cast<size_t>(id)]; }

  NodeId leaf(double v) {
    NodeId id = push(Node{-1, -1, 0, Op::Leaf, 0.0, 0.0}, v);
    leaves_.push_back(id);
    return id;
  }

  NodeId constant(double v) { return push(Node{-1, -1, 0, Op::Const, v, 0.0}, v); }

  NodeId record(Op op, NodeId a, NodeId b, uint32_t n = 0, double k0 = 0.0, double k1 = 0.0);

  // Replace the value of the i-th leaf (creation order) and recompute every
  // node. The recorded structure is reused, so branch choices (max argmax,
  // clamp region, staged sign flips) are re-evaluated from values where the
  // operation itself encodes them.
  void set_leaf(size_t leaf_index, double v) {
    values_[static_cast<size_t>(leaves_[leaf_index])] = v;
  }
  double leaf_value(size_t leaf_index) const {
    return values_[static_cast<size_t>(leaves_[leaf_index])];
  }
  void replay();

  GradVector backward(NodeId output) const;

  // Distance to the nearest non-smooth or ill-conditioned point over the
  // recorded ops (max/clamp/abs tie distance, sqrt/log/div argument size),
  // restricted to nodes with id >= from. Finite-difference checks skip
  // evaluation points whose margin falls below the tie threshold.
  double min_kink_margin(NodeId from = 0) const;

  // Register a kink decided outside the tape (e.g. a sign canonicalization
  // applied while staging) so introspection still sees it.
  void note_kink(double margin) { kinks_.push_back(margin); }

 private:
  NodeId push(const Node& nd, double v) {
    nodes_.push_back(nd);
    values_.push_back(v);
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  double eval_node(const Node& nd) const;

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<NodeId> leaves_;
  std::vector<double> kinks_;
};

// Value handle with operator overloads; lets the field/deformer/loss code be
// written once, templated over double (plain) or Rev (recorded).
struct Rev {
  Tape* tape = nullptr;
  Tape::NodeId id = -1;

  double value() const { return tape->value(id); }
};

inline Rev make_rev(Tape& t, Tape::NodeId id) { return {&t, id}; }

inline Rev operator+(Rev a, Rev b) { return {a.tape, a.tape->record(Op::Add, a.id, b.id)}; }
inline Rev operator-(Rev a, Rev b) { return {a.tape, a.tape->record(Op::Sub, a.id, b.id)}; }
inline Rev operator*(Rev a, Rev b) { return {a.tape, a.tape->record(Op::Mul, a.id, b.id)}; }
inline Rev operator/(Rev a, Rev b) { return {a.tape, a.tape->record(Op::Div, a.id, b.id)}; }
inline Rev operator-(Rev a) { return {a.tape, a.tape->record(Op::Neg, a.id, -1)}; }

inline Rev operator+(Rev a, double k) { return {a.tape, a.tape->record(Op::AddK, a.id, -1, 0, k)}; }
inline Rev operator+(double k, Rev a) { return a + k; }
inline Rev operator-(Rev a, double k) { return a + (-k); }
inline Rev operator-(double k, Rev a) { return {a.tape, a.tape->record(Op::KSub, a.id, -1, 0, k)}; }
inline Rev operator*(Rev a, double k) { return {a.tape, a.tape->record(Op::MulK, a.id, -1, 0, k)}; }
inline Rev operator*(double k, Rev a) { return a * k; }
inline Rev operator/(Rev a, double k) { return a * (1.0 / k); }

inline Rev exp(Rev a) { return {a.tape, a.tape->record(Op::Exp, a.id, -1)}; }
inline Rev log(Rev a) { return {a.tape, a.tape->record(Op::Log, a.id, -1)}; }
inline Rev sqrt(Rev a) { return {a.tape, a.tape->record(Op::Sqrt, a.id, -1)}; }
inline Rev tanh(Rev a) { return {a.tape, a.tape->record(Op::Tanh, a.id, -1)}; }
inline Rev abs(Rev a) { return {a.tape, a.tape->record(Op::Abs, a.id, -1)}; }
inline Rev max(Rev a, Rev b) { return {a.tape, a.tape->record(Op::Max, a.id, b.id)}; }
inline Rev clamp(Rev a, double lo, double hi) {
  return {a.tape, a.tape->record(Op::Clamp, a.id, -1, 0, lo, hi)};
}

// Fused dot product; both operand ranges must be contiguous node ids.
Rev dotn(const Rev* a, const Rev* b, uint32_t n);

// Plain-double counterparts so templated code compiles for both scalar types.
inline double clamp(double a, double lo, double hi) { return a < lo ? lo : (a > hi ? hi : a); }
inline double dotn(const double* a, const double* b, uint32_t n) {
  double s = 0.0;
  for (uint32_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Central finite differences of fn against Tape::backward, one parameter at a
// time, using the recorded tape as the replayed function. Returns the worst
// relative error with denominator max(|analytic|, |numeric|, 1e-8), or
// nullopt when some kink argument is within tie_margin (caller resamples).
using TapeFn = std::function<Rev(Tape&, std::span<const Rev>)>;

std::optional<double> finite_diff_check(const TapeFn& fn, std::span<const double> params,
                                        double h, double tie_margin);

}  // namespace dpf
