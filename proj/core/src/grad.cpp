#include "dpf/grad.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace dpf {

double Tape::eval_node(const Node& nd) const {
  const double* v = values_.data();
  switch (nd.op) {
    case Op::Const:
    case Op::Leaf:
      throw std::logic_error("tape: terminal nodes are not re-evaluated");
    case Op::Add:
      return v[nd.a] + v[nd.b];
    case Op::Sub:
      return v[nd.a] - v[nd.b];
    case Op::Mul:
      return v[nd.a] * v[nd.b];
    case Op::Div:
      return v[nd.a] / v[nd.b];
    case Op::Neg:
      return -v[nd.a];
    case Op::Exp:
      return std::exp(v[nd.a]);
    case Op::Log:
      return std::log(v[nd.a]);
    case Op::Sqrt:
      return std::sqrt(v[nd.a]);
    case Op::Tanh:
      return std::tanh(v[nd.a]);
    case Op::Abs:
      return std::abs(v[nd.a]);
    case Op::Max:
      return v[nd.a] >= v[nd.b] ? v[nd.a] : v[nd.b];
    case Op::Clamp:
      return v[nd.a] < nd.k0 ? nd.k0 : (v[nd.a] > nd.k1 ? nd.k1 : v[nd.a]);
    case Op::AddK:
      return v[nd.a] + nd.k0;
    case Op::MulK:
      return v[nd.a] * nd.k0;
    case Op::KSub:
      return nd.k0 - v[nd.a];
    case Op::Dot: {
      double s = 0.0;
      for (uint32_t i = 0; i < nd.n; ++i) s += v[nd.a + i] * v[nd.b + i];
      return s;
    }
  }
  throw std::logic_error("tape: unregistered op kind");
}

Tape::NodeId Tape::record(Op op, NodeId a, NodeId b, uint32_t n, double k0, double k1) {
  switch (op) {
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
    case Op::Max:
      assert(a >= 0 && b >= 0);
      break;
    case Op::Neg:
    case Op::Exp:
    case Op::Log:
    case Op::Sqrt:
    case Op::Tanh:
    case Op::Abs:
    case Op::Clamp:
    case Op::AddK:
    case Op::MulK:
    case Op::KSub:
      assert(a >= 0);
      break;
    case Op::Dot:
      assert(a >= 0 && b >= 0 && n > 0);
      break;
    case Op::Const:
    case Op::Leaf:
      throw std::logic_error("tape: use leaf()/constant() for terminal nodes");
    default:
      throw std::logic_error("tape: unregistered op kind");
  }
  Node nd{a, b, n, op, k0, k1};
  double v = eval_node(nd);
  return push(nd, v);
}

void Tape::replay() {
  const size_t n = nodes_.size();
  for (size_t i = 0; i < n; ++i) {
    const Node& nd = nodes_[i];
    if (nd.op == Op::Leaf) continue;
    if (nd.op == Op::Const) {
      values_[i] = nd.k0;
      continue;
    }
    values_[i] = eval_node(nd);
  }
}

GradVector Tape::backward(NodeId output) const {
  if (output < 0 || static_cast<size_t>(output) >= nodes_.size())
    throw std::invalid_argument("backward: output node out of range");
  std::vector<double> adj(nodes_.size(), 0.0);
  adj[static_cast<size_t>(output)] = 1.0;
  const double* v = values_.data();
  for (int32_t i = output; i >= 0; --i) {
    const double g = adj[static_cast<size_t>(i)];
    if (g == 0.0) continue;
    const Node& nd = nodes_[static_cast<size_t>(i)];
    switch (nd.op) {
      case Op::Const:
      case Op::Leaf:
        break;
      case Op::Add:
        adj[nd.a] += g;
        adj[nd.b] += g;
        break;
      case Op::Sub:
        adj[nd.a] += g;
        adj[nd.b] -= g;
        break;
      case Op::Mul:
        adj[nd.a] += g * v[nd.b];
        adj[nd.b] += g * v[nd.a];
        break;
      case Op::Div:
        adj[nd.a] += g / v[nd.b];
        adj[nd.b] -= g * v[nd.a] / (v[nd.b] * v[nd.b]);
        break;
      case Op::Neg:
        adj[nd.a] -= g;
        break;
      case Op::Exp:
        adj[nd.a] += g * v[i];
        break;
      case Op::Log:
        adj[nd.a] += g / v[nd.a];
        break;
      case Op::Sqrt:
        // Subgradient 0 at the cone tip keeps norm-style losses finite there.
        if (v[i] > 0.0) adj[nd.a] += g * 0.5 / v[i];
        break;
      case Op::Tanh:
        adj[nd.a] += g * (1.0 - v[i] * v[i]);
        break;
      case Op::Abs:
        if (v[nd.a] > 0.0)
          adj[nd.a] += g;
        else if (v[nd.a] < 0.0)
          adj[nd.a] -= g;
        break;
      case Op::Max:
        if (v[nd.a] > v[nd.b])
          adj[nd.a] += g;
        else if (v[nd.b] > v[nd.a])
          adj[nd.b] += g;
        else
          adj[std::min(nd.a, nd.b)] += g;
        break;
      case Op::Clamp:
        if (v[nd.a] > nd.k0 && v[nd.a] < nd.k1) adj[nd.a] += g;
        break;
      case Op::AddK:
        adj[nd.a] += g;
        break;
      case Op::MulK:
        adj[nd.a] += g * nd.k0;
        break;
      case Op::KSub:
        adj[nd.a] -= g;
        break;
      case Op::Dot:
        for (uint32_t q = 0; q < nd.n; ++q) {
          adj[nd.a + q] += g * v[nd.b + q];
          adj[nd.b + q] += g * v[nd.a + q];
        }
        break;
    }
  }
  GradVector grad(leaves_.size());
  for (size_t i = 0; i < leaves_.size(); ++i) grad[i] = adj[static_cast<size_t>(leaves_[i])];
  return grad;
}

double Tape::min_kink_margin(NodeId from) const {
  double m = std::numeric_limits<double>::infinity();
  const double* v = values_.data();
  for (size_t i = static_cast<size_t>(std::max<NodeId>(from, 0)); i < nodes_.size(); ++i) {
    const Node& nd = nodes_[i];
    switch (nd.op) {
      case Op::Max:
        m = std::min(m, std::abs(v[nd.a] - v[nd.b]));
        break;
      case Op::Abs:
        m = std::min(m, std::abs(v[nd.a]));
        break;
      case Op::Clamp:
        m = std::min(m, std::min(std::abs(v[nd.a] - nd.k0), std::abs(v[nd.a] - nd.k1)));
        break;
      case Op::Sqrt:
      case Op::Log:
        m = std::min(m, std::abs(v[nd.a]));
        break;
      case Op::Div:
        m = std::min(m, std::abs(v[nd.b]));
        break;
      default:
        break;
    }
  }
  for (double k : kinks_) m = std::min(m, k);
  return m;
}

Rev dotn(const Rev* a, const Rev* b, uint32_t n) {
  assert(n > 0);
  Tape* t = a[0].tape;
  for (uint32_t i = 1; i < n; ++i) {
    assert(a[i].id == a[0].id + static_cast<int32_t>(i) && "dotn: lhs ids must be contiguous");
    assert(b[i].id == b[0].id + static_cast<int32_t>(i) && "dotn: rhs ids must be contiguous");
  }
  return {t, t->record(Op::Dot, a[0].id, b[0].id, n)};
}

std::optional<double> finite_diff_check(const TapeFn& fn, std::span<const double> params,
                                        double h, double tie_margin) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: h must be positive");
  Tape tape;
  std::vector<Rev> leaves;
  leaves.reserve(params.size());
  for (double p : params) leaves.push_back(make_rev(tape, tape.leaf(p)));
  Rev out = fn(tape, leaves);
  if (tape.min_kink_margin() < tie_margin) return std::nullopt;

  GradVector analytic = tape.backward(out.id);
  double worst = 0.0;
  for (size_t i = 0; i < params.size(); ++i) {
    const double theta = params[i];
    tape.set_leaf(i, theta + h);
    tape.replay();
    const double fp = tape.value(out.id);
    tape.set_leaf(i, theta - h);
    tape.replay();
    const double fm = tape.value(out.id);
    tape.set_leaf(i, theta);
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  tape.replay();
  return worst;
}

}  // namespace dpf
