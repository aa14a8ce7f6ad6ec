#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "mmdg/error.hpp"
#include "mmdg/tensor.hpp"

namespace mmdg {

template <typename S>
class TapeT;

/// Handle to one node on a tape. Cheap to copy; owns nothing.
template <typename S>
struct VarT {
    TapeT<S>* tape = nullptr;
    int id = -1;

    const TensorT<S>& value() const { return tape->value(id); }
    const TensorT<S>& grad() const { return tape->grad(id); }
};

/// Reverse-mode tape. Records one node per operation output; creation order
/// is a topological order, so replaying backward rules in reverse yields
/// gradients for every node reachable from the loss. Gradients start at zero
/// on a fresh tape and accumulate additively (fan-out sums).
///
/// A tape has exactly one writer; read-only access to values is safe from
/// any thread once recording stops.
template <typename S>
class TapeT {
  public:
    using BackwardFn = std::function<void(TapeT&)>;

    /// New differentiable input (parameter or data the caller wants gradients for).
    VarT<S> leaf(TensorT<S> value) { return record(std::move(value), nullptr); }

    /// Used by ops: stores the forward value plus the rule that scatters this
    /// node's gradient into its inputs' gradients.
    VarT<S> record(TensorT<S> value, BackwardFn backward) {
        Node n;
        n.grad = TensorT<S>(value.shape());
        n.value = std::move(value);
        n.backward = std::move(backward);
        nodes_.push_back(std::move(n));
        return VarT<S>{this, static_cast<int>(nodes_.size()) - 1};
    }

    /// Seeds d(loss)/d(loss) = 1 and replays all recorded rules in reverse.
    /// The loss node must be scalar.
    void backward(VarT<S> loss) {
        if (loss.tape != this) throw ShapeError("backward: var belongs to a different tape");
        if (nodes_[loss.id].value.size() != 1)
            throw ShapeError("backward: loss must be scalar, has shape " + nodes_[loss.id].value.shape_str());
        nodes_[loss.id].grad[0] = S(1);
        for (int i = loss.id; i >= 0; --i) {
            if (nodes_[i].backward) nodes_[i].backward(*this);
        }
    }

    const TensorT<S>& value(int id) const { return nodes_[id].value; }
    const TensorT<S>& grad(int id) const { return nodes_[id].grad; }
    TensorT<S>& grad_mut(int id) { return nodes_[id].grad; }

    size_t size() const { return nodes_.size(); }

    bool all_finite() const {
        for (const auto& n : nodes_)
            for (S v : n.value.values())
                if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

  private:
    struct Node {
        TensorT<S> value;
        TensorT<S> grad;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
};

using Tape = TapeT<float>;
using Tape64 = TapeT<double>;
using Var = VarT<float>;
using Var64 = VarT<double>;

}  // namespace mmdg
