#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dafa/error.hpp"

namespace dafa {

namespace detail {

struct TensorNode {
  std::vector<int> shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until first backward flush
  std::vector<double> adj;   // transient adjoint, owned by Tape::backward

  std::size_t size() const { return values.size(); }
};

}  // namespace detail

// Dense row-major tensor of doubles. Cheap handle semantics: copies share the
// underlying storage; clone() makes an independent deep copy.
class Tensor {
public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node().shape; }
  int rank() const { return static_cast<int>(node().shape.size()); }
  std::size_t size() const { return node().values.size(); }
  bool is_scalar() const { return defined() && node().values.size() == 1; }

  // 2-D accessors; throw DimensionError when the rank does not match.
  int rows() const;
  int cols() const;
  // Length of a rank-1 tensor.
  int dim() const;

  double value() const;  // scalar extraction
  double at(int i) const;
  double at(int i, int j) const;

  std::span<const double> data() const { return node().values; }
  std::span<double> mutable_data() { return node().values; }

  bool requires_grad() const { return defined() && node().requires_grad; }
  // Gradient contents; empty span when no backward pass has reached this
  // tensor yet.
  std::span<const double> grad() const;
  bool has_grad() const { return defined() && !node().grad.empty(); }
  void zero_grad();

  // Deep copy with no gradient history.
  Tensor clone(bool requires_grad = false) const;
  // Same values, requires_grad off; used to cut teacher logits out of the
  // gradient path.
  Tensor detach() const { return clone(false); }

  std::shared_ptr<detail::TensorNode> node_ptr() const { return node_; }

private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}
  detail::TensorNode& node() const;

  std::shared_ptr<detail::TensorNode> node_;

  friend class Tape;
  friend Tensor make_tensor(std::vector<int>, std::vector<double>, bool);
};

Tensor make_tensor(std::vector<int> shape, std::vector<double> values,
                   bool requires_grad);

// Wengert list. Records one entry per primitive operation in execution
// order; backward replays it once in reverse, which is a reverse topological
// order of the recorded graph. Single-threaded by contract; independent tapes
// may run concurrently.
class Tape {
public:
  struct Entry {
    std::shared_ptr<detail::TensorNode> out;
    std::vector<std::shared_ptr<detail::TensorNode>> inputs;
    std::function<void()> pull;  // adds d(out) contributions into input adj
  };

  void record(Entry e) { entries_.push_back(std::move(e)); }
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  // Seeds d(loss)/d(loss) = 1 and accumulates d(loss)/d(t) into t.grad for
  // every reachable requires_grad tensor. Repeated calls accumulate until
  // zero_grad. Deterministic: identical tapes produce bit-identical grads.
  void backward(const Tensor& loss);

private:
  std::vector<Entry> entries_;
};

namespace detail {
// adj += contribution helpers used by op backward closures.
void ensure_adj(TensorNode& n);
}  // namespace detail

}  // namespace dafa
