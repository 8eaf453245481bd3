#include "dafa/tensor.hpp"

#include <numeric>

#include "dafa/kernels.hpp"

namespace dafa {

namespace {

std::size_t shape_product(const std::vector<int>& shape) {
  std::size_t p = 1;
  for (int d : shape) {
    if (d <= 0) throw DimensionError("tensor dimensions must be positive");
    p *= static_cast<std::size_t>(d);
  }
  return p;
}

}  // namespace

detail::TensorNode& Tensor::node() const {
  if (!node_) throw ContractError("operation on an undefined tensor");
  return *node_;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  const std::size_t n = shape_product(shape);
  return make_tensor(std::move(shape), std::vector<double>(n, 0.0),
                     requires_grad);
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values,
                    bool requires_grad) {
  if (shape_product(shape) != values.size())
    throw DimensionError("value count " + std::to_string(values.size()) +
                         " does not match shape product");
  return make_tensor(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return make_tensor({1}, {v}, requires_grad);
}

Tensor make_tensor(std::vector<int> shape, std::vector<double> values,
                   bool requires_grad) {
  auto n = std::make_shared<detail::TensorNode>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

int Tensor::rows() const {
  if (rank() != 2) throw DimensionError("expected a rank-2 tensor");
  return shape()[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw DimensionError("expected a rank-2 tensor");
  return shape()[1];
}

int Tensor::dim() const {
  if (rank() != 1) throw DimensionError("expected a rank-1 tensor");
  return shape()[0];
}

double Tensor::value() const {
  if (!is_scalar()) throw ContractError("value() requires a scalar tensor");
  return node().values[0];
}

double Tensor::at(int i) const {
  return node().values.at(static_cast<std::size_t>(i));
}

double Tensor::at(int i, int j) const {
  const int c = cols();
  return node().values.at(static_cast<std::size_t>(i) * c + j);
}

std::span<const double> Tensor::grad() const {
  if (!defined()) throw ContractError("grad() on an undefined tensor");
  return node().grad;
}

void Tensor::zero_grad() {
  auto& g = node().grad;
  std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::clone(bool requires_grad) const {
  return make_tensor(node().shape, node().values, requires_grad);
}

namespace detail {
void ensure_adj(TensorNode& n) {
  if (n.adj.empty()) n.adj.assign(n.values.size(), 0.0);
}
}  // namespace detail

void Tape::backward(const Tensor& loss) {
  if (!loss.is_scalar())
    throw ContractError("backward requires a scalar loss tensor");
  if (!loss.requires_grad())
    throw ContractError(
        "loss is not connected to any gradient-tracked tensor");

  auto loss_node = loss.node_ptr();
  detail::ensure_adj(*loss_node);
  loss_node->adj[0] = 1.0;

  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (!it->out->adj.empty()) it->pull();
  }

  auto flush = [](detail::TensorNode& n) {
    if (n.adj.empty()) return;
    if (n.requires_grad) {
      if (n.grad.empty()) n.grad.assign(n.values.size(), 0.0);
      kernels::add(n.grad.data(), n.adj.data(), n.grad.data(),
                   static_cast<std::ptrdiff_t>(n.grad.size()));
    }
    n.adj.clear();
  };

  flush(*loss_node);
  for (auto& e : entries_) {
    flush(*e.out);
    for (auto& in : e.inputs) flush(*in);
  }
}

}  // namespace dafa
