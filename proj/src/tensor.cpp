#include "xdomid/tensor.hpp"

#include <cmath>

#include "xdomid/rng.hpp"

namespace xdomid {

std::size_t shape_product(const std::vector<int>& s) {
  std::size_t n = 1;
  for (int e : s) {
    XD_CHECK(e > 0, "tensor extent must be positive, got " + std::to_string(e));
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

Tensor::Tensor(std::vector<int> s, double fill)
    : shape(std::move(s)), data(shape_product(shape), fill) {}

void Tensor::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() { grad.assign(data.size(), 0.0); }

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

TensorPtr Tensor::zeros(std::vector<int> s, bool requires_grad) {
  auto t = std::make_shared<Tensor>(std::move(s));
  t->requires_grad = requires_grad;
  if (requires_grad) t->ensure_grad();
  return t;
}

TensorPtr Tensor::full(std::vector<int> s, double v, bool requires_grad) {
  auto t = std::make_shared<Tensor>(std::move(s), v);
  t->requires_grad = requires_grad;
  if (requires_grad) t->ensure_grad();
  return t;
}

TensorPtr Tensor::from(std::vector<int> s, std::vector<double> values,
                       bool requires_grad) {
  auto t = std::make_shared<Tensor>(std::move(s));
  XD_CHECK(values.size() == t->data.size(),
           "value count " + std::to_string(values.size()) +
               " does not fill shape " + shape_str(t->shape));
  t->data = std::move(values);
  t->requires_grad = requires_grad;
  if (requires_grad) t->ensure_grad();
  return t;
}

TensorPtr Tensor::scalar(double v, bool requires_grad) {
  return from({1}, {v}, requires_grad);
}

TensorPtr Tensor::randn(std::vector<int> s, Rng& rng, double stddev,
                        bool requires_grad) {
  auto t = zeros(std::move(s), requires_grad);
  for (double& v : t->data) v = rng.normal() * stddev;
  return t;
}

Tape& Tape::active() {
  thread_local Tape tape;
  return tape;
}

void Tape::record(TensorPtr out, std::function<void()> back) {
  if (!enabled()) return;
  nodes_.push_back({std::move(out), std::move(back)});
}

void Tape::backward(const TensorPtr& loss) {
  XD_CHECK(loss && loss->size() == 1,
           "backward requires a scalar loss, got shape " +
               (loss ? shape_str(loss->shape) : std::string("null")));
  loss->ensure_grad();
  loss->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->out->grad.empty()) it->back();
  }
  clear();
}

void Tape::clear() { nodes_.clear(); }

}  // namespace xdomid
