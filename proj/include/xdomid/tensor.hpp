#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "xdomid/common.hpp"

namespace xdomid {

class Rng;
struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense n-dimensional array of f64, row-major, with an optional gradient
// buffer of the same shape. Shared pointers give graph nodes identity; the
// payload itself is value-semantic and freely copyable.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until ensure_grad()
  bool requires_grad = false;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }

  void ensure_grad();
  void zero_grad();
  bool all_finite() const;

  static TensorPtr zeros(std::vector<int> s, bool requires_grad = false);
  static TensorPtr full(std::vector<int> s, double v, bool requires_grad = false);
  static TensorPtr from(std::vector<int> s, std::vector<double> values,
                        bool requires_grad = false);
  static TensorPtr scalar(double v, bool requires_grad = false);
  static TensorPtr randn(std::vector<int> s, Rng& rng, double stddev,
                         bool requires_grad = false);
};

std::size_t shape_product(const std::vector<int>& s);
std::string shape_str(const std::vector<int>& s);

// Ordered record of executed differentiable operations. backward() replays
// the record in reverse and clears it.
class Tape {
 public:
  static Tape& active();

  bool enabled() const { return enabled_ && depth_off_ == 0; }
  void record(TensorPtr out, std::function<void()> back);
  void backward(const TensorPtr& loss);
  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    TensorPtr out;
    std::function<void()> back;
  };
  std::vector<Node> nodes_;
  bool enabled_ = true;
  int depth_off_ = 0;
  friend class NoGradGuard;
};

// Disables tape recording in scope; forward values are unaffected.
class NoGradGuard {
 public:
  NoGradGuard() { ++Tape::active().depth_off_; }
  ~NoGradGuard() { --Tape::active().depth_off_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

}  // namespace xdomid
