#pragma once

#include <map>
#include <string>
#include <vector>

#include "xdomid/tensor.hpp"

namespace xdomid {

struct Parameter {
  std::string name;
  TensorPtr tensor;
  bool trainable = true;
};

// Insertion-ordered, name-unique parameter collection. Iteration order is
// the registration order, so optimizer updates are deterministic.
class ParamSet {
 public:
  Parameter& add(const std::string& name, TensorPtr t, bool trainable = true);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Parameter>& items() { return params_; }
  const std::vector<Parameter>& items() const { return params_; }
  std::size_t size() const { return params_.size(); }

  void zero_grad();
  // FNV-1a over parameter names and payload bytes, registration order.
  std::uint64_t checksum() const;
  // Appends every parameter of `other` under `prefix` + its name, sharing
  // the underlying tensors.
  void adopt(const ParamSet& other, const std::string& prefix);

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

struct OptimizerConfig {
  enum class Kind { GradientDescent, Adam };
  Kind kind = Kind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Keeps first/second-moment state per parameter name; a given set of
// parameters should be stepped by one optimizer instance throughout.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}
  void step(ParamSet& params);
  const OptimizerConfig& config() const { return cfg_; }

 private:
  struct Moments {
    std::vector<double> m, v;
    long t = 0;
  };
  OptimizerConfig cfg_;
  std::map<std::string, Moments> state_;
};

}  // namespace xdomid
