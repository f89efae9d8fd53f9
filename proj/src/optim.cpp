#include "xdomid/optim.hpp"

#include <cmath>
#include <cstring>

namespace xdomid {

Parameter& ParamSet::add(const std::string& name, TensorPtr t, bool trainable) {
  XD_CHECK(!index_.count(name), "duplicate parameter name: " + name);
  XD_CHECK(t != nullptr, "parameter " + name + " has no tensor");
  t->requires_grad = trainable;
  t->ensure_grad();
  index_[name] = params_.size();
  params_.push_back({name, std::move(t), trainable});
  return params_.back();
}

Parameter& ParamSet::at(const std::string& name) {
  auto it = index_.find(name);
  XD_CHECK(it != index_.end(), "unknown parameter: " + name);
  return params_[it->second];
}

const Parameter& ParamSet::at(const std::string& name) const {
  auto it = index_.find(name);
  XD_CHECK(it != index_.end(), "unknown parameter: " + name);
  return params_[it->second];
}

bool ParamSet::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p.tensor->zero_grad();
}

std::uint64_t ParamSet::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* bytes, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& p : params_) {
    mix(p.name.data(), p.name.size());
    mix(p.tensor->data.data(), p.tensor->data.size() * sizeof(double));
  }
  return h;
}

void ParamSet::adopt(const ParamSet& other, const std::string& prefix) {
  for (const auto& p : other.items()) add(prefix + p.name, p.tensor, p.trainable);
}

void Optimizer::step(ParamSet& params) {
  for (auto& p : params.items()) {
    if (!p.trainable) continue;
    Tensor& t = *p.tensor;
    XD_CHECK(t.grad.size() == t.data.size(),
             "optimizer: missing gradient on trainable parameter " + p.name);
    if (cfg_.kind == OptimizerConfig::Kind::GradientDescent) {
      for (std::size_t i = 0; i < t.data.size(); ++i)
        t.data[i] -= cfg_.lr * t.grad[i];
      continue;
    }
    Moments& mo = state_[p.name];
    if (mo.m.empty()) {
      mo.m.assign(t.data.size(), 0.0);
      mo.v.assign(t.data.size(), 0.0);
    }
    XD_CHECK(mo.m.size() == t.data.size(),
             "optimizer: parameter " + p.name + " changed size");
    ++mo.t;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(mo.t));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(mo.t));
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      double g = t.grad[i];
      mo.m[i] = cfg_.beta1 * mo.m[i] + (1.0 - cfg_.beta1) * g;
      mo.v[i] = cfg_.beta2 * mo.v[i] + (1.0 - cfg_.beta2) * g * g;
      double mhat = mo.m[i] / bc1;
      double vhat = mo.v[i] / bc2;
      t.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace xdomid
