#include "xdomid/losses.hpp"

#include <cmath>

#include "xdomid/ops.hpp"

namespace xdomid {

void LossConfig::validate() const {
  XD_CHECK(lambda >= 0.0 && lambda <= 1.0,
           "loss config: lambda must lie in [0,1], got " + std::to_string(lambda));
  XD_CHECK(alpha[0] >= 0.0 && alpha[1] >= 0.0 &&
               std::abs(alpha[0] + alpha[1] - 1.0) <= 1e-9,
           "loss config: alpha must be a distribution over two domains");
}

namespace {

void check_distribution(const TensorPtr& p, const char* what) {
  double total = 0.0;
  for (double v : p->data) {
    XD_CHECK(v >= -1e-12, std::string(what) + ": negative probability " +
                              std::to_string(v));
    total += v;
  }
  XD_CHECK(std::abs(total - 1.0) <= 1e-6,
           std::string(what) + ": probabilities sum to " + std::to_string(total));
}

void check_one_hot(const TensorPtr& y) {
  int ones = 0;
  for (double v : y->data) {
    XD_CHECK(v == 0.0 || v == 1.0, "label must be one-hot");
    if (v == 1.0) ++ones;
  }
  XD_CHECK(ones == 1, "label must contain exactly one 1");
}

}  // namespace

TensorPtr cross_entropy(const TensorPtr& yhat, const TensorPtr& y) {
  XD_CHECK(yhat->shape == y->shape,
           "cross_entropy: length mismatch " + shape_str(yhat->shape) + " vs " +
               shape_str(y->shape));
  check_distribution(yhat, "cross_entropy");
  check_one_hot(y);
  return scale(sum(mul(y, log_op(yhat, kProbFloor))), -1.0);
}

TensorPtr cross_domain_id_loss(const TensorPtr& yhat_t,
                               const TensorPtr& yhat_that, const TensorPtr& y) {
  return add(cross_entropy(yhat_t, y), cross_entropy(yhat_that, y));
}

TensorPtr domain_invariance_loss(const TensorPtr& d_t, const TensorPtr& d_that,
                                 const double alpha[2]) {
  XD_CHECK(d_t->size() == 2 && d_that->size() == 2,
           "domain_invariance_loss: detector outputs must have length 2");
  check_distribution(d_t, "domain_invariance_loss");
  check_distribution(d_that, "domain_invariance_loss");
  auto a = Tensor::from({2}, {alpha[0], alpha[1]});
  auto term = [&a](const TensorPtr& d) {
    return scale(sum(mul(a, log_op(d, kProbFloor))), -1.0);
  };
  return add(term(d_t), term(d_that));
}

TensorPtr total_loss(const TensorPtr& l_xid, const TensorPtr& l_d,
                     double lambda) {
  XD_CHECK(lambda >= 0.0 && lambda <= 1.0,
           "total_loss: lambda must lie in [0,1], got " + std::to_string(lambda));
  return add(scale(l_xid, 1.0 - lambda), scale(l_d, lambda));
}

TensorPtr dpm_loss(const TensorPtr& t, const TensorPtr& t_pred) {
  XD_CHECK(t->shape == t_pred->shape,
           "dpm_loss: shape mismatch " + shape_str(t->shape) + " vs " +
               shape_str(t_pred->shape));
  auto d = sub(t, t_pred);
  return sum(mul(d, d));
}

TensorPtr cpnn_loss(const TensorPtr& fv, const TensorPtr& gt) {
  XD_CHECK(fv->shape == gt->shape,
           "cpnn_loss: shape mismatch " + shape_str(fv->shape) + " vs " +
               shape_str(gt->shape));
  auto d = sub(fv, gt);
  return sum(mul(d, d));
}

}  // namespace xdomid
