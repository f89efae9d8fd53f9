#pragma once

#include "xdomid/tensor.hpp"

namespace xdomid {

// Probabilities are clamped at this floor before any log.
constexpr double kProbFloor = 1e-12;

struct LossConfig {
  double lambda = 0.25;
  double alpha[2] = {0.5, 0.5};

  void validate() const;
};

// −Σ y·log(yhat). y must be one-hot; yhat a valid distribution.
TensorPtr cross_entropy(const TensorPtr& yhat, const TensorPtr& y);

// L_xID = −Σ y·log(ŷ_t ⊙ ŷ_t̂), evaluated as CE(ŷ_t, y) + CE(ŷ_t̂, y).
TensorPtr cross_domain_id_loss(const TensorPtr& yhat_t,
                               const TensorPtr& yhat_that, const TensorPtr& y);

// L_D = −⟨α, log d_t⟩ − ⟨α, log d_t̂⟩; with α uniform it is minimized when
// both detector outputs are uniform.
TensorPtr domain_invariance_loss(const TensorPtr& d_t, const TensorPtr& d_that,
                                 const double alpha[2]);

// (1−λ)·l_xid + λ·l_d
TensorPtr total_loss(const TensorPtr& l_xid, const TensorPtr& l_d,
                     double lambda);

// Σ‖t − t_pred‖² over all elements.
TensorPtr dpm_loss(const TensorPtr& t, const TensorPtr& t_pred);
// ‖f(v) − g(t)‖² summed over elements.
TensorPtr cpnn_loss(const TensorPtr& fv, const TensorPtr& gt);

}  // namespace xdomid
