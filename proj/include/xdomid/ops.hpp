#pragma once

#include "xdomid/tensor.hpp"

namespace xdomid {

enum class Padding { Same, Valid };

// input H×W×Cin, kernel kh×kw×Cin×Cout -> Ho×Wo×Cout. Direct (loop) form;
// inputs at this scale never justify a transform-based path.
TensorPtr conv2d(const TensorPtr& input, const TensorPtr& kernel, int stride,
                 Padding padding);

// input n, weight n×m, bias m -> m
TensorPtr dense(const TensorPtr& input, const TensorPtr& weight,
                const TensorPtr& bias);

TensorPtr tanh_op(const TensorPtr& x);
TensorPtr relu(const TensorPtr& x);
// Normalizes along `axis`; outputs sum to 1 along that axis.
TensorPtr softmax(const TensorPtr& x, int axis);
// floor == 0 rejects non-positive input; floor > 0 clamps before the log
// (clamped entries get zero gradient).
TensorPtr log_op(const TensorPtr& x, double floor = 0.0);

TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& a, double s);
TensorPtr sum(const TensorPtr& a);   // -> scalar {1}
TensorPtr mean(const TensorPtr& a);  // -> scalar {1}
TensorPtr reshape(const TensorPtr& a, std::vector<int> shape);

// H×W×C with even H, W -> (H/2)×(W/2)×C, 2×2 windows, stride 2. Ties route
// the gradient to the first maximum in scan order.
TensorPtr max_pool2(const TensorPtr& x);
// H×W×C -> 1×1×C spatial mean.
TensorPtr global_avg_pool(const TensorPtr& x);

// Scalar-only entry point matching the module contract; delegates to the tape.
void backward(const TensorPtr& loss);

}  // namespace xdomid
