#include "xdomid/ops.hpp"

#include <algorithm>
#include <cmath>

namespace xdomid {

namespace {

TensorPtr make_out(std::vector<int> shape, bool requires_grad) {
  auto t = std::make_shared<Tensor>(std::move(shape));
  t->requires_grad = requires_grad;
  return t;
}

bool track(const TensorPtr& t) { return t->requires_grad; }

void check_same_shape(const TensorPtr& a, const TensorPtr& b,
                      const char* what) {
  XD_CHECK(a->shape == b->shape, std::string(what) + ": shape mismatch " +
                                     shape_str(a->shape) + " vs " +
                                     shape_str(b->shape));
}

}  // namespace

TensorPtr conv2d(const TensorPtr& input, const TensorPtr& kernel, int stride,
                 Padding padding) {
  XD_CHECK(input->rank() == 3, "conv2d: input must be H×W×C, got shape " +
                                   shape_str(input->shape));
  XD_CHECK(kernel->rank() == 4,
           "conv2d: kernel must be kh×kw×Cin×Cout, got shape " +
               shape_str(kernel->shape));
  XD_CHECK(stride >= 1, "conv2d: stride must be >= 1");
  const int h = input->shape[0], w = input->shape[1], cin = input->shape[2];
  const int kh = kernel->shape[0], kw = kernel->shape[1];
  const int kcin = kernel->shape[2], cout = kernel->shape[3];
  XD_CHECK(kcin == cin, "conv2d: kernel expects " + std::to_string(kcin) +
                            " input channels, input has " +
                            std::to_string(cin) + " (input " +
                            shape_str(input->shape) + ", kernel " +
                            shape_str(kernel->shape) + ")");

  int pad_top = 0, pad_left = 0, oh, ow;
  if (padding == Padding::Same) {
    oh = (h + stride - 1) / stride;
    ow = (w + stride - 1) / stride;
    int pad_h = std::max(0, (oh - 1) * stride + kh - h);
    int pad_w = std::max(0, (ow - 1) * stride + kw - w);
    pad_top = pad_h / 2;
    pad_left = pad_w / 2;
  } else {
    XD_CHECK(kh <= h && kw <= w,
             "conv2d: kernel " + shape_str(kernel->shape) +
                 " larger than input " + shape_str(input->shape));
    oh = (h - kh) / stride + 1;
    ow = (w - kw) / stride + 1;
  }

  bool rg = track(input) || track(kernel);
  auto out = make_out({oh, ow, cout}, rg);
  const double* in = input->data.data();
  const double* k = kernel->data.data();
  double* o = out->data.data();

  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double* op = o + (static_cast<std::size_t>(oy) * ow + ox) * cout;
      for (int ky = 0; ky < kh; ++ky) {
        int iy = oy * stride + ky - pad_top;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          int ix = ox * stride + kx - pad_left;
          if (ix < 0 || ix >= w) continue;
          const double* ip = in + (static_cast<std::size_t>(iy) * w + ix) * cin;
          const double* kp = k + ((static_cast<std::size_t>(ky) * kw + kx) * cin) * cout;
          for (int ci = 0; ci < cin; ++ci) {
            double iv = ip[ci];
            const double* kc = kp + static_cast<std::size_t>(ci) * cout;
            for (int co = 0; co < cout; ++co) op[co] += iv * kc[co];
          }
        }
      }
    }
  }

  if (rg && Tape::active().enabled()) {
    Tape::active().record(out, [input, kernel, out, stride, pad_top, pad_left] {
      const int h = input->shape[0], w = input->shape[1], cin = input->shape[2];
      const int kh = kernel->shape[0], kw = kernel->shape[1];
      const int cout = kernel->shape[3];
      const int oh = out->shape[0], ow = out->shape[1];
      const double* og = out->grad.data();
      bool gi = input->requires_grad, gk = kernel->requires_grad;
      if (gi) input->ensure_grad();
      if (gk) kernel->ensure_grad();
      const double* in = input->data.data();
      const double* k = kernel->data.data();
      double* ig = gi ? input->grad.data() : nullptr;
      double* kg = gk ? kernel->grad.data() : nullptr;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const double* ogp = og + (static_cast<std::size_t>(oy) * ow + ox) * cout;
          for (int ky = 0; ky < kh; ++ky) {
            int iy = oy * stride + ky - pad_top;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              int ix = ox * stride + kx - pad_left;
              if (ix < 0 || ix >= w) continue;
              std::size_t ibase = (static_cast<std::size_t>(iy) * w + ix) * cin;
              std::size_t kbase = (static_cast<std::size_t>(ky) * kw + kx) * cin * cout;
              for (int ci = 0; ci < cin; ++ci) {
                const double* kc = k + kbase + static_cast<std::size_t>(ci) * cout;
                double acc = 0.0;
                if (gk) {
                  double iv = in[ibase + ci];
                  double* kgc = kg + kbase + static_cast<std::size_t>(ci) * cout;
                  if (gi) {
                    for (int co = 0; co < cout; ++co) {
                      kgc[co] += iv * ogp[co];
                      acc += kc[co] * ogp[co];
                    }
                  } else {
                    for (int co = 0; co < cout; ++co) kgc[co] += iv * ogp[co];
                  }
                } else {
                  for (int co = 0; co < cout; ++co) acc += kc[co] * ogp[co];
                }
                if (gi) ig[ibase + ci] += acc;
              }
            }
          }
        }
      }
    });
  }
  return out;
}

TensorPtr dense(const TensorPtr& input, const TensorPtr& weight,
                const TensorPtr& bias) {
  XD_CHECK(input->rank() == 1, "dense: input must be rank-1, got shape " +
                                   shape_str(input->shape));
  XD_CHECK(weight->rank() == 2, "dense: weight must be n×m, got shape " +
                                    shape_str(weight->shape));
  const int n = input->shape[0], m = weight->shape[1];
  XD_CHECK(weight->shape[0] == n,
           "dense: input extent " + std::to_string(n) +
               " does not match weight " + shape_str(weight->shape));
  XD_CHECK(bias->rank() == 1 && bias->shape[0] == m,
           "dense: bias shape " + shape_str(bias->shape) + " must be [" +
               std::to_string(m) + "]");

  bool rg = track(input) || track(weight) || track(bias);
  auto out = make_out({m}, rg);
  for (int j = 0; j < m; ++j) out->data[j] = bias->data[j];
  for (int i = 0; i < n; ++i) {
    double iv = input->data[i];
    const double* wr = weight->data.data() + static_cast<std::size_t>(i) * m;
    for (int j = 0; j < m; ++j) out->data[j] += iv * wr[j];
  }

  if (rg && Tape::active().enabled()) {
    Tape::active().record(out, [input, weight, bias, out, n, m] {
      const double* og = out->grad.data();
      if (bias->requires_grad) {
        bias->ensure_grad();
        for (int j = 0; j < m; ++j) bias->grad[j] += og[j];
      }
      if (weight->requires_grad) {
        weight->ensure_grad();
        for (int i = 0; i < n; ++i) {
          double iv = input->data[i];
          double* wg = weight->grad.data() + static_cast<std::size_t>(i) * m;
          for (int j = 0; j < m; ++j) wg[j] += iv * og[j];
        }
      }
      if (input->requires_grad) {
        input->ensure_grad();
        for (int i = 0; i < n; ++i) {
          const double* wr = weight->data.data() + static_cast<std::size_t>(i) * m;
          double acc = 0.0;
          for (int j = 0; j < m; ++j) acc += wr[j] * og[j];
          input->grad[i] += acc;
        }
      }
    });
  }
  return out;
}

TensorPtr tanh_op(const TensorPtr& x) {
  auto out = make_out(x->shape, track(x));
  for (std::size_t i = 0; i < x->size(); ++i) out->data[i] = std::tanh(x->data[i]);
  if (out->requires_grad && Tape::active().enabled()) {
    Tape::active().record(out, [x, out] {
      x->ensure_grad();
      for (std::size_t i = 0; i < x->size(); ++i) {
        double t = out->data[i];
        x->grad[i] += (1.0 - t * t) * out->grad[i];
      }
    });
  }
  return out;
}

TensorPtr relu(const TensorPtr& x) {
  auto out = make_out(x->shape, track(x));
  for (std::size_t i = 0; i < x->size(); ++i)
    out->data[i] = x->data[i] > 0.0 ? x->data[i] : 0.0;
  if (out->requires_grad && Tape::active().enabled()) {
    Tape::active().record(out, [x, out] {
      x->ensure_grad();
      for (std::size_t i = 0; i < x->size(); ++i)
        if (x->data[i] > 0.0) x->grad[i] += out->grad[i];
    });
  }
  return out;
}

TensorPtr softmax(const TensorPtr& x, int axis) {
  XD_CHECK(axis >= 0 && axis < x->rank(),
           "softmax: axis " + std::to_string(axis) + " out of range for shape " +
               shape_str(x->shape));
  const int n = x->shape[axis];
  std::size_t inner = 1, outer = 1;
  for (int i = axis + 1; i < x->rank(); ++i) inner *= x->shape[i];
  for (int i = 0; i < axis; ++i) outer *= x->shape[i];

  auto out = make_out(x->shape, track(x));
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      std::size_t base = o * n * inner + in;
      double mx = x->data[base];
      for (int k = 1; k < n; ++k) mx = std::max(mx, x->data[base + k * inner]);
      double z = 0.0;
      for (int k = 0; k < n; ++k) {
        double e = std::exp(x->data[base + k * inner] - mx);
        out->data[base + k * inner] = e;
        z += e;
      }
      for (int k = 0; k < n; ++k) out->data[base + k * inner] /= z;
    }
  }

  if (out->requires_grad && Tape::active().enabled()) {
    Tape::active().record(out, [x, out, n, inner, outer] {
      x->ensure_grad();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          std::size_t base = o * n * inner + in;
          double dot = 0.0;
          for (int k = 0; k < n; ++k)
            dot += out->grad[base + k * inner] * out->data[base + k * inner];
          for (int k = 0; k < n; ++k) {
            std::size_t idx = base + k * inner;
            x->grad[idx] += out->data[idx] * (out->grad[idx] - dot);
          }
        }
      }
    });
  }
  return out;
}

TensorPtr log_op(const TensorPtr& x, double floor) {
  auto out = make_out(x->shape, track(x));
  for (std::size_t i = 0; i < x->size(); ++i) {
    double v = x->data[i];
    if (floor > 0.0) {
      v = std::max(v, floor);
    } else {
      XD_CHECK(v > 0.0, "log: non-positive input " + std::to_string(v) +
                            " at index " + std::to_string(i));
    }
    out->data[i] = std::log(v);
  }
  if (out->requires_grad && Tape::active().enabled()) {
    Tape::active().record(out, [x, out, floor] {
      x->ensure_grad();
      for (std::size_t i = 0; i < x->size(); ++i) {
        if (floor > 0.0 && x->data[i] < floor) continue;  // clamped: flat
        x->grad[i] += out->grad[i] / x->data[i];
      }
    });
  }
  return out;
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "add");
  auto out = make_out(a->shape, track(a) || track(b));
  for (std::size_t i = 0; i < a->size(); ++i)
    out->data[i] = a->data[i] + b->data[i];
  if (out->requires_grad && Tape::active().enabled()) {
    Tape::active().record(out, [a, b, out] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < b->size(); ++i) b->grad[i] += out->grad[i];
      }
    });
  }
  return out;
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "sub");
  auto out = make_out(a->shape, track(a) || track(b));
  for (std::size_t i = 0; i < a->size(); ++i)
    out->data[i] = a->data[i] - b->data[i];
  if (out->requires_grad && Tape::active().enabled()) {
    Tape::active().record(out, [a, b, out] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < b->size(); ++i) b->grad[i] -= out->grad[i];
      }
    });
  }
  return out;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "mul");
  auto out = make_out(a->shape, track(a) || track(b));
  for (std::size_t i = 0; i < a->size(); ++i)
    out->data[i] = a->data[i] * b->data[i];
  if (out->requires_grad && Tape::active().enabled()) {
    Tape::active().record(out, [a, b, out] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < a->size(); ++i)
          a->grad[i] += b->data[i] * out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < b->size(); ++i)
          b->grad[i] += a->data[i] * out->grad[i];
      }
    });
  }
  return out;
}

TensorPtr scale(const TensorPtr& a, double s) {
  auto out = make_out(a->shape, track(a));
  for (std::size_t i = 0; i < a->size(); ++i) out->data[i] = a->data[i] * s;
  if (out->requires_grad && Tape::active().enabled()) {
    Tape::active().record(out, [a, out, s] {
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += s * out->grad[i];
    });
  }
  return out;
}

TensorPtr sum(const TensorPtr& a) {
  auto out = make_out({1}, track(a));
  double acc = 0.0;
  for (double v : a->data) acc += v;
  out->data[0] = acc;
  if (out->requires_grad && Tape::active().enabled()) {
    Tape::active().record(out, [a, out] {
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[0];
    });
  }
  return out;
}

TensorPtr mean(const TensorPtr& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a->size()));
}

TensorPtr reshape(const TensorPtr& a, std::vector<int> shape) {
  XD_CHECK(shape_product(shape) == a->size(),
           "reshape: cannot view " + shape_str(a->shape) + " as " +
               shape_str(shape));
  auto out = make_out(shape, track(a));
  out->data = a->data;
  if (out->requires_grad && Tape::active().enabled()) {
    Tape::active().record(out, [a, out] {
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
    });
  }
  return out;
}

TensorPtr max_pool2(const TensorPtr& x) {
  XD_CHECK(x->rank() == 3, "max_pool2: input must be H×W×C, got " +
                               shape_str(x->shape));
  const int h = x->shape[0], w = x->shape[1], c = x->shape[2];
  XD_CHECK(h % 2 == 0 && w % 2 == 0,
           "max_pool2: extents must be even, got " + shape_str(x->shape));
  const int oh = h / 2, ow = w / 2;
  auto out = make_out({oh, ow, c}, track(x));
  auto argmax = std::make_shared<std::vector<std::size_t>>(out->size());
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int ch = 0; ch < c; ++ch) {
        double best = -1e300;
        std::size_t best_idx = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            std::size_t idx =
                (static_cast<std::size_t>(oy * 2 + dy) * w + (ox * 2 + dx)) * c + ch;
            if (x->data[idx] > best) {
              best = x->data[idx];
              best_idx = idx;
            }
          }
        }
        std::size_t oidx = (static_cast<std::size_t>(oy) * ow + ox) * c + ch;
        out->data[oidx] = best;
        (*argmax)[oidx] = best_idx;
      }
    }
  }
  if (out->requires_grad && Tape::active().enabled()) {
    Tape::active().record(out, [x, out, argmax] {
      x->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i)
        x->grad[(*argmax)[i]] += out->grad[i];
    });
  }
  return out;
}

TensorPtr global_avg_pool(const TensorPtr& x) {
  XD_CHECK(x->rank() == 3, "global_avg_pool: input must be H×W×C, got " +
                               shape_str(x->shape));
  const int h = x->shape[0], w = x->shape[1], c = x->shape[2];
  auto out = make_out({1, 1, c}, track(x));
  const double inv = 1.0 / (static_cast<double>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx)
      for (int ch = 0; ch < c; ++ch)
        out->data[ch] += x->data[(static_cast<std::size_t>(y) * w + xx) * c + ch];
  for (int ch = 0; ch < c; ++ch) out->data[ch] *= inv;
  if (out->requires_grad && Tape::active().enabled()) {
    Tape::active().record(out, [x, out, h, w, c, inv] {
      x->ensure_grad();
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
          for (int ch = 0; ch < c; ++ch)
            x->grad[(static_cast<std::size_t>(y) * w + xx) * c + ch] +=
                out->grad[ch] * inv;
    });
  }
  return out;
}

void backward(const TensorPtr& loss) { Tape::active().backward(loss); }

}  // namespace xdomid
