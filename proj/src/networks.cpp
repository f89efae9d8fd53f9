#include "xdomid/networks.hpp"

#include <cmath>

#include "xdomid/ops.hpp"

namespace xdomid {

std::string direction_name(Direction d) {
  return d == Direction::VisToThm ? "v_to_t" : "t_to_v";
}

Direction parse_direction(const std::string& s) {
  if (s == "v_to_t") return Direction::VisToThm;
  if (s == "t_to_v") return Direction::ThmToVis;
  fail("unknown direction '" + s + "' (expected v_to_t or t_to_v)");
}

void TrunkConfig::validate() const {
  XD_CHECK(!blocks.empty(), "trunk config: no blocks");
  XD_CHECK(depth >= 1 && depth <= static_cast<int>(blocks.size()),
           "trunk config: depth " + std::to_string(depth) +
               " outside 1.." + std::to_string(blocks.size()));
  XD_CHECK(input_size >= 1 && input_size % (1 << depth) == 0,
           "trunk config: input size " + std::to_string(input_size) +
               " not divisible by 2^" + std::to_string(depth));
}

namespace {

// Fan-in-scaled normal weights, zero biases.
TensorPtr conv_init(int kh, int kw, int cin, int cout, Rng& rng) {
  double stddev = std::sqrt(2.0 / (kh * kw * cin));
  return Tensor::randn({kh, kw, cin, cout}, rng, stddev);
}

}  // namespace

ParamSet init_trunk(const TrunkConfig& cfg, Rng& rng) {
  cfg.validate();
  ParamSet p;
  int cin = 1;
  for (int b = 0; b < cfg.depth; ++b) {
    int cout = cfg.blocks[b];
    std::string base = "b" + std::to_string(b + 1);
    p.add(base + ".c1.w", conv_init(3, 3, cin, cout, rng));
    p.add(base + ".c1.b", Tensor::zeros({1, 1, cout}));
    p.add(base + ".c2.w", conv_init(3, 3, cout, cout, rng));
    p.add(base + ".c2.b", Tensor::zeros({1, 1, cout}));
    cin = cout;
  }
  return p;
}

ParamSet init_compression(int in_channels, Rng& rng, int out_channels) {
  XD_CHECK(in_channels >= 1, "compression: bad channel count");
  int cout = out_channels > 0 ? out_channels
                              : static_cast<int>(std::lround(in_channels / 2.0));
  ParamSet p;
  p.add("w", conv_init(1, 1, in_channels, cout, rng));
  p.add("b", Tensor::zeros({1, 1, cout}));
  return p;
}

int compression_out_channels(const ParamSet& compression) {
  return compression.at("w").tensor->shape[3];
}

ParamSet init_rst(const RstConfig& cfg, Rng& rng) {
  XD_CHECK(cfg.channels >= 1 && cfg.hidden >= 1, "rst config: bad widths");
  ParamSet p;
  p.add("c1.w", conv_init(1, 1, cfg.channels, cfg.hidden, rng));
  p.add("c1.b", Tensor::zeros({1, 1, cfg.hidden}));
  p.add("c2.w", conv_init(1, 1, cfg.hidden, cfg.hidden, rng));
  p.add("c2.b", Tensor::zeros({1, 1, cfg.hidden}));
  // Zero final layer: F(u) = tanh(0) = 0, so RST starts as identity and the
  // pretrained features pass through unchanged at step 0.
  p.add("c3.w", Tensor::zeros({1, 1, cfg.hidden, cfg.channels}));
  p.add("c3.b", Tensor::zeros({1, 1, cfg.channels}));
  return p;
}

ParamSet init_head(int feature_len, int n_identities, Rng& rng) {
  XD_CHECK(feature_len >= 1 && n_identities >= 2,
           "head: need >= 2 identities and a non-empty feature vector");
  ParamSet p;
  double stddev = std::sqrt(1.0 / feature_len);
  p.add("w", Tensor::randn({feature_len, n_identities}, rng, stddev));
  p.add("b", Tensor::zeros({n_identities}));
  return p;
}

ParamSet init_detector(const DetectorConfig& cfg, Rng& rng) {
  ParamSet p;
  p.add("c1.w", conv_init(1, 1, cfg.channels, cfg.hidden, rng));
  p.add("c1.b", Tensor::zeros({1, 1, cfg.hidden}));
  double stddev = std::sqrt(1.0 / cfg.hidden);
  p.add("fc.w", Tensor::randn({cfg.hidden, 2}, rng, stddev));
  p.add("fc.b", Tensor::zeros({2}));
  return p;
}

ParamSet init_dpm(int channels, Rng& rng) {
  XD_CHECK(channels >= 1, "dpm: bad channel count");
  int hidden = 2 * channels;
  ParamSet p;
  p.add("c1.w", conv_init(1, 1, channels, hidden, rng));
  p.add("c1.b", Tensor::zeros({1, 1, hidden}));
  p.add("c2.w", conv_init(1, 1, hidden, hidden, rng));
  p.add("c2.b", Tensor::zeros({1, 1, hidden}));
  p.add("c3.w", conv_init(1, 1, hidden, channels, rng));
  p.add("c3.b", Tensor::zeros({1, 1, channels}));
  return p;
}

namespace {

// 1×1 bias add: the bias tensor is 1×1×C, broadcast over spatial positions.
TensorPtr bias_broadcast(const TensorPtr& x, const TensorPtr& bias) {
  XD_CHECK(x->rank() == 3 && bias->rank() == 3 && bias->shape[0] == 1 &&
               bias->shape[1] == 1 && bias->shape[2] == x->shape[2],
           "bias shape " + shape_str(bias->shape) + " incompatible with " +
               shape_str(x->shape));
  const int h = x->shape[0], w = x->shape[1], c = x->shape[2];
  auto out = std::make_shared<Tensor>(x->shape);
  out->requires_grad = x->requires_grad || bias->requires_grad;
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx)
      for (int ch = 0; ch < c; ++ch) {
        std::size_t idx = (static_cast<std::size_t>(y) * w + xx) * c + ch;
        out->data[idx] = x->data[idx] + bias->data[ch];
      }
  if (out->requires_grad && Tape::active().enabled()) {
    Tape::active().record(out, [x, bias, out, h, w, c] {
      if (x->requires_grad) {
        x->ensure_grad();
        for (std::size_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[i];
      }
      if (bias->requires_grad) {
        bias->ensure_grad();
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx)
            for (int ch = 0; ch < c; ++ch)
              bias->grad[ch] +=
                  out->grad[(static_cast<std::size_t>(y) * w + xx) * c + ch];
      }
    });
  }
  return out;
}

TensorPtr conv_block(const TensorPtr& x, const ParamSet& p,
                     const std::string& base) {
  auto y = conv2d(x, p.at(base + ".w").tensor, 1, Padding::Same);
  return bias_broadcast(y, p.at(base + ".b").tensor);
}

}  // namespace

TensorPtr trunk_forward(const TensorPtr& image, const ParamSet& params,
                        const TrunkConfig& cfg) {
  cfg.validate();
  XD_CHECK(image->rank() == 3 && image->shape[0] == cfg.input_size &&
               image->shape[1] == cfg.input_size && image->shape[2] == 1,
           "trunk: expected " + std::to_string(cfg.input_size) + "×" +
               std::to_string(cfg.input_size) + "×1 input, got " +
               shape_str(image->shape));
  TensorPtr x = image;
  for (int b = 1; b <= cfg.depth; ++b) {
    std::string base = "b" + std::to_string(b);
    x = relu(conv_block(x, params, base + ".c1"));
    x = relu(conv_block(x, params, base + ".c2"));
    x = max_pool2(x);
  }
  return x;
}

TensorPtr compress(const TensorPtr& features, const ParamSet& compression) {
  auto y = conv2d(features, compression.at("w").tensor, 1, Padding::Valid);
  return bias_broadcast(y, compression.at("b").tensor);
}

TensorPtr rst_forward(const TensorPtr& u, const ParamSet& rst) {
  const int c = rst.at("c1.w").tensor->shape[2];
  XD_CHECK(u->rank() == 3 && u->shape[2] == c,
           "rst: expected " + std::to_string(c) + " channels, got " +
               shape_str(u->shape));
  auto h1 = tanh_op(conv_block(u, rst, "c1"));
  auto h2 = tanh_op(conv_block(h1, rst, "c2"));
  auto f = tanh_op(conv_block(h2, rst, "c3"));
  return add(f, u);
}

TensorPtr classify_identity(const TensorPtr& features, const ParamSet& head) {
  const int n = head.at("w").tensor->shape[0];
  XD_CHECK(static_cast<int>(features->size()) == n,
           "classifier head expects " + std::to_string(n) +
               " features, got " + shape_str(features->shape));
  auto flat = reshape(features, {n});
  auto logits = dense(flat, head.at("w").tensor, head.at("b").tensor);
  return softmax(logits, 0);
}

TensorPtr domain_detect(const TensorPtr& features, const ParamSet& detector) {
  auto h = relu(bias_broadcast(
      conv2d(features, detector.at("c1.w").tensor, 1, Padding::Valid),
      detector.at("c1.b").tensor));
  auto pooled = global_avg_pool(h);
  auto flat = reshape(pooled, {pooled->shape[2]});
  auto logits = dense(flat, detector.at("fc.w").tensor, detector.at("fc.b").tensor);
  return softmax(logits, 0);
}

TensorPtr dpm_forward(const TensorPtr& features, const ParamSet& dpm) {
  const int c = dpm.at("c1.w").tensor->shape[2];
  XD_CHECK(features->rank() == 3 && features->shape[2] == c,
           "dpm: expected " + std::to_string(c) + " channels, got " +
               shape_str(features->shape));
  auto h1 = tanh_op(conv_block(features, dpm, "c1"));
  auto h2 = tanh_op(conv_block(h1, dpm, "c2"));
  return conv_block(h2, dpm, "c3");
}

std::pair<TensorPtr, TensorPtr> cpnn_forward(const TensorPtr& v_img,
                                             const TensorPtr& t_img,
                                             const ParamSet& params_f,
                                             const ParamSet& params_g,
                                             const TrunkConfig& cfg) {
  XD_CHECK(v_img->shape == t_img->shape,
           "cpnn: image shapes differ: " + shape_str(v_img->shape) + " vs " +
               shape_str(t_img->shape));
  return {trunk_forward(v_img, params_f, cfg), trunk_forward(t_img, params_g, cfg)};
}

TensorPtr patch_features(const TensorPtr& image, int patch_size, int stride) {
  XD_CHECK(image->rank() == 3 && image->shape[2] == 1,
           "patch_features: expected H×W×1 image, got " + shape_str(image->shape));
  XD_CHECK(stride >= 1, "patch_features: stride must be >= 1");
  const int h = image->shape[0], w = image->shape[1];
  XD_CHECK(patch_size >= 1 && patch_size <= h && patch_size <= w,
           "patch_features: patch size " + std::to_string(patch_size) +
               " exceeds image " + shape_str(image->shape));
  const int gh = (h - patch_size) / stride + 1;
  const int gw = (w - patch_size) / stride + 1;
  const int pc = patch_size * patch_size;
  auto out = Tensor::zeros({gh, gw, pc});
  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx)
      for (int py = 0; py < patch_size; ++py)
        for (int px = 0; px < patch_size; ++px) {
          std::size_t src =
              (static_cast<std::size_t>(gy * stride + py) * w + gx * stride + px);
          out->data[(static_cast<std::size_t>(gy) * gw + gx) * pc +
                    py * patch_size + px] = image->data[src];
        }
  return out;
}

ParamSet& ModelBundle::classifier_trunk() {
  return direction == Direction::VisToThm ? trunk_t : trunk_v;
}
ParamSet& ModelBundle::source_trunk() {
  return direction == Direction::VisToThm ? trunk_v : trunk_t;
}
const ParamSet& ModelBundle::classifier_trunk() const {
  return direction == Direction::VisToThm ? trunk_t : trunk_v;
}
const ParamSet& ModelBundle::source_trunk() const {
  return direction == Direction::VisToThm ? trunk_v : trunk_t;
}

ParamSet clone_params(const ParamSet& src) {
  ParamSet out;
  for (const auto& p : src.items()) {
    auto t = std::make_shared<Tensor>(*p.tensor);
    out.add(p.name, t, p.trainable);
  }
  return out;
}

}  // namespace xdomid
