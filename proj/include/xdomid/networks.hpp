#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xdomid/optim.hpp"
#include "xdomid/rng.hpp"
#include "xdomid/tensor.hpp"

namespace xdomid {

enum class Domain { Visible, Thermal, Mapped };
enum class Direction { VisToThm, ThmToVis };

std::string direction_name(Direction d);
Direction parse_direction(const std::string& s);

struct FeatureMap {
  TensorPtr tensor;  // H×W×C
  Domain domain = Domain::Visible;
  std::optional<int> subject;
};

// d blocks of [3×3 conv, relu, 3×3 conv, relu, 2×2 max-pool]; spatial extent
// halves per block, so input_size must be divisible by 2^depth.
struct TrunkConfig {
  std::vector<int> blocks{32, 64, 128, 256};
  int depth = 3;
  int input_size = 64;

  void validate() const;
  int out_spatial() const { return input_size >> depth; }
  int out_channels() const { return blocks[depth - 1]; }
};

struct RstConfig {
  int channels = 64;
  int hidden = 200;
};

struct DetectorConfig {
  int channels = 64;
  int hidden = 16;
};

ParamSet init_trunk(const TrunkConfig& cfg, Rng& rng);
// 1×1 linear convolution to round(C/2) channels (or `out_channels` if given).
ParamSet init_compression(int in_channels, Rng& rng, int out_channels = 0);
int compression_out_channels(const ParamSet& compression);
// Final layer zero-initialized: RST starts as the identity map.
ParamSet init_rst(const RstConfig& cfg, Rng& rng);
ParamSet init_head(int feature_len, int n_identities, Rng& rng);
ParamSet init_detector(const DetectorConfig& cfg, Rng& rng);
ParamSet init_dpm(int channels, Rng& rng);

TensorPtr trunk_forward(const TensorPtr& image, const ParamSet& params,
                        const TrunkConfig& cfg);
TensorPtr compress(const TensorPtr& features, const ParamSet& compression);
// RST(u) = F(u) + u, F = three tanh 1×1 convolutions of widths
// hidden, hidden, c.
TensorPtr rst_forward(const TensorPtr& u, const ParamSet& rst);
// flatten -> dense -> softmax over training identities.
TensorPtr classify_identity(const TensorPtr& features, const ParamSet& head);
// 1×1 conv (relu) -> global average pool -> dense(2) -> softmax:
// [P(vis|h), P(thm|h)].
TensorPtr domain_detect(const TensorPtr& features, const ParamSet& detector);
// Per-position 3-layer MLP (widths 2C, 2C, C; tanh hidden, linear output).
TensorPtr dpm_forward(const TensorPtr& features, const ParamSet& dpm);
// Two independent trunks with unshared weights.
std::pair<TensorPtr, TensorPtr> cpnn_forward(const TensorPtr& v_img,
                                             const TensorPtr& t_img,
                                             const ParamSet& params_f,
                                             const ParamSet& params_g,
                                             const TrunkConfig& cfg);
// Overlapping patches flattened per grid position -> gh×gw×(patch²).
TensorPtr patch_features(const TensorPtr& image, int patch_size, int stride);

// All named parameter groups of the framework. `compression` holds the same
// tensors referenced from both domain paths. The classifier-domain trunk is
// the trained one; the other stays a frozen copy of the pretrained weights.
struct ModelBundle {
  TrunkConfig trunk_cfg;
  ParamSet trunk_v;
  ParamSet trunk_t;
  ParamSet compression;
  ParamSet rst;
  ParamSet head;
  ParamSet detector;
  Direction direction = Direction::VisToThm;
  int n_identities = 0;

  // Trained (classifier-domain) trunk and the frozen source-domain trunk.
  ParamSet& classifier_trunk();
  ParamSet& source_trunk();
  const ParamSet& classifier_trunk() const;
  const ParamSet& source_trunk() const;
};

ParamSet clone_params(const ParamSet& src);

}  // namespace xdomid
