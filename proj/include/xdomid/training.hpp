#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xdomid/losses.hpp"
#include "xdomid/networks.hpp"
#include "xdomid/optim.hpp"

namespace xdomid {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer;
  double lambda = 0.25;
  Direction direction = Direction::VisToThm;
  // Mapping (RST) update steps per batch; 0 freezes the RST at identity.
  int alternation = 1;
  int rst_hidden = 200;
  int detector_hidden = 16;
};

struct TrainReport {
  std::vector<double> l_xid, l_d, total, detector_ce;  // per epoch
  double wall_seconds = 0.0;
  std::uint64_t checksum = 0;

  void write(const std::string& path) const;  // key=value per line
};

// One preprocessed image ready for a trunk.
struct LabeledTensor {
  TensorPtr image;
  int label = 0;  // dense identity index, 0..K-1
  std::string domain;
};

// A subject-matched cross-domain pair: x in the classifier domain, xp in the
// source domain. Pixel co-registration is not assumed.
struct PairSample {
  TensorPtr x;
  TensorPtr xp;
  int label = 0;
};

struct PretrainResult {
  TrunkConfig trunk_cfg;
  ParamSet trunk;
  ParamSet compression;
  ParamSet head;
  int n_identities = 0;
  TrainReport report;
};

// Within-domain identity classifier: trunk -> shared compression -> head,
// trained with cross-entropy.
PretrainResult pretrain_trunk(const std::vector<LabeledTensor>& samples,
                              const TrunkConfig& trunk_cfg,
                              const TrainConfig& cfg);

// Alternating optimization. Per batch: (1) classifier-domain parameters
// (trunk + head, and the shared compression) step on the total loss;
// (2) the RST steps on the total loss with those frozen; (3) the domain
// detector steps on its own domain-classification cross-entropy.
ModelBundle train_adaptation(const std::vector<PairSample>& pairs,
                             PretrainResult pretrained, const TrainConfig& cfg,
                             TrainReport* report = nullptr);

// Regresses source-domain features onto target features with the trunks and
// compression frozen.
ParamSet train_dpm_baseline(const std::vector<PairSample>& pairs,
                            const PretrainResult& pretrained,
                            const TrainConfig& cfg,
                            TrainReport* report = nullptr);

}  // namespace xdomid
