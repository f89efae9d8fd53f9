#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "xdomid/networks.hpp"
#include "xdomid/synthdata.hpp"
#include "xdomid/training.hpp"

namespace xdomid {

// Maps a preprocessed image to a flattened, L2-normalized template. The flag
// selects the gallery (visible) or probe (thermal) side of the pipeline.
using Representer = std::function<std::vector<double>(const TensorPtr& image,
                                                      bool gallery_side)>;

// Scenario 1 (v_to_t): gallery images are mapped through the RST into
// thermal space at enrollment; probes use the plain thermal path.
// Scenario 2 (t_to_v): gallery stays in plain visible features and the RST
// is applied to probes at match time.
Representer bundle_representer(const ModelBundle& bundle);

struct Gallery {
  std::vector<int> subjects;  // ascending
  std::map<int, std::vector<std::vector<double>>> templates;
  std::size_t dim = 0;
};

struct GalleryImage {
  TensorPtr image;
  int subject = 0;
};

Gallery enroll(const std::vector<GalleryImage>& images, const Representer& rep);

// Subject score = max cosine similarity over that subject's templates,
// ordered like gallery.subjects.
std::vector<double> score(const TensorPtr& probe, const Gallery& gallery,
                          const Representer& rep);

struct ScoreMatrix {
  std::vector<int> gallery_subjects;          // ascending
  std::vector<int> probe_labels;              // true subject per probe
  std::vector<std::vector<double>> scores;    // probes × gallery subjects
};

ScoreMatrix score_all(const std::vector<GalleryImage>& probes,
                      const Gallery& gallery, const Representer& rep);

struct CMCResult {
  std::vector<double> rates;  // rank 1..gallery size
  int probe_count = 0;

  double rank(int k) const;  // 1-based
};

// Rank-k rate = fraction of probes whose true subject is among the top-k
// scores; ties break by ascending subject id.
CMCResult cmc(const ScoreMatrix& scores);

void write_cmc_csv(const std::string& path, const CMCResult& result);
void write_cmc_svg(const std::string& path, const CMCResult& result);

double cosine(const std::vector<double>& a, const std::vector<double>& b);

// Feature-map dims string "H×W×C" for a trunk truncated at cfg.depth.
std::string dims_string(const TrunkConfig& cfg);

// Align, band-pass filter, standardize, and tensorize one manifest image.
TensorPtr preprocess_record(const ManifestRecord& record, int crop,
                            double sigma1, double sigma2);

struct ProtocolConfig {
  int n_train_subjects = 30;
  int n_gallery_subjects = 30;
  int gallery_templates = 4;
  int crop = 64;
  double sigma1 = 1.0, sigma2 = 2.0;
  std::uint64_t split_seed = 1;
  Direction direction = Direction::VisToThm;
};

struct ProtocolData {
  std::vector<LabeledTensor> train_target;  // classifier-domain singles
  std::vector<PairSample> train_pairs;
  std::vector<GalleryImage> gallery, probes;
  std::vector<std::string> probe_conditions;  // parallel to probes
  int n_identities = 0;
};

// Splits the manifest, preprocesses every image once, densifies train labels,
// and pairs same-subject cross-domain images by index order.
ProtocolData build_protocol(const Manifest& manifest,
                            const ProtocolConfig& cfg);

double run_rank1(const ProtocolData& data, const Representer& rep);

struct AblateConfig {
  std::vector<int> depths{1, 2, 3, 4};
  std::vector<std::string> methods{"learned-compress", "pca-64",
                                   "global-avg-pool", "patch-baseline"};
  std::vector<double> lambdas{0.25};
  std::vector<int> blocks{32, 64, 128, 256};
  int crop = 64;
  int n_train_subjects = 30;
  int n_gallery_subjects = 30;
  int gallery_templates = 4;
  int pretrain_epochs = 10;
  int adapt_epochs = 10;
  int batch_size = 16;
  int pca_components = 64;
  int patch_size = 16;
  int patch_stride = 8;
  std::uint64_t seed = 1;
  double sigma1 = 1.0, sigma2 = 2.0;
  Direction direction = Direction::VisToThm;
};

struct AblateCell {
  std::string method;
  int depth = 0;        // 0 when not applicable (patch baseline)
  double lambda = 0.0;  // meaningful for learned-compress only
  std::string dims;     // feature map dims prior to compression
  double rank1 = 0.0;
  bool skipped = false;
  std::string note;
};

// Runs the feature/λ grid of the ablation harness on an already generated
// dataset manifest. Infeasible cells are marked skipped, not fatal.
std::vector<AblateCell> ablate(const Manifest& manifest, const AblateConfig& cfg);

void write_ablate_csv(const std::string& path, const std::vector<AblateCell>& cells);

}  // namespace xdomid
