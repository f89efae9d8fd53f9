#include "xdomid/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "xdomid/imageproc.hpp"
#include "xdomid/ops.hpp"
#include "xdomid/pca.hpp"
#include "xdomid/synthdata.hpp"
#include "xdomid/tensor_io.hpp"
#include "xdomid/training.hpp"

namespace xdomid {

namespace {

std::vector<double> l2_normalized(const std::vector<double>& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  std::vector<double> out(v.size());
  double inv = norm > 0.0 ? 1.0 / norm : 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv;
  return out;
}

}  // namespace

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  XD_CHECK(a.size() == b.size(), "cosine: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

Representer bundle_representer(const ModelBundle& bundle) {
  // Copy of the parameter sets keeps the representer valid independently of
  // the bundle's lifetime. Tensors are shared, not copied.
  auto b = std::make_shared<ModelBundle>(bundle);
  return [b](const TensorPtr& image, bool gallery_side) {
    NoGradGuard ng;
    // Gallery images are visible, probes thermal. The source-domain trunk
    // feeds the RST; the classifier-domain trunk is used as-is.
    bool mapped_side = (b->direction == Direction::VisToThm) == gallery_side;
    TensorPtr feat;
    if (mapped_side) {
      feat = rst_forward(
          compress(trunk_forward(image, b->source_trunk(), b->trunk_cfg),
                   b->compression),
          b->rst);
    } else {
      feat = compress(trunk_forward(image, b->classifier_trunk(), b->trunk_cfg),
                      b->compression);
    }
    return l2_normalized(feat->data);
  };
}

Gallery enroll(const std::vector<GalleryImage>& images, const Representer& rep) {
  XD_CHECK(!images.empty(), "enroll: empty gallery");
  Gallery g;
  std::vector<std::vector<double>> reps(images.size());
  parallel_for(images.size(),
               [&](std::size_t i) { reps[i] = rep(images[i].image, true); });
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (g.dim == 0) g.dim = reps[i].size();
    XD_CHECK(reps[i].size() == g.dim, "enroll: inconsistent template lengths");
    g.templates[images[i].subject].push_back(std::move(reps[i]));
  }
  for (const auto& [sid, _] : g.templates) g.subjects.push_back(sid);
  return g;
}

std::vector<double> score(const TensorPtr& probe, const Gallery& gallery,
                          const Representer& rep) {
  XD_CHECK(!gallery.subjects.empty(), "score: empty gallery");
  auto p = rep(probe, false);
  std::vector<double> out;
  out.reserve(gallery.subjects.size());
  for (int sid : gallery.subjects) {
    double best = -1.0;
    for (const auto& tmpl : gallery.templates.at(sid))
      best = std::max(best, cosine(p, tmpl));
    out.push_back(best);
  }
  return out;
}

ScoreMatrix score_all(const std::vector<GalleryImage>& probes,
                      const Gallery& gallery, const Representer& rep) {
  ScoreMatrix m;
  m.gallery_subjects = gallery.subjects;
  m.probe_labels.resize(probes.size());
  m.scores.resize(probes.size());
  parallel_for(probes.size(), [&](std::size_t i) {
    m.probe_labels[i] = probes[i].subject;
    m.scores[i] = score(probes[i].image, gallery, rep);
  });
  return m;
}

double CMCResult::rank(int k) const {
  XD_CHECK(k >= 1 && k <= static_cast<int>(rates.size()),
           "cmc: rank " + std::to_string(k) + " out of range");
  return rates[k - 1];
}

CMCResult cmc(const ScoreMatrix& scores) {
  const int n_subjects = static_cast<int>(scores.gallery_subjects.size());
  XD_CHECK(n_subjects >= 1, "cmc: empty gallery");
  CMCResult result;
  result.rates.assign(n_subjects, 0.0);
  result.probe_count = static_cast<int>(scores.scores.size());
  for (std::size_t p = 0; p < scores.scores.size(); ++p) {
    const auto& row = scores.scores[p];
    XD_CHECK(row.size() == static_cast<std::size_t>(n_subjects),
             "cmc: ragged score matrix");
    int true_idx = -1;
    for (int j = 0; j < n_subjects; ++j)
      if (scores.gallery_subjects[j] == scores.probe_labels[p]) true_idx = j;
    XD_CHECK(true_idx >= 0, "cmc: probe " + std::to_string(p) +
                                " labeled with subject " +
                                std::to_string(scores.probe_labels[p]) +
                                " absent from gallery");
    // Rank of the true subject under (score desc, subject id asc) ordering.
    int rank = 1;
    for (int j = 0; j < n_subjects; ++j) {
      if (j == true_idx) continue;
      if (row[j] > row[true_idx] ||
          (row[j] == row[true_idx] &&
           scores.gallery_subjects[j] < scores.gallery_subjects[true_idx]))
        ++rank;
    }
    for (int k = rank; k <= n_subjects; ++k) result.rates[k - 1] += 1.0;
  }
  if (result.probe_count > 0)
    for (double& r : result.rates) r /= result.probe_count;
  else
    result.rates.assign(n_subjects, 1.0);
  return result;
}

void write_cmc_csv(const std::string& path, const CMCResult& result) {
  std::ofstream out(path, std::ios::binary);
  XD_CHECK(out.good(), "cannot open for write: " + path);
  out << "rank,id_rate\n";
  for (std::size_t k = 0; k < result.rates.size(); ++k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", result.rates[k]);
    out << (k + 1) << "," << buf << "\n";
  }
  XD_CHECK(out.good(), "write failed: " + path);
}

void write_cmc_svg(const std::string& path, const CMCResult& result) {
  const int w = 640, h = 420, ml = 60, mr = 20, mt = 20, mb = 50;
  const int pw = w - ml - mr, ph = h - mt - mb;
  const int n = static_cast<int>(result.rates.size());
  std::ofstream out(path, std::ios::binary);
  XD_CHECK(out.good(), "cannot open for write: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
      << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << h - 12
      << "\" text-anchor=\"middle\" font-size=\"14\">rank</text>\n";
  out << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 16 "
      << mt + ph / 2 << ")\">identification rate</text>\n";
  out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (int k = 0; k < n; ++k) {
    double x = ml + (n == 1 ? 0.0 : static_cast<double>(k) / (n - 1) * pw);
    double y = mt + (1.0 - result.rates[k]) * ph;
    out << x << "," << y << " ";
  }
  out << "\"/>\n</svg>\n";
  XD_CHECK(out.good(), "write failed: " + path);
}

std::string dims_string(const TrunkConfig& cfg) {
  cfg.validate();
  int s = cfg.out_spatial();
  return std::to_string(s) + "×" + std::to_string(s) + "×" +
         std::to_string(cfg.out_channels());
}

TensorPtr preprocess_record(const ManifestRecord& r, int crop, double sigma1,
                            double sigma2) {
  // Records may point at already-preprocessed tensors from an earlier stage.
  if (r.path.size() > 4 && r.path.substr(r.path.size() - 4) == ".xdt") {
    TensorPtr t = read_tensor_file(r.path);
    XD_CHECK(t->shape == std::vector<int>({crop, crop, 1}),
             "preprocessed tensor " + r.path + " does not match crop " +
                 std::to_string(crop));
    return t;
  }
  Image img = read_image(r.path);
  Image face = crop_face(img, r.landmarks, crop);
  return image_to_tensor(standardize(dog_filter(face, sigma1, sigma2)));
}

ProtocolData build_protocol(const Manifest& manifest, const ProtocolConfig& cfg) {
  SplitResult sp = split(manifest, cfg.n_train_subjects, cfg.n_gallery_subjects,
                         cfg.gallery_templates, cfg.split_seed);
  auto load = [&](const ManifestRecord& r) {
    return preprocess_record(r, cfg.crop, cfg.sigma1, cfg.sigma2);
  };

  std::map<int, int> dense;
  for (const auto& r : sp.train)
    if (!dense.count(r.subject)) {
      int next = static_cast<int>(dense.size());
      dense[r.subject] = next;
    }

  const std::string target_domain =
      cfg.direction == Direction::VisToThm ? "thm" : "vis";
  ProtocolData d;
  // Pair target and source images of the same subject by index order;
  // pairing is by identity, not pixel registration.
  std::map<int, std::vector<TensorPtr>> target_imgs, source_imgs;
  for (const auto& r : sp.train) {
    auto t = load(r);
    if (r.domain == target_domain) {
      target_imgs[r.subject].push_back(t);
      d.train_target.push_back({t, dense[r.subject], r.domain});
    } else {
      source_imgs[r.subject].push_back(t);
    }
  }
  for (const auto& [sid, timgs] : target_imgs) {
    const auto& simgs = source_imgs[sid];
    std::size_t n = std::min(timgs.size(), simgs.size());
    for (std::size_t i = 0; i < n; ++i)
      d.train_pairs.push_back({timgs[i], simgs[i], dense[sid]});
  }
  for (const auto& r : sp.gallery) d.gallery.push_back({load(r), r.subject});
  for (const auto& r : sp.probes) {
    d.probes.push_back({load(r), r.subject});
    d.probe_conditions.push_back(r.condition);
  }
  d.n_identities = static_cast<int>(dense.size());
  return d;
}

double run_rank1(const ProtocolData& d, const Representer& rep) {
  Gallery g = enroll(d.gallery, rep);
  return cmc(score_all(d.probes, g, rep)).rank(1);
}

std::vector<AblateCell> ablate(const Manifest& manifest, const AblateConfig& cfg) {
  std::vector<AblateCell> cells;
  ProtocolConfig pconf;
  pconf.n_train_subjects = cfg.n_train_subjects;
  pconf.n_gallery_subjects = cfg.n_gallery_subjects;
  pconf.gallery_templates = cfg.gallery_templates;
  pconf.crop = cfg.crop;
  pconf.sigma1 = cfg.sigma1;
  pconf.sigma2 = cfg.sigma2;
  pconf.split_seed = cfg.seed;
  pconf.direction = cfg.direction;
  ProtocolData data = build_protocol(manifest, pconf);

  bool want_patch = false;
  std::vector<std::string> trunk_methods;
  for (const auto& m : cfg.methods) {
    if (m == "patch-baseline") want_patch = true;
    else trunk_methods.push_back(m);
  }

  for (int depth : cfg.depths) {
    TrunkConfig tc{cfg.blocks, depth, cfg.crop};
    bool feasible = depth >= 1 && depth <= static_cast<int>(cfg.blocks.size()) &&
                    cfg.crop % (1 << depth) == 0;
    PretrainResult pre;
    if (feasible) {
      TrainConfig pcfg;
      pcfg.epochs = cfg.pretrain_epochs;
      pcfg.batch_size = cfg.batch_size;
      pcfg.seed = cfg.seed;
      pcfg.direction = cfg.direction;
      pre = pretrain_trunk(data.train_target, tc, pcfg);
    }
    for (const auto& method : trunk_methods) {
      std::vector<double> lambdas =
          method == "learned-compress" ? cfg.lambdas : std::vector<double>{0.0};
      for (double lambda : lambdas) {
        AblateCell cell;
        cell.method = method;
        cell.depth = depth;
        cell.lambda = lambda;
        if (!feasible) {
          cell.skipped = true;
          cell.note = "crop " + std::to_string(cfg.crop) +
                      " not divisible by 2^" + std::to_string(depth);
          cells.push_back(cell);
          continue;
        }
        cell.dims = dims_string(tc);
        if (method == "learned-compress") {
          TrainConfig acfg;
          acfg.epochs = cfg.adapt_epochs;
          acfg.batch_size = cfg.batch_size;
          acfg.seed = cfg.seed;
          acfg.lambda = lambda;
          acfg.direction = cfg.direction;
          // Each λ cell adapts a fresh copy of the pretrained fragment.
          PretrainResult fresh = pre;
          fresh.trunk = clone_params(pre.trunk);
          fresh.compression = clone_params(pre.compression);
          fresh.head = clone_params(pre.head);
          ModelBundle bundle = train_adaptation(data.train_pairs, fresh, acfg);
          cell.rank1 = run_rank1(data, bundle_representer(bundle));
        } else if (method == "pca-64") {
          // Per-position channel vectors from the raw trunk, PCA-compressed.
          int k = std::min(cfg.pca_components, tc.out_channels());
          std::vector<std::vector<double>> rows;
          {
            NoGradGuard ng;
            for (const auto& s : data.train_target) {
              auto f = trunk_forward(s.image, pre.trunk, tc);
              int hw = f->shape[0] * f->shape[1], c = f->shape[2];
              for (int p = 0; p < hw; ++p)
                rows.emplace_back(f->data.begin() + p * c,
                                  f->data.begin() + (p + 1) * c);
            }
          }
          PcaModel pca = pca_fit(rows, k);
          auto rep = [&pre, &tc, pca, k](const TensorPtr& img, bool) {
            NoGradGuard ng;
            auto f = trunk_forward(img, pre.trunk, tc);
            int hw = f->shape[0] * f->shape[1], c = f->shape[2];
            std::vector<double> out;
            out.reserve(static_cast<std::size_t>(hw) * k);
            for (int p = 0; p < hw; ++p) {
              std::vector<double> row(f->data.begin() + p * c,
                                      f->data.begin() + (p + 1) * c);
              auto proj = pca_project(pca, row);
              out.insert(out.end(), proj.begin(), proj.end());
            }
            return l2_normalized(out);
          };
          cell.rank1 = run_rank1(data, rep);
        } else if (method == "global-avg-pool") {
          auto rep = [&pre, &tc](const TensorPtr& img, bool) {
            NoGradGuard ng;
            auto f = global_avg_pool(trunk_forward(img, pre.trunk, tc));
            return l2_normalized(f->data);
          };
          cell.dims = "1×1×" + std::to_string(tc.out_channels());
          cell.rank1 = run_rank1(data, rep);
        } else {
          cell.skipped = true;
          cell.note = "unknown method";
        }
        cells.push_back(cell);
      }
    }
  }

  if (want_patch) {
    AblateCell cell;
    cell.method = "patch-baseline";
    cell.lambda = 0.0;
    if (cfg.patch_size > cfg.crop) {
      cell.skipped = true;
      cell.note = "patch size exceeds crop";
    } else {
      int g = (cfg.crop - cfg.patch_size) / cfg.patch_stride + 1;
      cell.dims = std::to_string(g) + "×" + std::to_string(g) + "×" +
                  std::to_string(cfg.patch_size * cfg.patch_size);
      auto rep = [&cfg](const TensorPtr& img, bool) {
        auto f = patch_features(img, cfg.patch_size, cfg.patch_stride);
        return l2_normalized(f->data);
      };
      cell.rank1 = run_rank1(data, rep);
    }
    cells.push_back(cell);
  }
  return cells;
}

void write_ablate_csv(const std::string& path, const std::vector<AblateCell>& cells) {
  std::ofstream out(path, std::ios::binary);
  XD_CHECK(out.good(), "cannot open for write: " + path);
  out << "method,depth,lambda,dims,rank1,skipped,note\n";
  for (const auto& c : cells) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", c.rank1);
    out << c.method << "," << c.depth << "," << c.lambda << "," << c.dims << ","
        << (c.skipped ? "" : buf) << "," << (c.skipped ? "1" : "0") << ","
        << c.note << "\n";
  }
  XD_CHECK(out.good(), "write failed: " + path);
}

}  // namespace xdomid
