#include "xdomid/training.hpp"

#include <chrono>
#include <fstream>
#include <set>

#include "xdomid/ops.hpp"
#include "xdomid/rng.hpp"

namespace xdomid {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

TensorPtr one_hot(int label, int n) {
  XD_CHECK(label >= 0 && label < n,
           "label " + std::to_string(label) + " outside 0.." + std::to_string(n - 1));
  auto t = Tensor::zeros({n});
  t->data[label] = 1.0;
  return t;
}

TensorPtr mean_of(const std::vector<TensorPtr>& terms) {
  TensorPtr acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return scale(acc, 1.0 / static_cast<double>(terms.size()));
}

std::vector<std::vector<int>> make_batches(std::size_t n, int batch_size,
                                           Rng& rng) {
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order);
  std::vector<std::vector<int>> batches;
  for (std::size_t i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + i,
                         order.begin() + std::min(n, i + batch_size));
  }
  return batches;
}

int count_identities(const std::vector<LabeledTensor>& samples) {
  std::set<int> labels;
  for (const auto& s : samples) labels.insert(s.label);
  return static_cast<int>(labels.size());
}

}  // namespace

void TrainReport::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  XD_CHECK(out.good(), "cannot open for write: " + path);
  auto series = [&out](const char* key, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
      out << key << "." << i << "=" << buf << "\n";
    }
  };
  out << "epochs=" << total.size() << "\n";
  series("l_xid", l_xid);
  series("l_d", l_d);
  series("total", total);
  series("detector_ce", detector_ce);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", wall_seconds);
  out << "wall_seconds=" << buf << "\n";
  out << "checksum=" << checksum << "\n";
  XD_CHECK(out.good(), "write failed: " + path);
}

PretrainResult pretrain_trunk(const std::vector<LabeledTensor>& samples,
                              const TrunkConfig& trunk_cfg,
                              const TrainConfig& cfg) {
  XD_CHECK(!samples.empty(), "pretrain: no samples");
  XD_CHECK(cfg.batch_size >= 1, "pretrain: batch size must be >= 1");
  const int n_ids = count_identities(samples);
  XD_CHECK(n_ids >= 2, "pretrain: need at least 2 identities, got " +
                           std::to_string(n_ids));
  for (const auto& s : samples)
    XD_CHECK(s.domain == samples.front().domain,
             "pretrain: samples span multiple domains (" + s.domain + " vs " +
                 samples.front().domain + ")");

  auto t0 = Clock::now();
  PretrainResult res;
  res.trunk_cfg = trunk_cfg;
  res.n_identities = n_ids;
  {
    Rng trunk_rng(Rng::key({cfg.seed, 0x70ull}));
    res.trunk = init_trunk(trunk_cfg, trunk_rng);
    Rng comp_rng(Rng::key({cfg.seed, 0x71ull}));
    res.compression = init_compression(trunk_cfg.out_channels(), comp_rng);
    int feat_len = trunk_cfg.out_spatial() * trunk_cfg.out_spatial() *
                   compression_out_channels(res.compression);
    Rng head_rng(Rng::key({cfg.seed, 0x72ull}));
    res.head = init_head(feat_len, n_ids, head_rng);
  }

  ParamSet theta;
  theta.adopt(res.trunk, "trunk.");
  theta.adopt(res.compression, "comp.");
  theta.adopt(res.head, "head.");
  Optimizer opt(cfg.optimizer);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(Rng::key({cfg.seed, 0x5ull, static_cast<std::uint64_t>(epoch)}));
    double epoch_loss = 0.0;
    std::size_t batches_done = 0;
    for (const auto& batch : make_batches(samples.size(), cfg.batch_size, shuffle_rng)) {
      theta.zero_grad();
      std::vector<TensorPtr> terms;
      for (int idx : batch) {
        const auto& s = samples[idx];
        auto feat = compress(trunk_forward(s.image, res.trunk, trunk_cfg),
                             res.compression);
        auto probs = classify_identity(feat, res.head);
        terms.push_back(cross_entropy(probs, one_hot(s.label, n_ids)));
      }
      auto loss = mean_of(terms);
      backward(loss);
      opt.step(theta);
      epoch_loss += loss->data[0];
      ++batches_done;
    }
    double avg = epoch_loss / std::max<std::size_t>(1, batches_done);
    res.report.total.push_back(avg);
    res.report.l_xid.push_back(avg);
    res.report.l_d.push_back(0.0);
    res.report.detector_ce.push_back(0.0);
  }
  res.report.wall_seconds = seconds_since(t0);
  res.report.checksum = theta.checksum();
  return res;
}

ModelBundle train_adaptation(const std::vector<PairSample>& pairs,
                             PretrainResult pretrained, const TrainConfig& cfg,
                             TrainReport* report) {
  XD_CHECK(!pairs.empty(), "adaptation: no training pairs");
  XD_CHECK(cfg.alternation >= 0, "adaptation: alternation must be >= 0");
  LossConfig losses{cfg.lambda, {0.5, 0.5}};
  losses.validate();

  auto t0 = Clock::now();
  ModelBundle bundle;
  bundle.trunk_cfg = pretrained.trunk_cfg;
  bundle.direction = cfg.direction;
  bundle.n_identities = pretrained.n_identities;
  bundle.compression = pretrained.compression;
  bundle.head = pretrained.head;
  if (cfg.direction == Direction::VisToThm) {
    bundle.trunk_t = pretrained.trunk;          // classifier side, trained
    bundle.trunk_v = clone_params(pretrained.trunk);  // frozen source copy
  } else {
    bundle.trunk_v = pretrained.trunk;
    bundle.trunk_t = clone_params(pretrained.trunk);
  }
  const int comp_channels = compression_out_channels(bundle.compression);
  {
    Rng rst_rng(Rng::key({cfg.seed, 0x44ull}));
    bundle.rst = init_rst({comp_channels, cfg.rst_hidden}, rst_rng);
    Rng det_rng(Rng::key({cfg.seed, 0x45ull}));
    bundle.detector = init_detector({comp_channels, cfg.detector_hidden}, det_rng);
  }

  ParamSet theta;
  theta.adopt(bundle.classifier_trunk(), "trunk.");
  theta.adopt(bundle.compression, "comp.");
  theta.adopt(bundle.head, "head.");
  ParamSet& phi = bundle.rst;
  ParamSet& det = bundle.detector;
  for (auto& p : bundle.source_trunk().items()) p.trainable = false;

  Optimizer opt_theta(cfg.optimizer), opt_phi(cfg.optimizer), opt_det(cfg.optimizer);

  // The source trunk never changes, so its raw features are cached up front.
  std::vector<TensorPtr> src_feats(pairs.size());
  {
    NoGradGuard ng;
    for (std::size_t i = 0; i < pairs.size(); ++i)
      src_feats[i] = trunk_forward(pairs[i].xp, bundle.source_trunk(),
                                   bundle.trunk_cfg);
  }

  // Detector target indices: [vis, thm]. t comes from the classifier domain,
  // t̂ is mapped from the source domain.
  const int t_domain = cfg.direction == Direction::VisToThm ? 1 : 0;
  const int that_domain = 1 - t_domain;
  const int n_ids = pretrained.n_identities;

  TrainReport local;
  TrainReport& rep = report ? *report : local;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(Rng::key({cfg.seed, 0x6ull, static_cast<std::uint64_t>(epoch)}));
    double ep_xid = 0.0, ep_d = 0.0, ep_total = 0.0, ep_det = 0.0;
    std::size_t batches_done = 0;
    for (const auto& batch : make_batches(pairs.size(), cfg.batch_size, shuffle_rng)) {
      // Phase 1: classifier-domain parameters on the total loss.
      theta.zero_grad();
      phi.zero_grad();
      det.zero_grad();
      {
        std::vector<TensorPtr> xid_terms, d_terms;
        for (int idx : batch) {
          const auto& p = pairs[idx];
          auto t = compress(trunk_forward(p.x, bundle.classifier_trunk(),
                                          bundle.trunk_cfg),
                            bundle.compression);
          auto that = rst_forward(compress(src_feats[idx], bundle.compression),
                                  bundle.rst);
          auto y = one_hot(p.label, n_ids);
          xid_terms.push_back(cross_domain_id_loss(
              classify_identity(t, bundle.head),
              classify_identity(that, bundle.head), y));
          d_terms.push_back(domain_invariance_loss(domain_detect(t, det),
                                                   domain_detect(that, det),
                                                   losses.alpha));
        }
        auto l_xid = mean_of(xid_terms);
        auto l_d = mean_of(d_terms);
        auto l_total = total_loss(l_xid, l_d, cfg.lambda);
        backward(l_total);
        opt_theta.step(theta);
        ep_xid += l_xid->data[0];
        ep_d += l_d->data[0];
        ep_total += l_total->data[0];
      }

      // Phase 2: the RST on the total loss; everything else frozen. The
      // classifier-domain path is constant here, so it runs off-tape.
      for (int step = 0; step < cfg.alternation; ++step) {
        theta.zero_grad();
        phi.zero_grad();
        det.zero_grad();
        std::vector<TensorPtr> xid_terms, d_terms;
        for (int idx : batch) {
          const auto& p = pairs[idx];
          TensorPtr t, that_in;
          {
            NoGradGuard ng;
            t = compress(trunk_forward(p.x, bundle.classifier_trunk(),
                                       bundle.trunk_cfg),
                         bundle.compression);
            that_in = compress(src_feats[idx], bundle.compression);
          }
          auto that = rst_forward(that_in, bundle.rst);
          auto y = one_hot(p.label, n_ids);
          xid_terms.push_back(cross_domain_id_loss(
              classify_identity(t, bundle.head),
              classify_identity(that, bundle.head), y));
          d_terms.push_back(domain_invariance_loss(domain_detect(t, det),
                                                   domain_detect(that, det),
                                                   losses.alpha));
        }
        auto l_total = total_loss(mean_of(xid_terms), mean_of(d_terms), cfg.lambda);
        backward(l_total);
        opt_phi.step(phi);
      }

      // Phase 3: detector on domain-classification cross-entropy; features
      // are constants here.
      {
        theta.zero_grad();
        phi.zero_grad();
        det.zero_grad();
        std::vector<TensorPtr> det_terms;
        for (int idx : batch) {
          const auto& p = pairs[idx];
          TensorPtr t, that;
          {
            NoGradGuard ng;
            t = compress(trunk_forward(p.x, bundle.classifier_trunk(),
                                       bundle.trunk_cfg),
                         bundle.compression);
            that = rst_forward(compress(src_feats[idx], bundle.compression),
                               bundle.rst);
          }
          det_terms.push_back(
              cross_entropy(domain_detect(t, det), one_hot(t_domain, 2)));
          det_terms.push_back(
              cross_entropy(domain_detect(that, det), one_hot(that_domain, 2)));
        }
        auto l_det = mean_of(det_terms);
        backward(l_det);
        opt_det.step(det);
        ep_det += l_det->data[0];
      }
      ++batches_done;
    }
    double nb = static_cast<double>(std::max<std::size_t>(1, batches_done));
    rep.l_xid.push_back(ep_xid / nb);
    rep.l_d.push_back(ep_d / nb);
    rep.total.push_back(ep_total / nb);
    rep.detector_ce.push_back(ep_det / nb);
  }
  rep.wall_seconds = seconds_since(t0);
  ParamSet all;
  all.adopt(theta, "");
  all.adopt(phi, "rst.");
  all.adopt(det, "det.");
  rep.checksum = all.checksum();
  return bundle;
}

ParamSet train_dpm_baseline(const std::vector<PairSample>& pairs,
                            const PretrainResult& pretrained,
                            const TrainConfig& cfg, TrainReport* report) {
  XD_CHECK(!pairs.empty(), "dpm: no training pairs");
  auto t0 = Clock::now();

  // Trunks and compression are frozen, so both feature sets are cached.
  std::vector<TensorPtr> target_feats(pairs.size()), source_feats(pairs.size());
  {
    NoGradGuard ng;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      target_feats[i] = compress(
          trunk_forward(pairs[i].x, pretrained.trunk, pretrained.trunk_cfg),
          pretrained.compression);
      source_feats[i] = compress(
          trunk_forward(pairs[i].xp, pretrained.trunk, pretrained.trunk_cfg),
          pretrained.compression);
    }
  }

  Rng dpm_rng(Rng::key({cfg.seed, 0x46ull}));
  ParamSet dpm = init_dpm(compression_out_channels(pretrained.compression), dpm_rng);
  Optimizer opt(cfg.optimizer);

  TrainReport local;
  TrainReport& rep = report ? *report : local;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(Rng::key({cfg.seed, 0x7ull, static_cast<std::uint64_t>(epoch)}));
    double ep = 0.0;
    std::size_t batches_done = 0;
    for (const auto& batch : make_batches(pairs.size(), cfg.batch_size, shuffle_rng)) {
      dpm.zero_grad();
      std::vector<TensorPtr> terms;
      for (int idx : batch)
        terms.push_back(
            dpm_loss(target_feats[idx], dpm_forward(source_feats[idx], dpm)));
      auto loss = mean_of(terms);
      backward(loss);
      opt.step(dpm);
      ep += loss->data[0];
      ++batches_done;
    }
    double avg = ep / std::max<std::size_t>(1, batches_done);
    rep.total.push_back(avg);
    rep.l_xid.push_back(0.0);
    rep.l_d.push_back(0.0);
    rep.detector_ce.push_back(0.0);
  }
  rep.wall_seconds = seconds_since(t0);
  rep.checksum = dpm.checksum();
  return dpm;
}

}  // namespace xdomid
