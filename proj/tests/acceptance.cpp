// Acceptance suite: one printed [PASS]/[FAIL] line per criterion.
//
// The end-to-end criteria (5-10) share a per-seed cache of trained models so
// each protocol run (dataset split, pretraining, adaptation, evaluation) is
// paid for exactly once. Hyperparameters are deliberately small so the whole
// suite fits a single laptop core; every number asserted below is produced by
// the real pipeline, not by canned fixtures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "xdomid/evaluation.hpp"
#include "xdomid/losses.hpp"
#include "xdomid/networks.hpp"
#include "xdomid/ops.hpp"
#include "xdomid/rng.hpp"
#include "xdomid/synthdata.hpp"
#include "xdomid/training.hpp"

#ifdef _WIN32
#define WEXITSTATUS(x) (x)
#else
#include <sys/wait.h>
#endif

using namespace xdomid;
using namespace xdomid::testutil;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int n, const std::string& desc, bool ok) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", n, desc.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(ok, "criterion " << n << ": " << desc);
}

double median(std::vector<double> v) {
  REQUIRE(!v.empty());
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// Shared protocol configuration (desk-scale).

const std::vector<int> kBlocks{8, 16, 8};
constexpr int kDepth = 3;
constexpr int kCrop = 64;
constexpr int kPretrainEpochs = 8;
constexpr int kAdaptEpochs = 15;
constexpr int kBatch = 16;
constexpr double kPretrainLr = 1e-3;
constexpr double kAdaptLr = 3e-3;
constexpr int kRstHidden = 32;
constexpr int kDetectorHidden = 32;
constexpr int kDpmEpochs = 120;

const Manifest& shared_manifest() {
  static Manifest manifest = [] {
    GenerateConfig gc;
    gc.n_subjects = 60;
    gc.seed = 1;
    gc.conditions = {"baseline", "baseline", "baseline", "baseline",
                     "baseline", "baseline", "expression", "pose"};
    return generate(gc, scratch_dir("acceptance_data"));
  }();
  return manifest;
}

std::vector<double> l2n(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0.0)
    for (double& x : v) x /= n;
  return v;
}

// Everything criterion 8 and 10 need from one gallery/probe evaluation.
struct MethodEval {
  double rank1 = 0.0;
  double pose_rank1 = 0.0;
  double nonpose_rank1 = 0.0;
  std::vector<double> cmc_rates;
  double min_cos = 1.0, max_cos = -1.0;
  int gallery_size = 0;
};

std::vector<MethodEval>& eval_registry() {
  static std::vector<MethodEval> reg;
  return reg;
}

MethodEval evaluate(const ProtocolData& data, const Representer& rep) {
  Gallery g = enroll(data.gallery, rep);
  ScoreMatrix sm = score_all(data.probes, g, rep);
  MethodEval ev;
  ev.gallery_size = static_cast<int>(sm.gallery_subjects.size());
  ev.cmc_rates = cmc(sm).rates;
  ev.rank1 = ev.cmc_rates.front();
  int pose_hit = 0, pose_n = 0, other_hit = 0, other_n = 0;
  for (std::size_t i = 0; i < sm.scores.size(); ++i) {
    int top = 0;
    for (std::size_t j = 0; j < sm.scores[i].size(); ++j) {
      ev.min_cos = std::min(ev.min_cos, sm.scores[i][j]);
      ev.max_cos = std::max(ev.max_cos, sm.scores[i][j]);
      if (sm.scores[i][j] > sm.scores[i][top]) top = static_cast<int>(j);
    }
    bool hit = sm.gallery_subjects[top] == sm.probe_labels[i];
    if (data.probe_conditions[i] == "pose") {
      pose_n++, pose_hit += hit;
    } else {
      other_n++, other_hit += hit;
    }
  }
  ev.pose_rank1 = pose_n ? static_cast<double>(pose_hit) / pose_n : 0.0;
  ev.nonpose_rank1 = other_n ? static_cast<double>(other_hit) / other_n : 0.0;
  eval_registry().push_back(ev);
  return ev;
}

ModelBundle no_adapt_bundle(const PretrainResult& pre, std::uint64_t seed,
                            Direction dir) {
  ModelBundle b;
  b.trunk_cfg = pre.trunk_cfg;
  b.direction = dir;
  b.n_identities = pre.n_identities;
  b.trunk_v = pre.trunk;
  b.trunk_t = clone_params(pre.trunk);
  b.compression = pre.compression;
  b.head = pre.head;
  int c = compression_out_channels(pre.compression);
  Rng rst_rng(Rng::key({seed, 0x44ull}));
  b.rst = init_rst({c, kRstHidden}, rst_rng);  // zero final layer: identity
  Rng det_rng(Rng::key({seed, 0x45ull}));
  b.detector = init_detector({c, kDetectorHidden}, det_rng);
  return b;
}

struct SeedRun {
  MethodEval prop, l0, dpm, noadapt;
  bool has_baselines = false;
};

// One full protocol run per (seed, direction), cached across criteria.
const SeedRun& seed_run(std::uint64_t seed, Direction dir) {
  static std::map<std::pair<std::uint64_t, int>, SeedRun> cache;
  auto key = std::make_pair(seed, static_cast<int>(dir));
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  ProtocolConfig pc;
  pc.split_seed = seed;
  pc.direction = dir;
  pc.crop = kCrop;
  ProtocolData data = build_protocol(shared_manifest(), pc);

  TrunkConfig tc{kBlocks, kDepth, kCrop};
  TrainConfig base;
  base.epochs = kPretrainEpochs;
  base.batch_size = kBatch;
  base.seed = seed;
  base.direction = dir;
  base.optimizer.lr = kPretrainLr;
  PretrainResult pre = pretrain_trunk(data.train_target, tc, base);

  auto adapt = [&](double lambda) {
    PretrainResult fresh = pre;
    fresh.trunk = clone_params(pre.trunk);
    fresh.compression = clone_params(pre.compression);
    fresh.head = clone_params(pre.head);
    TrainConfig ac = base;
    ac.epochs = kAdaptEpochs;
    ac.optimizer.lr = kAdaptLr;
    ac.lambda = lambda;
    ac.rst_hidden = kRstHidden;
    ac.detector_hidden = kDetectorHidden;
    ModelBundle b = train_adaptation(data.train_pairs, fresh, ac);
    return evaluate(data, bundle_representer(b));
  };

  SeedRun run;
  run.prop = adapt(0.25);
  run.l0 = adapt(0.0);

  if (dir == Direction::VisToThm) {
    run.has_baselines = true;
    run.noadapt =
        evaluate(data, bundle_representer(no_adapt_bundle(pre, seed, dir)));

    TrainConfig dc = base;
    dc.epochs = kDpmEpochs;
    dc.optimizer.lr = kAdaptLr;
    ParamSet dpm = train_dpm_baseline(data.train_pairs, pre, dc);
    // DPM maps the source-domain (gallery-side for v_to_t) features onto the
    // classifier domain, mirroring where the RST sits in the proposed path.
    Representer drep = [&pre, &tc, &dpm](const TensorPtr& img,
                                         bool gallery_side) {
      NoGradGuard ng;
      auto f = compress(trunk_forward(img, pre.trunk, tc), pre.compression);
      if (gallery_side) f = dpm_forward(f, dpm);
      return l2n(f->data);
    };
    run.dpm = evaluate(data, drep);
  }
  return cache.emplace(key, std::move(run)).first->second;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * v);
  return buf;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(XDOMID_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("criterion 1: finite-difference gradient suite") {
  auto t0 = Clock::now();
  const double kTol = 1e-4;
  double worst = 0.0;
  int configs = 0;
  bool ok = true;

  Rng rng(20260826);
  auto note = [&](const FdStats& st) {
    worst = std::max(worst, st.max_rel);
    ++configs;
    ok = ok && st.max_rel <= kTol;
  };

  for (int t = 0; t < 6; ++t) {  // conv2d: both paddings, stride 1 and 2
    int H = 4 + rng.uniform_int(3), W = 4 + rng.uniform_int(3);
    int Ci = 1 + rng.uniform_int(2), Co = 1 + rng.uniform_int(2);
    int stride = 1 + (t % 2);
    Padding pad = t < 3 ? Padding::Same : Padding::Valid;
    auto x = rand_tensor({H, W, Ci}, rng);
    auto w = rand_tensor({3, 3, Ci, Co}, rng, 0.5);
    note(fd_check({x, w}, [&] { return sum(conv2d(x, w, stride, pad)); }));
  }
  for (int t = 0; t < 3; ++t) {  // dense
    int n = 2 + rng.uniform_int(4), m = 2 + rng.uniform_int(4);
    auto x = rand_tensor({n}, rng);
    auto w = rand_tensor({n, m}, rng);
    auto b = rand_tensor({m}, rng);
    note(fd_check(
        {x, w, b}, [&] { return sum(mul(dense(x, w, b), dense(x, w, b))); }));
  }
  for (int t = 0; t < 3; ++t) {  // tanh + elementwise composites
    auto x = rand_tensor({3, 3}, rng);
    auto y = rand_tensor({3, 3}, rng);
    note(fd_check(
        {x, y}, [&] { return mean(mul(tanh_op(x), add(y, scale(x, 0.5)))); }));
  }
  for (int t = 0; t < 2; ++t) {  // relu at generic (non-kink) points
    auto x = rand_tensor({10}, rng);
    for (double& v : x->data)
      if (std::fabs(v) < 1e-3) v += 0.1;
    note(fd_check({x}, [&] { return sum(mul(relu(x), relu(x))); }));
  }
  for (int t = 0; t < 2; ++t) {  // softmax + log (cross-entropy shape)
    int n = 3 + rng.uniform_int(3);
    auto x = rand_tensor({n}, rng, 2.0);
    auto y = one_hot(n, rng.uniform_int(n));
    note(fd_check({x}, [&] {
      return scale(sum(mul(y, log_op(softmax(x, 0), 1e-12))), -1.0);
    }));
  }
  for (int t = 0; t < 2; ++t) {  // max_pool2 (perturbations stay sub-gap)
    auto x = rand_tensor({4, 4, 2}, rng, 5.0);
    note(fd_check({x}, [&] { return sum(mul(max_pool2(x), max_pool2(x))); }));
  }
  {  // global_avg_pool, sub, scale, reshape, mean
    auto x = rand_tensor({4, 4, 3}, rng);
    auto y = rand_tensor({1, 1, 3}, rng);
    note(fd_check({x, y}, [&] {
      auto d = sub(global_avg_pool(x), y);
      return mean(mul(reshape(d, {3}), reshape(d, {3})));
    }));
  }
  for (int t = 0; t < 2; ++t) {  // every loss, via softmax logits
    int n = 4;
    auto la = rand_tensor({n}, rng, 2.0);
    auto lb = rand_tensor({n}, rng, 2.0);
    auto da = rand_tensor({2}, rng);
    auto db = rand_tensor({2}, rng);
    auto y = one_hot(n, rng.uniform_int(n));
    double alpha[2] = {0.5, 0.5};
    note(fd_check({la, lb, da, db}, [&] {
      auto l_xid =
          cross_domain_id_loss(softmax(la, 0), softmax(lb, 0), y);
      auto l_d =
          domain_invariance_loss(softmax(da, 0), softmax(db, 0), alpha);
      return total_loss(l_xid, l_d, 0.25);
    }));
  }
  {  // regression losses (DPM / CpNN)
    auto a = rand_tensor({2, 2, 3}, rng);
    auto b = rand_tensor({2, 2, 3}, rng);
    note(fd_check({a, b}, [&] { return dpm_loss(a, b); }));
    note(fd_check({a, b}, [&] { return cpnn_loss(a, b); }));
  }

  double secs = elapsed(t0);
  ok = ok && configs >= 20 && secs < 60.0;
  report(1, "finite-difference gradients: " + std::to_string(configs) +
                " configs, worst rel err " + std::to_string(worst) + ", " +
                std::to_string(secs) + " s (tol 1e-4, budget 60 s)",
         ok);
}

TEST_CASE("criterion 2: analytic loss identities") {
  bool ok = true;
  auto uniform4 = Tensor::from({4}, std::vector<double>(4, 0.25));
  auto y4 = one_hot(4, 1);
  ok = ok &&
       std::fabs(cross_entropy(uniform4, y4)->data[0] - std::log(4.0)) <= 1e-9;
  ok = ok && std::fabs(cross_domain_id_loss(uniform4, uniform4, y4)->data[0] -
                       2.0 * std::log(4.0)) <= 1e-9;
  double alpha[2] = {0.5, 0.5};
  auto uniform2 = Tensor::from({2}, {0.5, 0.5});
  ok = ok && std::fabs(domain_invariance_loss(uniform2, uniform2, alpha)
                           ->data[0] -
                       2.0 * std::log(2.0)) <= 1e-9;

  Rng rng(77);
  for (int t = 0; t < 100 && ok; ++t) {
    int n = 2 + rng.uniform_int(6);
    auto a = rand_distribution(n, rng);
    auto b = rand_distribution(n, rng);
    auto y = one_hot(n, rng.uniform_int(n));
    double lhs = cross_domain_id_loss(a, b, y)->data[0];
    double rhs = cross_entropy(a, y)->data[0] + cross_entropy(b, y)->data[0];
    ok = ok && std::fabs(lhs - rhs) <= 1e-12;

    auto lx = Tensor::from({1}, {rng.uniform(0.0, 3.0)});
    auto ld = Tensor::from({1}, {rng.uniform(0.0, 3.0)});
    double total = total_loss(lx, ld, 0.25)->data[0];
    ok = ok &&
         std::fabs(total - (0.75 * lx->data[0] + 0.25 * ld->data[0])) <= 1e-12;
  }
  report(2,
         "CE(uniform,4)=ln4, L_xID(uniform)=2ln4, L_D(uniform)=2ln2, "
         "affine total_loss, and L_xID==CE+CE on 100 random inputs",
         ok);
}

TEST_CASE("criterion 3: RST is the bitwise identity at initialization") {
  bool ok = true;
  Rng rng(404);
  for (int t = 0; t < 50; ++t) {
    int c = 1 + rng.uniform_int(8);
    int h = 2 + rng.uniform_int(5);
    Rng init_rng(Rng::key({static_cast<std::uint64_t>(t), 0x44ull}));
    ParamSet rst = init_rst({c, 4 + rng.uniform_int(40)}, init_rng);
    auto u = rand_tensor({h, h, c}, rng, 2.0, false);
    NoGradGuard ng;
    auto out = rst_forward(u, rst);
    for (std::size_t i = 0; i < u->size(); ++i)
      ok = ok && std::memcmp(&out->data[i], &u->data[i], sizeof(double)) == 0;
  }
  report(3, "RST(u) == u bitwise on 50 random feature maps", ok);
}

TEST_CASE("criterion 4: truncation arithmetic at input 200, depth 3") {
  std::string dims = dims_string(TrunkConfig{{32, 64, 128, 256}, 3, 200});
  report(4, "dims_string(200, depth 3) == \"25×25×128\" (got \"" + dims + "\")",
         dims == "25×25×128");
}

TEST_CASE("criterion 5: end-to-end ordering on the synthetic protocol") {
  auto t0 = Clock::now();
  std::vector<double> prop, l0, dpm, noadapt;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SeedRun& r = seed_run(seed, Direction::VisToThm);
    prop.push_back(r.prop.rank1);
    l0.push_back(r.l0.rank1);
    dpm.push_back(r.dpm.rank1);
    noadapt.push_back(r.noadapt.rank1);
  }
  double mp = median(prop), m0 = median(l0), md = median(dpm),
         mn = median(noadapt);
  double secs = elapsed(t0);
  bool ok = mp >= m0 && mp >= md && m0 >= mn && md >= mn &&
            mp >= mn + 0.10 && secs < 900.0;
  report(5,
         "median rank-1 over 5 seeds: proposed(0.25)=" + pct(mp) +
             " >= {lambda0=" + pct(m0) + ", DPM=" + pct(md) +
             "}, trained >= no-adapt=" + pct(mn) +
             ", margin >= 10 pts, runtime " + std::to_string(secs) +
             " s < 900 s",
         ok);
}

TEST_CASE("criterion 6: best depth over the {1,2,3,4} grid is 2 or 3") {
  // Smaller crop so depth 4 stays feasible (32 / 2^4 = 2).
  const int crop = 32;
  const std::vector<int> blocks{8, 16, 8, 8};
  std::map<int, std::vector<double>> by_depth;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    ProtocolConfig pc;
    pc.split_seed = seed;
    pc.crop = crop;
    ProtocolData data = build_protocol(shared_manifest(), pc);
    for (int depth = 1; depth <= 4; ++depth) {
      TrunkConfig tc{blocks, depth, crop};
      TrainConfig base;
      base.epochs = kPretrainEpochs;
      base.batch_size = kBatch;
      base.seed = seed;
      base.optimizer.lr = kPretrainLr;
      PretrainResult pre = pretrain_trunk(data.train_target, tc, base);
      TrainConfig ac = base;
      ac.epochs = kAdaptEpochs;
      ac.optimizer.lr = kAdaptLr;
      ac.lambda = 0.25;
      ac.rst_hidden = kRstHidden;
      ac.detector_hidden = kDetectorHidden;
      ModelBundle b = train_adaptation(data.train_pairs, pre, ac);
      by_depth[depth].push_back(evaluate(data, bundle_representer(b)).rank1);
    }
  }
  std::map<int, double> med;
  for (auto& [d, v] : by_depth) med[d] = median(v);
  double inner = std::max(med[2], med[3]);
  bool ok = inner > med[1] && inner > med[4];
  report(6,
         "median rank-1 by depth {1,2,3,4} = {" + pct(med[1]) + ", " +
             pct(med[2]) + ", " + pct(med[3]) + ", " + pct(med[4]) +
             "}; maximum at depth 2 or 3",
         ok);
}

TEST_CASE("criterion 7: lambda=0.25 beats lambda=0 in both directions") {
  std::vector<double> vt25, vt0, tv25, tv0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SeedRun& a = seed_run(seed, Direction::VisToThm);
    vt25.push_back(a.prop.rank1);
    vt0.push_back(a.l0.rank1);
    const SeedRun& b = seed_run(seed, Direction::ThmToVis);
    tv25.push_back(b.prop.rank1);
    tv0.push_back(b.l0.rank1);
  }
  double v25 = median(vt25), v0 = median(vt0), t25 = median(tv25),
         t0 = median(tv0);
  bool ok = v25 >= v0 && t25 >= t0;
  report(7,
         "median rank-1: v_to_t " + pct(v25) + " >= " + pct(v0) +
             " and t_to_v " + pct(t25) + " >= " + pct(t0) +
             " (lambda 0.25 vs 0, 5 seeds each)",
         ok);
}

TEST_CASE("criterion 8: CMC and cosine contracts on every evaluation") {
  const auto& reg = eval_registry();
  bool ok = !reg.empty();
  for (const auto& ev : reg) {
    ok = ok && static_cast<int>(ev.cmc_rates.size()) == ev.gallery_size;
    for (std::size_t i = 1; i < ev.cmc_rates.size(); ++i)
      ok = ok && ev.cmc_rates[i] >= ev.cmc_rates[i - 1];
    ok = ok && ev.cmc_rates.back() == 1.0;
    ok = ok && ev.min_cos >= -1.0 - 1e-12 && ev.max_cos <= 1.0 + 1e-12;
  }
  report(8,
         "all " + std::to_string(reg.size()) +
             " evaluations: CMC monotone, 1.0 at rank=gallery size, cosine "
             "within [-1,1]",
         ok);
}

TEST_CASE("criterion 9: the CLI chain is byte-deterministic") {
  std::string base = scratch_dir("acceptance_cli");
  auto chain = [&](const std::string& tag) {
    std::string d = base + "/" + tag;
    std::filesystem::create_directories(d);
    bool ok = true;
    ok = ok && run_cli("synth-data --subjects 8 --seed 5 --out " + d + "/raw") == 0;
    ok = ok && run_cli("preprocess --manifest " + d +
                       "/raw/manifest.jsonl --crop 32 --out " + d + "/prep") == 0;
    ok = ok && run_cli("pretrain --manifest " + d +
                       "/prep/manifest.jsonl --blocks 4,8 --depth 2 --crop 32 "
                       "--train-subjects 4 --gallery-subjects 4 --templates 2 "
                       "--epochs 2 --batch 8 --seed 5 --out " + d + "/pre") == 0;
    ok = ok && run_cli("train --manifest " + d +
                       "/prep/manifest.jsonl --pretrained " + d +
                       "/pre/pretrain.xdc --crop 32 --train-subjects 4 "
                       "--gallery-subjects 4 --templates 2 --epochs 2 "
                       "--batch 8 --seed 5 --out " + d + "/tr") == 0;
    ok = ok && run_cli("eval --manifest " + d +
                       "/prep/manifest.jsonl --checkpoint " + d +
                       "/tr/model.xdc --scenario 1 --crop 32 "
                       "--train-subjects 4 --gallery-subjects 4 --templates 2 "
                       "--seed 5 --out " + d + "/ev") == 0;
    REQUIRE(ok);
    return slurp(d + "/ev/cmc.csv");
  };
  std::string a = chain("a"), b = chain("b");
  bool ok = !a.empty() && a == b;
  report(9, "synth-data->preprocess->pretrain->train->eval repeated with "
            "fixed seeds yields byte-identical metric CSVs",
         ok);
}

TEST_CASE("criterion 10: pose probes degrade rank-1") {
  std::vector<double> pose, nonpose;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const SeedRun& r = seed_run(seed, Direction::VisToThm);
    pose.push_back(r.prop.pose_rank1);
    nonpose.push_back(r.prop.nonpose_rank1);
  }
  double mp = median(pose), mn = median(nonpose);
  report(10,
         "median rank-1 pose " + pct(mp) + " < baseline/expression " +
             pct(mn) + " over 3 seeds",
         mp < mn);
}
