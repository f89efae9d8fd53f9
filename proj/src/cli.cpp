#include "xdomid/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xdomid/checkpoint.hpp"
#include "xdomid/common.hpp"
#include "xdomid/evaluation.hpp"
#include "xdomid/networks.hpp"
#include "xdomid/synthdata.hpp"
#include "xdomid/tensor_io.hpp"
#include "xdomid/training.hpp"

namespace xdomid {
namespace {

namespace fs = std::filesystem;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<int> parse_int_csv(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoi(item));
  XD_CHECK(!out.empty(), "empty integer list: '" + csv + "'");
  return out;
}

std::vector<double> parse_double_csv(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stod(item));
  XD_CHECK(!out.empty(), "empty number list: '" + csv + "'");
  return out;
}

std::vector<std::string> parse_string_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  XD_CHECK(!out.empty(), "empty list: '" + csv + "'");
  return out;
}

// Echoes the fully resolved configuration into <out>/config.txt as
// key=value lines; feeding that file back through --config reproduces
// the run (flags still override).
void write_config_echo(
    const std::string& out_dir,
    const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(out_dir + "/config.txt", std::ios::binary);
  XD_CHECK(out.good(), "cannot open for write: " + out_dir + "/config.txt");
  for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
  XD_CHECK(out.good(), "write failed: " + out_dir + "/config.txt");
}

void ensure_out_dir(const std::string& out_dir) {
  XD_CHECK(!out_dir.empty(), "output directory must not be empty");
  fs::create_directories(out_dir);
}

// Flags shared by the protocol-driven subcommands.
struct ProtocolFlags {
  int train_subjects = 30;
  int gallery_subjects = 30;
  int templates = 4;
  int crop = 64;
  double sigma1 = 1.0, sigma2 = 2.0;

  void attach(CLI::App* sub) {
    sub->add_option("--train-subjects", train_subjects,
                    "Subjects reserved for training");
    sub->add_option("--gallery-subjects", gallery_subjects,
                    "Subjects enrolled in the gallery");
    sub->add_option("--templates", templates,
                    "Baseline visible templates per gallery subject");
    sub->add_option("--crop", crop, "Aligned face crop size in pixels");
    sub->add_option("--sigma1", sigma1, "Inner Gaussian sigma of the band-pass");
    sub->add_option("--sigma2", sigma2, "Outer Gaussian sigma of the band-pass");
  }

  ProtocolConfig to_config(std::uint64_t seed, Direction dir) const {
    ProtocolConfig p;
    p.n_train_subjects = train_subjects;
    p.n_gallery_subjects = gallery_subjects;
    p.gallery_templates = templates;
    p.crop = crop;
    p.sigma1 = sigma1;
    p.sigma2 = sigma2;
    p.split_seed = seed;
    p.direction = dir;
    return p;
  }

  void echo(std::vector<std::pair<std::string, std::string>>& kv) const {
    kv.emplace_back("train-subjects", std::to_string(train_subjects));
    kv.emplace_back("gallery-subjects", std::to_string(gallery_subjects));
    kv.emplace_back("templates", std::to_string(templates));
    kv.emplace_back("crop", std::to_string(crop));
    kv.emplace_back("sigma1", fmt_double(sigma1));
    kv.emplace_back("sigma2", fmt_double(sigma2));
  }
};

void check_crop_depth(int crop, int depth) {
  XD_CHECK(depth >= 1, "depth must be >= 1");
  XD_CHECK(crop % (1 << depth) == 0,
           "crop size " + std::to_string(crop) + " not divisible by 2^" +
               std::to_string(depth));
}

ModelBundle bundle_from_pretrain(const PretrainResult& pre, Direction dir,
                                 std::uint64_t seed, int rst_hidden,
                                 int detector_hidden) {
  ModelBundle b;
  b.trunk_cfg = pre.trunk_cfg;
  b.direction = dir;
  b.n_identities = pre.n_identities;
  b.compression = pre.compression;
  b.head = pre.head;
  if (dir == Direction::VisToThm) {
    b.trunk_t = pre.trunk;
    b.trunk_v = clone_params(pre.trunk);
  } else {
    b.trunk_v = pre.trunk;
    b.trunk_t = clone_params(pre.trunk);
  }
  int c = compression_out_channels(pre.compression);
  Rng rng_rst(Rng::key({seed, 0x44}));
  b.rst = init_rst({c, rst_hidden}, rng_rst);
  Rng rng_det(Rng::key({seed, 0x45}));
  b.detector = init_detector({c, detector_hidden}, rng_det);
  return b;
}

CMCResult read_cmc_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  XD_CHECK(in.good(), "cannot open: " + path);
  std::string line;
  XD_CHECK(std::getline(in, line) && line.rfind("rank,id_rate", 0) == 0,
           path + ": missing 'rank,id_rate' header");
  CMCResult r;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto comma = line.find(',');
    XD_CHECK(comma != std::string::npos,
             path + ":" + std::to_string(lineno) + ": expected rank,id_rate");
    r.rates.push_back(std::stod(line.substr(comma + 1)));
  }
  XD_CHECK(!r.rates.empty(), path + ": no data rows");
  return r;
}


// Reads a line-oriented key=value config file into "--key=value" tokens.
std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  XD_CHECK(in.good(), "cannot open config file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    XD_CHECK(eq != std::string::npos && eq > 0,
             path + ":" + std::to_string(lineno) + ": expected key=value");
    tokens.push_back("--" + line.substr(0, eq) + "=" + line.substr(eq + 1));
  }
  return tokens;
}

// Expands any "--config FILE" into the file's flags, inserted right after the
// subcommand name so explicit command-line flags take precedence (last wins).
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string path;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      XD_CHECK(i + 1 < args.size(), "--config requires a file path");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
    }
  }
  if (!path.empty()) {
    XD_CHECK(!out.empty(), "--config requires a subcommand");
    auto defaults = config_tokens(path);
    out.insert(out.begin() + 1, defaults.begin(), defaults.end());
  }
  return out;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Cross-domain (thermal/visible) face identification pipeline"};
  app.require_subcommand(1);

  // ---- synth-data ----
  auto* sd = app.add_subcommand(
      "synth-data", "Generate a paired visible/thermal synthetic dataset");
  sd->add_option("--config", "Key=value defaults file (flags override)");
  
  struct {
    int subjects = 60;
    int image_size = 96;
    std::string conditions =
        "baseline,baseline,baseline,baseline,expression,pose";
    std::uint64_t seed = 1;
    std::string out = "data";
  } sd_opt;
  sd->add_option("--subjects", sd_opt.subjects, "Number of synthetic subjects");
  sd->add_option("--image-size", sd_opt.image_size, "Rendered image size");
  sd->add_option("--conditions", sd_opt.conditions,
                 "Per-image condition tags (csv), one image per tag per domain");
  sd->add_option("--seed", sd_opt.seed, "Generator seed");
  sd->add_option("--out", sd_opt.out, "Output directory");
  sd->callback([&] {
    ensure_out_dir(sd_opt.out);
    GenerateConfig cfg;
    cfg.n_subjects = sd_opt.subjects;
    cfg.image_size = sd_opt.image_size;
    cfg.conditions = parse_string_csv(sd_opt.conditions);
    cfg.seed = sd_opt.seed;
    Manifest m = generate(cfg, sd_opt.out);
    write_config_echo(sd_opt.out,
                      {{"subjects", std::to_string(sd_opt.subjects)},
                       {"image-size", std::to_string(sd_opt.image_size)},
                       {"conditions", sd_opt.conditions},
                       {"seed", std::to_string(sd_opt.seed)},
                       {"out", sd_opt.out}});
    std::cout << "wrote " << m.size() << " images and "
              << sd_opt.out + "/manifest.jsonl" << "\n";
  });

  // ---- preprocess ----
  auto* pp = app.add_subcommand(
      "preprocess", "Align, band-pass filter, and standardize manifest images");
  pp->add_option("--config", "Key=value defaults file (flags override)");
  
  struct {
    std::string manifest;
    int crop = 64;
    double sigma1 = 1.0, sigma2 = 2.0;
    std::string out = "prep";
  } pp_opt;
  pp->add_option("--manifest", pp_opt.manifest, "Input dataset manifest")
      ->required();
  pp->add_option("--crop", pp_opt.crop, "Aligned face crop size in pixels");
  pp->add_option("--sigma1", pp_opt.sigma1, "Inner Gaussian sigma");
  pp->add_option("--sigma2", pp_opt.sigma2, "Outer Gaussian sigma");
  pp->add_option("--out", pp_opt.out, "Output directory");
  pp->callback([&] {
    ensure_out_dir(pp_opt.out);
    Manifest m = load_manifest(pp_opt.manifest);
    Manifest out_m = m;
    for (std::size_t i = 0; i < m.size(); ++i) {
      TensorPtr t = preprocess_record(m[i], pp_opt.crop, pp_opt.sigma1,
                                      pp_opt.sigma2);
      std::string stem = fs::path(m[i].path).stem().string();
      std::string out_path = pp_opt.out + "/" + stem + ".xdt";
      write_tensor_file(out_path, *t);
      out_m[i].path = out_path;
    }
    write_manifest(pp_opt.out + "/manifest.jsonl", out_m);
    write_config_echo(pp_opt.out, {{"manifest", pp_opt.manifest},
                                   {"crop", std::to_string(pp_opt.crop)},
                                   {"sigma1", fmt_double(pp_opt.sigma1)},
                                   {"sigma2", fmt_double(pp_opt.sigma2)},
                                   {"out", pp_opt.out}});
    std::cout << "wrote " << out_m.size() << " tensors and "
              << pp_opt.out + "/manifest.jsonl" << "\n";
  });

  // ---- pretrain ----
  auto* pt = app.add_subcommand(
      "pretrain", "Train the within-domain identity classifier trunk");
  pt->add_option("--config", "Key=value defaults file (flags override)");
  
  struct {
    std::string manifest;
    std::string blocks = "32,64,128,256";
    int depth = 3;
    int epochs = 30;
    int batch = 16;
    double lr = 1e-3;
    std::string direction = "v_to_t";
    int rst_hidden = 200;
    int detector_hidden = 16;
    std::uint64_t seed = 1;
    std::string out = "pretrain";
    ProtocolFlags proto;
  } pt_opt;
  pt->add_option("--manifest", pt_opt.manifest, "Input dataset manifest")
      ->required();
  pt->add_option("--blocks", pt_opt.blocks, "Trunk block widths (csv)");
  pt->add_option("--depth", pt_opt.depth, "Trunk truncation depth");
  pt->add_option("--epochs", pt_opt.epochs, "Training epochs");
  pt->add_option("--batch", pt_opt.batch, "Batch size");
  pt->add_option("--lr", pt_opt.lr, "Adam learning rate");
  pt->add_option("--direction", pt_opt.direction,
                 "Adaptation direction: v_to_t | t_to_v");
  pt->add_option("--rst-hidden", pt_opt.rst_hidden,
                 "Residual mapping hidden width");
  pt->add_option("--detector-hidden", pt_opt.detector_hidden,
                 "Domain detector hidden width");
  pt->add_option("--seed", pt_opt.seed, "Training seed");
  pt->add_option("--out", pt_opt.out, "Output directory");
  pt_opt.proto.attach(pt);
  pt->callback([&] {
    ensure_out_dir(pt_opt.out);
    check_crop_depth(pt_opt.proto.crop, pt_opt.depth);
    Direction dir = parse_direction(pt_opt.direction);
    Manifest m = load_manifest(pt_opt.manifest);
    ProtocolData data = build_protocol(m, pt_opt.proto.to_config(pt_opt.seed, dir));
    TrunkConfig tc{parse_int_csv(pt_opt.blocks), pt_opt.depth,
                   pt_opt.proto.crop};
    TrainConfig cfg;
    cfg.epochs = pt_opt.epochs;
    cfg.batch_size = pt_opt.batch;
    cfg.seed = pt_opt.seed;
    cfg.optimizer.lr = pt_opt.lr;
    cfg.direction = dir;
    PretrainResult pre = pretrain_trunk(data.train_target, tc, cfg);
    ModelBundle b = bundle_from_pretrain(pre, dir, pt_opt.seed,
                                         pt_opt.rst_hidden,
                                         pt_opt.detector_hidden);
    save_checkpoint(b, pt_opt.out + "/pretrain.xdc");
    pre.report.write(pt_opt.out + "/pretrain_report.txt");
    std::vector<std::pair<std::string, std::string>> kv{
        {"manifest", pt_opt.manifest},
        {"blocks", pt_opt.blocks},
        {"depth", std::to_string(pt_opt.depth)},
        {"epochs", std::to_string(pt_opt.epochs)},
        {"batch", std::to_string(pt_opt.batch)},
        {"lr", fmt_double(pt_opt.lr)},
        {"direction", pt_opt.direction},
        {"rst-hidden", std::to_string(pt_opt.rst_hidden)},
        {"detector-hidden", std::to_string(pt_opt.detector_hidden)},
        {"seed", std::to_string(pt_opt.seed)},
        {"out", pt_opt.out}};
    pt_opt.proto.echo(kv);
    write_config_echo(pt_opt.out, kv);
    std::cout << "wrote " << pt_opt.out + "/pretrain.xdc" << "\n";
  });

  // ---- train ----
  auto* tr = app.add_subcommand(
      "train", "Adapt the mapping and detector on cross-domain pairs");
  tr->add_option("--config", "Key=value defaults file (flags override)");
  
  struct {
    std::string manifest;
    std::string pretrained;
    double lambda = 0.25;
    std::string direction;  // empty -> take from checkpoint
    int epochs = 40;
    int batch = 16;
    double lr = 1e-3;
    int alternation = 1;
    int rst_hidden = 200;
    int detector_hidden = 16;
    std::uint64_t seed = 1;
    std::string out = "train";
    ProtocolFlags proto;
  } tr_opt;
  tr->add_option("--manifest", tr_opt.manifest, "Input dataset manifest")
      ->required();
  tr->add_option("--pretrained", tr_opt.pretrained,
                 "Checkpoint written by the pretrain stage")
      ->required();
  tr->add_option("--lambda", tr_opt.lambda,
                 "Weight of the domain-invariance term");
  tr->add_option("--direction", tr_opt.direction,
                 "Adaptation direction (defaults to the checkpoint's)");
  tr->add_option("--epochs", tr_opt.epochs, "Training epochs");
  tr->add_option("--batch", tr_opt.batch, "Batch size");
  tr->add_option("--lr", tr_opt.lr, "Adam learning rate");
  tr->add_option("--alternation", tr_opt.alternation,
                 "Mapping update steps per batch (0 freezes the mapping)");
  tr->add_option("--rst-hidden", tr_opt.rst_hidden,
                 "Residual mapping hidden width");
  tr->add_option("--detector-hidden", tr_opt.detector_hidden,
                 "Domain detector hidden width");
  tr->add_option("--seed", tr_opt.seed, "Training seed");
  tr->add_option("--out", tr_opt.out, "Output directory");
  tr_opt.proto.attach(tr);
  tr->callback([&] {
    ensure_out_dir(tr_opt.out);
    ModelBundle pre_bundle = load_checkpoint(tr_opt.pretrained);
    Direction dir = tr_opt.direction.empty()
                        ? pre_bundle.direction
                        : parse_direction(tr_opt.direction);
    XD_CHECK(dir == pre_bundle.direction,
             "--direction " + direction_name(dir) +
                 " does not match checkpoint direction " +
                 direction_name(pre_bundle.direction));
    XD_CHECK(tr_opt.proto.crop == pre_bundle.trunk_cfg.input_size,
             "--crop " + std::to_string(tr_opt.proto.crop) +
                 " does not match checkpoint input size " +
                 std::to_string(pre_bundle.trunk_cfg.input_size));
    Manifest m = load_manifest(tr_opt.manifest);
    ProtocolData data = build_protocol(m, tr_opt.proto.to_config(tr_opt.seed, dir));
    PretrainResult pre;
    pre.trunk_cfg = pre_bundle.trunk_cfg;
    pre.trunk = pre_bundle.classifier_trunk();
    pre.compression = pre_bundle.compression;
    pre.head = pre_bundle.head;
    pre.n_identities = pre_bundle.n_identities;
    XD_CHECK(data.n_identities == pre.n_identities,
             "manifest yields " + std::to_string(data.n_identities) +
                 " training identities but the checkpoint was trained on " +
                 std::to_string(pre.n_identities));
    TrainConfig cfg;
    cfg.epochs = tr_opt.epochs;
    cfg.batch_size = tr_opt.batch;
    cfg.seed = tr_opt.seed;
    cfg.optimizer.lr = tr_opt.lr;
    cfg.lambda = tr_opt.lambda;
    cfg.direction = dir;
    cfg.alternation = tr_opt.alternation;
    cfg.rst_hidden = tr_opt.rst_hidden;
    cfg.detector_hidden = tr_opt.detector_hidden;
    TrainReport report;
    ModelBundle trained = train_adaptation(data.train_pairs, pre, cfg, &report);
    save_checkpoint(trained, tr_opt.out + "/model.xdc");
    report.write(tr_opt.out + "/train_report.txt");
    std::vector<std::pair<std::string, std::string>> kv{
        {"manifest", tr_opt.manifest},
        {"pretrained", tr_opt.pretrained},
        {"lambda", fmt_double(tr_opt.lambda)},
        {"direction", direction_name(dir)},
        {"epochs", std::to_string(tr_opt.epochs)},
        {"batch", std::to_string(tr_opt.batch)},
        {"lr", fmt_double(tr_opt.lr)},
        {"alternation", std::to_string(tr_opt.alternation)},
        {"rst-hidden", std::to_string(tr_opt.rst_hidden)},
        {"detector-hidden", std::to_string(tr_opt.detector_hidden)},
        {"seed", std::to_string(tr_opt.seed)},
        {"out", tr_opt.out}};
    tr_opt.proto.echo(kv);
    write_config_echo(tr_opt.out, kv);
    std::cout << "wrote " << tr_opt.out + "/model.xdc" << "\n";
  });

  // ---- eval ----
  auto* ev = app.add_subcommand(
      "eval", "Score thermal probes against a visible gallery and report CMC");
  ev->add_option("--config", "Key=value defaults file (flags override)");
  
  struct {
    std::string manifest;
    std::string checkpoint;
    int scenario = 0;  // 0 -> take from checkpoint
    std::uint64_t seed = 1;
    std::string out = "eval";
    ProtocolFlags proto;
  } ev_opt;
  ev->add_option("--manifest", ev_opt.manifest, "Input dataset manifest")
      ->required();
  ev->add_option("--checkpoint", ev_opt.checkpoint,
                 "Trained model checkpoint (.xdc)")
      ->required();
  ev->add_option("--scenario", ev_opt.scenario,
                 "1 = map gallery at enrollment, 2 = map probes at match time");
  ev->add_option("--seed", ev_opt.seed, "Protocol split seed");
  ev->add_option("--out", ev_opt.out, "Output directory");
  ev_opt.proto.attach(ev);
  ev->callback([&] {
    ensure_out_dir(ev_opt.out);
    ModelBundle bundle = load_checkpoint(ev_opt.checkpoint);
    if (ev_opt.scenario != 0) {
      XD_CHECK(ev_opt.scenario == 1 || ev_opt.scenario == 2,
               "--scenario must be 1 or 2");
      Direction want = ev_opt.scenario == 1 ? Direction::VisToThm
                                            : Direction::ThmToVis;
      XD_CHECK(want == bundle.direction,
               "--scenario " + std::to_string(ev_opt.scenario) +
                   " does not match checkpoint direction " +
                   direction_name(bundle.direction));
    }
    XD_CHECK(ev_opt.proto.crop == bundle.trunk_cfg.input_size,
             "--crop " + std::to_string(ev_opt.proto.crop) +
                 " does not match checkpoint input size " +
                 std::to_string(bundle.trunk_cfg.input_size));
    Manifest m = load_manifest(ev_opt.manifest);
    ProtocolData data =
        build_protocol(m, ev_opt.proto.to_config(ev_opt.seed, bundle.direction));
    Representer rep = bundle_representer(bundle);
    Gallery g = enroll(data.gallery, rep);
    CMCResult result = cmc(score_all(data.probes, g, rep));
    write_cmc_csv(ev_opt.out + "/cmc.csv", result);
    write_cmc_svg(ev_opt.out + "/cmc.svg", result);
    std::vector<std::pair<std::string, std::string>> kv{
        {"manifest", ev_opt.manifest},
        {"checkpoint", ev_opt.checkpoint},
        {"scenario",
         std::to_string(bundle.direction == Direction::VisToThm ? 1 : 2)},
        {"seed", std::to_string(ev_opt.seed)},
        {"out", ev_opt.out}};
    ev_opt.proto.echo(kv);
    write_config_echo(ev_opt.out, kv);
    std::printf("rank1=%.6f rank5=%.6f probes=%d\n", result.rank(1),
                result.rank(std::min<int>(5, static_cast<int>(result.rates.size()))),
                result.probe_count);
  });

  // ---- ablate ----
  auto* ab = app.add_subcommand(
      "ablate", "Sweep trunk depth, feature method, and lambda");
  ab->add_option("--config", "Key=value defaults file (flags override)");
  
  struct {
    std::string manifest;
    std::string depths = "1,2,3,4";
    std::string methods =
        "learned-compress,pca-64,global-avg-pool,patch-baseline";
    std::string lambdas = "0.25";
    std::string blocks = "32,64,128,256";
    int pretrain_epochs = 10;
    int adapt_epochs = 10;
    int batch = 16;
    int pca_components = 64;
    int patch_size = 16;
    int patch_stride = 8;
    std::string direction = "v_to_t";
    std::uint64_t seed = 1;
    std::string out = "ablate";
    ProtocolFlags proto;
  } ab_opt;
  ab->add_option("--manifest", ab_opt.manifest, "Input dataset manifest")
      ->required();
  ab->add_option("--depths", ab_opt.depths, "Trunk depths to sweep (csv)");
  ab->add_option("--methods", ab_opt.methods, "Feature methods to sweep (csv)");
  ab->add_option("--lambdas", ab_opt.lambdas,
                 "Domain-invariance weights to sweep (csv)");
  ab->add_option("--blocks", ab_opt.blocks, "Trunk block widths (csv)");
  ab->add_option("--pretrain-epochs", ab_opt.pretrain_epochs,
                 "Pretraining epochs per depth");
  ab->add_option("--adapt-epochs", ab_opt.adapt_epochs,
                 "Adaptation epochs per cell");
  ab->add_option("--batch", ab_opt.batch, "Batch size");
  ab->add_option("--pca-components", ab_opt.pca_components,
                 "Components for the PCA compression cell");
  ab->add_option("--patch-size", ab_opt.patch_size, "Patch baseline patch size");
  ab->add_option("--patch-stride", ab_opt.patch_stride,
                 "Patch baseline stride");
  ab->add_option("--direction", ab_opt.direction,
                 "Adaptation direction: v_to_t | t_to_v");
  ab->add_option("--seed", ab_opt.seed, "Sweep seed");
  ab->add_option("--out", ab_opt.out, "Output directory");
  ab_opt.proto.attach(ab);
  ab->callback([&] {
    ensure_out_dir(ab_opt.out);
    Manifest m = load_manifest(ab_opt.manifest);
    AblateConfig cfg;
    cfg.depths = parse_int_csv(ab_opt.depths);
    cfg.methods = parse_string_csv(ab_opt.methods);
    cfg.lambdas = parse_double_csv(ab_opt.lambdas);
    cfg.blocks = parse_int_csv(ab_opt.blocks);
    cfg.crop = ab_opt.proto.crop;
    cfg.n_train_subjects = ab_opt.proto.train_subjects;
    cfg.n_gallery_subjects = ab_opt.proto.gallery_subjects;
    cfg.gallery_templates = ab_opt.proto.templates;
    cfg.pretrain_epochs = ab_opt.pretrain_epochs;
    cfg.adapt_epochs = ab_opt.adapt_epochs;
    cfg.batch_size = ab_opt.batch;
    cfg.pca_components = ab_opt.pca_components;
    cfg.patch_size = ab_opt.patch_size;
    cfg.patch_stride = ab_opt.patch_stride;
    cfg.seed = ab_opt.seed;
    cfg.sigma1 = ab_opt.proto.sigma1;
    cfg.sigma2 = ab_opt.proto.sigma2;
    cfg.direction = parse_direction(ab_opt.direction);
    std::vector<AblateCell> cells = ablate(m, cfg);
    write_ablate_csv(ab_opt.out + "/ablate.csv", cells);
    std::vector<std::pair<std::string, std::string>> kv{
        {"manifest", ab_opt.manifest},
        {"depths", ab_opt.depths},
        {"methods", ab_opt.methods},
        {"lambdas", ab_opt.lambdas},
        {"blocks", ab_opt.blocks},
        {"pretrain-epochs", std::to_string(ab_opt.pretrain_epochs)},
        {"adapt-epochs", std::to_string(ab_opt.adapt_epochs)},
        {"batch", std::to_string(ab_opt.batch)},
        {"pca-components", std::to_string(ab_opt.pca_components)},
        {"patch-size", std::to_string(ab_opt.patch_size)},
        {"patch-stride", std::to_string(ab_opt.patch_stride)},
        {"direction", ab_opt.direction},
        {"seed", std::to_string(ab_opt.seed)},
        {"out", ab_opt.out}};
    ab_opt.proto.echo(kv);
    write_config_echo(ab_opt.out, kv);
    std::cout << "wrote " << ab_opt.out + "/ablate.csv" << "\n";
  });

  // ---- plot-cmc ----
  auto* pc = app.add_subcommand("plot-cmc",
                                "Render a CMC CSV as an SVG line chart");
  pc->add_option("--config", "Key=value defaults file (flags override)");
  
  struct {
    std::string csv;
    std::string out = "plot";
  } pc_opt;
  pc->add_option("--csv", pc_opt.csv, "CMC CSV (rank,id_rate)")->required();
  pc->add_option("--out", pc_opt.out, "Output directory");
  pc->callback([&] {
    ensure_out_dir(pc_opt.out);
    CMCResult r = read_cmc_csv(pc_opt.csv);
    write_cmc_svg(pc_opt.out + "/cmc.svg", r);
    write_config_echo(pc_opt.out, {{"csv", pc_opt.csv}, {"out", pc_opt.out}});
    std::cout << "wrote " << pc_opt.out + "/cmc.svg" << "\n";
  });

  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
    for (CLI::Option* opt : sub->get_options())
      if (opt->get_expected_min() > 0) opt->take_last();

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());  // CLI11 consumes back-to-front
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace xdomid
