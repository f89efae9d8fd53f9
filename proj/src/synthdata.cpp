#include "xdomid/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "xdomid/rng.hpp"

namespace xdomid {

namespace {

namespace fs = std::filesystem;

// Face-layout parameters derived purely from (seed, subject).
struct FaceLatent {
  double ax, ay;              // head ellipse semi-axes
  double eye_dx, eye_dy;      // eye offsets from center
  double eye_r;
  double nose_drop;           // nose base below center
  double mouth_dy, mouth_hw;  // mouth vertical offset and half width
  double skin;                // base intensity
  double tex_fx, tex_fy, tex_phase, tex_amp;
};

FaceLatent make_latent(std::uint64_t seed, int subject) {
  Rng rng(Rng::key({seed, 0x1dull, static_cast<std::uint64_t>(subject)}));
  FaceLatent f;
  f.ax = rng.uniform(25.0, 33.0);
  f.ay = rng.uniform(33.0, 41.0);
  f.eye_dx = rng.uniform(9.0, 14.0);
  f.eye_dy = rng.uniform(-13.0, -8.0);
  f.eye_r = rng.uniform(2.5, 4.0);
  f.nose_drop = rng.uniform(4.0, 9.0);
  f.mouth_dy = rng.uniform(14.0, 19.0);
  f.mouth_hw = rng.uniform(6.0, 10.0);
  f.skin = rng.uniform(0.55, 0.80);
  f.tex_fx = rng.uniform(0.25, 0.65);
  f.tex_fy = rng.uniform(0.25, 0.65);
  f.tex_phase = rng.uniform(0.0, 2.0 * M_PI);
  f.tex_amp = rng.uniform(0.05, 0.12);
  return f;
}

double smoothstep_in(double d) {  // 1 inside (d<=0), 0 outside (d>=1)
  if (d <= 0.0) return 1.0;
  if (d >= 1.0) return 0.0;
  return 1.0 - d * d * (3.0 - 2.0 * d);
}

struct RenderParams {
  double yaw_shear = 0.0;  // horizontal shear coefficient
  double expr_mouth = 0.0;
  double expr_eye = 0.0;
};

Image render_face(const FaceLatent& f, const RenderParams& rp, int size,
                  double tex_amp_factor) {
  const double cx = size / 2.0, cy = size / 2.0;
  const double mouth_dy = f.mouth_dy + rp.expr_mouth;
  const double mouth_hw = f.mouth_hw * (1.0 + 0.2 * rp.expr_eye);
  const double eye_r = f.eye_r * (1.0 + 0.15 * rp.expr_eye);
  Image img(size, size, 0.05);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      // Pose shear: sample face-local coordinates shifted by the shear.
      double fx = (x - cx) - rp.yaw_shear * (y - cy);
      double fy = y - cy;
      double head = (fx / f.ax) * (fx / f.ax) + (fy / f.ay) * (fy / f.ay);
      if (head > 1.2) continue;
      double v = img.at(y, x);
      double inside = smoothstep_in((head - 0.92) / 0.16);
      double shade = f.skin * (1.0 - 0.25 * (fy / f.ay));
      double tex = tex_amp_factor * f.tex_amp *
                   std::sin(f.tex_fx * fx * 2.0 + f.tex_phase) *
                   std::cos(f.tex_fy * fy * 2.0);
      v = v + inside * (shade + tex - v);
      // Eyes
      for (int side = -1; side <= 1; side += 2) {
        double dx = fx - side * f.eye_dx, dy = fy - f.eye_dy;
        double d = std::sqrt(dx * dx + dy * dy) / eye_r;
        v += smoothstep_in(d - 0.5) * (0.12 - v) * 0.9;
      }
      // Nose ridge, ending at the nose base landmark.
      {
        double dx = std::abs(fx) / 1.6;
        double dy1 = (fy - f.nose_drop) / 2.0;
        double along = fy > f.nose_drop ? dy1 : (fy < f.eye_dy + 4 ? 1e9 : 0.0);
        double d = std::max(dx, std::abs(along));
        v += smoothstep_in(d - 0.4) * (f.skin * 0.55 - v) * 0.6;
      }
      // Mouth
      {
        double dx = fx / mouth_hw, dy = (fy - mouth_dy) / 1.8;
        double d = std::sqrt(dx * dx + dy * dy);
        v += smoothstep_in((d - 0.8) / 0.3) * (0.18 - v) * 0.85;
      }
      img.at(y, x) = std::min(1.0, std::max(0.0, v));
    }
  }
  return img;
}

Landmarks5 latent_landmarks(const FaceLatent& f, const RenderParams& rp,
                            int size) {
  const double cx = size / 2.0, cy = size / 2.0;
  const double mouth_dy = f.mouth_dy + rp.expr_mouth;
  const double mouth_hw = f.mouth_hw * (1.0 + 0.2 * rp.expr_eye);
  auto place = [&](double fx, double fy) -> Point2 {
    return {cx + fx + rp.yaw_shear * fy, cy + fy};
  };
  return {place(-f.eye_dx, f.eye_dy), place(f.eye_dx, f.eye_dy),
          place(0.0, f.nose_drop), place(-mouth_hw, mouth_dy),
          place(mouth_hw, mouth_dy)};
}

}  // namespace

Manifest generate(const GenerateConfig& cfg, const std::string& out_dir) {
  XD_CHECK(cfg.n_subjects >= 2, "generate: need at least 2 subjects, got " +
                                    std::to_string(cfg.n_subjects));
  XD_CHECK(!cfg.conditions.empty(), "generate: empty condition list");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  XD_CHECK(!ec && fs::is_directory(out_dir),
           "generate: cannot create output directory " + out_dir + ": " +
               ec.message());

  Manifest manifest;
  for (int s = 0; s < cfg.n_subjects; ++s) {
    FaceLatent latent = make_latent(cfg.seed, s);
    for (std::size_t i = 0; i < cfg.conditions.size(); ++i) {
      const std::string& cond = cfg.conditions[i];
      RenderParams rp;
      Rng crng(Rng::key({cfg.seed, 0xc0ull, static_cast<std::uint64_t>(s),
                         static_cast<std::uint64_t>(i)}));
      // Per-image appearance jitter, shared across the two domains so the
      // renders of one (subject, index) stay geometrically paired. Without
      // it repeated baseline captures would be pixel-identical. Baseline
      // images keep zero yaw and zero expression; only nuisance appearance
      // (texture phase/strength, head extent, shading, nose ridge) varies.
      FaceLatent jittered = latent;
      jittered.tex_phase = latent.tex_phase + crng.uniform(-0.7, 0.7);
      jittered.tex_amp = latent.tex_amp * crng.uniform(0.85, 1.15);
      jittered.ax = latent.ax * crng.uniform(0.97, 1.03);
      jittered.ay = latent.ay * crng.uniform(0.97, 1.03);
      jittered.skin = latent.skin * crng.uniform(0.95, 1.05);
      jittered.nose_drop = latent.nose_drop + crng.uniform(-0.4, 0.4);
      if (cond == "expression") {
        rp.expr_mouth = crng.uniform(-2.5, 2.5);
        rp.expr_eye = crng.uniform(-1.0, 1.0);
      } else if (cond == "pose") {
        double yaw = crng.uniform(30.0, 60.0) * (crng.uniform() < 0.5 ? -1 : 1);
        rp.yaw_shear = std::tan(yaw * M_PI / 180.0) * 0.45;
      } else {
        XD_CHECK(cond == "baseline", "generate: unknown condition '" + cond + "'");
      }
      Landmarks5 lm = latent_landmarks(jittered, rp, cfg.image_size);

      for (const std::string& domain : {std::string("vis"), std::string("thm")}) {
        Image img;
        if (domain == "vis") {
          img = render_face(jittered, rp, cfg.image_size, 1.0);
          Rng nrng(Rng::key({cfg.seed, 0x7eull, static_cast<std::uint64_t>(s),
                             0ull, static_cast<std::uint64_t>(i)}));
          for (double& v : img.pixels)
            v = std::min(1.0, std::max(0.0, v + 0.01 * nrng.normal()));
        } else {
          img = render_face(jittered, rp, cfg.image_size, 0.1);
          img = gaussian_blur(img, 2.0);
          // Emissivity curve: inverted and locally non-monotone, so the
          // visible->thermal intensity map is not a global affine transform
          // (its local slope changes sign with the operating point).
          for (double& v : img.pixels) {
            double x = v + 0.40 * std::sin(2.0 * M_PI * v);
            x = std::min(1.0, std::max(0.0, x));
            v = 1.0 - 0.9 * x;
          }
          Rng nrng(Rng::key({cfg.seed, 0x7eull, static_cast<std::uint64_t>(s),
                             domain == "vis" ? 0ull : 1ull,
                             static_cast<std::uint64_t>(i)}));
          for (double& v : img.pixels)
            v = std::min(1.0, std::max(0.0, v + 0.025 * nrng.normal()));
        }
        char name[64];
        std::snprintf(name, sizeof(name), "s%03d_i%02zu_%s.pgm", s, i,
                      domain.c_str());
        std::string path = (fs::path(out_dir) / name).string();
        write_image(path, img);
        manifest.push_back({path, s, domain, cond, lm});
      }
    }
  }
  write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), manifest);
  return manifest;
}

void write_manifest(const std::string& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  XD_CHECK(out.good(), "cannot open for write: " + path);
  for (const auto& r : manifest) {
    nlohmann::ordered_json j;
    j["path"] = r.path;
    j["subject"] = r.subject;
    j["domain"] = r.domain;
    j["condition"] = r.condition;
    auto lms = nlohmann::ordered_json::array();
    for (const auto& p : r.landmarks) lms.push_back({p.x, p.y});
    j["landmarks"] = lms;
    out << j.dump() << "\n";
  }
  XD_CHECK(out.good(), "write failed: " + path);
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  XD_CHECK(in.good(), "cannot open: " + path);
  Manifest manifest;
  std::string line;
  int lineno = 0;
  auto where = [&] { return path + ":" + std::to_string(lineno); };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      fail(where() + ": malformed JSON: " + e.what());
    }
    for (const char* key : {"path", "subject", "domain", "condition", "landmarks"})
      XD_CHECK(j.contains(key), where() + ": missing field '" + key + "'");
    ManifestRecord r;
    r.path = j["path"].get<std::string>();
    XD_CHECK(j["subject"].is_number_integer(), where() + ": subject must be an integer");
    r.subject = j["subject"].get<int>();
    r.domain = j["domain"].get<std::string>();
    XD_CHECK(r.domain == "vis" || r.domain == "thm",
             where() + ": domain must be vis or thm, got '" + r.domain + "'");
    r.condition = j["condition"].get<std::string>();
    auto& lms = j["landmarks"];
    XD_CHECK(lms.is_array() && lms.size() == 5,
             where() + ": landmarks must be an array of 5 [x,y] pairs, got " +
                 std::to_string(lms.is_array() ? lms.size() : 0));
    for (int k = 0; k < 5; ++k) {
      XD_CHECK(lms[k].is_array() && lms[k].size() == 2,
               where() + ": landmark " + std::to_string(k) + " is not an [x,y] pair");
      r.landmarks[k] = {lms[k][0].get<double>(), lms[k][1].get<double>()};
    }
    XD_CHECK(fs::exists(r.path), where() + ": dangling path " + r.path);
    manifest.push_back(std::move(r));
  }
  return manifest;
}

SplitResult split(const Manifest& manifest, int n_train_subjects,
                  int n_gallery_subjects, int gallery_templates_per_subject,
                  std::uint64_t seed) {
  std::set<int> subject_set;
  for (const auto& r : manifest) subject_set.insert(r.subject);
  std::vector<int> subjects(subject_set.begin(), subject_set.end());
  XD_CHECK(n_train_subjects >= 1 && n_gallery_subjects >= 1,
           "split: subject counts must be >= 1");
  XD_CHECK(n_train_subjects + n_gallery_subjects <=
               static_cast<int>(subjects.size()),
           "split: requested " + std::to_string(n_train_subjects) + "+" +
               std::to_string(n_gallery_subjects) + " subjects but manifest has " +
               std::to_string(subjects.size()));

  Rng rng(Rng::key({seed, 0x5b11ull}));
  rng.shuffle(subjects);
  std::set<int> train_ids(subjects.begin(), subjects.begin() + n_train_subjects);
  std::set<int> gallery_ids(subjects.begin() + n_train_subjects,
                            subjects.begin() + n_train_subjects + n_gallery_subjects);

  SplitResult out;
  out.train_subjects.assign(train_ids.begin(), train_ids.end());
  out.gallery_subjects.assign(gallery_ids.begin(), gallery_ids.end());
  std::map<int, int> gallery_taken;
  for (const auto& r : manifest) {
    if (train_ids.count(r.subject)) {
      out.train.push_back(r);
    } else if (gallery_ids.count(r.subject)) {
      if (r.domain == "vis" && r.condition == "baseline" &&
          gallery_taken[r.subject] < gallery_templates_per_subject) {
        out.gallery.push_back(r);
        ++gallery_taken[r.subject];
      }
      if (r.domain == "thm") out.probes.push_back(r);
    }
  }
  for (int sid : gallery_ids) {
    XD_CHECK(gallery_taken[sid] == gallery_templates_per_subject,
             "split: subject " + std::to_string(sid) + " has only " +
                 std::to_string(gallery_taken[sid]) +
                 " baseline visible images, need " +
                 std::to_string(gallery_templates_per_subject));
    bool has_probe = false;
    for (const auto& r : out.probes) has_probe |= r.subject == sid;
    XD_CHECK(has_probe, "split: subject " + std::to_string(sid) +
                            " has no thermal probe images");
  }
  return out;
}

}  // namespace xdomid
