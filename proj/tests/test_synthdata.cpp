#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "test_util.hpp"
#include "xdomid/imageproc.hpp"
#include "xdomid/synthdata.hpp"

using namespace xdomid;
using namespace xdomid::testutil;

namespace {

GenerateConfig small_cfg(std::uint64_t seed = 1) {
  GenerateConfig cfg;
  cfg.n_subjects = 5;
  cfg.conditions = {"baseline", "baseline", "expression", "pose"};
  cfg.image_size = 96;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("generation is a pure function of the seed (byte-identical)") {
  std::string dir = scratch_dir("gen_det");
  Manifest m1 = generate(small_cfg(), dir);
  std::string manifest1 = slurp(dir + "/manifest.jsonl");
  std::string img1 = slurp(m1.front().path);
  std::string imgN = slurp(m1.back().path);

  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  Manifest m2 = generate(small_cfg(), dir);
  CHECK(slurp(dir + "/manifest.jsonl") == manifest1);
  CHECK(slurp(m2.front().path) == img1);
  CHECK(slurp(m2.back().path) == imgN);

  std::string dir3 = scratch_dir("gen_det3");
  generate(small_cfg(9), dir3);
  CHECK(slurp(dir3 + "/manifest.jsonl") != manifest1);
}

TEST_CASE("manifest structure: pairing, conditions, domains") {
  std::string dir = scratch_dir("gen_struct");
  GenerateConfig cfg = small_cfg();
  Manifest m = generate(cfg, dir);
  REQUIRE(m.size() == 5 * 4 * 2);  // subjects x conditions x domains

  std::set<std::string> domains;
  for (const auto& r : m) domains.insert(r.domain);
  CHECK(domains == std::set<std::string>{"thm", "vis"});

  // Same (subject, index) shares geometry across domains: identical landmarks.
  for (int s = 0; s < 5; ++s)
    for (std::size_t i = 0; i < cfg.conditions.size(); ++i) {
      const ManifestRecord *vis = nullptr, *thm = nullptr;
      for (const auto& r : m) {
        if (r.subject != s) continue;
        std::string want = "_i0" + std::to_string(i) + "_";
        if (r.path.find(want) == std::string::npos) continue;
        (r.domain == "vis" ? vis : thm) = &r;
      }
      REQUIRE(vis != nullptr);
      REQUIRE(thm != nullptr);
      CHECK(vis->condition == cfg.conditions[i]);
      for (int k = 0; k < 5; ++k) {
        CHECK(vis->landmarks[k].x == thm->landmarks[k].x);
        CHECK(vis->landmarks[k].y == thm->landmarks[k].y);
      }
    }
}

TEST_CASE("landmarks carry face geometry; pose shears them") {
  std::string dir = scratch_dir("gen_lm");
  Manifest m = generate(small_cfg(), dir);
  for (const auto& r : m) {
    const auto& lm = r.landmarks;
    CHECK(lm[0].x < lm[1].x);             // left eye left of right eye
    CHECK(lm[0].y < lm[2].y);             // eyes above nose base
    CHECK(lm[2].y < lm[3].y);             // nose above mouth
    CHECK(lm[3].x < lm[4].x);             // mouth corners ordered
    for (int k = 0; k < 5; ++k) {
      CHECK(lm[k].x > 0);
      CHECK(lm[k].x < 96);
      CHECK(lm[k].y > 0);
      CHECK(lm[k].y < 96);
    }
    if (r.condition == "pose") {
      // Shear moves eye midpoint off the vertical through the mouth midpoint.
      double eye_mid = 0.5 * (lm[0].x + lm[1].x);
      double mouth_mid = 0.5 * (lm[3].x + lm[4].x);
      CHECK(std::fabs(eye_mid - mouth_mid) > 0.5);
    }
  }
}

TEST_CASE("rendered eyes sit at the emitted landmarks (darker than forehead)") {
  std::string dir = scratch_dir("gen_pix");
  Manifest m = generate(small_cfg(), dir);
  for (const auto& r : m) {
    if (r.domain != "vis" || r.condition != "baseline") continue;
    Image img = read_image(r.path);
    for (int e = 0; e < 2; ++e) {
      int ex = static_cast<int>(std::lround(r.landmarks[e].x));
      int ey = static_cast<int>(std::lround(r.landmarks[e].y));
      double eye = img.at(ey, ex);
      double forehead = img.at(ey - 7, ex);  // above the eye, inside the head
      CHECK(eye < forehead - 0.05);
    }
  }
}

TEST_CASE("thermal domain inverts intensity relative to visible") {
  std::string dir = scratch_dir("gen_thm");
  Manifest m = generate(small_cfg(), dir);
  int pairs = 0;
  for (const auto& rv : m) {
    if (rv.domain != "vis") continue;
    std::string thm_path = rv.path;
    auto pos = thm_path.rfind("_vis.pgm");
    thm_path.replace(pos, 8, "_thm.pgm");
    Image v = read_image(rv.path), t = read_image(thm_path);
    // Pearson correlation between the two domains should be clearly negative.
    // The non-monotone emissivity curve folds part of the intensity range, so
    // the correlation is weaker than a pure inversion would give; measured
    // values sit around -0.55 to -0.65.
    double mv = 0, mt = 0;
    for (std::size_t i = 0; i < v.pixels.size(); ++i) {
      mv += v.pixels[i];
      mt += t.pixels[i];
    }
    mv /= v.pixels.size();
    mt /= t.pixels.size();
    double num = 0, dv = 0, dt = 0;
    for (std::size_t i = 0; i < v.pixels.size(); ++i) {
      num += (v.pixels[i] - mv) * (t.pixels[i] - mt);
      dv += (v.pixels[i] - mv) * (v.pixels[i] - mv);
      dt += (t.pixels[i] - mt) * (t.pixels[i] - mt);
    }
    CHECK(num / std::sqrt(dv * dt) < -0.45);
    ++pairs;
  }
  CHECK(pairs == 20);
}

TEST_CASE("manifest round-trip and loader validation") {
  std::string dir = scratch_dir("man_rt");
  Manifest m = generate(small_cfg(), dir);
  Manifest back = load_manifest(dir + "/manifest.jsonl");
  REQUIRE(back.size() == m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(back[i].path == m[i].path);
    CHECK(back[i].subject == m[i].subject);
    CHECK(back[i].domain == m[i].domain);
    CHECK(back[i].condition == m[i].condition);
    CHECK(back[i].landmarks[3].x == m[i].landmarks[3].x);
  }

  auto write_line = [&](const std::string& name, const std::string& line) {
    std::ofstream out(dir + "/" + name, std::ios::binary);
    out << line << "\n";
    return dir + "/" + name;
  };
  std::string good_img = m.front().path;
  std::string lm =
      R"([[1,2],[3,4],[5,6],[7,8],[9,10]])";
  CHECK_THROWS_WITH_AS(
      load_manifest(write_line(
          "bad_dom.jsonl", R"({"path":")" + good_img +
              R"(","subject":0,"domain":"xray","condition":"baseline","landmarks":)" +
              lm + "}")),
      doctest::Contains(":1:"), std::runtime_error);
  CHECK_THROWS(load_manifest(write_line(
      "bad_lm.jsonl", R"({"path":")" + good_img +
          R"(","subject":0,"domain":"vis","condition":"baseline","landmarks":[[1,2]]})")));
  CHECK_THROWS(load_manifest(write_line(
      "bad_path.jsonl",
      R"({"path":"/nonexistent.pgm","subject":0,"domain":"vis","condition":"baseline","landmarks":)" +
          lm + "}")));
  CHECK_THROWS(load_manifest(write_line("bad_json.jsonl", "{not json")));
}

TEST_CASE("protocol split: disjoint subjects, correct counts, seed-driven") {
  std::string dir = scratch_dir("split");
  GenerateConfig cfg;
  cfg.n_subjects = 12;
  cfg.conditions = {"baseline", "baseline", "baseline", "baseline",
                    "expression", "pose"};
  cfg.image_size = 96;
  cfg.seed = 2;
  Manifest m = generate(cfg, dir);

  SplitResult sp = split(m, 6, 6, 4, 1);
  std::set<int> train_ids, gal_ids;
  for (const auto& r : sp.train) train_ids.insert(r.subject);
  for (const auto& r : sp.gallery) gal_ids.insert(r.subject);
  CHECK(train_ids.size() == 6);
  CHECK(gal_ids.size() == 6);
  for (int id : train_ids) CHECK(gal_ids.count(id) == 0);

  CHECK(sp.gallery.size() == 6 * 4);  // templates per gallery subject
  for (const auto& r : sp.gallery) {
    CHECK(r.domain == "vis");
    CHECK(r.condition == "baseline");
  }
  CHECK(sp.probes.size() == 6 * 6);  // every thermal image of gallery subjects
  for (const auto& r : sp.probes) {
    CHECK(r.domain == "thm");
    CHECK(gal_ids.count(r.subject) == 1);
  }
  // Exhaustive partition: no subject dropped.
  CHECK(train_ids.size() + gal_ids.size() == 12);

  SplitResult sp2 = split(m, 6, 6, 4, 1);
  CHECK(sp2.train.size() == sp.train.size());
  std::set<int> train2;
  for (const auto& r : sp2.train) train2.insert(r.subject);
  CHECK(train2 == train_ids);  // same seed -> same assignment

  bool differs = false;
  for (std::uint64_t s = 2; s <= 9 && !differs; ++s) {
    SplitResult alt = split(m, 6, 6, 4, s);
    std::set<int> ids;
    for (const auto& r : alt.train) ids.insert(r.subject);
    differs = ids != train_ids;
  }
  CHECK(differs);  // some other seed assigns differently

  CHECK_THROWS(split(m, 10, 6, 4, 1));  // more subjects than exist
  CHECK_THROWS(split(m, 6, 6, 9, 1));   // more templates than baseline images
}
