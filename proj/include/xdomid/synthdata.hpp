#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xdomid/imageproc.hpp"

namespace xdomid {

struct ManifestRecord {
  std::string path;
  int subject = 0;
  std::string domain;     // "vis" | "thm"
  std::string condition;  // "baseline" | "expression" | "pose"
  Landmarks5 landmarks;
};

using Manifest = std::vector<ManifestRecord>;

struct GenerateConfig {
  int n_subjects = 60;
  // Condition of each image index, per subject per domain; its length is the
  // number of images per subject per domain.
  std::vector<std::string> conditions{"baseline", "baseline", "baseline",
                                      "baseline", "expression", "pose"};
  int image_size = 96;
  std::uint64_t seed = 1;
};

// Renders paired visible/thermal faces with analytic landmarks and writes
// PGM files plus a JSON-lines manifest (<out_dir>/manifest.jsonl). The same
// (subject, index) pair shares geometry across domains; the thermal render
// is blurred, intensity-inverted, texture-suppressed and carries independent
// additive noise. Byte-identical output for identical seeds.
Manifest generate(const GenerateConfig& cfg, const std::string& out_dir);

Manifest load_manifest(const std::string& path);
void write_manifest(const std::string& path, const Manifest& manifest);

struct SplitResult {
  Manifest train;    // all records of training subjects, both domains
  Manifest gallery;  // baseline visible records of gallery subjects
  Manifest probes;   // all thermal records of gallery subjects
  std::vector<int> train_subjects;
  std::vector<int> gallery_subjects;
};

// Disjoint train/gallery subject assignment, deterministic per seed.
SplitResult split(const Manifest& manifest, int n_train_subjects,
                  int n_gallery_subjects, int gallery_templates_per_subject,
                  std::uint64_t seed);

}  // namespace xdomid
