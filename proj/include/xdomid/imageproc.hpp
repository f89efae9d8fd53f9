#pragma once

#include <array>
#include <string>
#include <vector>

#include "xdomid/common.hpp"
#include "xdomid/tensor.hpp"

namespace xdomid {

// Grayscale f64 image, pixel range [0,1] after load. DoG output leaves the
// range but stays finite.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;  // row-major

  Image() = default;
  Image(int h, int w, double fill = 0.0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {
    XD_CHECK(h >= 1 && w >= 1, "image dimensions must be >= 1");
  }
  double& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

struct Point2 {
  double x = 0.0, y = 0.0;
};

// eye-L, eye-R, nose-base, mouth-L, mouth-R, in that order.
using Landmarks5 = std::array<Point2, 5>;

// x' = s·R(θ)·x + t, stored in closed form. No reflection component.
struct SimilarityTransform {
  double scale = 1.0;
  double rotation = 0.0;  // radians
  double tx = 0.0, ty = 0.0;

  Point2 apply(const Point2& p) const;
  SimilarityTransform inverse() const;
  // 2×3 matrix rows: [a -b tx; b a ty] with a = s·cosθ, b = s·sinθ.
  std::array<double, 6> matrix() const;
};

// Least-squares similarity (scale, rotation, translation) mapping src toward
// dst; closed-form, reflection disallowed.
SimilarityTransform estimate_similarity(const Landmarks5& src,
                                        const Landmarks5& dst);

// Bilinear sampling under the inverse transform; out-of-bounds reads as 0.
Image warp(const Image& image, const SimilarityTransform& xform, int out_h,
           int out_w);

// Separable Gaussian blur, ±3σ truncated and renormalized, clamp-to-edge.
Image gaussian_blur(const Image& image, double sigma);

// G(σ1)∗I − G(σ2)∗I with ±3σ truncated, renormalized kernels, 0 < σ1 < σ2.
Image dog_filter(const Image& image, double sigma1, double sigma2);

// Fractional canonical landmark template, scaled by out_size.
Landmarks5 canonical_landmarks(int out_size);

// Aligns the five landmarks onto the canonical template and crops to
// out_size×out_size.
Image crop_face(const Image& image, const Landmarks5& landmarks, int out_size);

// PGM "P5", 8- or 16-bit accepted on read; writes are always 8-bit.
Image read_image(const std::string& path);
void write_image(const std::string& path, const Image& image);

// Zero-mean, unit-variance copy (constant images map to all-zero), then
// packaged as an H×W×1 tensor for the trunks.
TensorPtr image_to_tensor(const Image& image);
Image standardize(const Image& image);

}  // namespace xdomid
