#include "xdomid/imageproc.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace xdomid {

Point2 SimilarityTransform::apply(const Point2& p) const {
  double a = scale * std::cos(rotation);
  double b = scale * std::sin(rotation);
  return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty};
}

SimilarityTransform SimilarityTransform::inverse() const {
  XD_CHECK(scale > 0.0, "similarity transform: non-positive scale");
  SimilarityTransform inv;
  inv.scale = 1.0 / scale;
  inv.rotation = -rotation;
  double a = inv.scale * std::cos(inv.rotation);
  double b = inv.scale * std::sin(inv.rotation);
  inv.tx = -(a * tx - b * ty);
  inv.ty = -(b * tx + a * ty);
  return inv;
}

std::array<double, 6> SimilarityTransform::matrix() const {
  double a = scale * std::cos(rotation);
  double b = scale * std::sin(rotation);
  return {a, -b, tx, b, a, ty};
}

SimilarityTransform estimate_similarity(const Landmarks5& src,
                                        const Landmarks5& dst) {
  const int n = 5;
  Point2 cs{0, 0}, cd{0, 0};
  for (int i = 0; i < n; ++i) {
    cs.x += src[i].x; cs.y += src[i].y;
    cd.x += dst[i].x; cd.y += dst[i].y;
  }
  cs.x /= n; cs.y /= n; cd.x /= n; cd.y /= n;

  double sxx = 0.0, sxy = 0.0, norm = 0.0;
  for (int i = 0; i < n; ++i) {
    double ax = src[i].x - cs.x, ay = src[i].y - cs.y;
    double bx = dst[i].x - cd.x, by = dst[i].y - cd.y;
    sxx += ax * bx + ay * by;
    sxy += ax * by - ay * bx;
    norm += ax * ax + ay * ay;
  }
  XD_CHECK(norm > 1e-12, "estimate_similarity: source points are coincident");

  SimilarityTransform t;
  t.rotation = std::atan2(sxy, sxx);
  t.scale = std::hypot(sxx, sxy) / norm;
  XD_CHECK(t.scale > 0.0, "estimate_similarity: degenerate correspondence");
  double a = t.scale * std::cos(t.rotation);
  double b = t.scale * std::sin(t.rotation);
  t.tx = cd.x - (a * cs.x - b * cs.y);
  t.ty = cd.y - (b * cs.x + a * cs.y);
  return t;
}

Image warp(const Image& image, const SimilarityTransform& xform, int out_h,
           int out_w) {
  XD_CHECK(out_h >= 1 && out_w >= 1, "warp: output extents must be >= 1");
  SimilarityTransform inv = xform.inverse();
  Image out(out_h, out_w);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      Point2 p = inv.apply({static_cast<double>(ox), static_cast<double>(oy)});
      int x0 = static_cast<int>(std::floor(p.x));
      int y0 = static_cast<int>(std::floor(p.y));
      double fx = p.x - x0, fy = p.y - y0;
      auto sample = [&](int y, int x) -> double {
        if (y < 0 || y >= image.height || x < 0 || x >= image.width) return 0.0;
        return image.at(y, x);
      };
      double v = (1 - fy) * ((1 - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
                 fy * ((1 - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1));
      out.at(oy, ox) = v;
    }
  }
  return out;
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    total += k[i + radius];
  }
  for (double& v : k) v /= total;
  return k;
}

}  // namespace

// Clamp-to-edge borders preserve constants exactly, so the DoG of a constant
// image is identically zero.
Image gaussian_blur(const Image& img, double sigma) {
  auto k = gaussian_kernel(sigma);
  int radius = (static_cast<int>(k.size()) - 1) / 2;
  Image tmp(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        int xx = std::min(std::max(x + d, 0), img.width - 1);
        acc += k[d + radius] * img.at(y, xx);
      }
      tmp.at(y, x) = acc;
    }
  }
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int d = -radius; d <= radius; ++d) {
        int yy = std::min(std::max(y + d, 0), img.height - 1);
        acc += k[d + radius] * tmp.at(yy, x);
      }
      out.at(y, x) = acc;
    }
  }
  return out;
}

Image dog_filter(const Image& image, double sigma1, double sigma2) {
  XD_CHECK(sigma1 > 0.0 && sigma2 > sigma1,
           "dog_filter: require 0 < sigma1 < sigma2, got sigma1=" +
               std::to_string(sigma1) + " sigma2=" + std::to_string(sigma2));
  Image a = gaussian_blur(image, sigma1);
  Image b = gaussian_blur(image, sigma2);
  Image out(image.height, image.width);
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = a.pixels[i] - b.pixels[i];
  return out;
}

Landmarks5 canonical_landmarks(int out_size) {
  double s = static_cast<double>(out_size);
  return {Point2{0.30 * s, 0.38 * s}, Point2{0.70 * s, 0.38 * s},
          Point2{0.50 * s, 0.60 * s}, Point2{0.35 * s, 0.78 * s},
          Point2{0.65 * s, 0.78 * s}};
}

Image crop_face(const Image& image, const Landmarks5& landmarks, int out_size) {
  XD_CHECK(out_size >= 1, "crop_face: out_size must be >= 1");
  SimilarityTransform xf =
      estimate_similarity(landmarks, canonical_landmarks(out_size));
  return warp(image, xf, out_size, out_size);
}

namespace {

int pgm_token(std::istream& in, const std::string& path) {
  // Skips whitespace and '#' comments; returns the next integer.
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {}
    } else if (!std::isspace(c)) {
      break;
    }
  }
  XD_CHECK(c != EOF, path + ": truncated header at byte offset " +
                         std::to_string(static_cast<long>(in.tellg())));
  int value = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  XD_CHECK(any, path + ": expected integer in header at byte offset " +
                    std::to_string(static_cast<long>(in.tellg())));
  return value;
}

}  // namespace

Image read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  XD_CHECK(in.good(), "cannot open: " + path);
  char m0 = static_cast<char>(in.get());
  char m1 = static_cast<char>(in.get());
  XD_CHECK(m0 == 'P' && m1 == '5',
           path + ": not a P5 PGM (bad magic at byte offset 0)");
  int width = pgm_token(in, path);
  int height = pgm_token(in, path);
  int maxval = pgm_token(in, path);
  XD_CHECK(width >= 1 && height >= 1,
           path + ": bad dimensions " + std::to_string(width) + "x" +
               std::to_string(height));
  XD_CHECK(maxval > 0 && maxval < 65536,
           path + ": unsupported maxval " + std::to_string(maxval));

  Image img(height, width);
  const bool wide = maxval > 255;
  const std::size_t n = img.pixels.size();
  std::vector<unsigned char> raw(n * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  XD_CHECK(static_cast<std::size_t>(in.gcount()) == raw.size(),
           path + ": truncated pixel data at byte offset " +
               std::to_string(static_cast<long>(in.tellg())));
  for (std::size_t i = 0; i < n; ++i) {
    int v = wide ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
    img.pixels[i] = static_cast<double>(v) / maxval;
  }
  return img;
}

void write_image(const std::string& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  XD_CHECK(out.good(), "cannot open for write: " + path);
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> raw(image.pixels.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    double v = image.pixels[i];
    v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  XD_CHECK(out.good(), "write failed: " + path);
}

Image standardize(const Image& image) {
  double mean = 0.0;
  for (double v : image.pixels) mean += v;
  mean /= static_cast<double>(image.pixels.size());
  double var = 0.0;
  for (double v : image.pixels) var += (v - mean) * (v - mean);
  var /= static_cast<double>(image.pixels.size());
  double inv = var > 1e-16 ? 1.0 / std::sqrt(var) : 0.0;
  Image out(image.height, image.width);
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = (image.pixels[i] - mean) * inv;
  return out;
}

TensorPtr image_to_tensor(const Image& image) {
  auto t = Tensor::zeros({image.height, image.width, 1});
  t->data = image.pixels;
  return t;
}

}  // namespace xdomid
