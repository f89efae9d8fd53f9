#include <cmath>

#include "doctest.h"
#include "test_util.hpp"
#include "xdomid/optim.hpp"
#include "xdomid/pca.hpp"

using namespace xdomid;
using namespace xdomid::testutil;

TEST_CASE("ParamSet keeps insertion order and rejects duplicate names") {
  ParamSet ps;
  ps.add("b", Tensor::zeros({2}));
  ps.add("a", Tensor::zeros({2}));
  CHECK(ps.items()[0].name == "b");
  CHECK(ps.items()[1].name == "a");
  CHECK_THROWS(ps.add("a", Tensor::zeros({1})));
  CHECK(ps.contains("a"));
  CHECK_FALSE(ps.contains("c"));
}

TEST_CASE("ParamSet checksum tracks data, adopt shares tensors") {
  ParamSet ps;
  ps.add("w", Tensor::from({2}, {1.0, 2.0}));
  auto c0 = ps.checksum();
  ps.at("w").tensor->data[0] = 5.0;
  CHECK(ps.checksum() != c0);

  ParamSet outer;
  outer.adopt(ps, "inner.");
  CHECK(outer.contains("inner.w"));
  outer.at("inner.w").tensor->data[1] = 9.0;
  CHECK(ps.at("w").tensor->data[1] == 9.0);  // same underlying tensor
}

TEST_CASE("gradient descent step is x -= lr * g") {
  ParamSet ps;
  auto t = Tensor::from({2}, {1.0, -2.0});
  ps.add("x", t);
  t->ensure_grad();
  t->grad = {0.5, -1.0};
  OptimizerConfig cfg;
  cfg.kind = OptimizerConfig::Kind::GradientDescent;
  cfg.lr = 0.1;
  Optimizer opt(cfg);
  opt.step(ps);
  CHECK(t->data[0] == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(t->data[1] == doctest::Approx(-1.9).epsilon(1e-15));
}

TEST_CASE("Adam matches the reference recurrence for 10 steps") {
  // Oracle: scalar Adam recurrence computed directly from its definition.
  const double lr = 1e-2, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double x = 1.3, m = 0.0, v = 0.0;
  Rng rng(77);
  std::vector<double> grads;
  for (int i = 0; i < 10; ++i) grads.push_back(rng.normal());

  ParamSet ps;
  auto t = Tensor::from({1}, {x});
  ps.add("x", t);
  OptimizerConfig cfg;
  cfg.kind = OptimizerConfig::Kind::Adam;
  cfg.lr = lr;
  Optimizer opt(cfg);

  for (int i = 0; i < 10; ++i) {
    double g = grads[i];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    double mhat = m / (1 - std::pow(b1, i + 1));
    double vhat = v / (1 - std::pow(b2, i + 1));
    x -= lr * mhat / (std::sqrt(vhat) + eps);

    t->ensure_grad();
    t->grad = {g};
    opt.step(ps);
    CHECK(t->data[0] == doctest::Approx(x).epsilon(1e-14));
  }
}

TEST_CASE("optimizer leaves frozen parameters untouched") {
  ParamSet ps;
  auto live = Tensor::from({1}, {1.0});
  auto frozen = Tensor::from({1}, {2.0});
  ps.add("x", live);
  ps.add("y", frozen, /*trainable=*/false);
  live->grad = {1.0};
  frozen->ensure_grad();
  frozen->grad = {1.0};
  OptimizerConfig cfg;
  cfg.kind = OptimizerConfig::Kind::GradientDescent;
  cfg.lr = 0.5;
  Optimizer opt(cfg);
  opt.step(ps);
  CHECK(live->data[0] == doctest::Approx(0.5));
  CHECK(frozen->data[0] == 2.0);
}

TEST_CASE("PCA recovers an analytic principal axis") {
  // Points along direction (1,2)/sqrt(5) with tiny orthogonal jitter.
  Rng rng(5);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 200; ++i) {
    double a = rng.normal() * 3.0, b = rng.normal() * 0.01;
    rows.push_back({a * 1.0 / std::sqrt(5.0) - b * 2.0 / std::sqrt(5.0),
                    a * 2.0 / std::sqrt(5.0) + b * 1.0 / std::sqrt(5.0)});
  }
  PcaModel m = pca_fit(rows, 2);
  // First column of components (2x2, column-major components per my layout:
  // components is C x k with column j the j-th axis).
  double c0 = m.components->data[0 * 2 + 0];
  double c1 = m.components->data[1 * 2 + 0];
  CHECK(std::fabs(c0 * 2.0 - c1 * 1.0) < 1e-3);  // parallel to (1,2)
  CHECK(m.explained_variance[0] > m.explained_variance[1]);
  CHECK(std::fabs(c0 * c0 + c1 * c1 - 1.0) < 1e-12);
}

TEST_CASE("PCA projection variance equals the explained variance") {
  Rng rng(6);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 120; ++i) {
    std::vector<double> r(4);
    for (auto& v : r) v = rng.normal();
    r[0] *= 3.0;
    r[2] += 0.5 * r[0];
    rows.push_back(r);
  }
  int k = 3;
  PcaModel m = pca_fit(rows, k);
  std::vector<double> mean2(k, 0.0), var(k, 0.0);
  std::vector<std::vector<double>> proj;
  for (const auto& r : rows) proj.push_back(pca_project(m, r));
  for (const auto& p : proj)
    for (int j = 0; j < k; ++j) mean2[j] += p[j] / rows.size();
  for (const auto& p : proj)
    for (int j = 0; j < k; ++j)
      var[j] += (p[j] - mean2[j]) * (p[j] - mean2[j]) / (rows.size() - 1);
  for (int j = 0; j < k; ++j)
    CHECK(var[j] == doctest::Approx(m.explained_variance[j]).epsilon(1e-9));
}

TEST_CASE("PCA full-rank reconstruction is exact; components orthonormal") {
  Rng rng(8);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 40; ++i) {
    std::vector<double> r(5);
    for (auto& v : r) v = rng.normal();
    rows.push_back(r);
  }
  PcaModel m = pca_fit(rows, 5);
  CHECK_FALSE(m.rank_deficient);
  for (const auto& r : rows) {
    auto rec = pca_reconstruct(m, pca_project(m, r));
    for (int j = 0; j < 5; ++j)
      CHECK(rec[j] == doctest::Approx(r[j]).epsilon(1e-9));
  }
  // orthonormal columns
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b <= a; ++b) {
      double dot = 0.0;
      for (int i = 0; i < 5; ++i)
        dot += m.components->data[i * 5 + a] * m.components->data[i * 5 + b];
      CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-10));
    }
}

TEST_CASE("PCA flags rank deficiency and is deterministic") {
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 10; ++i)
    rows.push_back({double(i), 2.0 * i, -1.0 * i});  // rank 1
  PcaModel a = pca_fit(rows, 3);
  PcaModel b = pca_fit(rows, 3);
  CHECK(a.rank_deficient);
  CHECK(a.components->data == b.components->data);
  CHECK(a.mean == b.mean);
}
