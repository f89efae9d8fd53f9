#include "xdomid/pca.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace xdomid {

PcaModel pca_fit(const std::vector<std::vector<double>>& samples, int k) {
  XD_CHECK(!samples.empty(), "pca_fit: no samples");
  const int n = static_cast<int>(samples.size());
  const int c = static_cast<int>(samples[0].size());
  XD_CHECK(k >= 1 && k <= c, "pca_fit: k=" + std::to_string(k) +
                                 " out of range for dimension " +
                                 std::to_string(c));
  XD_CHECK(n >= k, "pca_fit: need at least k=" + std::to_string(k) +
                       " samples, got " + std::to_string(n));

  Eigen::MatrixXd x(n, c);
  for (int i = 0; i < n; ++i) {
    XD_CHECK(static_cast<int>(samples[i].size()) == c,
             "pca_fit: ragged sample at index " + std::to_string(i));
    for (int j = 0; j < c; ++j) x(i, j) = samples[i][j];
  }

  Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  Eigen::MatrixXd cov = (x.transpose() * x) / std::max(1, n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  XD_CHECK(eig.info() == Eigen::Success, "pca_fit: eigendecomposition failed");

  PcaModel model;
  model.k = k;
  model.mean.assign(mean.data(), mean.data() + c);
  model.components = Tensor::zeros({c, k});
  model.explained_variance.resize(k);

  // Eigen returns ascending eigenvalues; take the top k in descending order.
  const double tiny = 1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  for (int j = 0; j < k; ++j) {
    int src = c - 1 - j;
    double ev = eig.eigenvalues()(src);
    if (ev <= tiny) model.rank_deficient = true;
    model.explained_variance[j] = ev;
    Eigen::VectorXd col = eig.eigenvectors().col(src);
    int peak = 0;
    for (int i = 1; i < c; ++i)
      if (std::abs(col(i)) > std::abs(col(peak))) peak = i;
    if (col(peak) < 0.0) col = -col;
    for (int i = 0; i < c; ++i) model.components->data[i * k + j] = col(i);
  }
  return model;
}

std::vector<double> pca_project(const PcaModel& model,
                                const std::vector<double>& sample) {
  const int c = static_cast<int>(model.mean.size());
  XD_CHECK(static_cast<int>(sample.size()) == c,
           "pca_project: sample length " + std::to_string(sample.size()) +
               " does not match model dimension " + std::to_string(c));
  std::vector<double> out(model.k, 0.0);
  for (int i = 0; i < c; ++i) {
    double v = sample[i] - model.mean[i];
    for (int j = 0; j < model.k; ++j)
      out[j] += v * model.components->data[i * model.k + j];
  }
  return out;
}

std::vector<double> pca_reconstruct(const PcaModel& model,
                                    const std::vector<double>& projected) {
  XD_CHECK(static_cast<int>(projected.size()) == model.k,
           "pca_reconstruct: expected length " + std::to_string(model.k));
  const int c = static_cast<int>(model.mean.size());
  std::vector<double> out(model.mean);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < model.k; ++j)
      out[i] += model.components->data[i * model.k + j] * projected[j];
  return out;
}

}  // namespace xdomid
