#pragma once

#include <vector>

#include "xdomid/tensor.hpp"

namespace xdomid {

struct PcaModel {
  std::vector<double> mean;  // C
  TensorPtr components;      // C×k, orthonormal columns, eigenvalue order
  std::vector<double> explained_variance;  // k eigenvalues, descending
  int k = 0;
  bool rank_deficient = false;
};

// Eigendecomposition of the C×C sample covariance (denominator n-1).
// Components are the top-k eigenvectors; each column's sign is fixed so its
// largest-magnitude entry is positive.
PcaModel pca_fit(const std::vector<std::vector<double>>& samples, int k);

std::vector<double> pca_project(const PcaModel& model,
                                const std::vector<double>& sample);
std::vector<double> pca_reconstruct(const PcaModel& model,
                                    const std::vector<double>& projected);

}  // namespace xdomid
