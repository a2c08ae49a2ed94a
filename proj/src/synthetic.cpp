#include "ldr/synthetic.hpp"

#include <random>

#include "ldr/errors.hpp"

namespace ldr {

Dataset synthetic_gaussians(std::size_t n_per_cluster, std::uint64_t seed) {
  if (n_per_cluster == 0) throw DomainError("synthetic_gaussians: need at least one point per cluster");
  constexpr double means[4][2] = {{kClusterOffset, kClusterOffset},
                                  {kClusterOffset, -kClusterOffset},
                                  {-kClusterOffset, kClusterOffset},
                                  {-kClusterOffset, -kClusterOffset}};
  Dataset data;
  data.name = "synthetic";
  data.d = 2;
  data.K = 3;
  data.label_table = {0.0, 1.0, 2.0};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, kClusterSigma);
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < n_per_cluster; ++i) {
      data.features.push_back(means[c][0] + noise(rng));
      data.features.push_back(means[c][1] + noise(rng));
      data.labels.push_back(kClusterClass[c]);
      data.probe.push_back(0);
    }
  }
  data.n = data.labels.size();
  return data;
}

std::size_t append_probe(Dataset& data, double x0, double x1, std::size_t label) {
  if (data.d != 2) throw DomainError("append_probe: dataset is not 2-D");
  if (label >= data.K) throw DomainError("append_probe: label outside [0, K)");
  data.features.push_back(x0);
  data.features.push_back(x1);
  data.labels.push_back(label);
  data.probe.resize(data.n, 0);
  data.probe.push_back(1);
  return data.n++;
}

}  // namespace ldr
