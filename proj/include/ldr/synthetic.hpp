#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "ldr/dataset.hpp"

namespace ldr {

inline constexpr double kClusterOffset = 0.8;
inline constexpr double kClusterSigma = 0.3;

/// Class of each cluster mean (0.8,0.8), (0.8,-0.8), (-0.8,0.8), (-0.8,-0.8). The two diagonal
/// clusters share class 0.
inline constexpr std::array<std::size_t, 4> kClusterClass{0, 1, 2, 0};

/// Four isotropic Gaussian clusters in 2-D, three classes, rows grouped by cluster.
Dataset synthetic_gaussians(std::size_t n_per_cluster, std::uint64_t seed);

/// Appends one labeled point flagged as a probe; returns its row index.
std::size_t append_probe(Dataset& data, double x0, double x1, std::size_t label);

}  // namespace ldr
