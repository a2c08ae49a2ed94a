#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ldr/dataset.hpp"

namespace ldr {

enum class NoiseKind { none, uniform, pairwise, circular };

std::string noise_kind_name(NoiseKind kind);
/// Throws ConfigError on an unknown name.
NoiseKind noise_kind_from_name(const std::string& name);

using ClassPair = std::pair<std::size_t, std::size_t>;

struct NoiseSpec {
  NoiseKind kind = NoiseKind::none;
  double rate = 0.0;
  std::vector<ClassPair> pairs;  // pairwise only, in class indices
  std::uint64_t seed = 0;

  /// Throws ConfigError when the rate is outside [0, 1] or a pair is invalid for K classes.
  void validate(std::size_t K) const;
};

struct NoisyLabels {
  Labels labels;
  std::vector<char> corrupted;  // final label differs from the original
};

/// uniform: with probability rate, redraw from all K classes (the original included).
/// pairwise: with probability rate, a label in a listed pair flips to its partner.
/// circular: with probability rate, y -> (y + 1) mod K.
NoisyLabels inject_noise(std::span<const std::size_t> labels, std::size_t K, const NoiseSpec& spec);

/// Class names in original-label order for "letter", "vowel" and "news20"; empty otherwise.
std::vector<std::string> builtin_class_names(const std::string& dataset);

/// The symmetric flip pairs for a builtin dataset, by class name.
std::vector<std::pair<std::string, std::string>> builtin_flip_pairs(const std::string& dataset);

/// Resolves builtin name pairs to class indices of `data`. The i-th builtin name corresponds to
/// the i-th smallest original label. Throws ConfigError when the dataset's labels do not fit.
std::vector<ClassPair> resolve_flip_pairs(const std::string& rules, const Dataset& data);

}  // namespace ldr
