#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ldr {

/// Test holdout plus a partition of the remaining rows into folds.
struct FoldPlan {
  std::vector<int> fold;  // fold index, or -1 for test rows
  std::size_t folds = 0;
  std::vector<std::string> warnings;

  std::vector<std::size_t> test_indices() const;
  std::vector<std::size_t> validation_indices(std::size_t f) const;
  /// Every non-test row outside fold f.
  std::vector<std::size_t> training_indices(std::size_t f) const;
};

/// Seeded shuffle, round(n * test_fraction) rows held out, the rest grouped by label (when
/// labels are given) and dealt round-robin into folds. A class with fewer rows than folds is
/// dealt unstratified at the end, with a warning.
FoldPlan make_folds(std::size_t n, double test_fraction, std::size_t folds,
                    std::span<const std::size_t> stratify_labels, std::uint64_t seed);

}  // namespace ldr
