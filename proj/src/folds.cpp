#include "ldr/folds.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "ldr/errors.hpp"

namespace ldr {

std::vector<std::size_t> FoldPlan::test_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] < 0) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::validation_indices(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] == static_cast<int>(f)) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::training_indices(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] >= 0 && fold[i] != static_cast<int>(f)) out.push_back(i);
  return out;
}

FoldPlan make_folds(std::size_t n, double test_fraction, std::size_t folds,
                    std::span<const std::size_t> stratify_labels, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("need at least two folds");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must lie in [0, 1)");
  if (!stratify_labels.empty() && stratify_labels.size() != n) throw ConfigError("stratify labels length mismatch");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  FoldPlan plan;
  plan.folds = folds;
  plan.fold.assign(n, -1);
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  if (n - n_test < folds) throw ConfigError("too few rows for the requested folds");

  // Classes keep their shuffled order; the dealer position carries over between classes so
  // fold sizes stay within one of each other overall.
  std::map<std::size_t, std::vector<std::size_t>> groups;
  std::vector<std::size_t> leftovers;
  for (std::size_t j = n_test; j < n; ++j) {
    const std::size_t i = order[j];
    groups[stratify_labels.empty() ? 0 : stratify_labels[i]].push_back(i);
  }
  std::size_t dealer = 0;
  for (auto& [label, members] : groups) {
    if (!stratify_labels.empty() && members.size() < folds) {
      plan.warnings.push_back("class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                              " training rows, fewer than " + std::to_string(folds) + " folds; not stratified");
      leftovers.insert(leftovers.end(), members.begin(), members.end());
      continue;
    }
    for (std::size_t i : members) plan.fold[i] = static_cast<int>(dealer++ % folds);
  }
  for (std::size_t i : leftovers) plan.fold[i] = static_cast<int>(dealer++ % folds);
  return plan;
}

}  // namespace ldr
