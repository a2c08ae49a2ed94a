#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ldr {

/// 0-based position of class y when scores are ranked descending, ties broken toward the lower index.
std::size_t label_rank(std::span<const double> scores, std::size_t y);

/// Fraction of rows (scores is n x K, row-major) whose label ranks among the top k.
double topk_accuracy(std::span<const double> scores, std::span<const std::size_t> labels, std::size_t k);

/// Top-k accuracy per class, averaged over classes present in `labels`. Absent classes below K
/// are skipped and named in `warnings` when given.
double class_balanced_topk(std::span<const double> scores, std::span<const std::size_t> labels, std::size_t K,
                           std::size_t k, std::vector<std::string>* warnings = nullptr);

inline constexpr std::size_t kMaxReportedK = 5;
using TopkVector = std::array<double, kMaxReportedK>;

/// Top-1..5 accuracy in one pass; entries with k > K are 1.
TopkVector topk_profile(std::span<const double> scores, std::span<const std::size_t> labels, std::size_t K);

/// Fractional ranks (1 = best) of `values`, larger is better; ties share their mean rank.
std::vector<double> fractional_ranks(std::span<const double> values);

/// accuracy[loss][cell][k - 1]. A cell is one (dataset, setting) pair.
using LeaderboardInput = std::map<std::string, std::map<std::string, std::vector<double>>>;

struct LeaderboardRow {
  std::string loss;
  std::vector<double> mean_rank_per_k;
  double overall = 0.0;
};

/// Ranks losses within every (cell, k) and averages. Throws ConfigError when any loss lacks a
/// cell or a k that another loss has.
std::vector<LeaderboardRow> leaderboard(const LeaderboardInput& results);

}  // namespace ldr
