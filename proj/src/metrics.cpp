#include "ldr/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "ldr/errors.hpp"

namespace ldr {

std::size_t label_rank(std::span<const double> scores, std::size_t y) {
  if (y >= scores.size()) throw DomainError("label outside the score vector");
  const double sy = scores[y];
  std::size_t rank = 0;
  for (std::size_t j = 0; j < scores.size(); ++j)
    if (scores[j] > sy || (scores[j] == sy && j < y)) ++rank;
  return rank;
}

namespace {

std::size_t classes_of(std::span<const double> scores, std::span<const std::size_t> labels) {
  if (labels.empty()) throw DomainError("no rows to score");
  if (scores.size() % labels.size() != 0) throw DomainError("score matrix does not match the label count");
  return scores.size() / labels.size();
}

}  // namespace

double topk_accuracy(std::span<const double> scores, std::span<const std::size_t> labels, std::size_t k) {
  const std::size_t K = classes_of(scores, labels);
  if (k < 1 || k > K) throw DomainError("k must lie in [1, K]");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (label_rank(scores.subspan(i * K, K), labels[i]) < k) ++hits;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double class_balanced_topk(std::span<const double> scores, std::span<const std::size_t> labels, std::size_t K,
                           std::size_t k, std::vector<std::string>* warnings) {
  if (classes_of(scores, labels) != K) throw DomainError("score matrix width differs from K");
  if (k < 1 || k > K) throw DomainError("k must lie in [1, K]");
  std::vector<std::size_t> hits(K, 0), total(K, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++total[labels[i]];
    if (label_rank(scores.subspan(i * K, K), labels[i]) < k) ++hits[labels[i]];
  }
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < K; ++c) {
    if (total[c] == 0) {
      if (warnings) warnings->push_back("class " + std::to_string(c) + " absent; skipped in balanced accuracy");
      continue;
    }
    sum += static_cast<double>(hits[c]) / static_cast<double>(total[c]);
    ++present;
  }
  return sum / static_cast<double>(present);
}

TopkVector topk_profile(std::span<const double> scores, std::span<const std::size_t> labels, std::size_t K) {
  if (classes_of(scores, labels) != K) throw DomainError("score matrix width differs from K");
  std::array<std::size_t, kMaxReportedK> hits{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t r = label_rank(scores.subspan(i * K, K), labels[i]);
    for (std::size_t k = r; k < kMaxReportedK; ++k) ++hits[k];
  }
  TopkVector out{};
  for (std::size_t k = 0; k < kMaxReportedK; ++k)
    out[k] = static_cast<double>(hits[k]) / static_cast<double>(labels.size());
  return out;
}

std::vector<double> fractional_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double mean = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = mean;
    i = j;
  }
  return ranks;
}

std::vector<LeaderboardRow> leaderboard(const LeaderboardInput& results) {
  if (results.empty()) throw ConfigError("leaderboard needs at least one loss");
  // The union of cells and the widest k over all losses; every loss must cover all of it.
  std::set<std::string> cells;
  std::size_t width = 0;
  for (const auto& [loss, by_cell] : results)
    for (const auto& [cell, acc] : by_cell) {
      cells.insert(cell);
      width = std::max(width, acc.size());
    }
  if (cells.empty() || width == 0) throw ConfigError("leaderboard has no cells");
  for (const auto& [loss, by_cell] : results)
    for (const auto& cell : cells) {
      const auto it = by_cell.find(cell);
      if (it == by_cell.end()) throw ConfigError("loss '" + loss + "' has no result for cell '" + cell + "'");
      if (it->second.size() != width)
        throw ConfigError("loss '" + loss + "' is missing a top-k value in cell '" + cell + "'");
    }

  std::vector<LeaderboardRow> rows;
  for (const auto& [loss, by_cell] : results) rows.push_back(LeaderboardRow{loss, std::vector<double>(width, 0.0), 0.0});
  std::vector<double> column(results.size());
  for (const auto& cell : cells) {
    for (std::size_t k = 0; k < width; ++k) {
      std::size_t r = 0;
      for (const auto& [loss, by_cell] : results) column[r++] = by_cell.at(cell)[k];
      const auto ranks = fractional_ranks(column);
      for (std::size_t i = 0; i < rows.size(); ++i) rows[i].mean_rank_per_k[k] += ranks[i];
    }
  }
  const double n_cells = static_cast<double>(cells.size());
  for (auto& row : rows) {
    for (double& v : row.mean_rank_per_k) v /= n_cells;
    row.overall = std::accumulate(row.mean_rank_per_k.begin(), row.mean_rank_per_k.end(), 0.0) /
                  static_cast<double>(width);
  }
  return rows;
}

}  // namespace ldr
