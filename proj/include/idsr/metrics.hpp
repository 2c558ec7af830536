#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "idsr/common.hpp"

namespace idsr {

// position (1-based) of target in ranking, or 0 if absent
inline int rank_of(const std::vector<int>& ranking, int target) {
  for (std::size_t i = 0; i < ranking.size(); ++i)
    if (ranking[i] == target) return static_cast<int>(i) + 1;
  return 0;
}

inline double hit_at_k(const std::vector<int>& ranking, int target, int k) {
  int r = rank_of(ranking, target);
  return (r > 0 && r <= k) ? 1.0 : 0.0;
}

inline double reciprocal_rank_at_k(const std::vector<int>& ranking, int target,
                                   int k) {
  int r = rank_of(ranking, target);
  return (r > 0 && r <= k) ? 1.0 / r : 0.0;
}

inline double genre_distance(const Mat& genres, int i, int j) {
  if (i < 0 || i >= genres.rows() || j < 0 || j >= genres.rows())
    throw DataError("item " + std::to_string(i < 0 || i >= genres.rows() ? i : j) +
                    " not in genre catalog");
  return (genres.row(i) - genres.row(j)).norm();
}

// Mean pairwise Euclidean distance between genre rows of the top-k items.
// Lists shorter than two items have no pairs and score 0.
inline double ild_at_k(const std::vector<int>& ranking, const Mat& genres,
                       int k) {
  if (k < 2) throw ConfigError("ILD cutoff must be at least 2");
  int n = std::min<int>(k, static_cast<int>(ranking.size()));
  if (n < 2) return 0.0;
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      total += genre_distance(genres, ranking[i], ranking[j]);
  return 2.0 * total / (static_cast<double>(n) * (n - 1));
}

// running means over evaluation samples
struct MetricAccumulator {
  double recall_sum = 0.0;
  double mrr_sum = 0.0;
  double ild_sum = 0.0;
  std::size_t n = 0;

  void add(const std::vector<int>& ranking, int target, const Mat& genres,
           int k) {
    recall_sum += hit_at_k(ranking, target, k);
    mrr_sum += reciprocal_rank_at_k(ranking, target, k);
    ild_sum += ild_at_k(ranking, genres, k);
    ++n;
  }

  double recall() const { return n ? recall_sum / n : 0.0; }
  double mrr() const { return n ? mrr_sum / n : 0.0; }
  double ild() const { return n ? ild_sum / n : 0.0; }

  void merge(const MetricAccumulator& other) {
    recall_sum += other.recall_sum;
    mrr_sum += other.mrr_sum;
    ild_sum += other.ild_sum;
    n += other.n;
  }
};

}  // namespace idsr
