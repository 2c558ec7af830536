#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "idsr/config.hpp"
#include "idsr/dataset.hpp"
#include "idsr/metrics.hpp"

namespace idsr {

// Interaction counts over the training split (inputs and targets both count).
inline std::vector<long long> pop_counts(const std::vector<Sample>& train,
                                         int n_items) {
  if (train.empty()) throw DataError("popularity needs a non-empty split");
  std::vector<long long> counts(static_cast<std::size_t>(n_items), 0);
  auto bump = [&](int v) {
    if (v < 0 || v >= n_items)
      throw DataError("item " + std::to_string(v) + " outside the catalog");
    ++counts[static_cast<std::size_t>(v)];
  };
  for (const auto& s : train) {
    for (int v : s.inputs) bump(v);
    bump(s.target);
  }
  return counts;
}

// The same static most-popular list for every user; ties to the smaller
// index.
inline std::vector<int> pop_ranking(const std::vector<Sample>& train,
                                    int n_items, int n) {
  if (n < 1 || n > n_items)
    throw ConfigError("list length " + std::to_string(n) +
                      " exceeds catalog size " + std::to_string(n_items));
  auto counts = pop_counts(train, n_items);
  std::vector<int> order(static_cast<std::size_t>(n_items));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return a < b;
  });
  order.resize(static_cast<std::size_t>(n));
  return order;
}

// Greedy maximal-marginal-relevance re-ranking of a relevance score vector.
// Pool = top `candidates` items by score; each later pick maximizes
// theta * score + (1 - theta) * min genre distance to the picks so far.
// The first pick is the plain score argmax. All ties to the smaller index.
inline std::vector<int> mmr_rerank(const Vec& scores, int candidates,
                                   double theta, int n, const Mat& genres) {
  int n_items = static_cast<int>(scores.size());
  if (genres.rows() != scores.size())
    throw ConfigError("scores cover " + std::to_string(n_items) +
                      " items but the genre catalog has " +
                      std::to_string(genres.rows()));
  if (theta < 0.0 || theta > 1.0)
    throw ConfigError("theta must lie in [0, 1]");
  if (n < 1) throw ConfigError("list length must be positive");
  if (candidates < n)
    throw ConfigError("candidate pool " + std::to_string(candidates) +
                      " smaller than list length " + std::to_string(n));
  if (n > n_items)
    throw ConfigError("list length " + std::to_string(n) +
                      " exceeds catalog size " + std::to_string(n_items));
  if (!scores.allFinite()) throw DataError("non-finite relevance scores");

  std::vector<int> pool(static_cast<std::size_t>(n_items));
  std::iota(pool.begin(), pool.end(), 0);
  std::sort(pool.begin(), pool.end(), [&](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  });
  pool.resize(std::min<std::size_t>(pool.size(),
                                    static_cast<std::size_t>(candidates)));
  std::sort(pool.begin(), pool.end());  // ascending id, for tie-breaking scans

  std::vector<int> picked;
  std::vector<char> used(static_cast<std::size_t>(n_items), 0);
  while (static_cast<int>(picked.size()) < n) {
    int best = -1;
    double best_val = 0.0;
    for (int v : pool) {
      if (used[static_cast<std::size_t>(v)]) continue;
      double val;
      if (picked.empty()) {
        val = scores(v);
      } else {
        double dmin = std::numeric_limits<double>::infinity();
        for (int k : picked)
          dmin = std::min(dmin, genre_distance(genres, k, v));
        val = theta * scores(v) + (1.0 - theta) * dmin;
      }
      if (best < 0 || val > best_val) {
        best = v;
        best_val = val;
      }
    }
    picked.push_back(best);
    used[static_cast<std::size_t>(best)] = 1;
  }
  return picked;
}

// The relevance-only sequential baseline is this codebase with intents off
// and plain next-item cross-entropy; its ranking is the softmax order.
inline TrainConfig relevance_baseline(TrainConfig cfg) {
  cfg.objective = Objective::ce;
  cfg.lambda = 1.0;
  return cfg;
}

}  // namespace idsr
