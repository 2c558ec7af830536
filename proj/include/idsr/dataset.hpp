#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "idsr/common.hpp"
#include "idsr/rng.hpp"

namespace idsr {

struct Interaction {
  int user = 0;  // raw id on load, dense index after reindex()
  int item = 0;
  std::int64_t timestamp = 0;
  bool operator==(const Interaction&) const = default;
};

struct Sample {
  int user = 0;
  std::vector<int> inputs;  // item indices, oldest first
  int target = 0;
  std::int64_t timestamp = 0;  // time of the target event
  bool operator==(const Sample&) const = default;
};

// Repeatedly drops users with fewer than min_user events and items with
// fewer than min_item events until no row changes. Keeps input order.
inline std::vector<Interaction> core_filter(std::vector<Interaction> xs,
                                            int min_user, int min_item) {
  if (min_user < 1 || min_item < 1)
    throw ConfigError("minimum interaction counts must be at least 1");
  for (;;) {
    std::unordered_map<int, int> ucount, icount;
    for (const auto& x : xs) {
      ++ucount[x.user];
      ++icount[x.item];
    }
    std::size_t before = xs.size();
    xs.erase(std::remove_if(xs.begin(), xs.end(),
                            [&](const Interaction& x) {
                              return ucount[x.user] < min_user ||
                                     icount[x.item] < min_item;
                            }),
             xs.end());
    if (xs.size() == before) return xs;
  }
}

struct Reindexed {
  std::vector<Interaction> interactions;  // dense user/item indices
  std::vector<int> user_raw;              // index -> raw id, ascending
  std::vector<int> item_raw;
};

// Dense indices assigned in ascending raw-id order.
inline Reindexed reindex(const std::vector<Interaction>& xs) {
  Reindexed out;
  {
    std::unordered_set<int> useen, iseen;
    for (const auto& x : xs) {
      if (useen.insert(x.user).second) out.user_raw.push_back(x.user);
      if (iseen.insert(x.item).second) out.item_raw.push_back(x.item);
    }
  }
  std::sort(out.user_raw.begin(), out.user_raw.end());
  std::sort(out.item_raw.begin(), out.item_raw.end());
  std::unordered_map<int, int> umap, imap;
  for (std::size_t i = 0; i < out.user_raw.size(); ++i)
    umap[out.user_raw[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < out.item_raw.size(); ++i)
    imap[out.item_raw[i]] = static_cast<int>(i);
  out.interactions.reserve(xs.size());
  for (const auto& x : xs)
    out.interactions.push_back({umap[x.user], imap[x.item], x.timestamp});
  return out;
}

// Per-user event lists sorted by timestamp; ties keep input order.
inline std::vector<std::vector<std::pair<int, std::int64_t>>> user_sequences(
    const std::vector<Interaction>& xs, int n_users) {
  std::vector<std::vector<std::pair<int, std::int64_t>>> seq(n_users);
  for (const auto& x : xs) seq[x.user].emplace_back(x.item, x.timestamp);
  for (auto& s : seq)
    std::stable_sort(s.begin(), s.end(), [](const auto& a, const auto& b) {
      return a.second < b.second;
    });
  return seq;
}

// Stride-1 windows of input_len consecutive items plus the next item as
// target. Users with fewer than input_len+1 events yield nothing.
inline std::vector<Sample> sliding_windows(
    const std::vector<std::vector<std::pair<int, std::int64_t>>>& seqs,
    int input_len) {
  std::vector<Sample> out;
  for (int u = 0; u < static_cast<int>(seqs.size()); ++u) {
    const auto& s = seqs[u];
    for (std::size_t t = 0; t + input_len < s.size(); ++t) {
      Sample smp;
      smp.user = u;
      smp.inputs.reserve(input_len);
      for (int j = 0; j < input_len; ++j)
        smp.inputs.push_back(s[t + j].first);
      smp.target = s[t + input_len].first;
      smp.timestamp = s[t + input_len].second;
      out.push_back(std::move(smp));
    }
  }
  return out;
}

struct SplitSpec {
  double train = 0.7;
  double valid = 0.1;
  double test = 0.2;
  std::uint64_t seed = 1;
};

struct Splits {
  std::vector<Sample> train, valid, test;
  std::int64_t time_cut = 0;        // earliest test timestamp, 0 if no test
  std::size_t dropped_test = 0;     // test targets absent from training
};

// The newest `test` fraction of samples (by target time, ties in input
// order) is held out as the test set; the rest is shuffled with `seed` and
// divided train:valid. Test samples whose target never occurs in training
// (as input or target) are dropped and counted.
inline Splits split_samples(std::vector<Sample> samples, const SplitSpec& sp) {
  if (sp.train < 0 || sp.valid < 0 || sp.test < 0 ||
      std::abs(sp.train + sp.valid + sp.test - 1.0) > 1e-9 ||
      sp.train + sp.valid <= 0)
    throw ConfigError("split ratios must be non-negative and sum to 1");

  std::stable_sort(samples.begin(), samples.end(),
                   [](const Sample& a, const Sample& b) {
                     return a.timestamp < b.timestamp;
                   });
  Splits out;
  std::size_t n = samples.size();
  std::size_t k = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * (sp.train + sp.valid)));
  std::vector<Sample> pool(samples.begin(), samples.begin() + k);
  out.test.assign(samples.begin() + k, samples.end());
  if (!out.test.empty()) out.time_cut = out.test.front().timestamp;

  Rng rng(sp.seed);
  rng.shuffle(pool);
  std::size_t n_train = static_cast<std::size_t>(
      std::floor(static_cast<double>(k) * sp.train / (sp.train + sp.valid)));
  out.train.assign(pool.begin(), pool.begin() + n_train);
  out.valid.assign(pool.begin() + n_train, pool.end());

  std::unordered_set<int> train_items;
  for (const auto& s : out.train) {
    train_items.insert(s.inputs.begin(), s.inputs.end());
    train_items.insert(s.target);
  }
  std::size_t before = out.test.size();
  out.test.erase(std::remove_if(out.test.begin(), out.test.end(),
                                [&](const Sample& s) {
                                  return !train_items.count(s.target);
                                }),
                 out.test.end());
  out.dropped_test = before - out.test.size();

  if (out.train.empty() || out.valid.empty() || out.test.empty())
    throw DataError(std::string("empty ") +
                    (out.train.empty()  ? "train"
                     : out.valid.empty() ? "validation"
                                         : "test") +
                    " split (" + std::to_string(n) + " samples total)");
  return out;
}

struct DatasetStats {
  int raw_users = 0, raw_items = 0;
  std::size_t raw_interactions = 0;
  int users = 0, items = 0;  // after core filtering
  std::size_t interactions = 0;
};

struct Dataset {
  std::string format;  // "ml100k" or "ml1m"
  DatasetStats stats;
  std::vector<std::string> genre_names;
  Mat genres;  // items x genres, multi-hot
  std::vector<int> user_raw, item_raw;
  int input_len = 9;
  int min_user = 5, min_item = 5;
  SplitSpec split;
  std::vector<Sample> train, valid, test;
  std::int64_t time_cut = 0;
  std::size_t dropped_test = 0;

  int n_items() const { return stats.items; }
  int n_users() const { return stats.users; }
};

struct RawCorpus {
  std::string format;
  std::vector<Interaction> interactions;  // raw ids
  // raw item id -> multi-hot genre flags
  std::unordered_map<int, std::vector<std::uint8_t>> item_flags;
  std::vector<std::string> genre_names;
};

inline Dataset build_dataset(const RawCorpus& raw, int input_len, int min_user,
                             int min_item, const SplitSpec& sp) {
  if (input_len < 1) throw ConfigError("input_len must be positive");
  if (raw.interactions.empty()) throw DataError("no interactions in input");
  Dataset ds;
  ds.format = raw.format;
  ds.genre_names = raw.genre_names;
  ds.input_len = input_len;
  ds.min_user = min_user;
  ds.min_item = min_item;
  ds.split = sp;
  {
    std::unordered_set<int> u, i;
    for (const auto& x : raw.interactions) {
      u.insert(x.user);
      i.insert(x.item);
    }
    ds.stats.raw_users = static_cast<int>(u.size());
    ds.stats.raw_items = static_cast<int>(i.size());
    ds.stats.raw_interactions = raw.interactions.size();
  }

  auto kept = core_filter(raw.interactions, min_user, min_item);
  if (kept.empty()) throw DataError("dataset empty after filtering");
  auto rx = reindex(kept);
  ds.user_raw = std::move(rx.user_raw);
  ds.item_raw = std::move(rx.item_raw);
  ds.stats.users = static_cast<int>(ds.user_raw.size());
  ds.stats.items = static_cast<int>(ds.item_raw.size());
  ds.stats.interactions = rx.interactions.size();

  ds.genres = Mat::Zero(ds.stats.items, static_cast<int>(ds.genre_names.size()));
  for (int i = 0; i < ds.stats.items; ++i) {
    auto it = raw.item_flags.find(ds.item_raw[i]);
    if (it == raw.item_flags.end())
      throw DataError("item " + std::to_string(ds.item_raw[i]) +
                      " has no genre row");
    if (it->second.size() != ds.genre_names.size())
      throw DataError("item " + std::to_string(ds.item_raw[i]) +
                      " has wrong genre flag count");
    for (std::size_t g = 0; g < it->second.size(); ++g)
      ds.genres(i, static_cast<int>(g)) = it->second[g] ? 1.0 : 0.0;
    if (ds.genres.row(i).sum() < 1.0)
      throw DataError("item " + std::to_string(ds.item_raw[i]) +
                      " has no genre flags set");
  }

  auto seqs = user_sequences(rx.interactions, ds.stats.users);
  auto samples = sliding_windows(seqs, input_len);
  auto splits = split_samples(std::move(samples), sp);
  ds.train = std::move(splits.train);
  ds.valid = std::move(splits.valid);
  ds.test = std::move(splits.test);
  ds.time_cut = splits.time_cut;
  ds.dropped_test = splits.dropped_test;
  return ds;
}

}  // namespace idsr
