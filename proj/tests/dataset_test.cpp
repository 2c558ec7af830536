#include "idsr/dataset.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>

#include "idsr/dataset_io.hpp"
#include "testutil.hpp"

using idsr::Interaction;
using idsr::Sample;

namespace {

std::vector<Interaction> synthetic_interactions(std::uint64_t seed, int n) {
  idsr::Rng rng(seed);
  std::vector<Interaction> xs;
  for (int i = 0; i < n; ++i) {
    Interaction x;
    x.user = 1 + static_cast<int>(rng.next_below(25));
    x.item = 1 + static_cast<int>(rng.next_below(35));
    x.timestamp = 1000 + static_cast<std::int64_t>(rng.next_below(100000));
    xs.push_back(x);
  }
  return xs;
}

// set-based fixpoint, independent of the sequence-based implementation
std::vector<Interaction> core_filter_oracle(std::vector<Interaction> xs,
                                            int min_count) {
  std::set<int> users, items;
  for (const auto& x : xs) {
    users.insert(x.user);
    items.insert(x.item);
  }
  for (;;) {
    std::map<int, int> uc, ic;
    for (const auto& x : xs)
      if (users.count(x.user) && items.count(x.item)) {
        ++uc[x.user];
        ++ic[x.item];
      }
    bool changed = false;
    for (auto it = users.begin(); it != users.end();)
      if (uc[*it] < min_count) {
        it = users.erase(it);
        changed = true;
      } else
        ++it;
    for (auto it = items.begin(); it != items.end();)
      if (ic[*it] < min_count) {
        it = items.erase(it);
        changed = true;
      } else
        ++it;
    if (!changed) break;
  }
  std::vector<Interaction> out;
  for (const auto& x : xs)
    if (users.count(x.user) && items.count(x.item)) out.push_back(x);
  return out;
}

TEST(dataset, core_filter_matches_oracle) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto xs = synthetic_interactions(seed, 300);
    auto got = idsr::core_filter(xs, 5, 5);
    auto want = core_filter_oracle(xs, 5);
    EXPECT_EQ(got, want) << "seed " << seed;

    std::map<int, int> uc, ic;
    for (const auto& x : got) {
      ++uc[x.user];
      ++ic[x.item];
    }
    for (const auto& [u, c] : uc) EXPECT_GE(c, 5) << "user " << u;
    for (const auto& [i, c] : ic) EXPECT_GE(c, 5) << "item " << i;
    EXPECT_EQ(idsr::core_filter(got, 5, 5), got) << "not a fixpoint";
  }
}

TEST(dataset, core_filter_cascades) {
  // item X has a single event, so it dies; that starves user A, whose
  // removal starves item Y, and so on down the chain X -> A -> Y -> B -> Z.
  // user C loses one event to the cascade but keeps two stable ones.
  const int A = 1, B = 2, C = 3, X = 50, Y = 51, Z = 52;
  std::vector<Interaction> xs;
  auto add = [&](int u, int i) {
    xs.push_back({u, i, static_cast<std::int64_t>(xs.size())});
  };
  add(A, X);
  add(A, Y);
  add(B, Y);
  add(B, Z);
  add(C, Z);
  add(C, 200);
  add(C, 201);
  for (int u = 20; u < 23; ++u) {
    add(u, 200);
    add(u, 201);
  }

  auto got = idsr::core_filter(xs, 2, 2);
  EXPECT_EQ(got, core_filter_oracle(xs, 2));
  EXPECT_EQ(got.size(), 8u);
  for (const auto& x : got) {
    EXPECT_NE(x.user, A);
    EXPECT_NE(x.user, B);
    EXPECT_GE(x.item, 200);
  }
}

TEST(dataset, reindex_ascending_raw_ids) {
  std::vector<Interaction> xs = {
      {50, 7, 1}, {3, 900, 2}, {50, 900, 3}, {3, 7, 4}};
  auto rx = idsr::reindex(xs);
  EXPECT_EQ(rx.user_raw, (std::vector<int>{3, 50}));
  EXPECT_EQ(rx.item_raw, (std::vector<int>{7, 900}));
  EXPECT_EQ(rx.interactions[0], (Interaction{1, 0, 1}));
  EXPECT_EQ(rx.interactions[1], (Interaction{0, 1, 2}));
  EXPECT_EQ(rx.interactions[2], (Interaction{1, 1, 3}));
  EXPECT_EQ(rx.interactions[3], (Interaction{0, 0, 4}));
}

TEST(dataset, user_sequences_stable_on_ties) {
  std::vector<Interaction> xs = {
      {0, 5, 100}, {0, 6, 100}, {0, 7, 50}, {0, 8, 100}};
  auto seqs = idsr::user_sequences(xs, 1);
  ASSERT_EQ(seqs[0].size(), 4u);
  EXPECT_EQ(seqs[0][0].first, 7);  // earliest timestamp first
  EXPECT_EQ(seqs[0][1].first, 5);  // ties keep file order
  EXPECT_EQ(seqs[0][2].first, 6);
  EXPECT_EQ(seqs[0][3].first, 8);
}

TEST(dataset, sliding_windows_hand_case) {
  std::vector<std::vector<std::pair<int, std::int64_t>>> seqs(2);
  for (int k = 0; k < 5; ++k) seqs[0].emplace_back(10 + k, 1000 + k);
  for (int k = 0; k < 3; ++k) seqs[1].emplace_back(20 + k, 2000 + k);

  auto samples = idsr::sliding_windows(seqs, 3);
  ASSERT_EQ(samples.size(), 2u);  // user 1 has only 3 events: no window
  EXPECT_EQ(samples[0].user, 0);
  EXPECT_EQ(samples[0].inputs, (std::vector<int>{10, 11, 12}));
  EXPECT_EQ(samples[0].target, 13);
  EXPECT_EQ(samples[0].timestamp, 1003);
  EXPECT_EQ(samples[1].inputs, (std::vector<int>{11, 12, 13}));
  EXPECT_EQ(samples[1].target, 14);
  EXPECT_EQ(samples[1].timestamp, 1004);
}

std::vector<Sample> synthetic_samples(int n, std::uint64_t seed) {
  idsr::Rng rng(seed);
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.user = static_cast<int>(rng.next_below(10));
    for (int j = 0; j < 3; ++j)
      s.inputs.push_back(static_cast<int>(rng.next_below(30)));
    s.target = static_cast<int>(rng.next_below(30));
    s.timestamp = static_cast<std::int64_t>(rng.next_below(1000000));
    out.push_back(std::move(s));
  }
  return out;
}

TEST(dataset, split_sizes_and_temporal_cut) {
  auto samples = synthetic_samples(100, 42);
  idsr::SplitSpec sp;
  sp.seed = 5;
  auto sx = idsr::split_samples(samples, sp);
  EXPECT_EQ(sx.train.size(), 70u);
  EXPECT_EQ(sx.valid.size(), 10u);
  EXPECT_EQ(sx.test.size() + sx.dropped_test, 20u);

  std::int64_t pool_max = 0;
  for (const auto& s : sx.train) pool_max = std::max(pool_max, s.timestamp);
  for (const auto& s : sx.valid) pool_max = std::max(pool_max, s.timestamp);
  for (const auto& s : sx.test) EXPECT_GE(s.timestamp, pool_max);
  EXPECT_GE(sx.time_cut, pool_max);
}

TEST(dataset, split_deterministic_in_seed) {
  auto samples = synthetic_samples(200, 43);
  idsr::SplitSpec sp;
  sp.seed = 9;
  auto a = idsr::split_samples(samples, sp);
  auto b = idsr::split_samples(samples, sp);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.valid, b.valid);
  EXPECT_EQ(a.test, b.test);

  sp.seed = 10;
  auto c = idsr::split_samples(samples, sp);
  EXPECT_EQ(a.test, c.test);  // test cut is temporal, seed-independent
  EXPECT_NE(a.train, c.train);
}

TEST(dataset, split_drops_unseen_test_targets) {
  // 6 samples; the newest two are test; target 99 never occurs in the pool
  std::vector<Sample> samples;
  for (int i = 0; i < 6; ++i) {
    Sample s;
    s.user = 0;
    s.inputs = {1, 2, 3};
    s.target = (i == 5) ? 99 : 4;
    s.timestamp = 100 + i;
    samples.push_back(std::move(s));
  }
  idsr::SplitSpec sp;  // 0.7/0.1/0.2 of 6 -> pool 4 (floor 4.8), test 2
  sp.seed = 1;
  auto sx = idsr::split_samples(samples, sp);
  EXPECT_EQ(sx.dropped_test, 1u);
  ASSERT_EQ(sx.test.size(), 1u);
  EXPECT_EQ(sx.test[0].target, 4);
}

TEST(dataset, split_rejects_degenerate_outcomes) {
  // two samples cannot populate all three splits
  auto samples = synthetic_samples(2, 44);
  EXPECT_THROW(idsr::split_samples(samples, idsr::SplitSpec{}),
               idsr::DataError);
}

TEST(dataset, filter_to_nothing_is_an_error) {
  auto raw = testutil::make_raw(testutil::SyntheticSpec{});
  EXPECT_THROW(idsr::build_dataset(raw, 5, 1000, 1000, idsr::SplitSpec{}),
               idsr::DataError);
}

TEST(dataset, split_rejects_bad_ratios) {
  idsr::SplitSpec sp;
  sp.train = 0.5;
  sp.valid = 0.1;
  sp.test = 0.1;  // sums to 0.7
  EXPECT_THROW(idsr::split_samples({}, sp), idsr::ConfigError);
  sp = idsr::SplitSpec{};
  sp.train = -0.1;
  sp.valid = 0.9;
  sp.test = 0.2;
  EXPECT_THROW(idsr::split_samples({}, sp), idsr::ConfigError);
}

TEST(dataset, build_dataset_end_to_end) {
  testutil::SyntheticSpec spec;
  auto raw = testutil::make_raw(spec);
  idsr::SplitSpec sp;
  sp.seed = 3;
  auto ds = idsr::build_dataset(raw, 5, 5, 5, sp);

  EXPECT_EQ(ds.stats.raw_users, spec.n_users);
  EXPECT_EQ(ds.stats.raw_interactions,
            static_cast<std::size_t>(spec.n_users * spec.events_per_user));
  EXPECT_GT(ds.stats.users, 0);
  EXPECT_GT(ds.stats.items, 0);
  EXPECT_LE(ds.stats.items, ds.stats.raw_items);
  EXPECT_EQ(ds.genres.rows(), ds.stats.items);
  EXPECT_EQ(ds.genres.cols(), 19);
  EXPECT_FALSE(ds.train.empty());

  // genre rows must match the raw flags of the mapped raw ids
  for (int i = 0; i < ds.stats.items; ++i) {
    const auto& flags = raw.item_flags.at(ds.item_raw[i]);
    for (std::size_t g = 0; g < flags.size(); ++g)
      EXPECT_EQ(ds.genres(i, static_cast<int>(g)), flags[g] ? 1.0 : 0.0);
  }

  // every sample references valid indices
  auto check = [&](const std::vector<Sample>& v) {
    for (const auto& s : v) {
      EXPECT_GE(s.user, 0);
      EXPECT_LT(s.user, ds.stats.users);
      EXPECT_EQ(s.inputs.size(), 5u);
      for (int it : s.inputs) {
        EXPECT_GE(it, 0);
        EXPECT_LT(it, ds.stats.items);
      }
      EXPECT_GE(s.target, 0);
      EXPECT_LT(s.target, ds.stats.items);
    }
  };
  check(ds.train);
  check(ds.valid);
  check(ds.test);
}

TEST(dataset_io, ml100k_loader_parses_synthetic_dir) {
  auto dir = testutil::fresh_dir("ml100k_load");
  testutil::SyntheticSpec spec;
  testutil::write_ml100k_dir(dir, spec);
  auto raw = idsr::load_raw(dir);
  EXPECT_EQ(raw.format, "ml100k");
  EXPECT_EQ(raw.interactions.size(),
            static_cast<std::size_t>(spec.n_users * spec.events_per_user));
  EXPECT_EQ(raw.item_flags.size(), static_cast<std::size_t>(spec.n_items));
  EXPECT_EQ(raw.genre_names.size(), 19u);

  auto direct = testutil::make_raw(spec);
  EXPECT_EQ(raw.interactions, direct.interactions);
  EXPECT_EQ(raw.item_flags.at(1), direct.item_flags.at(1));
}

TEST(dataset_io, ml1m_loader_parses_synthetic_dir) {
  auto dir = testutil::fresh_dir("ml1m_load");
  testutil::SyntheticSpec spec;
  testutil::write_ml1m_dir(dir, spec);
  auto raw = idsr::load_raw(dir);
  EXPECT_EQ(raw.format, "ml1m");
  EXPECT_EQ(raw.genre_names.size(), 18u);
  EXPECT_EQ(raw.interactions.size(),
            static_cast<std::size_t>(spec.n_users * spec.events_per_user));
  for (const auto& [id, flags] : raw.item_flags) {
    int set = 0;
    for (auto f : flags) set += f;
    EXPECT_GE(set, 1) << "item " << id;
  }
}

TEST(dataset_io, roundtrip_and_reproducible_bytes) {
  auto raw = testutil::make_raw(testutil::SyntheticSpec{});
  idsr::SplitSpec sp;
  sp.seed = 11;
  auto ds = idsr::build_dataset(raw, 5, 5, 5, sp);

  auto dir1 = testutil::fresh_dir("roundtrip1");
  auto dir2 = testutil::fresh_dir("roundtrip2");
  idsr::write_dataset(dir1, ds);
  idsr::write_dataset(dir2, ds);
  for (const char* name :
       {"manifest.json", "train.tsv", "valid.tsv", "test.tsv", "genres.tsv",
        "users.tsv", "items.tsv", "genre_names.txt"})
    EXPECT_EQ(idsr::read_file(dir1 / name), idsr::read_file(dir2 / name))
        << name;

  auto back = idsr::read_dataset(dir1);
  EXPECT_EQ(back.format, ds.format);
  EXPECT_EQ(back.train, ds.train);
  EXPECT_EQ(back.valid, ds.valid);
  EXPECT_EQ(back.test, ds.test);
  EXPECT_EQ(back.user_raw, ds.user_raw);
  EXPECT_EQ(back.item_raw, ds.item_raw);
  EXPECT_EQ(back.genre_names, ds.genre_names);
  EXPECT_EQ(back.genres, ds.genres);
  EXPECT_EQ(back.stats.users, ds.stats.users);
  EXPECT_EQ(back.stats.raw_interactions, ds.stats.raw_interactions);
  EXPECT_EQ(back.dropped_test, ds.dropped_test);
  EXPECT_EQ(back.time_cut, ds.time_cut);
  EXPECT_EQ(back.input_len, ds.input_len);
  EXPECT_EQ(back.split.seed, ds.split.seed);
}

TEST(dataset_io, detects_corruption) {
  auto raw = testutil::make_raw(testutil::SyntheticSpec{});
  auto ds = idsr::build_dataset(raw, 5, 5, 5, idsr::SplitSpec{});
  auto dir = testutil::fresh_dir("corrupt");
  idsr::write_dataset(dir, ds);

  auto bytes = idsr::read_file(dir / "train.tsv");
  bytes[0] = bytes[0] == '1' ? '2' : '1';
  idsr::write_file(dir / "train.tsv", bytes);
  EXPECT_THROW(idsr::read_dataset(dir), idsr::DataError);
}

TEST(dataset_io, missing_genre_row_is_an_error) {
  auto raw = testutil::make_raw(testutil::SyntheticSpec{});
  raw.item_flags.erase(1);  // item 1 is popular enough to survive filtering
  EXPECT_THROW(idsr::build_dataset(raw, 5, 5, 5, idsr::SplitSpec{}),
               idsr::DataError);
}

}  // namespace
