#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <tuple>
#include <vector>

#include "idsr/adam.hpp"
#include "idsr/config.hpp"
#include "idsr/dataset.hpp"
#include "idsr/loss.hpp"
#include "idsr/metrics.hpp"
#include "idsr/model.hpp"
#include "idsr/threading.hpp"

namespace idsr {

struct EpochLog {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double relevance = 0.0;
  double diversity = 0.0;
  double val_metric = 0.0;
  double val_recall = 0.0;
  double val_ild = 0.0;
  int clipped_batches = 0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;  // 1-based; 0 when no epoch ran
  double best_val = 0.0;
  double seconds = 0.0;
  std::size_t n_train = 0;
  std::size_t n_valid = 0;
  bool stopped_early = false;
  std::string config_echo;
};

struct TrainResult {
  ModelParams best_params;
  TrainReport report;
};

struct EvalRow {
  int k = 0;
  double recall = 0.0;
  double mrr = 0.0;
  double ild = 0.0;
  std::size_t n = 0;
};

// Recall/MRR/ILD at each cutoff, decoding one list of length max(ks).
inline std::vector<EvalRow> evaluate_model(const IdsrModel& model,
                                           const std::vector<Sample>& samples,
                                           double lambda,
                                           const std::vector<int>& ks,
                                           const Mat& genres, int threads = 1) {
  if (ks.empty()) throw ConfigError("need at least one cutoff");
  int max_k = *std::max_element(ks.begin(), ks.end());
  std::size_t n_shards =
      std::max<std::size_t>(1, std::min<std::size_t>(threads, samples.size()));
  std::vector<std::vector<MetricAccumulator>> shard_acc(
      n_shards, std::vector<MetricAccumulator>(ks.size()));
  parallel_shards(samples.size(), static_cast<int>(n_shards),
                  [&](std::size_t shard, std::size_t begin, std::size_t end) {
                    for (std::size_t s = begin; s < end; ++s) {
                      auto list =
                          model.recommend(samples[s].inputs, lambda, max_k);
                      for (std::size_t j = 0; j < ks.size(); ++j)
                        shard_acc[shard][j].add(list, samples[s].target,
                                                genres, ks[j]);
                    }
                  });
  std::vector<EvalRow> rows;
  for (std::size_t j = 0; j < ks.size(); ++j) {
    MetricAccumulator acc;
    for (std::size_t shard = 0; shard < n_shards; ++shard)
      acc.merge(shard_acc[shard][j]);
    rows.push_back({ks[j], acc.recall(), acc.mrr(), acc.ild(), acc.n});
  }
  return rows;
}

// Largest pairwise genre distance in the catalog; scales ILD into [0, 1]
// for the composite selection metric.
inline double max_catalog_distance(const Mat& genres) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < genres.rows(); ++i)
    for (Eigen::Index j = i + 1; j < genres.rows(); ++j)
      best = std::max(best, (genres.row(i) - genres.row(j)).norm());
  return best;
}

class Trainer {
 public:
  Trainer(TrainConfig cfg, const Dataset& data, std::ostream* log = nullptr)
      : cfg_(std::move(cfg)), data_(data), log_(log) {
    cfg_.validate();
    if (data_.train.empty()) throw DataError("training split is empty");
    if (data_.valid.empty()) throw DataError("validation split is empty");
    int n_items = static_cast<int>(data_.genres.rows());
    if (cfg_.list_len > n_items)
      throw ConfigError("list_len exceeds the item catalog");
    val_k_ = std::min(20, n_items);
    if (cfg_.selection == Selection::composite) {
      ild_norm_ = max_catalog_distance(data_.genres);
      if (ild_norm_ <= 0) ild_norm_ = 1.0;
    }
  }

  // Full run from fresh Xavier weights, or from `warm` when resuming — in
  // that case best_so_far carries the stored metric so a worse continuation
  // cannot displace the loaded checkpoint.
  TrainResult run(const ModelParams* warm = nullptr, int first_epoch = 1,
                  double best_so_far = -1.0) {
    auto t0 = std::chrono::steady_clock::now();
    ModelConfig mcfg = cfg_.model_config(static_cast<int>(data_.genres.rows()));
    IdsrModel model(mcfg, warm ? *warm : init_params(mcfg, cfg_.seed));

    Adam opt(mcfg, cfg_.adam_config());
    TrainResult out;
    out.report.n_train = data_.train.size();
    out.report.n_valid = data_.valid.size();
    out.report.config_echo = cfg_.to_text();
    out.best_params = model.params();
    out.report.best_val = best_so_far;

    double best = best_so_far;
    int bad_epochs = 0;
    for (int epoch = first_epoch; epoch <= cfg_.max_epochs; ++epoch) {
      auto e0 = std::chrono::steady_clock::now();
      EpochLog row = run_epoch(model, opt, epoch);
      row.epoch = epoch;

      auto [metric, recall, ild] = validate(model);
      row.val_metric = metric;
      row.val_recall = recall;
      row.val_ild = ild;
      row.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - e0)
              .count();
      out.report.epochs.push_back(row);

      bool improved = metric > best;
      if (improved) {
        best = metric;
        bad_epochs = 0;
        out.best_params = model.params();
        out.report.best_epoch = epoch;
        out.report.best_val = metric;
      } else {
        ++bad_epochs;
      }
      log_epoch(row, improved);

      if (bad_epochs >= std::max(cfg_.patience, 1)) {
        out.report.stopped_early = true;
        break;
      }
    }
    out.report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return out;
  }

  // selection metric, recall@K and ILD@K on the validation split
  std::tuple<double, double, double> validate(const IdsrModel& model) const {
    auto rows = evaluate_model(model, data_.valid, cfg_.lambda, {val_k_},
                               data_.genres, cfg_.threads);
    double recall = rows[0].recall;
    double ild = rows[0].ild;
    double metric = cfg_.selection == Selection::recall
                        ? recall
                        : cfg_.lambda * recall +
                              (1.0 - cfg_.lambda) * ild / ild_norm_;
    return {metric, recall, ild};
  }

  int validation_k() const { return val_k_; }

 private:
  EpochLog run_epoch(IdsrModel& model, Adam& opt, int epoch) {
    std::vector<std::size_t> order(data_.train.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(mix64(cfg_.seed, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    const ModelConfig& mcfg = model.cfg();
    EpochLog row;
    std::size_t done = 0;
    int batch_id = 0;
    while (done < order.size()) {
      std::size_t batch_end =
          std::min(done + static_cast<std::size_t>(cfg_.batch_size),
                   order.size());
      std::size_t bsz = batch_end - done;
      std::size_t n_shards = std::max<std::size_t>(
          1, std::min<std::size_t>(cfg_.threads, bsz));

      std::vector<ModelParams> shard_grads;
      shard_grads.reserve(n_shards);
      for (std::size_t s = 0; s < n_shards; ++s)
        shard_grads.push_back(zero_params(mcfg));
      struct ShardLoss {
        double total = 0, rel = 0, div = 0;
        bool finite = true;
      };
      std::vector<ShardLoss> shard_loss(n_shards);

      parallel_shards(
          bsz, static_cast<int>(n_shards),
          [&](std::size_t shard, std::size_t begin, std::size_t end) {
            Tape tape;
            for (std::size_t b = begin; b < end; ++b) {
              std::size_t pos = done + b;  // position in the epoch ordering
              const Sample& sample = data_.train[order[pos]];
              tape.reset();
              Rng drop(mix64(mix64(cfg_.seed, static_cast<std::uint64_t>(epoch)),
                             static_cast<std::uint64_t>(pos) + 1));
              GenerateOptions gopt;
              gopt.lambda = cfg_.lambda;
              gopt.list_len = cfg_.objective == Objective::ce ? 1 : cfg_.list_len;
              gopt.target = sample.target;
              gopt.dropout_rng = cfg_.dropout > 0 ? &drop : nullptr;
              auto fr = model.generate(tape, sample.inputs, gopt,
                                       &shard_grads[shard]);
              Var total;
              double value, rel, div;
              if (cfg_.objective == Objective::ce) {
                total = ce_loss(tape, fr, sample.target);
                value = rel = tape.val(total)(0, 0);
                div = 0.0;
              } else {
                auto lb = idp_loss(tape, fr, cfg_.lambda, cfg_.position_weight);
                total = lb.total;
                value = lb.value;
                rel = lb.relevance;
                div = lb.diversity;
              }
              if (!std::isfinite(value)) {
                shard_loss[shard].finite = false;
                return;
              }
              tape.backward(total);
              shard_loss[shard].total += value;
              shard_loss[shard].rel += rel;
              shard_loss[shard].div += div;
            }
          });

      ModelParams& grads = shard_grads[0];
      std::vector<Mat*> dst;
      for_each_param(grads,
                     [&](const std::string&, Mat& m) { dst.push_back(&m); });
      for (std::size_t s = 1; s < n_shards; ++s) {
        std::size_t slot = 0;
        for_each_param(shard_grads[s], [&](const std::string&, const Mat& m) {
          *dst[slot++] += m;
        });
      }
      double batch_total = 0, batch_rel = 0, batch_div = 0;
      bool finite = true;
      for (const auto& sl : shard_loss) {
        batch_total += sl.total;
        batch_rel += sl.rel;
        batch_div += sl.div;
        finite = finite && sl.finite;
      }
      if (!finite || !std::isfinite(batch_total))
        throw Error("training diverged: non-finite loss at epoch " +
                    std::to_string(epoch) + ", batch " +
                    std::to_string(batch_id));

      scale_grads(grads, 1.0 / static_cast<double>(bsz));
      double norm = clip_global_norm(grads, cfg_.clip_norm);
      if (norm > cfg_.clip_norm) ++row.clipped_batches;
      opt.step(model.params(), grads);

      row.loss += batch_total;
      row.relevance += batch_rel;
      row.diversity += batch_div;
      done = batch_end;
      ++batch_id;
    }
    auto n = static_cast<double>(order.size());
    row.loss /= n;
    row.relevance /= n;
    row.diversity /= n;
    return row;
  }

  void log_epoch(const EpochLog& row, bool improved) const {
    if (!log_) return;
    std::ostringstream line;
    line << "epoch " << std::setw(3) << row.epoch << "/" << cfg_.max_epochs
         << "  loss " << std::fixed << std::setprecision(4) << row.loss
         << " (rel " << row.relevance << ", div " << row.diversity << ")"
         << "  val@" << val_k_ << " " << row.val_metric;
    if (improved) line << " *";
    if (row.clipped_batches > 0)
      line << "  [clipped " << row.clipped_batches << " batches]";
    line << "  " << std::setprecision(1) << row.seconds << "s";
    *log_ << line.str() << std::endl;
  }

  TrainConfig cfg_;
  const Dataset& data_;
  std::ostream* log_ = nullptr;
  int val_k_ = 20;
  double ild_norm_ = 1.0;
};

}  // namespace idsr
