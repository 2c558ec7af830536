// command-line front end: prepare / train / eval / sweep / report

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "idsr/baselines.hpp"
#include "idsr/checkpoint.hpp"
#include "idsr/config.hpp"
#include "idsr/dataset_io.hpp"
#include "idsr/reporting.hpp"
#include "idsr/trainer.hpp"

namespace fs = std::filesystem;
using namespace idsr;

namespace {

std::string dataset_checksum(const fs::path& data_dir) {
  return fnv1a64_hex(read_file(data_dir / "manifest.json"));
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

std::string sanitize_cell(std::string s) {
  for (char& c : s)
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  return s;
}

// shared by model / pop / mmr evaluation paths
std::vector<EvalRow> evaluate_lists(
    const std::function<std::vector<int>(const Sample&)>& list_for,
    const std::vector<Sample>& samples, const std::vector<int>& ks,
    const Mat& genres, int threads) {
  std::size_t n_shards = std::max<std::size_t>(
      1, std::min<std::size_t>(static_cast<std::size_t>(threads),
                               samples.size()));
  std::vector<std::vector<MetricAccumulator>> acc(
      n_shards, std::vector<MetricAccumulator>(ks.size()));
  parallel_shards(samples.size(), static_cast<int>(n_shards),
                  [&](std::size_t shard, std::size_t begin, std::size_t end) {
                    for (std::size_t s = begin; s < end; ++s) {
                      auto list = list_for(samples[s]);
                      for (std::size_t j = 0; j < ks.size(); ++j)
                        acc[shard][j].add(list, samples[s].target, genres,
                                          ks[j]);
                    }
                  });
  std::vector<EvalRow> rows;
  for (std::size_t j = 0; j < ks.size(); ++j) {
    MetricAccumulator total;
    for (std::size_t shard = 0; shard < n_shards; ++shard)
      total.merge(acc[shard][j]);
    rows.push_back({ks[j], total.recall(), total.mrr(), total.ild(), total.n});
  }
  return rows;
}

struct PrepareArgs {
  std::string input, format = "auto", out;
  int window = 9, min_user = 5, min_item = 5;
  std::uint64_t seed = 1;
  double train_ratio = 0.7, valid_ratio = 0.1, test_ratio = 0.2;
};

int cmd_prepare(const PrepareArgs& a) {
  RawCorpus raw = load_raw(a.input, a.format == "auto" ? "" : a.format);
  SplitSpec sp;
  sp.train = a.train_ratio;
  sp.valid = a.valid_ratio;
  sp.test = a.test_ratio;
  sp.seed = a.seed;
  Dataset ds = build_dataset(raw, a.window, a.min_user, a.min_item, sp);
  ensure_dir(a.out);
  write_dataset(a.out, ds);
  std::cout << "format: " << ds.format << "\n"
            << "raw: " << ds.stats.raw_users << " users, "
            << ds.stats.raw_items << " items, " << ds.stats.raw_interactions
            << " interactions\n"
            << "filtered: " << ds.stats.users << " users, " << ds.stats.items
            << " items, " << ds.stats.interactions << " interactions\n"
            << "samples: " << ds.train.size() << " train, " << ds.valid.size()
            << " valid, " << ds.test.size() << " test (dropped "
            << ds.dropped_test << " test samples with unseen targets)\n"
            << "wrote " << (fs::path(a.out) / "manifest.json").string() << "\n";
  return 0;
}

struct TrainArgs {
  std::string config, data, out, resume;
  double lambda = -1.0;  // < 0: keep the config's value
  int intents = -1;
  int threads = 0;
  bool quiet = false;
};

void write_train_report(const fs::path& path, const TrainReport& r) {
  nlohmann::json j;
  j["config"] = r.config_echo;
  j["best_epoch"] = r.best_epoch;
  j["best_val"] = r.best_val;
  j["seconds"] = r.seconds;
  j["n_train"] = r.n_train;
  j["n_valid"] = r.n_valid;
  j["stopped_early"] = r.stopped_early;
  auto& es = j["epochs"] = nlohmann::json::array();
  for (const auto& e : r.epochs)
    es.push_back({{"epoch", e.epoch},
                  {"loss", e.loss},
                  {"relevance", e.relevance},
                  {"diversity", e.diversity},
                  {"val_metric", e.val_metric},
                  {"val_recall", e.val_recall},
                  {"val_ild", e.val_ild},
                  {"clipped_batches", e.clipped_batches},
                  {"seconds", e.seconds}});
  write_file(path, j.dump(2) + "\n");
}

int cmd_train(const TrainArgs& a) {
  if (a.config.empty() == a.resume.empty())
    throw ConfigError("pass exactly one of --config or --resume");

  Dataset data = read_dataset(a.data);
  std::string data_id = dataset_checksum(a.data);
  int n_items = static_cast<int>(data.genres.rows());

  TrainConfig cfg;
  std::optional<std::pair<CheckpointMeta, ModelParams>> loaded;
  if (!a.resume.empty()) {
    loaded = load_checkpoint(a.resume);
    cfg = loaded->first.train;
    if (loaded->first.n_items != n_items)
      throw DataError("checkpoint covers " +
                      std::to_string(loaded->first.n_items) +
                      " items but the dataset has " + std::to_string(n_items));
    if (loaded->first.dataset_id != data_id)
      std::cerr << "warning: checkpoint was trained on a different prepared "
                   "dataset (checksum mismatch)\n";
  } else {
    cfg = TrainConfig::parse_text(read_file(a.config));
  }
  if (a.lambda >= 0.0) cfg.lambda = a.lambda;
  if (a.intents >= 0) cfg.n_intents = a.intents;
  if (a.threads > 0) cfg.threads = a.threads;
  cfg.validate();

  RunManifest man;
  man.command = "train";
  man.config_text = cfg.to_text();
  man.dataset_checksum = data_id;
  man.run_id = derive_run_id("train", man.config_text, data_id);
  man.started_at = now_iso8601();

  Trainer trainer(cfg, data, a.quiet ? nullptr : &std::cout);
  TrainResult res;
  if (loaded) {
    ModelConfig mcfg = cfg.model_config(n_items);
    IdsrModel model(mcfg, loaded->second);
    auto [metric, recall, ild] = trainer.validate(model);
    if (metric != loaded->first.best_val)
      throw Error("resume check failed: stored validation metric " +
                  std::to_string(loaded->first.best_val) +
                  " but recomputed " + std::to_string(metric));
    if (!a.quiet)
      std::cout << "resume check: validation metric " << metric
                << " reproduced at epoch " << loaded->first.epoch << "\n";
    res = trainer.run(&loaded->second, loaded->first.epoch + 1,
                      loaded->first.best_val);
    if (res.report.best_epoch == 0) {  // nothing beat the loaded checkpoint
      res.report.best_epoch = loaded->first.epoch;
      res.best_params = loaded->second;
    }
  } else {
    res = trainer.run();
  }

  ensure_dir(a.out);
  CheckpointMeta meta;
  meta.train = cfg;
  meta.n_items = n_items;
  meta.epoch = res.report.best_epoch;
  meta.best_val = res.report.best_val;
  meta.dataset_id = data_id;
  fs::path ckpt = fs::path(a.out) / "model.ckpt";
  save_checkpoint(ckpt, meta, res.best_params);
  write_train_report(fs::path(a.out) / "train_report.json", res.report);

  man.finished_at = now_iso8601();
  man.artifacts = {"model.ckpt", "train_report.json"};
  man.save(fs::path(a.out) / "run.json");

  if (!a.quiet)
    std::cout << "best epoch " << res.report.best_epoch << " (val "
              << res.report.best_val << "), checkpoint " << ckpt.string()
              << "\n";
  return 0;
}

struct EvalArgs {
  std::string ckpt, data, out, baseline, name;
  std::string ks = "10,20";
  bool mmr = false;
  double theta = 0.5;
  int candidates = 100;
  double lambda = -1.0;
  int threads = 1;
  std::string export_scores;
};

std::vector<int> parse_ks(const std::string& s) {
  std::vector<int> ks;
  for (const auto& tok : detail::split(s, ","))
    ks.push_back(static_cast<int>(detail::parse_ll(tok, "--ks")));
  if (ks.empty()) throw ConfigError("--ks must name at least one cutoff");
  for (int k : ks)
    if (k < 1) throw ConfigError("cutoffs must be positive");
  return ks;
}

int cmd_eval(const EvalArgs& a) {
  Dataset data = read_dataset(a.data);
  std::string data_id = dataset_checksum(a.data);
  int n_items = static_cast<int>(data.genres.rows());
  auto ks = parse_ks(a.ks);
  int max_k = *std::max_element(ks.begin(), ks.end());
  if (max_k > n_items)
    throw ConfigError("cutoff " + std::to_string(max_k) +
                      " exceeds catalog size " + std::to_string(n_items));

  ModelMetrics mm;
  std::string config_text;

  std::optional<IdsrModel> model;
  double decode_lambda = 1.0;
  if (!a.ckpt.empty()) {
    auto [meta, params] = load_checkpoint(a.ckpt);
    if (meta.n_items != n_items)
      throw DataError("checkpoint covers " + std::to_string(meta.n_items) +
                      " items but the dataset has " + std::to_string(n_items));
    if (meta.dataset_id != data_id)
      std::cerr << "warning: checkpoint was trained on a different prepared "
                   "dataset (checksum mismatch)\n";
    model.emplace(meta.train.model_config(n_items), std::move(params));
    decode_lambda = a.lambda >= 0.0 ? a.lambda : meta.train.lambda;
    config_text = meta.train.to_text();
  }

  std::ofstream scores_out;
  if (!a.export_scores.empty()) {
    if (!model) throw ConfigError("--export-scores needs --ckpt");
    scores_out.open(a.export_scores, std::ios::trunc);
    if (!scores_out) throw IoError("cannot write " + a.export_scores);
    scores_out << "sample\titem\tscore\n";
  }

  if (!a.baseline.empty()) {
    if (a.baseline != "pop")
      throw ConfigError("unknown baseline '" + a.baseline +
                        "' (supported: pop)");
    auto ranking = pop_ranking(data.train, n_items, max_k);
    mm.name = a.name.empty() ? "pop" : a.name;
    mm.rows = evaluate_lists([&](const Sample&) { return ranking; },
                             data.test, ks, data.genres, a.threads);
  } else if (a.mmr) {
    if (!model) throw ConfigError("--mmr needs --ckpt for relevance scores");
    if (a.candidates < max_k)
      throw ConfigError("--candidates must reach the largest cutoff");
    mm.name = a.name.empty() ? "mmr" : a.name;
    mm.rows = evaluate_lists(
        [&](const Sample& s) {
          Vec scores = model->relevance_scores(s.inputs);
          return mmr_rerank(scores, a.candidates, a.theta, max_k, data.genres);
        },
        data.test, ks, data.genres, a.threads);
  } else {
    if (!model) throw ConfigError("pass --ckpt or --baseline");
    mm.name = a.name.empty() ? "model" : a.name;
    mm.rows = evaluate_lists(
        [&](const Sample& s) {
          return model->recommend(s.inputs, decode_lambda, max_k);
        },
        data.test, ks, data.genres, a.threads);
  }

  if (scores_out.is_open()) {
    int top_c = std::min(a.candidates, n_items);
    for (std::size_t s = 0; s < data.test.size(); ++s) {
      Vec scores = model->relevance_scores(data.test[s].inputs);
      std::vector<int> order(n_items);
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int x, int y) {
        if (scores(x) != scores(y)) return scores(x) > scores(y);
        return x < y;
      });
      for (int r = 0; r < top_c; ++r)
        scores_out << s << "\t" << order[r] << "\t"
                   << detail::fmt_short(scores(order[r])) << "\n";
    }
    scores_out.close();
  }

  std::string tsv = metrics_to_tsv({mm});
  std::cout << render_comparison({mm});
  if (!a.out.empty()) {
    ensure_dir(a.out);
    write_file(fs::path(a.out) / "metrics.tsv", tsv);
    RunManifest man;
    man.command = "eval";
    man.config_text = config_text;
    man.dataset_checksum = data_id;
    man.run_id = derive_run_id("eval " + mm.name, config_text, data_id);
    man.started_at = man.finished_at = now_iso8601();
    man.artifacts = {"metrics.tsv"};
    man.save(fs::path(a.out) / "run.json");
  }
  return 0;
}

struct SweepArgs {
  std::string config, data, out;
  int threads = 0;
  bool quiet = false;
};

int cmd_sweep(const SweepArgs& a) {
  TrainConfig base = TrainConfig::parse_text(read_file(a.config));
  if (a.threads > 0) base.threads = a.threads;
  Dataset data = read_dataset(a.data);
  std::string data_id = dataset_checksum(a.data);
  ensure_dir(a.out);

  RunManifest man;
  man.command = "sweep";
  man.config_text = base.to_text();
  man.dataset_checksum = data_id;
  man.run_id = derive_run_id("sweep", man.config_text, data_id);
  man.started_at = now_iso8601();

  std::ofstream table(fs::path(a.out) / "sweep.tsv", std::ios::trunc);
  if (!table) throw IoError("cannot write sweep.tsv");
  table << "lambda\tstatus\tval_recall@20\tval_ild@20\trecall@10\tmrr@10\t"
           "ild@10\trecall@20\tmrr@20\tild@20\n";

  struct Point {
    double lambda, recall20, mrr20, ild20;
  };
  std::vector<Point> good;

  for (int i = 0; i <= 10; ++i) {
    double lambda = static_cast<double>(i) / 10.0;
    TrainConfig cfg = base;
    cfg.lambda = lambda;
    char tag[8];
    std::snprintf(tag, sizeof(tag), "%.1f", lambda);
    try {
      cfg.validate();
      Trainer trainer(cfg, data, a.quiet ? nullptr : &std::cout);
      if (!a.quiet) std::cout << "--- lambda " << tag << "\n";
      auto res = trainer.run();
      ModelConfig mcfg = cfg.model_config(static_cast<int>(data.genres.rows()));
      IdsrModel best(mcfg, res.best_params);
      auto val = evaluate_model(best, data.valid, cfg.lambda,
                                {trainer.validation_k()}, data.genres,
                                cfg.threads);
      auto test = evaluate_model(best, data.test, cfg.lambda, {10, 20},
                                 data.genres, cfg.threads);
      table << tag << "\tok\t" << detail::fmt_short(val[0].recall) << "\t"
            << detail::fmt_short(val[0].ild);
      for (const auto& r : test)
        table << "\t" << detail::fmt_short(r.recall) << "\t"
              << detail::fmt_short(r.mrr) << "\t" << detail::fmt_short(r.ild);
      table << "\n" << std::flush;
      good.push_back({lambda, test[1].recall, test[1].mrr, test[1].ild});
    } catch (const Error& e) {
      table << tag << "\terror[" << e.category()
            << "]: " << sanitize_cell(e.what())
            << "\tnan\tnan\tnan\tnan\tnan\tnan\tnan\tnan\n"
            << std::flush;
      std::cerr << "lambda " << tag << " failed: " << e.what() << "\n";
    }
  }
  table.close();

  man.artifacts = {"sweep.tsv"};
  auto plot = [&](const std::string& ylabel, auto getter,
                  const std::string& file) {
    if (good.size() < 2) return;
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : good) pts.push_back({p.lambda, getter(p)});
    write_file(fs::path(a.out) / file,
               line_plot_svg(ylabel + " vs lambda", "lambda", ylabel, pts));
    man.artifacts.push_back(file);
  };
  plot("recall@20", [](const Point& p) { return p.recall20; },
       "sweep_recall20.svg");
  plot("mrr@20", [](const Point& p) { return p.mrr20; }, "sweep_mrr20.svg");
  plot("ild@20", [](const Point& p) { return p.ild20; }, "sweep_ild20.svg");

  man.finished_at = now_iso8601();
  man.save(fs::path(a.out) / "run.json");
  std::cout << "sweep table: " << (fs::path(a.out) / "sweep.tsv").string()
            << " (" << good.size() << "/11 runs ok)\n";
  return good.empty() ? 1 : 0;
}

struct ReportArgs {
  std::vector<std::string> runs;
  std::string out;
};

int cmd_report(const ReportArgs& a) {
  std::vector<ModelMetrics> all;
  for (const auto& r : a.runs) {
    fs::path p(r);
    if (fs::is_directory(p)) p /= "metrics.tsv";
    for (auto& m : parse_metrics_tsv(read_file(p))) all.push_back(std::move(m));
  }
  std::string table = render_comparison(all);
  std::cout << table;
  if (!a.out.empty()) {
    ensure_dir(fs::path(a.out));
    write_file(fs::path(a.out) / "report.tsv", metrics_to_tsv(all));
    write_file(fs::path(a.out) / "report.txt", table);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"intent-aware diversified sequential recommendation lab"};
  app.require_subcommand(1);

  PrepareArgs pa;
  auto* prep = app.add_subcommand("prepare", "parse, filter, and split a raw dataset");
  prep->add_option("--input", pa.input, "raw dataset directory")->required();
  prep->add_option("--format", pa.format, "auto|ml100k|ml1m");
  prep->add_option("--out", pa.out, "output dataset directory")->required();
  prep->add_option("--seed", pa.seed, "split shuffle seed");
  prep->add_option("--window", pa.window, "input sequence length");
  prep->add_option("--min-user", pa.min_user, "min interactions per user");
  prep->add_option("--min-item", pa.min_item, "min interactions per item");
  prep->add_option("--train-ratio", pa.train_ratio);
  prep->add_option("--valid-ratio", pa.valid_ratio);
  prep->add_option("--test-ratio", pa.test_ratio);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train a model on a prepared dataset");
  train->add_option("--config", ta.config, "key = value config file");
  train->add_option("--data", ta.data, "prepared dataset directory")->required();
  train->add_option("--out", ta.out, "run output directory")->required();
  train->add_option("--resume", ta.resume, "checkpoint to continue from");
  train->add_option("--lambda", ta.lambda, "override config lambda");
  train->add_option("--intents", ta.intents, "override config n_intents");
  train->add_option("--threads", ta.threads, "override config threads");
  train->add_flag("--quiet", ta.quiet, "suppress per-epoch lines");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "score a checkpoint or baseline on the test split");
  ev->add_option("--ckpt", ea.ckpt, "model checkpoint");
  ev->add_option("--data", ea.data, "prepared dataset directory")->required();
  ev->add_option("--out", ea.out, "output directory (metrics.tsv, run.json)");
  ev->add_option("--ks", ea.ks, "comma-separated cutoffs (default 10,20)");
  ev->add_option("--baseline", ea.baseline, "evaluate a baseline: pop");
  ev->add_flag("--mmr", ea.mmr, "re-rank the checkpoint's scores with MMR");
  ev->add_option("--theta", ea.theta, "MMR relevance weight");
  ev->add_option("--candidates", ea.candidates, "MMR candidate pool size");
  ev->add_option("--lambda", ea.lambda, "override decode lambda");
  ev->add_option("--name", ea.name, "row label in the metrics table");
  ev->add_option("--threads", ea.threads, "evaluation threads");
  ev->add_option("--export-scores", ea.export_scores,
                 "write per-sample top-candidate scores to this file");

  SweepArgs sa;
  auto* sw = app.add_subcommand("sweep", "train and evaluate across lambda = 0.0..1.0");
  sw->add_option("--config", sa.config, "base config file")->required();
  sw->add_option("--data", sa.data, "prepared dataset directory")->required();
  sw->add_option("--out", sa.out, "sweep output directory")->required();
  sw->add_option("--threads", sa.threads, "override config threads");
  sw->add_flag("--quiet", sa.quiet, "suppress per-epoch lines");

  ReportArgs ra;
  auto* rep = app.add_subcommand("report", "merge metric tables into one comparison");
  rep->add_option("runs", ra.runs, "run directories or metrics.tsv files")
      ->required();
  rep->add_option("--out", ra.out, "directory for report.tsv / report.txt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (prep->parsed()) return cmd_prepare(pa);
    if (train->parsed()) return cmd_train(ta);
    if (ev->parsed()) return cmd_eval(ea);
    if (sw->parsed()) return cmd_sweep(sa);
    if (rep->parsed()) return cmd_report(ra);
  } catch (const Error& e) {
    std::cerr << "error[" << e.category() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[runtime]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
