#include "idsr/reporting.hpp"

#include <gtest/gtest.h>

#include "testutil.hpp"

using idsr::EvalRow;
using idsr::ModelMetrics;

namespace {

ModelMetrics mm(const std::string& name, std::vector<EvalRow> rows) {
  ModelMetrics m;
  m.name = name;
  m.rows = std::move(rows);
  return m;
}

TEST(metrics_table, tsv_round_trip_is_exact) {
  std::vector<ModelMetrics> in = {
      mm("pop", {{10, 0.0523, 0.0211, 2.71828182845904, 500},
                 {20, 0.0804, 0.0229, 2.9, 500}}),
      mm("idsr l=0.5", {{10, 1.0 / 3.0, 0.125, 3.4299999, 500},
                        {20, 0.171, 0.0429, 3.43, 500}}),
  };
  auto text = idsr::metrics_to_tsv(in);
  auto out = idsr::parse_metrics_tsv(text);
  ASSERT_EQ(out.size(), 2u);
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_EQ(out[i].name, in[i].name);
    ASSERT_EQ(out[i].rows.size(), in[i].rows.size());
    for (std::size_t j = 0; j < in[i].rows.size(); ++j) {
      EXPECT_EQ(out[i].rows[j].k, in[i].rows[j].k);
      EXPECT_EQ(out[i].rows[j].recall, in[i].rows[j].recall);
      EXPECT_EQ(out[i].rows[j].mrr, in[i].rows[j].mrr);
      EXPECT_EQ(out[i].rows[j].ild, in[i].rows[j].ild);
    }
  }
}

TEST(metrics_table, cutoff_mismatch_is_named) {
  std::vector<ModelMetrics> bad = {
      mm("a", {{10, 0.1, 0.1, 1.0, 10}, {20, 0.2, 0.1, 1.0, 10}}),
      mm("b", {{10, 0.1, 0.1, 1.0, 10}}),
  };
  try {
    idsr::metrics_to_tsv(bad);
    FAIL() << "expected cutoff mismatch";
  } catch (const idsr::Error& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("'b'"), std::string::npos);
    EXPECT_NE(msg.find("K=10"), std::string::npos);
    EXPECT_NE(msg.find("K=10,20"), std::string::npos);
  }
}

TEST(metrics_table, comparison_marks_best_per_column) {
  std::vector<ModelMetrics> in = {
      mm("pop", {{20, 0.08, 0.02, 3.0, 10}}),
      mm("gru", {{20, 0.18, 0.08, 2.5, 10}}),
  };
  auto table = idsr::render_comparison(in);
  EXPECT_NE(table.find("recall@20"), std::string::npos);
  EXPECT_NE(table.find("ild@20"), std::string::npos);
  // gru wins recall and mrr, pop wins ild
  EXPECT_NE(table.find("0.1800*"), std::string::npos);
  EXPECT_NE(table.find("0.0800*"), std::string::npos);
  EXPECT_NE(table.find("3.0000*"), std::string::npos);
  EXPECT_EQ(table.find("2.5000*"), std::string::npos);
}

TEST(metrics_table, rejects_malformed_text) {
  EXPECT_THROW(idsr::parse_metrics_tsv(""), idsr::DataError);
  EXPECT_THROW(idsr::parse_metrics_tsv("model\trecall@10\tmrr@10\tild@10\n"),
               idsr::DataError);
  EXPECT_THROW(idsr::parse_metrics_tsv("nonsense header\nrow"),
               idsr::DataError);
  EXPECT_THROW(
      idsr::parse_metrics_tsv("model\trecall@10\tmrr@10\tild@10\na\t1\t2\n"),
      idsr::DataError);
  EXPECT_THROW(idsr::parse_metrics_tsv(
                   "model\trecall@10\tmrr@10\tild@10\na\tx\t2\t3\n"),
               idsr::DataError);
}

TEST(plots, svg_has_all_points_and_labels) {
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i <= 10; ++i) pts.push_back({0.1 * i, 0.05 + 0.01 * i});
  auto svg = idsr::line_plot_svg("recall vs lambda", "lambda", "recall@20", pts);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("polyline"), std::string::npos);
  EXPECT_NE(svg.find("recall vs lambda"), std::string::npos);
  std::size_t circles = 0, at = 0;
  while ((at = svg.find("<circle", at)) != std::string::npos) {
    ++circles;
    ++at;
  }
  EXPECT_EQ(circles, 11u);
  EXPECT_THROW(idsr::line_plot_svg("t", "x", "y", {{0, 0}}),
               idsr::ConfigError);
}

TEST(run_manifest, round_trip_and_stable_ids) {
  idsr::RunManifest m;
  m.run_id = idsr::derive_run_id("train", "lambda = 0.5\n", "abc");
  m.command = "train";
  m.config_text = "lambda = 0.5\n";
  m.dataset_checksum = "abc";
  m.started_at = idsr::now_iso8601();
  m.finished_at = m.started_at;
  m.artifacts = {"model.ckpt", "metrics.tsv"};

  auto dir = testutil::fresh_dir("manifest");
  m.save(dir / "run.json");
  auto back = idsr::RunManifest::load(dir / "run.json");
  EXPECT_EQ(back.run_id, m.run_id);
  EXPECT_EQ(back.command, "train");
  EXPECT_EQ(back.config_text, m.config_text);
  EXPECT_EQ(back.artifacts, m.artifacts);
  EXPECT_EQ(back.code_version, idsr::kCodeVersion);

  EXPECT_EQ(idsr::derive_run_id("train", "lambda = 0.5\n", "abc"), m.run_id);
  EXPECT_NE(idsr::derive_run_id("train", "lambda = 0.6\n", "abc"), m.run_id);
  EXPECT_NE(idsr::derive_run_id("eval", "lambda = 0.5\n", "abc"), m.run_id);

  EXPECT_THROW(idsr::RunManifest::load(dir / "missing.json"), idsr::Error);
  idsr::write_file(dir / "bad.json", "{not json");
  EXPECT_THROW(idsr::RunManifest::load(dir / "bad.json"), idsr::DataError);
}

}  // namespace
