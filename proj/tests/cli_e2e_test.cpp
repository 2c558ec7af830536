// drives the installed `idsr` binary as a subprocess and checks the
// command-line contract: exit codes, categorized errors, artifact layout

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "idsr/dataset_io.hpp"
#include "idsr/reporting.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  if (const char* env = std::getenv("IDSR_BIN")) return env;
  return IDSR_BIN_PATH;
}

struct CliResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args, const std::string& tag) {
  fs::path log = testutil::fresh_dir("e2e_logs_" + tag) / "out.txt";
  std::string cmd = cli_path() + " " + args + " > " + log.string() + " 2>&1";
  int rc = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.output = fs::exists(log) ? idsr::read_file(log) : "";
  return r;
}

fs::path make_raw(const std::string& tag) {
  auto dir = testutil::fresh_dir("e2e_raw_" + tag);
  testutil::write_ml100k_dir(dir, {});
  return dir;
}

void write_config(const fs::path& p, const std::string& extra = "") {
  std::ofstream f(p);
  f << "embed_dim = 8\nintent_dim = 8\nn_intents = 2\nlambda = 0.5\n"
       "list_len = 3\nbatch_size = 32\nlearning_rate = 0.005\ndropout = 0\n"
       "max_epochs = 2\npatience = 5\nseed = 4\nthreads = 2\n"
    << extra;
}

TEST(cli, prepare_is_byte_deterministic) {
  auto raw = make_raw("det");
  auto d1 = testutil::fresh_dir("e2e_det1");
  auto d2 = testutil::fresh_dir("e2e_det2");
  std::string common = "prepare --input " + raw.string() +
                       " --window 5 --min-user 2 --min-item 2 --seed 9 --out ";
  ASSERT_EQ(run_cli(common + d1.string(), "det1").exit_code, 0);
  ASSERT_EQ(run_cli(common + d2.string(), "det2").exit_code, 0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(d1)) {
    EXPECT_EQ(idsr::read_file(e.path()),
              idsr::read_file(d2 / e.path().filename()))
        << e.path().filename();
    ++files;
  }
  EXPECT_GE(files, 5);
}

TEST(cli, full_pipeline_produces_parseable_artifacts) {
  auto raw = make_raw("pipe");
  auto data = testutil::fresh_dir("e2e_data");
  auto cfg = testutil::fresh_dir("e2e_cfg") / "train.cfg";
  write_config(cfg);
  auto run = testutil::fresh_dir("e2e_run");
  auto evald = testutil::fresh_dir("e2e_eval");
  auto popd = testutil::fresh_dir("e2e_pop");
  auto repd = testutil::fresh_dir("e2e_report");

  ASSERT_EQ(run_cli("prepare --input " + raw.string() + " --window 5 --out " +
                        data.string(),
                    "pipe1")
                .exit_code,
            0);
  auto train = run_cli("train --config " + cfg.string() + " --data " +
                           data.string() + " --out " + run.string(),
                       "pipe2");
  ASSERT_EQ(train.exit_code, 0) << train.output;
  EXPECT_TRUE(fs::exists(run / "model.ckpt"));
  EXPECT_TRUE(fs::exists(run / "train_report.json"));
  EXPECT_TRUE(fs::exists(run / "run.json"));
  EXPECT_NE(train.output.find("epoch   1/2"), std::string::npos);

  ASSERT_EQ(run_cli("eval --ckpt " + (run / "model.ckpt").string() +
                        " --data " + data.string() + " --name idsr --out " +
                        evald.string(),
                    "pipe3")
                .exit_code,
            0);
  ASSERT_EQ(run_cli("eval --baseline pop --data " + data.string() +
                        " --out " + popd.string(),
                    "pipe4")
                .exit_code,
            0);

  auto rows = idsr::parse_metrics_tsv(idsr::read_file(evald / "metrics.tsv"));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].name, "idsr");
  ASSERT_EQ(rows[0].rows.size(), 2u);
  EXPECT_EQ(rows[0].rows[1].k, 20);

  auto rep = run_cli("report " + evald.string() + " " + popd.string() +
                         " --out " + repd.string(),
                     "pipe5");
  ASSERT_EQ(rep.exit_code, 0);
  EXPECT_NE(rep.output.find("idsr"), std::string::npos);
  EXPECT_NE(rep.output.find("pop"), std::string::npos);
  auto merged = idsr::parse_metrics_tsv(idsr::read_file(repd / "report.tsv"));
  EXPECT_EQ(merged.size(), 2u);

  // manifest carries the dataset checksum it was trained against
  auto man = idsr::RunManifest::load(run / "run.json");
  EXPECT_EQ(man.command, "train");
  EXPECT_EQ(man.dataset_checksum,
            idsr::fnv1a64_hex(idsr::read_file(data / "manifest.json")));
}

TEST(cli, unknown_config_key_is_named_in_the_error) {
  auto raw = make_raw("badkey");
  auto data = testutil::fresh_dir("e2e_badkey_data");
  ASSERT_EQ(run_cli("prepare --input " + raw.string() + " --window 5 --out " +
                        data.string(),
                    "badkey1")
                .exit_code,
            0);
  auto cfg = testutil::fresh_dir("e2e_badkey_cfg") / "bad.cfg";
  write_config(cfg, "mystery_knob = 3\n");
  auto out = testutil::fresh_dir("e2e_badkey_out");
  auto r = run_cli("train --config " + cfg.string() + " --data " +
                       data.string() + " --out " + out.string(),
                   "badkey2");
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.output.find("error[config]"), std::string::npos);
  EXPECT_NE(r.output.find("mystery_knob"), std::string::npos);
}

TEST(cli, out_of_range_lambda_is_rejected_before_training) {
  auto raw = make_raw("lambda");
  auto data = testutil::fresh_dir("e2e_lambda_data");
  ASSERT_EQ(run_cli("prepare --input " + raw.string() + " --window 5 --out " +
                        data.string(),
                    "lam1")
                .exit_code,
            0);
  auto cfg = testutil::fresh_dir("e2e_lambda_cfg") / "t.cfg";
  write_config(cfg);
  auto out = testutil::fresh_dir("e2e_lambda_out");
  auto r = run_cli("train --config " + cfg.string() + " --data " +
                       data.string() + " --out " + out.string() +
                       " --lambda 1.5",
                   "lam2");
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.output.find("error[config]"), std::string::npos);
  EXPECT_NE(r.output.find("lambda"), std::string::npos);
  EXPECT_FALSE(fs::exists(out / "model.ckpt"));  // nothing was trained
}

TEST(cli, eval_names_both_sizes_on_vocabulary_mismatch) {
  auto raw_a = make_raw("vocab_a");
  testutil::SyntheticSpec small;
  small.n_items = 25;
  auto raw_b = testutil::fresh_dir("e2e_raw_vocab_b");
  testutil::write_ml100k_dir(raw_b, small);

  auto data_a = testutil::fresh_dir("e2e_vocab_data_a");
  auto data_b = testutil::fresh_dir("e2e_vocab_data_b");
  ASSERT_EQ(run_cli("prepare --input " + raw_a.string() +
                        " --window 5 --out " + data_a.string(),
                    "vocab1")
                .exit_code,
            0);
  ASSERT_EQ(run_cli("prepare --input " + raw_b.string() +
                        " --window 5 --out " + data_b.string(),
                    "vocab2")
                .exit_code,
            0);
  auto cfg = testutil::fresh_dir("e2e_vocab_cfg") / "t.cfg";
  write_config(cfg);
  auto run = testutil::fresh_dir("e2e_vocab_run");
  ASSERT_EQ(run_cli("train --quiet --config " + cfg.string() + " --data " +
                        data_a.string() + " --out " + run.string(),
                    "vocab3")
                .exit_code,
            0);
  auto r = run_cli("eval --ckpt " + (run / "model.ckpt").string() +
                       " --data " + data_b.string(),
                   "vocab4");
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.output.find("error[data]"), std::string::npos);
  // both vocabulary sizes appear in the message
  EXPECT_NE(r.output.find("covers"), std::string::npos);
  EXPECT_NE(r.output.find("dataset has"), std::string::npos);
}

TEST(cli, resume_restates_the_stored_validation_metric) {
  auto raw = make_raw("resume");
  auto data = testutil::fresh_dir("e2e_resume_data");
  ASSERT_EQ(run_cli("prepare --input " + raw.string() + " --window 5 --out " +
                        data.string(),
                    "res1")
                .exit_code,
            0);
  auto cfg = testutil::fresh_dir("e2e_resume_cfg") / "t.cfg";
  write_config(cfg);
  auto run1 = testutil::fresh_dir("e2e_resume_run1");
  ASSERT_EQ(run_cli("train --quiet --config " + cfg.string() + " --data " +
                        data.string() + " --out " + run1.string(),
                    "res2")
                .exit_code,
            0);
  auto run2 = testutil::fresh_dir("e2e_resume_run2");
  auto r = run_cli("train --resume " + (run1 / "model.ckpt").string() +
                       " --data " + data.string() + " --out " + run2.string(),
                   "res3");
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("resume check: validation metric"), std::string::npos);
  EXPECT_TRUE(fs::exists(run2 / "model.ckpt"));
}

TEST(cli, sweep_records_per_run_failures_and_continues) {
  auto raw = make_raw("sweep");
  auto data = testutil::fresh_dir("e2e_sweep_data");
  ASSERT_EQ(run_cli("prepare --input " + raw.string() + " --window 5 --out " +
                        data.string(),
                    "sw1")
                .exit_code,
            0);
  // idp loss with no intents is only valid at lambda = 1 (the base config
  // is fine), so ten of the eleven grid points must fail while the sweep
  // keeps going
  auto cfg = testutil::fresh_dir("e2e_sweep_cfg") / "t.cfg";
  {
    std::ofstream f(cfg);
    f << "embed_dim = 8\nintent_dim = 8\nn_intents = 0\nlambda = 1\n"
         "list_len = 3\nbatch_size = 32\nmax_epochs = 1\ndropout = 0\n"
         "threads = 2\n";
  }
  auto out = testutil::fresh_dir("e2e_sweep_out");
  auto r = run_cli("sweep --quiet --config " + cfg.string() + " --data " +
                       data.string() + " --out " + out.string(),
                   "sw2");
  EXPECT_EQ(r.exit_code, 0) << r.output;  // at least one row succeeded
  auto table = idsr::read_file(out / "sweep.tsv");
  int lines = 0, errors = 0, oks = 0;
  for (const auto& line : idsr::detail::split(table, "\n")) {
    if (line.empty()) continue;
    ++lines;
    if (line.find("\terror[config]") != std::string::npos) ++errors;
    if (line.find("\tok\t") != std::string::npos) ++oks;
  }
  EXPECT_EQ(lines, 12);  // header + 11 grid rows
  EXPECT_EQ(errors, 10);
  EXPECT_EQ(oks, 1);
}

TEST(cli, missing_subcommand_fails) {
  EXPECT_NE(run_cli("", "nosub").exit_code, 0);
  EXPECT_NE(run_cli("frobnicate", "badsub").exit_code, 0);
}

}  // namespace
