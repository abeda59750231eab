// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "jqg/datastore.hpp"
#include "test_util.hpp"

using namespace jqg;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(JQG_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("synth"), 2);  // --out missing
  EXPECT_EQ(run("bogus"), 2);
  const auto dir = jqg::testing::scratch_dir("cli_usage");
  EXPECT_EQ(run("synth --preset medium --n 1 --out " + (dir / "x.jqg").string()), 2);
  EXPECT_EQ(run("sweep --axis momentum --values 1 --data " + (dir / "x.jqg").string()), 2);
}

TEST(Cli, FileErrors) {
  const auto dir = jqg::testing::scratch_dir("cli_files");
  EXPECT_EQ(run("stats --train " + (dir / "missing.jqg").string() + " --out " + (dir / "s.txt").string()), 3);
  datastore::write_text(dir / "bad.jqg", "NOPE and more bytes");
  EXPECT_EQ(run("stats --train " + (dir / "bad.jqg").string() + " --out " + (dir / "s.txt").string()), 3);
}

TEST(Cli, DegenerateStatsExitCode) {
  const auto dir = jqg::testing::scratch_dir("cli_degenerate");
  std::vector<detector::JetWindow> zeros(2);
  zeros[0].label = detector::JetLabel::Gluon;
  zeros[1].label = detector::JetLabel::Quark;
  datastore::write_dataset(dir / "z.jqg", datastore::from_windows(zeros));
  EXPECT_EQ(run("stats --train " + (dir / "z.jqg").string() + " --out " + (dir / "s.txt").string()), 4);
}

TEST(Cli, EndToEndSmallPipeline) {
  const auto dir = jqg::testing::scratch_dir("cli_pipeline");
  const std::string d = dir.string();
  ASSERT_EQ(run("synth --preset easy --n 6 --seed 2 --out " + d + "/train.jqg"), 0);
  ASSERT_EQ(run("synth --preset easy --n 3 --seed 3 --out " + d + "/val.jqg"), 0);
  ASSERT_EQ(run("stats --train " + d + "/train.jqg --out " + d + "/stats.txt"), 0);
  ASSERT_EQ(run("preprocess --in " + d + "/val.jqg --stats " + d + "/stats.txt --out " + d + "/pre.jqg"), 0);
  const auto pre = datastore::read_dataset(dir / "pre.jqg");
  for (float v : pre.data) ASSERT_TRUE(v >= 0.0f && v < 1.0f);
  ASSERT_EQ(run("render --data " + d + "/train.jqg --label g --channel track --scale log --out " + d + "/g.pgm"), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "g.pgm"));

  const std::string tiny =
      " --set image_size=32 --set patch_size=16 --set embed_dim=8 --set depth=1 --set heads=2"
      " --set epochs=1 --set batch_size=4";
  ASSERT_EQ(run("train --data " + d + " --model vit --seeds 2 --out " + d + "/run" + tiny), 0);
  for (const char* f : {"config.txt", "stats.txt", "run_seed1.csv", "run_seed2.csv", "checkpoint_seed2.jqgc",
                        "checkpoint.jqgc", "metrics.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir / "run" / f)) << f;
  const auto rows = datastore::parse_metrics_csv(datastore::read_text(dir / "run" / "metrics.csv"));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].model, "vit");
  EXPECT_EQ(run("eval --checkpoint " + d + "/run/checkpoint.jqgc --data " + d + "/val.jqg"), 0);
  EXPECT_EQ(run("train --data " + d + " --set nonsense=1 --out " + d + "/run2"), 2);
}
