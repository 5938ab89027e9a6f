#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "awe/awe.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace awe;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

Result cli(const std::string& args, const std::string& env = {}) {
  const std::string cmd = env + (env.empty() ? "" : " ") + AWE_CLI_PATH + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& file) {
  std::ifstream in(file);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

nlohmann::json read_json(const fs::path& file) {
  std::ifstream in(file);
  return nlohmann::json::parse(in);
}

// Cycles labeled 0 and complete graphs labeled 1, 8..12 nodes.
fs::path synthetic_dataset(const fs::path& dir, std::size_t per_class) {
  GraphCollection c;
  c.has_labels = true;
  for (std::size_t i = 0; i < per_class; ++i) {
    c.graphs.push_back(oracle::cycle(8 + i % 5));
    c.labels.push_back(0);
    c.graphs.push_back(oracle::complete(8 + i % 5));
    c.labels.push_back(1);
  }
  save_collection(c, dir);
  return dir;
}

}  // namespace

TEST(Cli, EnumerateCounts) {
  TempDir tmp;
  const auto file = tmp.path() / "v7.txt";
  ASSERT_EQ(cli("enumerate --l 7 --out " + file.string()).code, 0);
  EXPECT_EQ(lines(file).size(), 877u);
  EXPECT_TRUE(fs::exists(fs::path(file).concat(".manifest.json")));

  const auto one = cli("enumerate --l 1");
  EXPECT_EQ(one.code, 0);
  EXPECT_EQ(one.output, "1 2\n");
}

TEST(Cli, EnumerateMatchesBruteForceInLexicographicOrder) {
  auto walks = oracle::vocabulary(3);
  std::sort(walks.begin(), walks.end());
  std::string expected;
  for (const auto& w : walks) {
    for (std::size_t i = 0; i < w.size(); ++i) expected += (i ? " " : "") + std::to_string(w[i]);
    expected += '\n';
  }
  const auto r = cli("enumerate --l 3");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.output, expected);
}

TEST(Cli, EmbedFbRecordsSampleCount) {
  TempDir tmp;
  const auto data = synthetic_dataset(tmp.path() / "syn", 3);
  const auto out = tmp.path() / "fb";
  ASSERT_EQ(cli("embed-fb --dataset " + data.string() + " --l 7 --eps 0.5 --delta 0.05 --out " + out.string()).code, 0);
  const auto m = read_json(out / "fb_sampled_l7.manifest.json");
  EXPECT_EQ(m["parameters"]["m"], 4888);
  EXPECT_EQ(m["subcommand"], "embed-fb");
  const auto table = read_embeddings(out / "fb_sampled_l7.csv");
  EXPECT_EQ(table.rows.size(), 6u);
  EXPECT_EQ(table.rows.front().size(), 877u);
  EXPECT_EQ(read_labels(out / "labels.txt"), (std::vector<int>{0, 1, 0, 1, 0, 1}));
}

TEST(Cli, EmbedFbDeterministicAndReplayable) {
  TempDir tmp;
  const auto data = synthetic_dataset(tmp.path() / "syn", 3);
  const auto args = "embed-fb --dataset " + data.string() + " --l 5 --seed 7 --threads 1 --out ";
  ASSERT_EQ(cli(args + (tmp.path() / "a").string()).code, 0);
  ASSERT_EQ(cli(args + (tmp.path() / "b").string()).code, 0);
  for (const char* f : {"fb_sampled_l5.csv", "fb_sampled_l5.json"})
    EXPECT_EQ(slurp(tmp.path() / "a" / f), slurp(tmp.path() / "b" / f)) << f;

  const auto manifest = tmp.path() / "saved.json";
  fs::copy_file(tmp.path() / "a" / "fb_sampled_l5.manifest.json", manifest);
  const auto before = slurp(tmp.path() / "a" / "fb_sampled_l5.csv");
  fs::remove_all(tmp.path() / "a");
  ASSERT_EQ(cli("replay " + manifest.string()).code, 0);
  EXPECT_EQ(slurp(tmp.path() / "a" / "fb_sampled_l5.csv"), before);
}

TEST(Cli, ExactModeCostGuard) {
  TempDir tmp;
  GraphCollection c;
  c.graphs.push_back(oracle::complete(30));
  save_collection(c, tmp.path() / "dense");
  const auto out = tmp.path() / "out";
  const auto r = cli("embed-fb --dataset " + (tmp.path() / "dense").string() + " --mode exact --l 12 --out " +
                     out.string());
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.output.find("sampled"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, DatasetNameResolvedFromEnvironment) {
  TempDir tmp;
  synthetic_dataset(tmp.path() / "SYN", 2);
  const auto out = tmp.path() / "out";
  EXPECT_EQ(cli("embed-fb --dataset SYN --mode exact --l 3 --out " + out.string()).code, 2);
  EXPECT_EQ(cli("embed-fb --dataset SYN --mode exact --l 3 --out " + out.string(),
                "AWE_DATA_DIR=" + tmp.path().string())
                .code,
            0);
  EXPECT_TRUE(fs::exists(out / "fb_exact_l3.csv"));
}

TEST(Cli, InvalidFlagsWriteNothing) {
  TempDir tmp;
  const auto data = synthetic_dataset(tmp.path() / "syn", 2);
  const auto out = tmp.path() / "out";
  const auto base = "--dataset " + data.string() + " --out " + out.string();
  EXPECT_EQ(cli("embed-fb " + base + " --mode exact --eps 0.2").code, 2);
  EXPECT_EQ(cli("embed-fb " + base + " --mode fuzzy").code, 2);
  EXPECT_EQ(cli("embed-fb " + base + " --delta 1.5").code, 2);
  EXPECT_EQ(cli("embed-dd " + base + " --full-softmax --candidates 3").code, 2);
  EXPECT_EQ(cli("embed-dd " + base + " --l 3 --candidates 5").code, 2);  // vocabulary of 5 allows at most 4
  EXPECT_EQ(cli("embed-dd " + base + " --walks 5 --window 4").code, 2);
  EXPECT_EQ(cli("embed-fb " + base + " --no-such-flag").code, 2);
  EXPECT_EQ(cli("no-such-command").code, 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, EmbedDdDefaultsAndZeroEpochs) {
  TempDir tmp;
  const auto data = synthetic_dataset(tmp.path() / "syn", 2);
  const auto out = tmp.path() / "dd";
  ASSERT_EQ(cli("embed-dd --dataset " + data.string() + " --l 4 --epochs 0 --seed 3 --out " + out.string()).code, 0);
  const auto m = read_json(out / "dd_l4.manifest.json");
  EXPECT_EQ(m["parameters"]["d_a"], 128);
  EXPECT_EQ(m["parameters"]["d_g"], 128);
  EXPECT_EQ(m["parameters"]["window"], 4);
  EXPECT_EQ(m["parameters"]["walks_per_node"], 100);

  TrainConfig cfg;
  cfg.seed = 3;
  const WalkVocabulary vocab(4);
  const auto init = init_params(vocab, 4, cfg);
  const auto table = read_embeddings(out / "dd_l4.csv");
  ASSERT_EQ(table.rows.size(), 4u);
  for (std::size_t g = 0; g < 4; ++g) {
    const auto row = init.graph_row(g);
    EXPECT_EQ(table.rows[g], std::vector<double>(row.begin(), row.end()));
  }
  const auto ckpt = load_checkpoint(out / "dd_l4.ckpt", vocab);
  EXPECT_EQ(ckpt.D, init.D);
}

TEST(Cli, EmbedDdDeterministic) {
  TempDir tmp;
  const auto data = synthetic_dataset(tmp.path() / "syn", 2);
  const auto args = "embed-dd --dataset " + data.string() +
                    " --l 5 --epochs 2 --iterations 10 --walk-dim 8 --graph-dim 8 --window 2 --walks 20 --out ";
  ASSERT_EQ(cli(args + (tmp.path() / "a").string()).code, 0);
  ASSERT_EQ(cli(args + (tmp.path() / "b").string()).code, 0);
  for (const char* f : {"dd_l5.csv", "dd_l5.ckpt"})
    EXPECT_EQ(slurp(tmp.path() / "a" / f), slurp(tmp.path() / "b" / f)) << f;
}

TEST(Cli, ClassifySeparableSynthetic) {
  TempDir tmp;
  const auto data = synthetic_dataset(tmp.path() / "syn", 10);
  const auto fb = tmp.path() / "fb";
  ASSERT_EQ(cli("embed-fb --dataset " + data.string() + " --mode exact --l 3 --out " + fb.string()).code, 0);
  ASSERT_EQ(cli("embed-fb --dataset " + data.string() + " --mode exact --l 4 --out " + fb.string()).code, 0);
  const auto out = tmp.path() / "report";
  const auto r = cli("classify --embeddings " + (fb / "fb_exact_l3.csv").string() + " " +
                     (fb / "fb_exact_l4.json").string() + " --labels " + (fb / "labels.txt").string() +
                     " --folds 5 --repeats 2 --kernel rbf:0.1 inner --C 1 10 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto report = read_json(out / "report.json");
  EXPECT_EQ(report["summary"]["mean_accuracy"], 1.0);
  EXPECT_EQ(report["folds"].size(), 10u);
  EXPECT_TRUE(fs::exists(out / "report.manifest.json"));
}

TEST(Cli, ClassifyMissingLabelsFailsBeforeCompute) {
  TempDir tmp;
  const auto data = synthetic_dataset(tmp.path() / "syn", 3);
  const auto fb = tmp.path() / "fb";
  ASSERT_EQ(cli("embed-fb --dataset " + data.string() + " --mode exact --l 3 --out " + fb.string()).code, 0);
  const auto out = tmp.path() / "report";
  const auto r = cli("classify --embeddings " + (fb / "fb_exact_l3.csv").string() + " --labels " +
                     (tmp.path() / "missing.txt").string() + " --out " + out.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("labels file not found"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, GramExport) {
  TempDir tmp;
  const auto data = synthetic_dataset(tmp.path() / "syn", 2);
  const auto fb = tmp.path() / "fb";
  ASSERT_EQ(cli("embed-fb --dataset " + data.string() + " --mode exact --l 3 --out " + fb.string()).code, 0);
  ASSERT_EQ(cli("gram --embeddings " + (fb / "fb_exact_l3.csv").string() + " --kernel rbf:1 --out " + fb.string()).code,
            0);
  const auto rows = lines(fb / "fb_exact_l3_gram.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].substr(0, 2), "1,");
  EXPECT_EQ(read_json(fb / "fb_exact_l3_gram.json")["kernel"], "rbf:1");
}

TEST(Cli, ScalabilityOutputs) {
  TempDir tmp;
  const auto out = tmp.path() / "sc";
  ASSERT_EQ(cli("scalability --sizes 10 100 --mu 2 3 --reps 2 --l 4 --walks 20 --iterations 5 --dims 8 --out " +
                out.string())
                .code,
            0);
  const auto csv = lines(out / "scalability.csv");
  ASSERT_EQ(csv.size(), 5u);
  EXPECT_EQ(csv[0], "n,mu,mean_seconds,std_seconds");
  const auto plot = read_json(out / "scalability_plot.json");
  EXPECT_EQ(plot["x_scale"], "log");
  ASSERT_EQ(plot["series"].size(), 2u);
  EXPECT_EQ(plot["series"][0]["mu"], 2.0);
  EXPECT_EQ(plot["series"][0]["x"], nlohmann::json({10, 100}));
  EXPECT_EQ(plot["series"][0]["log10_x"], nlohmann::json({1.0, 2.0}));
}
