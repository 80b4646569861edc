#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mvnr_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  // Runs the CLI with `args` (already shell-quoted where needed).
  Result run(const std::string& args, const std::string& env = "") {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" MVNR_CLI "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  std::string p(const std::string& name) const { return "'" + (dir_ / name).string() + "'"; }

  fs::path dir_;
};

const char* kTwoDocs =
    "{\"id\":\"d1\",\"mean\":[1],\"var\":[2]}\n"
    "{\"id\":\"d2\",\"mean\":[0],\"var\":[1]}\n";

}  // namespace

TEST_F(CliTest, IngestSearchWorkedScores) {
  write("docs.jsonl", kTwoDocs);
  write("q.jsonl", "{\"id\":\"q\",\"mean\":[2],\"var\":[1]}\n");
  auto r = run("ingest " + p("docs.jsonl") + " " + p("idx.bin"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("indexed 2 documents, k=1, flat"), std::string::npos) << r.out;
  r = run("search " + p("idx.bin") + " " + p("q.jsonl") + " -o " + p("run.txt") + " -k 2");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir_ / "run.txt"),
            "q Q0 d1 1 -1.6931471805599454 mvn-retrieve\nq Q0 d2 2 -5 mvn-retrieve\n");

  r = run("ingest --graph " + p("docs.jsonl") + " " + p("g.bin"));
  ASSERT_EQ(r.code, 0) << r.err;
  r = run("search " + p("g.bin") + " " + p("q.jsonl") + " -o " + p("run2.txt") + " -k 2");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir_ / "run2.txt"), slurp(dir_ / "run.txt"));
}

TEST_F(CliTest, IngestErrors) {
  write("empty.jsonl", "");
  auto r = run("ingest " + p("empty.jsonl") + " " + p("idx.bin"));
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("E_INPUT:", 0), 0u) << r.err;
  EXPECT_NE(r.err.find("empty corpus"), std::string::npos);

  write("mixed.jsonl",
        "{\"id\":\"d1\",\"mean\":[0],\"var\":[1]}\n{\"id\":\"d2\",\"mean\":[0,0],\"var\":[1,1]}\n");
  r = run("ingest " + p("mixed.jsonl") + " " + p("idx.bin"));
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("E_INPUT:", 0), 0u) << r.err;
  EXPECT_NE(r.err.find(":2"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "idx.bin"));
}

TEST_F(CliTest, SearchRejectsBadIndexAndDimension) {
  write("bad.bin", "NOPE0000000000000000000000000000");
  write("q.jsonl", "{\"id\":\"q\",\"mean\":[2],\"var\":[1]}\n");
  auto r = run("search " + p("bad.bin") + " " + p("q.jsonl") + " -o " + p("run.txt"));
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("E_INDEX_MAGIC:", 0), 0u) << r.err;

  r = run("search " + p("missing.bin") + " " + p("q.jsonl") + " -o " + p("run.txt"));
  EXPECT_EQ(r.err.rfind("E_IO:", 0), 0u) << r.err;

  write("docs.jsonl", kTwoDocs);
  ASSERT_EQ(run("ingest " + p("docs.jsonl") + " " + p("idx.bin")).code, 0);
  write("q2.jsonl", "{\"id\":\"q\",\"mean\":[2,1],\"var\":[1,1]}\n");
  r = run("search " + p("idx.bin") + " " + p("q2.jsonl") + " -o " + p("run.txt"));
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("E_", 0), 0u) << r.err;
}

TEST_F(CliTest, EvalWorkedValues) {
  write("run.txt", "q Q0 a 1 3 t\nq Q0 x 2 2 t\nq Q0 b 3 1 t\n");
  write("qrels.txt", "q 0 a 1\nq 0 b 1\nq 0 c 1\n");
  const auto r = run("eval " + p("run.txt") + " " + p("qrels.txt") + " --per-query");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("mrr@10\tall\t1\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("map@1000\tall\t0.5555555555555555\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("mrr@10\tq\t1\n"), std::string::npos) << r.out;
}

TEST_F(CliTest, EvalRejectsUnjudgedQuery) {
  write("run.txt", "q Q0 a 1 3 t\n");
  write("qrels.txt", "other 0 a 1\n");
  const auto r = run("eval " + p("run.txt") + " " + p("qrels.txt"));
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("E_CONTRACT:", 0), 0u) << r.err;
}

TEST_F(CliTest, QppCorrelations) {
  std::string queries, up, down, mixed;
  const double vars[] = {1, 2, 3, 4};
  const double mixed_vals[] = {1, 3, 2, 4};
  for (int i = 0; i < 4; ++i) {
    const std::string id = "q" + std::to_string(i);
    queries += "{\"id\":\"" + id + "\",\"mean\":[0],\"var\":[" + std::to_string(vars[i]) + "]}\n";
    up += id + " " + std::to_string(i) + "\n";
    down += id + " " + std::to_string(-i) + "\n";
    mixed += id + " " + std::to_string(mixed_vals[i]) + "\n";
  }
  write("q.jsonl", queries);
  write("up.txt", up);
  write("down.txt", down);
  write("mixed.txt", mixed);
  auto r = run("qpp " + p("q.jsonl") + " " + p("up.txt"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("kendall\t1\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("pearson\t1\n"), std::string::npos) << r.out;
  r = run("qpp " + p("q.jsonl") + " " + p("down.txt"));
  EXPECT_NE(r.out.find("kendall\t-1\n"), std::string::npos) << r.out;
  r = run("qpp " + p("q.jsonl") + " " + p("mixed.txt") + " --reduction trace");
  EXPECT_NE(r.out.find("kendall\t0.6666666666666666\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("reduction\ttrace\n"), std::string::npos) << r.out;

  write("const.txt", "q0 1\nq1 1\nq2 1\nq3 1\n");
  r = run("qpp " + p("q.jsonl") + " " + p("const.txt"));
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("E_UNDEFINED:", 0), 0u) << r.err;
}

TEST_F(CliTest, SynthIsDeterministicAndSeedFlagWins) {
  const std::string opts = " --docs 60 --train-queries 4 --test-queries 3";
  ASSERT_EQ(run("synth " + p("a") + opts + " --seed 5").code, 0);
  ASSERT_EQ(run("synth " + p("b") + opts + " --seed 5").code, 0);
  ASSERT_EQ(run("synth " + p("c") + opts, "MVNR_SEED=5").code, 0);
  ASSERT_EQ(run("synth " + p("d") + opts + " --seed 6", "MVNR_SEED=5").code, 0);
  for (const char* f : {"docs.jsonl", "qrels.txt", "teacher.tsv", "lexical.run",
                        "train_queries.features.jsonl"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "c" / f)) << f;
  }
  EXPECT_NE(slurp(dir_ / "a" / "docs.jsonl"), slurp(dir_ / "d" / "docs.jsonl"));
}

TEST_F(CliTest, TrainAndEncodeSmoke) {
  const std::string d = p("s");
  ASSERT_EQ(run("synth " + d + " --docs 200 --train-queries 16 --test-queries 8").code, 0);
  const auto s = dir_ / "s";
  const auto q = [&](const char* f) { return "'" + (s / f).string() + "'"; };
  auto r = run("train --docs " + q("docs.features.jsonl") + " --queries " +
               q("train_queries.features.jsonl") + " --qrels " + q("qrels.txt") +
               " --teacher " + q("teacher.tsv") + " --pools " + q("lexical.run") +
               " -o " + p("enc.json") + " --dim 4 --steps 20 --batch-size 8 --log " +
               p("log.tsv"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "enc.json"));
  std::istringstream log(slurp(dir_ / "log.tsv"));
  std::string line;
  int rows = 0;
  while (std::getline(log, line)) ++rows;
  EXPECT_EQ(rows, 21);
  r = run("encode " + p("enc.json") + " " + q("docs.features.jsonl") + " -o " + p("emb.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(run("ingest " + p("emb.jsonl") + " " + p("idx.bin")).code, 0);
}

TEST_F(CliTest, Gradcheck) {
  auto r = run("gradcheck");
  EXPECT_EQ(r.code, 0) << r.err;
  r = run("gradcheck --tolerance 0");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("E_GRADCHECK:", 0), 0u) << r.err;
}

TEST_F(CliTest, UsageErrors) {
  for (const std::string& args : {std::string(""), std::string("frobnicate"),
                                  std::string("search only-one-arg"),
                                  std::string("synth x --docs -3")}) {
    const auto r = run(args);
    EXPECT_EQ(r.code, 2) << args;
    EXPECT_EQ(r.err.rfind("E_USAGE:", 0), 0u) << args << ": " << r.err;
  }
}

TEST_F(CliTest, GroundTruthRoundTripIsPerfect) {
  ASSERT_EQ(run("synth " + p("s") + " --docs 1000 --train-queries 8 --test-queries 40").code, 0);
  const auto s = [&](const char* f) { return "'" + (dir_ / "s" / f).string() + "'"; };
  ASSERT_EQ(run("ingest --graph " + s("docs.jsonl") + " " + p("idx.bin")).code, 0);
  ASSERT_EQ(run("search " + p("idx.bin") + " " + s("test_queries.jsonl") + " -o " + p("a.run")).code, 0);
  ASSERT_EQ(run("search " + p("idx.bin") + " " + s("test_queries.jsonl") + " -o " + p("b.run") +
                " --threads 3").code, 0);
  EXPECT_EQ(slurp(dir_ / "a.run"), slurp(dir_ / "b.run"));
  const auto r = run("eval " + p("a.run") + " " + s("qrels.txt"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("mrr@10\tall\t1\n"), std::string::npos) << r.out;
}

TEST_F(CliTest, ZeroStepTrainPersistsInit) {
  ASSERT_EQ(run("synth " + p("s") + " --docs 80 --train-queries 4 --test-queries 2").code, 0);
  const auto s = [&](const char* f) { return "'" + (dir_ / "s" / f).string() + "'"; };
  const std::string common = " --docs " + s("docs.features.jsonl") + " --queries " +
                             s("train_queries.features.jsonl") + " --qrels " + s("qrels.txt") +
                             " --teacher " + s("teacher.tsv") + " --dim 3 --steps 0";
  ASSERT_EQ(run("train" + common + " -o " + p("init.json")).code, 0);
  ASSERT_EQ(run("train" + common + " -o " + p("again.json") + " --init " + p("init.json")).code, 0);
  EXPECT_EQ(slurp(dir_ / "init.json"), slurp(dir_ / "again.json"));
  ASSERT_EQ(run("train" + common + " -o " + p("seeded.json") + " --seed 9").code, 0);
  EXPECT_NE(slurp(dir_ / "init.json"), slurp(dir_ / "seeded.json"));
}
